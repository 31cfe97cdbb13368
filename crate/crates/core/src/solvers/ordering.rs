//! Fill-reducing orderings computed on the symmetrized pattern `A + Aᵀ`.

use std::collections::VecDeque;

use crate::sparse::SparseMatrix;

/// Above this size the dense elimination-graph bitsets of the minimum degree
/// ordering get too large and reverse Cuthill-McKee is used instead.
const MIN_DEGREE_LIMIT: usize = 12_000;

/// Column ordering `q` (new position `k` holds old index `q[k]`).
pub fn fill_reducing_order(a: &SparseMatrix) -> Vec<usize> {
    let adj = symmetric_adjacency(a);
    if adj.len() <= MIN_DEGREE_LIMIT {
        minimum_degree(&adj)
    } else {
        reverse_cuthill_mckee(&adj)
    }
}

fn symmetric_adjacency(a: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for row in adj.iter_mut() {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

/// Exact minimum degree on the explicit elimination graph. Ties go to the
/// lowest index, so the ordering is deterministic.
pub fn minimum_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let words = n.div_ceil(64);
    let mut graph = vec![0u64; n * words];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            graph[i * words + j / 64] |= 1 << (j % 64);
        }
    }
    let mut alive = vec![u64::MAX; words];
    if !n.is_multiple_of(64) {
        alive[words - 1] = (1u64 << (n % 64)) - 1;
    }
    if n == 0 {
        return Vec::new();
    }
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbours = Vec::new();
    let mut merged = vec![0u64; words];
    for _ in 0..n {
        let v = (0..n)
            .filter(|&i| !eliminated[i])
            .min_by_key(|&i| degree[i])
            .expect("a node remains");
        eliminated[v] = true;
        order.push(v);
        alive[v / 64] &= !(1 << (v % 64));
        neighbours.clear();
        for w in 0..words {
            let mut bits = graph[v * words + w] & alive[w];
            merged[w] = bits;
            while bits != 0 {
                neighbours.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        for &u in &neighbours {
            let row = &mut graph[u * words..(u + 1) * words];
            let mut deg = 0;
            for w in 0..words {
                row[w] = (row[w] | merged[w]) & alive[w];
                deg += row[w].count_ones() as usize;
            }
            // The merged set contains u itself.
            if row[u / 64] & (1 << (u % 64)) != 0 {
                row[u / 64] &= !(1 << (u % 64));
                deg -= 1;
            }
            degree[u] = deg;
        }
    }
    order
}

/// Reverse Cuthill-McKee, started from a minimum-degree node of each
/// connected component.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }

    fn path(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect()
    }

    #[test]
    fn orderings_are_permutations() {
        for n in [1, 5, 64, 65, 130] {
            let adj = path(n);
            assert!(is_permutation(&minimum_degree(&adj), n));
            assert!(is_permutation(&reverse_cuthill_mckee(&adj), n));
        }
        assert!(minimum_degree(&[]).is_empty());
    }

    #[test]
    fn star_centre_is_eliminated_late() {
        // Node 0 connected to all others: eliminating it first would create a clique.
        let n = 10;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| if i == 0 { (1..n).collect() } else { vec![0] })
            .collect();
        let order = minimum_degree(&adj);
        assert!(order[n - 2..].contains(&0));
    }
}
