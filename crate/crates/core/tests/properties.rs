use flow_core::experiments::{format_csv, parse_csv, TimeSeriesRecord};
use flow_core::solvers::factorize;
use flow_core::sparse::SparseMatrix;
use flow_core::stability::{g_eigen_bounds, g_identity_sides, gnorm_sq, GTriple};
use flow_core::timestepping::{extrapolate3, step_count, FieldHistory, SchemeCoeffs};
use proptest::prelude::*;

fn levels(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1e3..1e3f64, n), 4)
}

proptest! {
    #[test]
    fn extrapolation_is_exact_on_quadratics(a in -10.0..10.0f64, b in -10.0..10.0f64, c in -10.0..10.0f64, n in 2..1000usize) {
        let q = |k: f64| a * k * k + b * k + c;
        let n = n as f64;
        let h = FieldHistory::from_levels([vec![q(n)], vec![q(n - 1.0)], vec![q(n - 2.0)]]).unwrap();
        let e = extrapolate3(&h, &SchemeCoeffs::BLEBDF)[0];
        prop_assert!((e - q(n + 1.0)).abs() <= 1e-12 * (1.0 + q(n).abs() + q(n - 2.0).abs() + q(n + 1.0).abs()));
    }

    #[test]
    fn g_identity_holds_for_any_sequence(w in levels(3)) {
        let mass = SparseMatrix::from_dense(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.1], vec![0.0, 0.1, 3.0]]);
        let (lhs, rhs) = g_identity_sides([&w[0], &w[1], &w[2], &w[3]], &mass).unwrap();
        let scale: f64 = w.iter().map(|l| mass.bilinear(l, l).unwrap()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1e-300));
    }

    #[test]
    fn g_norm_is_equivalent_to_l2(w in levels(5)) {
        let mass = SparseMatrix::identity(5);
        let t = GTriple::new([&w[0], &w[1], &w[2]], &mass).unwrap();
        let (c_l, c_u) = g_eigen_bounds();
        let (l2, g) = (t.l2_sq().unwrap(), gnorm_sq(&t).unwrap());
        prop_assert!(g >= 0.0);
        prop_assert!(c_l * g <= l2 * (1.0 + 1e-12) + 1e-300);
        prop_assert!(l2 <= c_u * g * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn step_count_covers_the_interval(t_end in 0.01..500.0f64, dt in 0.001..5.0f64) {
        let n = step_count(t_end, dt).unwrap();
        prop_assert!(n >= 1);
        prop_assert!(n as f64 * dt >= t_end * (1.0 - 1e-9));
        prop_assert!((n as f64 - 1.0) * dt < t_end);
    }

    #[test]
    fn lu_solves_diagonally_dominant_systems(
        entries in prop::collection::vec((0..30usize, 0..30usize, -1.0..1.0f64), 0..120),
        x0 in prop::collection::vec(-5.0..5.0f64, 30),
    ) {
        let mut t: Vec<(usize, usize, f64)> = entries.into_iter().filter(|(i, j, _)| i != j).collect();
        let mut row_sum = [0.0; 30];
        for &(i, _, v) in &t {
            row_sum[i] += v.abs();
        }
        for (i, s) in row_sum.iter().enumerate() {
            t.push((i, i, s + 1.0));
        }
        let a = SparseMatrix::from_triplets(30, 30, &t).unwrap();
        let b = a.matvec(&x0).unwrap();
        let x = factorize(&a).unwrap().solve(&b).unwrap();
        for (p, q) in x.iter().zip(&x0) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn csv_round_trips(
        rows in prop::collection::vec(
            (-1e150..1e150f64, prop::option::of(-1e300..1e300f64), prop::option::of(-1e300..1e300f64), prop::option::of(0.0..1e6f64)),
            1..20,
        )
    ) {
        let records: Vec<TimeSeriesRecord> = rows
            .iter()
            .enumerate()
            .map(|(k, &(u, t, c, b))| TimeSeriesRecord {
                step: k + 1,
                t: 0.5 * (k + 1) as f64,
                l2_u: u.abs(),
                l2_t: t.map(f64::abs),
                l2_c: c,
                gnorm_u: Some(u * u),
                bound: b,
                elapsed_s: 1e-3 * k as f64,
            })
            .collect();
        let back = parse_csv(&format_csv(&records)).unwrap();
        prop_assert_eq!(back, records);
    }
}
