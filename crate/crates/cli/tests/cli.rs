use std::path::Path;
use std::process::{Command, Output};

fn flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flow")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_csv_with_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nse.csv");
    let o = flow(&["run", "--problem", "nse", "--nx", "4", "--ny", "4", "--dt", "0.5", "--t-end", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out);
    assert_eq!(rows[0].join(","), "step,t,l2_u,l2_T,l2_C,gnorm_u,bound,elapsed_s");
    assert_eq!(rows.len(), 5);
    for r in &rows[1..] {
        assert_eq!(r.len(), 8);
        assert!(r[3].is_empty() && r[4].is_empty());
        assert!(r[2].contains('e') && r[6].parse::<f64>().unwrap() > 0.0);
    }
    assert_eq!(rows[4][1].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn config_file_is_merged_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dd.cfg");
    let out = dir.path().join("dd.csv");
    std::fs::write(
        &cfg,
        format!(
            "# thermosolutal cavity\nproblem = doublediff\nnx = 3\nny = 6\ndt = 0.5\nt_end = 5   # overridden below\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = flow(&["run", "--config", cfg.to_str().unwrap(), "--t-end", "1.5", "--scheme", "bdf2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        assert!(!r[3].is_empty() && !r[4].is_empty());
        assert!(r[6].is_empty(), "no bound column for bdf2");
    }
    assert!(stdout(&o).contains("doublediff bdf2"));

    let clash = flow(&["run", "--config", cfg.to_str().unwrap(), "--problem", "nse"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = flow(&["run", "--problem", "nse", "--dt=-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert!(!flow(&["run", "--problem", "nse"]).status.success());
    assert!(!flow(&["run", "--problem", "vortex", "--out", "y.csv"]).status.success());
}

#[test]
fn verify_reports_all_checks() {
    let o = flow(&["verify", "--seed", "7"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["g-identity", "skew-symmetry", "g-eigen-bounds", "ode-error-ratio"] {
        assert!(s.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{name}: {s}");
    }
}

#[test]
fn bench_reports_both_schemes() {
    let o = flow(&["bench", "--nx", "4", "--ny", "4", "--t-end", "1", "--dts", "0.5,0.25"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.contains("blebdf")).count(), 2);
    assert_eq!(s.lines().filter(|l| l.contains("bdf2")).count(), 2);
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS dt=")).count(), 2);
}
