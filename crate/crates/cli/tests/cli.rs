use std::process::{Command, Output};

fn rbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbm"))
        .args(args)
        .env_remove("RBM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn dyson_run_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dyson");
    let o = rbm(&[
        "run", "--model", "dyson", "--n", "1000", "--tau", "1e-3", "--t-end", "0.5", "--p", "2",
        "--scheme", "rbm1", "--seed", "42", "--snapshots", "0.25,0.5", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["plan.cfg", "metrics.csv", "hist_t0.25.csv", "hist_t0.5.csv", "status"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cfg = std::fs::read_to_string(out.join("plan.cfg")).unwrap();
    assert!(cfg.contains("seed = 42"));
}

#[test]
fn emitted_plan_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = rbm(&["run", "--model", "wealth", "--n", "500", "--t-end", "0.2", "--snapshots", "0.2", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = a.join("plan.cfg");
    let o = rbm(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("hist_t0.2.csv")).unwrap(),
        std::fs::read(b.join("hist_t0.2.csv")).unwrap()
    );
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.cfg");
    std::fs::write(&cfg, "model = test1d\nn = 40\nt_end = 0.25\n").unwrap();
    let out = dir.path().join("o");
    let o = rbm(&["run", "--config", cfg.to_str().unwrap(), "--n", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("n 30"));
}

#[test]
fn seed_falls_back_to_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_rbm"))
        .args(["run", "--model", "test1d", "--n", "20", "--t-end", "0.25", "--record-every", "0"])
        .env("RBM_SEED", "7")
        .output()
        .unwrap();
    let p = Command::new(env!("CARGO_BIN_EXE_rbm"))
        .args(["run", "--model", "test1d", "--n", "20", "--t-end", "0.25", "--record-every", "0", "--seed", "7"])
        .env_remove("RBM_SEED")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), stdout(&p));
}

#[test]
fn verify_lemma_passes() {
    let o = rbm(&["verify-lemma", "--n", "6", "--p", "2", "--sets", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.lines().last().unwrap().starts_with("PASS"), "{s}");
    assert!(!s.contains("FAIL"));
}

#[test]
fn argument_errors_exit_2() {
    for args in [
        vec!["run", "--model", "unknown"],
        vec!["run", "--model", "dyson", "--n", "abc"],
        vec!["run", "--model", "dyson", "--bogus", "1"],
        vec!["run"],
        vec!["frobnicate"],
        vec!["run", "--model", "test1d", "--tau", "0.3", "--t-end", "1"],
        vec!["verify-lemma", "--n", "5", "--p", "2"],
    ] {
        let o = rbm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn runtime_failures_exit_1() {
    let o = rbm(&["run", "--model", "test1d", "--n", "10", "--tau", "10", "--t-end", "5000", "--beta", "1e300"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = rbm(&["reorder", "--matrix", "/nonexistent/graph.mtx", "--n", "4"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn help_lists_flags_with_defaults() {
    for sub in ["run", "converge", "bench", "cluster", "reorder", "verify-lemma"] {
        let o = rbm(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let s = stdout(&o);
        assert!(s.contains("--seed"), "{sub}");
        assert!(s.contains("default"), "{sub}");
    }
}

#[test]
fn cluster_and_reorder_on_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("g.mtx");
    // Two triangles joined by one edge.
    std::fs::write(
        &mtx,
        "%%MatrixMarket matrix coordinate pattern symmetric\n6 6 7\n2 1\n3 1\n3 2\n5 4\n6 4\n6 5\n4 3\n",
    )
    .unwrap();
    let out = dir.path().join("c");
    let o = rbm(&["cluster", "--matrix", mtx.to_str().unwrap(), "--n", "6", "--t-end", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("labels.txt")).unwrap().lines().count(), 6);

    let o = rbm(&["reorder", "--matrix", mtx.to_str().unwrap(), "--n", "6", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let mut perm: Vec<usize> = s.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    perm.sort_unstable();
    assert_eq!(perm, (0..6).collect::<Vec<_>>());
}

#[test]
fn converge_and_bench_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv");
    let o = rbm(&[
        "converge", "--model", "test1d", "--n", "50", "--t-end", "0.5", "--taus", "0.125,0.0625",
        "--reference-tau", "0.0078125", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("convergence.csv")).unwrap().lines().count(), 3);
    assert!(stdout(&o).contains("slope n=50"));

    let o = rbm(&[
        "bench", "--model", "test1d", "--ns", "50,100", "--steps", "2", "--repeats", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("timing.csv")).unwrap().lines().count(), 5);
}
