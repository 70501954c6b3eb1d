use std::path::Path;
use std::process::{Command, Output};

fn flagopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flagopt"))
        .args(args)
        .env_remove("FLAGOPT_TOL")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, family: &str, n: &str, m: &str, sigma: &str, seed: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let o = flagopt(&["gen", family, "--n", n, "--m", m, "--sigma", sigma, "--seed", seed, "-o", s(&path)]);
    assert!(o.status.success(), "{}", text(&o));
    path
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "eq-qp", "20", "5", "1", "7");
    let b = gen(dir.path(), "b.json", "eq-qp", "20", "5", "1", "7");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = gen(dir.path(), "c.json", "eq-qp", "20", "5", "1", "8");
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn gen_rejects_bad_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = flagopt(&["gen", "eq-qp", "--n", "20", "--m", "30", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(!out.exists());
}

#[test]
fn solve_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "eq-qp", "20", "5", "1", "7");
    let stem = dir.path().join("run");
    let o = flagopt(&[
        "solve", "--problem", s(&p), "--map", "prox-lin-al", "--policy", "gram:0.25", "--mode", "fast", "--iters",
        "1000", "-o", s(&stem),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    let data = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data, 1001);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["rates"]["bounds_hold"], true);
    assert_eq!(report["rates"]["condition_P"], "met");
    assert!(report["rates"]["slope"].as_f64().unwrap() <= -1.8);

    let v = flagopt(&["verify", "--problem", s(&p), "--trajectory", s(&stem.with_extension("csv"))]);
    assert!(v.status.success(), "{}", text(&v));
    assert!(text(&v).contains("PASS"));
}

#[test]
fn mu_interval_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "eq-qp", "10", "3", "1", "1");
    let stem = dir.path().join("run");
    let base = ["solve", "--problem", s(&p), "--map", "prox-lin-al", "--iters", "10", "-o", s(&stem)];
    let mut args = base.to_vec();
    args.extend(["--mode", "fast", "--mu", "2.0"]);
    let o = flagopt(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("μ ≤ δ required"), "{}", text(&o));
    let mut args = base.to_vec();
    args.extend(["--mode", "ergodic", "--mu", "1.5"]);
    assert!(flagopt(&args).status.success());
}

#[test]
fn gen_solve_verify_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for tag in ["a", "b"] {
        let p = gen(dir.path(), &format!("{tag}.json"), "lasso-split", "20", "6", "0", "3");
        let stem = dir.path().join(format!("run-{tag}"));
        let o = flagopt(&[
            "solve", "--problem", s(&p), "--map", "prox-lin-admm", "--mode", "classic", "--iters", "300", "-o",
            s(&stem),
        ]);
        assert!(o.status.success(), "{}", text(&o));
        let v = flagopt(&["verify", "--problem", s(&p), "--trajectory", s(&stem.with_extension("csv"))]);
        files.push((
            std::fs::read(stem.with_extension("csv")).unwrap(),
            std::fs::read(stem.with_extension("json")).unwrap(),
            v.stdout,
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn truncated_trajectory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "eq-qp", "10", "3", "1", "2");
    let stem = dir.path().join("run");
    assert!(flagopt(&["solve", "--problem", s(&p), "--map", "prox-lin-al", "--iters", "50", "-o", s(&stem)])
        .status
        .success());
    let csv = stem.with_extension("csv");
    let body = std::fs::read_to_string(&csv).unwrap();
    let keep: Vec<&str> = body.lines().take(body.lines().count() - 10).collect();
    std::fs::write(&csv, keep.join("\n")).unwrap();
    let o = flagopt(&["verify", "--problem", s(&p), "--trajectory", s(&csv)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(text(&o).contains("41 data rows, expected 51"), "{}", text(&o));
}

#[test]
fn certify_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "eq-qp", "10", "3", "1", "4");
    let o = flagopt(&["certify", "--problem", s(&p), "--map", "prox-lin-al", "--policy", "gram:1", "--states", "20"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    assert!(out.contains("PASS") && out.contains("delta 1.0"), "{out}");

    let q = gen(dir.path(), "q.json", "block-qp", "10", "3", "0", "4");
    let o = flagopt(&["certify", "--problem", s(&q), "--map", "prox-lin-admm", "--policy", "identity:0.01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("λmin(M₂) > ρλmax(BᵀB)"), "{}", text(&o));
}

#[test]
fn sweep_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "block-qp", "10", "3", "1", "5");
    let out = dir.path().join("sweep");
    let o = flagopt(&[
        "sweep", "--problem", s(&p), "--maps", "prox-admm", "--maps", "prox-lin-admm", "--modes", "classic",
        "--modes", "ergodic", "--iters", "100", "--jobs", "2", "-o", s(&out),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5, "{summary}");
}

#[test]
fn missing_problem_file() {
    let o = flagopt(&["solve", "--problem", "/nonexistent/p.json", "--map", "prox-al", "-o", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn solve_reads_a_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", "eq-qp", "10", "3", "1", "6");
    let stem = dir.path().join("cfg");
    let cfg = dir.path().join("run.json");
    let body = serde_json::json!({
        "problem": p, "map": "prox-lin-al", "policy": "gram:0.25", "mode": "classic", "iters": 40, "out": stem,
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = flagopt(&["solve", "--config", s(&cfg), "--iters", "25"]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.contains("# mode=classic") && csv.contains("# policy=gram:0.25"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 27);

    std::fs::write(&cfg, r#"{"problem": "p.json", "map": "prox-lin-al", "colour": 3}"#).unwrap();
    assert_eq!(flagopt(&["solve", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(flagopt(&["solve", "--map", "prox-al"]).status.code(), Some(2));
}
