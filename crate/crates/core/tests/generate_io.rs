mod common;

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::io::{load_trajectory, read_problem, save_trajectory, write_problem, CsvHeader, CSV_COLUMNS};
use flagopt::linalg;
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::reference_solve;
use flagopt::FlagError;

#[test]
fn conditioning_is_controlled() {
    for cond in [2.0, 10.0, 100.0] {
        for seed in 0..3 {
            let p = generate(&GenSpec::new(Family::EqQp, 15, 4, 1.0, seed).with_conditioning(cond)).unwrap();
            let h = &p.flat_objective().h;
            let ratio = linalg::lambda_max(h) / linalg::lambda_min(h);
            assert!((ratio / cond - 1.0).abs() <= 0.05, "cond {cond}: {ratio}");
            assert!((linalg::lambda_min(h) - 1.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn quadratic_families_have_accurate_references() {
    for seed in 0..4 {
        for family in [Family::EqQp, Family::BlockQp] {
            for sigma in [0.0, 1.0] {
                let p = common::gen(family, 12, 4, sigma, seed);
                let r = reference_solve(&p).unwrap();
                assert!(r.kkt_residual <= 1e-9, "{family} {sigma}: {}", r.kkt_residual);
            }
        }
    }
}

#[test]
fn every_family_is_feasible_and_deterministic() {
    for family in Family::ALL {
        let spec = GenSpec::new(family, 12, 4, 0.5, 9);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b, "{family}");
        let x = a.feasible_point().unwrap();
        assert!(a.feasibility_residual(x).unwrap() <= 1e-10);
        assert!(a.eval_objective(x).is_finite());
    }
}

#[test]
fn lasso_split_structure() {
    let p = common::gen(Family::LassoSplit, 12, 4, 0.0, 3);
    let split = p.block().unwrap();
    let a = p.constraint_map().matrix();
    let minus_i = a.columns(split.u_dim, split.v_dim);
    assert_eq!(minus_i, -nalgebra::DMatrix::identity(split.v_dim, split.v_dim));
    assert!(p.rhs().iter().all(|v| *v == 0.0));
    assert_eq!(split.u_dim + split.v_dim, 12);
}

#[test]
fn invalid_specs() {
    for (family, n, m) in [(Family::EqQp, 4, 5), (Family::LassoSplit, 4, 4), (Family::BlockQp, 1, 1)] {
        assert!(matches!(generate(&GenSpec::new(family, n, m, 0.0, 0)), Err(FlagError::Config(_))));
    }
    assert!("nope".parse::<Family>().is_err());
}

#[test]
fn problem_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let p = common::gen(family, 10, 3, 1.0, 4);
        let path = dir.path().join(format!("{family}.json"));
        write_problem(&path, &p).unwrap();
        let q = read_problem(&path).unwrap();
        assert_eq!(p, q, "{family}");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"flagopt-problem/1\""));
        write_problem(&path, &q).unwrap();
        assert_eq!(text, std::fs::read_to_string(&path).unwrap());
    }
}

#[test]
fn missing_or_malformed_problem_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    assert!(matches!(read_problem(&path), Err(FlagError::Io(_))));
    std::fs::write(&path, "{\"format\": \"flagopt-problem/1\"").unwrap();
    assert!(read_problem(&path).is_err());
}

#[test]
fn trajectory_roundtrip_and_truncation() {
    let prob = common::gen(Family::EqQp, 8, 3, 1.0, 0);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let r = reference_solve(&prob).unwrap();
    let traj = run(&prob, &inst, &RunParams::new(Mode::Fast, 30), Some(&r)).unwrap();
    let header = CsvHeader::from_meta(&traj.meta, "auto:1", 30);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    save_trajectory(&path, &header, &traj).unwrap();
    let (h, recs) = load_trajectory(&path).unwrap();
    assert_eq!(h, header);
    assert_eq!(recs, traj.records);

    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().any(|l| l == CSV_COLUMNS.join(",")));
    let cut: Vec<&str> = text.lines().take(text.lines().count() - 5).collect();
    std::fs::write(&path, cut.join("\n") + "\n").unwrap();
    match load_trajectory(&path) {
        Err(FlagError::Io(msg)) => assert!(msg.contains("26 data rows, expected 31"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn smooth_composite_declares_lipschitz_constant() {
    let p = common::gen(Family::SmoothComposite, 10, 3, 0.5, 1);
    let h = p.smooth().unwrap();
    assert!(h.lipschitz_grad + 1e-12 >= linalg::lambda_max(&h.h));
    assert_eq!(p.sigma(), 0.5);
    assert!(p.flat_objective().l1.iter().any(|w| *w > 0.0));
}
