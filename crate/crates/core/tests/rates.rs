mod common;

use common::qp_1d;
use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::Family;
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy, PrimalMap};
use flagopt::problem::ConstrainedProblem;
use flagopt::prox::WeightMatrix;
use flagopt::rates::{
    bound_constant, default_c, kkt_residual, reference_solve, verify_trajectory, ConditionP, RateReport,
};
use nalgebra::DMatrix;

fn solve(prob: &ConstrainedProblem, inst: &MapInstance, params: &RunParams) -> RateReport {
    let r = reference_solve(prob).unwrap();
    let traj = run(prob, inst, params, Some(&r)).unwrap();
    verify_trajectory(&traj, &r, inst.certificate())
}

#[test]
fn fast_rate_on_the_1d_problem() {
    let prob = qp_1d();
    // P = M − ρ𝒜ᵀ𝒜 = 0.5 = σ/2
    let inst = MapInstance::new(
        MapConfig {
            map: PrimalMap::ProxLinAl {
                m: WeightMatrix::new(DMatrix::from_element(1, 1, 1.5)).unwrap(),
            },
            rho: 1.0,
        },
        &prob,
    )
    .unwrap();
    assert!(inst.certificate().fast_rate_condition());
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Fast, 1000));
    assert!(rep.bounds_hold, "{rep:?}");
    assert_eq!(rep.condition_p, ConditionP::Met);
    assert!(rep.slope.unwrap() <= -1.8, "{rep:?}");
}

#[test]
fn fast_rate_on_eq_qp() {
    let prob = common::gen(Family::EqQp, 20, 5, 1.0, 3);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::ShiftedGram { shift: 0.25 }, &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Fast, 1000));
    assert!(rep.bounds_hold, "{rep:?}");
    assert!(rep.slope.unwrap() <= -1.8, "{rep:?}");
    assert_eq!(rep.checked, 1000);
}

#[test]
fn classic_rate_on_lasso() {
    let prob = common::gen(Family::LassoSplit, 30, 8, 0.0, 0);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Classic, 1000));
    assert!(rep.bounds_hold, "{rep:?}");
    assert_eq!(rep.p, 1);
    assert!(rep.slope.unwrap() <= -0.9, "{rep:?}");
}

#[test]
fn unmet_condition_is_not_certified() {
    let prob = common::gen(Family::EqQp, 20, 5, 1.0, 3);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    assert!(!inst.certificate().fast_rate_condition());
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Fast, 100));
    assert_eq!(rep.condition_p, ConditionP::Unmet);
    assert!(!rep.bounds_hold);
    assert_eq!(rep.first_violation, None);
    assert!(rep.note.is_some());
}

#[test]
fn start_at_the_solution() {
    for (prob, kind, mode) in [
        (common::gen(Family::EqQp, 12, 4, 1.0, 1), MapKind::ProxLinAl, Mode::Classic),
        (common::gen(Family::BlockQp, 10, 4, 1.0, 1), MapKind::ProxAdmm, Mode::Classic),
        (common::gen(Family::LassoSplit, 12, 4, 0.0, 1), MapKind::ProxLinAdmm, Mode::Ergodic),
    ] {
        let r = reference_solve(&prob).unwrap();
        let cfg = MapConfig::from_policy(kind, 1.0, MatrixPolicy::default(), &prob).unwrap();
        let inst = MapInstance::new(cfg, &prob).unwrap();
        let params = RunParams::new(mode, 200).with_start(r.x_star.clone(), r.y_star.clone());
        let traj = run(&prob, &inst, &params, Some(&r)).unwrap();
        for rec in &traj.records[1..] {
            assert!((rec.psi_x - r.psi_star).abs() <= 1e-9, "{kind} k = {}", rec.k);
        }
        assert!(verify_trajectory(&traj, &r, inst.certificate()).bounds_hold);
    }
}

#[test]
fn ergodic_rates() {
    let prob = common::gen(Family::EqQp, 20, 5, 1.0, 5);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::ShiftedGram { shift: 0.25 }, &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Ergodic, 500));
    assert!(rep.bounds_hold && rep.ergodic && rep.p == 2, "{rep:?}");
    assert!(rep.note.unwrap().contains("B/N²"));

    let prob = common::gen(Family::LassoSplit, 20, 5, 0.0, 5);
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Ergodic, 500).with_mu(1.8));
    assert!(rep.bounds_hold && rep.p == 1, "{rep:?}");
}

#[test]
fn report_json_shape() {
    let prob = qp_1d();
    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob).unwrap();
    let inst = MapInstance::new(cfg, &prob).unwrap();
    let rep = solve(&prob, &inst, &RunParams::new(Mode::Classic, 50));
    let j = serde_json::to_value(&rep).unwrap();
    assert!(j["bounds_hold"].is_boolean());
    assert!(j["first_violation"].is_null());
    assert!(j["slope"].is_number());
    assert_eq!(j["condition_P"], "met");
}

#[test]
fn reference_examples() {
    let r = reference_solve(&qp_1d()).unwrap();
    assert!((r.x_star[0] - 1.0).abs() < 1e-12);
    assert!((r.y_star[0] + 1.0).abs() < 1e-12);
    assert!((r.psi_star - 0.5).abs() < 1e-12);
    assert_eq!(r.c, default_c(&r.y_star));
    let p = qp_1d();
    let res = kkt_residual(&p.flat_psi(), p.constraint_map().matrix(), p.rhs(), &r.x_star, &r.y_star);
    assert!(res < 1e-12);

    let lasso = common::gen(Family::LassoSplit, 12, 4, 0.0, 2);
    let r = reference_solve(&lasso).unwrap();
    assert!(r.agreement.unwrap() <= 1e-8);
}

#[test]
fn saddle_point_inequality() {
    use flagopt::lagrangian::eval_lagrangian;
    let mut rng = flagopt::random::seeded(17);
    for prob in [
        common::gen(Family::EqQp, 10, 3, 1.0, 0),
        common::gen(Family::LassoSplit, 10, 3, 0.0, 0),
        common::gen(Family::SmoothComposite, 10, 3, 0.5, 0),
    ] {
        let r = reference_solve(&prob).unwrap();
        let mid = eval_lagrangian(&prob, &r.x_star, &r.y_star);
        for _ in 0..100 {
            let x = &r.x_star + flagopt::random::normal_vec(&mut rng, prob.n());
            let y = flagopt::random::normal_vec(&mut rng, prob.m()) * 3.0;
            let left = eval_lagrangian(&prob, &r.x_star, &y);
            let right = eval_lagrangian(&prob, &x, &r.y_star);
            assert!(left <= mid + 1e-7);
            assert!(mid <= right + 1e-7);
        }
    }
}

#[test]
fn bound_constant_grows_with_c() {
    let p = DMatrix::identity(2, 2) * 0.3;
    let x = nalgebra::DVector::from_column_slice(&[1.0, -2.0]);
    let z0 = nalgebra::DVector::zeros(2);
    let y0 = nalgebra::DVector::from_column_slice(&[0.5]);
    let mut prev = 0.0;
    for i in 0..50 {
        let c = 0.1 * i as f64;
        let b = bound_constant(&p, &x, &z0, &y0, 0.8, 1.5, c, 2);
        assert!(b > prev);
        let primal = 4.0 * 0.3 * 5.0;
        let dual = 4.0 * (0.5 + c).powi(2) / 1.2;
        assert!((b - primal - dual).abs() <= 1e-12 * b);
        prev = b;
    }
}
