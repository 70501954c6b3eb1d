//! Lasso written as `min ½‖Du − e‖² + w‖v‖₁ s.t. Au − v = 0`, solved with the two-block
//! maps in the classic regime.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::{reference_solve, verify_trajectory};

fn main() -> flagopt::Result<()> {
    let prob = generate(&GenSpec::new(Family::LassoSplit, 40, 10, 0.0, 1))?;
    let reference = reference_solve(&prob)?;
    println!(
        "Ψ* = {:.10} (oracle disagreement {:.1e})",
        reference.psi_star,
        reference.agreement.unwrap_or(0.0)
    );

    for kind in [MapKind::ProxAdmm, MapKind::ProxLinAdmm, MapKind::FullLinAdmm, MapKind::ProxLinAl] {
        let cfg = MapConfig::from_policy(kind, 1.0, MatrixPolicy::default(), &prob)?;
        let inst = MapInstance::new(cfg, &prob)?;
        let traj = run(&prob, &inst, &RunParams::new(Mode::Classic, 3000), Some(&reference))?;
        let rep = verify_trajectory(&traj, &reference, inst.certificate());
        let last = traj.records.last().unwrap();
        println!(
            "{kind:<14} δ {:.3}  gap {:>10.2e}  feas {:.2e}  bounds {}  slope {:.2}",
            inst.certificate().delta,
            last.psi_x - reference.psi_star,
            last.feas_x,
            rep.bounds_hold,
            rep.slope.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
