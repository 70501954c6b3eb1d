//! Ergodic averaging: `λ = y`, the larger step `μ ≤ 1 + δ`, and rates for the weighted
//! average `z̄ᴺ` rather than the last iterate.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::{reference_solve, verify_trajectory};

fn main() -> flagopt::Result<()> {
    let prob = generate(&GenSpec::new(Family::LassoSplit, 30, 8, 0.0, 2))?;
    let reference = reference_solve(&prob)?;
    let inst = MapInstance::new(
        MapConfig::from_policy(MapKind::ProxLinAdmm, 1.0, MatrixPolicy::default(), &prob)?,
        &prob,
    )?;
    let delta = inst.certificate().delta;
    for mu in [delta, 1.0, 1.0 + delta] {
        let traj = run(&prob, &inst, &RunParams::new(Mode::Ergodic, 2000).with_mu(mu), Some(&reference))?;
        let rep = verify_trajectory(&traj, &reference, inst.certificate());
        let last = traj.records.last().unwrap();
        println!(
            "μ = {mu:.3}: z̄ gap {:.3e}  feas {:.3e}  last z gap {:.3e}  bounds {}",
            last.psi_x - reference.psi_star,
            last.feas_x,
            last.psi_z - reference.psi_star,
            rep.bounds_hold
        );
    }
    Ok(())
}
