//! The per-iteration inequality behind the rate bounds, evaluated with `(ξ, η) = (x*, y*)`,
//! and the rate report for fast, classic and ergodic runs.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::{reference_solve, verify_trajectory};

fn main() -> flagopt::Result<()> {
    let prob = generate(&GenSpec::new(Family::EqQp, 30, 8, 1.0, 4))?;
    let reference = reference_solve(&prob)?;
    let policy = MatrixPolicy::ShiftedGram { shift: 0.25 };
    let inst = MapInstance::new(MapConfig::from_policy(MapKind::ProxLinAl, 1.0, policy, &prob)?, &prob)?;

    for mode in Mode::ALL {
        let traj = run(&prob, &inst, &RunParams::new(mode, 1000), Some(&reference))?;
        let worst = traj
            .pillar
            .iter()
            .map(|c| (c.lhs - c.rhs) / c.scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let rep = verify_trajectory(&traj, &reference, inst.certificate());
        println!("{mode:<8} p = {}  worst (lhs − rhs)/scale {worst:.2e}", rep.p);
        println!("         {}", serde_json::to_string(&rep).unwrap());
    }
    Ok(())
}
