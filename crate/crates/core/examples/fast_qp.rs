//! Fast non-ergodic rate on a generated strongly convex QP.
//!
//! Uses `P = M − ρ𝒜ᵀ𝒜 = (σ/4)I`, which satisfies `P ⪯ (σ/2)I`, so the `O(1/N²)` bounds
//! are certified. Prints the measured gap next to its bound.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::{reference_solve, verify_trajectory};

fn main() -> flagopt::Result<()> {
    let sigma = 1.0;
    let prob = generate(&GenSpec::new(Family::EqQp, 50, 10, sigma, 0))?;
    let reference = reference_solve(&prob)?;
    println!("Ψ* = {:.10}  KKT residual {:.1e}", reference.psi_star, reference.kkt_residual);

    let policy = MatrixPolicy::ShiftedGram { shift: sigma / 4.0 };
    let inst = MapInstance::new(MapConfig::from_policy(MapKind::ProxLinAl, 1.0, policy, &prob)?, &prob)?;
    let traj = run(&prob, &inst, &RunParams::new(Mode::Fast, 2000), Some(&reference))?;

    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "N", "gap", "B/(2N²)", "feas", "B/(cN²)");
    for n in [1, 10, 100, 500, 1000, 2000] {
        let r = &traj.records[n];
        println!(
            "{n:>6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            r.psi_x - reference.psi_star,
            r.bound_fn.unwrap(),
            r.feas_x,
            r.bound_feas.unwrap()
        );
    }
    let report = verify_trajectory(&traj, &reference, inst.certificate());
    println!("bounds hold: {}  slope {:.3}", report.bounds_hold, report.slope.unwrap_or(f64::NAN));
    Ok(())
}
