//! Certificate `(δ, P, Q)` of every map kind on a suitable problem, then the randomized
//! check of the descent inequality, once with the true δ and once with δ inflated.

use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::sampling::{sample_niceness, SamplingPlan};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::problem::{BlockProblem, ConstrainedProblem, LinearMap, ObjectiveTerm};
use flagopt::random;
use nalgebra::DMatrix;

fn problem_for(kind: MapKind) -> flagopt::Result<ConstrainedProblem> {
    let spec = match kind {
        MapKind::ProxAl | MapKind::ProxLinAl => GenSpec::new(Family::EqQp, 10, 3, 1.0, 0),
        MapKind::SmoothLinAl => GenSpec::new(Family::SmoothComposite, 10, 3, 0.5, 0),
        MapKind::SmoothProxAl => {
            // exact minimization over h + f needs f without an l1 part here
            let p = generate(&GenSpec::new(Family::SmoothComposite, 10, 3, 0.0, 0))?;
            return ConstrainedProblem::new(
                ObjectiveTerm::zero(10),
                p.smooth().cloned(),
                p.constraint_map().clone(),
                p.rhs().clone(),
                0.0,
            );
        }
        MapKind::ChambollePock => {
            // needs the u-block coupled through the identity
            let mut rng = random::seeded(0);
            return BlockProblem::new(
                ObjectiveTerm::scaled_identity(3, 1.0)?,
                ObjectiveTerm::l1(6, 0.5)?,
                LinearMap::new(DMatrix::identity(3, 3))?,
                LinearMap::new(random::normal_mat(&mut rng, 3, 6))?,
                random::normal_vec(&mut rng, 3),
            )
            .flatten_block();
        }
        _ => GenSpec::new(Family::BlockQp, 10, 3, 0.0, 0),
    };
    generate(&spec)
}

fn main() -> flagopt::Result<()> {
    let plan = SamplingPlan {
        states: 40,
        ..SamplingPlan::default()
    };
    for kind in MapKind::ALL {
        let prob = problem_for(kind)?;
        let cfg = match MapConfig::from_policy(kind, 1.0, MatrixPolicy::Auto { margin: 100.0 }, &prob) {
            Ok(c) => c,
            Err(e) => {
                println!("{kind:<15} skipped: {e}");
                continue;
            }
        };
        let inst = match MapInstance::new(cfg, &prob) {
            Ok(i) => i,
            Err(e) => {
                println!("{kind:<15} skipped: {e}");
                continue;
            }
        };
        let cert = inst.certificate();
        let honest = sample_niceness(&inst, cert, &prob, &plan, 1e-7, &mut random::seeded(1))?;
        let mut inflated = cert.clone();
        inflated.delta *= 1.5;
        let caught = sample_niceness(&inst, &inflated, &prob, &plan, 1e-7, &mut random::seeded(1))?;
        println!(
            "{kind:<15} δ {:.4}  conditions {}  violations {:>3}/{}  with 1.5δ {:>3}",
            cert.delta,
            cert.conditions.len(),
            honest.violations,
            honest.samples,
            caught.violations
        );
    }
    Ok(())
}
