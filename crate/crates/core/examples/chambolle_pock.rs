//! Chambolle-Pock on `min f(u) + g(v) s.t. u + Bv = b`, and a check that it coincides with
//! linearized ADMM for `M₁ = 0`, `M₂ = I/α`.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::rates::reference_solve;
use flagopt::maps::{MapConfig, MapInstance, PrimalMap, Schedule};
use flagopt::problem::{BlockProblem, LinearMap, ObjectiveTerm};
use flagopt::prox::WeightMatrix;
use flagopt::{linalg, random};
use nalgebra::DMatrix;

fn main() -> flagopt::Result<()> {
    let (m, q) = (5, 8);
    let mut rng = random::seeded(11);
    let f = ObjectiveTerm::quadratic(DMatrix::identity(m, m), random::normal_vec(&mut rng, m), 0.0)?;
    let g = ObjectiveTerm::l1(q, 0.3)?;
    let b = random::normal_mat(&mut rng, m, q);
    let alpha = 0.5 / linalg::gram_lambda_max(&b);
    let prob = BlockProblem::new(
        f,
        g,
        LinearMap::new(DMatrix::identity(m, m))?,
        LinearMap::new(b)?,
        random::normal_vec(&mut rng, m),
    )
    .flatten_block()?;

    let cp = MapInstance::new(
        MapConfig {
            map: PrimalMap::ChambollePock { alpha },
            rho: 1.0,
        },
        &prob,
    )?;
    let lin = MapInstance::new(
        MapConfig {
            map: PrimalMap::ProxLinAdmm {
                m1: WeightMatrix::zeros(m),
                m2: WeightMatrix::scaled_identity(q, 1.0 / alpha)?,
            },
            rho: 1.0,
        },
        &prob,
    )?;
    println!("α = {alpha:.4}, δ = {:.4}", cp.certificate().delta);

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = random::normal_vec(&mut rng, m + q);
        let l = random::normal_vec(&mut rng, m);
        let s = Schedule::classic(1.0);
        worst = worst.max((cp.step(&s, &z, &l)? - lin.step(&s, &z, &l)?).amax());
    }
    println!("max difference to linearized ADMM over 100 states: {worst:.1e}");

    let reference = reference_solve(&prob)?;
    let traj = run(&prob, &cp, &RunParams::new(Mode::Ergodic, 5000), Some(&reference))?;
    for r in traj.records.iter().skip(1000).step_by(1000) {
        println!(
            "N {:>5}  z̄ gap {:>10.3e}  feas {:.3e}",
            r.k,
            r.psi_x - reference.psi_star,
            r.feas_x
        );
    }
    Ok(())
}
