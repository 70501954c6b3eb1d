//! Runs every applicable map in every mode on one block problem, in parallel.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::rates::{reference_solve, verify_trajectory};
use rayon::prelude::*;

fn main() -> flagopt::Result<()> {
    let prob = generate(&GenSpec::new(Family::BlockQp, 12, 4, 1.0, 5))?;
    let reference = reference_solve(&prob)?;
    let jobs: Vec<(MapKind, Mode)> = MapKind::ALL
        .into_iter()
        .flat_map(|k| Mode::ALL.into_iter().map(move |m| (k, m)))
        .collect();

    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(kind, mode)| {
            let inst = MapConfig::from_policy(kind, 1.0, MatrixPolicy::default(), &prob)
                .and_then(|cfg| MapInstance::new(cfg, &prob));
            let out = inst.and_then(|inst| {
                let traj = run(&prob, &inst, &RunParams::new(mode, 500), Some(&reference))?;
                Ok((traj.records.last().unwrap().psi_x, verify_trajectory(&traj, &reference, inst.certificate())))
            });
            match out {
                Ok((psi, rep)) => format!(
                    "{kind:<15} {mode:<8} gap {:>10.2e}  bounds {:<5}  condition_P {:?}",
                    psi - reference.psi_star,
                    rep.bounds_hold,
                    rep.condition_p
                ),
                Err(e) => format!("{kind:<15} {mode:<8} {e}"),
            }
        })
        .collect();
    for r in rows {
        println!("{r}");
    }
    Ok(())
}
