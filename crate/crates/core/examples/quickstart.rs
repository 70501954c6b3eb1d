//! Smallest end-to-end use: build `min ½‖x‖² s.t. x₁ + x₂ = 2`, pick a map, run FLAG.
//!
//! ```text
//! cargo run --example quickstart
//! ```

use flagopt::flag::{run, Mode, RunParams};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};
use flagopt::problem::{ConstrainedProblem, LinearMap, ObjectiveTerm};
use nalgebra::DVector;

fn main() -> flagopt::Result<()> {
    let prob = ConstrainedProblem::new(
        ObjectiveTerm::scaled_identity(2, 1.0)?,
        None,
        LinearMap::from_rows(&[vec![1.0, 1.0]])?,
        DVector::from_column_slice(&[2.0]),
        1.0,
    )?;

    let cfg = MapConfig::from_policy(MapKind::ProxLinAl, 1.0, MatrixPolicy::default(), &prob)?;
    let inst = MapInstance::new(cfg, &prob)?;
    println!("δ = {}, regime p = {}", inst.certificate().delta, inst.certificate().regime());

    let traj = run(&prob, &inst, &RunParams::new(Mode::Fast, 200), None)?;
    for r in traj.records.iter().step_by(40) {
        println!("k {:>4}  Ψ(x) {:.8}  ‖𝒜x − b‖ {:.2e}", r.k, r.psi_x, r.feas_x);
    }
    let x = &traj.final_state.x;
    println!("x = ({:.6}, {:.6}), expected (1, 1)", x[0], x[1]);
    Ok(())
}
