use nalgebra::DVector;

use super::certificate::{CertificateForm, NiceCertificate};
use super::config::MapConfig;
use super::step::MapInstance;
use super::Schedule;
use crate::error::{FlagError, Result};
use crate::lagrangian::{delta_p, eval_aug_lagrangian};
use crate::linalg;
use crate::problem::ConstrainedProblem;

/// `LHS − RHS` of the descent inequality, with the magnitude of the terms involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiceResidual {
    pub residual: f64,
    pub scale: f64,
}

impl NiceResidual {
    pub fn within(&self, tol: f64) -> bool {
        self.residual <= tol * self.scale
    }
}

/// Residual of the descent inequality for one step of `cfg` from `(z, λ)` against the
/// feasible comparison point `ξ`.
pub fn nice_residual(
    cfg: &MapConfig,
    sched: &Schedule,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    xi: &DVector<f64>,
    prob: &ConstrainedProblem,
) -> Result<NiceResidual> {
    let inst = MapInstance::new(cfg.clone(), prob)?;
    nice_residual_with(&inst, inst.certificate(), sched, z, lambda, xi, prob)
}

/// Same as [`nice_residual`] but against an explicit (possibly altered) certificate.
pub fn nice_residual_with(
    inst: &MapInstance,
    cert: &NiceCertificate,
    sched: &Schedule,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    xi: &DVector<f64>,
    prob: &ConstrainedProblem,
) -> Result<NiceResidual> {
    let feas = prob.feasibility_residual(xi)?;
    if feas > 1e-9 * (1.0 + prob.rhs().norm()) {
        return Err(FlagError::Precondition(format!(
            "comparison point is infeasible (‖𝒜ξ − b‖ = {feas:.3e})"
        )));
    }
    let z_new = inst.step(sched, z, lambda)?;
    let (rt, tt) = (sched.rho_t, sched.tau_t);
    let l_new = eval_aug_lagrangian(prob, &z_new, lambda, rt);
    let l_xi = eval_aug_lagrangian(prob, xi, lambda, rt);
    if !l_xi.is_finite() {
        return Err(FlagError::Precondition(
            "comparison point is outside the objective domain".into(),
        ));
    }
    let r_new = prob.constraint_residual(&z_new);
    let feas_term = 0.5 * cert.delta * rt * r_new.norm_squared();
    let p = cert.p.matrix();
    let q = cert.q.matrix();

    let terms: Vec<f64> = match cert.form {
        CertificateForm::Full => {
            let step = &z_new - z;
            vec![
                tt * delta_p(p, xi, z, &z_new),
                -0.5 * tt * linalg::quad_form(q, &step),
                -0.5 * cert.sigma * (xi - &z_new).norm_squared(),
                -feas_term,
            ]
        }
        CertificateForm::Block { u_dim } => {
            let n = z.len();
            let qd = n - u_dim;
            let blk = |x: &DVector<f64>, first: bool| {
                if first {
                    x.rows(0, u_dim).into_owned()
                } else {
                    x.rows(u_dim, qd).into_owned()
                }
            };
            let p1 = p.view((0, 0), (u_dim, u_dim)).into_owned();
            let p2 = p.view((u_dim, u_dim), (qd, qd)).into_owned();
            let q1 = q.view((0, 0), (u_dim, u_dim)).into_owned();
            let q2 = q.view((u_dim, u_dim), (qd, qd)).into_owned();
            let (u, v) = (blk(z, true), blk(z, false));
            let (un, vn) = (blk(&z_new, true), blk(&z_new, false));
            let (x1, x2) = (blk(xi, true), blk(xi, false));
            vec![
                delta_p(&p1, &x1, &u, &un),
                -0.5 * linalg::quad_form(&q1, &(&un - &u)),
                tt * delta_p(&p2, &x2, &v, &vn),
                -0.5 * tt * linalg::quad_form(&q2, &(&vn - &v)),
                -0.5 * cert.sigma * (&x2 - &vn).norm_squared(),
                -feas_term,
            ]
        }
    };
    let rhs: f64 = terms.iter().sum();
    let lhs = l_new - l_xi;
    let scale = 1.0 + l_new.abs() + l_xi.abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
    Ok(NiceResidual {
        residual: lhs - rhs,
        scale,
    })
}
