//! Randomized check of the descent inequality over states `(z, λ, t)` and feasible `ξ`.

use nalgebra::{DMatrix, DVector};

use super::certificate::NiceCertificate;
use super::residual::nice_residual_with;
use super::step::MapInstance;
use super::Schedule;
use crate::error::{FlagError, Result};
use crate::linalg;
use crate::problem::ConstrainedProblem;
use crate::random::{self, FlagRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub states: usize,
    pub points_per_state: usize,
    /// Upper end of the `t` range drawn in the `p = 2` regime.
    pub t_max: f64,
    /// Standard deviation of the state and comparison-point perturbations.
    pub spread: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            states: 100,
            points_per_state: 20,
            t_max: 50.0,
            spread: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingReport {
    pub samples: usize,
    /// Largest `residual / scale` seen.
    pub max_ratio: f64,
    /// Largest raw residual seen.
    pub max_residual: f64,
    /// Samples whose residual exceeded `tol · scale`.
    pub violations: usize,
    pub tol: f64,
}

impl SamplingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// A feasible point inside the objective's domain: the stored one or the minimum-norm
/// solution of `𝒜x = b`.
pub fn feasible_anchor(prob: &ConstrainedProblem) -> Result<DVector<f64>> {
    if let Some(x) = prob.feasible_point() {
        return Ok(x.clone());
    }
    let x = linalg::min_norm_solution(prob.constraint_map().matrix(), prob.rhs())?;
    let res = prob.feasibility_residual(&x)?;
    if res > 1e-9 * (1.0 + prob.rhs().norm()) {
        return Err(FlagError::InvalidData(format!(
            "constraints look inconsistent (least-squares residual {res:.3e})"
        )));
    }
    if !prob.eval_objective(&x).is_finite() {
        return Err(FlagError::Precondition(
            "minimum-norm feasible point is outside the objective domain; store a feasible point".into(),
        ));
    }
    Ok(x)
}

/// Draws a feasible `ξ = anchor + N w`, shrinking `w` until `Ψ(ξ)` is finite.
pub fn sample_feasible(
    prob: &ConstrainedProblem,
    anchor: &DVector<f64>,
    null: &DMatrix<f64>,
    spread: f64,
    rng: &mut FlagRng,
) -> DVector<f64> {
    if null.ncols() == 0 {
        return anchor.clone();
    }
    let mut w = random::normal_vec(rng, null.ncols()) * spread;
    for _ in 0..40 {
        let xi = anchor + null * &w;
        if prob.eval_objective(&xi).is_finite() {
            return xi;
        }
        w *= 0.5;
    }
    anchor.clone()
}

/// Projection of `z` onto `{𝒜ξ = b}`, if it lies in the objective's domain.
///
/// Taking `ξ` next to `z⁺` leaves little slack in the inequality, so this is the hardest
/// comparison point in practice.
pub fn projected_comparison(prob: &ConstrainedProblem, z: &DVector<f64>) -> Option<DVector<f64>> {
    let r = prob.constraint_residual(z);
    let d = linalg::min_norm_solution(prob.constraint_map().matrix(), &r).ok()?;
    let xi = z - d;
    let ok = prob.eval_objective(&xi).is_finite()
        && prob.constraint_residual(&xi).norm() <= 1e-10 * (1.0 + prob.rhs().norm());
    ok.then_some(xi)
}

/// Evaluates the descent inequality on `plan.states × plan.points_per_state` samples.
///
/// The first comparison point of every state is the projection of `z⁺` when it is
/// admissible; the rest are drawn around the feasible anchor.
pub fn sample_niceness(
    inst: &MapInstance,
    cert: &NiceCertificate,
    prob: &ConstrainedProblem,
    plan: &SamplingPlan,
    tol: f64,
    rng: &mut FlagRng,
) -> Result<SamplingReport> {
    let anchor = feasible_anchor(prob)?;
    let null = linalg::null_space(prob.constraint_map().matrix());
    let p = cert.regime();
    let rho = inst.config().rho;
    let mut report = SamplingReport {
        samples: 0,
        max_ratio: f64::NEG_INFINITY,
        max_residual: f64::NEG_INFINITY,
        violations: 0,
        tol,
    };
    for _ in 0..plan.states {
        let z = &anchor + random::normal_vec(rng, prob.n()) * plan.spread;
        let lambda = random::normal_vec(rng, prob.m()) * plan.spread;
        let t = if p == 2 {
            random::uniform(rng, 1.0, plan.t_max)
        } else {
            1.0
        };
        let sched = Schedule::new(rho, t, p);
        let projected = projected_comparison(prob, &inst.step(&sched, &z, &lambda)?);
        for j in 0..plan.points_per_state {
            let xi = match (&projected, j) {
                (Some(p), 0) => p.clone(),
                _ => sample_feasible(prob, &anchor, &null, plan.spread, rng),
            };
            let r = nice_residual_with(inst, cert, &sched, &z, &lambda, &xi, prob)?;
            report.samples += 1;
            report.max_ratio = report.max_ratio.max(r.residual / r.scale);
            report.max_residual = report.max_residual.max(r.residual);
            if !r.within(tol) {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}
