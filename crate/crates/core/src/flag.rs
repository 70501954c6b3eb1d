//! The FLAG outer loop.
//!
//! Each iteration forms the auxiliary multiplier `λᵏ = yᵏ + ρ_k(t_k − 1)(𝒜xᵏ − b)`, takes one
//! primal step `zᵏ⁺¹ = Prim(zᵏ, λᵏ)`, updates `yᵏ⁺¹ = yᵏ + μρ_k(𝒜zᵏ⁺¹ − b)`, extrapolates
//! `xᵏ⁺¹ = (1 − 1/t_k)xᵏ + zᵏ⁺¹/t_k` and advances `t`.
//!
//! In ergodic mode `λᵏ = yᵏ`, `x` is unused and the reported point is the weighted
//! average `z̄ᴺ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{FlagError, Result};
use crate::lagrangian::{delta_identity, delta_p, eval_aug_lagrangian};
use crate::maps::{CertificateForm, MapInstance, MapKind, NiceCertificate, Schedule};
use crate::problem::ConstrainedProblem;
use crate::rates::{bound_constant, ReferenceSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `p = 2`; needs `σ > 0`.
    Fast,
    /// `p = 1`.
    Classic,
    /// `λ = y`, averaged iterates; `p = 2` when `σ > 0`, else `p = 1` with `t ≡ 1`.
    Ergodic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Fast, Mode::Classic, Mode::Ergodic];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Fast => "fast",
            Mode::Classic => "classic",
            Mode::Ergodic => "ergodic",
        }
    }

    pub fn is_ergodic(self) -> bool {
        self == Mode::Ergodic
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Mode {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FlagError::Config(format!("unknown mode '{s}' (fast, classic, ergodic)")))
    }
}

/// Next element of the `t` sequence.
pub fn next_t(t: f64, p: u8) -> f64 {
    if p == 2 {
        0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
    } else {
        t + 1.0
    }
}

/// `λ = y + ρ_k(t_k − 1)(𝒜x − b)`.
pub fn compute_lambda(y: &DVector<f64>, rho_k: f64, t_k: f64, ax_minus_b: &DVector<f64>) -> DVector<f64> {
    if t_k == 1.0 {
        return y.clone();
    }
    y + ax_minus_b * (rho_k * (t_k - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub mode: Mode,
    pub iters: usize,
    /// Defaults to `δ` (fast, classic) or `1` (ergodic).
    pub mu: Option<f64>,
    pub x0: Option<DVector<f64>>,
    pub z0: Option<DVector<f64>>,
    pub y0: Option<DVector<f64>>,
    /// Stop once `|Ψ(x) − Ψ*| + ‖𝒜x − b‖` drops below this; needs a reference solution.
    pub early_stop: Option<f64>,
}

impl RunParams {
    pub fn new(mode: Mode, iters: usize) -> Self {
        RunParams {
            mode,
            iters,
            mu: None,
            x0: None,
            z0: None,
            y0: None,
            early_stop: None,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    /// Starts both `x` and `z` at `z0`.
    pub fn with_start(mut self, z0: DVector<f64>, y0: DVector<f64>) -> Self {
        self.x0 = Some(z0.clone());
        self.z0 = Some(z0);
        self.y0 = Some(y0);
        self
    }
}

/// Regime and multiplier step resolved from the mode and the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub p: u8,
    pub mu: f64,
    pub mode: Mode,
}

impl Settings {
    pub fn resolve(mode: Mode, mu: Option<f64>, cert: &NiceCertificate) -> Result<Self> {
        let p = match mode {
            Mode::Fast => {
                if cert.sigma <= 0.0 {
                    return Err(FlagError::Config(format!(
                        "fast mode needs σ > 0 (the {} certificate has σ = {})",
                        cert.map, cert.sigma
                    )));
                }
                2
            }
            Mode::Classic => 1,
            Mode::Ergodic => cert.regime(),
        };
        let ergodic = mode.is_ergodic();
        let mu = mu.unwrap_or(if ergodic { 1.0 } else { cert.delta });
        let max = cert.mu_max(ergodic);
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(FlagError::Config(format!("μ must be positive, got {mu}")));
        }
        if mu > max * (1.0 + 1e-12) {
            let need = if ergodic { "μ ≤ 1 + δ required" } else { "μ ≤ δ required" };
            return Err(FlagError::Config(format!("{need} (μ = {mu}, δ = {})", cert.delta)));
        }
        Ok(Settings { p, mu, mode })
    }

    fn t_after(&self, t: f64) -> f64 {
        if self.mode.is_ergodic() && self.p == 1 {
            1.0
        } else {
            next_t(t, self.p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagState {
    pub k: usize,
    pub t: f64,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub rho_k: f64,
    pub tau_k: f64,
    /// `λᵏ` for the current `(x, y, t)`.
    pub lambda: DVector<f64>,
}

impl FlagState {
    pub fn initial(
        x: DVector<f64>,
        z: DVector<f64>,
        y: DVector<f64>,
        rho: f64,
        settings: &Settings,
        prob: &ConstrainedProblem,
    ) -> Self {
        Self::at(0, 1.0, x, z, y, rho, settings, prob)
    }

    #[allow(clippy::too_many_arguments)]
    fn at(
        k: usize,
        t: f64,
        x: DVector<f64>,
        z: DVector<f64>,
        y: DVector<f64>,
        rho: f64,
        settings: &Settings,
        prob: &ConstrainedProblem,
    ) -> Self {
        let sched = Schedule::new(rho, t, settings.p);
        let lambda = if settings.mode.is_ergodic() {
            y.clone()
        } else {
            compute_lambda(&y, sched.rho_t, t, &prob.constraint_residual(&x))
        };
        FlagState {
            k,
            t,
            x,
            z,
            y,
            rho_k: sched.rho_t,
            tau_k: sched.tau_t,
            lambda,
        }
    }

    fn schedule(&self, settings: &Settings) -> Schedule {
        Schedule {
            rho_t: self.rho_k,
            tau_t: self.tau_k,
            p: settings.p,
        }
    }
}

/// One FLAG iteration. The input state is left untouched, so an error leaves it intact.
pub fn flag_iterate(
    state: &FlagState,
    inst: &MapInstance,
    settings: &Settings,
    prob: &ConstrainedProblem,
) -> Result<FlagState> {
    let sched = state.schedule(settings);
    let z_new = inst.step(&sched, &state.z, &state.lambda)?;
    let r = prob.constraint_residual(&z_new);
    let y_new = &state.y + r * (settings.mu * state.rho_k);
    let x_new = if settings.mode.is_ergodic() {
        z_new.clone()
    } else {
        let w = 1.0 / state.t;
        &state.x * (1.0 - w) + &z_new * w
    };
    let t_new = settings.t_after(state.t);
    let rho = inst.config().rho;
    let out = FlagState::at(state.k + 1, t_new, x_new, z_new, y_new, rho, settings, prob);
    if out.z.iter().chain(out.y.iter()).any(|v| !v.is_finite()) {
        return Err(FlagError::Numerical(format!(
            "non-finite iterate at k = {}",
            out.k
        )));
    }
    Ok(out)
}

/// One row of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub t: f64,
    pub rho_k: f64,
    /// `Ψ` and `‖𝒜· − b‖` at `xᵏ`, or at `z̄ᵏ` in ergodic mode.
    pub psi_x: f64,
    pub feas_x: f64,
    pub psi_z: f64,
    pub feas_z: f64,
    pub y_norm: f64,
    pub s_k: Option<f64>,
    pub bound_fn: Option<f64>,
    pub bound_feas: Option<f64>,
}

/// Both sides of the per-iteration inequality behind the rate bounds, for step `k → k+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillarCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl PillarCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs - self.rhs <= tol * self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub map: MapKind,
    pub rho: f64,
    pub mu: f64,
    pub p: u8,
    pub mode: Mode,
    pub delta: f64,
    pub z0: DVector<f64>,
    pub y0: DVector<f64>,
    /// Bound constant and `c`, present when a reference solution was attached.
    pub bound: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub records: Vec<Record>,
    pub pillar: Vec<PillarCheck>,
    /// `z̄ᴺ` in ergodic mode.
    pub ergodic_point: Option<DVector<f64>>,
    pub final_state: FlagState,
}

impl Trajectory {
    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// First pillar check that fails at relative tolerance `tol`.
    pub fn pillar_violation(&self, tol: f64) -> Option<&PillarCheck> {
        self.pillar.iter().find(|c| !c.holds(tol))
    }
}

fn start_vec(v: &Option<DVector<f64>>, n: usize, what: &'static str) -> Result<DVector<f64>> {
    match v {
        Some(v) if v.len() != n => Err(FlagError::dim(what, n, v.len())),
        Some(v) => Ok(v.clone()),
        None => Ok(DVector::zeros(n)),
    }
}

/// Running weighted average for the ergodic point.
struct Averager {
    sum: DVector<f64>,
    weight: f64,
}

impl Averager {
    fn push(&mut self, z: &DVector<f64>, w: f64) {
        self.sum += z * w;
        self.weight += w;
    }

    fn mean(&self) -> DVector<f64> {
        &self.sum / self.weight
    }
}

/// Right-hand side terms of the per-iteration inequality, shared by both modes.
struct PillarTerms<'a> {
    cert: &'a NiceCertificate,
    xi: &'a DVector<f64>,
}

impl PillarTerms<'_> {
    /// `[Δ_P-part, σ-part]` with the `τ` and block weights applied, before the outer factor.
    fn primal(&self, tau: f64, z: &DVector<f64>, z_new: &DVector<f64>) -> Vec<f64> {
        let p = self.cert.p.matrix();
        let sigma = self.cert.sigma;
        match self.cert.form {
            CertificateForm::Full => vec![
                tau * delta_p(p, self.xi, z, z_new),
                -0.5 * sigma * (self.xi - z_new).norm_squared(),
            ],
            CertificateForm::Block { u_dim } => {
                let n = z.len();
                let q = n - u_dim;
                let p1 = p.view((0, 0), (u_dim, u_dim)).into_owned();
                let p2 = p.view((u_dim, u_dim), (q, q)).into_owned();
                let top = |x: &DVector<f64>| x.rows(0, u_dim).into_owned();
                let bot = |x: &DVector<f64>| x.rows(u_dim, q).into_owned();
                vec![
                    delta_p(&p1, &top(self.xi), &top(z), &top(z_new)),
                    tau * delta_p(&p2, &bot(self.xi), &bot(z), &bot(z_new)),
                    -0.5 * sigma * (bot(self.xi) - bot(z_new)).norm_squared(),
                ]
            }
        }
    }
}

/// Runs FLAG for `params.iters` iterations.
///
/// With a reference solution attached the records carry `s_k` and the bound columns, and
/// the per-iteration inequality is evaluated at `ξ = x*`, `η = y*`.
pub fn run(
    prob: &ConstrainedProblem,
    inst: &MapInstance,
    params: &RunParams,
    reference: Option<&ReferenceSolution>,
) -> Result<Trajectory> {
    let cert = inst.certificate();
    let settings = Settings::resolve(params.mode, params.mu, cert)?;
    let (n, m) = (prob.n(), prob.m());
    let z0 = start_vec(&params.z0, n, "z0")?;
    let x0 = match &params.x0 {
        Some(_) => start_vec(&params.x0, n, "x0")?,
        None => z0.clone(),
    };
    let y0 = start_vec(&params.y0, m, "y0")?;
    if params.early_stop.is_some() && reference.is_none() {
        return Err(FlagError::Config("early stop needs a reference solution".into()));
    }
    let rho = inst.config().rho;
    let p = settings.p;
    let ergodic = settings.mode.is_ergodic();

    let bound = reference.map(|r| {
        let b = bound_constant(cert.p.matrix(), &r.x_star, &z0, &y0, settings.mu, rho, r.c, p);
        (b, r.c)
    });
    let meta = RunMeta {
        map: inst.kind(),
        rho,
        mu: settings.mu,
        p,
        mode: settings.mode,
        delta: cert.delta,
        z0: z0.clone(),
        y0: y0.clone(),
        bound,
    };

    let bound_at = |k: usize| -> (Option<f64>, Option<f64>) {
        match bound {
            Some((b, c)) if k > 0 => {
                let np = (k as f64).powi(p as i32);
                (Some(b / (2.0 * np)), Some(b / (c * np)))
            }
            _ => (None, None),
        }
    };
    let psi_star = reference.map(|r| prob.eval_objective(&r.x_star));

    let mut state = FlagState::initial(x0, z0, y0, rho, &settings, prob);
    let mut avg = Averager {
        sum: DVector::zeros(n),
        weight: 0.0,
    };
    let mut report_x = state.x.clone();
    // t_{k−1}, with t_{−1} = 0
    let mut t_prev = 0.0;
    let s_of = |x: &DVector<f64>, t_prev: f64, r: &ReferenceSolution| -> f64 {
        let pen = rho * t_prev.powi(p as i32);
        eval_aug_lagrangian(prob, x, &r.y_star, pen) - r.psi_star
    };

    let record = |state: &FlagState, xr: &DVector<f64>, s_k: Option<f64>| -> Record {
        let (bound_fn, bound_feas) = bound_at(state.k);
        Record {
            k: state.k,
            t: state.t,
            rho_k: state.rho_k,
            psi_x: prob.eval_objective(xr),
            feas_x: prob.constraint_residual(xr).norm(),
            psi_z: prob.eval_objective(&state.z),
            feas_z: prob.constraint_residual(&state.z).norm(),
            y_norm: state.y.norm(),
            s_k,
            bound_fn,
            bound_feas,
        }
    };

    let s0 = if ergodic {
        None
    } else {
        reference.map(|r| s_of(&state.x, t_prev, r))
    };
    let mut records = vec![record(&state, &report_x, s0)];
    let mut pillar = Vec::new();

    for _ in 0..params.iters {
        let next = flag_iterate(&state, inst, &settings, prob)?;
        let mut s_next = None;
        if let Some(r) = reference {
            let terms = PillarTerms { cert, xi: &r.x_star };
            let mut primal = terms.primal(state.tau_k, &state.z, &next.z);
            let dual = delta_identity(&r.y_star, &state.y, &next.y);
            let (lhs, lhs_parts, dual_term);
            if ergodic {
                let gamma = (1.0 + cert.delta - settings.mu) * state.rho_k;
                let l = eval_aug_lagrangian(prob, &next.z, &r.y_star, gamma) - r.psi_star;
                lhs = l;
                lhs_parts = vec![l];
                dual_term = dual / (settings.mu * state.rho_k);
                s_next = Some(l);
            } else {
                let s_old = s_of(&state.x, t_prev, r);
                let s_new = s_of(&next.x, state.t, r);
                let (w_new, w_old) = (state.t.powi(p as i32), t_prev.powi(p as i32));
                lhs = w_new * s_new - w_old * s_old;
                lhs_parts = vec![w_new * s_new, w_old * s_old];
                let f = state.rho_k / rho;
                for v in primal.iter_mut() {
                    *v *= f;
                }
                dual_term = dual / (settings.mu * rho);
                s_next = Some(s_new);
            }
            let rhs = primal.iter().sum::<f64>() + dual_term;
            let scale = 1.0
                + lhs_parts.iter().map(|v| v.abs()).sum::<f64>()
                + primal.iter().map(|v| v.abs()).sum::<f64>()
                + dual_term.abs();
            pillar.push(PillarCheck {
                k: state.k,
                lhs,
                rhs,
                scale,
            });
        }
        if ergodic {
            avg.push(&next.z, state.t);
            report_x = avg.mean();
        } else {
            report_x = next.x.clone();
        }
        t_prev = state.t;
        state = next;
        let rec = record(&state, &report_x, s_next);
        let stop = match (params.early_stop, psi_star) {
            (Some(tol), Some(ps)) => (rec.psi_x - ps).abs() + rec.feas_x < tol,
            _ => false,
        };
        records.push(rec);
        if stop {
            break;
        }
    }

    Ok(Trajectory {
        meta,
        records,
        pillar,
        ergodic_point: if ergodic && state.k > 0 { Some(report_x) } else { None },
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_t_examples() {
        assert_eq!(next_t(3.0, 1), 4.0);
        let g = next_t(1.0, 2);
        assert!((g - 1.618_033_988_749_895).abs() < 1e-12);
        let t2 = next_t(g, 2);
        assert!((t2 * t2 - t2 - g * g).abs() < 1e-10);
        assert!((t2 - 2.1935).abs() < 1e-4);
    }

    #[test]
    fn lambda_examples() {
        let y = DVector::from_column_slice(&[0.3, -1.0]);
        let r = DVector::from_column_slice(&[5.0, 2.0]);
        assert_eq!(compute_lambda(&y, 7.0, 1.0, &r), y);
        let l = compute_lambda(&DVector::zeros(1), 2.0, 2.0, &DVector::from_element(1, 1.0));
        assert_eq!(l[0], 2.0);
        assert_eq!(compute_lambda(&y, 2.0, 5.0, &DVector::zeros(2)), y);
    }
}
