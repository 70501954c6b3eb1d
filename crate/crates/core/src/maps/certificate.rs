use nalgebra::DMatrix;

use super::config::{MapConfig, MapKind, PrimalMap};
use super::step;
use crate::error::{FlagError, Result};
use crate::linalg::{self, SYM_TOL};
use crate::problem::ConstrainedProblem;
use crate::prox::WeightMatrix;

/// Strict conditions need a margin above this value.
const STRICT_TOL: f64 = 1e-12;

/// A named spectral condition and its evaluated slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub margin: f64,
    pub strict: bool,
}

impl Condition {
    fn psd(name: impl Into<String>, margin: f64) -> Self {
        Condition {
            name: name.into(),
            margin,
            strict: false,
        }
    }

    fn strict(name: impl Into<String>, margin: f64) -> Self {
        Condition {
            name: name.into(),
            margin,
            strict: true,
        }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.margin > STRICT_TOL
        } else {
            self.margin >= -SYM_TOL
        }
    }
}

/// Which right-hand side of the descent inequality the certificate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateForm {
    /// `τ_t` multiplies the whole of `Δ_P` and `‖z⁺ − z‖²_Q`; `σ` acts on all of `x`.
    Full,
    /// `τ_t` multiplies only the `v` block; `σ` is the modulus of `g` and acts on `v`.
    Block { u_dim: usize },
}

/// `(δ, P, Q)` for a map instance, with the conditions that make it valid.
#[derive(Debug, Clone, PartialEq)]
pub struct NiceCertificate {
    pub map: MapKind,
    pub delta: f64,
    /// Full `n×n` matrix (block diagonal for two-block maps).
    pub p: WeightMatrix,
    pub q: WeightMatrix,
    /// Strong-convexity modulus that enters the inequality; selects the regime.
    pub sigma: f64,
    pub form: CertificateForm,
    pub conditions: Vec<Condition>,
}

impl NiceCertificate {
    pub fn regime(&self) -> u8 {
        super::regime(self.sigma)
    }

    /// Largest `μ` allowed: `δ` for the non-ergodic modes, `1 + δ` for the ergodic one.
    pub fn mu_max(&self, ergodic: bool) -> f64 {
        if ergodic {
            1.0 + self.delta
        } else {
            self.delta
        }
    }

    /// `P ⪯ (σ/2)I`, and for the block form additionally `P₁ = 0`, as required by the
    /// fast-rate statements.
    pub fn fast_rate_condition(&self) -> bool {
        if self.sigma <= 0.0 {
            return false;
        }
        let p = self.p.matrix();
        let ok = linalg::lambda_max(p) <= 0.5 * self.sigma + SYM_TOL;
        match self.form {
            CertificateForm::Full => ok,
            CertificateForm::Block { u_dim } => {
                let p1 = p.view((0, 0), (u_dim, u_dim));
                ok && p1.iter().all(|v| v.abs() <= SYM_TOL)
            }
        }
    }
}

fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::symmetrize(&a.tr_mul(a))
}

fn weight(m: DMatrix<f64>) -> Result<WeightMatrix> {
    WeightMatrix::new(linalg::symmetrize(&m))
}

fn check_dim(what: &str, w: &WeightMatrix, n: usize) -> Result<()> {
    if w.dim() != n {
        return Err(FlagError::dim(what, n, w.dim()));
    }
    Ok(())
}

fn regime_condition(sf: f64, sg: f64) -> Condition {
    let margin = match (sf > 0.0, sg > 0.0) {
        (true, true) => sf.min(sg),
        (false, false) => 0.0,
        _ => -sf.max(sg),
    };
    Condition::psd("σ_f and σ_g both positive or both zero", margin)
}

/// Evaluates the certificate `(δ, P, Q)` of `cfg` on `prob` and checks every condition
/// (including that each subproblem has a unique, computable minimizer).
pub fn certificate(cfg: &MapConfig, prob: &ConstrainedProblem) -> Result<NiceCertificate> {
    let rho = cfg.rho;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(FlagError::Config(format!("rho must be positive, got {rho}")));
    }
    let kind = cfg.kind();
    let n = prob.n();
    let a_full = prob.constraint_map().matrix();
    let mut conditions = Vec::new();

    let cert = if kind.is_block() {
        if prob.smooth().is_some() {
            return Err(FlagError::Unsupported(format!(
                "{kind} does not handle a smooth coupling term h"
            )));
        }
        let split = *prob
            .block()
            .ok_or_else(|| FlagError::Config(format!("{kind} needs a two-block problem")))?;
        let (pd, qd) = (split.u_dim, split.v_dim);
        let a = a_full.columns(0, pd).into_owned();
        let b = a_full.columns(pd, qd).into_owned();
        let (ga, gb) = (gram(&a), gram(&b));
        let beta_a = linalg::lambda_max(&ga);
        let beta_b = linalg::lambda_max(&gb);
        let zeros_p = DMatrix::zeros(pd, pd);
        let zeros_q = DMatrix::zeros(qd, qd);

        let (delta, p1, p2, q1, q2, form, sigma) = match &cfg.map {
            PrimalMap::ChambollePock { alpha } => {
                let alpha = *alpha;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(FlagError::Config(format!("alpha must be positive, got {alpha}")));
                }
                if a.nrows() != a.ncols() {
                    return Err(FlagError::NotNice {
                        map: kind.name().into(),
                        condition: "A = I (A must be square)".into(),
                        margin: f64::NEG_INFINITY,
                    });
                }
                let dev = (&a - DMatrix::identity(pd, pd)).amax();
                conditions.push(Condition::psd("A = I", -dev));
                conditions.push(Condition::strict("1/α > ρλmax(BᵀB)", 1.0 / alpha - rho * beta_b));
                let delta = 1.0 - rho * alpha * beta_b;
                (
                    delta,
                    zeros_p.clone(),
                    DMatrix::identity(qd, qd) / alpha,
                    zeros_p,
                    zeros_q,
                    CertificateForm::Block { u_dim: pd },
                    split.sigma_g,
                )
            }
            map => {
                let (m1, m2) = map.block_weights().expect("block map carries two weights");
                check_dim("M₁", m1, pd)?;
                check_dim("M₂", m2, qd)?;
                let (m1, m2) = (m1.matrix().clone(), m2.matrix().clone());
                let l1 = linalg::lambda_min(&m1);
                let l2 = linalg::lambda_min(&m2);
                match kind {
                    MapKind::ProxAdmm => {
                        conditions.push(Condition::psd("M₁ ⪰ 0", l1));
                        conditions.push(Condition::psd("M₂ ⪰ 0", l2));
                        let delta = 1.0 - ratio(rho * beta_b, rho * beta_b + l2);
                        (
                            delta,
                            m1.clone(),
                            &m2 + &gb * rho,
                            m1,
                            zeros_q,
                            CertificateForm::Block { u_dim: pd },
                            split.sigma_g,
                        )
                    }
                    MapKind::ProxLinAdmm => {
                        conditions.push(Condition::psd("M₁ ⪰ 0", l1));
                        conditions.push(Condition::strict("λmin(M₂) > ρλmax(BᵀB)", l2 - rho * beta_b));
                        let delta = 1.0 - ratio(rho * beta_b, l2);
                        (
                            delta,
                            m1.clone(),
                            m2,
                            m1,
                            zeros_q,
                            CertificateForm::Block { u_dim: pd },
                            split.sigma_g,
                        )
                    }
                    MapKind::ProxJacobi => {
                        conditions.push(regime_condition(split.sigma_f, split.sigma_g));
                        conditions.push(Condition::psd("M₁ ⪰ 0", l1));
                        conditions.push(Condition::psd("M₂ ⪰ 0", l2));
                        let a1 = ratio(rho * beta_a, rho * beta_a + l1);
                        let a2 = ratio(rho * beta_b, rho * beta_b + l2);
                        (
                            1.0 - 2.0 * a1.max(a2),
                            &m1 + &ga * rho,
                            &m2 + &gb * rho,
                            zeros_p,
                            zeros_q,
                            CertificateForm::Full,
                            split.sigma_f.min(split.sigma_g),
                        )
                    }
                    MapKind::Pcpm => {
                        conditions.push(regime_condition(split.sigma_f, split.sigma_g));
                        conditions.push(Condition::strict("λmin(M₁) > ρλmax(AᵀA)", l1 - rho * beta_a));
                        conditions.push(Condition::strict("λmin(M₂) > ρλmax(BᵀB)", l2 - rho * beta_b));
                        let a1 = ratio(rho * beta_a, l1);
                        let a2 = ratio(rho * beta_b, l2);
                        (
                            1.0 - 2.0 * a1.max(a2),
                            m1,
                            m2,
                            zeros_p,
                            zeros_q,
                            CertificateForm::Full,
                            split.sigma_f.min(split.sigma_g),
                        )
                    }
                    MapKind::FullLinAdmm => {
                        conditions.push(regime_condition(split.sigma_f, split.sigma_g));
                        let p1 = &m1 - &ga * rho;
                        conditions.push(Condition::psd("M₁ − ρAᵀA ⪰ 0", linalg::lambda_min(&p1)));
                        conditions.push(Condition::strict("λmin(M₂) > ρλmax(BᵀB)", l2 - rho * beta_b));
                        (
                            1.0 - ratio(rho * beta_b, l2),
                            p1.clone(),
                            m2,
                            p1,
                            zeros_q,
                            CertificateForm::Full,
                            split.sigma_f.min(split.sigma_g),
                        )
                    }
                    _ => unreachable!("non-block kind in block branch"),
                }
            }
        };
        conditions.push(Condition::strict("δ > 0", delta));
        fail_on_violation(kind, &conditions)?;
        NiceCertificate {
            map: kind,
            delta,
            p: weight(linalg::block_diag(&p1, &p2))?,
            q: weight(linalg::block_diag(&q1, &q2))?,
            sigma,
            form,
            conditions,
        }
    } else {
        let m = cfg.map.single_weight().expect("single-block map carries one weight");
        check_dim("M", m, n)?;
        let m = m.matrix().clone();
        let g = gram(a_full);
        let lip = prob.smooth().map_or(0.0, |h| h.lipschitz_grad);
        let eye = DMatrix::<f64>::identity(n, n);
        let (p, q) = match kind {
            MapKind::ProxAl => {
                conditions.push(Condition::psd("M ⪰ 0", linalg::lambda_min(&m)));
                (m.clone(), m)
            }
            MapKind::ProxLinAl => {
                conditions.push(Condition::strict("M ≻ 0", linalg::lambda_min(&m)));
                let p = &m - &g * rho;
                conditions.push(Condition::psd("M − ρ𝒜ᵀ𝒜 ⪰ 0", linalg::lambda_min(&p)));
                (p.clone(), p)
            }
            MapKind::SmoothProxAl => {
                let q = &m - &eye * lip;
                conditions.push(Condition::psd("M ⪰ L·I", linalg::lambda_min(&q)));
                (m, q)
            }
            MapKind::SmoothLinAl => {
                let p = &m - &g * rho;
                let q = &p - &eye * lip;
                conditions.push(Condition::psd("M ⪰ ρ𝒜ᵀ𝒜 + L·I", linalg::lambda_min(&q)));
                (p, q)
            }
            _ => unreachable!("block kind in single-block branch"),
        };
        fail_on_violation(kind, &conditions)?;
        NiceCertificate {
            map: kind,
            delta: 1.0,
            p: weight(p)?,
            q: weight(q)?,
            sigma: prob.sigma(),
            form: CertificateForm::Full,
            conditions,
        }
    };

    let mut cert = cert;
    for (i, min_eig) in step::subproblem_min_eigs(cfg, prob)?.into_iter().enumerate() {
        cert.conditions.push(Condition::strict(
            format!("subproblem {} Hessian ≻ 0", i + 1),
            min_eig,
        ));
    }
    fail_on_violation(kind, &cert.conditions)?;
    Ok(cert)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn fail_on_violation(kind: MapKind, conditions: &[Condition]) -> Result<()> {
    if let Some(c) = conditions.iter().find(|c| !c.holds()) {
        return Err(FlagError::NotNice {
            map: kind.name().into(),
            condition: c.name.clone(),
            margin: c.margin,
        });
    }
    Ok(())
}
