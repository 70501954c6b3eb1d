//! Seeded test-problem families.
//!
//! * `eq-qp`: `½xᵀHx + qᵀx` subject to `Ax = b`, `λmin(H) = σ`.
//! * `lasso-split`: `½‖Du − e‖² + w‖v‖₁` subject to `Au − v = 0`.
//! * `block-qp`: quadratic `f(u) + g(v)` subject to `Au + Bv = b`, only `g` strongly convex.
//! * `smooth-composite`: `w‖x‖₁ (+ σ/2‖x‖²) + h(x)` with quadratic `h` and its Lipschitz
//!   constant, subject to `Ax = b`.
//!
//! Every instance stores a feasible point. Spectra are placed exactly: for `σ > 0` the
//! eigenvalues run geometrically from `σ` to `σ·conditioning`; for `σ = 0` one eigenvalue
//! is zero and the rest run from 1 to `conditioning`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{FlagError, Result};
use crate::linalg;
use crate::problem::{BlockProblem, ConstrainedProblem, LinearMap, ObjectiveTerm, SmoothTerm};
use crate::random::{self, FlagRng};

/// l1 weight used by the nonsmooth families.
pub const L1_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    EqQp,
    LassoSplit,
    BlockQp,
    SmoothComposite,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::EqQp,
        Family::LassoSplit,
        Family::BlockQp,
        Family::SmoothComposite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::EqQp => "eq-qp",
            Family::LassoSplit => "lasso-split",
            Family::BlockQp => "block-qp",
            Family::SmoothComposite => "smooth-composite",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Family {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FlagError::Config(format!("unknown problem family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Eigenvalue spread `λmax/λmin` of the curvature matrices.
    pub conditioning: f64,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, m: usize, sigma: f64, seed: u64) -> Self {
        GenSpec {
            family,
            n,
            m,
            sigma,
            seed,
            conditioning: 10.0,
        }
    }

    pub fn with_conditioning(mut self, conditioning: f64) -> Self {
        self.conditioning = conditioning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FlagError::Config(msg));
        if self.n == 0 || self.m == 0 {
            return bad(format!("n and m must be positive (n={}, m={})", self.n, self.m));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if !(self.conditioning >= 1.0 && self.conditioning.is_finite()) {
            return bad(format!("conditioning must be at least 1, got {}", self.conditioning));
        }
        match self.family {
            Family::EqQp | Family::SmoothComposite | Family::BlockQp if self.m > self.n => bad(format!(
                "{} needs m ≤ n, got m={} > n={}",
                self.family, self.m, self.n
            )),
            Family::LassoSplit if self.m >= self.n => bad(format!(
                "lasso-split needs m < n (n = dim u + dim v with dim v = m), got m={} n={}",
                self.m, self.n
            )),
            Family::BlockQp if self.n < 2 => bad("block-qp needs n ≥ 2".into()),
            _ => Ok(()),
        }
    }
}

/// Eigenvalues placed as described in the module docs.
pub fn spectrum(count: usize, sigma: f64, conditioning: f64) -> Vec<f64> {
    let geometric = |k: usize, lo: f64| -> Vec<f64> {
        (0..k)
            .map(|i| {
                if k == 1 {
                    lo
                } else {
                    lo * conditioning.powf(i as f64 / (k - 1) as f64)
                }
            })
            .collect()
    };
    if sigma > 0.0 {
        geometric(count, sigma)
    } else if count == 0 {
        Vec::new()
    } else {
        let mut out = vec![0.0];
        out.extend(geometric(count - 1, 1.0));
        out
    }
}

/// `Q diag(eigs) Qᵀ` with a random orthogonal `Q`, symmetrized exactly.
fn spd_with_spectrum(rng: &mut FlagRng, eigs: &[f64]) -> DMatrix<f64> {
    let n = eigs.len();
    let q = random::orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    linalg::symmetrize(&(&q * d * q.transpose()))
}

fn quadratic(h: DMatrix<f64>, q: DVector<f64>, r: f64, sigma: f64) -> Result<ObjectiveTerm> {
    ObjectiveTerm::quadratic(h, q, r)?.with_strong_convexity(sigma)
}

/// Generates a problem; the same spec always yields the same bits.
pub fn generate(spec: &GenSpec) -> Result<ConstrainedProblem> {
    spec.validate()?;
    let mut rng = random::seeded(spec.seed);
    let rng = &mut rng;
    let (n, m, sigma, kappa) = (spec.n, spec.m, spec.sigma, spec.conditioning);
    match spec.family {
        Family::EqQp => {
            let h = spd_with_spectrum(rng, &spectrum(n, sigma, kappa));
            let q = random::normal_vec(rng, n);
            let a = random::normal_mat(rng, m, n);
            let x_f = random::normal_vec(rng, n);
            let b = &a * &x_f;
            ConstrainedProblem::new(quadratic(h, q, 0.0, sigma)?, None, LinearMap::new(a)?, b, sigma)?
                .with_feasible_point(x_f)
        }
        Family::LassoSplit => {
            let (p, q) = (n - m, m);
            let eigs = spectrum(p, sigma, kappa);
            let u_basis = random::orthogonal(rng, p);
            // D = diag(√eig) Uᵀ so that DᵀD has the requested spectrum
            let sq = DMatrix::from_diagonal(&DVector::from_iterator(p, eigs.iter().map(|e| e.sqrt())));
            let d = sq * u_basis.transpose();
            let e = random::normal_vec(rng, p);
            let h = linalg::symmetrize(&d.tr_mul(&d));
            let lin = -d.tr_mul(&e);
            let f = quadratic(h, lin, 0.5 * e.norm_squared(), sigma)?;
            let g = ObjectiveTerm::l1(q, L1_WEIGHT)?;
            let a = random::normal_mat(rng, m, p);
            let u_f = random::normal_vec(rng, p);
            let v_f = &a * &u_f;
            let bp = BlockProblem::new(
                f,
                g,
                LinearMap::new(a)?,
                LinearMap::new(-DMatrix::identity(q, q))?,
                DVector::zeros(m),
            );
            bp.flatten_block()?.with_feasible_point(linalg::concat(&u_f, &v_f))
        }
        Family::BlockQp => {
            let p = n.div_ceil(2);
            let q = n - p;
            let hf = spd_with_spectrum(rng, &spectrum(p, 0.0, kappa));
            let qf = random::normal_vec(rng, p);
            let hg = spd_with_spectrum(rng, &spectrum(q, sigma, kappa));
            let qg = random::normal_vec(rng, q);
            let a = random::normal_mat(rng, m, p);
            let b = random::normal_mat(rng, m, q);
            let u_f = random::normal_vec(rng, p);
            let v_f = random::normal_vec(rng, q);
            let rhs = &a * &u_f + &b * &v_f;
            let bp = BlockProblem::new(
                quadratic(hf, qf, 0.0, 0.0)?,
                quadratic(hg, qg, 0.0, sigma)?,
                LinearMap::new(a)?,
                LinearMap::new(b)?,
                rhs,
            );
            bp.flatten_block()?.with_feasible_point(linalg::concat(&u_f, &v_f))
        }
        Family::SmoothComposite => {
            let hh = spd_with_spectrum(rng, &spectrum(n, 0.0, kappa));
            let qh = random::normal_vec(rng, n);
            let lip = linalg::lambda_max(&hh).max(kappa);
            let a = random::normal_mat(rng, m, n);
            let x_f = random::normal_vec(rng, n);
            let b = &a * &x_f;
            let l1 = ObjectiveTerm::l1(n, L1_WEIGHT)?;
            let f = if sigma > 0.0 {
                ObjectiveTerm::sum(vec![ObjectiveTerm::scaled_identity(n, sigma)?, l1])?
            } else {
                l1
            };
            let h = SmoothTerm::new(hh, qh, 0.0, lip)?;
            ConstrainedProblem::new(f, Some(h), LinearMap::new(a)?, b, sigma)?.with_feasible_point(x_f)
        }
    }
}
