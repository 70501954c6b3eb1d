//! Reference solutions computed without FLAG.
//!
//! Quadratic problems go through the KKT system directly. With l1 or box terms two
//! unrelated first-order methods are run (a linearized augmented Lagrangian method and a
//! method of multipliers with an accelerated inner solver); each result is then polished
//! by guessing the active set and solving the reduced KKT system exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{FlagError, Result};
use crate::linalg;
use crate::problem::{ConstrainedProblem, FlatObjective};
use crate::prox::soft_scalar;

/// Largest tolerated KKT residual of a reference solution.
pub const KKT_TOL: f64 = 1e-9;
/// Oracles further apart than this are not trusted.
pub const DISAGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub y_star: DVector<f64>,
    pub psi_star: f64,
    /// Dual bound used by the rate constants: `2‖y*‖`, or 1 when `y* = 0`.
    pub c: f64,
    /// `max(dist(0, ∂Ψ(x*) + 𝒜ᵀy*), ‖𝒜x* − b‖)`.
    pub kkt_residual: f64,
    /// Distance between the two oracles' polished solutions; `None` for the direct solve.
    pub agreement: Option<f64>,
}

impl ReferenceSolution {
    /// Overrides `c`; it must stay at least `2‖y*‖`.
    pub fn with_c(mut self, c: f64) -> Result<Self> {
        let need = 2.0 * self.y_star.norm();
        if !(c > 0.0 && c >= need * (1.0 - 1e-12)) {
            return Err(FlagError::Config(format!("c must be positive and ≥ 2‖y*‖ = {need:.6e}, got {c}")));
        }
        self.c = c;
        Ok(self)
    }
}

pub fn default_c(y_star: &DVector<f64>) -> f64 {
    let c = 2.0 * y_star.norm();
    if c > 0.0 {
        c
    } else {
        1.0
    }
}

/// `max(stationarity, feasibility)` for the pair `(x, y)`.
pub fn kkt_residual(flat: &FlatObjective, a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let g = flat.smooth_gradient(x) + a.tr_mul(y);
    flat.stationarity_residual(x, &g).max((a * x - b).norm())
}

/// Solves `[[H, Aᵀ], [A, 0]] [x; y] = [r1; r2]`.
fn kkt_solve(h: &DMatrix<f64>, a: &DMatrix<f64>, r1: &DVector<f64>, r2: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (h.nrows(), a.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    let rhs = linalg::concat(r1, r2);
    let scale = 1.0 + rhs.amax();
    let lu = k.clone().lu();
    let mut sol = None;
    if let Some(mut s) = lu.solve(&rhs) {
        for _ in 0..2 {
            let r = &rhs - &k * &s;
            if let Some(ds) = lu.solve(&r) {
                s += ds;
            }
        }
        if s.iter().all(|v| v.is_finite()) && (&rhs - &k * &s).amax() <= 1e-11 * scale {
            sol = Some(s);
        }
    }
    let s = match sol {
        Some(s) => s,
        None => {
            // singular (redundant rows or a flat direction): least-squares solution
            let svd = k.clone().svd(true, true);
            let mut s = svd
                .solve(&rhs, 1e-13 * svd.singular_values.max())
                .map_err(|e| FlagError::Numerical(format!("KKT solve failed: {e}")))?;
            let r = &rhs - &k * &s;
            if let Ok(ds) = svd.solve(&r, 1e-13 * svd.singular_values.max()) {
                s += ds;
            }
            s
        }
    };
    Ok((s.rows(0, n).into_owned(), s.rows(n, m).into_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fixed {
    Free,
    At(f64),
}

/// Solves the KKT system with the coordinates in `fixed` pinned and the free l1
/// coordinates' signs frozen.
fn reduced_kkt(
    flat: &FlatObjective,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    fixed: &[Fixed],
    signs: &[f64],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = flat.dim();
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i] == Fixed::Free).collect();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        if let Fixed::At(v) = fixed[i] {
            x[i] = v;
        }
    }
    let nf = free.len();
    let m = a.nrows();
    let hff = DMatrix::from_fn(nf, nf, |r, c| flat.h[(free[r], free[c])]);
    let af = DMatrix::from_fn(m, nf, |r, c| a[(r, free[c])]);
    // contributions of the pinned coordinates
    let hx = &flat.h * &x;
    let r1 = DVector::from_fn(nf, |r, _| {
        let i = free[r];
        -flat.q[i] - flat.l1[i] * signs[i] - hx[i]
    });
    let r2 = b - a * &x;
    let (xf, y) = kkt_solve(&hff, &af, &r1, &r2)?;
    for (r, &i) in free.iter().enumerate() {
        x[i] = xf[r];
    }
    Ok((x, y))
}

/// Active-set polish of an approximate primal-dual pair; keeps the best candidate.
fn polish(
    flat: &FlatObjective,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, f64) {
    let n = flat.dim();
    let mut best = (x0.clone(), y0.clone(), kkt_residual(flat, a, b, x0, y0));
    for thr in [1e-12, 1e-10, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3] {
        let mut fixed = vec![Fixed::Free; n];
        let mut signs = vec![0.0; n];
        for i in 0..n {
            let xi = x0[i];
            let (lo, hi) = (flat.lo[i], flat.hi[i]);
            if lo.is_finite() && xi - lo <= thr * (1.0 + lo.abs()) {
                fixed[i] = Fixed::At(lo);
            } else if hi.is_finite() && hi - xi <= thr * (1.0 + hi.abs()) {
                fixed[i] = Fixed::At(hi);
            } else if flat.l1[i] > 0.0 && xi.abs() <= thr {
                fixed[i] = Fixed::At(0.0);
            } else if flat.l1[i] > 0.0 {
                signs[i] = xi.signum();
            }
        }
        let Ok((x, y)) = reduced_kkt(flat, a, b, &fixed, &signs) else {
            continue;
        };
        // frozen signs must survive the solve
        let consistent = (0..n).all(|i| signs[i] == 0.0 || x[i] * signs[i] >= 0.0);
        if !consistent || x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            continue;
        }
        let res = kkt_residual(flat, a, b, &x, &y);
        if res < best.2 {
            best = (x, y, res);
        }
    }
    best
}

fn prox_step(flat: &FlatObjective, v: &DVector<f64>, step: f64) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| {
        soft_scalar(v[i], step * flat.l1[i]).clamp(flat.lo[i], flat.hi[i])
    })
}

/// Linearized augmented Lagrangian method: one proximal gradient step on `𝓛_ρ(·, y)`
/// followed by a full multiplier step.
fn linearized_alm(flat: &FlatObjective, a: &DMatrix<f64>, b: &DVector<f64>, start: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let rho = 1.0;
    let lip = linalg::lambda_max(&flat.h).max(0.0) + rho * linalg::gram_lambda_max(a);
    let step = 1.0 / lip.max(1e-12);
    let mut x = start.clone();
    let mut y = DVector::zeros(a.nrows());
    for it in 0..200_000 {
        let r = a * &x - b;
        let grad = flat.smooth_gradient(&x) + a.tr_mul(&(&y + &r * rho));
        let x_new = prox_step(flat, &(&x - grad * step), step);
        let moved = (&x_new - &x).amax();
        x = x_new;
        y += (a * &x - b) * rho;
        if it % 500 == 0 && moved < 1e-14 && kkt_residual(flat, a, b, &x, &y) < 1e-12 {
            break;
        }
    }
    (x, y)
}

/// Method of multipliers; each subproblem solved by FISTA with adaptive restart.
fn multipliers_fista(flat: &FlatObjective, a: &DMatrix<f64>, b: &DVector<f64>, start: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let rho = 10.0;
    let hk = &flat.h + a.tr_mul(a) * rho;
    let lip = linalg::lambda_max(&linalg::symmetrize(&hk)).max(1e-12);
    let step = 1.0 / lip;
    let mut x = start.clone();
    let mut y = DVector::zeros(a.nrows());
    for outer in 0..400 {
        let inner_tol = (1e-4 * 0.5_f64.powi(outer)).max(1e-15);
        let lin = &flat.q + a.tr_mul(&(&y - b * rho));
        let mut w = x.clone();
        let mut theta = 1.0_f64;
        for _ in 0..20_000 {
            let grad = &hk * &w + &lin;
            let x_new = prox_step(flat, &(&w - grad * step), step);
            let diff = &x_new - &x;
            let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            // restart when momentum points uphill
            if (&w - &x_new).dot(&diff) > 0.0 {
                w = x_new.clone();
                theta = 1.0;
            } else {
                w = &x_new + diff.clone() * ((theta - 1.0) / theta_new);
                theta = theta_new;
            }
            x = x_new;
            if diff.amax() / step < inner_tol {
                break;
            }
        }
        let r = a * &x - b;
        y += &r * rho;
        if r.amax() < 1e-13 && kkt_residual(flat, a, b, &x, &y) < 1e-12 {
            break;
        }
    }
    (x, y)
}

/// Reference primal-dual solution of `prob`.
pub fn reference_solve(prob: &ConstrainedProblem) -> Result<ReferenceSolution> {
    let flat = prob.flat_psi();
    let a = prob.constraint_map().matrix();
    let b = prob.rhs();
    let n = prob.n();

    let finish = |x: DVector<f64>, y: DVector<f64>, agreement: Option<f64>| -> Result<ReferenceSolution> {
        let kkt = kkt_residual(&flat, a, b, &x, &y);
        let psi_star = prob.eval_objective(&x);
        if !psi_star.is_finite() {
            return Err(FlagError::UnreliableReference("reference point outside the domain".into()));
        }
        Ok(ReferenceSolution {
            c: default_c(&y),
            x_star: x,
            y_star: y,
            psi_star,
            kkt_residual: kkt,
            agreement,
        })
    };

    if flat.is_quadratic() {
        let (x, y) = kkt_solve(&flat.h, a, &-&flat.q, b)?;
        return finish(x, y, None);
    }

    let start = match prob.feasible_point() {
        Some(x) => x.clone(),
        None => DVector::zeros(n),
    };
    let (xa, ya) = linearized_alm(&flat, a, b, &start);
    let (xb, yb) = multipliers_fista(&flat, a, b, &start);
    let (xa, ya, ra) = polish(&flat, a, b, &xa, &ya);
    let (xb, yb, rb) = polish(&flat, a, b, &xb, &yb);
    let agreement = (&xa - &xb).amax().max((&ya - &yb).amax()) / (1.0 + xa.amax().max(ya.amax()));
    if agreement > DISAGREEMENT_TOL {
        return Err(FlagError::UnreliableReference(format!(
            "oracles disagree by {agreement:.3e} (KKT residuals {ra:.1e} and {rb:.1e})"
        )));
    }
    let (x, y) = if ra <= rb { (xa, ya) } else { (xb, yb) };
    finish(x, y, Some(agreement))
}
