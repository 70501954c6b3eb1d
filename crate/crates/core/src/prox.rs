//! Proximal operators and weighted-proximal subproblem solvers.
//!
//! Every primal map reduces to minimizing `φ(ξ) + ⟨g, ξ⟩ + ½ξᵀKξ` where `φ` is an objective
//! in normal form ([`FlatObjective`]). Quadratic coordinates are solved jointly by a dense
//! SPD solve; l1/box coordinates must be decoupled from everything else in the effective
//! Hessian and are solved in closed form.

use nalgebra::{DMatrix, DVector};

use crate::error::{FlagError, Result};
use crate::linalg::{self, SINGULAR_TOL, SYM_TOL};
use crate::problem::{FlatObjective, ObjectiveTerm};

/// Symmetric PSD weighting matrix (`W`, `M`, `M₁`, `M₂`, `P`, `Q`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(FlagError::dim("weight matrix columns", m.nrows(), m.ncols()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(FlagError::InvalidData("weight matrix has non-finite entries".into()));
        }
        let asym = linalg::symmetry_residual(&m);
        if asym > SYM_TOL {
            return Err(FlagError::InvalidData(format!(
                "weight matrix is not symmetric (residual {asym:.3e})"
            )));
        }
        let min_eig = linalg::lambda_min(&m);
        if min_eig < -SYM_TOL {
            return Err(FlagError::InvalidData(format!(
                "weight matrix is not PSD (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(WeightMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        WeightMatrix(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Result<Self> {
        WeightMatrix::new(DMatrix::identity(n, n) * s)
    }

    pub fn zeros(n: usize) -> Self {
        WeightMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `‖v‖²_W`.
    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        linalg::quad_form(&self.0, v)
    }
}

/// Componentwise `sign(wᵢ)·max(|wᵢ| − t, 0)`.
pub fn soft_threshold(w: &DVector<f64>, t: f64) -> DVector<f64> {
    debug_assert!(t >= 0.0);
    w.map(|v| soft_scalar(v, t))
}

pub(crate) fn soft_scalar(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `(H + W)⁻¹(W·anchor − q)`, the minimizer of `½ξᵀHξ + qᵀξ + ½‖ξ − anchor‖²_W`.
pub fn solve_regularized_quadratic(
    h: &DMatrix<f64>,
    q: &DVector<f64>,
    w: &WeightMatrix,
    anchor: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = h.nrows();
    if w.dim() != n {
        return Err(FlagError::dim("weight matrix", n, w.dim()));
    }
    if q.len() != n || anchor.len() != n {
        return Err(FlagError::dim("quadratic data", n, q.len().max(anchor.len())));
    }
    let k = h + w.matrix();
    let rhs = w.matrix() * anchor - q;
    linalg::solve_spd(&k, &rhs)
}

/// `argmin_ξ φ(ξ) + ⟨linear, ξ⟩ + ½‖ξ − anchor‖²_W` for a prox-friendly term `φ`.
pub fn prox_weighted(
    term: &ObjectiveTerm,
    linear: &DVector<f64>,
    w: &WeightMatrix,
    anchor: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = term.dim();
    if linear.len() != n || anchor.len() != n || w.dim() != n {
        return Err(FlagError::dim(
            "prox data",
            n,
            [linear.len(), anchor.len(), w.dim()].into_iter().find(|&d| d != n).unwrap_or(n),
        ));
    }
    let g = linear - w.matrix() * anchor;
    minimize_flat(&term.flatten(), &g, w.matrix())
}

/// Checks that every nonsmooth coordinate of `flat` is decoupled in `flat.h + k`.
pub(crate) fn check_separable(flat: &FlatObjective, k: &DMatrix<f64>) -> Result<()> {
    let n = flat.dim();
    let keff = &flat.h + k;
    let scale = keff.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for i in (0..n).filter(|&i| flat.is_nonsmooth(i)) {
        for j in (0..n).filter(|&j| j != i) {
            if keff[(i, j)].abs() > 1e-14 * scale || keff[(j, i)].abs() > 1e-14 * scale {
                return Err(FlagError::Unsupported(format!(
                    "coordinate {i} carries an l1/box term but is coupled to coordinate {j} in the \
                     subproblem Hessian; use a linearized map or a diagonal proximal weight"
                )));
            }
        }
    }
    Ok(())
}

/// Minimizes `flat(ξ) + ⟨g, ξ⟩ + ½ξᵀKξ`.
pub(crate) fn minimize_flat(
    flat: &FlatObjective,
    g: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = flat.dim();
    check_separable(flat, k)?;
    let keff = &flat.h + k;
    let lin = g + &flat.q;
    let smooth: Vec<usize> = (0..n).filter(|&i| !flat.is_nonsmooth(i)).collect();
    let mut x = DVector::zeros(n);

    if !smooth.is_empty() {
        let s = smooth.len();
        let ks = DMatrix::from_fn(s, s, |a, b| keff[(smooth[a], smooth[b])]);
        let rhs = DVector::from_fn(s, |a, _| -lin[smooth[a]]);
        let sol = linalg::solve_spd(&ks, &rhs)?;
        for (a, &i) in smooth.iter().enumerate() {
            x[i] = sol[a];
        }
    }
    for i in (0..n).filter(|&i| flat.is_nonsmooth(i)) {
        let a = keff[(i, i)];
        if a < SINGULAR_TOL {
            return Err(FlagError::DegenerateSubproblem { min_eig: a });
        }
        let v = soft_scalar(-lin[i] / a, flat.l1[i] / a);
        x[i] = v.clamp(flat.lo[i], flat.hi[i]);
    }
    Ok(x)
}
