//! Linearly constrained convex problems `min Ψ(x) s.t. 𝒜x = b`.
//!
//! The objective is a closed enumeration of prox-friendly pieces (quadratics, weighted l1,
//! box indicators, zero, and sums or block stacks of those), optionally plus a smooth
//! quadratic `h` with a declared gradient Lipschitz constant. Two-block problems
//! `f(u) + g(v)` with `Au + Bv = b` are kept as [`BlockProblem`] and flattened into
//! [`ConstrainedProblem`] with the split recorded.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{FlagError, Result};
use crate::linalg::{self, SYM_TOL};

/// Dense constraint matrix with finite entries and positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap(DMatrix<f64>);

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(FlagError::InvalidData(format!(
                "linear map must have positive dimensions, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(FlagError::InvalidData("linear map has non-finite entries".into()));
        }
        Ok(LinearMap(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(FlagError::InvalidData("ragged matrix rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        LinearMap::new(DMatrix::from_row_slice(m, n, &data))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }

    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.0.tr_mul(y)
    }

    /// `𝒜ᵀ𝒜`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.0.tr_mul(&self.0)
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Zero,
    /// `½ xᵀHx + qᵀx + r`.
    Quadratic {
        h: DMatrix<f64>,
        q: DVector<f64>,
        r: f64,
    },
    /// `weight · ‖x‖₁`.
    L1 { weight: f64 },
    /// Indicator of `lo ≤ x ≤ hi`; infinite bounds allowed.
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// Several terms acting on the same coordinates.
    Sum(Vec<ObjectiveTerm>),
    /// Terms acting on consecutive coordinate blocks.
    Stacked(Vec<ObjectiveTerm>),
}

/// One prox-friendly objective piece with its declared strong-convexity modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerm {
    kind: TermKind,
    dim: usize,
    strong_convexity: f64,
}

impl ObjectiveTerm {
    pub fn zero(dim: usize) -> Self {
        ObjectiveTerm {
            kind: TermKind::Zero,
            dim,
            strong_convexity: 0.0,
        }
    }

    pub fn quadratic(h: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(FlagError::dim("quadratic H columns", n, h.ncols()));
        }
        if q.len() != n {
            return Err(FlagError::dim("quadratic q", n, q.len()));
        }
        if h.iter().chain(q.iter()).any(|v| !v.is_finite()) || !r.is_finite() {
            return Err(FlagError::InvalidData("quadratic term has non-finite data".into()));
        }
        let asym = linalg::symmetry_residual(&h);
        if asym > SYM_TOL {
            return Err(FlagError::InvalidData(format!(
                "quadratic H is not symmetric (residual {asym:.3e})"
            )));
        }
        let min_eig = linalg::lambda_min(&h);
        if min_eig < -SYM_TOL {
            return Err(FlagError::InvalidData(format!(
                "quadratic H is not PSD (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(ObjectiveTerm {
            kind: TermKind::Quadratic { h, q, r },
            dim: n,
            strong_convexity: 0.0,
        })
    }

    /// `½‖x‖²` scaled by `scale`, declared `scale`-strongly convex.
    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        ObjectiveTerm::quadratic(
            DMatrix::identity(dim, dim) * scale,
            DVector::zeros(dim),
            0.0,
        )?
        .with_strong_convexity(scale)
    }

    pub fn l1(dim: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(FlagError::InvalidData(format!(
                "l1 weight must be finite and non-negative, got {weight}"
            )));
        }
        Ok(ObjectiveTerm {
            kind: TermKind::L1 { weight },
            dim,
            strong_convexity: 0.0,
        })
    }

    pub fn box_indicator(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(FlagError::dim("box bounds", lo.len(), hi.len()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
            return Err(FlagError::InvalidData("box has lo > hi or NaN bound".into()));
        }
        Ok(ObjectiveTerm {
            dim: lo.len(),
            kind: TermKind::Box { lo, hi },
            strong_convexity: 0.0,
        })
    }

    pub fn sum(terms: Vec<ObjectiveTerm>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.dim)
            .ok_or_else(|| FlagError::InvalidData("empty sum of terms".into()))?;
        if let Some(bad) = terms.iter().find(|t| t.dim != dim) {
            return Err(FlagError::dim("sum member", dim, bad.dim));
        }
        let strong_convexity = terms.iter().map(|t| t.strong_convexity).sum();
        Ok(ObjectiveTerm {
            kind: TermKind::Sum(terms),
            dim,
            strong_convexity,
        })
    }

    pub fn stacked(blocks: Vec<ObjectiveTerm>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(FlagError::InvalidData("empty block stack".into()));
        }
        let dim = blocks.iter().map(|t| t.dim).sum();
        let strong_convexity = blocks
            .iter()
            .map(|t| t.strong_convexity)
            .fold(f64::INFINITY, f64::min);
        Ok(ObjectiveTerm {
            kind: TermKind::Stacked(blocks),
            dim,
            strong_convexity,
        })
    }

    /// Declares a strong-convexity modulus for a quadratic leaf.
    ///
    /// The declared value may not exceed the smallest eigenvalue of `H` by more than 1e-8.
    pub fn with_strong_convexity(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(FlagError::InvalidData(format!(
                "strong convexity must be finite and non-negative, got {sigma}"
            )));
        }
        match &self.kind {
            TermKind::Quadratic { h, .. } => {
                let min_eig = linalg::lambda_min(h);
                if sigma > min_eig + 1e-8 {
                    return Err(FlagError::InvalidData(format!(
                        "declared strong convexity {sigma} exceeds smallest eigenvalue {min_eig:.6e} of H"
                    )));
                }
            }
            _ if sigma == 0.0 => {}
            _ => {
                return Err(FlagError::InvalidData(
                    "only quadratic leaves can declare strong convexity".into(),
                ))
            }
        }
        self.strong_convexity = sigma;
        Ok(self)
    }

    pub fn kind(&self) -> &TermKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// Evaluates the term; `+∞` outside an indicator's domain.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            TermKind::Zero => 0.0,
            TermKind::Quadratic { h, q, r } => 0.5 * linalg::quad_form(h, x) + q.dot(x) + r,
            TermKind::L1 { weight } => weight * x.lp_norm(1),
            TermKind::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| *v >= *l && *v <= *h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            TermKind::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            TermKind::Stacked(blocks) => {
                let mut offset = 0;
                let mut total = 0.0;
                for b in blocks {
                    total += b.eval(&x.rows(offset, b.dim).into_owned());
                    offset += b.dim;
                }
                total
            }
        }
    }

    /// Normal form: one global quadratic plus coordinate-separable l1 weights and bounds.
    pub fn flatten(&self) -> FlatObjective {
        let mut flat = FlatObjective::zero(self.dim);
        self.accumulate(&mut flat, 0);
        flat
    }

    fn accumulate(&self, flat: &mut FlatObjective, offset: usize) {
        let n = self.dim;
        match &self.kind {
            TermKind::Zero => {}
            TermKind::Quadratic { h, q, r } => {
                let mut hv = flat.h.view_mut((offset, offset), (n, n));
                hv += h;
                let mut qv = flat.q.rows_mut(offset, n);
                qv += q;
                flat.r += r;
            }
            TermKind::L1 { weight } => {
                for i in offset..offset + n {
                    flat.l1[i] += weight;
                }
            }
            TermKind::Box { lo, hi } => {
                for i in 0..n {
                    flat.lo[offset + i] = flat.lo[offset + i].max(lo[i]);
                    flat.hi[offset + i] = flat.hi[offset + i].min(hi[i]);
                }
            }
            TermKind::Sum(terms) => {
                for t in terms {
                    t.accumulate(flat, offset);
                }
            }
            TermKind::Stacked(blocks) => {
                let mut off = offset;
                for b in blocks {
                    b.accumulate(flat, off);
                    off += b.dim;
                }
            }
        }
    }
}

/// `½xᵀHx + qᵀx + r + Σ wᵢ|xᵢ| + ι{lo ≤ x ≤ hi}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatObjective {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
    pub l1: DVector<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl FlatObjective {
    pub fn zero(n: usize) -> Self {
        FlatObjective {
            h: DMatrix::zeros(n, n),
            q: DVector::zeros(n),
            r: 0.0,
            l1: DVector::zeros(n),
            lo: DVector::from_element(n, f64::NEG_INFINITY),
            hi: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_nonsmooth(&self, i: usize) -> bool {
        self.l1[i] > 0.0 || self.lo[i].is_finite() || self.hi[i].is_finite()
    }

    pub fn is_quadratic(&self) -> bool {
        (0..self.dim()).all(|i| !self.is_nonsmooth(i))
    }

    pub fn smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.q
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        for i in 0..x.len() {
            if x[i] < self.lo[i] || x[i] > self.hi[i] {
                return f64::INFINITY;
            }
        }
        0.5 * linalg::quad_form(&self.h, x) + self.q.dot(x) + self.r + self.l1.dot(&x.abs())
    }

    /// Adds a smooth quadratic (e.g. the `h` term) into the normal form.
    pub fn add_quadratic(&mut self, h: &DMatrix<f64>, q: &DVector<f64>, r: f64) {
        self.h += h;
        self.q += q;
        self.r += r;
    }

    /// Restriction to a coordinate range; the caller guarantees no coupling leaves the range.
    pub fn restrict(&self, range: Range<usize>) -> FlatObjective {
        let (s, len) = (range.start, range.len());
        FlatObjective {
            h: self.h.view((s, s), (len, len)).into_owned(),
            q: self.q.rows(s, len).into_owned(),
            r: 0.0,
            l1: self.l1.rows(s, len).into_owned(),
            lo: self.lo.rows(s, len).into_owned(),
            hi: self.hi.rows(s, len).into_owned(),
        }
    }

    /// Distance from `-g` to the subdifferential of the nonsmooth part at `x`, where `g`
    /// collects every smooth gradient contribution (including `Hx + q`).
    ///
    /// Returns `∞` if `x` is outside the box.
    pub fn stationarity_residual(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            let d = coordinate_stationarity(x[i], g[i], self.l1[i], self.lo[i], self.hi[i]);
            if !d.is_finite() {
                return f64::INFINITY;
            }
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// `dist(-g, ∂(w|·| + ι[lo,hi])(x))` for a single coordinate.
pub(crate) fn coordinate_stationarity(x: f64, g: f64, w: f64, lo: f64, hi: f64) -> f64 {
    const AT: f64 = 1e-12;
    if x < lo - AT * (1.0 + lo.abs()) || x > hi + AT * (1.0 + hi.abs()) {
        return f64::INFINITY;
    }
    let (mut a, mut b) = if x > 0.0 {
        (w, w)
    } else if x < 0.0 {
        (-w, -w)
    } else {
        (-w, w)
    };
    let at_lo = lo.is_finite() && (x - lo).abs() <= AT * (1.0 + lo.abs());
    let at_hi = hi.is_finite() && (x - hi).abs() <= AT * (1.0 + hi.abs());
    if at_lo {
        a = f64::NEG_INFINITY;
    }
    if at_hi {
        b = f64::INFINITY;
    }
    let target = -g;
    if target < a {
        a - target
    } else if target > b {
        target - b
    } else {
        0.0
    }
}

/// Smooth convex quadratic `h(x) = ½xᵀHx + qᵀx + r` with gradient Lipschitz constant `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTerm {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
    pub lipschitz_grad: f64,
}

impl SmoothTerm {
    pub fn new(h: DMatrix<f64>, q: DVector<f64>, r: f64, lipschitz_grad: f64) -> Result<Self> {
        // reuse the quadratic validation
        ObjectiveTerm::quadratic(h.clone(), q.clone(), r)?;
        if !(lipschitz_grad > 0.0 && lipschitz_grad.is_finite()) {
            return Err(FlagError::InvalidData(format!(
                "lipschitz constant must be positive, got {lipschitz_grad}"
            )));
        }
        let top = linalg::lambda_max(&h);
        if lipschitz_grad < top - 1e-8 {
            return Err(FlagError::InvalidData(format!(
                "lipschitz constant {lipschitz_grad} below largest eigenvalue {top:.6e} of H"
            )));
        }
        Ok(SmoothTerm {
            h,
            q,
            r,
            lipschitz_grad,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * linalg::quad_form(&self.h, x) + self.q.dot(x) + self.r
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.q
    }
}

/// Records that a flattened problem came from `f(u) + g(v)` with `x = (u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSplit {
    pub u_dim: usize,
    pub v_dim: usize,
    pub sigma_f: f64,
    pub sigma_g: f64,
}

/// `min Ψ(x) s.t. 𝒜x = b` with `Ψ = f (+ h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    objective: ObjectiveTerm,
    smooth: Option<SmoothTerm>,
    constraint_map: LinearMap,
    rhs: DVector<f64>,
    sigma: f64,
    block: Option<BlockSplit>,
    feasible_point: Option<DVector<f64>>,
    flat: FlatObjective,
}

impl ConstrainedProblem {
    pub fn new(
        objective: ObjectiveTerm,
        smooth: Option<SmoothTerm>,
        constraint_map: LinearMap,
        rhs: DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let n = objective.dim();
        if constraint_map.cols() != n {
            return Err(FlagError::dim("constraint map columns", n, constraint_map.cols()));
        }
        if rhs.len() != constraint_map.rows() {
            return Err(FlagError::dim("rhs length", constraint_map.rows(), rhs.len()));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(FlagError::InvalidData("rhs has non-finite entries".into()));
        }
        if let Some(h) = &smooth {
            if h.dim() != n {
                return Err(FlagError::dim("smooth term", n, h.dim()));
            }
        }
        let declared = objective.strong_convexity();
        if (sigma - declared).abs() > 1e-12 * (1.0 + declared) {
            return Err(FlagError::InvalidData(format!(
                "sigma {sigma} differs from the declared strong convexity {declared} of the objective"
            )));
        }
        let flat = objective.flatten();
        Ok(ConstrainedProblem {
            objective,
            smooth,
            constraint_map,
            rhs,
            sigma,
            block: None,
            feasible_point: None,
            flat,
        })
    }

    /// Attaches a known feasible point after checking `‖𝒜x − b‖ ≤ 1e-8·(1 + ‖b‖)`.
    pub fn with_feasible_point(mut self, x: DVector<f64>) -> Result<Self> {
        let res = self.feasibility_residual(&x)?;
        if res > 1e-8 * (1.0 + self.rhs.norm()) {
            return Err(FlagError::InvalidData(format!(
                "stored feasible point violates the constraints by {res:.3e}"
            )));
        }
        if !self.eval_objective(&x).is_finite() {
            return Err(FlagError::InvalidData(
                "stored feasible point is outside the objective domain".into(),
            ));
        }
        self.feasible_point = Some(x);
        Ok(self)
    }

    pub(crate) fn with_block(mut self, split: BlockSplit) -> Result<Self> {
        if split.u_dim + split.v_dim != self.n() {
            return Err(FlagError::dim("block split", self.n(), split.u_dim + split.v_dim));
        }
        self.block = Some(split);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.objective.dim()
    }

    pub fn m(&self) -> usize {
        self.constraint_map.rows()
    }

    pub fn objective(&self) -> &ObjectiveTerm {
        &self.objective
    }

    pub fn smooth(&self) -> Option<&SmoothTerm> {
        self.smooth.as_ref()
    }

    pub fn constraint_map(&self) -> &LinearMap {
        &self.constraint_map
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn block(&self) -> Option<&BlockSplit> {
        self.block.as_ref()
    }

    pub fn feasible_point(&self) -> Option<&DVector<f64>> {
        self.feasible_point.as_ref()
    }

    /// Normal form of `f` alone (without `h`).
    pub fn flat_objective(&self) -> &FlatObjective {
        &self.flat
    }

    /// Normal form of `Ψ = f + h`.
    pub fn flat_psi(&self) -> FlatObjective {
        let mut flat = self.flat.clone();
        if let Some(h) = &self.smooth {
            flat.add_quadratic(&h.h, &h.q, h.r);
        }
        flat
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(FlagError::dim("point", self.n(), x.len()));
        }
        Ok(())
    }

    /// `𝒜x − b`.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.constraint_map.apply(x) - &self.rhs
    }

    /// `‖𝒜x − b‖₂`.
    pub fn feasibility_residual(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.constraint_residual(x).norm())
    }

    /// `Ψ(x) = f(x) + h(x)`, `+∞` outside the domain.
    pub fn eval_objective(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.n());
        let f = self.objective.eval(x);
        if !f.is_finite() {
            return f;
        }
        f + self.smooth.as_ref().map_or(0.0, |h| h.eval(x))
    }

    pub fn try_eval_objective(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval_objective(x))
    }

    /// Recovers the two-block view when the problem carries a block split.
    pub fn as_block(&self) -> Option<BlockProblem> {
        let split = self.block?;
        let TermKind::Stacked(blocks) = self.objective.kind() else {
            return None;
        };
        if blocks.len() != 2 {
            return None;
        }
        let a = self.constraint_map.matrix();
        Some(BlockProblem {
            f_term: blocks[0].clone(),
            g_term: blocks[1].clone(),
            a: LinearMap(a.columns(0, split.u_dim).into_owned()),
            b: LinearMap(a.columns(split.u_dim, split.v_dim).into_owned()),
            rhs: self.rhs.clone(),
            sigma_f: split.sigma_f,
            sigma_g: split.sigma_g,
        })
    }
}

/// `min f(u) + g(v) s.t. Au + Bv = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProblem {
    pub f_term: ObjectiveTerm,
    pub g_term: ObjectiveTerm,
    pub a: LinearMap,
    pub b: LinearMap,
    pub rhs: DVector<f64>,
    pub sigma_f: f64,
    pub sigma_g: f64,
}

impl BlockProblem {
    /// Builds a block problem; the strong-convexity moduli are read off the terms.
    pub fn new(
        f_term: ObjectiveTerm,
        g_term: ObjectiveTerm,
        a: LinearMap,
        b: LinearMap,
        rhs: DVector<f64>,
    ) -> Self {
        BlockProblem {
            sigma_f: f_term.strong_convexity(),
            sigma_g: g_term.strong_convexity(),
            f_term,
            g_term,
            a,
            b,
            rhs,
        }
    }

    pub fn u_dim(&self) -> usize {
        self.f_term.dim()
    }

    pub fn v_dim(&self) -> usize {
        self.g_term.dim()
    }

    /// Stacks `x = (u, v)`, `𝒜 = [A B]`, `Ψ = f + g`.
    ///
    /// The flattened `σ` is the modulus of `Ψ` as a whole (the smaller block modulus); the
    /// per-block moduli travel in the recorded [`BlockSplit`].
    pub fn flatten_block(&self) -> Result<ConstrainedProblem> {
        let m = self.rhs.len();
        if self.a.rows() != m {
            return Err(FlagError::dim("rows of A", m, self.a.rows()));
        }
        if self.b.rows() != m {
            return Err(FlagError::dim("rows of B", m, self.b.rows()));
        }
        if self.a.cols() != self.u_dim() {
            return Err(FlagError::dim("columns of A (dim u)", self.u_dim(), self.a.cols()));
        }
        if self.b.cols() != self.v_dim() {
            return Err(FlagError::dim("columns of B (dim v)", self.v_dim(), self.b.cols()));
        }
        if (self.sigma_f - self.f_term.strong_convexity()).abs() > 1e-12
            || (self.sigma_g - self.g_term.strong_convexity()).abs() > 1e-12
        {
            return Err(FlagError::InvalidData(
                "block moduli disagree with the declared term strong convexity".into(),
            ));
        }
        let (p, q) = (self.u_dim(), self.v_dim());
        let mut stacked = DMatrix::zeros(m, p + q);
        stacked.columns_mut(0, p).copy_from(self.a.matrix());
        stacked.columns_mut(p, q).copy_from(self.b.matrix());
        let objective = ObjectiveTerm::stacked(vec![self.f_term.clone(), self.g_term.clone()])?;
        let sigma = objective.strong_convexity();
        ConstrainedProblem::new(objective, None, LinearMap::new(stacked)?, self.rhs.clone(), sigma)?
            .with_block(BlockSplit {
                u_dim: p,
                v_dim: q,
                sigma_f: self.sigma_f,
                sigma_g: self.sigma_g,
            })
    }

    /// Exchanges the roles of `(u, f, A)` and `(v, g, B)`.
    pub fn swap_blocks(&self) -> BlockProblem {
        BlockProblem {
            f_term: self.g_term.clone(),
            g_term: self.f_term.clone(),
            a: self.b.clone(),
            b: self.a.clone(),
            rhs: self.rhs.clone(),
            sigma_f: self.sigma_g,
            sigma_g: self.sigma_f,
        }
    }

    /// Same feasible set written as `(-A)u + (-B)v = -b`.
    pub fn negated(&self) -> BlockProblem {
        BlockProblem {
            a: LinearMap(-self.a.matrix()),
            b: LinearMap(-self.b.matrix()),
            rhs: -&self.rhs,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn m(r: usize, c: usize, xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, xs)
    }

    #[test]
    fn flatten_zero_blocks() {
        let bp = BlockProblem::new(
            ObjectiveTerm::zero(1),
            ObjectiveTerm::zero(1),
            LinearMap::new(m(1, 1, &[1.0])).unwrap(),
            LinearMap::new(m(1, 1, &[1.0])).unwrap(),
            v(&[2.0]),
        );
        let p = bp.flatten_block().unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.constraint_map().matrix(), &m(1, 2, &[1.0, 1.0]));
        assert_eq!(p.rhs(), &v(&[2.0]));
        assert_eq!(p.sigma(), 0.0);
    }

    #[test]
    fn flatten_linear_composite_form() {
        let half = |d| ObjectiveTerm::scaled_identity(d, 1.0).unwrap();
        let bp = BlockProblem::new(
            half(1),
            half(1),
            LinearMap::new(m(1, 1, &[1.0])).unwrap(),
            LinearMap::new(m(1, 1, &[-1.0])).unwrap(),
            v(&[0.0]),
        );
        let p = bp.flatten_block().unwrap();
        assert_eq!(p.constraint_map().matrix(), &m(1, 2, &[1.0, -1.0]));
        assert_eq!(p.rhs(), &v(&[0.0]));
    }

    #[test]
    fn flatten_rejects_row_mismatch() {
        let bp = BlockProblem::new(
            ObjectiveTerm::zero(2),
            ObjectiveTerm::zero(1),
            LinearMap::new(DMatrix::zeros(3, 2)).unwrap(),
            LinearMap::new(DMatrix::from_element(3, 2, 1.0)).unwrap(),
            DVector::zeros(3),
        );
        let err = bp.flatten_block().unwrap_err();
        match err {
            FlagError::Dimension { what, .. } => assert!(what.contains("B")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn feasibility_examples() {
        let p = ConstrainedProblem::new(
            ObjectiveTerm::zero(2),
            None,
            LinearMap::new(m(1, 2, &[1.0, 1.0])).unwrap(),
            v(&[2.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(p.feasibility_residual(&v(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(p.feasibility_residual(&v(&[0.0, 0.0])).unwrap(), 2.0);
        assert!(p.feasibility_residual(&v(&[1.0])).is_err());

        let id = ConstrainedProblem::new(
            ObjectiveTerm::zero(2),
            None,
            LinearMap::new(DMatrix::identity(2, 2)).unwrap(),
            v(&[0.0, 0.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(id.feasibility_residual(&v(&[3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn objective_examples() {
        let q = ObjectiveTerm::scaled_identity(2, 1.0).unwrap();
        assert_eq!(q.eval(&v(&[1.0, 1.0])), 1.0);
        let l1 = ObjectiveTerm::l1(2, 1.0).unwrap();
        assert_eq!(l1.eval(&v(&[-2.0, 3.0])), 5.0);
        let bx = ObjectiveTerm::box_indicator(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        assert_eq!(bx.eval(&v(&[2.0, 0.0])), f64::INFINITY);
        assert_eq!(bx.eval(&v(&[0.5, 1.0])), 0.0);
    }

    #[test]
    fn strong_convexity_declaration_is_validated() {
        let h = m(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let t = ObjectiveTerm::quadratic(h.clone(), DVector::zeros(2), 0.0).unwrap();
        assert!(t.clone().with_strong_convexity(1.0).is_ok());
        assert!(t.with_strong_convexity(1.5).is_err());
        assert!(ObjectiveTerm::l1(2, 1.0).unwrap().with_strong_convexity(0.1).is_err());
    }

    #[test]
    fn rejects_asymmetric_or_indefinite_quadratics() {
        let asym = m(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(ObjectiveTerm::quadratic(asym, DVector::zeros(2), 0.0).is_err());
        let indef = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(ObjectiveTerm::quadratic(indef, DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn sigma_must_match_declaration() {
        let q = ObjectiveTerm::scaled_identity(1, 1.0).unwrap();
        let a = LinearMap::new(m(1, 1, &[1.0])).unwrap();
        assert!(ConstrainedProblem::new(q.clone(), None, a.clone(), v(&[1.0]), 1.0).is_ok());
        assert!(ConstrainedProblem::new(q, None, a, v(&[1.0]), 2.0).is_err());
    }

    #[test]
    fn flat_form_matches_tree_evaluation() {
        let quad = ObjectiveTerm::quadratic(m(2, 2, &[2.0, 1.0, 1.0, 2.0]), v(&[1.0, -1.0]), 0.5)
            .unwrap();
        let t = ObjectiveTerm::stacked(vec![
            quad,
            ObjectiveTerm::sum(vec![
                ObjectiveTerm::l1(1, 0.3).unwrap(),
                ObjectiveTerm::box_indicator(v(&[-1.0]), v(&[2.0])).unwrap(),
            ])
            .unwrap(),
        ])
        .unwrap();
        let flat = t.flatten();
        for x in [v(&[0.3, -0.7, 1.5]), v(&[1.0, 2.0, -0.5]), v(&[0.0, 0.0, 3.0])] {
            let a = t.eval(&x);
            let b = flat.eval(&x);
            assert!(a == b || (a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn block_roundtrip_through_flattening() {
        let bp = BlockProblem::new(
            ObjectiveTerm::l1(2, 0.5).unwrap(),
            ObjectiveTerm::scaled_identity(1, 2.0).unwrap(),
            LinearMap::new(m(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap(),
            LinearMap::new(m(2, 1, &[1.0, -1.0])).unwrap(),
            v(&[1.0, 0.0]),
        );
        let flat = bp.flatten_block().unwrap();
        assert_eq!(flat.sigma(), 0.0);
        let back = flat.as_block().unwrap();
        assert_eq!(back.a, bp.a);
        assert_eq!(back.b, bp.b);
        assert_eq!(back.sigma_g, 2.0);
        let x = v(&[0.5, -1.0, 0.25]);
        let u = x.rows(0, 2).into_owned();
        let vv = x.rows(2, 1).into_owned();
        assert_eq!(flat.eval_objective(&x), bp.f_term.eval(&u) + bp.g_term.eval(&vv));
    }

    #[test]
    fn stationarity_of_single_coordinates() {
        // interior l1 point: needs g = -w·sign(x)
        assert_eq!(coordinate_stationarity(1.0, -0.5, 0.5, f64::NEG_INFINITY, f64::INFINITY), 0.0);
        // zero with |g| <= w
        assert_eq!(coordinate_stationarity(0.0, 0.3, 0.5, f64::NEG_INFINITY, f64::INFINITY), 0.0);
        assert!((coordinate_stationarity(0.0, 0.8, 0.5, f64::NEG_INFINITY, f64::INFINITY) - 0.3).abs() < 1e-15);
        // at lower bound, positive gradient is fine
        assert_eq!(coordinate_stationarity(0.0, 2.0, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(coordinate_stationarity(0.0, -2.0, 0.0, 0.0, 1.0), 2.0);
        assert_eq!(coordinate_stationarity(3.0, 0.0, 0.0, 0.0, 1.0), f64::INFINITY);
    }
}
