//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices; problems are desk-scale so exact
//! symmetric eigendecompositions are affordable wherever a spectral quantity is needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FlagError, Result};

/// Absolute tolerance for symmetry and PSD checks.
pub const SYM_TOL: f64 = 1e-10;

/// Effective Hessians with a smaller eigenvalue are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

pub fn symmetry_residual(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// `λmax(AᵀA)`, the squared spectral norm of `a`.
pub fn gram_lambda_max(a: &DMatrix<f64>) -> f64 {
    lambda_max(&(a.transpose() * a))
}

/// `vᵀ P v`.
pub fn quad_form(p: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(p * v))
}

/// Solves `K x = rhs` for symmetric positive definite `K`.
///
/// Cholesky first; if that breaks down the smallest eigenvalue decides between reporting a
/// degenerate system and solving through the eigendecomposition.
pub fn solve_spd(k: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if k.nrows() != rhs.len() {
        return Err(FlagError::dim("linear system rhs", k.nrows(), rhs.len()));
    }
    if k.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let sym = symmetrize(k);
    if let Some(chol) = sym.clone().cholesky() {
        let l = chol.l();
        let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v * v));
        if min_pivot > SINGULAR_TOL {
            let mut x = chol.solve(rhs);
            // one step of iterative refinement
            let r = rhs - &sym * &x;
            x += chol.solve(&r);
            return Ok(x);
        }
    }
    let eig = SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < SINGULAR_TOL {
        return Err(FlagError::DegenerateSubproblem { min_eig });
    }
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / l),
    );
    Ok(&eig.eigenvectors * scaled)
}

/// Orthonormal basis of `null(a)` as columns (possibly zero columns).
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    // eigen-decomposition of AᵀA keeps the full set of right singular vectors
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(symmetrize(&gram));
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm solution of `a x = b` (least squares if inconsistent).
pub fn min_norm_solution(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| FlagError::Numerical(format!("pseudo-inverse solve failed: {e}")))
}

pub fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)].abs() > tol {
                return false;
            }
        }
    }
    true
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(a);
    out.view_mut((p, p), (q, q)).copy_from(b);
    out
}

pub fn concat(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len() + v.len());
    out.rows_mut(0, u.len()).copy_from(u);
    out.rows_mut(u.len(), v.len()).copy_from(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_matches_direct() {
        let k = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_spd(&k, &rhs).unwrap();
        assert!((&k * &x - &rhs).norm() < 1e-14);
    }

    #[test]
    fn singular_system_is_reported() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            solve_spd(&k, &rhs),
            Err(FlagError::DegenerateSubproblem { .. })
        ));
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let ns = null_space(&a);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
