//! Lagrangian, augmented Lagrangian and the `Δ_P` three-point quantity.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::problem::ConstrainedProblem;

/// `𝓛(x, y) = Ψ(x) + ⟨y, 𝒜x − b⟩`; `+∞` when `Ψ(x) = +∞`.
pub fn eval_lagrangian(p: &ConstrainedProblem, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eval_aug_lagrangian(p, x, y, 0.0)
}

/// `𝓛_ρ(x, y) = 𝓛(x, y) + (ρ/2)‖𝒜x − b‖²`.
pub fn eval_aug_lagrangian(
    p: &ConstrainedProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    rho: f64,
) -> f64 {
    debug_assert!(rho >= 0.0);
    let psi = p.eval_objective(x);
    if !psi.is_finite() {
        return psi;
    }
    let r = p.constraint_residual(x);
    let mut val = psi + y.dot(&r);
    if rho != 0.0 {
        val += 0.5 * rho * r.norm_squared();
    }
    val
}

/// `Δ_P(u, v, w) = ½(‖u − v‖²_P − ‖u − w‖²_P)`, evaluated from the two quadratic forms.
pub fn delta_p(p: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let a = u - v;
    let b = u - w;
    0.5 * (linalg::quad_form(p, &a) - linalg::quad_form(p, &b))
}

/// `Δ_I(u, v, w) = ½(‖u − v‖² − ‖u − w‖²)`.
pub fn delta_identity(u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    0.5 * ((u - v).norm_squared() - (u - w).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearMap, ObjectiveTerm};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn qp_1d() -> ConstrainedProblem {
        ConstrainedProblem::new(
            ObjectiveTerm::scaled_identity(1, 1.0).unwrap(),
            None,
            LinearMap::new(DMatrix::from_element(1, 1, 1.0)).unwrap(),
            v(&[1.0]),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let p = qp_1d();
        assert_eq!(eval_lagrangian(&p, &v(&[1.0]), &v(&[7.0])), 0.5);
        assert_eq!(eval_lagrangian(&p, &v(&[0.0]), &v(&[1.0])), -1.0);

        let boxed = ConstrainedProblem::new(
            ObjectiveTerm::box_indicator(v(&[0.0]), v(&[1.0])).unwrap(),
            None,
            LinearMap::new(DMatrix::from_element(1, 1, 1.0)).unwrap(),
            v(&[0.5]),
            0.0,
        )
        .unwrap();
        assert_eq!(eval_lagrangian(&boxed, &v(&[3.0]), &v(&[-1.0])), f64::INFINITY);
    }

    #[test]
    fn augmented_lagrangian_examples() {
        let zero = ConstrainedProblem::new(
            ObjectiveTerm::zero(1),
            None,
            LinearMap::new(DMatrix::from_element(1, 1, 1.0)).unwrap(),
            v(&[0.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(eval_aug_lagrangian(&zero, &v(&[2.0]), &v(&[0.0]), 1.0), 2.0);

        let p = qp_1d();
        assert_eq!(eval_aug_lagrangian(&p, &v(&[1.0]), &v(&[3.0]), 10.0), 0.5);
    }

    #[test]
    fn delta_examples() {
        let p = DMatrix::identity(1, 1);
        assert_eq!(delta_p(&p, &v(&[0.0]), &v(&[2.0]), &v(&[1.0])), 1.5);
        assert_eq!(delta_p(&p, &v(&[0.3]), &v(&[2.0]), &v(&[2.0])), 0.0);
        let z = DMatrix::zeros(2, 2);
        assert_eq!(delta_p(&z, &v(&[1.0, 2.0]), &v(&[3.0, -1.0]), &v(&[0.0, 5.0])), 0.0);
    }
}
