#![allow(dead_code)]

use flagopt::generate::{generate, Family, GenSpec};
use flagopt::maps::MapKind;
use flagopt::problem::{BlockProblem, ConstrainedProblem, LinearMap, ObjectiveTerm, SmoothTerm};
use flagopt::random;
use nalgebra::{DMatrix, DVector};

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// min ½x² s.t. x = 1.
pub fn qp_1d() -> ConstrainedProblem {
    ConstrainedProblem::new(
        ObjectiveTerm::scaled_identity(1, 1.0).unwrap(),
        None,
        LinearMap::from_rows(&[vec![1.0]]).unwrap(),
        v(&[1.0]),
        1.0,
    )
    .unwrap()
}

pub fn gen(family: Family, n: usize, m: usize, sigma: f64, seed: u64) -> ConstrainedProblem {
    generate(&GenSpec::new(family, n, m, sigma, seed)).unwrap()
}

/// `f(u) + g(v)` subject to `u + Bv = b`, the structure the Chambolle-Pock map needs.
/// `f` is a convex quadratic, `g` is `w‖v‖₁` (plus `σ/2‖v‖²` when `sigma > 0`).
pub fn identity_coupled(m: usize, q: usize, sigma: f64, seed: u64) -> ConstrainedProblem {
    let mut rng = random::seeded(seed ^ 0x5eed);
    let d = random::normal_mat(&mut rng, m, m);
    let hf = (d.transpose() * &d) * (1.0 / m as f64);
    let f = ObjectiveTerm::quadratic(hf, random::normal_vec(&mut rng, m), 0.0).unwrap();
    let l1 = ObjectiveTerm::l1(q, 0.5).unwrap();
    let g = if sigma > 0.0 {
        ObjectiveTerm::sum(vec![ObjectiveTerm::scaled_identity(q, sigma).unwrap(), l1]).unwrap()
    } else {
        l1
    };
    let b = random::normal_mat(&mut rng, m, q);
    let rhs = random::normal_vec(&mut rng, m);
    BlockProblem::new(
        f,
        g,
        LinearMap::new(DMatrix::identity(m, m)).unwrap(),
        LinearMap::new(b).unwrap(),
        rhs,
    )
    .flatten_block()
    .unwrap()
}

/// Quadratic `f = σ/2‖x‖²` plus a smooth quadratic `h`; works with both smooth maps.
pub fn smooth_quadratic(n: usize, m: usize, sigma: f64, seed: u64) -> ConstrainedProblem {
    let mut rng = random::seeded(seed ^ 0xabc);
    let d = random::normal_mat(&mut rng, n, n);
    let hh = (d.transpose() * &d) * (1.0 / n as f64);
    let lip = flagopt::linalg::lambda_max(&hh);
    let h = SmoothTerm::new(flagopt::linalg::symmetrize(&hh), random::normal_vec(&mut rng, n), 0.0, lip).unwrap();
    let f = if sigma > 0.0 {
        ObjectiveTerm::scaled_identity(n, sigma).unwrap()
    } else {
        ObjectiveTerm::zero(n)
    };
    let a = random::normal_mat(&mut rng, m, n);
    let x = random::normal_vec(&mut rng, n);
    let b = &a * &x;
    ConstrainedProblem::new(f, Some(h), LinearMap::new(a).unwrap(), b, sigma)
        .unwrap()
        .with_feasible_point(x)
        .unwrap()
}

/// Five problems each map kind is certified on.
pub fn problems_for(kind: MapKind) -> Vec<ConstrainedProblem> {
    let s = |i: u64| if i % 2 == 0 { 1.0 } else { 0.0 };
    (0..5u64)
        .map(|i| match kind {
            MapKind::ProxAl => gen(Family::EqQp, 8, 3, s(i), i),
            MapKind::ProxLinAl => {
                if i < 3 {
                    gen(Family::EqQp, 8, 3, s(i), i)
                } else {
                    gen(Family::LassoSplit, 10, 4, 0.0, i)
                }
            }
            MapKind::SmoothProxAl => smooth_quadratic(8, 3, s(i), i),
            MapKind::SmoothLinAl => {
                if i < 3 {
                    gen(Family::SmoothComposite, 8, 3, s(i), i)
                } else {
                    smooth_quadratic(8, 3, s(i), i)
                }
            }
            MapKind::ProxAdmm | MapKind::ProxLinAdmm => {
                if i < 3 {
                    gen(Family::BlockQp, 9, 3, s(i), i)
                } else {
                    gen(Family::LassoSplit, 10, 4, 0.0, i)
                }
            }
            MapKind::ChambollePock => identity_coupled(4, 3 + i as usize, s(i), i),
            MapKind::ProxJacobi | MapKind::Pcpm | MapKind::FullLinAdmm => {
                if i < 3 {
                    gen(Family::BlockQp, 9, 3, 0.0, i)
                } else {
                    gen(Family::LassoSplit, 10, 4, 0.0, i)
                }
            }
        })
        .collect()
}
