//! Nice primal algorithmic maps.
//!
//! A map turns `(z, λ)` into `z⁺` for the augmented Lagrangian `𝓛_{ρ_t}` with proximal
//! weight `τ_t`. Each kind carries a certificate `(δ, P, Q)` together with the spectral
//! conditions it relies on, and the descent inequality it promises can be checked
//! numerically with [`nice_residual`] or the sampling suite in [`sampling`].

mod certificate;
mod config;
mod residual;
pub mod sampling;
mod step;

pub use certificate::{certificate, CertificateForm, Condition, NiceCertificate};
pub use config::{MapConfig, MapKind, MatrixPolicy, PrimalMap};
pub use residual::{nice_residual, nice_residual_with, NiceResidual};
pub use step::{prim_step, MapInstance};

/// Penalty and proximal scaling used by a single primal step.
///
/// `p = 1`: `ρ_t = ρ`, `τ_t = 1`; `p = 2`: `ρ_t = ρt`, `τ_t = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub rho_t: f64,
    pub tau_t: f64,
    pub p: u8,
}

impl Schedule {
    pub fn new(rho: f64, t: f64, p: u8) -> Self {
        debug_assert!(p == 1 || p == 2);
        let tau_t = if p == 2 { t } else { 1.0 };
        Schedule {
            rho_t: rho * tau_t,
            tau_t,
            p,
        }
    }

    pub fn classic(rho: f64) -> Self {
        Schedule::new(rho, 1.0, 1)
    }
}

/// `p = 2` exactly when the map works with a positive strong-convexity modulus.
pub fn regime(sigma: f64) -> u8 {
    if sigma > 0.0 {
        2
    } else {
        1
    }
}
