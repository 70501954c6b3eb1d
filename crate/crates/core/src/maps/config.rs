use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{FlagError, Result};
use crate::linalg;
use crate::problem::ConstrainedProblem;
use crate::prox::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    ProxAl,
    ProxLinAl,
    ProxAdmm,
    ProxLinAdmm,
    ChambollePock,
    ProxJacobi,
    Pcpm,
    SmoothProxAl,
    SmoothLinAl,
    FullLinAdmm,
}

impl MapKind {
    pub const ALL: [MapKind; 10] = [
        MapKind::ProxAl,
        MapKind::ProxLinAl,
        MapKind::ProxAdmm,
        MapKind::ProxLinAdmm,
        MapKind::ChambollePock,
        MapKind::ProxJacobi,
        MapKind::Pcpm,
        MapKind::SmoothProxAl,
        MapKind::SmoothLinAl,
        MapKind::FullLinAdmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::ProxAl => "prox-al",
            MapKind::ProxLinAl => "prox-lin-al",
            MapKind::ProxAdmm => "prox-admm",
            MapKind::ProxLinAdmm => "prox-lin-admm",
            MapKind::ChambollePock => "chambolle-pock",
            MapKind::ProxJacobi => "prox-jacobi",
            MapKind::Pcpm => "pcpm",
            MapKind::SmoothProxAl => "smooth-prox-al",
            MapKind::SmoothLinAl => "smooth-lin-al",
            MapKind::FullLinAdmm => "full-lin-admm",
        }
    }

    /// Maps that work on the `(u, v)` split of a block problem.
    pub fn is_block(self) -> bool {
        matches!(
            self,
            MapKind::ProxAdmm
                | MapKind::ProxLinAdmm
                | MapKind::ChambollePock
                | MapKind::ProxJacobi
                | MapKind::Pcpm
                | MapKind::FullLinAdmm
        )
    }

    /// Maps that take a gradient step on the smooth part `h`.
    pub fn is_smooth(self) -> bool {
        matches!(self, MapKind::SmoothProxAl | MapKind::SmoothLinAl)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for MapKind {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        MapKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MapKind::ALL.iter().map(|k| k.name()).collect();
                FlagError::Config(format!("unknown map kind '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// A map kind with its proximal weights.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimalMap {
    ProxAl { m: WeightMatrix },
    ProxLinAl { m: WeightMatrix },
    ProxAdmm { m1: WeightMatrix, m2: WeightMatrix },
    ProxLinAdmm { m1: WeightMatrix, m2: WeightMatrix },
    ChambollePock { alpha: f64 },
    ProxJacobi { m1: WeightMatrix, m2: WeightMatrix },
    Pcpm { m1: WeightMatrix, m2: WeightMatrix },
    SmoothProxAl { m: WeightMatrix },
    SmoothLinAl { m: WeightMatrix },
    /// Both blocks linearized; certified the same way as
    /// the partially linearized variant.
    FullLinAdmm { m1: WeightMatrix, m2: WeightMatrix },
}

impl PrimalMap {
    pub fn kind(&self) -> MapKind {
        match self {
            PrimalMap::ProxAl { .. } => MapKind::ProxAl,
            PrimalMap::ProxLinAl { .. } => MapKind::ProxLinAl,
            PrimalMap::ProxAdmm { .. } => MapKind::ProxAdmm,
            PrimalMap::ProxLinAdmm { .. } => MapKind::ProxLinAdmm,
            PrimalMap::ChambollePock { .. } => MapKind::ChambollePock,
            PrimalMap::ProxJacobi { .. } => MapKind::ProxJacobi,
            PrimalMap::Pcpm { .. } => MapKind::Pcpm,
            PrimalMap::SmoothProxAl { .. } => MapKind::SmoothProxAl,
            PrimalMap::SmoothLinAl { .. } => MapKind::SmoothLinAl,
            PrimalMap::FullLinAdmm { .. } => MapKind::FullLinAdmm,
        }
    }

    /// `(M₁, M₂)` for two-block maps other than Chambolle-Pock.
    pub(crate) fn block_weights(&self) -> Option<(&WeightMatrix, &WeightMatrix)> {
        match self {
            PrimalMap::ProxAdmm { m1, m2 }
            | PrimalMap::ProxLinAdmm { m1, m2 }
            | PrimalMap::ProxJacobi { m1, m2 }
            | PrimalMap::Pcpm { m1, m2 }
            | PrimalMap::FullLinAdmm { m1, m2 } => Some((m1, m2)),
            _ => None,
        }
    }

    pub(crate) fn single_weight(&self) -> Option<&WeightMatrix> {
        match self {
            PrimalMap::ProxAl { m }
            | PrimalMap::ProxLinAl { m }
            | PrimalMap::SmoothProxAl { m }
            | PrimalMap::SmoothLinAl { m } => Some(m),
            _ => None,
        }
    }
}

/// A primal map together with its base penalty `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub map: PrimalMap,
    pub rho: f64,
}

/// How proximal weights are chosen when they are not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixPolicy {
    /// The smallest multiple of the identity meeting the map's condition, plus `margin`.
    Auto { margin: f64 },
    /// `scale · I` for every weight (`α = 1/scale` for Chambolle-Pock).
    Identity { scale: f64 },
    /// `ρ·GᵀG + shift·I` where `G` is the relevant constraint block.
    ShiftedGram { shift: f64 },
}

impl Default for MatrixPolicy {
    fn default() -> Self {
        MatrixPolicy::Auto { margin: 1.0 }
    }
}

impl FromStr for MatrixPolicy {
    type Err = FlagError;

    /// `auto`, `auto:<margin>`, `identity:<scale>` or `gram:<shift>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match (a, default) {
                (Some(a), _) => a
                    .parse::<f64>()
                    .map_err(|_| FlagError::Config(format!("bad number '{a}' in matrix policy"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(FlagError::Config(format!("matrix policy '{name}' needs a value"))),
            }
        };
        match name {
            "auto" => Ok(MatrixPolicy::Auto { margin: num(arg, Some(1.0))? }),
            "identity" => Ok(MatrixPolicy::Identity { scale: num(arg, None)? }),
            "gram" => Ok(MatrixPolicy::ShiftedGram { shift: num(arg, None)? }),
            _ => Err(FlagError::Config(format!(
                "unknown matrix policy '{s}' (expected auto[:m], identity:s or gram:s)"
            ))),
        }
    }
}

impl fmt::Display for MatrixPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixPolicy::Auto { margin } => write!(f, "auto:{margin}"),
            MatrixPolicy::Identity { scale } => write!(f, "identity:{scale}"),
            MatrixPolicy::ShiftedGram { shift } => write!(f, "gram:{shift}"),
        }
    }
}

impl MapConfig {
    /// Builds the proximal weights of `kind` for `prob` according to `policy`.
    pub fn from_policy(
        kind: MapKind,
        rho: f64,
        policy: MatrixPolicy,
        prob: &ConstrainedProblem,
    ) -> Result<MapConfig> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(FlagError::Config(format!("rho must be positive, got {rho}")));
        }
        let a_full = prob.constraint_map().matrix();
        let lip = prob.smooth().map_or(0.0, |h| h.lipschitz_grad);
        let scaled = |n: usize, s: f64| WeightMatrix::scaled_identity(n, s);
        let gram_shift = |g: &DMatrix<f64>, s: f64| -> Result<WeightMatrix> {
            let n = g.ncols();
            WeightMatrix::new(linalg::symmetrize(&(g.tr_mul(g) * rho + DMatrix::identity(n, n) * s)))
        };

        if kind.is_block() {
            let split = prob.block().ok_or_else(|| {
                FlagError::Config(format!("{kind} needs a two-block problem"))
            })?;
            let (p, q) = (split.u_dim, split.v_dim);
            let a = a_full.columns(0, p).into_owned();
            let b = a_full.columns(p, q).into_owned();
            let beta_a = linalg::gram_lambda_max(&a);
            let beta_b = linalg::gram_lambda_max(&b);
            if kind == MapKind::ChambollePock {
                let alpha = match policy {
                    MatrixPolicy::Auto { margin } => 1.0 / (rho * beta_b + margin),
                    MatrixPolicy::Identity { scale } => 1.0 / scale,
                    MatrixPolicy::ShiftedGram { shift } => 1.0 / (rho * beta_b + shift),
                };
                return Ok(MapConfig {
                    map: PrimalMap::ChambollePock { alpha },
                    rho,
                });
            }
            let (m1, m2) = match policy {
                MatrixPolicy::Auto { margin } => match kind {
                    MapKind::ProxAdmm | MapKind::ProxLinAdmm => {
                        (scaled(p, margin)?, scaled(q, rho * beta_b + margin)?)
                    }
                    MapKind::ProxJacobi => {
                        (scaled(p, rho * beta_a + margin)?, scaled(q, rho * beta_b + margin)?)
                    }
                    MapKind::Pcpm => (
                        scaled(p, 2.0 * rho * beta_a + margin)?,
                        scaled(q, 2.0 * rho * beta_b + margin)?,
                    ),
                    MapKind::FullLinAdmm => {
                        (scaled(p, rho * beta_a + margin)?, scaled(q, rho * beta_b + margin)?)
                    }
                    _ => unreachable!(),
                },
                MatrixPolicy::Identity { scale } => (scaled(p, scale)?, scaled(q, scale)?),
                MatrixPolicy::ShiftedGram { shift } => (gram_shift(&a, shift)?, gram_shift(&b, shift)?),
            };
            let map = match kind {
                MapKind::ProxAdmm => PrimalMap::ProxAdmm { m1, m2 },
                MapKind::ProxLinAdmm => PrimalMap::ProxLinAdmm { m1, m2 },
                MapKind::ProxJacobi => PrimalMap::ProxJacobi { m1, m2 },
                MapKind::Pcpm => PrimalMap::Pcpm { m1, m2 },
                MapKind::FullLinAdmm => PrimalMap::FullLinAdmm { m1, m2 },
                _ => unreachable!(),
            };
            return Ok(MapConfig { map, rho });
        }

        let n = prob.n();
        let beta = linalg::gram_lambda_max(a_full);
        let m = match policy {
            MatrixPolicy::Auto { margin } => match kind {
                MapKind::ProxAl => scaled(n, margin)?,
                MapKind::ProxLinAl => scaled(n, rho * beta + margin)?,
                MapKind::SmoothProxAl => scaled(n, lip + margin)?,
                MapKind::SmoothLinAl => scaled(n, rho * beta + lip + margin)?,
                _ => unreachable!(),
            },
            MatrixPolicy::Identity { scale } => scaled(n, scale)?,
            MatrixPolicy::ShiftedGram { shift } => gram_shift(a_full, shift)?,
        };
        let map = match kind {
            MapKind::ProxAl => PrimalMap::ProxAl { m },
            MapKind::ProxLinAl => PrimalMap::ProxLinAl { m },
            MapKind::SmoothProxAl => PrimalMap::SmoothProxAl { m },
            MapKind::SmoothLinAl => PrimalMap::SmoothLinAl { m },
            _ => unreachable!(),
        };
        Ok(MapConfig { map, rho })
    }

    pub fn kind(&self) -> MapKind {
        self.map.kind()
    }
}
