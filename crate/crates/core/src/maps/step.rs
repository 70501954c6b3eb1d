use nalgebra::{DMatrix, DVector};

use super::certificate::{certificate, NiceCertificate};
use super::config::{MapConfig, MapKind, PrimalMap};
use super::Schedule;
use crate::error::{FlagError, Result};
use crate::linalg;
use crate::problem::{ConstrainedProblem, FlatObjective, SmoothTerm};
use crate::prox;

struct BlockData {
    p: usize,
    q: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    ga: DMatrix<f64>,
    gb: DMatrix<f64>,
    flat_u: FlatObjective,
    flat_v: FlatObjective,
}

/// Problem data a map needs, precomputed once.
struct MapData {
    a: DMatrix<f64>,
    rhs: DVector<f64>,
    gram: DMatrix<f64>,
    /// `Ψ` in normal form, or `f` alone for the smooth maps.
    flat: FlatObjective,
    smooth: Option<SmoothTerm>,
    block: Option<BlockData>,
}

impl MapData {
    fn new(kind: MapKind, prob: &ConstrainedProblem) -> Result<Self> {
        let a = prob.constraint_map().matrix().clone();
        let gram = linalg::symmetrize(&a.tr_mul(&a));
        let flat = if kind.is_smooth() {
            prob.flat_objective().clone()
        } else {
            prob.flat_psi()
        };
        let block = if kind.is_block() {
            let split = prob
                .block()
                .ok_or_else(|| FlagError::Config(format!("{kind} needs a two-block problem")))?;
            let (p, q) = (split.u_dim, split.v_dim);
            let am = a.columns(0, p).into_owned();
            let bm = a.columns(p, q).into_owned();
            Some(BlockData {
                p,
                q,
                ga: linalg::symmetrize(&am.tr_mul(&am)),
                gb: linalg::symmetrize(&bm.tr_mul(&bm)),
                a: am,
                b: bm,
                flat_u: flat.restrict(0..p),
                flat_v: flat.restrict(p..p + q),
            })
        } else {
            None
        };
        Ok(MapData {
            a,
            rhs: prob.rhs().clone(),
            gram,
            flat,
            smooth: prob.smooth().cloned(),
            block,
        })
    }

    fn blocks(&self) -> &BlockData {
        self.block.as_ref().expect("block data present for block maps")
    }

    /// Subproblem Hessian contributions `K` (without the objective's own `H`).
    fn hessians(&self, map: &PrimalMap, s: &Schedule) -> Vec<DMatrix<f64>> {
        let (rt, tt) = (s.rho_t, s.tau_t);
        match map {
            PrimalMap::ProxAl { m } | PrimalMap::SmoothProxAl { m } => {
                vec![&self.gram * rt + m.matrix() * tt]
            }
            PrimalMap::ProxLinAl { m } | PrimalMap::SmoothLinAl { m } => vec![m.matrix() * tt],
            PrimalMap::ProxAdmm { m1, m2 } => {
                let bd = self.blocks();
                vec![&bd.ga * rt + m1.matrix(), &bd.gb * rt + m2.matrix() * tt]
            }
            PrimalMap::ProxLinAdmm { m1, m2 } => {
                let bd = self.blocks();
                vec![&bd.ga * rt + m1.matrix(), m2.matrix() * tt]
            }
            PrimalMap::ChambollePock { alpha } => {
                let bd = self.blocks();
                vec![
                    DMatrix::identity(bd.p, bd.p) * rt,
                    DMatrix::identity(bd.q, bd.q) * (tt / alpha),
                ]
            }
            PrimalMap::ProxJacobi { m1, m2 } => {
                let bd = self.blocks();
                vec![&bd.ga * rt + m1.matrix() * tt, &bd.gb * rt + m2.matrix() * tt]
            }
            PrimalMap::Pcpm { m1, m2 } | PrimalMap::FullLinAdmm { m1, m2 } => {
                vec![m1.matrix() * tt, m2.matrix() * tt]
            }
        }
    }

    fn flats(&self) -> Vec<&FlatObjective> {
        match &self.block {
            Some(bd) => vec![&bd.flat_u, &bd.flat_v],
            None => vec![&self.flat],
        }
    }

    fn step(
        &self,
        map: &PrimalMap,
        s: &Schedule,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let ks = self.hessians(map, s);
        let (rt, tt) = (s.rho_t, s.tau_t);
        let b = &self.rhs;
        match map {
            PrimalMap::ProxAl { m } | PrimalMap::SmoothProxAl { m } => {
                // 𝒜ᵀλ − ρ_t𝒜ᵀb − τ_t M z (+ ∇h(z))
                let mut g = self.a.tr_mul(&(lambda - b * rt)) - m.matrix() * z * tt;
                if let (PrimalMap::SmoothProxAl { .. }, Some(h)) = (map, &self.smooth) {
                    g += h.gradient(z);
                }
                prox::minimize_flat(&self.flat, &g, &ks[0])
            }
            PrimalMap::ProxLinAl { m } | PrimalMap::SmoothLinAl { m } => {
                let r = &self.a * z - b;
                let mut g = self.a.tr_mul(&(lambda + r * rt)) - m.matrix() * z * tt;
                if let (PrimalMap::SmoothLinAl { .. }, Some(h)) = (map, &self.smooth) {
                    g += h.gradient(z);
                }
                prox::minimize_flat(&self.flat, &g, &ks[0])
            }
            PrimalMap::ChambollePock { alpha } => {
                let bd = self.blocks();
                let (_, v) = split(z, bd.p);
                // A = I, M₁ = 0
                let bv = &bd.b * &v;
                let g1 = lambda + (&bv - b) * rt;
                let u_new = prox::minimize_flat(&bd.flat_u, &g1, &ks[0])?;
                let w = &u_new + &bv - b;
                let g2 = bd.b.tr_mul(&(lambda + w * rt)) - &v * (tt / alpha);
                let v_new = prox::minimize_flat(&bd.flat_v, &g2, &ks[1])?;
                Ok(linalg::concat(&u_new, &v_new))
            }
            _ => {
                let (m1, m2) = map.block_weights().expect("two-block weights");
                let bd = self.blocks();
                let (u, v) = split(z, bd.p);
                let au = &bd.a * &u;
                let bv = &bd.b * &v;
                let r = &au + &bv - b;
                let m1u = m1.matrix() * &u;
                let m2v = m2.matrix() * &v;
                let kind = map.kind();

                let g1 = match kind {
                    MapKind::ProxAdmm | MapKind::ProxLinAdmm => {
                        bd.a.tr_mul(&(lambda + (&bv - b) * rt)) - &m1u
                    }
                    MapKind::ProxJacobi => bd.a.tr_mul(&(lambda + (&bv - b) * rt)) - &m1u * tt,
                    MapKind::Pcpm | MapKind::FullLinAdmm => {
                        bd.a.tr_mul(&(lambda + &r * rt)) - &m1u * tt
                    }
                    _ => unreachable!(),
                };
                let u_new = prox::minimize_flat(&bd.flat_u, &g1, &ks[0])?;

                let g2 = match kind {
                    MapKind::ProxAdmm => {
                        let au_new = &bd.a * &u_new;
                        bd.b.tr_mul(&(lambda + (au_new - b) * rt)) - &m2v * tt
                    }
                    MapKind::ProxLinAdmm | MapKind::FullLinAdmm => {
                        let w = &bd.a * &u_new + &bv - b;
                        bd.b.tr_mul(&(lambda + w * rt)) - &m2v * tt
                    }
                    MapKind::ProxJacobi => bd.b.tr_mul(&(lambda + (&au - b) * rt)) - &m2v * tt,
                    MapKind::Pcpm => bd.b.tr_mul(&(lambda + &r * rt)) - &m2v * tt,
                    _ => unreachable!(),
                };
                let v_new = prox::minimize_flat(&bd.flat_v, &g2, &ks[1])?;
                debug_assert_eq!(v_new.len(), bd.q);
                Ok(linalg::concat(&u_new, &v_new))
            }
        }
    }
}

fn split(z: &DVector<f64>, p: usize) -> (DVector<f64>, DVector<f64>) {
    (z.rows(0, p).into_owned(), z.rows(p, z.len() - p).into_owned())
}

/// Smallest eigenvalue of each subproblem's effective Hessian at `t = 1`.
///
/// Fails if an l1/box coordinate is coupled to another one, since no closed form applies.
pub(crate) fn subproblem_min_eigs(cfg: &MapConfig, prob: &ConstrainedProblem) -> Result<Vec<f64>> {
    let data = MapData::new(cfg.kind(), prob)?;
    let sched = Schedule::classic(cfg.rho);
    let ks = data.hessians(&cfg.map, &sched);
    let mut out = Vec::with_capacity(ks.len());
    for (flat, k) in data.flats().into_iter().zip(ks.iter()) {
        prox::check_separable(flat, k)?;
        let keff = &flat.h + k;
        let n = flat.dim();
        let smooth: Vec<usize> = (0..n).filter(|&i| !flat.is_nonsmooth(i)).collect();
        let mut min_eig = f64::INFINITY;
        if !smooth.is_empty() {
            let ks = DMatrix::from_fn(smooth.len(), smooth.len(), |a, b| keff[(smooth[a], smooth[b])]);
            min_eig = linalg::lambda_min(&ks);
        }
        for i in (0..n).filter(|&i| flat.is_nonsmooth(i)) {
            min_eig = min_eig.min(keff[(i, i)]);
        }
        out.push(min_eig);
    }
    Ok(out)
}

/// A certified map bound to a problem, ready to take steps.
pub struct MapInstance {
    cfg: MapConfig,
    cert: NiceCertificate,
    data: MapData,
}

impl MapInstance {
    pub fn new(cfg: MapConfig, prob: &ConstrainedProblem) -> Result<Self> {
        let cert = certificate(&cfg, prob)?;
        let data = MapData::new(cfg.kind(), prob)?;
        Ok(MapInstance { cfg, cert, data })
    }

    pub fn config(&self) -> &MapConfig {
        &self.cfg
    }

    pub fn certificate(&self) -> &NiceCertificate {
        &self.cert
    }

    pub fn kind(&self) -> MapKind {
        self.cfg.kind()
    }

    /// `z⁺ = Prim_t(z, λ)`.
    pub fn step(&self, sched: &Schedule, z: &DVector<f64>, lambda: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.data.a.ncols();
        if z.len() != n {
            return Err(FlagError::dim("primal point", n, z.len()));
        }
        if lambda.len() != self.data.a.nrows() {
            return Err(FlagError::dim("multiplier", self.data.a.nrows(), lambda.len()));
        }
        self.data.step(&self.cfg.map, sched, z, lambda)
    }
}

/// One primal step; certifies the map first. Prefer [`MapInstance`] inside loops.
pub fn prim_step(
    cfg: &MapConfig,
    sched: &Schedule,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    prob: &ConstrainedProblem,
) -> Result<DVector<f64>> {
    MapInstance::new(cfg.clone(), prob)?.step(sched, z, lambda)
}
