//! Peaking kernels `S_{z,p}(w) = |rho(z)|^{(n+1)/p'} / |G(z, w)|^{n+1}` with
//! `G(z, w) = g(z, w)`, the modified Berezin transform and the dyadic Berezin
//! field.
//!
//! `s_z` is always renormalized on the cloud it is integrated against, so
//! constant symbols are reproduced exactly.

use rayon::prelude::*;
use thiserror::Error;

use crate::cvec::{CPoint, C64};
use crate::domain::Domain;
use crate::dyadic::{DyadicSystem, Kube};
use crate::metrics::{levi_g, GVariant};
use crate::oscillation::SymbolEval;
use crate::qmc::derive_seed;
use crate::sampling::{sample_kobayashi_ball, Estimate, EstimateC, SampleCloud, SamplingError};

/// `|G(z, w)|` must stay above this multiple of `|rho(z)|`.
pub const G_FLOOR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BerezinError {
    #[error("|G(z, w)| = {value:e} fell below the floor {floor:e}; the Levi chart radius is miscalibrated")]
    GBelowFloor { value: f64, floor: f64 },
    #[error("exponent p = {0} must lie in (1, inf)")]
    BadExponent(f64),
    #[error("Berezin quadrature standard error {se:e} exceeds 10% of the scale {scale:e}")]
    Noisy { se: f64, scale: f64 },
    #[error("kube ({level}, {index}) has too few points in its Kobayashi ball")]
    StarvedKube { level: u32, index: u32 },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakingKernel {
    pub z: CPoint,
    pub p: f64,
    pub n: usize,
    rho_z: f64,
}

impl PeakingKernel {
    pub fn new(domain: &Domain, z: &CPoint, p: f64) -> Result<PeakingKernel, BerezinError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(BerezinError::BadExponent(p));
        }
        Ok(PeakingKernel { z: *z, p, n: domain.dim(), rho_z: domain.rho(z).abs() })
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn eval(&self, domain: &Domain, w: &CPoint) -> Result<f64, BerezinError> {
        let g = levi_g(domain, &self.z, w, GVariant::Exact).norm();
        let floor = G_FLOOR * self.rho_z;
        if !(g >= floor) {
            return Err(BerezinError::GBelowFloor { value: g, floor });
        }
        let m = (self.n + 1) as f64;
        Ok(self.rho_z.powf(m / self.conjugate()) / g.powf(m))
    }

    pub fn values(&self, domain: &Domain, cloud: &SampleCloud) -> Result<Vec<f64>, BerezinError> {
        cloud.points.par_iter().map(|w| self.eval(domain, w)).collect()
    }

    /// `||S_{z,p}||_{L^p}` with a delta-method standard error.
    pub fn lp_norm(&self, domain: &Domain, cloud: &SampleCloud) -> Result<Estimate, BerezinError> {
        let v: Vec<f64> = self.values(domain, cloud)?.into_iter().map(|s| s.powf(self.p)).collect();
        let i = cloud.integrate_values(&v)?;
        let value = i.value.powf(1.0 / self.p);
        Ok(Estimate { value, se: value * i.se / (self.p * i.value) })
    }
}

/// `S_{z,p}(w)`.
pub fn peaking_eval(domain: &Domain, z: &CPoint, p: f64, w: &CPoint) -> Result<f64, BerezinError> {
    PeakingKernel::new(domain, z, p)?.eval(domain, w)
}

/// `|s_z|^2` on `cloud` (unit `L^2` norm on this cloud) and the raw
/// `||S_{z,2}||_2^2` estimate.
pub fn normalized_kernel_sqr(domain: &Domain, z: &CPoint, cloud: &SampleCloud) -> Result<(Vec<f64>, Estimate), BerezinError> {
    let s = PeakingKernel::new(domain, z, 2.0)?;
    let sq: Vec<f64> = s.values(domain, cloud)?.into_iter().map(|v| v * v).collect();
    let norm = cloud.integrate_values(&sq)?;
    let scale = 1.0 / norm.value;
    Ok((sq.into_iter().map(|v| v * scale).collect(), norm))
}

/// Symbol values at cloud points.
pub fn symbol_values(b: &impl SymbolEval, cloud: &SampleCloud) -> Vec<C64> {
    cloud.points.par_iter().zip(cloud.delta.par_iter()).map(|(w, &d)| b.eval(w, d)).collect()
}

/// `b~(z) = <b s_z, s_z>` from precomputed `|s_z|^2` and symbol values.
pub fn berezin_from(cloud: &SampleCloud, kernel_sqr: &[f64], b: &[C64]) -> Result<EstimateC, BerezinError> {
    let weighted: Vec<C64> = b.iter().zip(kernel_sqr).map(|(v, k)| v * k).collect();
    let raw = cloud.integrate_complex(&weighted)?;
    let mass = cloud.integrate_values(kernel_sqr)?.value;
    let value = raw.value / mass;
    // Ratio estimator: the residual b - b~ carries the noise.
    let resid: Vec<C64> = b.iter().zip(kernel_sqr).map(|(v, k)| (v - value) * k).collect();
    let se = cloud.integrate_complex(&resid)?.se / mass;
    Ok(EstimateC { value, se })
}

/// Modified Berezin transform `b~(z)`.
pub fn modified_berezin(domain: &Domain, b: &impl SymbolEval, z: &CPoint, cloud: &SampleCloud) -> Result<EstimateC, BerezinError> {
    let (k, _) = normalized_kernel_sqr(domain, z, cloud)?;
    let vals = symbol_values(b, cloud);
    let est = berezin_from(cloud, &k, &vals)?;
    let spread: f64 = vals.iter().zip(&k).zip(&cloud.weights).map(|((v, k), w)| (v - est.value).norm_sqr() * k * w).sum();
    let scale = est.value.norm() + spread.sqrt();
    if scale > 0.0 && est.se > 0.1 * scale {
        return Err(BerezinError::Noisy { se: est.se, scale });
    }
    Ok(est)
}

/// `b^(z) = sum <b>_{E(c_j^k, beta)} 1_{K_j^k}(z)`; the root slab uses the
/// ball around the origin.
#[derive(Clone, Debug)]
pub struct DyadicBerezinField {
    pub beta: f64,
    /// `values[k][j]`; `None` for empty kubes.
    pub values: Vec<Vec<Option<C64>>>,
    pub root: C64,
    /// Largest uncertain-band share over all averages (0 on the ball).
    pub uncertain: f64,
}

/// Kobayashi-ball average `<b>_{E(c, r)}`.
pub fn ball_average(domain: &Domain, b: &impl SymbolEval, c: &CPoint, r: f64, count: usize, seed: u64) -> Result<(C64, f64), SamplingError> {
    let bc = sample_kobayashi_ball(domain, c, r, count, seed)?;
    let vals = symbol_values(b, &bc.cloud);
    Ok((bc.mean(&vals), bc.uncertain))
}

impl DyadicBerezinField {
    pub fn build(
        system: &DyadicSystem,
        b: &impl SymbolEval,
        beta: f64,
        count: usize,
        seed: u64,
    ) -> Result<DyadicBerezinField, BerezinError> {
        let domain = &system.grid.domain;
        let average = |c: &CPoint, label: u64, kube: Kube| -> Result<(C64, f64), BerezinError> {
            let (v, u) = ball_average(domain, b, c, beta, count, derive_seed(seed, label))?;
            if !v.is_finite() {
                let (level, index) = match kube {
                    Kube::Root => (u32::MAX, 0),
                    Kube::Cell { level, index } => (level, index),
                };
                return Err(BerezinError::StarvedKube { level, index });
            }
            Ok((v, u))
        };
        let (root, mut uncertain) = average(&CPoint::zeros(system.n()), u64::MAX, Kube::Root)?;
        let mut values = Vec::with_capacity(system.depth() + 1);
        for k in 0..=system.depth() {
            let level: Vec<Option<(C64, f64)>> = (0..system.cube_count(k))
                .into_par_iter()
                .map(|j| {
                    if system.is_empty_kube(k, j) {
                        return Ok(None);
                    }
                    let label = ((k as u64) << 32) | j as u64;
                    let kube = Kube::Cell { level: k as u32, index: j as u32 };
                    average(&system.center(k, j), label, kube).map(Some)
                })
                .collect::<Result<_, BerezinError>>()?;
            uncertain = level.iter().flatten().map(|x| x.1).fold(uncertain, f64::max);
            values.push(level.into_iter().map(|x| x.map(|v| v.0)).collect());
        }
        Ok(DyadicBerezinField { beta, values, root, uncertain })
    }

    pub fn kube_value(&self, kube: Kube) -> Option<C64> {
        match kube {
            Kube::Root => Some(self.root),
            Kube::Cell { level, index } => self.values[level as usize][index as usize],
        }
    }

    /// Field value at `z`; empty kubes fall back to the nearest non-empty
    /// ancestor.
    pub fn eval(&self, system: &DyadicSystem, z: &CPoint) -> C64 {
        let loc = system.locate(z);
        for (k, &j) in loc.chain.iter().enumerate().rev() {
            if let Some(v) = self.values[k][j as usize] {
                return v;
            }
        }
        self.root
    }

    /// Largest `|<b>_parent - <b>_child|` over tree edges between non-empty kubes.
    pub fn max_parent_step(&self, system: &DyadicSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..=system.depth() {
            for (j, &p) in system.grid.levels[k].parent.iter().enumerate() {
                if let (Some(c), Some(q)) = (self.values[k][j], self.values[k - 1][p as usize]) {
                    worst = worst.max((c - q).norm());
                }
            }
        }
        if let Some(top) = self.values[0].iter().flatten().map(|v| (v - self.root).norm()).reduce(f64::max) {
            worst = worst.max(top);
        }
        worst
    }

    /// `max_j |b^| ` per level.
    pub fn level_maxima(&self) -> Vec<f64> {
        self.values.iter().map(|l| l.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)).collect()
    }
}

/// `sup_f int |f|^2 |b - b^|^q dV / int |f|^2 dV` over the family `f = S_{zeta, 2}`
/// for base points `zetas`, each integrated on its own local cloud.
pub fn carleson_ratio(
    system: &DyadicSystem,
    field: &DyadicBerezinField,
    b: &impl SymbolEval,
    q: f64,
    zetas: &[CPoint],
    per_scale: usize,
    seed: u64,
) -> Result<Vec<f64>, BerezinError> {
    let domain = &system.grid.domain;
    zetas
        .iter()
        .enumerate()
        .map(|(i, zeta)| {
            let cloud = crate::sampling::sample_local(domain, zeta, per_scale, derive_seed(seed, i as u64));
            let (k, _) = normalized_kernel_sqr(domain, zeta, &cloud)?;
            let vals = symbol_values(b, &cloud);
            let hat: Vec<C64> = cloud.points.par_iter().map(|w| field.eval(system, w)).collect();
            let num: Vec<f64> = k.iter().zip(vals.iter().zip(&hat)).map(|(k, (v, h))| k * (v - h).norm().powf(q)).collect();
            let top = cloud.integrate_values(&num)?.value;
            let bottom = cloud.integrate_values(&k)?.value;
            Ok(top / bottom)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillation::Symbol;
    use crate::sampling::sample_local;

    #[test]
    fn peaking_kernel_at_the_origin_is_one() {
        let d = Domain::ball(2);
        let z = CPoint::zeros(2);
        for w in [CPoint::zeros(2), CPoint::from_real(&[0.3, -0.8])] {
            assert_eq!(peaking_eval(&d, &z, 2.0, &w).unwrap(), 1.0);
        }
    }

    #[test]
    fn l2_norm_is_the_ball_constant() {
        // On the ball S_{z,2} = (1-|z|^2)^{3/2} |1 - <w, z>|^{-3}; the reproducing
        // property of the Bergman kernel gives ||S_{z,2}||_2^2 = pi^2 / 2.
        let d = Domain::ball(2);
        for delta in [0.1, 0.01] {
            let z = CPoint::from_real(&[1.0 - delta, 0.0]);
            let cloud = sample_local(&d, &z, 8000, 3);
            let s = PeakingKernel::new(&d, &z, 2.0).unwrap();
            let est = s.lp_norm(&d, &cloud).unwrap();
            let exact = std::f64::consts::PI / 2f64.sqrt();
            assert!((est.value - exact).abs() < 3.0 * est.se + 1e-3 * exact, "{est:?} vs {exact}");
        }
    }

    #[test]
    fn constants_are_reproduced_exactly() {
        let d = Domain::ball(1);
        let z = CPoint::from_real(&[0.95]);
        let cloud = sample_local(&d, &z, 4000, 1);
        let v = modified_berezin(&d, &Symbol::Constant { value: 3.0 }, &z, &cloud).unwrap();
        assert!((v.value - C64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn indicator_of_a_ball_has_berezin_value_in_unit_interval() {
        let d = Domain::ball(1);
        let z = CPoint::from_real(&[0.9]);
        let cloud = sample_local(&d, &z, 4000, 2);
        let ind = |w: &CPoint, _: f64| C64::new(f64::from(crate::metrics::ball_kobayashi(&z, w) < 1.0), 0.0);
        let v = modified_berezin(&d, &ind, &z, &cloud).unwrap().value.re;
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn log_defect_berezin_on_the_disk() {
        // Mobius invariance: the Berezin transform of log(1 - |w|^2) on the disk
        // is log(1 - |z|^2) + int_0^1 log(1 - t) dt = log(1 - |z|^2) - 1.
        let d = Domain::ball(1);
        let b = |w: &CPoint, _: f64| C64::new((1.0 - w.norm_sqr()).ln(), 0.0);
        for (i, delta) in [1e-1, 1e-2, 1e-3].into_iter().enumerate() {
            let z = CPoint::from_real(&[1.0 - delta]);
            let cloud = sample_local(&d, &z, 8000, 10 + i as u64);
            let v = modified_berezin(&d, &b, &z, &cloud).unwrap();
            let exact = (1.0 - z.norm_sqr()).ln() - 1.0;
            assert!((v.value.re - exact).abs() < 3.0 * v.se, "{v:?} vs {exact}");
        }
    }

    #[test]
    fn non_conjugate_exponent_is_rejected() {
        let d = Domain::ball(1);
        assert!(matches!(PeakingKernel::new(&d, &CPoint::zeros(1), 1.0), Err(BerezinError::BadExponent(_))));
    }
}
