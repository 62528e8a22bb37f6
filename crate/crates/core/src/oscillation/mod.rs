//! Mean-oscillation functionals over Kobayashi balls, dyadic tents and the
//! modified Berezin transform, their boundary-decay profiles, and the
//! bounded-distance-to-analytic residual.

mod bda;
mod symbols;

pub use bda::{bda2_distance, BdaError};
pub use symbols::{Expected, Symbol, SymbolClass, SymbolEval};

use rayon::prelude::*;
use thiserror::Error;

use crate::berezin::{berezin_from, normalized_kernel_sqr, symbol_values, BerezinError};
use crate::cvec::{CPoint, C64};
use crate::domain::Domain;
use crate::dyadic::DyadicSystem;
use crate::numeric::Kahan;
use crate::qmc::{derive_seed, sphere_point, ScrambledHalton};
use crate::sampling::{sample_kobayashi_ball, sample_local, sample_plain, Estimate, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscillationError {
    #[error("Kobayashi ball around center {center} holds only {points} weighted points")]
    BallStarved { center: usize, points: usize },
    #[error("need p >= 1, got {0}")]
    BadExponent(f64),
    #[error(transparent)]
    Berezin(#[from] BerezinError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Kobayashi,
    Dyadic,
    Berezin,
}

/// Oscillation at one center (or tent).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscPoint {
    pub delta: f64,
    pub value: f64,
    pub se: f64,
}

/// Per-center oscillation values; `sup` is their maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct OscCurve {
    pub points: Vec<OscPoint>,
    /// Excluded tents or centers.
    pub starved: usize,
}

impl OscCurve {
    pub fn sup(&self) -> f64 {
        self.points.iter().map(|p| p.value).fold(0.0, f64::max)
    }

    /// Log-log slope of the per-decade maxima against `delta`.
    pub fn decade_slope(&self) -> f64 {
        let mut buckets: std::collections::BTreeMap<i32, f64> = Default::default();
        for p in &self.points {
            let e = p.delta.log10().floor() as i32;
            let v = buckets.entry(e).or_insert(0.0);
            *v = v.max(p.value);
        }
        let x: Vec<f64> = buckets.keys().map(|&e| (e as f64 + 0.5) * std::f64::consts::LN_10).collect();
        let y: Vec<f64> = buckets.values().map(|v| v.ln()).collect();
        crate::numeric::fit_line(&x, &y).slope
    }

    /// `sup_{delta(z) < t} osc(z)` at each threshold; NaN where no center
    /// lies below `t`.
    pub fn profile(&self, thresholds: &[f64]) -> VmoProfile {
        let curve = thresholds
            .iter()
            .map(|&t| {
                let below = self.points.iter().filter(|p| p.delta < t).map(|p| p.value);
                (t, below.fold(f64::NAN, f64::max))
            })
            .collect();
        VmoProfile { bulk: self.sup(), curve }
    }
}

/// Boundary-decay profile of one functional.
#[derive(Clone, Debug, PartialEq)]
pub struct VmoProfile {
    pub bulk: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Share of the bulk value below which the profile counts as vanishing.
pub const VMO_FRACTION: f64 = 0.1;

impl VmoProfile {
    /// Profile value at the largest threshold not above `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.curve.iter().filter(|(s, _)| *s <= t).max_by(|a, b| a.0.total_cmp(&b.0)).map_or(0.0, |&(_, v)| v)
    }

    /// VMO iff the profile drops below `VMO_FRACTION` of the bulk by `t`;
    /// false when there is no data below `t`.
    pub fn is_vmo(&self, t: f64) -> bool {
        self.bulk == 0.0 || self.at(t) < VMO_FRACTION * self.bulk
    }

    /// Smallest threshold with data below it.
    pub fn deepest_resolved(&self) -> Option<f64> {
        self.curve.iter().filter(|(_, v)| !v.is_nan()).map(|&(t, _)| t).min_by(f64::total_cmp)
    }
}

/// Centers with `delta` log-uniform in `[lo, hi]` (`per_decade` per decade)
/// and uniform directions, in deterministic order.
pub fn stratified_centers(domain: &Domain, lo: f64, hi: f64, per_decade: usize, seed: u64) -> Vec<CPoint> {
    let n = domain.dim();
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize;
    let h = ScrambledHalton::new(2 * n, derive_seed(seed, 0xce));
    let mut u = vec![0.0; 2 * n];
    (0..count as u64)
        .map(|i| {
            h.fill(i + 1, &mut u);
            // Deterministic stratification in delta, QMC in direction.
            let t = (i as f64 + 0.5) / count as f64;
            let delta = lo * (hi / lo).powf(t);
            let dir = sphere_point(n, &u[..2 * n - 1]);
            let zeta = domain.radial_boundary_point(&dir);
            if domain.is_ball() {
                zeta * (1.0 - delta)
            } else {
                zeta + domain.inward_normal(&zeta) * delta
            }
        })
        .collect()
}

/// `(int |v - m|^p w / int w)^{1/p}` and a delta-method standard error from
/// per-point contributions.
fn lp_oscillation(weights: &[f64], values: &[C64], mean: C64, p: f64) -> (f64, f64) {
    let mass: f64 = weights.iter().copied().collect::<Kahan>().value();
    let terms: Vec<f64> = values.iter().zip(weights).map(|(v, w)| (v - mean).norm().powf(p) * w / mass).collect();
    let total: f64 = terms.iter().copied().collect::<Kahan>().value();
    let m = terms.len() as f64;
    let var = if m > 1.0 {
        let mean_t = total / m;
        terms.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() * m / (m - 1.0)
    } else {
        0.0
    };
    let value = total.powf(1.0 / p);
    let se = if total > 0.0 { value * var.sqrt() / (p * total) } else { 0.0 };
    (value, se)
}

fn weighted_mean(weights: &[f64], values: &[C64]) -> C64 {
    let mut re = Kahan::new();
    let mut im = Kahan::new();
    let mut mass = Kahan::new();
    for (v, w) in values.iter().zip(weights) {
        re.add(v.re * w);
        im.add(v.im * w);
        mass.add(*w);
    }
    C64::new(re.value(), im.value()) / mass.value()
}

/// Minimum number of weighted points in a Kobayashi-ball average.
pub const MIN_BALL_POINTS: usize = 16;

/// `(avg_{E(z, r)} |b - <b>_{E(z, r)}|^p)^{1/p}` per center.
pub fn bmo_kobayashi(
    domain: &Domain,
    b: &impl SymbolEval,
    r: f64,
    p: f64,
    centers: &[CPoint],
    count: usize,
    seed: u64,
) -> Result<OscCurve, OscillationError> {
    if !(p >= 1.0) {
        return Err(OscillationError::BadExponent(p));
    }
    let points = centers
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let bc = sample_kobayashi_ball(domain, z, r, count, derive_seed(seed, i as u64))?;
            let live = bc.cloud.weights.iter().filter(|&&w| w > 0.0).count();
            if live < MIN_BALL_POINTS {
                return Err(OscillationError::BallStarved { center: i, points: live });
            }
            let vals = symbol_values(b, &bc.cloud);
            let mean = weighted_mean(&bc.cloud.weights, &vals);
            let (value, se) = lp_oscillation(&bc.cloud.weights, &vals, mean, p);
            Ok(OscPoint { delta: domain.delta(z), value, se })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OscCurve { points, starved: 0 })
}

/// Tent oscillations `(avg_{hat K} |b - <b>_{hat K}|^p)^{1/p}` over every
/// resolved tent of every system plus the root tent (the whole domain, drawn
/// with `member_cap * 16` uniform points); `delta` is the tent height.
pub fn bmo_dyadic(systems: &[DyadicSystem], b: &impl SymbolEval, p: f64, member_cap: usize) -> Result<OscCurve, OscillationError> {
    if !(p >= 1.0) {
        return Err(OscillationError::BadExponent(p));
    }
    let mut points = Vec::new();
    let mut starved = 0;
    for sys in systems {
        let domain = &sys.grid.domain;
        let tents: Vec<(usize, usize)> = sys.kubes().collect();
        let out: Vec<Option<OscPoint>> = tents
            .par_iter()
            .map(|&(k, j)| {
                if !sys.is_resolved(k, j) {
                    return None;
                }
                let (pts, wts) = sys.tent_quadrature_capped(k, j, member_cap);
                let vals: Vec<C64> = pts.iter().map(|w| b.eval(w, domain.delta(w))).collect();
                let mean = weighted_mean(&wts, &vals);
                let (value, se) = lp_oscillation(&wts, &vals, mean, p);
                Some(OscPoint { delta: sys.heights[k].min(sys.depth_cap), value, se })
            })
            .collect();
        starved += out.iter().filter(|o| o.is_none()).count();
        points.extend(out.into_iter().flatten());
        let root = sample_plain(domain, member_cap * 16, derive_seed(sys.grid.config.seed, 0x700));
        let vals = symbol_values(b, &root);
        let mean = weighted_mean(&root.weights, &vals);
        let (value, se) = lp_oscillation(&root.weights, &vals, mean, p);
        points.push(OscPoint { delta: sys.depth_cap, value, se });
    }
    Ok(OscCurve { points, starved })
}

/// `(int |b - b~(z)|^p |s_z|^2 dV)^{1/p}` per center, each on its own local cloud.
pub fn bmo_berezin(
    domain: &Domain,
    b: &impl SymbolEval,
    p: f64,
    centers: &[CPoint],
    per_scale: usize,
    seed: u64,
) -> Result<OscCurve, OscillationError> {
    if !(p >= 1.0) {
        return Err(OscillationError::BadExponent(p));
    }
    let points = centers
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let cloud = sample_local(domain, z, per_scale, derive_seed(seed, i as u64));
            let (k, _) = normalized_kernel_sqr(domain, z, &cloud)?;
            let vals = symbol_values(b, &cloud);
            let tilde = berezin_from(&cloud, &k, &vals)?.value;
            let dev: Vec<f64> = vals.iter().zip(&k).map(|(v, k)| (v - tilde).norm().powf(p) * k).collect();
            let Estimate { value: total, se } = cloud.integrate_values(&dev)?;
            let value = total.max(0.0).powf(1.0 / p);
            let se = if total > 0.0 { value * se / (p * total) } else { 0.0 };
            Ok(OscPoint { delta: domain.delta(z), value, se })
        })
        .collect::<Result<Vec<_>, OscillationError>>()?;
    Ok(OscCurve { points, starved: 0 })
}

/// Fitted `C*`: the smallest constant with every pairwise ratio of the given
/// sup values in `[1/C*, C*]`.
pub fn equivalence_constant(rows: &[[f64; 3]]) -> f64 {
    let mut c: f64 = 1.0;
    for row in rows {
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    c = c.max(row[a] / row[b]);
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_grid, GridConfig, SampleSpec};

    fn disk() -> Domain {
        Domain::ball(1)
    }

    #[test]
    fn constants_have_zero_oscillation() {
        let d = disk();
        let c = Symbol::Constant { value: 2.5 };
        let centers = stratified_centers(&d, 1e-3, 1e-1, 4, 1);
        assert!(bmo_kobayashi(&d, &c, 1.0, 2.0, &centers, 256, 2).unwrap().sup() < 1e-12);
        assert!(bmo_berezin(&d, &c, 2.0, &centers, 1000, 3).unwrap().sup() < 1e-12);
        let g = build_grid(&d, GridConfig::new(2.0, 0.7, 3, 1), SampleSpec::Uniform { count: 20_000, seed: 2 }).unwrap();
        let sys = [DyadicSystem::new(g)];
        assert!(bmo_dyadic(&sys, &c, 2.0, 64).unwrap().sup() < 1e-12);
    }

    #[test]
    fn delta_power_oscillation_grows_at_the_power_rate() {
        // b = delta^{-0.3}: on E(z, r) the spread of b scales with delta(z)^{-0.3}.
        let d = disk();
        let b = Symbol::DeltaPower { alpha: 0.3, floor: 1e-12 };
        let centers = stratified_centers(&d, 1e-3, 1e-1, 10, 4);
        let curve = bmo_kobayashi(&d, &b, 1.0, 2.0, &centers, 1024, 5).unwrap();
        let x: Vec<f64> = curve.points.iter().map(|p| p.delta.ln()).collect();
        let y: Vec<f64> = curve.points.iter().map(|p| p.value.ln()).collect();
        let slope = crate::numeric::fit_line(&x, &y).slope;
        assert!((slope + 0.3).abs() < 0.05, "{slope}");
    }

    #[test]
    fn profile_threshold_logic() {
        let curve = OscCurve {
            points: vec![
                OscPoint { delta: 0.5, value: 1.0, se: 0.0 },
                OscPoint { delta: 0.01, value: 0.2, se: 0.0 },
                OscPoint { delta: 1e-4, value: 0.05, se: 0.0 },
            ],
            starved: 0,
        };
        let prof = curve.profile(&[1.0, 0.1, 1e-3]);
        assert_eq!(prof.curve, vec![(1.0, 1.0), (0.1, 0.2), (1e-3, 0.05)]);
        assert!(prof.is_vmo(1e-3));
        assert!(!prof.is_vmo(0.1));
        let empty = curve.profile(&[1e-5]);
        assert!(empty.curve[0].1.is_nan());
        assert!(!empty.is_vmo(1e-5));
        assert_eq!(empty.deepest_resolved(), None);
        assert_eq!(prof.deepest_resolved(), Some(1e-3));
    }

    #[test]
    fn equivalence_constant_of_proportional_rows() {
        assert_eq!(equivalence_constant(&[[1.0, 2.0, 4.0], [3.0, 3.0, 3.0]]), 4.0);
    }
}
