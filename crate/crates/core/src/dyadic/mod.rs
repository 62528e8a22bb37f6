//! Adjacent dyadic grids on `(bD, d_B, sigma)` and the tents and kubes they
//! induce in `D`.
//!
//! A grid is built over a fixed weighted boundary sample. Level `k` is a
//! greedy maximal `s^{-k} delta_cal`-separated net seeded with level `k - 1`;
//! each net point's parent is its nearest predecessor (lowest index on ties)
//! and each sample point belongs to the cube of its nearest deepest-level
//! point, so partition and nesting hold exactly on the sample.

mod io;
mod system;

pub use io::{read_grid, write_grid, GridCalibration, GRID_MAGIC, GRID_VERSION};
pub use system::{
    adjacent_audit, AdjacentAudit, DyadicSystem, Kube, KubeRegression, Location, RefineReport, RefinedPiece,
};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::cvec::{CPoint, MAX_DIM};
use crate::domain::{Domain, DomainSpec};
use crate::metrics::quasidist_with;
use crate::qmc::rng_for;
use crate::sampling::{sample_boundary, sample_sphere_graded, BoundarySample, SpherePatch};

#[derive(Debug, Error)]
pub enum DyadicError {
    #[error("boundary sample too coarse for level {level}: {net} net points from {local} sample points")]
    SampleTooCoarse { level: usize, net: usize, local: usize },
    #[error("sandwich constants C/c = {ratio:.2} exceed the cap {cap}; check the quasi-metric")]
    NonDoubling { ratio: f64, cap: f64 },
    #[error("invalid grid parameter: {0}")]
    BadParameter(String),
    #[error("graded sphere samples need the unit ball")]
    GradedNeedsBall,
    #[error("grid file: {0}")]
    Io(#[from] std::io::Error),
    #[error("grid file is malformed: {0}")]
    Format(String),
}

/// How the dense boundary sample is drawn; stored instead of the points.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleSpec {
    Uniform { count: usize, seed: u64 },
    /// Uniform part plus sphere patches around `(1, 0, ...)` (ball only).
    Graded { uniform: usize, patches: Vec<(SpherePatch, usize)>, seed: u64 },
}

impl SampleSpec {
    pub fn draw(&self, domain: &Domain) -> Result<BoundarySample, DyadicError> {
        match self {
            SampleSpec::Uniform { count, seed } => Ok(sample_boundary(domain, *count, *seed)),
            SampleSpec::Graded { uniform, patches, seed } => {
                if !domain.is_ball() {
                    return Err(DyadicError::GradedNeedsBall);
                }
                Ok(sample_sphere_graded(domain.dim(), *uniform, patches, *seed))
            }
        }
    }

    /// Patches refining levels `k_lo..=k_hi` around the focus point, each of
    /// tangential radius `scale * r_k`.
    pub fn graded_for_levels(
        config: &GridConfig,
        uniform: usize,
        k_lo: usize,
        k_hi: usize,
        scale: f64,
        per_patch: usize,
        seed: u64,
    ) -> SampleSpec {
        let patches = (k_lo..=k_hi)
            .map(|k| {
                let rho = (scale * config.radius(k)).min(1.0);
                (SpherePatch { radius: rho, half_angle: (rho * rho).min(std::f64::consts::PI) }, per_patch)
            })
            .collect();
        SampleSpec::Graded { uniform, patches, seed }
    }
}

/// Parameters of one grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    /// Ratio `s > 1` between consecutive scales.
    pub s: f64,
    /// Calibre `delta_cal`: level `k` has net radius `s^{-k} delta_cal`.
    pub delta_cal: f64,
    /// Deepest level `k_max`.
    pub levels: usize,
    /// Seed of the greedy scan order.
    pub seed: u64,
    /// Cap on the fitted `C / c` of the ball sandwich.
    pub doubling_cap: f64,
}

impl GridConfig {
    pub fn new(s: f64, delta_cal: f64, levels: usize, seed: u64) -> GridConfig {
        GridConfig { s, delta_cal, levels, seed, doubling_cap: 64.0 }
    }

    /// Net radius `s^{-k} delta_cal`.
    pub fn radius(&self, k: usize) -> f64 {
        self.delta_cal * self.s.powi(-(k as i32))
    }

    /// Tent height `s^{-2k} delta_cal^2`.
    pub fn height(&self, k: usize) -> f64 {
        let r = self.radius(k);
        r * r
    }
}

/// Uniform grid in `R^{2n}` with cell side `cell`; `d_B >= |.|` makes it a
/// valid filter for `d_B`-balls.
#[derive(Clone, Debug)]
pub(crate) struct SpatialHash {
    cell: f64,
    dim: usize,
    map: FxHashMap<[i32; 2 * MAX_DIM], Vec<u32>>,
}

impl SpatialHash {
    pub(crate) fn new(n: usize, cell: f64) -> Self {
        SpatialHash { cell, dim: 2 * n, map: FxHashMap::default() }
    }

    fn key(&self, p: &CPoint) -> [i32; 2 * MAX_DIM] {
        let x = p.to_real();
        let mut k = [0i32; 2 * MAX_DIM];
        for i in 0..self.dim {
            k[i] = (x[i] / self.cell).floor() as i32;
        }
        k
    }

    pub(crate) fn insert(&mut self, idx: u32, p: &CPoint) {
        self.map.entry(self.key(p)).or_default().push(idx);
    }

    /// Calls `f` on every stored index whose cell lies within `radius` of `p`
    /// in each coordinate.
    pub(crate) fn for_each_near(&self, p: &CPoint, radius: f64, mut f: impl FnMut(u32)) {
        let base = self.key(p);
        let reach = (radius / self.cell).ceil() as i32;
        let width = (2 * reach + 1) as usize;
        let total = width.pow(self.dim as u32);
        let mut key = base;
        for code in 0..total {
            let mut c = code;
            for i in 0..self.dim {
                key[i] = base[i] + (c % width) as i32 - reach;
                c /= width;
            }
            if let Some(v) = self.map.get(&key) {
                v.iter().for_each(|&i| f(i));
            }
        }
    }
}

/// Symmetrized Box distance `min(d_B(a, b), d_B(b, a))` with cached normals.
#[inline]
pub(crate) fn dsym(a: &CPoint, nu_a: &CPoint, b: &CPoint, nu_b: &CPoint) -> f64 {
    quasidist_with(nu_a, a, b).min(quasidist_with(nu_b, b, a))
}

/// One level of the nested nets.
#[derive(Clone, Debug, PartialEq)]
pub struct NetLevel {
    pub radius: f64,
    pub points: Vec<CPoint>,
    /// Index into the previous level; `u32::MAX` at level 0.
    pub parent: Vec<u32>,
}

/// Dyadic grid `Q_l` over a dense boundary sample.
#[derive(Clone, Debug)]
pub struct DyadicGrid {
    pub domain: Domain,
    pub config: GridConfig,
    pub sample_spec: SampleSpec,
    pub sample: BoundarySample,
    normals: Vec<CPoint>,
    pub levels: Vec<NetLevel>,
    /// `cube_of[k][i]`: level-`k` cube holding sample point `i`.
    pub cube_of: Vec<Vec<u32>>,
    net_normals: Vec<Vec<CPoint>>,
    deepest: SpatialHash,
}

impl DyadicGrid {
    pub fn n(&self) -> usize {
        self.domain.dim()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn normal(&self, i: usize) -> &CPoint {
        &self.normals[i]
    }

    /// `sigma(Q_j^k)` for every cube of level `k`.
    pub fn cube_measures(&self, k: usize) -> Vec<f64> {
        let mut m = vec![crate::numeric::Kahan::new(); self.levels[k].points.len()];
        for (i, &c) in self.cube_of[k].iter().enumerate() {
            m[c as usize].add(self.sample.weights[i]);
        }
        m.iter().map(|k| k.value()).collect()
    }

    /// Sample points per cube of level `k`.
    pub fn cube_counts(&self, k: usize) -> Vec<usize> {
        let mut m = vec![0usize; self.levels[k].points.len()];
        for &c in &self.cube_of[k] {
            m[c as usize] += 1;
        }
        m
    }

    /// Children of each level-`k` cube.
    pub fn children(&self, k: usize) -> Vec<Vec<u32>> {
        let mut ch = vec![Vec::new(); self.levels[k].points.len()];
        if k < self.depth() {
            for (i, &p) in self.levels[k + 1].parent.iter().enumerate() {
                ch[p as usize].push(i as u32);
            }
        }
        ch
    }

    /// Largest number of children of any cube.
    pub fn max_children(&self) -> usize {
        (0..self.depth()).flat_map(|k| self.children(k).into_iter().map(|c| c.len())).max().unwrap_or(0)
    }

    /// Nearest deepest-level net point to a boundary point, ties to the lowest
    /// index.
    pub fn nearest_deepest(&self, zeta: &CPoint) -> u32 {
        let nu = self.domain.jet(zeta).dbar();
        let deep = &self.levels[self.depth()];
        let deep_nu = &self.net_normals[self.depth()];
        let mut radius = deep.radius;
        loop {
            let mut best = (f64::INFINITY, u32::MAX);
            self.deepest.for_each_near(zeta, radius, |j| {
                let d = dsym(zeta, &nu, &deep.points[j as usize], &deep_nu[j as usize]);
                if d <= radius && (d, j) < best {
                    best = (d, j);
                }
            });
            if best.1 != u32::MAX {
                return best.1;
            }
            radius *= 2.0;
        }
    }

    /// Level-`k` cube holding the boundary point `zeta`.
    pub fn cube_at(&self, zeta: &CPoint, k: usize) -> u32 {
        self.ancestor(self.depth(), self.nearest_deepest(zeta), k)
    }

    /// Ancestor at level `k` of cube `j` at level `from`.
    pub fn ancestor(&self, from: usize, mut j: u32, k: usize) -> u32 {
        for level in (k + 1..=from).rev() {
            j = self.levels[level].parent[j as usize];
        }
        j
    }

    pub(crate) fn net_normal(&self, k: usize, j: usize) -> &CPoint {
        &self.net_normals[k][j]
    }

    /// Zero-tolerance checks: separation, covering, nesting. Returns the
    /// number of violations of each.
    pub fn exact_audit(&self) -> (usize, usize, usize) {
        let normals = &self.net_normals;
        let mut separation = 0;
        let mut covering = 0;
        let mut nesting = 0;
        for (k, level) in self.levels.iter().enumerate() {
            let mut hash = SpatialHash::new(self.n(), level.radius);
            for (i, p) in level.points.iter().enumerate() {
                hash.insert(i as u32, p);
            }
            for (i, p) in level.points.iter().enumerate() {
                hash.for_each_near(p, level.radius, |j| {
                    if j as usize > i && dsym(p, &normals[k][i], &level.points[j as usize], &normals[k][j as usize]) <= level.radius {
                        separation += 1;
                    }
                });
            }
            for (i, x) in self.sample.points.iter().enumerate() {
                let c = self.cube_of[k][i] as usize;
                let mut found = false;
                hash.for_each_near(x, level.radius, |j| {
                    found |= dsym(x, &self.normals[i], &level.points[j as usize], &normals[k][j as usize]) <= level.radius;
                });
                if !found {
                    covering += 1;
                }
                if k > 0 && level.parent[c] != self.cube_of[k - 1][i] {
                    nesting += 1;
                }
            }
        }
        (separation, covering, nesting)
    }
}

/// Greedy maximal `radius`-separated net over `sample`, seeded with `carry`.
pub fn build_net(
    domain: &Domain,
    sample: &BoundarySample,
    radius: f64,
    carry: &[CPoint],
    order: &[u32],
) -> Vec<CPoint> {
    let n = domain.dim();
    let mut hash = SpatialHash::new(n, radius);
    let mut net: Vec<CPoint> = Vec::with_capacity(carry.len() * 4);
    let mut nus: Vec<CPoint> = Vec::with_capacity(carry.len() * 4);
    for p in carry {
        hash.insert(net.len() as u32, p);
        net.push(*p);
        nus.push(domain.jet(p).dbar());
    }
    for &i in order {
        let x = sample.points[i as usize];
        let nu = domain.jet(&x).dbar();
        let mut covered = false;
        hash.for_each_near(&x, radius, |j| {
            if !covered && dsym(&x, &nu, &net[j as usize], &nus[j as usize]) <= radius {
                covered = true;
            }
        });
        if !covered {
            hash.insert(net.len() as u32, &x);
            net.push(x);
            nus.push(nu);
        }
    }
    net
}

/// Nearest point (ties to the lowest index) of `targets` for every query.
fn nearest_all(domain: &Domain, targets: &[CPoint], radius: f64, queries: &[CPoint]) -> Vec<u32> {
    let mut hash = SpatialHash::new(domain.dim(), radius);
    for (i, p) in targets.iter().enumerate() {
        hash.insert(i as u32, p);
    }
    let tn: Vec<CPoint> = targets.iter().map(|p| domain.jet(p).dbar()).collect();
    queries
        .par_iter()
        .map(|q| {
            let qn = domain.jet(q).dbar();
            let mut r = radius;
            loop {
                let mut best = (f64::INFINITY, u32::MAX);
                hash.for_each_near(q, r, |j| {
                    let d = dsym(q, &qn, &targets[j as usize], &tn[j as usize]);
                    if d <= r && (d, j) < best {
                        best = (d, j);
                    }
                });
                if best.1 != u32::MAX {
                    return best.1;
                }
                r *= 2.0;
            }
        })
        .collect()
}

/// Builds every level of one grid.
pub fn build_grid(domain: &Domain, config: GridConfig, sample_spec: SampleSpec) -> Result<DyadicGrid, DyadicError> {
    let sample = sample_spec.draw(domain)?;
    build_grid_on(domain, config, sample_spec, sample)
}

/// [`build_grid`] over an already drawn sample.
pub fn build_grid_on(
    domain: &Domain,
    config: GridConfig,
    sample_spec: SampleSpec,
    sample: BoundarySample,
) -> Result<DyadicGrid, DyadicError> {
    if !(config.s > 1.0) || !(config.delta_cal > 0.0) {
        return Err(DyadicError::BadParameter(format!("need s > 1 and delta > 0, got s = {}, delta = {}", config.s, config.delta_cal)));
    }
    let mut order: Vec<u32> = (0..sample.points.len() as u32).collect();
    order.shuffle(&mut rng_for(config.seed, 0x6e7));
    let mut levels: Vec<NetLevel> = Vec::with_capacity(config.levels + 1);
    for k in 0..=config.levels {
        let radius = config.radius(k);
        let carry: &[CPoint] = levels.last().map(|l: &NetLevel| l.points.as_slice()).unwrap_or(&[]);
        let points = build_net(domain, &sample, radius, carry, &order);
        let parent = match levels.last() {
            None => vec![u32::MAX; points.len()],
            Some(prev) => nearest_all(domain, &prev.points, prev.radius, &points),
        };
        check_resolution(&sample_spec, &sample, k, radius, &points)?;
        levels.push(NetLevel { radius, points, parent });
    }
    let normals: Vec<CPoint> = sample.points.iter().map(|p| domain.jet(p).dbar()).collect();
    let deep = levels.last().expect("at least one level");
    let leaf = nearest_all(domain, &deep.points, deep.radius, &sample.points);
    let mut cube_of = vec![Vec::new(); levels.len()];
    cube_of[config.levels] = leaf;
    for k in (0..config.levels).rev() {
        cube_of[k] = cube_of[k + 1].iter().map(|&c| levels[k + 1].parent[c as usize]).collect();
    }
    let net_normals = levels.iter().map(|l| l.points.iter().map(|p| domain.jet(p).dbar()).collect()).collect();
    let mut deepest = SpatialHash::new(domain.dim(), deep.radius);
    for (i, p) in deep.points.iter().enumerate() {
        deepest.insert(i as u32, p);
    }
    Ok(DyadicGrid {
        domain: domain.clone(),
        config,
        sample_spec,
        sample,
        normals,
        levels,
        cube_of,
        net_normals,
        deepest,
    })
}

/// A level is too fine for the sample when more than half of the sample points
/// in its resolved region became net points. Regions with fewer than
/// `MIN_CHECKED` points are explicit point sets and are not checked.
fn check_resolution(
    spec: &SampleSpec,
    sample: &BoundarySample,
    level: usize,
    radius: f64,
    net: &[CPoint],
) -> Result<(), DyadicError> {
    let (local, count) = match spec {
        SampleSpec::Uniform { .. } => (sample.points.len(), net.len()),
        SampleSpec::Graded { patches, .. } => {
            // Finest patch that is still wide compared with the net radius.
            let patch = patches.iter().map(|p| p.0).rfind(|p| p.radius >= 2.0 * radius);
            match patch {
                None => return Ok(()),
                Some(p) => {
                    let inside = |z: &CPoint| patch_core(&p, z);
                    (sample.points.iter().filter(|z| inside(z)).count(), net.iter().filter(|z| inside(z)).count())
                }
            }
        }
    };
    if local >= MIN_CHECKED && 2 * count > local {
        return Err(DyadicError::SampleTooCoarse { level, net: count, local });
    }
    Ok(())
}

const MIN_CHECKED: usize = 64;

/// Inner half of a sphere patch around `(1, 0, ...)`.
fn patch_core(p: &SpherePatch, z: &CPoint) -> bool {
    let v: f64 = (1..z.dim()).map(|j| z[j].norm_sqr()).sum::<f64>().sqrt();
    v < 0.5 * p.radius && z[0].arg().abs() < 0.25 * p.half_angle
}

/// Independently seeded grids over one shared sample; built in parallel.
pub fn build_adjacent_grids(
    domain: &Domain,
    base: GridConfig,
    sample_spec: SampleSpec,
    seeds: &[u64],
) -> Result<Vec<DyadicGrid>, DyadicError> {
    let sample = sample_spec.draw(domain)?;
    seeds
        .par_iter()
        .map(|&seed| build_grid_on(domain, GridConfig { seed, ..base }, sample_spec.clone(), sample.clone()))
        .collect()
}

pub(crate) fn domain_code(spec: &DomainSpec) -> (u8, Vec<f64>) {
    match spec {
        DomainSpec::Ball { .. } => (0, vec![]),
        DomainSpec::Ellipsoid { weights, .. } => (1, weights.clone()),
        DomainSpec::PerturbedBall { eps, .. } => (2, vec![*eps]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_grid(count: usize, levels: usize, seed: u64) -> DyadicGrid {
        let d = Domain::ball(1);
        build_grid(&d, GridConfig::new(2.0, 0.7, levels, seed), SampleSpec::Uniform { count, seed: 1 }).unwrap()
    }

    #[test]
    fn coarse_level_is_a_single_point() {
        let d = Domain::ball(2);
        let g = build_grid(&d, GridConfig::new(2.0, 3.0, 1, 4), SampleSpec::Uniform { count: 2000, seed: 2 }).unwrap();
        assert_eq!(g.levels[0].points.len(), 1);
    }

    #[test]
    fn exact_properties_hold_on_the_circle() {
        let g = circle_grid(20_000, 4, 3);
        assert_eq!(g.exact_audit(), (0, 0, 0));
        for k in 0..=g.depth() {
            assert_eq!(g.cube_of[k].len(), g.sample.points.len());
            assert!(g.cube_counts(k).iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn exact_properties_hold_on_the_sphere() {
        let d = Domain::ball(2);
        let g = build_grid(&d, GridConfig::new(2.0, 2.0, 3, 5), SampleSpec::Uniform { count: 40_000, seed: 6 }).unwrap();
        assert_eq!(g.exact_audit(), (0, 0, 0));
        assert!(g.max_children() > 1);
    }

    #[test]
    fn toy_circle_tree_is_balanced_binary() {
        // Four pairs of nearby points: the coarse net keeps one per pair, the
        // fine net keeps all eight, and each pair shares a parent.
        let d = Domain::ball(1);
        let pts: Vec<CPoint> = (0..8)
            .map(|j| {
                let t = std::f64::consts::FRAC_PI_2 * (j / 2) as f64 + 0.4 * (j % 2) as f64;
                CPoint::new(&[crate::cvec::C64::from_polar(1.0, t)])
            })
            .collect();
        let sample = BoundarySample { points: pts, weights: vec![std::f64::consts::TAU / 8.0; 8] };
        let config = GridConfig { s: 2.0, delta_cal: 1.0, levels: 1, seed: 0, doubling_cap: 64.0 };
        let g = build_grid_on(&d, config, SampleSpec::Uniform { count: 8, seed: 0 }, sample).unwrap();
        assert_eq!(g.levels[0].points.len(), 4);
        assert_eq!(g.levels[1].points.len(), 8);
        let kids = g.children(0);
        assert!(kids.iter().all(|c| c.len() == 2), "{kids:?}");
    }

    #[test]
    fn same_seed_same_grid() {
        let a = circle_grid(5000, 3, 9);
        let b = circle_grid(5000, 3, 9);
        assert_eq!(a.levels, b.levels);
        assert_eq!(a.cube_of, b.cube_of);
        let c = circle_grid(5000, 3, 10);
        assert_ne!(a.levels, c.levels);
    }

    #[test]
    fn coarse_sample_is_rejected() {
        let d = Domain::ball(1);
        let r = build_grid(&d, GridConfig::new(2.0, 0.7, 8, 1), SampleSpec::Uniform { count: 500, seed: 1 });
        assert!(matches!(r, Err(DyadicError::SampleTooCoarse { .. })));
    }
}
