//! Tents `{pi(z) in Q_j^k, delta(z) < h_k}`, kubes (tents minus child tents),
//! centres, point location, refinement and the measure audits.

use rayon::prelude::*;

use super::{dsym, patch_core, DyadicGrid, SampleSpec, SpatialHash};
use crate::cvec::CPoint;
use crate::metrics::ball_kobayashi;
use crate::numeric::{fit_line, gauss_legendre, Kahan};

/// A kube of the system; `Root` is the slab above every level-0 tent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kube {
    Root,
    Cell { level: u32, index: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub kube: Kube,
    /// Cube indices from level 0 down to the kube's level.
    pub chain: Vec<u32>,
    /// `delta(z)` is below the deepest resolved tent floor.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KubeRegression {
    pub slope: f64,
    pub slope_se: f64,
    /// `-(2n + 2) ln s`.
    pub expected: f64,
    pub kubes: usize,
}

impl KubeRegression {
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.expected) / self.expected).abs()
    }
}

/// One refined piece `K_{j,l,s}^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedPiece {
    pub shell: usize,
    pub depth: (f64, f64),
    /// Sample indices of the boundary part.
    pub members: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineReport {
    pub n_ref: usize,
    /// Largest number of boundary pieces in one shell (`N'`).
    pub boundary_pieces: usize,
    pub max_pieces: usize,
    /// Smallest `beta'` with every audited piece inside `E(c, beta')` (ball).
    pub beta: f64,
}

/// Sandwich audit across adjacent grids: each ball lies in a kube of one grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjacentAudit {
    pub balls: usize,
    pub successes: usize,
    /// Largest of `sigma(Q_2) / sigma(B)`, `sigma(B) / sigma(Q_1)` over successes.
    pub fitted: f64,
}

impl AdjacentAudit {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.balls.max(1) as f64
    }
}

/// Tents and kubes of one grid.
#[derive(Clone, Debug)]
pub struct DyadicSystem {
    pub grid: DyadicGrid,
    /// `h_k = s^{-2k} delta_cal^2` for `k = 0..=k_max + 1`.
    pub heights: Vec<f64>,
    /// Largest normal depth at which the projection is still the foot point.
    pub depth_cap: f64,
    /// `members[k][j]`: sample indices in `Q_j^k`.
    pub members: Vec<Vec<Vec<u32>>>,
    pub sigma: Vec<Vec<f64>>,
    /// Calibrated `K_j^k subset E(c_j^k, beta)` radius (ball only).
    pub beta: Option<f64>,
}

impl DyadicSystem {
    pub fn new(grid: DyadicGrid) -> DyadicSystem {
        let k_max = grid.depth();
        let heights = (0..=k_max + 1).map(|k| grid.config.height(k)).collect();
        let depth_cap = if grid.domain.is_ball() { 1.0 } else { grid.domain.tubular_radius() };
        let members = (0..=k_max)
            .map(|k| {
                let mut m = vec![Vec::new(); grid.levels[k].points.len()];
                for (i, &c) in grid.cube_of[k].iter().enumerate() {
                    m[c as usize].push(i as u32);
                }
                m
            })
            .collect();
        let sigma = (0..=k_max).map(|k| grid.cube_measures(k)).collect();
        DyadicSystem { grid, heights, depth_cap, members, sigma, beta: None }
    }

    pub fn depth(&self) -> usize {
        self.grid.depth()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn cube_count(&self, k: usize) -> usize {
        self.grid.levels[k].points.len()
    }

    /// All kubes except the root, level by level.
    pub fn kubes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.depth()).flat_map(move |k| (0..self.cube_count(k)).map(move |j| (k, j)))
    }

    /// Depth interval `[h_{k+1}, min(h_k, cap))` of level-`k` kubes.
    pub fn kube_depths(&self, k: usize) -> (f64, f64) {
        (self.heights[k + 1], self.heights[k].min(self.depth_cap))
    }

    pub fn is_empty_kube(&self, k: usize, j: usize) -> bool {
        let (lo, hi) = self.kube_depths(k);
        lo >= hi || self.members[k][j].is_empty()
    }

    /// Point at normal depth `t` below the boundary point `zeta`.
    pub fn at_depth(&self, zeta: &CPoint, t: f64) -> CPoint {
        if self.grid.domain.is_ball() {
            *zeta * (1.0 - t)
        } else {
            *zeta + self.grid.domain.inward_normal(zeta) * t
        }
    }

    /// Centre `c_j^k`: above `p_j^k` at half the tent's largest depth.
    pub fn center(&self, k: usize, j: usize) -> CPoint {
        let h = self.heights[k].min(self.depth_cap);
        self.at_depth(&self.grid.levels[k].points[j], 0.5 * h)
    }

    fn jacobian_integral(&self, zeta: &CPoint, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if self.grid.domain.is_ball() {
            let m = 2 * self.n() as i32;
            return ((1.0 - lo).powi(m) - (1.0 - hi).powi(m)) / m as f64;
        }
        let rule = gauss_legendre(8);
        crate::numeric::gl_integrate(|t| self.grid.domain.normal_flow_jacobian(zeta, t), lo, hi, &rule)
    }

    fn region_measure(&self, k: usize, j: usize, lo: f64, hi: f64) -> f64 {
        if self.grid.domain.is_ball() {
            return self.sigma[k][j] * self.jacobian_integral(&CPoint::zeros(self.n()), lo, hi);
        }
        let pts = &self.grid.sample.points;
        let w = &self.grid.sample.weights;
        self.members[k][j]
            .iter()
            .map(|&i| w[i as usize] * self.jacobian_integral(&pts[i as usize], lo, hi))
            .collect::<Kahan>()
            .value()
    }

    /// `|K_j^k|`.
    pub fn kube_measure(&self, k: usize, j: usize) -> f64 {
        let (lo, hi) = self.kube_depths(k);
        self.region_measure(k, j, lo, hi)
    }

    /// `|hat K_j^k|`.
    pub fn tent_measure(&self, k: usize, j: usize) -> f64 {
        self.region_measure(k, j, 0.0, self.heights[k].min(self.depth_cap))
    }

    /// Level whose kubes hold depth `delta`; `None` above all tents.
    fn level_of_depth(&self, delta: f64) -> Option<(usize, bool)> {
        if delta >= self.heights[0] {
            return None;
        }
        let k_max = self.depth();
        for k in 0..=k_max {
            if delta >= self.heights[k + 1] {
                return Some((k, false));
            }
        }
        Some((k_max, true))
    }

    fn location_from(&self, delta: f64, deepest: u32) -> Location {
        match self.level_of_depth(delta) {
            None => Location { kube: Kube::Root, chain: Vec::new(), truncated: false },
            Some((k, truncated)) => {
                let k_max = self.depth();
                let mut chain = vec![0u32; k + 1];
                let mut j = deepest;
                for level in (0..=k_max).rev() {
                    if level <= k {
                        chain[level] = j;
                    }
                    if level > 0 {
                        j = self.grid.levels[level].parent[j as usize];
                    }
                }
                Location { kube: Kube::Cell { level: k as u32, index: chain[k] }, chain, truncated }
            }
        }
    }

    /// Unique kube holding `z` and its ancestor chain.
    pub fn locate(&self, z: &CPoint) -> Location {
        let proj = self.grid.domain.project(z);
        if proj.delta >= self.heights[0] {
            return Location { kube: Kube::Root, chain: Vec::new(), truncated: false };
        }
        self.location_from(proj.delta, self.grid.nearest_deepest(&proj.point))
    }

    /// Brute-force location: linear scan of the deepest net, then membership
    /// tests against every kube.
    pub fn locate_brute(&self, z: &CPoint) -> Location {
        let proj = self.grid.domain.project(z);
        let k_max = self.depth();
        let nu = self.grid.domain.jet(&proj.point).dbar();
        let deep = &self.grid.levels[k_max];
        let mut best = (f64::INFINITY, u32::MAX);
        for (j, p) in deep.points.iter().enumerate() {
            let d = dsym(&proj.point, &nu, p, self.grid.net_normal(k_max, j));
            if (d, j as u32) < best {
                best = (d, j as u32);
            }
        }
        let mut hits = Vec::new();
        if proj.delta >= self.heights[0] {
            hits.push(Kube::Root);
        }
        for (k, j) in self.kubes() {
            let (lo, hi) = (self.heights[k + 1], self.heights[k]);
            let in_depth = (proj.delta >= lo || k == k_max) && proj.delta < hi;
            if in_depth && self.grid.ancestor(k_max, best.1, k) == j as u32 {
                hits.push(Kube::Cell { level: k as u32, index: j as u32 });
            }
        }
        assert_eq!(hits.len(), 1, "point {z:?} lies in {} kubes", hits.len());
        match hits[0] {
            Kube::Root => Location { kube: Kube::Root, chain: Vec::new(), truncated: false },
            Kube::Cell { .. } => self.location_from(proj.delta, best.1),
        }
    }

    /// Cube well inside the dense part of the sample.
    pub fn is_resolved(&self, k: usize, j: usize) -> bool {
        let members = &self.members[k][j];
        if members.len() < 24 {
            return false;
        }
        match &self.grid.sample_spec {
            SampleSpec::Uniform { .. } => true,
            SampleSpec::Graded { patches, .. } => {
                let r = self.grid.levels[k].radius;
                let pts = &self.grid.sample.points;
                patches
                    .iter()
                    .filter(|(p, _)| p.radius >= 2.0 * r)
                    .any(|(p, _)| members.iter().all(|&i| patch_core(p, &pts[i as usize])))
            }
        }
    }

    /// Regression of `log |K_j^k|` on `k` over resolved, non-empty kubes; NaN
    /// slope with fewer than two kubes.
    pub fn measure_regression(&self, levels: std::ops::RangeInclusive<usize>) -> KubeRegression {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in levels {
            for j in 0..self.cube_count(k) {
                if !self.is_empty_kube(k, j) && self.is_resolved(k, j) {
                    x.push(k as f64);
                    y.push(self.kube_measure(k, j).ln());
                }
            }
        }
        if x.len() < 2 {
            let expected = -((2 * self.n() + 2) as f64) * self.grid.config.s.ln();
            return KubeRegression { slope: f64::NAN, slope_se: f64::NAN, expected, kubes: x.len() };
        }
        let fit = fit_line(&x, &y);
        KubeRegression {
            slope: fit.slope,
            slope_se: fit.slope_se,
            expected: -((2 * self.n() + 2) as f64) * self.grid.config.s.ln(),
            kubes: x.len(),
        }
    }

    /// Smallest `|K_j^k| / |hat K_j^k|` over non-empty resolved kubes.
    pub fn kube_tent_ratio(&self) -> f64 {
        self.kubes()
            .filter(|&(k, j)| !self.is_empty_kube(k, j) && self.is_resolved(k, j))
            .map(|(k, j)| self.kube_measure(k, j) / self.tent_measure(k, j))
            .fold(1.0, f64::min)
    }

    /// Fitted ball sandwich `B(p, c r_k) subset Q subset B(p, C r_k)` over
    /// resolved cubes; returns `(c, C)`.
    pub fn sandwich_constants(&self) -> (f64, f64) {
        let g = &self.grid;
        let pts = &g.sample.points;
        let mut c_in = f64::INFINITY;
        let mut c_out: f64 = 0.0;
        for k in 1..=self.depth() {
            let r = g.levels[k].radius;
            let resolved: Vec<bool> = (0..self.cube_count(k)).map(|j| self.is_resolved(k, j)).collect();
            if !resolved.iter().any(|&b| b) {
                continue;
            }
            let mut hash = SpatialHash::new(self.n(), 2.0 * r);
            for (j, p) in g.levels[k].points.iter().enumerate() {
                if resolved[j] {
                    hash.insert(j as u32, p);
                }
            }
            let candidates: Vec<(u32, f64, bool)> = pts
                .par_iter()
                .enumerate()
                .flat_map_iter(|(i, x)| {
                    let own = g.cube_of[k][i];
                    let mut out = Vec::new();
                    hash.for_each_near(x, 2.0 * r, |j| {
                        let d = dsym(&g.levels[k].points[j as usize], g.net_normal(k, j as usize), x, g.normal(i)) / r;
                        out.push((j, d, j == own));
                    });
                    out
                })
                .collect();
            let mut inner = vec![2.0f64; self.cube_count(k)];
            for (j, d, own) in candidates {
                if !own {
                    inner[j as usize] = inner[j as usize].min(d);
                }
            }
            for j in 0..self.cube_count(k) {
                if !resolved[j] {
                    continue;
                }
                let p = &g.levels[k].points[j];
                let outer = self.members[k][j]
                    .iter()
                    .map(|&i| dsym(p, g.net_normal(k, j), &pts[i as usize], g.normal(i as usize)) / r)
                    .fold(0.0, f64::max);
                c_out = c_out.max(outer);
                c_in = c_in.min(inner[j]);
            }
        }
        (c_in, c_out)
    }

    /// Weighted quadrature of the tent `hat K_j^k`: sample points of the cube
    /// times a geometric Gauss-Legendre rule in depth.
    pub fn tent_quadrature(&self, k: usize, j: usize) -> (Vec<CPoint>, Vec<f64>) {
        self.tent_quadrature_capped(k, j, usize::MAX)
    }

    /// [`Self::tent_quadrature`] over at most `cap` member points taken with a
    /// fixed stride; weights are rescaled to keep `sigma(Q_j^k)`.
    pub fn tent_quadrature_capped(&self, k: usize, j: usize, cap: usize) -> (Vec<CPoint>, Vec<f64>) {
        let h = self.heights[k].min(self.depth_cap);
        self.slab_quadrature(k, j, 0.0, h, cap)
    }

    pub fn kube_quadrature(&self, k: usize, j: usize) -> (Vec<CPoint>, Vec<f64>) {
        let (lo, hi) = self.kube_depths(k);
        self.slab_quadrature(k, j, lo, hi, usize::MAX)
    }

    fn slab_quadrature(&self, k: usize, j: usize, lo: f64, hi: f64, cap: usize) -> (Vec<CPoint>, Vec<f64>) {
        let rule = gauss_legendre(4);
        // Geometric strata towards the lower end when it touches the boundary.
        let mut strata = Vec::new();
        if lo == 0.0 {
            let mut top = hi;
            for _ in 0..16 {
                strata.push((0.5 * top, top));
                top *= 0.5;
            }
            strata.push((0.0, top));
        } else if hi > lo {
            strata.push((lo, hi));
        }
        let mut nodes = Vec::new();
        for (a, b) in strata {
            for (x, w) in rule.0.iter().zip(&rule.1) {
                nodes.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
            }
        }
        let g = &self.grid;
        let members = &self.members[k][j];
        let stride = members.len().div_ceil(cap.max(1)).max(1);
        let chosen: Vec<u32> = members.iter().step_by(stride).copied().collect();
        let picked: f64 = chosen.iter().map(|&i| g.sample.weights[i as usize]).sum();
        let rescale = if picked > 0.0 { self.sigma[k][j] / picked } else { 0.0 };
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for &i in &chosen {
            let zeta = g.sample.points[i as usize];
            let sw = g.sample.weights[i as usize] * rescale;
            for &(t, w) in &nodes {
                let jac = g.domain.normal_flow_jacobian(&zeta, t);
                pts.push(self.at_depth(&zeta, t));
                wts.push(sw * w * jac);
            }
        }
        (pts, wts)
    }

    /// Largest exact Kobayashi distance from `c_j^k` to sampled points of
    /// `K_j^k` on the ball, maximized over kubes; stored as `beta`.
    pub fn calibrate_beta(&mut self) -> f64 {
        assert!(self.grid.domain.is_ball(), "beta calibration uses the exact ball distance");
        let pts = &self.grid.sample.points;
        let mut beta: f64 = 0.0;
        for (k, j) in self.kubes() {
            if self.is_empty_kube(k, j) {
                continue;
            }
            let (lo, hi) = self.kube_depths(k);
            let c = self.center(k, j);
            for &i in &self.members[k][j] {
                for t in [lo, 0.5 * (lo + hi), hi * (1.0 - 1e-12)] {
                    beta = beta.max(ball_kobayashi(&c, &self.at_depth(&pts[i as usize], t)));
                }
            }
        }
        self.beta = Some(beta);
        beta
    }

    /// Refinement of `K_j^k` into `n_ref` depth shells
    /// `[c_{l-1} h_{k+1}, c_l h_{k+1})`, `c_l = 1 + l (s^2 - 1) / n_ref`, each
    /// split by a greedy net of radius `R_j / n_ref` (`R_j` the cube's outer
    /// radius about `p_j^k`) grown from the reference point.
    pub fn refine(&self, k: usize, j: usize, n_ref: usize) -> Vec<RefinedPiece> {
        let g = &self.grid;
        let pts = &g.sample.points;
        let members = &self.members[k][j];
        let p = g.levels[k].points[j];
        let nu_p = *g.net_normal(k, j);
        let outer = members
            .iter()
            .map(|&i| dsym(&p, &nu_p, &pts[i as usize], g.normal(i as usize)))
            .fold(0.0, f64::max);
        let radius = outer * (1.0 + 1e-12) / n_ref as f64;
        let mut centers: Vec<(CPoint, CPoint)> = vec![(p, nu_p)];
        for &i in members {
            let x = &pts[i as usize];
            let nx = g.normal(i as usize);
            if centers.iter().all(|(c, nc)| dsym(c, nc, x, nx) > radius) {
                centers.push((*x, *nx));
            }
        }
        let mut parts: Vec<Vec<u32>> = vec![Vec::new(); centers.len()];
        for &i in members {
            let x = &pts[i as usize];
            let nx = g.normal(i as usize);
            let mut best = (f64::INFINITY, 0usize);
            for (ci, (c, nc)) in centers.iter().enumerate() {
                let d = dsym(c, nc, x, nx);
                if d < best.0 {
                    best = (d, ci);
                }
            }
            parts[best.1].push(i);
        }
        let s2 = g.config.s * g.config.s;
        let base = self.heights[k + 1];
        let cap = self.depth_cap;
        let mut out = Vec::new();
        for l in 1..=n_ref {
            let c0 = 1.0 + (l - 1) as f64 * (s2 - 1.0) / n_ref as f64;
            let c1 = 1.0 + l as f64 * (s2 - 1.0) / n_ref as f64;
            let depth = ((c0 * base).min(cap), (c1 * base).min(cap));
            if depth.0 >= depth.1 {
                continue;
            }
            for part in &parts {
                if !part.is_empty() {
                    out.push(RefinedPiece { shell: l, depth, members: part.clone() });
                }
            }
        }
        out
    }

    /// Refinement statistics over the given kubes; `beta'` uses the exact
    /// ball distance from the first sampled point of each piece.
    pub fn refine_report(&self, kubes: &[(usize, usize)], n_ref: usize) -> RefineReport {
        let pts = &self.grid.sample.points;
        let ball = self.grid.domain.is_ball();
        let mut boundary_pieces = 0;
        let mut max_pieces = 0;
        let mut beta: f64 = 0.0;
        for &(k, j) in kubes {
            let pieces = self.refine(k, j, n_ref);
            max_pieces = max_pieces.max(pieces.len());
            let per_shell = pieces.iter().filter(|p| p.shell == pieces.first().map_or(0, |q| q.shell)).count();
            boundary_pieces = boundary_pieces.max(per_shell);
            if !ball {
                continue;
            }
            for piece in &pieces {
                let (lo, hi) = piece.depth;
                let mid = 0.5 * (lo + hi);
                let c = self.at_depth(&pts[piece.members[0] as usize], mid);
                for &i in &piece.members {
                    for t in [lo, mid, hi * (1.0 - 1e-12)] {
                        beta = beta.max(ball_kobayashi(&c, &self.at_depth(&pts[i as usize], t)));
                    }
                }
            }
        }
        RefineReport { n_ref, boundary_pieces, max_pieces, beta }
    }
}

/// For each boundary ball `B(zeta_i, r)` (centred at sample point `i`), looks
/// for cubes `Q_1 subset B subset Q_2` among all grids with both measure
/// ratios at most `cap`. All grids must share one sample.
pub fn adjacent_audit(systems: &[DyadicSystem], balls: &[(usize, f64)], cap: f64) -> AdjacentAudit {
    let g0 = &systems[0].grid;
    let pts = &g0.sample.points;
    let w = &g0.sample.weights;
    let results: Vec<Option<f64>> = balls
        .par_iter()
        .map(|&(i, r)| {
            let zeta = &pts[i];
            let nz = g0.normal(i);
            let inside: Vec<u32> = (0..pts.len() as u32)
                .filter(|&x| (pts[x as usize] - *zeta).norm() < r && dsym(zeta, nz, &pts[x as usize], g0.normal(x as usize)) < r)
                .collect();
            let sigma_b: f64 = inside.iter().map(|&x| w[x as usize]).sum();
            let mut best_outer = f64::INFINITY;
            let mut best_inner = f64::INFINITY;
            for sys in systems {
                let g = &sys.grid;
                for k in 0..=sys.depth() {
                    let cube = g.cube_of[k][i];
                    if inside.iter().all(|&x| g.cube_of[k][x as usize] == cube) {
                        best_outer = best_outer.min(sys.sigma[k][cube as usize] / sigma_b);
                    }
                    let members = &sys.members[k][cube as usize];
                    let contained = members
                        .iter()
                        .all(|&x| dsym(zeta, nz, &pts[x as usize], g.normal(x as usize)) < r);
                    if contained {
                        best_inner = best_inner.min(sigma_b / sys.sigma[k][cube as usize]);
                    }
                }
            }
            let worst = best_outer.max(best_inner);
            (worst <= cap).then_some(worst)
        })
        .collect();
    let fitted = results.iter().flatten().cloned().fold(1.0, f64::max);
    AdjacentAudit { balls: balls.len(), successes: results.iter().flatten().count(), fitted }
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid, GridConfig, SampleSpec};
    use super::*;
    use crate::domain::Domain;

    fn disk_system() -> DyadicSystem {
        let d = Domain::ball(1);
        let g = build_grid(&d, GridConfig::new(2.0, 0.7, 4, 11), SampleSpec::Uniform { count: 40_000, seed: 3 }).unwrap();
        DyadicSystem::new(g)
    }

    #[test]
    fn kube_heights_follow_the_tent_rule() {
        let s = disk_system();
        for k in 0..s.depth() {
            let (lo, hi) = s.kube_depths(k);
            assert_eq!(lo, 0.7f64.powi(2) * 4f64.powi(-(k as i32) - 1));
            assert_eq!(hi, 0.7f64.powi(2) * 4f64.powi(-(k as i32)));
        }
    }

    #[test]
    fn centers_locate_in_their_own_kube() {
        let s = disk_system();
        for (k, j) in s.kubes().filter(|&(k, _)| k < 3) {
            let loc = s.locate(&s.center(k, j));
            assert_eq!(loc.kube, Kube::Cell { level: k as u32, index: j as u32 });
        }
    }

    #[test]
    fn deep_interior_is_the_root_slab() {
        let s = disk_system();
        assert_eq!(s.locate(&CPoint::zeros(1)).kube, Kube::Root);
    }

    #[test]
    fn locate_matches_brute_force() {
        let s = disk_system();
        let h = crate::qmc::ScrambledHalton::new(2, 5);
        for i in 0..300 {
            let u = h.point(i);
            let z = CPoint::new(&[crate::cvec::C64::from_polar(1.0 - 10f64.powf(-4.0 * u[0]), std::f64::consts::TAU * u[1])]);
            assert_eq!(s.locate(&z), s.locate_brute(&z));
        }
    }

    #[test]
    fn truncated_depth_is_flagged() {
        let s = disk_system();
        let z = CPoint::from_real(&[1.0 - 1e-6]);
        let loc = s.locate(&z);
        assert!(loc.truncated);
        assert!(matches!(loc.kube, Kube::Cell { level, .. } if level as usize == s.depth()));
    }

    #[test]
    fn identity_refinement() {
        let s = disk_system();
        for (k, j) in [(1, 0), (2, 3)] {
            let pieces = s.refine(k, j, 1);
            assert_eq!(pieces.len(), 1);
            assert_eq!(pieces[0].members, s.members[k][j]);
            assert_eq!(pieces[0].depth, s.kube_depths(k));
        }
    }

    #[test]
    fn kube_and_tent_measures_nest() {
        let s = disk_system();
        for (k, j) in [(1, 0), (2, 1)] {
            let tent = s.tent_measure(k, j);
            let kube = s.kube_measure(k, j);
            assert!(kube > 0.0 && kube < tent);
            let (_, w) = s.tent_quadrature(k, j);
            let q: f64 = w.iter().sum();
            assert!((q - tent).abs() < 1e-6 * tent, "{q} vs {tent}");
        }
    }
}
