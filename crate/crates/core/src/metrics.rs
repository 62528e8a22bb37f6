//! Two-point functions: the boundary Box quasi-metric, `F(z, w)`, the
//! Levi-polynomial kernels `g` and `g_eps`, the Kobayashi proxy `k(z, w)` with
//! the exact ball distance, Kobayashi balls and normal/tangential polydisks.

use rand::Rng;
use thiserror::Error;

use crate::cvec::{CPoint, C64, MAX_DIM};
use crate::domain::{split_normal, unitary_frame, Domain, LeviChart, Projection};
use crate::numeric::{fit_line, smoothstep5};
use crate::qmc::{ball_point, rng_for, sphere_point, ScrambledHalton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point is not on the boundary: rho = {rho:e}")]
    NotOnBoundary { rho: f64 },
    #[error("box radius {r} is not below r0 = {r0}")]
    RadiusTooLarge { r: f64, r0: f64 },
    #[error("exact Kobayashi distance requested on a domain without that oracle")]
    NoExactOracle,
    #[error("degenerate gradient at the base point; no normal frame")]
    DegenerateFrame,
}

const BOUNDARY_TOL: f64 = 1e-8;

fn on_boundary(domain: &Domain, p: &CPoint) -> Result<(), MetricError> {
    let rho = domain.rho(p);
    if rho.abs() > BOUNDARY_TOL {
        Err(MetricError::NotOnBoundary { rho })
    } else {
        Ok(())
    }
}

/// `d_B` with a precomputed `dbar rho(zeta)`.
#[inline]
pub fn quasidist_with(dbar_zeta: &CPoint, zeta: &CPoint, xi: &CPoint) -> f64 {
    let d = *zeta - *xi;
    (dbar_zeta.inner(&d).norm() + d.norm_sqr()).sqrt()
}

/// Box quasi-metric `d_B(zeta, xi) = (|<dbar rho(zeta), zeta - xi>| + |zeta - xi|^2)^{1/2}`.
pub fn boundary_quasidist(domain: &Domain, zeta: &CPoint, xi: &CPoint) -> Result<f64, MetricError> {
    on_boundary(domain, zeta)?;
    on_boundary(domain, xi)?;
    Ok(quasidist_with(&domain.jet(zeta).dbar(), zeta, xi))
}

/// Largest admissible Box radius.
pub fn box_radius_limit(domain: &Domain) -> f64 {
    domain.tubular_radius().sqrt()
}

/// `xi in Box(zeta, r)`: `|Z_N| < r^2` and `|Z_H| < r` for `Z = xi - zeta`.
pub fn box_set_membership(domain: &Domain, zeta: &CPoint, r: f64, xi: &CPoint) -> Result<bool, MetricError> {
    on_boundary(domain, zeta)?;
    on_boundary(domain, xi)?;
    let r0 = box_radius_limit(domain);
    if r >= r0 {
        return Err(MetricError::RadiusTooLarge { r, r0 });
    }
    let (zn, zh) = split_normal(&domain.jet(zeta).dbar(), &(*xi - *zeta));
    Ok(zn.norm() < r * r && zh.norm() < r)
}

/// `F(z, w) = |rho(w)| + |rho(z)| + |Im <dbar rho(w), w - z>| + |w - z|^2`.
#[inline]
pub fn big_f(domain: &Domain, z: &CPoint, w: &CPoint) -> f64 {
    let jw = domain.jet(w);
    let d = *w - *z;
    jw.rho.abs() + domain.rho(z).abs() + jw.dbar().inner(&d).im.abs() + d.norm_sqr()
}

/// Which Hessian enters the Levi polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GVariant {
    Exact,
    /// Mollified holomorphic Hessian with sup-error below the given value.
    Mollified(f64),
}

/// Cutoff `chi(|w - z|^2)`.
#[inline]
pub fn chi(chart: LeviChart, dist_sqr: f64) -> f64 {
    match chart {
        LeviChart::Global => 1.0,
        LeviChart::Local { mu } => 1.0 - smoothstep5((dist_sqr - 0.5 * mu) / (0.5 * mu)),
    }
}

/// Levi polynomial `P_w(z)` with the given holomorphic Hessian.
fn levi_polynomial(grad: &CPoint, hol: &crate::cvec::CMat, w: &CPoint, z: &CPoint) -> C64 {
    let d = *z - *w;
    grad.dot(&d) + 0.5 * hol.bilinear_form(&d)
}

/// `g(w, z) = -rho(w) - chi P_w(z) + (1 - chi) |w - z|^2`.
pub fn levi_g(domain: &Domain, w: &CPoint, z: &CPoint, variant: GVariant) -> C64 {
    let jet = domain.jet(w);
    let hol = match variant {
        GVariant::Exact => jet.hol,
        GVariant::Mollified(eps) => domain.mollified_hessian(w, eps).tau,
    };
    let dist = (*w - *z).norm_sqr();
    let c = chi(domain.chart(), dist);
    let mut g = C64::new(-jet.rho, 0.0);
    if c > 0.0 {
        g -= levi_polynomial(&jet.grad, &hol, w, z) * c;
    }
    if c < 1.0 {
        g += (1.0 - c) * dist;
    }
    g
}

/// Picks the Levi chart: global if `Re g >= c (|rho(w)| + |rho(z)| + |w - z|^2)`
/// holds on a sample of pairs with `chi = 1`, otherwise the largest passing `mu`.
pub fn calibrate_levi_chart(domain: &Domain) -> LeviChart {
    const FLOOR: f64 = 0.1;
    let n = domain.dim();
    let h = ScrambledHalton::new(2 * n + 2, 0xC4A7);
    let pairs: Vec<(CPoint, CPoint)> = (0..3000u64)
        .map(|i| {
            let u = h.point(i);
            let dir_z = sphere_point(n, &u[..2 * n - 1]);
            let dir_w = sphere_point(n, &u[1..2 * n]);
            let sz = 10f64.powf(-3.0 * u[2 * n]);
            let sw = 10f64.powf(-3.0 * u[2 * n + 1]);
            let z = domain.radial_boundary_point(&dir_z) * (1.0 - sz);
            let w = domain.radial_boundary_point(&dir_w) * (1.0 - sw);
            (z, w)
        })
        .collect();
    let passes = |chart: LeviChart| {
        let mut probe = domain.clone();
        probe.set_chart(chart);
        pairs.iter().all(|(z, w)| {
            let g = levi_g(&probe, w, z, GVariant::Exact);
            let lower = domain.rho(w).abs() + domain.rho(z).abs() + (*w - *z).norm_sqr();
            g.re >= FLOOR * lower
        })
    };
    if passes(LeviChart::Global) {
        return LeviChart::Global;
    }
    for mu in [2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.02] {
        if passes(LeviChart::Local { mu }) {
            return LeviChart::Local { mu };
        }
    }
    LeviChart::Local { mu: 0.01 }
}

/// `k(z, w)` from cached projections, with `d_B` standing in for `d_H`.
pub fn kobayashi_proxy_from(domain: &Domain, pz: &Projection, pw: &Projection) -> f64 {
    let db = quasidist_with(&domain.jet(&pz.point).dbar(), &pz.point, &pw.point);
    let sz = pz.delta.sqrt();
    let sw = pw.delta.sqrt();
    let denom = (sz * sw).sqrt();
    2.0 * ((db + sz.max(sw)) / denom).ln()
}

/// Kobayashi proxy `k(z, w)`.
pub fn kobayashi_proxy(domain: &Domain, z: &CPoint, w: &CPoint) -> f64 {
    kobayashi_proxy_from(domain, &domain.project(z), &domain.project(w))
}

/// Ball automorphism `phi_z` exchanging `z` and `0`.
pub fn ball_automorphism(z: &CPoint, w: &CPoint) -> CPoint {
    let zz = z.norm_sqr();
    if zz == 0.0 {
        return -*w;
    }
    let wz = w.inner(z);
    let pw = *z * (wz / zz);
    let qw = *w - pw;
    let s = (1.0 - zz).sqrt();
    (*z - pw - qw * s) * (1.0 / (C64::new(1.0, 0.0) - wz))
}

/// `1 - |phi_z(w)|^2` on the ball, computed without cancellation.
#[inline]
pub fn ball_pseudo_gap(z: &CPoint, w: &CPoint) -> f64 {
    let a = 1.0 - z.norm_sqr();
    let b = 1.0 - w.norm_sqr();
    a * b / (C64::new(1.0, 0.0) - w.inner(z)).norm_sqr()
}

/// Exact Kobayashi distance on the unit ball, `arctanh |phi_z(w)|`.
pub fn ball_kobayashi(z: &CPoint, w: &CPoint) -> f64 {
    if z == w {
        return 0.0;
    }
    let gap = ball_pseudo_gap(z, w).min(1.0);
    let t = (1.0 - gap).sqrt();
    // arctanh t = 0.5 ln((1 + t) / (1 - t)) with 1 - t = gap / (1 + t)
    0.5 * ((1.0 + t) * (1.0 + t) / gap).ln()
}

pub fn kobayashi_exact_ball(domain: &Domain, z: &CPoint, w: &CPoint) -> Result<f64, MetricError> {
    if !domain.oracles().exact_kobayashi {
        return Err(MetricError::NoExactOracle);
    }
    Ok(ball_kobayashi(z, w))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BallMode {
    Exact,
    /// Tri-state classification with additive slack `C_BB` around the proxy.
    Sandwich { slack: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KobayashiBallSpec {
    pub center: CPoint,
    pub radius: f64,
    pub mode: BallMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    Uncertain,
}

impl Membership {
    /// Weight given to the point in a ball average (uncertain band counts half).
    pub fn weight(self) -> f64 {
        match self {
            Membership::Inside => 1.0,
            Membership::Outside => 0.0,
            Membership::Uncertain => 0.5,
        }
    }
}

/// Slack used by sandwich-mode balls when nothing else is configured; fitted
/// by [`bb_sandwich_sweep`] on the ball.
pub const DEFAULT_BB_SLACK: f64 = 2.0;

impl KobayashiBallSpec {
    pub fn for_domain(domain: &Domain, center: CPoint, radius: f64) -> Self {
        let mode = if domain.oracles().exact_kobayashi {
            BallMode::Exact
        } else {
            BallMode::Sandwich { slack: DEFAULT_BB_SLACK }
        };
        KobayashiBallSpec { center, radius, mode }
    }

    pub fn membership(&self, domain: &Domain, w: &CPoint) -> Membership {
        if *w == self.center {
            return Membership::Inside;
        }
        match self.mode {
            BallMode::Exact => {
                if ball_kobayashi(&self.center, w) < self.radius {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
            BallMode::Sandwich { slack } => {
                let k = kobayashi_proxy(domain, &self.center, w);
                self.classify_proxy(k, slack)
            }
        }
    }

    /// Sandwich classification of a precomputed proxy value.
    pub fn classify_proxy(&self, k: f64, slack: f64) -> Membership {
        if k + slack < self.radius {
            Membership::Inside
        } else if k - slack > self.radius {
            Membership::Outside
        } else {
            Membership::Uncertain
        }
    }
}

/// Normal/tangential frame at `pi(z)` for polydisk tests.
#[derive(Clone, Copy, Debug)]
pub struct PolyFrame {
    pub center: CPoint,
    pub frame: [CPoint; MAX_DIM],
    pub delta: f64,
}

impl PolyFrame {
    pub fn at(domain: &Domain, z: &CPoint) -> Result<PolyFrame, MetricError> {
        let proj = domain.project(z);
        let nu = domain.jet(&proj.point).dbar();
        if !(nu.norm() > 1e-12) {
            return Err(MetricError::DegenerateFrame);
        }
        Ok(PolyFrame { center: *z, frame: unitary_frame(&nu), delta: proj.delta })
    }

    /// Coordinates of `w - z` in the frame (first entry is the normal one).
    pub fn coords(&self, w: &CPoint) -> CPoint {
        let d = *w - self.center;
        let n = d.dim();
        let mut c = CPoint::zeros(n);
        for j in 0..n {
            c[j] = d.inner(&self.frame[j]);
        }
        c
    }

    /// Point with frame coordinates `c`.
    pub fn point(&self, c: &CPoint) -> CPoint {
        let n = c.dim();
        let mut p = self.center;
        for j in 0..n {
            p = p + self.frame[j] * c[j];
        }
        p
    }

    /// Smallest `r` with `w` in the closed polydisk `P(z, r)`.
    pub fn gauge(&self, w: &CPoint) -> f64 {
        let c = self.coords(w);
        let mut g = c[0].norm();
        for j in 1..c.dim() {
            g = g.max(c[j].norm_sqr());
        }
        g
    }

    pub fn contains(&self, r: f64, w: &CPoint) -> bool {
        let c = self.coords(w);
        c[0].norm() < r && (1..c.dim()).all(|j| c[j].norm() < r.sqrt())
    }
}

/// `w in P(z, r)`: `|Z_1| < r` in the normal direction and `|Z_j| < r^{1/2}`
/// in each tangential direction of the frame at `pi(z)`.
pub fn polydisk_membership(domain: &Domain, z: &CPoint, r: f64, w: &CPoint) -> Result<bool, MetricError> {
    if w == z {
        return Ok(r > 0.0);
    }
    Ok(PolyFrame::at(domain, z)?.contains(r, w))
}

/// Empirical `a(r)`, `A(r)` with `P(z, a delta) in E(z, r) in P(z, A delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolydiskFit {
    pub r: f64,
    pub inner: f64,
    pub outer: f64,
}

/// Fits `a(r)` and `A(r)` on the ball against the exact Kobayashi ball.
pub fn polydisk_sandwich_audit(n: usize, r: f64, deltas: &[f64], samples: usize, seed: u64) -> PolydiskFit {
    let domain = Domain::ball(n);
    let mut inner = f64::INFINITY;
    let mut outer: f64 = 0.0;
    let mut rng = rng_for(seed, 0x9017);
    let t = r.tanh();
    for &delta in deltas {
        let z = CPoint::basis(n, 0) * (1.0 - delta);
        let frame = PolyFrame::at(&domain, &z).expect("ball frame");
        for _ in 0..samples {
            // Points of E(z, r) come from the automorphism image of B(0, tanh r);
            // candidates outside come from a generous polydisk around z.
            let u: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
            let inside = ball_automorphism(&z, &(ball_point(n, &u) * t));
            outer = outer.max(frame.gauge(&inside) / delta);
            let v: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
            let big = 4.0 * outer.max(1.0) * delta;
            let mut c = CPoint::zeros(n);
            c[0] = C64::from_polar(big * v[0].sqrt(), std::f64::consts::TAU * v[1]);
            for j in 1..n {
                c[j] = C64::from_polar(big.sqrt() * v[2 * j].sqrt(), std::f64::consts::TAU * v[2 * j + 1]);
            }
            let cand = frame.point(&c);
            if domain.contains(&cand) && ball_kobayashi(&z, &cand) >= r {
                inner = inner.min(frame.gauge(&cand) / delta);
            }
        }
    }
    PolydiskFit { r, inner, outer }
}

/// Worst ratio `F(z, zeta_1) / F(z, zeta_2)` over `zeta_1, zeta_2 in E(w, r)`
/// for each boundary-distance level of `w` (ball only).
pub fn local_constancy_audit(n: usize, r: f64, deltas: &[f64], samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let domain = Domain::ball(n);
    let t = r.tanh();
    let mut rng = rng_for(seed, 0x10c4);
    deltas
        .iter()
        .map(|&delta| {
            let mut worst: f64 = 1.0;
            for _ in 0..samples {
                let dir: Vec<f64> = (0..2 * n - 1).map(|_| rng.random()).collect();
                let w = sphere_point(n, &dir) * (1.0 - delta);
                let zu: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
                let z = ball_point(n, &zu);
                let a: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
                let b: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
                let z1 = ball_automorphism(&w, &(ball_point(n, &a) * t));
                let z2 = ball_automorphism(&w, &(ball_point(n, &b) * t));
                let ratio = big_f(&domain, &z, &z1) / big_f(&domain, &z, &z2);
                worst = worst.max(ratio).max(1.0 / ratio);
            }
            (delta, worst)
        })
        .collect()
}

/// Fitted `C_eps` in `d_K <= C_eps (F^{2(n+1)} / (|rho(z)| |rho(w)|)^{n+1})^eps`
/// on the ball, together with the largest observed `d_K`.
pub fn metric_estimate_audit(n: usize, eps: f64, pairs: usize, seed: u64) -> (f64, f64) {
    let domain = Domain::ball(n);
    let mut rng = rng_for(seed, 0xde57);
    let mut c_fit: f64 = 0.0;
    let mut dmax: f64 = 0.0;
    for _ in 0..pairs {
        let mut pick = || {
            let u: Vec<f64> = (0..2 * n - 1).map(|_| rng.random()).collect();
            let delta = 10f64.powf(-4.0 * rng.random::<f64>());
            sphere_point(n, &u) * (1.0 - delta)
        };
        let z = pick();
        let w = pick();
        let dk = ball_kobayashi(&z, &w);
        let f = big_f(&domain, &z, &w);
        let q = f.powi(2 * (n as i32 + 1)) / (domain.rho(&z).abs() * domain.rho(&w).abs()).powi(n as i32 + 1);
        c_fit = c_fit.max(dk / q.powf(eps));
        dmax = dmax.max(dk);
    }
    (c_fit, dmax)
}

/// Sup and per-decade means of `|k - d_K|` on the ball.
#[derive(Clone, Debug)]
pub struct BbSweep {
    pub sup: f64,
    /// `(decade lower edge, mean |k - d_K|, count)`.
    pub decades: Vec<(f64, f64, usize)>,
}

impl BbSweep {
    pub fn decade_spread(&self) -> f64 {
        let means: Vec<f64> = self.decades.iter().filter(|d| d.2 > 0).map(|d| d.1).collect();
        let hi = means.iter().cloned().fold(0.0, f64::max);
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Pairs with both boundary distances log-uniform in `[delta_lo, delta_hi]`
/// and angular separations log-uniform over three decades; decades keyed by
/// `delta(z)`.
pub fn bb_sandwich_sweep(n: usize, pairs: usize, delta_lo: f64, delta_hi: f64, seed: u64) -> BbSweep {
    let domain = Domain::ball(n);
    let mut rng = rng_for(seed, 0xbb00);
    let n_dec = (delta_hi / delta_lo).log10().round() as usize;
    let mut sums = vec![(0.0, 0usize); n_dec];
    let mut sup: f64 = 0.0;
    let (llo, lhi) = (delta_lo.ln(), delta_hi.ln());
    for _ in 0..pairs {
        let dz = (llo + (lhi - llo) * rng.random::<f64>()).exp();
        let dw = (llo + (lhi - llo) * rng.random::<f64>()).exp();
        let u: Vec<f64> = (0..2 * n - 1).map(|_| rng.random()).collect();
        let dir_z = sphere_point(n, &u);
        let v: Vec<f64> = (0..2 * n - 1).map(|_| rng.random()).collect();
        let other = sphere_point(n, &v);
        let angle = 10f64.powf(-3.0 * rng.random::<f64>());
        let mix = (dir_z * angle.cos() + (other - dir_z * other.inner(&dir_z)).normalized() * angle.sin()).normalized();
        let z = dir_z * (1.0 - dz);
        let w = mix * (1.0 - dw);
        let gap = (kobayashi_proxy(&domain, &z, &w) - ball_kobayashi(&z, &w)).abs();
        sup = sup.max(gap);
        let idx = (((dz / delta_lo).log10()).floor() as usize).min(n_dec - 1);
        sums[idx].0 += gap;
        sums[idx].1 += 1;
    }
    let decades = sums
        .iter()
        .enumerate()
        .map(|(i, &(s, c))| (delta_lo * 10f64.powi(i as i32), if c > 0 { s / c as f64 } else { 0.0 }, c))
        .collect();
    BbSweep { sup, decades }
}

/// Ratio `d_H / d_B` where `d_H` is approximated by shortest paths over a
/// graph whose edges are nearly horizontal chords of a sphere sample.
#[derive(Clone, Debug)]
pub struct BallBoxFit {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pairs: usize,
}

impl BallBoxFit {
    pub fn constant(&self) -> f64 {
        self.max_ratio.max(1.0 / self.min_ratio)
    }
}

pub fn ballbox_path_audit(sample: usize, pairs: usize, seed: u64) -> BallBoxFit {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let n = 2;
    let h = ScrambledHalton::new(3, seed);
    let pts: Vec<CPoint> = (0..sample as u64).map(|i| sphere_point(n, &h.point(i))).collect();
    let reach = 3.2 * (2.0 * std::f64::consts::PI.powi(2) / sample as f64).powf(1.0 / 3.0);
    // Edge if the chord is short and its complex-normal part is second order.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pts.len()];
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = pts[j] - pts[i];
            let len = d.norm();
            if len < reach {
                let (zn, zh) = split_normal(&pts[i], &d);
                if zn.norm() <= len * len {
                    let w = zh.norm().max(len * 0.5);
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }
    }
    let mut rng = rng_for(seed, 0xd1a);
    let mut fit = BallBoxFit { min_ratio: f64::INFINITY, max_ratio: 0.0, pairs: 0 };
    for _ in 0..pairs {
        let s = rng.random_range(0..pts.len());
        let t = rng.random_range(0..pts.len());
        if s == t {
            continue;
        }
        let mut dist = vec![f64::INFINITY; pts.len()];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(Reverse((ordered(0.0), s)));
        while let Some(Reverse((d, u))) = heap.pop() {
            let d = f64::from_bits(d);
            if u == t {
                break;
            }
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((ordered(nd), v)));
                }
            }
        }
        if dist[t].is_finite() {
            let db = quasidist_with(&pts[s], &pts[s], &pts[t]);
            let ratio = dist[t] / db;
            fit.min_ratio = fit.min_ratio.min(ratio);
            fit.max_ratio = fit.max_ratio.max(ratio);
            fit.pairs += 1;
        }
    }
    fit
}

/// Order-preserving key for non-negative floats in a heap.
fn ordered(x: f64) -> u64 {
    x.to_bits()
}

/// Quasi-triangle constant `K_q` with `d_B(a, c) <= K_q (d_B(a, b) + d_B(b, c))`
/// over random sphere triples.
pub fn quasi_triangle_audit(n: usize, triples: usize, seed: u64) -> f64 {
    let mut rng = rng_for(seed, 0x7a1);
    let mut worst: f64 = 0.0;
    for _ in 0..triples {
        let mut pick = || {
            let u: Vec<f64> = (0..2 * n - 1).map(|_| rng.random()).collect();
            sphere_point(n, &u)
        };
        let (a, b, c) = (pick(), pick(), pick());
        let lhs = quasidist_with(&a, &a, &c);
        let rhs = quasidist_with(&a, &a, &b) + quasidist_with(&b, &b, &c);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    worst
}

/// Slope of `log |E(z, r)|` against `log delta(z)` on the ball; the volume law
/// predicts `n + 1`.
pub fn kobayashi_volume_slope(n: usize, r: f64, deltas: &[f64]) -> f64 {
    // E(z, r) = phi_z(B(0, t)) is an ellipsoid with one complex axis of
    // length t (1 - |z|^2) / (1 - t^2 |z|^2) and n - 1 of length
    // t sqrt(1 - |z|^2) / sqrt(1 - t^2 |z|^2).
    let t = r.tanh();
    let unit = std::f64::consts::PI.powi(n as i32) / (1..=n).product::<usize>() as f64;
    let logs: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let s = (1.0 - d) * (1.0 - d);
            let q = 1.0 - t * t * s;
            let a = t * (1.0 - s) / q;
            let b = t * ((1.0 - s) / q).sqrt();
            (unit * a * a * b.powi(2 * (n as i32 - 1))).ln()
        })
        .collect();
    let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    fit_line(&x, &logs).slope
}
