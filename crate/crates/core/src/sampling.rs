//! Quadrature over `D` and `bD`.
//!
//! Interior clouds are multiple-importance mixtures: every point is drawn by one
//! proposal and weighted by `1 / sum_c N_c q_c(x)` (balance heuristic), so
//! overlapping proposals stay unbiased. Boundary-distance shells make the
//! near-boundary tail visible; polydisk proposals around a base point resolve
//! integrands that peak there.

use rayon::prelude::*;
use thiserror::Error;

use crate::cvec::{CPoint, C64};
use crate::domain::{Domain, Projection};
use crate::metrics::{big_f, kobayashi_proxy_from, BallMode, KobayashiBallSpec, Membership, PolyFrame};
use crate::numeric::{fit_line, fit_power_offset, Kahan, PowerOffsetFit};
use crate::qmc::{ball_point, derive_seed, sphere_point, ScrambledHalton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("shell ({lo:e}, {hi:e}] captured no points")]
    ShellStarved { lo: f64, hi: f64 },
    #[error("integrand is not finite at point {index} ({point:?})")]
    NonFinite { index: usize, point: CPoint },
    #[error("quadrature standard error {se:e} exceeds 10% of the estimate {value:e}")]
    NoisyEstimate { value: f64, se: f64 },
    #[error("invalid sampling parameter: {0}")]
    BadParameter(String),
}

/// Surface area of the unit sphere `S^{2n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powi(n as i32) / (1..n).product::<usize>() as f64
}

/// Volume of the unit ball of `C^n`.
pub fn ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powi(n as i32) / (1..=n).product::<usize>() as f64
}

/// Geometric boundary-distance shells `(2^{-m-1}, 2^{-m}]`, closed off by
/// `(0, edge]` below the smallest edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Shells {
    /// Decreasing edges; shell `i` is `(edges[i + 1], edges[i]]`, last edge 0.
    pub edges: Vec<f64>,
}

impl Shells {
    pub fn dyadic(top: f64, delta_min: f64) -> Shells {
        let mut edges = vec![top];
        let mut e = top;
        while e / 2.0 >= delta_min {
            e /= 2.0;
            edges.push(e);
        }
        edges.push(0.0);
        Shells { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i + 1], self.edges[i])
    }

    /// Index of the shell holding `delta`.
    pub fn index_of(&self, delta: f64) -> Option<usize> {
        (0..self.len()).find(|&i| {
            let (lo, hi) = self.bounds(i);
            delta > lo && delta <= hi
        })
    }
}

/// One proposal of an interior mixture.
#[derive(Clone, Debug)]
pub enum Proposal {
    /// Boundary point with uniform direction, pushed inward along the normal by
    /// a uniform distance in `(lo, hi]`.
    Shell { lo: f64, hi: f64 },
    /// Uniform in the cube `[-h, h]^{2n}`.
    Core { half_width: f64 },
    /// Uniform in the polydisk `P(z, r)` of the frame.
    Polydisk { frame: PolyFrame, r: f64 },
}

impl Proposal {
    fn map(&self, domain: &Domain, u: &[f64]) -> Option<CPoint> {
        let n = domain.dim();
        let x = match self {
            Proposal::Shell { lo, hi } => {
                let dir = sphere_point(n, &u[..2 * n - 1]);
                let s = lo + (hi - lo) * u[2 * n - 1];
                if !domain.is_ball() && s >= domain.tubular_radius() {
                    return None;
                }
                if domain.is_ball() {
                    dir * (1.0 - s)
                } else {
                    let zeta = domain.radial_boundary_point(&dir);
                    zeta + domain.inward_normal(&zeta) * s
                }
            }
            Proposal::Core { half_width } => {
                let re: Vec<f64> = u[..2 * n].iter().map(|t| (2.0 * t - 1.0) * half_width).collect();
                CPoint::from_real_pairs(n, &re)
            }
            Proposal::Polydisk { frame, r } => {
                use std::f64::consts::TAU;
                let mut c = CPoint::zeros(n);
                c[0] = C64::from_polar(r * u[0].sqrt(), TAU * u[1]);
                for j in 1..n {
                    c[j] = C64::from_polar(r.sqrt() * u[2 * j].sqrt(), TAU * u[2 * j + 1]);
                }
                frame.point(&c)
            }
        };
        (domain.contains(&x) && x.is_finite()).then_some(x)
    }

    /// Density of the proposal at `x` with respect to volume.
    fn density(&self, domain: &Domain, x: &CPoint, proj: &Projection) -> f64 {
        let n = domain.dim();
        match self {
            Proposal::Shell { lo, hi } => {
                let d = proj.delta;
                if !(d > *lo && d <= *hi) {
                    return 0.0;
                }
                if domain.is_ball() {
                    return 1.0 / (sphere_area(n) * (hi - lo) * (1.0 - d).powi(2 * n as i32 - 1));
                }
                if d >= domain.tubular_radius() {
                    return 0.0;
                }
                let zeta = proj.point;
                let radius = zeta.norm();
                let dir = zeta * (1.0 / radius);
                let cos = dir.inner(&(-domain.inward_normal(&zeta))).re;
                let p_sigma = cos / (sphere_area(n) * radius.powi(2 * n as i32 - 1));
                let jac = domain.normal_flow_jacobian(&zeta, d);
                if jac <= 0.0 {
                    return 0.0;
                }
                p_sigma / ((hi - lo) * jac)
            }
            Proposal::Core { half_width } => {
                let inside = x.coords().iter().all(|c| c.re.abs() <= *half_width && c.im.abs() <= *half_width);
                if inside {
                    (2.0 * half_width).powi(-(2 * n as i32))
                } else {
                    0.0
                }
            }
            Proposal::Polydisk { frame, r } => {
                if frame.contains(*r, x) {
                    1.0 / (std::f64::consts::PI.powi(n as i32) * r.powi(n as i32 + 1))
                } else {
                    0.0
                }
            }
        }
    }
}

/// A mixture of proposals with a draw count each.
#[derive(Clone, Debug, Default)]
pub struct Design {
    pub proposals: Vec<(Proposal, usize)>,
}

impl Design {
    pub fn push(&mut self, p: Proposal, count: usize) {
        if count > 0 {
            self.proposals.push((p, count));
        }
    }

    /// Shell proposals, plus a core proposal when normal coordinates do not
    /// reach the centre of the domain.
    pub fn shells(domain: &Domain, shells: &Shells, per_shell: usize) -> Design {
        let mut d = Design::default();
        for i in 0..shells.len() {
            let (lo, hi) = shells.bounds(i);
            d.push(Proposal::Shell { lo, hi }, per_shell);
        }
        if !domain.is_ball() {
            d.push(Proposal::Core { half_width: domain.outer_radius() }, per_shell);
        }
        d
    }

    /// Shells plus polydisks `P(z, r)` at doubling radii from `delta(z) / 2`
    /// until the polydisk covers the domain.
    pub fn local(domain: &Domain, z: &CPoint, shells: &Shells, per_shell: usize, per_scale: usize) -> Design {
        let mut d = Design::shells(domain, shells, per_shell);
        let frame = PolyFrame::at(domain, z).expect("interior point has a normal frame");
        let mut r = 0.5 * frame.delta;
        let cover = 2.0 * domain.outer_radius();
        loop {
            d.push(Proposal::Polydisk { frame, r }, per_scale);
            if r >= cover {
                break;
            }
            r *= 2.0;
        }
        d
    }
}

/// Weighted interior quadrature points.
#[derive(Clone, Debug)]
pub struct SampleCloud {
    pub n: usize,
    pub points: Vec<CPoint>,
    pub weights: Vec<f64>,
    pub delta: Vec<f64>,
    pub foot: Vec<CPoint>,
    /// Proposal that drew each point.
    pub source: Vec<u32>,
    /// Draws per proposal, rejected ones included.
    pub draws: Vec<usize>,
    pub seed: u64,
}

/// Estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateC {
    pub value: C64,
    pub se: f64,
}

impl SampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Draws the mixture; proposals run in parallel, results are concatenated
    /// in proposal order.
    pub fn build(domain: &Domain, design: &Design, seed: u64) -> SampleCloud {
        let n = domain.dim();
        let drawn: Vec<Vec<CPoint>> = design
            .proposals
            .par_iter()
            .enumerate()
            .map(|(c, (prop, count))| {
                let h = ScrambledHalton::new(2 * n, derive_seed(seed, c as u64));
                let mut u = vec![0.0; 2 * n];
                (0..*count as u64)
                    .filter_map(|i| {
                        h.fill(i + 1, &mut u);
                        prop.map(domain, &u)
                    })
                    .collect()
            })
            .collect();
        let tagged: Vec<(u32, CPoint)> =
            drawn.iter().enumerate().flat_map(|(c, pts)| pts.iter().map(move |p| (c as u32, *p))).collect();
        let evaluated: Vec<Option<(u32, CPoint, Projection, f64)>> = tagged
            .par_iter()
            .map(|(c, x)| {
                let proj = domain.project(x);
                let total: f64 =
                    design.proposals.iter().map(|(p, count)| *count as f64 * p.density(domain, x, &proj)).sum();
                (total > 0.0 && total.is_finite()).then(|| (*c, *x, proj, 1.0 / total))
            })
            .collect();
        let mut cloud = SampleCloud {
            n,
            points: Vec::new(),
            weights: Vec::new(),
            delta: Vec::new(),
            foot: Vec::new(),
            source: Vec::new(),
            draws: design.proposals.iter().map(|(_, c)| *c).collect(),
            seed,
        };
        for (c, x, proj, w) in evaluated.into_iter().flatten() {
            cloud.points.push(x);
            cloud.weights.push(w);
            cloud.delta.push(proj.delta);
            cloud.foot.push(proj.point);
            cloud.source.push(c);
        }
        cloud
    }

    /// Quadrature of precomputed values `f_i`; non-finite entries are errors.
    pub fn integrate_values(&self, f: &[f64]) -> Result<Estimate, SamplingError> {
        let mut value = Kahan::new();
        let mut sum = vec![Kahan::new(); self.draws.len()];
        let mut sum_sq = vec![Kahan::new(); self.draws.len()];
        for (i, (&fi, &w)) in f.iter().zip(&self.weights).enumerate() {
            if !fi.is_finite() {
                return Err(SamplingError::NonFinite { index: i, point: self.points[i] });
            }
            let t = fi * w;
            value.add(t);
            let c = self.source[i] as usize;
            sum[c].add(t);
            sum_sq[c].add(t * t);
        }
        let mut var = Kahan::new();
        for (c, &draws) in self.draws.iter().enumerate() {
            if draws < 2 {
                continue;
            }
            let m = draws as f64;
            let s = sum[c].value();
            let vc = ((sum_sq[c].value() - s * s / m) / (m - 1.0)).max(0.0);
            var.add(m * vc);
        }
        Ok(Estimate { value: value.value(), se: var.value().sqrt() })
    }

    pub fn integrate(&self, f: impl Fn(usize, &CPoint) -> f64) -> Result<Estimate, SamplingError> {
        let vals: Vec<f64> = self.points.iter().enumerate().map(|(i, p)| f(i, p)).collect();
        self.integrate_values(&vals)
    }

    pub fn integrate_complex(&self, f: &[C64]) -> Result<EstimateC, SamplingError> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let a = self.integrate_values(&re)?;
        let b = self.integrate_values(&im)?;
        Ok(EstimateC { value: C64::new(a.value, b.value), se: a.se.hypot(b.se) })
    }

    pub fn volume(&self) -> Estimate {
        self.integrate_values(&vec![1.0; self.len()]).expect("constant integrand")
    }

    /// Number of points per shell of `shells`.
    pub fn shell_counts(&self, shells: &Shells) -> Vec<usize> {
        let mut counts = vec![0; shells.len()];
        for &d in &self.delta {
            if let Some(i) = shells.index_of(d) {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Interior cloud from `n_pts` shell draws; the shells share the budget evenly.
pub fn sample_interior(domain: &Domain, n_pts: usize, shells: &Shells, seed: u64) -> Result<SampleCloud, SamplingError> {
    if n_pts == 0 || shells.is_empty() {
        return Err(SamplingError::BadParameter("need at least one point and one shell".into()));
    }
    let slots = shells.len() + usize::from(!domain.is_ball());
    let per = n_pts.div_ceil(slots);
    let cloud = SampleCloud::build(domain, &Design::shells(domain, shells, per), seed);
    let counts = cloud.shell_counts(shells);
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            let (lo, hi) = shells.bounds(i);
            return Err(SamplingError::ShellStarved { lo, hi });
        }
    }
    Ok(cloud)
}

/// Plain uniform cloud (rejection from the bounding cube) for comparisons.
pub fn sample_plain(domain: &Domain, n_pts: usize, seed: u64) -> SampleCloud {
    let mut d = Design::default();
    d.push(Proposal::Core { half_width: domain.outer_radius() }, n_pts);
    SampleCloud::build(domain, &d, seed)
}

/// Cloud concentrated around `z` (see [`Design::local`]).
pub fn sample_local(domain: &Domain, z: &CPoint, per_scale: usize, seed: u64) -> SampleCloud {
    let shells = Shells::dyadic(1.0_f64.min(domain.inradius()), 1e-3);
    let design = Design::local(domain, z, &shells, per_scale / 4, per_scale);
    SampleCloud::build(domain, &design, seed)
}

/// Weighted boundary sample; weights are in surface-measure units.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub points: Vec<CPoint>,
    pub weights: Vec<f64>,
}

impl BoundarySample {
    pub fn measure(&self) -> f64 {
        self.weights.iter().copied().collect::<Kahan>().value()
    }
}

/// Boundary sample from uniform sphere directions pushed out radially.
pub fn sample_boundary(domain: &Domain, count: usize, seed: u64) -> BoundarySample {
    let n = domain.dim();
    let h = ScrambledHalton::new(2 * n - 1, derive_seed(seed, 0xb0));
    let mut u = vec![0.0; 2 * n - 1];
    let mut points = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for i in 0..count as u64 {
        h.fill(i + 1, &mut u);
        let dir = sphere_point(n, &u);
        let zeta = domain.radial_boundary_point(&dir);
        let radius = zeta.norm();
        let cos = dir.inner(&(-domain.inward_normal(&zeta))).re;
        let p_sigma = cos / (sphere_area(n) * radius.powi(2 * n as i32 - 1));
        points.push(zeta);
        weights.push(1.0 / (count as f64 * p_sigma));
    }
    BoundarySample { points, weights }
}

/// Box-shaped patch of the unit sphere in coordinates
/// `zeta = (sqrt(1 - |v|^2) e^{i theta}, v)`, where `dsigma = dV(v) dtheta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePatch {
    /// Tangential radius of the `v` ball (centred at `v = 0`).
    pub radius: f64,
    /// Half-width of the `theta` interval centred at 0.
    pub half_angle: f64,
}

impl SpherePatch {
    fn sigma_measure(&self, n: usize) -> f64 {
        let v_vol = if n == 1 { 1.0 } else { ball_volume(n - 1) * self.radius.powi(2 * (n as i32 - 1)) };
        v_vol * 2.0 * self.half_angle
    }

    fn contains(&self, zeta: &CPoint) -> bool {
        let n = zeta.dim();
        let v: f64 = (1..n).map(|j| zeta[j].norm_sqr()).sum::<f64>().sqrt();
        v < self.radius && zeta[0].arg().abs() < self.half_angle
    }

    fn point(&self, n: usize, u: &[f64]) -> CPoint {
        let theta = (2.0 * u[0] - 1.0) * self.half_angle;
        if n == 1 {
            return CPoint::new(&[C64::from_polar(1.0, theta)]);
        }
        let v = ball_point(n - 1, &u[1..2 * n - 1]) * self.radius;
        let mut c = CPoint::zeros(n);
        c[0] = C64::from_polar((1.0 - v.norm_sqr()).max(0.0).sqrt(), theta);
        for j in 1..n {
            c[j] = v[j - 1];
        }
        c
    }
}

/// Sphere sample graded towards `(1, 0, ...)`: a uniform part plus patches,
/// weighted by the balance heuristic.
pub fn sample_sphere_graded(n: usize, uniform: usize, patches: &[(SpherePatch, usize)], seed: u64) -> BoundarySample {
    let area = sphere_area(n);
    let mut pts: Vec<CPoint> = Vec::new();
    let h = ScrambledHalton::new(2 * n - 1, derive_seed(seed, 0xb1));
    let mut u = vec![0.0; 2 * n - 1];
    for i in 0..uniform as u64 {
        h.fill(i + 1, &mut u);
        pts.push(sphere_point(n, &u));
    }
    for (k, (patch, count)) in patches.iter().enumerate() {
        let h = ScrambledHalton::new(2 * n - 1, derive_seed(seed, 0xb2 + k as u64));
        for i in 0..*count as u64 {
            h.fill(i + 1, &mut u);
            pts.push(patch.point(n, &u));
        }
    }
    let weights = pts
        .par_iter()
        .map(|z| {
            let mut q = uniform as f64 / area;
            for (patch, count) in patches {
                if patch.contains(z) {
                    q += *count as f64 / patch.sigma_measure(n);
                }
            }
            1.0 / q
        })
        .collect();
    BoundarySample { points: pts, weights }
}

/// Quadrature of a Kobayashi ball `E(z, r)`: `cloud.weights` already carry
/// the membership weight, so `sum w_i` estimates `|E(z, r)|`.
#[derive(Clone, Debug)]
pub struct BallCloud {
    pub cloud: SampleCloud,
    /// Share of the weight carried by points of the uncertain band.
    pub uncertain: f64,
}

impl BallCloud {
    pub fn volume(&self) -> f64 {
        self.cloud.weights.iter().copied().collect::<Kahan>().value()
    }

    /// Weighted mean of precomputed values.
    pub fn mean(&self, f: &[C64]) -> C64 {
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        for (v, w) in f.iter().zip(&self.cloud.weights) {
            re.add(v.re * w);
            im.add(v.im * w);
        }
        C64::new(re.value(), im.value()) / self.volume()
    }
}

/// On the ball `E(z, r) = phi_z(tanh(r) B)` is the ellipsoid with centre
/// `(1 - t^2) z / (1 - t^2 |z|^2)`, normal semi-axis `t q` and tangential
/// semi-axes `t q^{1/2}`, `q = (1 - |z|^2) / (1 - t^2 |z|^2)`; it is sampled
/// uniformly. Elsewhere a polydisk around `z` is sampled and classified in
/// sandwich mode.
pub fn sample_kobayashi_ball(domain: &Domain, z: &CPoint, r: f64, count: usize, seed: u64) -> Result<BallCloud, SamplingError> {
    if !(r > 0.0) || count == 0 {
        return Err(SamplingError::BadParameter(format!("need r > 0 and points, got r = {r}, count = {count}")));
    }
    let n = domain.dim();
    let spec = KobayashiBallSpec::for_domain(domain, *z, r);
    if domain.is_ball() {
        let t = r.tanh();
        let zz = z.norm_sqr();
        let q = (1.0 - zz) / (1.0 - t * t * zz);
        let centre = *z * ((1.0 - t * t) / (1.0 - t * t * zz));
        let frame = crate::domain::unitary_frame(&if zz > 0.0 { *z } else { CPoint::basis(n, 0) });
        let (a_n, a_t) = (t * q, t * q.sqrt());
        let volume = ball_volume(n) * a_n * a_n * a_t.powi(2 * (n as i32 - 1));
        let h = ScrambledHalton::new(2 * n, derive_seed(seed, 0xe1));
        let mut u = vec![0.0; 2 * n];
        let mut points = Vec::with_capacity(count);
        for i in 0..count as u64 {
            h.fill(i + 1, &mut u);
            let v = ball_point(n, &u);
            let mut w = centre + frame[0] * (v[0] * a_n);
            for j in 1..n {
                w = w + frame[j] * (v[j] * a_t);
            }
            points.push(w);
        }
        let proj: Vec<Projection> = points.iter().map(|w| domain.project(w)).collect();
        let cloud = SampleCloud {
            n,
            weights: vec![volume / count as f64; count],
            delta: proj.iter().map(|p| p.delta).collect(),
            foot: proj.iter().map(|p| p.point).collect(),
            source: vec![0; count],
            draws: vec![count],
            points,
            seed,
        };
        return Ok(BallCloud { cloud, uncertain: 0.0 });
    }
    let frame = PolyFrame::at(domain, z).map_err(|e| SamplingError::BadParameter(e.to_string()))?;
    let slack = match spec.mode {
        BallMode::Sandwich { slack } => slack,
        BallMode::Exact => 0.0,
    };
    // k(z, w) <= r + slack forces |Z_1| and |Z_j|^2 below e^{r + slack} delta(z)
    // up to the Ball-Box factor; the factor 4 covers it on the registry.
    let radius = (4.0 * (r + slack).exp() * frame.delta).min(2.0 * domain.outer_radius());
    let mut design = Design::default();
    design.push(Proposal::Polydisk { frame, r: radius }, count);
    let mut cloud = SampleCloud::build(domain, &design, seed);
    let pz = domain.project(z);
    let mut uncertain = Kahan::new();
    let mut total = Kahan::new();
    for i in 0..cloud.len() {
        let pw = Projection { point: cloud.foot[i], delta: cloud.delta[i], far: false };
        let m = if cloud.points[i] == *z {
            Membership::Inside
        } else {
            spec.classify_proxy(kobayashi_proxy_from(domain, &pz, &pw), slack)
        };
        cloud.weights[i] *= m.weight();
        total.add(cloud.weights[i]);
        if m == Membership::Uncertain {
            uncertain.add(cloud.weights[i]);
        }
    }
    let total = total.value();
    Ok(BallCloud { cloud, uncertain: if total > 0.0 { uncertain.value() / total } else { 0.0 } })
}

/// Rudin-Forelli integrand `|rho(w)|^a / F(z, w)^{n + 1 + a + b}`.
pub fn rudin_forelli_integrand(domain: &Domain, z: &CPoint, w: &CPoint, a: f64, b: f64) -> f64 {
    let n = domain.dim() as f64;
    domain.rho(w).abs().powf(a) / big_f(domain, z, w).powf(n + 1.0 + a + b)
}

#[derive(Clone, Debug)]
pub struct RudinForelliFit {
    pub a: f64,
    pub b: f64,
    /// `(delta(z), estimate)` per base point.
    pub samples: Vec<(f64, Estimate)>,
    pub slope: f64,
    /// Exponent fit `I ~ A |rho|^{slope} + B`, absorbing the bounded
    /// lower-order part.
    pub offset_fit: PowerOffsetFit,
    /// `max_z I(z) |rho(z)|^b`.
    pub constant: f64,
}

/// Fits `log I(z)` against `log |rho(z)|` over base points on the ray through
/// `(1, 0, ...)`.
pub fn rudin_forelli_audit(
    domain: &Domain,
    a: f64,
    b: f64,
    deltas: &[f64],
    per_scale: usize,
    seed: u64,
) -> Result<RudinForelliFit, SamplingError> {
    if !(a > -1.0 && b > 0.0) {
        return Err(SamplingError::BadParameter(format!("need a > -1 and b > 0, got a = {a}, b = {b}")));
    }
    let n = domain.dim();
    let samples: Vec<(f64, Estimate)> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let z = CPoint::basis(n, 0) * (domain.inradius() - d);
            let cloud = sample_local(domain, &z, per_scale, derive_seed(seed, i as u64));
            let est = cloud.integrate(|_, w| rudin_forelli_integrand(domain, &z, w, a, b))?;
            if est.se > 0.1 * est.value {
                return Err(SamplingError::NoisyEstimate { value: est.value, se: est.se });
            }
            Ok((domain.rho(&z).abs(), est))
        })
        .collect::<Result<_, _>>()?;
    let x: Vec<f64> = samples.iter().map(|(r, _)| r.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|(_, e)| e.value.ln()).collect();
    let slope = fit_line(&x, &y).slope;
    let rho: Vec<f64> = samples.iter().map(|(r, _)| *r).collect();
    let vals: Vec<f64> = samples.iter().map(|(_, e)| e.value).collect();
    let offset_fit = fit_power_offset(&rho, &vals);
    let constant = samples.iter().map(|(r, e)| e.value * r.powf(b)).fold(0.0, f64::max);
    Ok(RudinForelliFit { a, b, samples, slope, offset_fit, constant })
}

/// Tail constant `max_z |rho(z)|^b int_{D \ E(z, r)} ...` on the ball for each `r`.
pub fn rudin_forelli_tail(n: usize, a: f64, b: f64, radii: &[f64], deltas: &[f64], per_scale: usize, seed: u64) -> Vec<f64> {
    let domain = Domain::ball(n);
    let clouds: Vec<(CPoint, SampleCloud)> = deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let z = CPoint::basis(n, 0) * (1.0 - d);
            let c = sample_local(&domain, &z, per_scale, derive_seed(seed, i as u64));
            (z, c)
        })
        .collect();
    radii
        .iter()
        .map(|&r| {
            clouds
                .iter()
                .map(|(z, cloud)| {
                    let ball = KobayashiBallSpec::for_domain(&domain, *z, r);
                    let est = cloud
                        .integrate(|_, w| {
                            let outside = 1.0 - ball.membership(&domain, w).weight();
                            outside * rudin_forelli_integrand(&domain, z, w, a, b)
                        })
                        .expect("finite integrand");
                    est.value * domain.rho(z).abs().powf(b)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    #[test]
    fn shells_cover_down_to_zero() {
        let s = Shells::dyadic(1.0, 1e-3);
        assert_eq!(s.edges.first(), Some(&1.0));
        assert_eq!(s.edges.last(), Some(&0.0));
        assert_eq!(s.index_of(0.75), Some(0));
        assert_eq!(s.index_of(1e-6), Some(s.len() - 1));
    }

    #[test]
    fn ball_volume_from_shells() {
        for n in [1, 2] {
            let d = Domain::ball(n);
            let c = sample_interior(&d, 20_000, &Shells::dyadic(1.0, 1e-3), 1).unwrap();
            let v = c.volume();
            assert!((v.value - ball_volume(n)).abs() <= 3.0 * v.se + 1e-12, "{v:?}");
        }
    }

    #[test]
    fn deepest_shell_is_populated() {
        let d = Domain::ball(2);
        let shells = Shells::dyadic(1.0, 1e-3);
        let c = sample_interior(&d, 100_000, &shells, 2).unwrap();
        assert!(c.delta.iter().any(|&x| x < 1e-3));
        let counts = c.shell_counts(&shells);
        assert!(counts.iter().all(|&k| k >= 100_000 / (4 * shells.len())));
    }

    #[test]
    fn half_space_and_rho_integrals_on_the_disk() {
        let d = Domain::ball(1);
        let c = sample_interior(&d, 40_000, &Shells::dyadic(1.0, 1e-3), 3).unwrap();
        let half = c.integrate(|_, w| if w[0].re > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let v = c.volume();
        assert!((half.value - v.value / 2.0).abs() <= 3.0 * half.se + 1e-9);
        let r = c.integrate(|_, w| d.rho(w).abs()).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() <= 3.0 * r.se + 1e-9, "{r:?}");
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let d = Domain::ball(1);
        let c = sample_interior(&d, 100, &Shells::dyadic(1.0, 0.1), 3).unwrap();
        let err = c.integrate(|i, _| if i == 5 { f64::NAN } else { 1.0 }).unwrap_err();
        assert!(matches!(err, SamplingError::NonFinite { index: 5, .. }));
    }

    #[test]
    fn perturbed_ball_volume_matches_plain_sampling() {
        let d = Domain::new(DomainSpec::PerturbedBall { n: 2, eps: 0.05 }).unwrap();
        let s = sample_interior(&d, 20_000, &Shells::dyadic(0.5, 1e-3), 4).unwrap().volume();
        let p = sample_plain(&d, 200_000, 5).volume();
        assert!((s.value - p.value).abs() <= 3.0 * s.se.hypot(p.se), "{s:?} vs {p:?}");
    }

    #[test]
    fn local_cloud_reproduces_volume() {
        let d = Domain::ball(2);
        let z = CPoint::basis(2, 0) * 0.999;
        let v = sample_local(&d, &z, 2000, 6).volume();
        assert!((v.value - ball_volume(2)).abs() <= 3.0 * v.se, "{v:?}");
    }

    #[test]
    fn graded_sphere_sample_has_sphere_area() {
        let patches = [(SpherePatch { radius: 0.2, half_angle: 0.04 }, 4000)];
        let s = sample_sphere_graded(2, 20_000, &patches, 7);
        assert!((s.measure() - sphere_area(2)).abs() < 0.02 * sphere_area(2));
        assert!(s.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn same_seed_same_cloud() {
        let d = Domain::ball(2);
        let a = sample_interior(&d, 1000, &Shells::dyadic(1.0, 0.01), 9).unwrap();
        let b = sample_interior(&d, 1000, &Shells::dyadic(1.0, 0.01), 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn ellipsoid_ball_cloud_matches_the_oracle() {
        let d = Domain::ball(2);
        let z = CPoint::from_real_pairs(2, &[0.9, 0.0, 0.1, 0.2]);
        let r = 1.3;
        let bc = sample_kobayashi_ball(&d, &z, r, 4000, 5).unwrap();
        assert!(bc.cloud.points.iter().all(|w| crate::metrics::ball_kobayashi(&z, w) < r + 1e-9));
        // Independent volume: indicator of the exact ball over a local cloud.
        let local = sample_local(&d, &z, 20_000, 6);
        let est = local.integrate(|_, w| f64::from(crate::metrics::ball_kobayashi(&z, w) < r)).unwrap();
        assert!((bc.volume() - est.value).abs() < 3.0 * est.se + 1e-12, "{} vs {est:?}", bc.volume());
    }

    #[test]
    fn sandwich_ball_cloud_has_positive_mass() {
        let d = Domain::new(crate::domain::DomainSpec::PerturbedBall { n: 2, eps: 0.05 }).unwrap();
        let z = CPoint::from_real_pairs(2, &[0.0, 0.0, 0.9, 0.0]);
        let bc = sample_kobayashi_ball(&d, &z, 1.0, 2000, 3).unwrap();
        assert!(bc.volume() > 0.0);
        assert!(bc.uncertain > 0.0 && bc.uncertain <= 1.0);
    }
}
