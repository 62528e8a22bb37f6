//! Model domains given by a defining function, with the geometry every other
//! module consumes: derivatives of `rho`, boundary distance, nearest-point
//! projection and the Levi form on the complex tangent space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cvec::{c64, CMat, CPoint, MAX_DIM};
use crate::numeric::{gauss_legendre, gl_integrate};
use crate::qmc::{sphere_point, ScrambledHalton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("dimension mismatch: domain has n = {expected}, point has n = {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projected Newton did not converge from {point:?} (residual {residual:e})")]
    ProjectionDiverged { point: CPoint, residual: f64 },
    #[error("point is not on the boundary: rho = {rho:e}")]
    NotOnBoundary { rho: f64 },
    #[error("invalid domain parameter: {0}")]
    BadParameter(String),
}

/// Domain selection as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball { n: usize },
    Ellipsoid { n: usize, weights: Vec<f64> },
    PerturbedBall { n: usize, eps: f64 },
}

impl DomainSpec {
    pub fn n(&self) -> usize {
        match self {
            DomainSpec::Ball { n } | DomainSpec::Ellipsoid { n, .. } | DomainSpec::PerturbedBall { n, .. } => *n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Ball,
    Ellipsoid([f64; MAX_DIM]),
    /// `|z|^2 - 1 + eps |Re z_1|^{5/2}`: C^2 but not C^3 across `Re z_1 = 0`.
    PerturbedBall(f64),
}

/// Where the Levi polynomial is used undamped in `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeviChart {
    /// `chi = 1` for every pair of points.
    Global,
    /// `chi = 1` on `|w - z|^2 <= mu / 2`, `chi = 0` on `|w - z|^2 >= mu`.
    Local { mu: f64 },
}

/// Exact oracles a domain provides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Oracles {
    pub exact_projection: bool,
    pub exact_kobayashi: bool,
    pub exact_bergman_kernel: bool,
}

/// Value and first/second Wirtinger derivatives of `rho` at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub rho: f64,
    /// `d rho / d z_j`.
    pub grad: CPoint,
    /// `d^2 rho / d z_j d zbar_k`, Hermitian.
    pub levi: CMat,
    /// `d^2 rho / d z_j d z_k`, symmetric.
    pub hol: CMat,
}

impl Jet {
    /// `dbar rho`: components `d rho / d zbar_j`.
    pub fn dbar(&self) -> CPoint {
        self.grad.conj()
    }

    /// Euclidean gradient in real coordinates `(x_1, y_1, ...)`.
    pub fn real_gradient(&self) -> DVector<f64> {
        let n = self.grad.dim();
        DVector::from_fn(2 * n, |i, _| {
            let g = self.grad[i / 2];
            if i % 2 == 0 {
                2.0 * g.re
            } else {
                -2.0 * g.im
            }
        })
    }

    /// Real Hessian in coordinates `(x_1, y_1, ...)`.
    pub fn real_hessian(&self) -> DMatrix<f64> {
        let n = self.grad.dim();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                let q = self.hol.a[j][k];
                let l = self.levi.a[j][k];
                h[(2 * j, 2 * k)] = 2.0 * (q.re + l.re);
                h[(2 * j + 1, 2 * k + 1)] = 2.0 * (l.re - q.re);
                h[(2 * j, 2 * k + 1)] = 2.0 * (l.im - q.im);
                h[(2 * j + 1, 2 * k)] = -2.0 * (l.im + q.im);
            }
        }
        h
    }
}

/// Nearest boundary point of an interior point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: CPoint,
    pub delta: f64,
    /// Beyond the far-interior threshold the projection is only one of the
    /// minimizers.
    pub far: bool,
}

/// Splitting `Z = Z_N + Z_H` at a boundary point and the Levi value of `Z_H`.
#[derive(Clone, Copy, Debug)]
pub struct LeviSplit {
    pub normal: CPoint,
    pub horizontal: CPoint,
    pub value: f64,
}

/// Smooth approximant of the holomorphic Hessian and its `dbar` derivatives.
#[derive(Clone, Copy, Debug)]
pub struct MollifiedHessian {
    pub tau: CMat,
    /// `dbar_tau[k].a[j][l] = d tau_{jl} / d wbar_k`.
    pub dbar_tau: [CMat; MAX_DIM],
}

#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    n: usize,
    shape: Shape,
    chart: LeviChart,
    inradius: f64,
    tubular_radius: f64,
    boundary_seed: Vec<CPoint>,
}

/// Far-interior threshold as a fraction of the inradius.
pub const FAR_INTERIOR_FRACTION: f64 = 0.3;

const PROJECTION_TOL: f64 = 1e-13;

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Domain, DomainError> {
        let n = spec.n();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(DomainError::BadParameter(format!("n = {n} not in 1..={MAX_DIM}")));
        }
        let shape = match &spec {
            DomainSpec::Ball { .. } => Shape::Ball,
            DomainSpec::Ellipsoid { weights, .. } => {
                if weights.len() != n || weights.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    return Err(DomainError::BadParameter(format!(
                        "ellipsoid needs {n} positive weights, got {weights:?}"
                    )));
                }
                let mut a = [1.0; MAX_DIM];
                a[..n].copy_from_slice(weights);
                Shape::Ellipsoid(a)
            }
            DomainSpec::PerturbedBall { eps, .. } => {
                if !(*eps >= 0.0 && *eps < 0.5) {
                    return Err(DomainError::BadParameter(format!("perturbation eps = {eps} not in [0, 0.5)")));
                }
                Shape::PerturbedBall(*eps)
            }
        };
        let mut d = Domain {
            spec,
            n,
            shape,
            chart: LeviChart::Global,
            inradius: 1.0,
            tubular_radius: 1.0,
            boundary_seed: Vec::new(),
        };
        let seed_count = 512usize << (2 * (n - 1));
        let h = ScrambledHalton::new(2 * n - 1, 0x5eed);
        d.boundary_seed = (0..seed_count as u64)
            .map(|i| d.radial_boundary_point(&sphere_point(n, &h.point(i))))
            .collect();
        d.inradius = match shape {
            Shape::Ball => 1.0,
            Shape::Ellipsoid(a) => 1.0 / a[..n].iter().cloned().fold(0.0, f64::max).sqrt(),
            Shape::PerturbedBall(_) => d.radial_boundary(&CPoint::basis(n, 0)),
        };
        d.tubular_radius = match shape {
            Shape::Ball => 1.0,
            _ => d.calibrate_tubular_radius(),
        };
        if let Shape::PerturbedBall(_) = shape {
            d.chart = crate::metrics::calibrate_levi_chart(&d);
        }
        Ok(d)
    }

    pub fn ball(n: usize) -> Domain {
        Domain::new(DomainSpec::Ball { n }).expect("ball dimension in range")
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_ball(&self) -> bool {
        self.shape == Shape::Ball
    }

    pub fn oracles(&self) -> Oracles {
        let ball = self.is_ball();
        Oracles { exact_projection: ball, exact_kobayashi: ball, exact_bergman_kernel: ball }
    }

    pub fn chart(&self) -> LeviChart {
        self.chart
    }

    pub(crate) fn set_chart(&mut self, chart: LeviChart) {
        self.chart = chart;
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Radius of the boundary neighbourhood where the projection is unique.
    pub fn tubular_radius(&self) -> f64 {
        self.tubular_radius
    }

    /// Euclidean radius of a ball containing the domain.
    pub fn outer_radius(&self) -> f64 {
        match self.shape {
            Shape::Ball | Shape::PerturbedBall(_) => 1.0,
            Shape::Ellipsoid(a) => 1.0 / a[..self.n].iter().cloned().fold(f64::INFINITY, f64::min).sqrt(),
        }
    }

    fn check_dim(&self, z: &CPoint) -> Result<(), DomainError> {
        if z.dim() == self.n {
            Ok(())
        } else {
            Err(DomainError::DimensionMismatch { expected: self.n, got: z.dim() })
        }
    }

    #[inline]
    pub fn rho(&self, z: &CPoint) -> f64 {
        match self.shape {
            Shape::Ball => z.norm_sqr() - 1.0,
            Shape::Ellipsoid(a) => z.coords().iter().zip(&a).map(|(c, w)| w * c.norm_sqr()).sum::<f64>() - 1.0,
            Shape::PerturbedBall(eps) => z.norm_sqr() - 1.0 + eps * z[0].re.abs().powf(2.5),
        }
    }

    pub fn contains(&self, z: &CPoint) -> bool {
        self.rho(z) < 0.0
    }

    pub fn eval_defining(&self, z: &CPoint) -> Result<Jet, DomainError> {
        self.check_dim(z)?;
        Ok(self.jet(z))
    }

    /// Unchecked version of [`Domain::eval_defining`].
    pub fn jet(&self, z: &CPoint) -> Jet {
        let n = self.n;
        let mut levi = CMat::identity(n);
        let mut hol = CMat::zeros(n);
        let mut grad = z.conj();
        match self.shape {
            Shape::Ball => {}
            Shape::Ellipsoid(a) => {
                for j in 0..n {
                    grad[j] *= a[j];
                    levi.a[j][j] = c64(a[j], 0.0);
                }
            }
            Shape::PerturbedBall(eps) => {
                let x = z[0].re;
                let d1 = 2.5 * eps * x.abs().powf(1.5) * x.signum();
                let d2 = 3.75 * eps * x.abs().sqrt();
                grad[0] += d1 / 2.0;
                levi.a[0][0] += d2 / 4.0;
                hol.a[0][0] += c64(d2 / 4.0, 0.0);
            }
        }
        Jet { rho: self.rho(z), grad, levi, hol }
    }

    /// Holomorphic Hessian replaced by a mollified approximant whose sup-error
    /// is below `eps`; smooth registry domains return the exact Hessian.
    pub fn mollified_hessian(&self, w: &CPoint, eps: f64) -> MollifiedHessian {
        let n = self.n;
        let mut out = MollifiedHessian { tau: self.jet(w).hol, dbar_tau: [CMat::zeros(n); MAX_DIM] };
        if let Shape::PerturbedBall(p) = self.shape {
            if p > 0.0 {
                let amp = 0.9375 * p;
                let width = (eps / amp).powi(2).min(4.0);
                let (m, dm) = mollified_sqrt_abs(w[0].re, width);
                out.tau.a[0][0] = c64(amp * m, 0.0);
                out.dbar_tau[0].a[0][0] = c64(amp * dm / 2.0, 0.0);
            }
        }
        out
    }

    /// Boundary radius along the unit direction `u` (all registry domains are
    /// star-shaped about the origin).
    pub fn radial_boundary(&self, u: &CPoint) -> f64 {
        match self.shape {
            Shape::Ball => 1.0 / u.norm(),
            Shape::Ellipsoid(a) => {
                1.0 / u.coords().iter().zip(&a).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt()
            }
            Shape::PerturbedBall(eps) => {
                let q = u.norm_sqr();
                let x = u[0].re.abs();
                let mut t = 1.0 / q.sqrt();
                for _ in 0..60 {
                    let f = q * t * t + eps * (x * t).powf(2.5) - 1.0;
                    let df = 2.0 * q * t + 2.5 * eps * x.powf(2.5) * t.powf(1.5);
                    let dt = f / df;
                    t -= dt;
                    if dt.abs() < 1e-15 {
                        break;
                    }
                }
                t
            }
        }
    }

    pub fn radial_boundary_point(&self, u: &CPoint) -> CPoint {
        *u * self.radial_boundary(u)
    }

    /// Cached coarse boundary sample used to seed projections.
    pub fn boundary_seed(&self) -> &[CPoint] {
        &self.boundary_seed
    }

    fn nearest_seed(&self, z: &CPoint) -> CPoint {
        let mut best = self.boundary_seed[0];
        let mut best_d = f64::INFINITY;
        for p in &self.boundary_seed {
            let d = (*p - *z).norm_sqr();
            if d < best_d {
                best_d = d;
                best = *p;
            }
        }
        best
    }

    /// Nearest boundary point `pi(z)` and `delta(z) = |z - pi(z)|`.
    pub fn boundary_project(&self, z: &CPoint) -> Result<Projection, DomainError> {
        self.check_dim(z)?;
        if self.is_ball() {
            let r = z.norm();
            let point = if r > 0.0 { *z * (1.0 / r) } else { CPoint::basis(self.n, 0) };
            let delta = (1.0 - r).abs();
            return Ok(Projection { point, delta, far: delta > FAR_INTERIOR_FRACTION * self.inradius });
        }
        let start = self.nearest_seed(z);
        match self.newton_project(z, &start) {
            Ok(point) => {
                let delta = (point - *z).norm();
                Ok(Projection { point, delta, far: delta > FAR_INTERIOR_FRACTION * self.inradius })
            }
            Err(e) => {
                // Deep points: any minimizer is acceptable there.
                let delta_seed = (start - *z).norm();
                if delta_seed > FAR_INTERIOR_FRACTION * self.inradius {
                    Ok(Projection { point: start, delta: delta_seed, far: true })
                } else {
                    Err(e)
                }
            }
        }
    }

    /// Projection that never fails: falls back to the seed minimizer.
    pub fn project(&self, z: &CPoint) -> Projection {
        self.boundary_project(z).unwrap_or_else(|_| {
            let p = self.nearest_seed(z);
            Projection { point: p, delta: (p - *z).norm(), far: true }
        })
    }

    /// Boundary distance `delta(z)`.
    pub fn delta(&self, z: &CPoint) -> f64 {
        if self.is_ball() {
            return (1.0 - z.norm()).abs();
        }
        self.project(z).delta
    }

    /// Newton iteration on `x - z + lambda grad rho(x) = 0`, `rho(x) = 0`.
    fn newton_project(&self, z: &CPoint, start: &CPoint) -> Result<CPoint, DomainError> {
        let n = self.n;
        let m = 2 * n;
        let zr = z.to_real();
        let mut x: Vec<f64> = start.to_real()[..m].to_vec();
        let jet0 = self.jet(start);
        let g0 = jet0.real_gradient();
        let mut lambda = -(0..m).map(|i| (zr[i] - x[i]) * g0[i]).sum::<f64>() / g0.norm_squared();

        let residual = |x: &[f64], lambda: f64| -> (DVector<f64>, f64) {
            let p = CPoint::from_real_pairs(n, x);
            let jet = self.jet(&p);
            let g = jet.real_gradient();
            let mut f = DVector::zeros(m + 1);
            for i in 0..m {
                f[i] = x[i] - zr[i] + lambda * g[i];
            }
            f[m] = jet.rho;
            let r = f.norm();
            (f, r)
        };

        let (mut f, mut res) = residual(&x, lambda);
        for _ in 0..80 {
            if res < PROJECTION_TOL {
                return Ok(CPoint::from_real_pairs(n, &x));
            }
            let p = CPoint::from_real_pairs(n, &x);
            let jet = self.jet(&p);
            let g = jet.real_gradient();
            let h = jet.real_hessian();
            let mut jac = DMatrix::zeros(m + 1, m + 1);
            for i in 0..m {
                for k in 0..m {
                    jac[(i, k)] = lambda * h[(i, k)] + if i == k { 1.0 } else { 0.0 };
                }
                jac[(i, m)] = g[i];
                jac[(m, i)] = g[i];
            }
            let step = match jac.lu().solve(&(-&f)) {
                Some(s) => s,
                None => break,
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let xn: Vec<f64> = (0..m).map(|i| x[i] + t * step[i]).collect();
                let ln = lambda + t * step[m];
                let (fn_, rn) = residual(&xn, ln);
                if rn < res || rn < PROJECTION_TOL {
                    x = xn;
                    lambda = ln;
                    f = fn_;
                    res = rn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if res < 1e-11 {
            return Ok(CPoint::from_real_pairs(n, &x));
        }
        Err(DomainError::ProjectionDiverged { point: *z, residual: res })
    }

    /// Splits `Z` at the boundary point `zeta` and evaluates the Levi form on
    /// the horizontal part.
    pub fn levi_form(&self, zeta: &CPoint, z_vec: &CPoint) -> Result<LeviSplit, DomainError> {
        self.check_dim(zeta)?;
        self.check_dim(z_vec)?;
        let jet = self.jet(zeta);
        if jet.rho.abs() > 1e-8 {
            return Err(DomainError::NotOnBoundary { rho: jet.rho });
        }
        let (normal, horizontal) = split_normal(&jet.dbar(), z_vec);
        let value = jet.levi.hermitian_form(&horizontal).re;
        Ok(LeviSplit { normal, horizontal, value })
    }

    /// Smallest Levi eigenvalue on the unit sphere of `H_zeta` (`None` when
    /// `n = 1`, where `H_zeta = {0}`).
    pub fn levi_min_eigenvalue(&self, zeta: &CPoint) -> Option<f64> {
        if self.n == 1 {
            return None;
        }
        let jet = self.jet(zeta);
        let frame = unitary_frame(&jet.dbar());
        let m = self.n - 1;
        // Restricted Hermitian matrix, embedded as a real symmetric 2m x 2m.
        let mut real = DMatrix::zeros(2 * m, 2 * m);
        for a in 0..m {
            for b in 0..m {
                let ea = frame[a + 1];
                let eb = frame[b + 1];
                let h = ea.conj().dot(&jet.levi.apply(&eb));
                real[(2 * a, 2 * b)] = h.re;
                real[(2 * a + 1, 2 * b + 1)] = h.re;
                real[(2 * a, 2 * b + 1)] = -h.im;
                real[(2 * a + 1, 2 * b)] = h.im;
            }
        }
        let eig = SymmetricEigen::new(real);
        Some(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Largest principal curvature of the boundary at `zeta`.
    pub fn max_principal_curvature(&self, zeta: &CPoint) -> f64 {
        let jet = self.jet(zeta);
        let g = jet.real_gradient();
        let gn = g.norm();
        let h = jet.real_hessian();
        let m = 2 * self.n;
        let nu = &g / gn;
        // Tangent-space projector applied on both sides of H / |grad rho|.
        let proj = DMatrix::identity(m, m) - &nu * nu.transpose();
        let shape = &proj * h * &proj / gn;
        let eig = SymmetricEigen::new(shape);
        eig.eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    fn calibrate_tubular_radius(&self) -> f64 {
        let kmax = self.boundary_seed.iter().map(|p| self.max_principal_curvature(p)).fold(0.0, f64::max);
        if kmax > 0.0 {
            (1.0 / kmax).min(self.inradius)
        } else {
            self.inradius
        }
    }

    /// Volume Jacobian `det(I - s S)` of the inward normal flow at distance
    /// `s` from the boundary point `zeta`.
    pub fn normal_flow_jacobian(&self, zeta: &CPoint, s: f64) -> f64 {
        if self.is_ball() {
            return (1.0 - s).powi(2 * self.n as i32 - 1);
        }
        let jet = self.jet(zeta);
        let g = jet.real_gradient();
        let gn = g.norm();
        let h = jet.real_hessian();
        let m = 2 * self.n;
        let nu = &g / gn;
        let proj = DMatrix::identity(m, m) - &nu * nu.transpose();
        let shape = &proj * h * &proj / gn;
        let eig = SymmetricEigen::new(shape);
        // The normal direction contributes a zero eigenvalue of the projected
        // operator; drop the one closest to zero along `nu`.
        let mut vals: Vec<(f64, f64)> = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .map(|(&l, v)| (l, v.dot(&nu).abs()))
            .collect();
        vals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        vals[1..].iter().map(|(k, _)| 1.0 - s * k).product()
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal(&self, zeta: &CPoint) -> CPoint {
        let d = self.jet(zeta).dbar();
        -(d * (1.0 / d.norm()))
    }
}

/// Splits `z` into the component along `nu` and its orthogonal complement.
pub fn split_normal(nu: &CPoint, z: &CPoint) -> (CPoint, CPoint) {
    let coef = z.inner(nu) / nu.norm_sqr();
    let normal = *nu * coef;
    (normal, *z - normal)
}

/// Orthonormal basis of `C^n` whose first vector is `nu / |nu|`.
pub fn unitary_frame(nu: &CPoint) -> [CPoint; MAX_DIM] {
    let n = nu.dim();
    let mut frame = [CPoint::zeros(n); MAX_DIM];
    frame[0] = nu.normalized();
    let mut filled = 1;
    for j in 0..n {
        if filled == n {
            break;
        }
        let mut v = CPoint::basis(n, j);
        for _ in 0..2 {
            for e in frame.iter().take(filled) {
                let c = v.inner(e);
                v = v - *e * c;
            }
        }
        if v.norm() > 1e-6 {
            frame[filled] = v.normalized();
            filled += 1;
        }
    }
    frame
}

/// Mollified `|x|^{1/2}` with a normalized `exp(-1/(1-t^2))` bump of half
/// width `h`, and its derivative.
fn mollified_sqrt_abs(x: f64, h: f64) -> (f64, f64) {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(32);
    }
    const BUMP_MASS: f64 = 0.443_993_816_168_079_4;
    let bump = |t: f64| if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() / BUMP_MASS } else { 0.0 };
    let dbump = |t: f64| {
        if t.abs() < 1.0 {
            let q = 1.0 - t * t;
            -2.0 * t / (q * q) * (-1.0 / q).exp() / BUMP_MASS
        } else {
            0.0
        }
    };
    RULE.with(|rule| {
        let f = |t: f64| bump(t / h) / h * (x - t).abs().sqrt();
        let df = |t: f64| dbump(t / h) / (h * h) * (x - t).abs().sqrt();
        let (a, b) = (-h, h);
        let split = x.clamp(a, b);
        let m = gl_integrate(f, a, split, rule) + gl_integrate(f, split, b, rule);
        let dm = gl_integrate(df, a, split, rule) + gl_integrate(df, split, b, rule);
        (m, dm)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::c64;

    fn ellipsoid() -> Domain {
        Domain::new(DomainSpec::Ellipsoid { n: 2, weights: vec![1.0, 4.0] }).unwrap()
    }

    fn perturbed() -> Domain {
        Domain::new(DomainSpec::PerturbedBall { n: 2, eps: 0.05 }).unwrap()
    }

    #[test]
    fn ball_jet_at_origin() {
        let d = Domain::ball(2);
        let j = d.eval_defining(&CPoint::zeros(2)).unwrap();
        assert_eq!(j.rho, -1.0);
        assert_eq!(j.grad, CPoint::zeros(2));
        assert_eq!(j.levi, CMat::identity(2));
        assert_eq!(j.hol, CMat::zeros(2));
    }

    #[test]
    fn ellipsoid_rho_arithmetic() {
        let z = CPoint::from_real(&[0.5, 0.3]);
        let rho = ellipsoid().eval_defining(&z).unwrap().rho;
        assert!((rho - (-0.39)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = Domain::ball(2).eval_defining(&CPoint::zeros(1)).unwrap_err();
        assert_eq!(err, DomainError::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn ball_radial_projection() {
        let p = Domain::ball(2).boundary_project(&CPoint::from_real(&[0.5, 0.0])).unwrap();
        assert_eq!(p.point, CPoint::from_real(&[1.0, 0.0]));
        assert_eq!(p.delta, 0.5);
    }

    #[test]
    fn ball_origin_is_far_interior() {
        let p = Domain::ball(2).boundary_project(&CPoint::zeros(2)).unwrap();
        assert_eq!(p.delta, 1.0);
        assert_eq!(p.point.norm(), 1.0);
        assert!(p.far);
    }

    #[test]
    fn levi_split_on_sphere() {
        let d = Domain::ball(2);
        let zeta = CPoint::from_real(&[1.0, 0.0]);
        let s = d.levi_form(&zeta, &CPoint::new(&[c64(0.0, 0.0), c64(1.0, 0.0)])).unwrap();
        assert_eq!(s.horizontal, CPoint::new(&[c64(0.0, 0.0), c64(1.0, 0.0)]));
        assert_eq!(s.value, 1.0);
        let z = CPoint::new(&[c64(0.0, 1.0), c64(0.0, 0.0)]);
        let s = d.levi_form(&zeta, &z).unwrap();
        assert_eq!(s.normal, z);
        assert_eq!(s.horizontal, CPoint::zeros(2));
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn levi_form_rejects_interior_points() {
        let d = Domain::ball(2);
        let e = d.levi_form(&CPoint::from_real(&[0.5, 0.0]), &CPoint::basis(2, 1)).unwrap_err();
        assert!(matches!(e, DomainError::NotOnBoundary { .. }));
    }

    /// Central differences of `rho` (first order) and of the analytic
    /// gradient (second order) against the Wirtinger fields.
    fn fd_check(d: &Domain, z: &CPoint) {
        let jet = d.jet(z);
        let h = 1e-6;
        let m = 2 * d.dim();
        let g = jet.real_gradient();
        let hess = jet.real_hessian();
        let x0 = z.to_real();
        for i in 0..m {
            let mut xp = x0;
            let mut xm = x0;
            xp[i] += h;
            xm[i] -= h;
            let pp = CPoint::from_real_pairs(d.dim(), &xp);
            let pm = CPoint::from_real_pairs(d.dim(), &xm);
            let fd = (d.rho(&pp) - d.rho(&pm)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g.norm().max(1.0), "grad {i}: {fd} vs {}", g[i]);
            let gp = d.jet(&pp).real_gradient();
            let gm = d.jet(&pm).real_gradient();
            for k in 0..m {
                let fd2 = (gp[k] - gm[k]) / (2.0 * h);
                assert!((fd2 - hess[(k, i)]).abs() <= 1e-6 * hess.norm().max(1.0), "hess {k},{i}");
            }
        }
    }

    #[test]
    fn derivative_fields_match_finite_differences() {
        let pts = [
            CPoint::new(&[c64(0.3, -0.2), c64(0.1, 0.4)]),
            CPoint::new(&[c64(-0.6, 0.1), c64(0.2, -0.3)]),
            CPoint::new(&[c64(0.05, 0.7), c64(-0.4, 0.0)]),
        ];
        for d in [Domain::ball(2), ellipsoid(), perturbed()] {
            for z in &pts {
                fd_check(&d, z);
            }
        }
    }

    #[test]
    fn perturbed_ball_third_derivative_blows_up() {
        // Second differences of the analytic Levi entry grow like |x|^{-1/2}.
        let d = perturbed();
        let third = |x: f64| {
            let h = x / 4.0;
            let l = |t: f64| d.jet(&CPoint::new(&[c64(t, 0.0), c64(0.0, 0.0)])).levi.a[0][0].re;
            (l(x + h) - l(x - h)) / (2.0 * h)
        };
        let (a, b) = (third(1e-2), third(1e-6));
        assert!(a.is_finite() && b.is_finite());
        assert!(b / a > 50.0, "third-derivative ratio {}", b / a);
        let hol0 = d.jet(&CPoint::new(&[c64(0.0, 0.3), c64(0.2, 0.0)])).hol;
        assert!(hol0.a[0][0].norm().is_finite());
    }

    #[test]
    fn newton_projection_on_ellipsoid() {
        let d = ellipsoid();
        let p = d.boundary_project(&CPoint::from_real(&[0.0, 0.25])).unwrap();
        assert!(d.rho(&p.point).abs() < 1e-10);
        assert!((p.delta - 0.25).abs() < 1e-10);
        assert!((p.point - CPoint::from_real(&[0.0, 0.5])).norm() < 1e-8);
    }

    #[test]
    fn perturbed_levi_is_positive() {
        let d = perturbed();
        for p in d.boundary_seed().iter().take(400) {
            assert!(d.levi_min_eigenvalue(p).unwrap() > 0.5);
        }
    }

    #[test]
    fn mollified_hessian_is_close() {
        let d = perturbed();
        for &x in &[-0.7, -0.01, 0.0, 0.02, 0.4] {
            let w = CPoint::new(&[c64(x, 0.1), c64(0.1, 0.0)]);
            let exact = d.jet(&w).hol.a[0][0].re;
            let tau = d.mollified_hessian(&w, 0.01).tau.a[0][0].re;
            assert!((exact - tau).abs() < 0.01, "x = {x}: {exact} vs {tau}");
        }
    }

    #[test]
    fn spec_rejects_unknown_keys() {
        let ok: DomainSpec = serde_json::from_str(r#"{"domain":"perturbed_ball","n":2,"eps":0.05}"#).unwrap();
        assert_eq!(ok, DomainSpec::PerturbedBall { n: 2, eps: 0.05 });
        assert!(serde_json::from_str::<DomainSpec>(r#"{"domain":"ball","n":2,"radius":3}"#).is_err());
    }
}
