use rayon::prelude::*;
use thiserror::Error;

use super::projection::ProjectionDiscretization;
use crate::cvec::{CMat, CPoint, C64};
use crate::domain::{Domain, LeviChart};
use crate::numeric::smoothstep5_deriv;
use crate::sampling::{EstimateC, SampleCloud, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfError {
    #[error("|g| = {0:.3e} underflows at the evaluation pair")]
    GUnderflow(f64),
    #[error("calibration integral vanished")]
    Degenerate,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Smallest `|g|` accepted by the kernel.
const G_MIN: f64 = 1e-150;

/// `d chi / d s` at `s = |w - z|^2`.
fn chi_deriv(chart: LeviChart, dist_sqr: f64) -> f64 {
    match chart {
        LeviChart::Global => 0.0,
        LeviChart::Local { mu } => -smoothstep5_deriv((dist_sqr - 0.5 * mu) / (0.5 * mu)) / (0.5 * mu),
    }
}

/// Coefficients of the generating form and their `dbar_w` derivatives.
#[derive(Clone, Copy, Debug)]
pub struct CfTerms {
    /// `a_j(w, z)`, with `g = -rho(w) + sum_j a_j (w_j - z_j)`.
    pub coeffs: CPoint,
    /// `d_coeffs.a[j][k] = d a_j / d wbar_k`.
    pub d_coeffs: CMat,
    pub g: C64,
    /// `d g / d wbar_k`.
    pub dg: CPoint,
}

/// Cauchy-Fantappiè kernel built from the mollified Levi polynomial:
/// `kernel(z, w) = kappa det[d (a_j / g) / d wbar_k]`. Only first and second
/// derivatives of `rho` and the mollified Hessian enter.
#[derive(Clone, Debug)]
pub struct CfKernel {
    domain: Domain,
    pub eps: f64,
    pub kappa: f64,
}

impl CfKernel {
    pub fn new(domain: &Domain, eps: f64) -> CfKernel {
        CfKernel { domain: domain.clone(), eps, kappa: 1.0 }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn terms(&self, z: &CPoint, w: &CPoint) -> CfTerms {
        let n = self.domain.dim();
        let jet = self.domain.jet(w);
        let moll = self.domain.mollified_hessian(w, self.eps);
        let d = *w - *z;
        let s = d.norm_sqr();
        let chart = self.domain.chart();
        let c = crate::metrics::chi(chart, s);
        let dc = chi_deriv(chart, s);
        let mut local = CPoint::zeros(n);
        let mut d_local = CMat::zeros(n);
        for j in 0..n {
            let mut a = jet.grad[j];
            for l in 0..n {
                a -= 0.5 * moll.tau.a[j][l] * d[l];
            }
            local[j] = a;
            for k in 0..n {
                let mut da = jet.levi.a[j][k];
                for l in 0..n {
                    da -= 0.5 * moll.dbar_tau[k].a[j][l] * d[l];
                }
                d_local.a[j][k] = da;
            }
        }
        let mut coeffs = CPoint::zeros(n);
        let mut d_coeffs = CMat::zeros(n);
        for j in 0..n {
            coeffs[j] = c * local[j] + (1.0 - c) * d[j].conj();
            for k in 0..n {
                let mut v = dc * d[k] * (local[j] - d[j].conj()) + c * d_local.a[j][k];
                if j == k {
                    v += 1.0 - c;
                }
                d_coeffs.a[j][k] = v;
            }
        }
        let g = coeffs.dot(&d) - jet.rho;
        let mut dg = CPoint::zeros(n);
        for k in 0..n {
            let mut v = -jet.grad[k].conj();
            for j in 0..n {
                v += d_coeffs.a[j][k] * d[j];
            }
            dg[k] = v;
        }
        CfTerms { coeffs, d_coeffs, g, dg }
    }

    /// `det[d (a_j / g) / d wbar_k]` without the calibration constant.
    pub fn raw(&self, z: &CPoint, w: &CPoint) -> Result<C64, CfError> {
        let t = self.terms(z, w);
        let gn = t.g.norm();
        if !(gn >= G_MIN) {
            return Err(CfError::GUnderflow(gn));
        }
        let n = self.domain.dim();
        let mut m = CMat::zeros(n);
        let g2 = t.g * t.g;
        for j in 0..n {
            for k in 0..n {
                m.a[j][k] = t.d_coeffs.a[j][k] / t.g - t.coeffs[j] * t.dg[k] / g2;
            }
        }
        Ok(m.det())
    }

    pub fn eval(&self, z: &CPoint, w: &CPoint) -> Result<C64, CfError> {
        Ok(self.raw(z, w)? * self.kappa)
    }

    /// `T f (z) = int kernel(z, w) f(w) dV(w)` on `cloud`.
    pub fn apply_at(&self, cloud: &SampleCloud, f: &[C64], z: &CPoint) -> Result<EstimateC, CfError> {
        let vals = cloud.points.par_iter().zip(f).map(|(w, v)| Ok(self.eval(z, w)? * v)).collect::<Result<Vec<_>, CfError>>()?;
        Ok(cloud.integrate_complex(&vals)?)
    }

    /// Fixes `kappa` so that `T 1 = 1` on average over `centers`; returns the
    /// per-center constants `1 / Re int raw(z, .)`.
    pub fn calibrate(&mut self, cloud: &SampleCloud, centers: &[CPoint]) -> Result<Vec<f64>, CfError> {
        let saved = self.kappa;
        self.kappa = 1.0;
        let one = vec![C64::new(1.0, 0.0); cloud.len()];
        let mut per = Vec::with_capacity(centers.len());
        for z in centers {
            match self.apply_at(cloud, &one, z) {
                Ok(t) if t.value.re != 0.0 => per.push(1.0 / t.value.re),
                Ok(_) => {
                    self.kappa = saved;
                    return Err(CfError::Degenerate);
                }
                Err(e) => {
                    self.kappa = saved;
                    return Err(e);
                }
            }
        }
        let inv_mean = per.iter().map(|k| 1.0 / k).sum::<f64>() / per.len() as f64;
        self.kappa = 1.0 / inv_mean;
        Ok(per)
    }
}

/// `||P (T f) - T f|| / ||T f||` on the discretization for each dictionary
/// entry, with `T` the calibrated kernel applied by Nyström rows. Nonzero by
/// the missing correction term and by quadrature error.
pub fn kerzman_stein_residual(disc: &ProjectionDiscretization, cf: &CfKernel, dictionary: &[Vec<C64>]) -> Result<Vec<f64>, CfError> {
    let pts = disc.points();
    let w = &disc.cloud.weights;
    dictionary
        .iter()
        .map(|f| {
            let tf = (0..pts.len())
                .into_par_iter()
                .map(|i| (0..pts.len()).map(|j| Ok(cf.eval(&pts[i], &pts[j])? * (f[j] * w[j]))).sum::<Result<C64, CfError>>())
                .collect::<Result<Vec<_>, _>>()?;
            let ptf = disc.project(&tf);
            let diff: Vec<C64> = ptf.iter().zip(&tf).map(|(a, b)| a - b).collect();
            let den = disc.norm(&tf);
            Ok(if den == 0.0 { 0.0 } else { disc.norm(&diff) / den })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{big_f, levi_g, GVariant};
    use crate::sampling::sample_plain;
    use crate::DomainSpec;

    fn perturbed(local: bool) -> Domain {
        let mut d = Domain::new(DomainSpec::PerturbedBall { n: 2, eps: 0.3 }).unwrap();
        if local {
            d.set_chart(LeviChart::Local { mu: 0.5 });
        }
        d
    }

    #[test]
    fn ball_kernel_matches_the_closed_form() {
        // On the ball a_j = conj(w_j), g = 1 - <z, w>, and det M = g^{-(n+1)}.
        let d = Domain::ball(2);
        let cf = CfKernel::new(&d, 0.05);
        let o = CPoint::zeros(2);
        for w in [CPoint::from_real_pairs(2, &[0.3, 0.1, -0.2, 0.4]), CPoint::from_real_pairs(2, &[0.0, 0.9, 0.1, 0.0])] {
            assert!((cf.raw(&o, &w).unwrap() - 1.0).norm() < 1e-10);
            let z = CPoint::from_real_pairs(2, &[0.5, -0.1, 0.2, 0.3]);
            let exact = (C64::new(1.0, 0.0) - z.inner(&w)).powi(-3);
            assert!((cf.raw(&z, &w).unwrap() - exact).norm() < 1e-10 * exact.norm());
        }
    }

    #[test]
    fn g_agrees_with_the_levi_polynomial_form() {
        for local in [false, true] {
            let d = perturbed(local);
            let cf = CfKernel::new(&d, 0.05);
            let z = CPoint::from_real_pairs(2, &[0.1, 0.5, -0.3, 0.2]);
            let w = CPoint::from_real_pairs(2, &[-0.05, 0.6, -0.1, 0.4]);
            let g = cf.terms(&z, &w).g;
            let reference = levi_g(&d, &w, &z, GVariant::Mollified(0.05));
            assert!((g - reference).norm() < 1e-13, "{g} {reference}");
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        // d/d wbar_k = (d/dx_k + i d/dy_k) / 2, central differences.
        for local in [false, true] {
            let d = perturbed(local);
            let cf = CfKernel::new(&d, 0.05);
            let z = CPoint::from_real_pairs(2, &[0.2, 0.3, -0.3, 0.1]);
            let w = CPoint::from_real_pairs(2, &[0.15, 0.75, -0.2, 0.3]);
            let t = cf.terms(&z, &w);
            let h = 1e-6;
            for k in 0..2 {
                let shift = |dx: f64, dy: f64| {
                    let mut p = w;
                    p[k] += C64::new(dx, dy);
                    cf.terms(&z, &p)
                };
                let (xp, xm, yp, ym) = (shift(h, 0.0), shift(-h, 0.0), shift(0.0, h), shift(0.0, -h));
                let fd = |f: &dyn Fn(&CfTerms) -> C64| {
                    let dx = (f(&xp) - f(&xm)) / (2.0 * h);
                    let dy = (f(&yp) - f(&ym)) / (2.0 * h);
                    0.5 * (dx + C64::new(0.0, 1.0) * dy)
                };
                for j in 0..2 {
                    let num = fd(&|t: &CfTerms| t.coeffs[j]);
                    assert!((num - t.d_coeffs.a[j][k]).norm() < 1e-6, "a_{j} k={k}: {num} vs {}", t.d_coeffs.a[j][k]);
                }
                let num = fd(&|t: &CfTerms| t.g);
                assert!((num - t.dg[k]).norm() < 1e-6, "g k={k}: {num} vs {}", t.dg[k]);
            }
        }
    }

    #[test]
    fn calibrated_kernel_reproduces_holomorphic_monomials() {
        let d = Domain::ball(2);
        let mut cf = CfKernel::new(&d, 0.05);
        let centers = [CPoint::zeros(2), CPoint::from_real_pairs(2, &[0.3, 0.1, -0.2, 0.0]), CPoint::from_real_pairs(2, &[0.0, -0.4, 0.2, 0.2])];
        let cal = sample_plain(&d, 20_000, 1);
        cf.calibrate(&cal, &centers).unwrap();
        // Exact constant for the unit ball in C^2: 2 / pi^2.
        assert!((cf.kappa * std::f64::consts::PI.powi(2) / 2.0 - 1.0).abs() < 0.01, "{}", cf.kappa);
        let val = sample_plain(&d, 20_000, 2);
        let z = CPoint::from_real_pairs(2, &[0.25, -0.1, 0.15, 0.3]);
        let fs: [(Box<dyn Fn(&CPoint) -> C64>, C64); 3] = [
            (Box::new(|_| C64::new(1.0, 0.0)), C64::new(1.0, 0.0)),
            (Box::new(|w| w[0]), z[0]),
            (Box::new(|w| w[0] * w[1]), z[0] * z[1]),
        ];
        for (f, expect) in &fs {
            let vals: Vec<C64> = val.points.iter().map(f).collect();
            let est = cf.apply_at(&val, &vals, &z).unwrap();
            assert!((est.value - expect).norm() < 3.0 * est.se, "{est:?} vs {expect}");
        }
    }

    #[test]
    fn kernel_is_dominated_by_f_to_the_n_plus_one() {
        // |kernel| F^{n+1} on pairs approaching the boundary: no growth across decades.
        use rand::Rng;
        let d = perturbed(false);
        let cf = CfKernel::new(&d, 0.05);
        let mut rng = crate::qmc::rng_for(3, 0);
        let mut maxima = [0.0f64; 3];
        for i in 0..6000 {
            let dec = i % 3;
            let delta = 10f64.powf(-1.0 - dec as f64 - rng.random::<f64>());
            let dir = crate::qmc::sphere_point(2, &[rng.random(), rng.random(), rng.random()]);
            let zeta = d.radial_boundary_point(&dir);
            let z = zeta + d.inward_normal(&zeta) * delta;
            let off = CPoint::from_real_pairs(2, &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let w0 = z + off * (rng.random::<f64>() * 0.3);
            if !d.contains(&w0) {
                continue;
            }
            let ratio = cf.raw(&z, &w0).unwrap().norm() * big_f(&d, &z, &w0).powi(3);
            maxima[dec] = maxima[dec].max(ratio);
        }
        let top = maxima.iter().copied().fold(0.0, f64::max);
        assert!(top.is_finite() && maxima.iter().all(|&m| m >= 0.25 * top), "{maxima:?}");
    }

    #[test]
    fn tiny_g_is_an_error() {
        let d = Domain::ball(1);
        let cf = CfKernel::new(&d, 0.05);
        let z = CPoint::from_real(&[1.0]);
        assert!(matches!(cf.raw(&z, &z), Err(CfError::GUnderflow(_))));
    }

    #[test]
    fn kerzman_stein_residual_is_small_on_the_ball() {
        use crate::operator_lab::{discretize_projection, nystrom_cloud, ProjectorMode};
        let d = Domain::ball(1);
        let cloud = nystrom_cloud(&d, 1500, 0.05, 4);
        let disc = discretize_projection(&d, &cloud, ProjectorMode::Nystrom, None).unwrap();
        let mut cf = CfKernel::new(&d, 0.05);
        cf.kappa = 1.0 / std::f64::consts::PI;
        let dict: Vec<Vec<C64>> = (0..3).map(|k| disc.points().iter().map(|w| w[0].powu(k) + w[0].conj()).collect()).collect();
        let res = kerzman_stein_residual(&disc, &cf, &dict).unwrap();
        let idem = disc.idempotence_residual();
        assert!(res.iter().all(|&r| r <= 2.0 * idem + 1e-12), "{res:?} vs {idem}");
    }
}
