use nalgebra::DMatrix;
use rayon::prelude::*;

use super::commutator::{power_iterate, PowerOptions};
use super::OperatorError;
use crate::cvec::{CPoint, C64};
use crate::domain::Domain;
use crate::oscillation::SymbolEval;
use crate::qmc::rng_for;
use crate::sampling::{Design, EstimateC, Proposal, SampleCloud, Shells};

/// Largest cloud for which the whitened matrix is stored.
pub const DENSE_LIMIT: usize = 5000;
/// Largest cloud for the spectral projector (one Hermitian eigensolve).
pub const SPECTRAL_LIMIT: usize = 2000;

/// Ball cloud for Nyström work: dyadic shells from the centre down to
/// `delta_min`, shell `(h/2, h]` getting a share proportional to `h^{-1/2}`,
/// and nothing below `delta_min`. Points deeper than the cloud can resolve
/// would carry quadrature cells far wider than their kernel, so the cloud
/// stops at the cut instead.
pub fn nystrom_cloud(domain: &Domain, count: usize, delta_min: f64, seed: u64) -> SampleCloud {
    let shells = Shells::dyadic(domain.inradius(), delta_min);
    let m = shells.len() - 1;
    let share: Vec<f64> = (0..m).map(|i| shells.bounds(i).1.powf(-0.5)).collect();
    let total: f64 = share.iter().sum();
    let mut design = Design::default();
    for (i, s) in share.iter().enumerate() {
        let (lo, hi) = shells.bounds(i);
        design.push(Proposal::Shell { lo, hi }, (count as f64 * s / total).round() as usize);
    }
    SampleCloud::build(domain, &design, seed)
}

/// `n! / (pi^n (1 - <z, w>)^{n+1})`.
pub fn bergman_kernel_ball(z: &CPoint, w: &CPoint) -> C64 {
    let n = z.dim();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let c = fact / std::f64::consts::PI.powi(n as i32);
    c / (C64::new(1.0, 0.0) - z.inner(w)).powi(n as i32 + 1)
}

pub fn bergman_kernel(domain: &Domain, z: &CPoint, w: &CPoint) -> Result<C64, OperatorError> {
    if !domain.is_ball() {
        return Err(OperatorError::NotBall);
    }
    Ok(bergman_kernel_ball(z, w))
}

/// How the projection acts on cloud functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorMode {
    /// `(P f)_i = sum_j K(x_i, x_j) W_j f_j`.
    Nystrom,
    /// Orthogonal projector onto the eigenvectors of the whitened Nyström
    /// matrix with eigenvalue `>= 1/2`; exactly idempotent and self-adjoint.
    Spectral,
}

#[derive(Clone, Debug)]
enum Storage {
    /// Row-major whitened matrix `A_ij = sqrt(W_i) K(x_i, x_j) sqrt(W_j)`.
    Dense(Vec<C64>),
    /// Kernel evaluated inside every product.
    OnTheFly,
    /// Row-major `N x m` orthonormal basis `Q`; the projector is `Q Q^*`.
    Spectral { q: Vec<C64>, rank: usize },
}

/// Discretized Bergman projection on a ball cloud. Functions are value
/// vectors on `cloud.points`; the inner product is `sum_i W_i f_i conj(g_i)`.
/// Internally everything runs on whitened vectors `u_i = sqrt(W_i) f_i`, where
/// the weighted inner product becomes the Euclidean one.
#[derive(Clone, Debug)]
pub struct ProjectionDiscretization {
    pub cloud: SampleCloud,
    pub mode: ProjectorMode,
    sqrt_w: Vec<f64>,
    storage: Storage,
}

/// Discretizes `P` on the positive-weight points of `cloud`. With
/// `max_idempotence` set, a Nyström residual above it is an error.
pub fn discretize_projection(
    domain: &Domain,
    cloud: &SampleCloud,
    mode: ProjectorMode,
    max_idempotence: Option<f64>,
) -> Result<ProjectionDiscretization, OperatorError> {
    if !domain.is_ball() {
        return Err(OperatorError::NotBall);
    }
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.weights[i] > 0.0).collect();
    let cloud = SampleCloud {
        n: cloud.n,
        points: keep.iter().map(|&i| cloud.points[i]).collect(),
        weights: keep.iter().map(|&i| cloud.weights[i]).collect(),
        delta: keep.iter().map(|&i| cloud.delta[i]).collect(),
        foot: keep.iter().map(|&i| cloud.foot[i]).collect(),
        source: keep.iter().map(|&i| cloud.source[i]).collect(),
        draws: cloud.draws.clone(),
        seed: cloud.seed,
    };
    let m = cloud.len();
    let sqrt_w: Vec<f64> = cloud.weights.iter().map(|w| w.sqrt()).collect();
    let dense = || -> Vec<C64> {
        (0..m)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (pts, sw) = (&cloud.points, &sqrt_w);
                (0..m).map(move |j| bergman_kernel_ball(&pts[i], &pts[j]) * (sw[i] * sw[j]))
            })
            .collect()
    };
    let storage = match mode {
        ProjectorMode::Nystrom if m <= DENSE_LIMIT => Storage::Dense(dense()),
        ProjectorMode::Nystrom => Storage::OnTheFly,
        ProjectorMode::Spectral => {
            if m > SPECTRAL_LIMIT {
                return Err(OperatorError::TooLarge { points: m, limit: SPECTRAL_LIMIT });
            }
            let a = DMatrix::from_row_slice(m, m, &dense());
            let eig = a.symmetric_eigen();
            let cols: Vec<usize> = (0..m).filter(|&k| eig.eigenvalues[k] >= 0.5).collect();
            let rank = cols.len();
            let mut q = vec![C64::new(0.0, 0.0); m * rank];
            for (c, &k) in cols.iter().enumerate() {
                for i in 0..m {
                    q[i * rank + c] = eig.eigenvectors[(i, k)];
                }
            }
            Storage::Spectral { q, rank }
        }
    };
    let disc = ProjectionDiscretization { cloud, mode, sqrt_w, storage };
    if let Some(bound) = max_idempotence {
        let residual = disc.idempotence_residual();
        if residual > bound {
            return Err(OperatorError::CloudTooCoarse { residual, bound });
        }
    }
    Ok(disc)
}

impl ProjectionDiscretization {
    pub fn len(&self) -> usize {
        self.sqrt_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_w.is_empty()
    }

    pub fn points(&self) -> &[CPoint] {
        &self.cloud.points
    }

    /// Symbol values on the cloud.
    pub fn values(&self, b: &impl SymbolEval) -> Vec<C64> {
        self.cloud.points.par_iter().zip(self.cloud.delta.par_iter()).map(|(w, &d)| b.eval(w, d)).collect()
    }

    pub(crate) fn whiten(&self, f: &[C64]) -> Vec<C64> {
        f.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect()
    }

    pub(crate) fn unwhiten(&self, u: &[C64]) -> Vec<C64> {
        u.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect()
    }

    /// Projection in whitened coordinates; rows are independent, so the
    /// result does not depend on the thread count.
    pub(crate) fn apply_whitened(&self, u: &[C64]) -> Vec<C64> {
        let m = self.len();
        match &self.storage {
            Storage::Dense(a) => {
                (0..m).into_par_iter().map(|i| a[i * m..(i + 1) * m].iter().zip(u).map(|(x, y)| x * y).sum()).collect()
            }
            Storage::OnTheFly => {
                let pts = &self.cloud.points;
                (0..m)
                    .into_par_iter()
                    .map(|i| {
                        let s: C64 = (0..m).map(|j| bergman_kernel_ball(&pts[i], &pts[j]) * (self.sqrt_w[j] * u[j])).sum();
                        s * self.sqrt_w[i]
                    })
                    .collect()
            }
            Storage::Spectral { q, rank } => {
                let r = *rank;
                let coef: Vec<C64> = (0..r)
                    .into_par_iter()
                    .map(|c| (0..m).map(|i| q[i * r + c].conj() * u[i]).sum())
                    .collect();
                (0..m).into_par_iter().map(|i| (0..r).map(|c| q[i * r + c] * coef[c]).sum()).collect()
            }
        }
    }

    /// `P f` on the cloud.
    pub fn project(&self, f: &[C64]) -> Vec<C64> {
        self.unwhiten(&self.apply_whitened(&self.whiten(f)))
    }

    /// `P f (z) = int K(z, w) f(w) dV(w)` at an arbitrary point, with the
    /// quadrature standard error.
    pub fn project_at(&self, z: &CPoint, f: &[C64]) -> EstimateC {
        let vals: Vec<C64> = self.cloud.points.iter().zip(f).map(|(w, v)| bergman_kernel_ball(z, w) * v).collect();
        self.cloud.integrate_complex(&vals).expect("cloud has positive weights")
    }

    /// Weighted `L^2` norm.
    pub fn norm(&self, f: &[C64]) -> f64 {
        f.iter().zip(&self.cloud.weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt()
    }

    /// Dense whitened projector (at most [`DENSE_LIMIT`] points).
    pub fn dense_whitened(&self) -> Result<DMatrix<C64>, OperatorError> {
        let m = self.len();
        match &self.storage {
            Storage::Dense(a) => Ok(DMatrix::from_row_slice(m, m, a)),
            Storage::Spectral { q, rank } => {
                let q = DMatrix::from_row_slice(m, *rank, q);
                Ok(&q * q.adjoint())
            }
            Storage::OnTheFly => Err(OperatorError::TooLarge { points: m, limit: DENSE_LIMIT }),
        }
    }

    /// `||P^2 - P|| / ||P||` in the weighted operator norm.
    pub fn idempotence_residual(&self) -> f64 {
        self.core_idempotence_residual(0.0)
    }

    /// `||R (P^2 - P) R|| / ||R P R||` with `R` restricting to `delta >= min_delta`.
    /// A cloud ends at some depth, and `P` of the truncated cloud leaks mass
    /// across that cut; the core residual measures the discretization away
    /// from it.
    pub fn core_idempotence_residual(&self, min_delta: f64) -> f64 {
        let opts = PowerOptions::default();
        let m = self.len();
        let delta = &self.cloud.delta;
        let restrict = |v: &mut [C64]| {
            for (x, &d) in v.iter_mut().zip(delta) {
                if d < min_delta {
                    *x = C64::new(0.0, 0.0);
                }
            }
        };
        let compressed = |v: &[C64]| {
            let mut u = v.to_vec();
            restrict(&mut u);
            let mut a = self.apply_whitened(&u);
            restrict(&mut a);
            a
        };
        let defect = |v: &[C64]| {
            let mut u = v.to_vec();
            restrict(&mut u);
            let a = self.apply_whitened(&u);
            let mut aa = self.apply_whitened(&a);
            for (x, y) in aa.iter_mut().zip(&a) {
                *x -= y;
            }
            restrict(&mut aa);
            aa
        };
        let top = power_iterate(m, compressed, compressed, &opts).value;
        let res = power_iterate(m, defect, defect, &opts).value;
        if top == 0.0 {
            0.0
        } else {
            res / top
        }
    }

    /// `max |<P f, g> - <f, P g>| / (||f|| ||g||)` over random pairs.
    pub fn self_adjoint_residual(&self, pairs: usize, seed: u64) -> f64 {
        use rand::Rng;
        let m = self.len();
        let mut rng = rng_for(seed, 0x5a);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let mut draw = || -> Vec<C64> { (0..m).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect() };
            let (u, v) = (draw(), draw());
            let pu = self.apply_whitened(&u);
            let pv = self.apply_whitened(&v);
            let lhs: C64 = pu.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
            let rhs: C64 = u.iter().zip(&pv).map(|(a, b)| a * b.conj()).sum();
            let nu = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max((lhs - rhs).norm() / (nu * nv));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::big_f;
    use crate::sampling::{sample_interior, Shells};

    fn disk_cloud(count: usize, seed: u64) -> SampleCloud {
        sample_interior(&Domain::ball(1), count, &Shells::dyadic(1.0, 0.02), seed).unwrap()
    }

    #[test]
    fn kernel_at_the_origin_of_the_disk() {
        let o = CPoint::zeros(1);
        assert!((bergman_kernel_ball(&o, &o).re - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn kernel_is_hermitian() {
        let z = CPoint::from_real_pairs(2, &[0.3, -0.2, 0.1, 0.5]);
        let w = CPoint::from_real_pairs(2, &[-0.4, 0.1, 0.6, 0.2]);
        assert_eq!(bergman_kernel_ball(&z, &w), bergman_kernel_ball(&w, &z).conj());
    }

    #[test]
    fn non_ball_is_rejected() {
        let d = Domain::new(crate::DomainSpec::Ellipsoid { n: 2, weights: vec![1.0, 2.0] }).unwrap();
        let o = CPoint::zeros(2);
        assert_eq!(bergman_kernel(&d, &o, &o), Err(OperatorError::NotBall));
    }

    #[test]
    fn kernel_modulus_tracks_f_to_the_n_plus_one() {
        // |K| F^{n+1} stays in a fixed band: decade maxima and minima of the
        // ratio do not drift as the pairs approach the boundary.
        use rand::Rng;
        let d = Domain::ball(2);
        let mut rng = rng_for(11, 0);
        let mut bands: Vec<(f64, f64)> = vec![(f64::INFINITY, 0.0); 4];
        for i in 0..100_000 {
            let dec = i % 4;
            let mut pick = || {
                let delta = 10f64.powf(-1.0 - dec as f64 - rng.random::<f64>());
                let u = crate::qmc::sphere_point(2, &[rng.random(), rng.random(), rng.random()]);
                u * (1.0 - delta)
            };
            let z = pick();
            let w = pick();
            let ratio = bergman_kernel_ball(&z, &w).norm() * big_f(&d, &z, &w).powi(3);
            bands[dec].0 = bands[dec].0.min(ratio);
            bands[dec].1 = bands[dec].1.max(ratio);
        }
        let lo = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let hi = bands.iter().map(|b| b.1).fold(0.0, f64::max);
        assert!(lo > 0.0 && hi.is_finite());
        // The band saturates: the two deepest decades agree.
        let (a, b) = (bands[2], bands[3]);
        assert!((a.0 / b.0 - 1.0).abs() < 0.05 && (a.1 / b.1 - 1.0).abs() < 0.05, "{bands:?}");
    }

    #[test]
    fn reproduces_constants_and_holomorphic_monomials() {
        let d = Domain::ball(1);
        let disc = discretize_projection(&d, &disk_cloud(4000, 3), ProjectorMode::Nystrom, None).unwrap();
        let one = vec![C64::new(1.0, 0.0); disc.len()];
        let sq: Vec<C64> = disc.points().iter().map(|w| w[0] * w[0]).collect();
        let conj: Vec<C64> = disc.points().iter().map(|w| w[0].conj()).collect();
        for z in [CPoint::from_real_pairs(1, &[0.2, 0.1]), CPoint::from_real_pairs(1, &[-0.5, 0.3])] {
            let p1 = disc.project_at(&z, &one);
            assert!((p1.value - 1.0).norm() < 3.0 * p1.se, "{p1:?}");
            let p2 = disc.project_at(&z, &sq);
            assert!((p2.value - z[0] * z[0]).norm() < 3.0 * p2.se, "{p2:?}");
            let p3 = disc.project_at(&z, &conj);
            assert!(p3.value.norm() < 3.0 * p3.se, "{p3:?}");
        }
    }

    #[test]
    fn nystrom_residuals_shrink_with_refinement() {
        // Away from the cut (delta >= 0.2) the residual is quadrature plus
        // leakage across the cut, and both shrink as the cloud deepens.
        let d = Domain::ball(1);
        let coarse = discretize_projection(&d, &nystrom_cloud(&d, 1000, 0.04, 5), ProjectorMode::Nystrom, None).unwrap();
        let fine = discretize_projection(&d, &nystrom_cloud(&d, 4000, 0.01, 5), ProjectorMode::Nystrom, None).unwrap();
        let (rc, rf) = (coarse.core_idempotence_residual(0.2), fine.core_idempotence_residual(0.2));
        assert!(rf < 0.05 && rf < rc, "{rc} {rf}");
        assert!(fine.self_adjoint_residual(3, 1) < 0.05);
    }

    #[test]
    fn spectral_mode_is_an_orthogonal_projector() {
        let d = Domain::ball(1);
        let disc = discretize_projection(&d, &nystrom_cloud(&d, 600, 0.05, 7), ProjectorMode::Spectral, None).unwrap();
        assert!(disc.idempotence_residual() < 1e-10);
        assert!(disc.self_adjoint_residual(3, 2) < 1e-12);
    }

    #[test]
    fn too_coarse_cloud_is_reported() {
        let d = Domain::ball(1);
        let r = discretize_projection(&d, &nystrom_cloud(&d, 200, 0.05, 1), ProjectorMode::Nystrom, Some(0.05));
        assert!(matches!(r, Err(OperatorError::CloudTooCoarse { .. })));
    }
}
