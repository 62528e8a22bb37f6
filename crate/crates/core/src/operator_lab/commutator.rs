use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::projection::{bergman_kernel_ball, ProjectionDiscretization};
use super::OperatorError;
use crate::berezin::{normalized_kernel_sqr, PeakingKernel};
use crate::cvec::{CPoint, C64};
use crate::domain::Domain;
use crate::oscillation::SymbolEval;
use crate::qmc::rng_for;
use crate::sampling::sample_local;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    /// Relative change of the estimate that ends the iteration.
    pub tol: f64,
    pub cap: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-3, cap: 500, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration on `T^* T`; `value = ||T v||` for the current unit `v`,
/// a lower bound that increases to the largest singular value.
pub(crate) fn power_iterate(
    m: usize,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    adjoint: impl Fn(&[C64]) -> Vec<C64>,
    opts: &PowerOptions,
) -> NormEstimate {
    let mut rng = rng_for(opts.seed, 0x90);
    let mut v: Vec<C64> = (0..m).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let nv = l2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = 0.0;
    for it in 1..=opts.cap {
        let w = apply(&v);
        let s = l2(&w);
        let u = adjoint(&w);
        let nu = l2(&u);
        if s == 0.0 || nu == 0.0 {
            return NormEstimate { value: s, iterations: it, converged: true };
        }
        if it > 1 && (s - prev).abs() <= opts.tol * s {
            return NormEstimate { value: s, iterations: it, converged: true };
        }
        prev = s;
        v = u.into_iter().map(|x| x / nu).collect();
    }
    NormEstimate { value: prev, iterations: opts.cap, converged: false }
}

/// `[b, P] f = b (P f) - P (b f)`.
pub fn commutator_apply(disc: &ProjectionDiscretization, b: &[C64], f: &[C64]) -> Vec<C64> {
    let pf = disc.project(f);
    let bf: Vec<C64> = b.iter().zip(f).map(|(x, y)| x * y).collect();
    let pbf = disc.project(&bf);
    b.iter().zip(&pf).zip(&pbf).map(|((b, p), q)| b * p - q).collect()
}

/// `H_b f = (I - P)(b P f)`.
pub fn hankel_apply(disc: &ProjectionDiscretization, b: &[C64], f: &[C64]) -> Vec<C64> {
    let pf = disc.project(f);
    let g: Vec<C64> = b.iter().zip(&pf).map(|(x, y)| x * y).collect();
    let pg = disc.project(&g);
    g.iter().zip(&pg).map(|(x, y)| x - y).collect()
}

/// `H_{conj b}^* f = P (b (I - P) f)`.
pub fn conj_hankel_adjoint_apply(disc: &ProjectionDiscretization, b: &[C64], f: &[C64]) -> Vec<C64> {
    let pf = disc.project(f);
    let g: Vec<C64> = b.iter().zip(f).zip(&pf).map(|((b, f), p)| b * (f - p)).collect();
    disc.project(&g)
}

/// Whitened `[b, P]` and its adjoint.
fn whitened_commutator<'a>(
    disc: &'a ProjectionDiscretization,
    b: &'a [C64],
) -> (impl Fn(&[C64]) -> Vec<C64> + 'a, impl Fn(&[C64]) -> Vec<C64> + 'a) {
    let apply = move |u: &[C64]| {
        let au = disc.apply_whitened(u);
        let bu: Vec<C64> = b.iter().zip(u).map(|(x, y)| x * y).collect();
        let abu = disc.apply_whitened(&bu);
        b.iter().zip(&au).zip(&abu).map(|((b, a), c)| b * a - c).collect::<Vec<_>>()
    };
    let adjoint = move |u: &[C64]| {
        let au = disc.apply_whitened(u);
        let bu: Vec<C64> = b.iter().zip(u).map(|(x, y)| x.conj() * y).collect();
        let abu = disc.apply_whitened(&bu);
        abu.iter().zip(b).zip(&au).map(|((c, b), a)| c - b.conj() * a).collect::<Vec<_>>()
    };
    (apply, adjoint)
}

/// Largest singular value of `[b, P]` in the weighted `L^2` norm.
pub fn commutator_norm_l2(disc: &ProjectionDiscretization, b: &[C64], opts: &PowerOptions) -> Result<NormEstimate, OperatorError> {
    let (apply, adjoint) = whitened_commutator(disc, b);
    let est = power_iterate(disc.len(), apply, adjoint, opts);
    let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
    // A constant symbol leaves only round-off, on which the iteration cannot settle.
    if est.converged || est.value <= 1e-12 * scale {
        Ok(est)
    } else {
        Err(OperatorError::Stagnation { estimate: est.value, iterations: est.iterations })
    }
}

/// Dense whitened `[b, P]`: entry `(i, j)` is `(b_i - b_j) P_ij`.
pub fn dense_commutator(disc: &ProjectionDiscretization, b: &[C64]) -> Result<DMatrix<C64>, OperatorError> {
    let p = disc.dense_whitened()?;
    Ok(DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| (b[i] - b[j]) * p[(i, j)]))
}

/// Weighted `L^p` norm on the cloud.
fn lp_norm(disc: &ProjectionDiscretization, f: &[C64], p: f64) -> f64 {
    f.iter().zip(&disc.cloud.weights).map(|(v, w)| v.norm().powf(p) * w).sum::<f64>().powf(1.0 / p)
}

/// `max_f ||[b, P] f||_p / ||f||_p` over `dictionary`: a lower bound for the
/// `L^p` operator norm.
pub fn dictionary_lower_bound(disc: &ProjectionDiscretization, b: &[C64], p: f64, dictionary: &[Vec<C64>]) -> Result<f64, OperatorError> {
    if !(p >= 1.0) {
        return Err(OperatorError::BadExponent(p));
    }
    Ok(dictionary
        .iter()
        .map(|f| {
            let den = lp_norm(disc, f, p);
            if den == 0.0 {
                0.0
            } else {
                lp_norm(disc, &commutator_apply(disc, b, f), p) / den
            }
        })
        .fold(0.0, f64::max))
}

/// Test functions on the cloud: `S_{z,p}` peaking at `peaks` points along the
/// first axis, monomials `w_1^k` for `k < 4`, and `noise` random vectors.
pub fn test_dictionary(domain: &Domain, disc: &ProjectionDiscretization, p: f64, peaks: usize, noise: usize, seed: u64) -> Result<Vec<Vec<C64>>, OperatorError> {
    let n = domain.dim();
    let pts = disc.points();
    let mut out = Vec::new();
    for k in 0..peaks {
        let delta = 0.5 * 0.5f64.powi(k as i32);
        let z = CPoint::basis(n, 0) * C64::new(1.0 - delta, 0.0);
        let s = PeakingKernel::new(domain, &z, p)?;
        out.push(pts.iter().map(|w| s.eval(domain, w).map(|v| C64::new(v, 0.0))).collect::<Result<Vec<_>, _>>()?);
    }
    for k in 0..4 {
        out.push(pts.iter().map(|w| w[0].powu(k)).collect());
    }
    let mut rng = rng_for(seed, 0xd1);
    for _ in 0..noise {
        out.push(pts.iter().map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompactnessReport {
    /// `||[b, P]||`.
    pub bulk: f64,
    /// `(t, ||R_t [b, P]||)` with `R_t` restricting to `delta < t`.
    pub tail: Vec<(f64, f64)>,
}

/// Tail norms of `[b, P]` below decreasing depth cuts. Each tail estimate is
/// the power-iteration lower bound after at most `opts.cap` steps.
pub fn compactness_diagnostic(
    disc: &ProjectionDiscretization,
    b: &[C64],
    cuts: &[f64],
    opts: &PowerOptions,
) -> Result<CompactnessReport, OperatorError> {
    if cuts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OperatorError::BadCuts);
    }
    let (apply, adjoint) = whitened_commutator(disc, b);
    let bulk = power_iterate(disc.len(), &apply, &adjoint, opts).value;
    let delta = &disc.cloud.delta;
    let tail = cuts
        .iter()
        .map(|&t| {
            let mask = |v: Vec<C64>| v.into_iter().zip(delta).map(|(x, &d)| if d < t { x } else { C64::new(0.0, 0.0) }).collect::<Vec<_>>();
            let est = power_iterate(disc.len(), |u| mask(apply(u)), |u| adjoint(&mask(u.to_vec())), opts);
            (t, est.value)
        })
        .collect();
    Ok(CompactnessReport { bulk, tail })
}

/// `||[b, P] S_{z,2}||_2` for `z = (1 - delta) e_1` on the ball, each on its
/// own local cloud. The commutator kernel `K(x, y)(b(x) - b(y))` vanishes on
/// the diagonal, so the inner sum has no self term.
pub fn peaking_commutator_curve(
    domain: &Domain,
    b: &impl SymbolEval,
    deltas: &[f64],
    per_scale: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, OperatorError> {
    if !domain.is_ball() {
        return Err(OperatorError::NotBall);
    }
    let n = domain.dim();
    deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let z = CPoint::basis(n, 0) * C64::new(1.0 - delta, 0.0);
            let cloud = sample_local(domain, &z, per_scale, crate::qmc::derive_seed(seed, i as u64));
            let (sq, _) = normalized_kernel_sqr(domain, &z, &cloud)?;
            let s: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
            let bv = crate::berezin::symbol_values(b, &cloud);
            let pts = &cloud.points;
            let w = &cloud.weights;
            let total: f64 = (0..cloud.len())
                .into_par_iter()
                .map(|a| {
                    let v: C64 = (0..cloud.len())
                        .filter(|&c| c != a)
                        .map(|c| bergman_kernel_ball(&pts[a], &pts[c]) * (bv[a] - bv[c]) * (s[c] * w[c]))
                        .sum();
                    v.norm_sqr() * w[a]
                })
                .sum();
            Ok((delta, total.sqrt()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_lab::{discretize_projection, nystrom_cloud, ProjectorMode};

    fn disc(count: usize, mode: ProjectorMode, seed: u64) -> ProjectionDiscretization {
        let d = Domain::ball(1);
        discretize_projection(&d, &nystrom_cloud(&d, count, 0.02, seed), mode, None).unwrap()
    }

    fn max_abs(v: &[C64]) -> f64 {
        v.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_symbols_commute() {
        let p = disc(800, ProjectorMode::Nystrom, 1);
        let c = vec![C64::new(2.0, -1.0); p.len()];
        let f: Vec<C64> = p.points().iter().map(|w| w[0].conj() + 0.5).collect();
        assert!(max_abs(&commutator_apply(&p, &c, &f)) < 1e-12 * max_abs(&p.project(&f)).max(1.0));
        assert!(commutator_norm_l2(&p, &c, &PowerOptions::default()).unwrap().value < 1e-12);
        let zero = vec![C64::new(0.0, 0.0); p.len()];
        let rep = compactness_diagnostic(&p, &zero, &[0.1, 0.01], &PowerOptions::default()).unwrap();
        assert_eq!(rep.bulk, 0.0);
        assert!(rep.tail.iter().all(|t| t.1 == 0.0));
    }

    #[test]
    fn hankel_identities_hold_for_an_exact_projector() {
        let p = disc(600, ProjectorMode::Spectral, 2);
        let b: Vec<C64> = p.points().iter().map(|w| C64::new((1.0 - w.norm_sqr()).ln(), 0.0) + w[0].conj()).collect();
        let f: Vec<C64> = p.points().iter().map(|w| w[0] * w[0] + w[0].conj()).collect();
        let scale = max_abs(&f) * max_abs(&b);
        // H_b = [b, P] P
        let lhs = hankel_apply(&p, &b, &f);
        let rhs = commutator_apply(&p, &b, &p.project(&f));
        let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, c)| a - c).collect();
        assert!(p.norm(&diff) < 1e-10 * scale, "{}", p.norm(&diff));
        // H_{conj b}^* = -P [b, P]
        let lhs = conj_hankel_adjoint_apply(&p, &b, &f);
        let rhs = p.project(&commutator_apply(&p, &b, &f));
        let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, c)| a + c).collect();
        assert!(p.norm(&diff) < 1e-10 * scale, "{}", p.norm(&diff));
    }

    #[test]
    fn holomorphic_symbol_on_holomorphic_input_has_no_hankel_part() {
        // The cloud stops at |w| = r = 1 - delta_min, where the truncated
        // projection sends w^k to r^{2k+2} z^k. For b = w^2 and f = w + 1,
        // b P_t f - P_t(b P_t f) = z^3 (r^4 - r^12) + z^2 (r^2 - r^8), which
        // vanishes as the cut moves out.
        let d = Domain::ball(1);
        let delta_min = 0.02;
        let r: f64 = 1.0 - delta_min;
        let p = discretize_projection(&d, &nystrom_cloud(&d, 4000, delta_min, 3), ProjectorMode::Nystrom, None).unwrap();
        let b: Vec<C64> = p.points().iter().map(|w| w[0] * w[0]).collect();
        let f: Vec<C64> = p.points().iter().map(|w| w[0] + 1.0).collect();
        let pf = p.project(&f);
        let g: Vec<C64> = b.iter().zip(&pf).map(|(x, y)| x * y).collect();
        for z in [CPoint::from_real_pairs(1, &[0.3, -0.2]), CPoint::from_real_pairs(1, &[-0.1, 0.5])] {
            let pf_z = p.project_at(&z, &f);
            let pg_z = p.project_at(&z, &g);
            let h = z[0] * z[0] * pf_z.value - pg_z.value;
            let exact = z[0].powu(3) * (r.powi(4) - r.powi(12)) + z[0].powu(2) * (r.powi(2) - r.powi(8));
            let se = z[0].norm_sqr() * pf_z.se + pg_z.se;
            assert!((h - exact).norm() < 3.0 * se, "{h} vs {exact} (se {se})");
        }
    }

    #[test]
    fn conjugate_coordinate_against_constant_input() {
        // [conj w, P] 1 = conj w - P(conj w) = conj w on the disk, pointwise.
        let d = Domain::ball(1);
        let cloud = crate::sampling::sample_interior(&d, 4000, &crate::sampling::Shells::dyadic(1.0, 1e-3), 4).unwrap();
        let p = discretize_projection(&d, &cloud, ProjectorMode::Nystrom, None).unwrap();
        let b: Vec<C64> = p.points().iter().map(|w| w[0].conj()).collect();
        let one = vec![C64::new(1.0, 0.0); p.len()];
        for z in [CPoint::from_real_pairs(1, &[0.2, 0.4]), CPoint::from_real_pairs(1, &[-0.6, 0.1])] {
            let p1 = p.project_at(&z, &one);
            let pb = p.project_at(&z, &b);
            let value = z[0].conj() * p1.value - pb.value;
            let se = z[0].norm() * p1.se + pb.se;
            assert!((value - z[0].conj()).norm() < 3.0 * se, "{value} vs {} (se {se})", z[0].conj());
        }
    }

    #[test]
    fn norm_is_homogeneous() {
        let p = disc(800, ProjectorMode::Nystrom, 5);
        let b: Vec<C64> = p.points().iter().map(|w| w[0].conj() * w[0].conj()).collect();
        let opts = PowerOptions::default();
        let base = commutator_norm_l2(&p, &b, &opts).unwrap().value;
        let lam = C64::new(-1.5, 2.0);
        let scaled: Vec<C64> = b.iter().map(|x| x * lam).collect();
        let v = commutator_norm_l2(&p, &scaled, &opts).unwrap().value;
        assert!((v - lam.norm() * base).abs() < 1e-6 * v, "{v} {base}");
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        let p = disc(1500, ProjectorMode::Nystrom, 6);
        let b: Vec<C64> = p.points().iter().map(|w| w[0].conj()).collect();
        let svd = dense_commutator(&p, &b).unwrap().singular_values();
        let top = svd.iter().copied().fold(0.0, f64::max);
        let est = commutator_norm_l2(&p, &b, &PowerOptions { tol: 1e-12, cap: 20_000, seed: 1 }).unwrap();
        assert!((est.value - top).abs() < 1e-6 * top, "{} vs {top}", est.value);
    }

    #[test]
    fn dictionary_bound_sits_below_the_l2_norm() {
        let d = Domain::ball(1);
        let p = disc(1000, ProjectorMode::Nystrom, 7);
        let b: Vec<C64> = p.points().iter().map(|w| w[0].conj()).collect();
        let dict = test_dictionary(&d, &p, 2.0, 4, 4, 1).unwrap();
        let lower = dictionary_lower_bound(&p, &b, 2.0, &dict).unwrap();
        let norm = commutator_norm_l2(&p, &b, &PowerOptions::default()).unwrap().value;
        assert!(lower > 0.0 && lower <= norm * (1.0 + 1e-3), "{lower} {norm}");
        assert!(dictionary_lower_bound(&p, &b, 0.5, &dict).is_err());
    }

    #[test]
    fn cuts_must_decrease() {
        let p = disc(300, ProjectorMode::Nystrom, 8);
        let b = vec![C64::new(0.0, 0.0); p.len()];
        assert_eq!(compactness_diagnostic(&p, &b, &[0.01, 0.1], &PowerOptions::default()), Err(OperatorError::BadCuts));
    }
}
