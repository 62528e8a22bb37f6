//! Seeded random streams and a digit-permutation scrambled Halton sequence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cvec::{CPoint, C64, MAX_DIM};

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Independent ChaCha stream for `(seed, stream)`; every random draw in the
/// crate goes through here so runs are reproducible bit for bit.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a parent seed with a label so sub-experiments draw disjoint streams.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Halton points with an independent random digit permutation per base and
/// digit position.
#[derive(Clone, Debug)]
pub struct ScrambledHalton {
    bases: Vec<u32>,
    perms: Vec<Vec<Vec<u16>>>,
}

impl ScrambledHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} exceeds {}", PRIMES.len());
        let mut rng = rng_for(seed, 0x4841_4c54);
        let bases: Vec<u32> = PRIMES[..dim].to_vec();
        let perms = bases
            .iter()
            .map(|&b| {
                let depth = (53.0 / (b as f64).log2()).ceil() as usize;
                (0..depth)
                    .map(|_| {
                        let mut p: Vec<u16> = (0..b as u16).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect()
            })
            .collect();
        ScrambledHalton { bases, perms }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// Writes point `index` into `out[..dim]`; values lie in `[0, 1)`.
    pub fn fill(&self, index: u64, out: &mut [f64]) {
        for (d, (&b, perm)) in self.bases.iter().zip(&self.perms).enumerate() {
            let b64 = b as u64;
            let inv = 1.0 / b as f64;
            let mut i = index;
            let mut scale = inv;
            let mut acc = 0.0;
            for digit_perm in perm {
                let digit = (i % b64) as usize;
                i /= b64;
                acc += digit_perm[digit] as f64 * scale;
                scale *= inv;
            }
            out[d] = acc.min(1.0 - f64::EPSILON);
        }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.fill(index, &mut v);
        v
    }
}

/// Uniform point of the unit sphere `S^{2n-1}` from `2n - 1` unit-interval
/// coordinates (Hopf-type coordinates, measure preserving).
pub fn sphere_point(n: usize, u: &[f64]) -> CPoint {
    use std::f64::consts::TAU;
    if n == 1 {
        return CPoint::new(&[C64::from_polar(1.0, TAU * u[0])]);
    }
    let v = ball_point(n - 1, &u[..2 * n - 2]);
    let r1 = (1.0 - v.norm_sqr()).max(0.0).sqrt();
    let mut c = [C64::new(0.0, 0.0); MAX_DIM];
    c[0] = C64::from_polar(r1, TAU * u[2 * n - 2]);
    c[1..n].copy_from_slice(v.coords());
    CPoint::new(&c[..n])
}

/// Uniform point of the unit ball of `C^m` from `2m` unit-interval coordinates.
pub fn ball_point(m: usize, u: &[f64]) -> CPoint {
    let s = sphere_point(m, &u[..2 * m - 1]);
    s * u[2 * m - 1].powf(1.0 / (2 * m) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_in_unit_interval_and_equidistributed() {
        let h = ScrambledHalton::new(4, 7);
        let mut sums = [0.0; 4];
        let n = 4096;
        for i in 0..n {
            let p = h.point(i);
            for (s, &x) in sums.iter_mut().zip(&p) {
                assert!((0.0..1.0).contains(&x));
                *s += x;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 0.5).abs() < 5e-3);
        }
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let h = ScrambledHalton::new(6, 3);
        for n in 1..=3 {
            for i in 0..50 {
                let p = h.point(i);
                assert!((sphere_point(n, &p).norm() - 1.0).abs() < 1e-14);
                assert!(ball_point(n, &p[..2 * n]).norm() <= 1.0);
            }
        }
    }

    #[test]
    fn same_seed_same_points() {
        let a = ScrambledHalton::new(3, 11);
        let b = ScrambledHalton::new(3, 11);
        let c = ScrambledHalton::new(3, 12);
        assert_eq!(a.point(17), b.point(17));
        assert_ne!(a.point(17), c.point(17));
    }
}
