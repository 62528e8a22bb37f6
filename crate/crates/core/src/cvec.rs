//! Fixed-capacity points of `C^n` for `n <= MAX_DIM`.
//!
//! Everything in the crate works in complex dimension one to three, so a
//! `Copy` array keeps hot loops free of allocation.

use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 3;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A point (or vector) of `C^n`; coordinates beyond `n` are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CPoint {
    n: usize,
    c: [C64; MAX_DIM],
}

impl CPoint {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        CPoint { n, c: [C64::new(0.0, 0.0); MAX_DIM] }
    }

    pub fn new(coords: &[C64]) -> Self {
        let mut p = CPoint::zeros(coords.len());
        p.c[..coords.len()].copy_from_slice(coords);
        p
    }

    pub fn from_real(coords: &[f64]) -> Self {
        let mut p = CPoint::zeros(coords.len());
        for (slot, &x) in p.c.iter_mut().zip(coords) {
            *slot = C64::new(x, 0.0);
        }
        p
    }

    /// Unit coordinate vector `e_j`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut p = CPoint::zeros(n);
        p.c[j] = C64::new(1.0, 0.0);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coords(&self) -> &[C64] {
        &self.c[..self.n]
    }

    #[inline]
    pub fn coords_mut(&mut self) -> &mut [C64] {
        &mut self.c[..self.n]
    }

    /// `<a, b> = sum a_j conj(b_j)`.
    #[inline]
    pub fn inner(&self, other: &CPoint) -> C64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = C64::new(0.0, 0.0);
        for j in 0..self.n {
            s += self.c[j] * other.c[j].conj();
        }
        s
    }

    /// Bilinear pairing `sum a_j b_j` without conjugation.
    #[inline]
    pub fn dot(&self, other: &CPoint) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..self.n {
            s += self.c[j] * other.c[j];
        }
        s
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.coords().iter().map(|z| z.norm_sqr()).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> CPoint {
        let mut p = *self;
        for z in p.coords_mut() {
            *z = z.conj();
        }
        p
    }

    pub fn scale(&self, s: C64) -> CPoint {
        let mut p = *self;
        for z in p.coords_mut() {
            *z *= s;
        }
        p
    }

    pub fn normalized(&self) -> CPoint {
        *self * (1.0 / self.norm())
    }

    /// Real coordinates `(x_1, y_1, ..., x_n, y_n)`.
    pub fn to_real(&self) -> [f64; 2 * MAX_DIM] {
        let mut out = [0.0; 2 * MAX_DIM];
        for j in 0..self.n {
            out[2 * j] = self.c[j].re;
            out[2 * j + 1] = self.c[j].im;
        }
        out
    }

    pub fn from_real_pairs(n: usize, x: &[f64]) -> CPoint {
        let mut p = CPoint::zeros(n);
        for j in 0..n {
            p.c[j] = C64::new(x[2 * j], x[2 * j + 1]);
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for CPoint {
    type Output = C64;
    #[inline]
    fn index(&self, j: usize) -> &C64 {
        &self.coords()[j]
    }
}

impl IndexMut<usize> for CPoint {
    #[inline]
    fn index_mut(&mut self, j: usize) -> &mut C64 {
        &mut self.coords_mut()[j]
    }
}

impl Add for CPoint {
    type Output = CPoint;
    #[inline]
    fn add(mut self, rhs: CPoint) -> CPoint {
        debug_assert_eq!(self.n, rhs.n);
        for j in 0..self.n {
            self.c[j] += rhs.c[j];
        }
        self
    }
}

impl Sub for CPoint {
    type Output = CPoint;
    #[inline]
    fn sub(mut self, rhs: CPoint) -> CPoint {
        debug_assert_eq!(self.n, rhs.n);
        for j in 0..self.n {
            self.c[j] -= rhs.c[j];
        }
        self
    }
}

impl Neg for CPoint {
    type Output = CPoint;
    fn neg(self) -> CPoint {
        self * -1.0
    }
}

impl Mul<f64> for CPoint {
    type Output = CPoint;
    #[inline]
    fn mul(mut self, s: f64) -> CPoint {
        for j in 0..self.n {
            self.c[j] *= s;
        }
        self
    }
}

impl Mul<C64> for CPoint {
    type Output = CPoint;
    #[inline]
    fn mul(self, s: C64) -> CPoint {
        self.scale(s)
    }
}

/// Small dense complex matrix of size `n x n`, `n <= MAX_DIM`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub a: [[C64; MAX_DIM]; MAX_DIM],
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, a: [[C64::new(0.0, 0.0); MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for j in 0..n {
            m.a[j][j] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn det(&self) -> C64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            3 => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
            _ => unreachable!(),
        }
    }

    /// Matrix-vector product `M v`.
    pub fn apply(&self, v: &CPoint) -> CPoint {
        let mut out = CPoint::zeros(self.n);
        for j in 0..self.n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..self.n {
                s += self.a[j][k] * v[k];
            }
            out[j] = s;
        }
        out
    }

    /// Hermitian form `v^* M v`.
    pub fn hermitian_form(&self, v: &CPoint) -> C64 {
        let mv = self.apply(v);
        let mut s = C64::new(0.0, 0.0);
        for j in 0..self.n {
            s += v[j].conj() * mv[j];
        }
        s
    }

    /// Symmetric bilinear form `v^T M v`.
    pub fn bilinear_form(&self, v: &CPoint) -> C64 {
        self.apply(v).dot(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_conjugates_second_slot() {
        let a = CPoint::new(&[c64(0.0, 1.0)]);
        let b = CPoint::new(&[c64(0.0, 1.0)]);
        assert_eq!(a.inner(&b), c64(1.0, 0.0));
        assert_eq!(a.dot(&b), c64(-1.0, 0.0));
    }

    #[test]
    fn det_of_identity_is_one() {
        for n in 1..=3 {
            assert_eq!(CMat::identity(n).det(), c64(1.0, 0.0));
        }
    }
}
