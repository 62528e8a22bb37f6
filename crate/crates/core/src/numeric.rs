//! Small numerical helpers: compensated sums, Gauss-Legendre rules, line fits.

use crate::cvec::C64;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Kahan) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Kahan {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = Kahan::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanC {
    re: Kahan,
    im: Kahan,
}

impl KahanC {
    #[inline]
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Kahan>().value()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Integrates `f` on `[a, b]` with an `m`-point Gauss-Legendre rule.
pub fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "line fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LineFit { slope, intercept, slope_se }
}

/// Least-squares fit of `y ~ scale * x^{-exponent} + offset` in relative
/// error; the exponent is scanned on `[0, 4]` and then refined by golden
/// section, with `scale` and `offset` solved linearly at each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOffsetFit {
    pub exponent: f64,
    pub scale: f64,
    pub offset: f64,
    /// Root-mean-square relative residual.
    pub rel_rms: f64,
}

pub fn fit_power_offset(x: &[f64], y: &[f64]) -> PowerOffsetFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 3, "power-offset fit needs three points");
    let solve = |e: f64| -> PowerOffsetFit {
        // Rows (x^-e / y, 1 / y) against target 1.
        let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let u = xi.powf(-e) / yi;
            let v = 1.0 / yi;
            s11 += u * u;
            s12 += u * v;
            s22 += v * v;
            t1 += u;
            t2 += v;
        }
        let det = s11 * s22 - s12 * s12;
        let (scale, offset) = if det.abs() > 1e-300 { ((t1 * s22 - t2 * s12) / det, (s11 * t2 - s12 * t1) / det) } else { (t1 / s11, 0.0) };
        let rss: f64 = x.iter().zip(y).map(|(&xi, &yi)| ((scale * xi.powf(-e) + offset) / yi - 1.0).powi(2)).sum();
        PowerOffsetFit { exponent: e, scale, offset, rel_rms: (rss / x.len() as f64).sqrt() }
    };
    let grid = 400;
    let best = (0..=grid).map(|i| 4.0 * i as f64 / grid as f64).min_by(|a, b| solve(*a).rel_rms.total_cmp(&solve(*b).rel_rms)).unwrap();
    let (mut lo, mut hi) = ((best - 0.01).max(0.0), (best + 0.01).min(4.0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if solve(a).rel_rms < solve(b).rel_rms {
            hi = b;
        } else {
            lo = a;
        }
    }
    solve(0.5 * (lo + hi))
}

/// Quintic smoothstep: 0 at `t <= 0`, 1 at `t >= 1`, C^2 in between.
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

pub fn smoothstep5_deriv(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6);
        let v = gl_integrate(|x| x.powi(10) + 3.0 * x.powi(3), -1.0, 1.0, &rule);
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        let v = gl_integrate(|x| x * x, 0.0, 3.0, &rule);
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn kahan_recovers_cancelled_mass() {
        let mut k = Kahan::new();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep5(0.0), 0.0);
        assert_eq!(smoothstep5(1.0), 1.0);
        assert_eq!(smoothstep5(0.5), 0.5);
    }

    #[test]
    fn power_offset_fit_recovers_exact_data() {
        let x: Vec<f64> = (0..8).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.7 * t.powf(-0.5) - 1.2).collect();
        let f = fit_power_offset(&x, &y);
        assert!((f.exponent - 0.5).abs() < 1e-8, "{f:?}");
        assert!((f.scale - 1.7).abs() < 1e-6 && (f.offset + 1.2).abs() < 1e-5, "{f:?}");
    }
}
