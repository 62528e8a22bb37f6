use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::SymbolEval;
use crate::berezin::symbol_values;
use crate::cvec::{CPoint, C64};
use crate::domain::Domain;
use crate::metrics::PolyFrame;
use crate::sampling::{sample_kobayashi_ball, Estimate, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdaError {
    #[error("holomorphic polynomials of degree {degree} are rank deficient on the ball sample; reduce the degree")]
    RankDeficient { degree: usize },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Multi-indices of total degree `<= degree` in `n` variables, graded order.
fn multi_indices(n: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; n]];
    for d in 1..=degree as u32 {
        let mut level = Vec::new();
        let mut stack = vec![(0usize, d, vec![0u32; n])];
        while let Some((j, left, mut alpha)) = stack.pop() {
            if j == n - 1 {
                alpha[j] = left;
                level.push(alpha);
                continue;
            }
            for a in (0..=left).rev() {
                alpha[j] = a;
                stack.push((j + 1, left - a, alpha.clone()));
            }
        }
        level.sort();
        out.extend(level);
    }
    out
}

/// Upper bound for `b_{r,2}(z)`: the weighted least-squares residual of `b`
/// against holomorphic polynomials of total degree `<= degree` on `E(z, r)`.
/// Coordinates are the normal frame at `pi(z)`, centred and scaled on the
/// sample to keep the design matrix well conditioned.
pub fn bda2_distance(
    domain: &Domain,
    b: &impl SymbolEval,
    z: &CPoint,
    r: f64,
    degree: usize,
    count: usize,
    seed: u64,
) -> Result<Estimate, BdaError> {
    let n = domain.dim();
    let bc = sample_kobayashi_ball(domain, z, r, count, seed)?;
    let cloud = &bc.cloud;
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.weights[i] > 0.0).collect();
    let frame = PolyFrame::at(domain, z).map_err(|e| SamplingError::BadParameter(e.to_string()))?;
    let mass: f64 = keep.iter().map(|&i| cloud.weights[i]).sum();
    let coords: Vec<CPoint> = keep.iter().map(|&i| frame.coords(&cloud.points[i])).collect();
    let mut centre = CPoint::zeros(n);
    for (c, &i) in coords.iter().zip(&keep) {
        centre = centre + *c * (cloud.weights[i] / mass);
    }
    let mut scale = [0.0f64; crate::cvec::MAX_DIM];
    for (c, &i) in coords.iter().zip(&keep) {
        for j in 0..n {
            scale[j] += (c[j] - centre[j]).norm_sqr() * cloud.weights[i] / mass;
        }
    }
    let alphas = multi_indices(n, degree);
    let values = symbol_values(b, cloud);
    let m = keep.len();
    let mut a = DMatrix::<C64>::zeros(m, alphas.len());
    let mut rhs = DVector::<C64>::zeros(m);
    for (row, (c, &i)) in coords.iter().zip(&keep).enumerate() {
        let sw = cloud.weights[i].sqrt();
        let u: Vec<C64> = (0..n).map(|j| (c[j] - centre[j]) / scale[j].sqrt().max(1e-300)).collect();
        for (col, alpha) in alphas.iter().enumerate() {
            let mut v = C64::new(sw, 0.0);
            for j in 0..n {
                v *= u[j].powu(alpha[j]);
            }
            a[(row, col)] = v;
        }
        rhs[row] = values[i] * sw;
    }
    if m < alphas.len() {
        return Err(BdaError::RankDeficient { degree });
    }
    let qr = a.clone().qr();
    let rmat = qr.r();
    let top = (0..alphas.len()).map(|k| rmat[(k, k)].norm()).fold(0.0, f64::max);
    if (0..alphas.len()).any(|k| rmat[(k, k)].norm() <= 1e-10 * top) {
        return Err(BdaError::RankDeficient { degree });
    }
    let qh_b = qr.q().adjoint() * &rhs;
    let coef = rmat.solve_upper_triangular(&qh_b).ok_or(BdaError::RankDeficient { degree })?;
    let resid = rhs - a * coef;
    let terms: Vec<f64> = resid.iter().map(|x| x.norm_sqr() / mass).collect();
    let total: f64 = terms.iter().sum();
    let k = terms.len() as f64;
    let mean = total / k;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() * k / (k - 1.0);
    let value = total.sqrt();
    let se = if total > 0.0 { value * var.sqrt() / (2.0 * total) } else { 0.0 };
    Ok(Estimate { value, se })
}
