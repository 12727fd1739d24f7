use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, orthonormalize, symmetric_eigen, Matrix};
use super::{TextError, VectorSet};

/// Dimension up to which the covariance is formed explicitly.
const EXPLICIT_MAX_DIM: usize = 300;
const OVERSAMPLE: usize = 10;
const MAX_SWEEPS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// `n × k` projections of the centered data.
    pub scores: Matrix,
    /// Orthonormal principal axes, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
    pub total_variance: f64,
    /// Fewer than `k` directions carry variance.
    pub rank_deficient: bool,
    /// False when the iterative solver stopped before meeting its tolerance.
    pub converged: bool,
}

/// Covariance-vector product `Xᵀ X v / (n-1)` without forming the covariance.
fn cov_apply(x: &Matrix, v: &[f64], denom: f64) -> Vec<f64> {
    let xv: Vec<f64> = x.iter_rows().map(|r| dot(r, v)).collect();
    let mut out = vec![0.0; x.cols()];
    for (r, s) in x.iter_rows().zip(&xv) {
        out.iter_mut().zip(r).for_each(|(o, a)| *o += s * a);
    }
    out.iter_mut().for_each(|o| *o /= denom);
    out
}

fn explicit(x: &Matrix, denom: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = x.cols();
    let upper: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| (i..d).map(|j| x.iter_rows().map(|r| r[i] * r[j]).sum::<f64>() / denom).collect())
        .collect();
    let mut c = vec![0.0; d * d];
    for (i, row) in upper.iter().enumerate() {
        for (o, v) in row.iter().enumerate() {
            c[i * d + i + o] = *v;
            c[(i + o) * d + i] = *v;
        }
    }
    symmetric_eigen(&c, d)
}

/// Block subspace iteration with Rayleigh–Ritz extraction.
fn iterative(x: &Matrix, k: usize, denom: f64) -> (Vec<f64>, Vec<Vec<f64>>, bool) {
    let d = x.cols();
    let m = (k + OVERSAMPLE).min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA1_AB1E);
    let mut q: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    orthonormalize(&mut q);
    let mut last = (Vec::new(), Vec::new());
    for _ in 0..MAX_SWEEPS {
        let z: Vec<Vec<f64>> = q.par_iter().map(|v| cov_apply(x, v, denom)).collect();
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                h[i * m + j] = 0.5 * (dot(&q[i], &z[j]) + dot(&q[j], &z[i]));
            }
        }
        let (theta, s) = symmetric_eigen(&h, m);
        let combine = |basis: &[Vec<f64>]| -> Vec<Vec<f64>> {
            s.iter()
                .map(|coef| {
                    let mut out = vec![0.0; d];
                    for (c, b) in coef.iter().zip(basis) {
                        out.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
                    }
                    out
                })
                .collect()
        };
        let ritz = combine(&q);
        let cz = combine(&z);
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let residual = (0..k)
            .map(|i| cz[i].iter().zip(&ritz[i]).map(|(a, b)| (a - theta[i] * b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if residual <= 1e-10 * scale || m == d {
            return (theta, ritz, true);
        }
        last = (theta, ritz);
        q = cz;
        orthonormalize(&mut q);
    }
    (last.0, last.1, false)
}

/// Projects mean-centered rows onto the top `k` eigenvectors of their covariance.
pub fn pca(vectors: &VectorSet, k: usize) -> Result<PcaResult, TextError> {
    let (n, d) = (vectors.matrix.rows(), vectors.matrix.cols());
    if k == 0 || k > n.min(d) {
        return Err(TextError::InvalidArgument(format!("k={k} must be in 1..={}", n.min(d))));
    }
    let mean = vectors.matrix.column_means();
    let x = vectors.matrix.centered(&mean);
    let denom = (n.max(2) - 1) as f64;
    let total_variance = x.iter_rows().map(|r| dot(r, r)).sum::<f64>() / denom;

    let (values, mut axes, converged) = if d <= EXPLICIT_MAX_DIM {
        let (v, a) = explicit(&x, denom);
        (v, a, true)
    } else {
        iterative(&x, k, denom)
    };
    axes.truncate(k);
    for axis in &mut axes {
        let pivot = axis.iter().copied().fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
    }

    let cutoff = 1e-12 * total_variance;
    let explained_variance: Vec<f64> = values[..k].iter().map(|&v| if v > cutoff { v } else { 0.0 }).collect();
    let rank_deficient = explained_variance.iter().any(|&v| v == 0.0);
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|&v| if total_variance > 0.0 { v / total_variance } else { 0.0 })
        .collect();

    let mut scores = Matrix::zeros(n, k);
    for i in 0..n {
        for (j, axis) in axes.iter().enumerate() {
            scores.set(i, j, dot(x.row(i), axis));
        }
    }
    Ok(PcaResult { scores, components: axes, explained_variance, explained_variance_ratio, mean, total_variance, rank_deficient, converged })
}
