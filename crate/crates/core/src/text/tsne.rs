//! Exact (O(n²)) t-SNE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{sq_dist, Matrix};
use super::TextError;

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 200;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated P and the initial momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
    /// KL divergence is recorded every this many iterations and at the end.
    pub kl_every: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
            kl_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    /// `n × 2` layout.
    pub coords: Matrix,
    pub perplexity_used: f64,
    /// Conditional entropy (nats) of each point's input distribution after
    /// the bandwidth search.
    pub entropies: Vec<f64>,
    /// `(iteration, KL(P‖Q))` pairs, iterations counted from 1.
    pub kl_trace: Vec<(usize, f64)>,
}

impl TsneResult {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_trace.iter().find(|(i, _)| *i == iteration).map(|(_, kl)| *kl)
    }

    pub fn target_entropy(&self) -> f64 {
        self.perplexity_used.ln()
    }
}

/// Entropy and unnormalized weights of row `i` at precision `beta`.
fn row_entropy(dist: &[f64], i: usize, beta: f64, dmin: f64, weights: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, w)) in dist.iter().zip(weights.iter_mut()).enumerate() {
        if j == i {
            *w = 0.0;
            continue;
        }
        *w = (-beta * (d - dmin)).exp();
        sum += *w;
        weighted += *w * (d - dmin);
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    sum.ln() + beta * weighted / sum
}

/// Binary search over the Gaussian precision of one point.
fn conditional_row(dist: &[f64], i: usize, target: f64) -> (Vec<f64>, f64) {
    let dmin = dist.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let mut weights = vec![0.0; dist.len()];
    let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
    let mut h = row_entropy(dist, i, beta, dmin, &mut weights);
    for _ in 0..MAX_BISECTIONS {
        if (h - target).abs() < ENTROPY_TOL {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { 0.5 * (beta + hi) };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        h = row_entropy(dist, i, beta, dmin, &mut weights);
    }
    (weights, h)
}

fn joint_probabilities(x: &Matrix, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist: Vec<f64> = (0..n).map(|j| sq_dist(x.row(i), x.row(j))).collect();
            conditional_row(&dist, i, target)
        })
        .collect();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((rows[i].0[j] + rows[j].0[i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    (p, rows.into_iter().map(|(_, h)| h).collect())
}

fn student_t(y: &[[f64; 2]], i: usize, j: usize) -> f64 {
    let (dx, dy) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
    1.0 / (1.0 + dx * dx + dy * dy)
}

fn normalizer(y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let rows: Vec<f64> = (0..n).into_par_iter().map(|i| (0..n).filter(|&j| j != i).map(|j| student_t(y, i, j)).sum()).collect();
    rows.iter().sum()
}

fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let z = normalizer(y);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[i * n + j];
                    pij * (pij / (student_t(y, i, j) / z).max(P_FLOOR)).ln()
                })
                .sum()
        })
        .collect();
    rows.iter().sum()
}

/// Embeds the rows of `x` in two dimensions.
pub fn tsne(x: &Matrix, params: &TsneParams) -> Result<TsneResult, TextError> {
    let n = x.rows();
    if n < 5 {
        return Err(TextError::TooFewPoints(n));
    }
    if !(params.perplexity > 0.0) || params.iterations == 0 {
        return Err(TextError::InvalidArgument("perplexity and iterations must be positive".into()));
    }
    x.check_finite()?;
    let perplexity = if (n as f64) < 3.0 * params.perplexity { ((n - 1) / 3).max(1) as f64 } else { params.perplexity };
    let (p, entropies) = joint_probabilities(x, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut kl_trace = Vec::new();

    for iter in 1..=params.iterations {
        let early = iter <= params.exaggeration_iters;
        let exaggeration = if early { params.early_exaggeration } else { 1.0 };
        let momentum = if early { params.initial_momentum } else { params.final_momentum };
        let z = normalizer(&y);
        let grads: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let num = student_t(&y, i, j);
                    let coef = 4.0 * (exaggeration * p[i * n + j] - num / z) * num;
                    g[0] += coef * (y[i][0] - y[j][0]);
                    g[1] += coef * (y[i][1] - y[j][1]);
                }
                g
            })
            .collect();
        for i in 0..n {
            for c in 0..2 {
                let same_sign = (grads[i][c] > 0.0) == (velocity[i][c] > 0.0);
                let gain: f64 = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gain.max(0.01);
                velocity[i][c] = momentum * velocity[i][c] - params.learning_rate * gains[i][c] * grads[i][c];
                y[i][c] += velocity[i][c];
            }
        }
        for c in 0..2 {
            let mean = y.iter().map(|v| v[c]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[c] -= mean);
        }
        if iter % params.kl_every.max(1) == 0 || iter == params.iterations {
            kl_trace.push((iter, kl_divergence(&p, &y)));
        }
    }

    let coords = Matrix::from_rows(&y.iter().map(|v| v.to_vec()).collect::<Vec<_>>())?;
    coords.check_finite()?;
    Ok(TsneResult { coords, perplexity_used: perplexity, entropies, kl_trace })
}
