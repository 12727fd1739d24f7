use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::keywords::ClusterKeywords;
use super::linalg::{sq_dist, Matrix};
use super::TextError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams { k: 5, seed: 0, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Filled in by the pipeline from the document texts.
    pub keywords: Vec<ClusterKeywords>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterReport {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: each new center is drawn with probability proportional
/// to its squared distance from the nearest chosen center.
fn seed_centroids(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // remaining points coincide with centers
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    chosen.iter().map(|&i| x.row(i).to_vec()).collect()
}

/// Lloyd's algorithm from a seeded k-means++ start. Empty clusters are
/// re-seeded at the point farthest from its centroid.
pub fn kmeans(x: &Matrix, params: &KMeansParams) -> Result<ClusterReport, TextError> {
    let (n, d, k) = (x.rows(), x.cols(), params.k);
    if k == 0 || k > n {
        return Err(TextError::InvalidArgument(format!("k={k} must be in 1..={n}")));
    }
    x.check_finite()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = seed_centroids(x, k, &mut rng);
    let mut labels = vec![0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter.max(1) {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = (0..n).into_par_iter().map(|i| nearest(x.row(i), &centroids)).collect();
        labels = assigned.iter().map(|a| a.0).collect();
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            sums[l].iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a cluster with two points");
            let old = labels[far];
            counts[old] -= 1;
            sums[old].iter_mut().zip(x.row(far)).for_each(|(s, v)| *s -= v);
            labels[far] = c;
            counts[c] = 1;
            sums[c] = x.row(far).to_vec();
            dist[far] = 0.0;
        }
        trace.push(dist.iter().sum());

        let mut shift: f64 = 0.0;
        for c in 0..k {
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&mean, &centroids[c]).sqrt());
            centroids[c] = mean;
        }
        if shift < params.tol {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(x.row(i), &centroids[labels[i]])).sum();
    Ok(ClusterReport { k, labels, centroids, keywords: Vec::new(), inertia, inertia_trace: trace, iterations })
}
