//! One-dimensional k-means: an exact dynamic programme when there are few
//! distinct values, otherwise Lloyd iterations from k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const SHIFT_TOLERANCE: f64 = 1e-9;
/// Independent k-means++ restarts; the lowest final objective wins.
pub const RESTARTS: usize = 10;
/// Inputs with at most this many distinct values are clustered exactly.
pub const EXACT_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    /// Cluster centres, strictly ascending.
    pub centroids: Vec<f64>,
    /// Cluster index per input sample, in input order.
    pub assignment: Vec<usize>,
    /// Smallest sample value assigned to each cluster.
    pub per_cluster_min: Vec<f64>,
    pub requested_clusters: usize,
    /// Set when fewer clusters than requested could be formed (too few
    /// distinct values, or a cluster emptied out during iteration).
    pub reduced: bool,
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
    /// Objective of the winning run, one entry per Lloyd iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }
}

struct Run {
    centroids: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
}

fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c) * (v - c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn seed_plus_plus(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centroids = vec![values[rng.random_range(0..values.len())]];
    let mut dist: Vec<f64> = values.iter().map(|&v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = values.len() - 1;
        for (i, &d) in dist.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        // rounding can leave `pick` on a zero-distance sample
        if dist[pick] == 0.0 {
            pick = dist
                .iter()
                .enumerate()
                .rev()
                .find(|(_, &d)| d > 0.0)
                .map(|(i, _)| i)
                .expect("positive total implies a positive distance");
        }
        let c = values[pick];
        centroids.push(c);
        for (d, &v) in dist.iter_mut().zip(values) {
            *d = d.min((v - c) * (v - c));
        }
    }
    centroids.sort_by(f64::total_cmp);
    centroids
}

fn lloyd(values: &[f64], mut centroids: Vec<f64>) -> Run {
    let k = centroids.len();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        let mut objective = 0.0;
        for &v in values {
            let i = nearest(&centroids, v);
            objective += (v - centroids[i]).powi(2);
            sums[i] += v;
            counts[i] += 1;
        }
        history.push(objective);
        let mut shift: f64 = 0.0;
        for i in 0..k {
            if counts[i] > 0 {
                let next = sums[i] / counts[i] as f64;
                shift = shift.max((next - centroids[i]).abs());
                centroids[i] = next;
            }
        }
        centroids.sort_by(f64::total_cmp);
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    Run {
        centroids,
        history,
        iterations,
    }
}

/// Globally optimal partition of sorted distinct values (with
/// multiplicities) into `k` contiguous groups; returns the group means.
fn exact_partition(distinct: &[f64], counts: &[f64], k: usize) -> Vec<f64> {
    let m = distinct.len();
    let mut w = vec![0.0; m + 1];
    let mut s1 = vec![0.0; m + 1];
    let mut s2 = vec![0.0; m + 1];
    for i in 0..m {
        w[i + 1] = w[i] + counts[i];
        s1[i + 1] = s1[i] + counts[i] * distinct[i];
        s2[i + 1] = s2[i] + counts[i] * distinct[i] * distinct[i];
    }
    let cost = |i: usize, j: usize| {
        let (n, a) = (w[j] - w[i], s1[j] - s1[i]);
        (s2[j] - s2[i] - a * a / n).max(0.0)
    };
    // best[c][j]: c + 1 groups over the first j values
    let mut best = vec![vec![f64::INFINITY; m + 1]; k];
    let mut cut = vec![vec![0usize; m + 1]; k];
    for j in 1..=m {
        best[0][j] = cost(0, j);
    }
    for c in 1..k {
        for j in c + 1..=m {
            for i in c..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    cut[c][j] = i;
                }
            }
        }
    }
    let mut means = vec![0.0; k];
    let mut j = m;
    for c in (0..k).rev() {
        let i = if c == 0 { 0 } else { cut[c][j] };
        means[c] = (s1[j] - s1[i]) / (w[j] - w[i]);
        j = i;
    }
    means
}

/// Clusters scalar samples into (at most) `clusters` groups.
///
/// When `clusters` exceeds the number of distinct values it is reduced to
/// that count and `reduced` is set. Deterministic for a fixed `seed`; the
/// seed is unused on the exact path.
pub fn kmeans_1d(values: &[f64], clusters: usize, seed: u64) -> Result<KMeansResult> {
    if values.is_empty() {
        return Err(Error::domain("kmeans_1d: no samples"));
    }
    if clusters == 0 {
        return Err(Error::domain("kmeans_1d: clusters must be at least 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("kmeans_1d: non-finite sample"));
    }

    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let k = clusters.min(distinct.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Run)> = None;
    let restarts = if k == 1 { 1 } else { RESTARTS };
    if distinct.len() <= EXACT_LIMIT {
        let mut counts = vec![0.0; distinct.len()];
        for v in values {
            let i = distinct.partition_point(|d| d < v);
            counts[i] += 1.0;
        }
        let centroids = exact_partition(&distinct, &counts, k);
        let objective = values.iter().map(|&v| (v - centroids[nearest(&centroids, v)]).powi(2)).sum();
        best = Some((
            objective,
            Run {
                centroids,
                history: vec![objective],
                iterations: 0,
            },
        ));
    }
    for _ in 0..if best.is_some() { 0 } else { restarts } {
        let init = seed_plus_plus(values, k, &mut rng);
        let run = lloyd(values, init);
        let objective: f64 = values
            .iter()
            .map(|&v| (v - run.centroids[nearest(&run.centroids, v)]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, run));
        }
    }
    let (_, run) = best.expect("at least one restart");

    // Drop clusters that ended up with no members.
    let mut counts = vec![0usize; run.centroids.len()];
    for &v in values {
        counts[nearest(&run.centroids, v)] += 1;
    }
    let centroids: Vec<f64> = run
        .centroids
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(&c, _)| c)
        .collect();

    let mut assignment = Vec::with_capacity(values.len());
    let mut per_cluster_min = vec![f64::INFINITY; centroids.len()];
    let mut objective = 0.0;
    for &v in values {
        let i = nearest(&centroids, v);
        assignment.push(i);
        per_cluster_min[i] = per_cluster_min[i].min(v);
        objective += (v - centroids[i]).powi(2);
    }

    Ok(KMeansResult {
        reduced: centroids.len() < clusters,
        centroids,
        assignment,
        per_cluster_min,
        requested_clusters: clusters,
        objective,
        history: run.history,
        iterations: run.iterations,
    })
}
