//! Lloyd's k-means on raw counts (Euclidean), used to seed EM.

use rand::Rng;

use crate::data::CountMatrix;
use crate::error::{invalid, Result};
use crate::parallel::map_indexed;
use crate::rng::{derive_seed, stream};

pub const MAX_LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub sse: f64,
}

fn sq_dist(row: &[u64], c: &[f64]) -> f64 {
    row.iter().zip(c).map(|(&x, &m)| (x as f64 - m).powi(2)).sum()
}

fn nearest(row: &[u64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let dist = sq_dist(row, c);
        if dist < best.1 {
            best = (k, dist);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids<R: Rng + ?Sized>(x: &CountMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = x.n();
    let to_f = |i: usize| x.row(i).iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let mut centroids = vec![to_f(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if t < w {
                    idx = i;
                    break;
                }
                t -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = to_f(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// One Lloyd run from k-means++ seeding.
pub fn lloyd<R: Rng + ?Sized>(x: &CountMatrix, k: usize, rng: &mut R) -> Result<KMeans> {
    let (n, d) = (x.n(), x.d());
    if k == 0 || k > n {
        return invalid(format!("k-means needs 1 <= k <= n, got k={k}, n={n}"));
    }
    let mut centroids = seed_centroids(x, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut sse = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERS {
        let assigned = map_indexed(n, |i| nearest(x.row(i), &centroids));
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        sse = assigned.iter().map(|a| a.1).sum();
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(x.row(i)) {
                *s += v as f64;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(KMeans { centroids, labels, sse })
}

/// Lowest-SSE result over `runs` independent seeded runs.
pub fn best_of(x: &CountMatrix, k: usize, runs: usize, seed: u64) -> Result<KMeans> {
    let mut best: Option<KMeans> = None;
    for r in 0..runs.max(1) {
        let mut rng = stream(derive_seed(seed, &[k as u64]), r as u64);
        let km = lloyd(x, k, &mut rng)?;
        if best.as_ref().is_none_or(|b| km.sse < b.sse) {
            best = Some(km);
        }
    }
    Ok(best.expect("at least one run"))
}
