//! Maximum mean discrepancy over a bank of Gaussian kernels.
//!
//! The statistic is the biased (V-statistic) estimate per bandwidth,
//! `MMD² = mean k(x,x') + mean k(y,y') − 2 mean k(x,y)`, and the reported value
//! is the maximum over bandwidths of `sqrt(max(MMD², 0))`.
//!
//! Count samples repeat heavily, so both sets are first collapsed to distinct
//! points with multiplicities. Exact mode then accumulates integer pair
//! weights per squared distance and evaluates every bandwidth from that
//! histogram; summation runs in ascending distance order, which makes the
//! statistic bitwise symmetric in its arguments and exactly zero for equal
//! multisets.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::metrics::matrix::{MetricKind, MetricMatrix};
use crate::parallel;
use crate::rng::{derive_seed, seeded};

/// Above this many cross pairs `Auto` switches to random features.
pub const AUTO_SWITCH_PAIRS: f64 = 4.0e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub sigmas: Vec<f64>,
    /// Random-feature count per bandwidth (cosine/sine pairs, so half as many frequencies).
    pub features: usize,
    pub seed: u64,
}

impl Default for KernelBank {
    /// 21 bandwidths log-spaced over `[0.01, 100]`, 64 random features.
    fn default() -> Self {
        Self::log_spaced(0.01, 100.0, 21, 64, 0)
    }
}

impl KernelBank {
    pub fn log_spaced(lo: f64, hi: f64, count: usize, features: usize, seed: u64) -> Self {
        let (a, b) = (lo.ln(), hi.ln());
        let sigmas = (0..count)
            .map(|i| {
                if count == 1 {
                    lo
                } else {
                    (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                }
            })
            .collect();
        Self {
            sigmas,
            features,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MmdMode {
    Exact,
    #[serde(alias = "rff")]
    RandomFeatures,
    #[default]
    Auto,
}

/// Row-major point cloud in `dim` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "point data of length {} does not split into dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_scalars(xs: &[f64]) -> Self {
        Self {
            dim: 1,
            data: xs.to_vec(),
        }
    }

    /// The selected columns of a count matrix as points.
    pub fn from_columns(x: &CountMatrix, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(x.n() * cols.len());
        for r in x.rows() {
            data.extend(cols.iter().map(|&j| r[j] as f64));
        }
        Self {
            dim: cols.len(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Distinct points with multiplicities, in a canonical order.
struct Weighted {
    points: Vec<Vec<f64>>,
    counts: Vec<f64>,
    total: f64,
}

fn key(v: f64) -> u64 {
    // canonical zero, then order-preserving bits
    let v = if v == 0.0 { 0.0 } else { v };
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn compress(x: &PointSet) -> Weighted {
    let mut map: BTreeMap<Vec<u64>, (Vec<f64>, u64)> = BTreeMap::new();
    for i in 0..x.len() {
        let p = x.point(i);
        let k: Vec<u64> = p.iter().map(|&v| key(v)).collect();
        map.entry(k).or_insert_with(|| (p.to_vec(), 0)).1 += 1;
    }
    let mut points = Vec::with_capacity(map.len());
    let mut counts = Vec::with_capacity(map.len());
    for (_, (p, c)) in map {
        points.push(p);
        counts.push(c as f64);
    }
    Weighted {
        points,
        counts,
        total: x.len() as f64,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Pair weight per squared distance, keyed by the distance bits.
fn distance_histogram(a: &Weighted, b: &Weighted) -> Vec<(f64, f64)> {
    let mut hist: BTreeMap<u64, f64> = BTreeMap::new();
    for (pa, ca) in a.points.iter().zip(&a.counts) {
        for (pb, cb) in b.points.iter().zip(&b.counts) {
            *hist.entry(sq_dist(pa, pb).to_bits()).or_insert(0.0) += ca * cb;
        }
    }
    hist.into_iter()
        .map(|(k, w)| (f64::from_bits(k), w))
        .collect()
}

fn kernel_mean(hist: &[(f64, f64)], sigma: f64, norm: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    hist.iter().map(|&(d2, w)| w * (-d2 * inv).exp()).sum::<f64>() / norm
}

fn exact_mmd(x: &Weighted, y: &Weighted, bank: &KernelBank) -> f64 {
    let hxx = distance_histogram(x, x);
    let hyy = distance_histogram(y, y);
    let hxy = distance_histogram(x, y);
    bank.sigmas
        .iter()
        .map(|&s| {
            let kxx = kernel_mean(&hxx, s, x.total * x.total);
            let kyy = kernel_mean(&hyy, s, y.total * y.total);
            let kxy = kernel_mean(&hxy, s, x.total * y.total);
            (kxx + kyy - 2.0 * kxy).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Mean cosine/sine embedding under the given frequencies.
fn embedding(x: &Weighted, freqs: &[Vec<f64>]) -> Vec<(f64, f64)> {
    freqs
        .iter()
        .map(|w| {
            let (mut c, mut s) = (0.0, 0.0);
            for (p, cnt) in x.points.iter().zip(&x.counts) {
                let t: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
                c += cnt * t.cos();
                s += cnt * t.sin();
            }
            (c / x.total, s / x.total)
        })
        .collect()
}

fn random_feature_mmd(x: &Weighted, y: &Weighted, dim: usize, bank: &KernelBank) -> f64 {
    let m = (bank.features / 2).max(1);
    bank.sigmas
        .iter()
        .enumerate()
        .map(|(s_idx, &sigma)| {
            let mut rng = seeded(derive_seed(bank.seed, &[s_idx as u64, dim as u64]));
            let freqs: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..dim)
                        .map(|_| rng.sample::<f64, _>(StandardNormal) / sigma)
                        .collect()
                })
                .collect();
            let ex = embedding(x, &freqs);
            let ey = embedding(y, &freqs);
            let sq: f64 = ex
                .iter()
                .zip(&ey)
                .map(|(a, b)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
                .sum::<f64>()
                / m as f64;
            sq.max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn mmd(x: &PointSet, y: &PointSet, bank: &KernelBank, mode: MmdMode) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyData("mmd needs two non-empty samples".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let use_features = match mode {
        MmdMode::Exact => false,
        MmdMode::RandomFeatures => true,
        MmdMode::Auto => (x.len() as f64) * (y.len() as f64) > AUTO_SWITCH_PAIRS,
    };
    let (wx, wy) = (compress(x), compress(y));
    Ok(if use_features {
        random_feature_mmd(&wx, &wy, x.dim(), bank)
    } else {
        exact_mmd(&wx, &wy, bank)
    })
}

/// Diagonal: univariate MMD per variable. Off-diagonal: bivariate MMD on
/// each column pair.
pub fn pairwise_mmd_matrix(
    x: &CountMatrix,
    xhat: &CountMatrix,
    bank: &KernelBank,
    mode: MmdMode,
) -> Result<MetricMatrix> {
    let d = x.d();
    if xhat.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: xhat.d(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let vals = parallel::map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        let cols: Vec<usize> = if i == j { vec![i] } else { vec![i, j] };
        mmd(
            &PointSet::from_columns(x, &cols),
            &PointSet::from_columns(xhat, &cols),
            bank,
            mode,
        )
    });
    let mut values = vec![0.0; d * d];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let v = v?;
        values[i * d + j] = v;
        values[j * d + i] = v;
    }
    MetricMatrix::new(MetricKind::Mmd, d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::Poisson;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn pois_points(rate: f64, n: usize, seed: u64) -> PointSet {
        let mut rng = seeded(seed);
        let p = Poisson::new(rate).unwrap();
        PointSet::from_scalars(&(0..n).map(|_| p.sample(&mut rng) as f64).collect::<Vec<_>>())
    }

    #[test]
    fn bank_is_log_spaced() {
        let b = KernelBank::default();
        assert_eq!(b.sigmas.len(), 21);
        assert!((b.sigmas[0] - 0.01).abs() < 1e-15);
        assert!((b.sigmas[20] - 100.0).abs() < 1e-10);
        let r = b.sigmas[1] / b.sigmas[0];
        for w in b.sigmas.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert_eq!(b.features, 64);
    }

    #[test]
    fn same_multiset_gives_zero() {
        let x = pois_points(3.0, 500, 1);
        let bank = KernelBank::default();
        assert_eq!(mmd(&x, &x, &bank, MmdMode::Exact).unwrap(), 0.0);
    }

    #[test]
    fn singleton_closed_form() {
        let bank = KernelBank::default();
        for &t in &[0.005, 0.3, 1.0, 7.0, 250.0] {
            let got = mmd(
                &PointSet::from_scalars(&[0.0]),
                &PointSet::from_scalars(&[t]),
                &bank,
                MmdMode::Exact,
            )
            .unwrap();
            let want = bank
                .sigmas
                .iter()
                .map(|s| (2.0 - 2.0 * (-t * t / (2.0 * s * s)).exp()).sqrt())
                .fold(0.0, f64::max);
            assert!((got - want).abs() < 1e-12, "t={t} got={got} want={want}");
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let bank = KernelBank::default();
        let a = PointSet::from_scalars(&[1.0]);
        let b = PointSet::new(2, vec![1.0, 2.0]).unwrap();
        assert!(mmd(&a, &b, &bank, MmdMode::Exact).is_err());
        let empty = PointSet::from_scalars(&[]);
        assert!(mmd(&a, &empty, &bank, MmdMode::Exact).is_err());
    }

    /// Unweighted brute-force V-statistic, an oracle for the histogram path.
    fn brute_force(x: &PointSet, y: &PointSet, bank: &KernelBank) -> f64 {
        let mean_k = |a: &PointSet, b: &PointSet, s: f64| {
            let mut acc = 0.0;
            for i in 0..a.len() {
                for j in 0..b.len() {
                    acc += (-sq_dist(a.point(i), b.point(j)) / (2.0 * s * s)).exp();
                }
            }
            acc / (a.len() * b.len()) as f64
        };
        bank.sigmas
            .iter()
            .map(|&s| (mean_k(x, x, s) + mean_k(y, y, s) - 2.0 * mean_k(x, y, s)).max(0.0).sqrt())
            .fold(0.0, f64::max)
    }

    #[test]
    fn histogram_path_matches_brute_force() {
        let bank = KernelBank::default();
        let x = pois_points(2.0, 120, 3);
        let y = pois_points(3.0, 90, 4);
        let fast = mmd(&x, &y, &bank, MmdMode::Exact).unwrap();
        let slow = brute_force(&x, &y, &bank);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn pairwise_matrix_is_zero_on_identical_data_and_permutation_invariant() {
        let rows: Vec<Vec<u64>> = (0..60).map(|i| vec![i % 4, (i * 7) % 5, i % 3]).collect();
        let x = CountMatrix::from_rows(&rows).unwrap();
        let bank = KernelBank::default();
        let m = pairwise_mmd_matrix(&x, &x, &bank, MmdMode::Exact).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        let y = CountMatrix::from_rows(&rows.iter().rev().take(40).cloned().collect::<Vec<_>>()).unwrap();
        let mut idx: Vec<usize> = (0..y.n()).collect();
        idx.shuffle(&mut seeded(8));
        let yp = y.select_rows(&idx).unwrap();
        let a = pairwise_mmd_matrix(&x, &y, &bank, MmdMode::Exact).unwrap();
        let b = pairwise_mmd_matrix(&x, &yp, &bank, MmdMode::Exact).unwrap();
        assert_eq!(a, b);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn auto_mode_switches_on_pair_count() {
        let bank = KernelBank::default();
        let x = pois_points(2.0, 2100, 5);
        let y = pois_points(2.0, 2000, 6);
        let auto = mmd(&x, &y, &bank, MmdMode::Auto).unwrap();
        let rff = mmd(&x, &y, &bank, MmdMode::RandomFeatures).unwrap();
        assert_eq!(auto, rff);
        let small = pois_points(2.0, 100, 7);
        assert_eq!(
            mmd(&x, &small, &bank, MmdMode::Auto).unwrap(),
            mmd(&x, &small, &bank, MmdMode::Exact).unwrap()
        );
    }

    proptest! {
        #[test]
        fn symmetric_in_arguments(
            a in prop::collection::vec(0u32..12, 1..40),
            b in prop::collection::vec(0u32..12, 1..40),
            features in prop::bool::ANY,
        ) {
            let x = PointSet::from_scalars(&a.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let y = PointSet::from_scalars(&b.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let mode = if features { MmdMode::RandomFeatures } else { MmdMode::Exact };
            let bank = KernelBank::default();
            let xy = mmd(&x, &y, &bank, mode).unwrap();
            let yx = mmd(&y, &x, &bank, mode).unwrap();
            prop_assert_eq!(xy, yx);
            prop_assert!(xy >= 0.0);
        }
    }
}
