//! Gaussian copula with Poisson marginals.
//!
//! Fitting is two-stage: rates are the column means, then the cells are mapped
//! to the copula scale (distributional transform or continuous extension) and
//! the correlation of the normal scores is repaired to a valid correlation
//! matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::{correlation, from_rows, min_eigenvalue, repair_correlation, sampling_factor, to_rows};
use crate::metrics::spearman::average_ranks;
use crate::parallel::{map_indexed, sample_rows};
use crate::rng::{derive_seed, stream};
use crate::univariate::Poisson;

/// Bounds applied to copula-scale values before the normal quantile.
pub const U_CLAMP: f64 = 1e-12;

/// Tolerance on the smallest eigenvalue of a supplied correlation matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal quantile with exact infinities at 0 and 1.
fn probit(u: f64) -> f64 {
    if u <= 0.0 {
        f64::NEG_INFINITY
    } else if u >= 1.0 {
        f64::INFINITY
    } else {
        std_normal().inverse_cdf(u)
    }
}

fn probit_clamped(u: f64) -> f64 {
    std_normal().inverse_cdf(u.clamp(U_CLAMP, 1.0 - U_CLAMP))
}

/// Mapping of counts to the copula scale used during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    /// `u = (F(x−1) + F(x)) / 2`.
    #[default]
    Dt,
    /// One uniform jitter per cell, `x̃ = x + u − 1`, then the empirical CDF.
    Ce { seed: u64 },
}

/// Mid-point distributional transform for a generic CDF on the integers.
pub fn dt_transform_cdf(cdf: impl Fn(i64) -> f64, x: u64) -> f64 {
    0.5 * (cdf(x as i64 - 1) + cdf(x as i64))
}

pub fn dt_transform(x: u64, rate: f64) -> Result<f64> {
    let p = Poisson::new(rate)?;
    Ok(dt_transform_cdf(|k| p.cdf(k), x))
}

/// Continuous extension `x + (u − 1)` with `u ~ Uniform(0, 1]`.
pub fn ce_transform<R: Rng + ?Sized>(x: u64, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    x as f64 + (u - 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CopulaRepr {
    lambda: Vec<f64>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaRepr", into = "CopulaRepr")]
pub struct GaussianCopulaPoisson {
    lambda: Vec<f64>,
    r: DMatrix<f64>,
}

impl TryFrom<CopulaRepr> for GaussianCopulaPoisson {
    type Error = Error;
    fn try_from(v: CopulaRepr) -> Result<Self> {
        Self::new(v.lambda, from_rows(&v.r)?)
    }
}

impl From<GaussianCopulaPoisson> for CopulaRepr {
    fn from(m: GaussianCopulaPoisson) -> Self {
        CopulaRepr {
            r: to_rows(&m.r),
            lambda: m.lambda,
        }
    }
}

impl GaussianCopulaPoisson {
    pub fn new(lambda: Vec<f64>, r: DMatrix<f64>) -> Result<Self> {
        let d = lambda.len();
        if d == 0 {
            return invalid("copula needs at least one margin");
        }
        if r.nrows() != d || r.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.nrows(),
            });
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return invalid(format!("rate {i} must be positive, got {l}"));
            }
        }
        for i in 0..d {
            if (r[(i, i)] - 1.0).abs() > 1e-9 {
                return invalid(format!("correlation diagonal {i} is {}", r[(i, i)]));
            }
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > 1e-9 {
                    return invalid("correlation matrix must be symmetric");
                }
            }
        }
        let min_eig = min_eigenvalue(&r);
        if min_eig < -PSD_TOLERANCE {
            return invalid(format!("correlation matrix is not PSD (smallest eigenvalue {min_eig})"));
        }
        Ok(Self { lambda, r })
    }

    /// Equicorrelated model with off-diagonal `rho`.
    pub fn equicorrelated(lambda: Vec<f64>, rho: f64) -> Result<Self> {
        let d = lambda.len();
        let r = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
        Self::new(lambda, r)
    }

    pub fn d(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let d = self.d();
        let l = sampling_factor(&self.r);
        let margins: Vec<Poisson> = self.lambda.iter().map(|&r| Poisson::new(r).expect("validated")).collect();
        let normal = std_normal();
        let seed = rng.random::<u64>();
        let values = sample_rows(n, d, seed, |rng, out| {
            let eps: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let eps = nalgebra::DVector::from_vec(eps);
            let z = &l * eps;
            for i in 0..d {
                let u = normal.cdf(z[i]).min(1.0 - f64::EPSILON);
                out[i] = margins[i].quantile(u).expect("u in [0, 1)");
            }
        });
        CountMatrix::new(values, n, d, default_names(d)).expect("valid shape")
    }

    /// Simulated-likelihood estimate of `P(X = x)` from `m` normal draws.
    pub fn sl_pmf_mc<R: Rng + ?Sized>(&self, x: &[u64], m: usize, rng: &mut R) -> Result<SlEstimate> {
        let d = self.d();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        if m == 0 {
            return invalid("need at least one Monte Carlo draw");
        }
        let bounds: Vec<(f64, f64)> = x
            .iter()
            .zip(&self.lambda)
            .map(|(&xi, &li)| {
                let p = Poisson::new(li).expect("validated");
                (probit(p.cdf(xi as i64 - 1)), probit(p.cdf(xi as i64)))
            })
            .collect();
        let l = sampling_factor(&self.r);
        let mut hits = 0usize;
        let mut eps = nalgebra::DVector::zeros(d);
        for _ in 0..m {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            let z = &l * &eps;
            if bounds.iter().enumerate().all(|(i, &(a, b))| z[i] > a && z[i] <= b) {
                hits += 1;
            }
        }
        let p = hits as f64 / m as f64;
        Ok(SlEstimate {
            p,
            se: (p * (1.0 - p) / m as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlEstimate {
    pub p: f64,
    pub se: f64,
}

/// Inference-functions-for-margins fit.
pub fn fit_ifm(x: &CountMatrix, transform: TransformKind) -> Result<GaussianCopulaPoisson> {
    let (n, d) = (x.n(), x.d());
    if n < 2 {
        return Err(Error::EmptyData("copula fit needs at least two rows".into()));
    }
    let lambda = x.column_means();
    if let Some(j) = lambda.iter().position(|&m| m <= 0.0) {
        return Err(Error::Degenerate(format!(
            "column {} ({}) has zero mean",
            j,
            x.names()[j]
        )));
    }
    let scores: Vec<Vec<f64>> = match transform {
        TransformKind::Dt => map_indexed(d, |j| {
            let p = Poisson::new(lambda[j]).expect("positive mean");
            let col = x.column(j);
            let top = col.iter().copied().max().unwrap_or(0) as usize;
            let table: Vec<f64> = (0..=top as u64)
                .map(|v| probit_clamped(dt_transform_cdf(|k| p.cdf(k), v)))
                .collect();
            col.iter().map(|&v| table[v as usize]).collect()
        }),
        TransformKind::Ce { seed } => map_indexed(d, |j| {
            let mut rng = stream(derive_seed(seed, &[j as u64]), 0);
            let jittered: Vec<f64> = x.column(j).iter().map(|&v| ce_transform(v, &mut rng)).collect();
            average_ranks(&jittered)
                .into_iter()
                .map(|r| probit_clamped(r / (n as f64 + 1.0)))
                .collect()
        }),
    };
    let raw = correlation(&scores).map_err(|e| match e {
        Error::Degenerate(msg) => Error::Degenerate(format!("copula scores: {msg}")),
        other => other,
    })?;
    let r = repair_correlation(&raw)?;
    GaussianCopulaPoisson::new(lambda, r)
}

pub fn copula_sample<R: Rng + ?Sized>(model: &GaussianCopulaPoisson, n: usize, rng: &mut R) -> CountMatrix {
    model.sample(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use statrs::distribution::{ChiSquared, Continuous};

    #[test]
    fn dt_examples() {
        assert!((dt_transform(0, 1.0).unwrap() - 0.5 * (-1f64).exp()).abs() < 1e-15);
        let point_mass = |c: i64| move |k: i64| if k >= c { 1.0 } else { 0.0 };
        assert_eq!(dt_transform_cdf(point_mass(4), 4), 0.5);
        let mut prev = 0.0;
        for x in 0..30 {
            let u = dt_transform(x, 6.0).unwrap();
            assert!(u > prev && u < 1.0);
            prev = u;
        }
    }

    #[test]
    fn dt_reduces_to_cdf_without_atoms() {
        // integer grid standing in for a continuous law with step 1e-4
        let h = 1e-4;
        let normal = std_normal();
        let cdf = |k: i64| normal.cdf(k as f64 * h - 3.0);
        for x in [0u64, 5_000, 30_000, 59_999] {
            let f = cdf(x as i64);
            assert!((dt_transform_cdf(cdf, x) - f).abs() < 1e-4);
        }
    }

    #[test]
    fn ce_examples() {
        let mut rng = seeded(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| ce_transform(7, &mut rng)).collect();
        assert!(draws.iter().all(|&v| v <= 7.0 && v > 6.0));
        let m = draws.iter().sum::<f64>() / n as f64;
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((m - 6.5).abs() < 3.0 * se, "mean {m}");
    }

    fn poisson_columns(n: usize, d: usize, rate: f64, seed: u64) -> CountMatrix {
        let mut rng = seeded(seed);
        let p = Poisson::new(rate).unwrap();
        let v: Vec<u64> = (0..n * d).map(|_| p.sample(&mut rng)).collect();
        CountMatrix::new(v, n, d, default_names(d)).unwrap()
    }

    #[test]
    fn independent_columns_fit_near_identity() {
        let x = poisson_columns(10_000, 3, 5.0, 3);
        let m = fit_ifm(&x, TransformKind::Dt).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.correlation()[(i, j)].abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn round_trip_recovers_parameters() {
        let truth = GaussianCopulaPoisson::equicorrelated(vec![5.0; 3], 0.6).unwrap();
        let x = truth.sample(10_000, &mut seeded(8));
        let fit = fit_ifm(&x, TransformKind::Dt).unwrap();
        for i in 0..3 {
            assert!((fit.lambda()[i] / 5.0 - 1.0).abs() < 0.02);
            for j in 0..3 {
                if i != j {
                    let r = fit.correlation()[(i, j)];
                    assert!((r - 0.6).abs() < 0.05, "R[{i},{j}] = {r}");
                }
            }
        }
        let ce = fit_ifm(&x, TransformKind::Ce { seed: 1 }).unwrap();
        assert!(ce.correlation()[(0, 1)] < fit.correlation()[(0, 1)]);
    }

    #[test]
    fn duplicated_column_is_comonotone() {
        let base = poisson_columns(5_000, 1, 4.0, 5);
        let rows: Vec<Vec<u64>> = base.rows().map(|r| vec![r[0], r[0]]).collect();
        let x = CountMatrix::from_rows(&rows).unwrap();
        let m = fit_ifm(&x, TransformKind::Dt).unwrap();
        assert!(m.correlation()[(0, 1)] >= 0.99);
        assert!(min_eigenvalue(m.correlation()) >= -1e-12);
    }

    #[test]
    fn fit_errors() {
        let x = CountMatrix::from_rows(&[vec![0, 1], vec![0, 2], vec![0, 0]]).unwrap();
        assert!(fit_ifm(&x, TransformKind::Dt).is_err());
        let c = CountMatrix::from_rows(&[vec![3, 1], vec![3, 2], vec![3, 0]]).unwrap();
        assert!(matches!(fit_ifm(&c, TransformKind::Dt), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fit_is_row_permutation_invariant() {
        let truth = GaussianCopulaPoisson::equicorrelated(vec![2.0, 3.0, 1.0], 0.3).unwrap();
        let x = truth.sample(500, &mut seeded(2));
        let mut idx: Vec<usize> = (0..500).rev().collect();
        idx.rotate_left(77);
        let y = x.select_rows(&idx).unwrap();
        let a = fit_ifm(&x, TransformKind::Dt).unwrap();
        let b = fit_ifm(&y, TransformKind::Dt).unwrap();
        assert!((a.correlation() - b.correlation()).abs().max() < 1e-12);
    }

    #[test]
    fn independent_sampling_means() {
        let m = GaussianCopulaPoisson::equicorrelated(vec![1.5, 7.0], 0.0).unwrap();
        let x = m.sample(50_000, &mut seeded(4));
        for (j, &l) in m.lambda().iter().enumerate() {
            let mean = x.column_means()[j];
            assert!((mean - l).abs() < 3.0 * (l / 50_000.0f64).sqrt());
        }
        assert_eq!(x, m.sample(50_000, &mut seeded(4)));
    }

    #[test]
    fn marginals_pass_chi_square() {
        let m = GaussianCopulaPoisson::equicorrelated(vec![3.0, 9.0], 0.7).unwrap();
        let n = 100_000;
        let x = m.sample(n, &mut seeded(12));
        for (j, &l) in m.lambda().iter().enumerate() {
            let p = Poisson::new(l).unwrap();
            let col = x.column(j);
            let top = (l + 6.0 * l.sqrt()) as u64;
            let mut observed = vec![0f64; top as usize + 1];
            for &v in &col {
                observed[v.min(top) as usize] += 1.0;
            }
            let mut stat = 0.0;
            let mut cells = 0;
            for k in 0..=top {
                let prob = if k == top { 1.0 - p.cdf(top as i64 - 1) } else { p.pmf(k) };
                let e = prob * n as f64;
                if e >= 5.0 {
                    stat += (observed[k as usize] - e).powi(2) / e;
                    cells += 1;
                }
            }
            let pval = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
            assert!(pval > 0.001, "margin {j}: p = {pval}");
        }
    }

    #[test]
    fn sl_pmf_one_dimension_and_identity() {
        let mut rng = seeded(21);
        let m1 = GaussianCopulaPoisson::new(vec![2.5], DMatrix::identity(1, 1)).unwrap();
        let e = m1.sl_pmf_mc(&[3], 20_000, &mut rng).unwrap();
        let want = Poisson::new(2.5).unwrap().pmf(3);
        assert!((e.p - want).abs() < 3.0 * e.se.max(1e-9));

        let mi = GaussianCopulaPoisson::equicorrelated(vec![1.0, 2.0, 0.5], 0.0).unwrap();
        let e = mi.sl_pmf_mc(&[1, 2, 0], 50_000, &mut rng).unwrap();
        let want: f64 = [(1, 1.0), (2, 2.0), (0, 0.5)]
            .iter()
            .map(|&(x, l)| Poisson::new(l).unwrap().pmf(x))
            .product();
        assert!((e.p - want).abs() < 3.0 * e.se);
    }

    /// Rectangle probability of a standard bivariate normal by composite Simpson
    /// over the first coordinate.
    fn rectangle_quadrature(a1: f64, b1: f64, a2: f64, b2: f64, rho: f64) -> f64 {
        let nrm = std_normal();
        let s = (1.0 - rho * rho).sqrt();
        let lo = a1.max(-9.0);
        let hi = b1.min(9.0);
        let steps = 20_000;
        let h = (hi - lo) / steps as f64;
        let f = |z: f64| nrm.pdf(z) * (nrm.cdf((b2 - rho * z) / s) - nrm.cdf((a2 - rho * z) / s));
        let mut acc = f(lo) + f(hi);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn sl_pmf_matches_quadrature() {
        let m = GaussianCopulaPoisson::equicorrelated(vec![2.0, 3.0], 0.5).unwrap();
        let p1 = Poisson::new(2.0).unwrap();
        let p2 = Poisson::new(3.0).unwrap();
        let oracle = rectangle_quadrature(
            probit(p1.cdf(0)),
            probit(p1.cdf(1)),
            probit(p2.cdf(1)),
            probit(p2.cdf(2)),
            0.5,
        );
        let e = m.sl_pmf_mc(&[1, 2], 1_000_000, &mut seeded(5)).unwrap();
        assert!((e.p - oracle).abs() < 3.0 * e.se, "{} vs {oracle} (se {})", e.p, e.se);
    }

    #[test]
    fn sl_pmf_grid_sums_to_one() {
        let m = GaussianCopulaPoisson::equicorrelated(vec![1.0, 1.5], -0.4).unwrap();
        let draws = 20_000;
        let mut total = 0.0;
        for a in 0..=12 {
            for b in 0..=14 {
                // common random numbers: each rectangle sees the same draws
                total += m.sl_pmf_mc(&[a, b], draws, &mut seeded(9)).unwrap().p;
            }
        }
        assert!((total - 1.0).abs() < 3.0 * (1.0 / draws as f64).sqrt(), "{total}");
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = GaussianCopulaPoisson::equicorrelated(vec![1.0, 2.0], 0.25).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"lambda\"") && s.contains("\"R\""));
        let back: GaussianCopulaPoisson = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"lambda":[1.0,1.0],"R":[[1.0,2.0],[2.0,1.0]]}"#;
        assert!(serde_json::from_str::<GaussianCopulaPoisson>(bad).is_err());
    }
}
