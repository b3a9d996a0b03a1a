//! Latent-sum multivariate Poisson distributions.
//!
//! Each observed count is a sum of independent latent Poisson variables, so
//! every marginal is Poisson and every covariance is non-negative.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::CountMatrix;
use crate::error::{invalid, Error, Result};
use crate::univariate::{ln_factorial, poisson_draw};

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn check_rate(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if !ok {
        return invalid(format!("{name} must be {}, got {v}", if allow_zero { "non-negative" } else { "positive" }));
    }
    Ok(())
}

/// `x1 = y1 + z`, `x2 = y2 + z` with `y1 ~ Pois(λ1)`, `y2 ~ Pois(λ2)`, `z ~ Pois(λ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariatePoisson {
    pub rate1: f64,
    pub rate2: f64,
    pub common: f64,
}

impl BivariatePoisson {
    pub fn new(rate1: f64, rate2: f64, common: f64) -> Result<Self> {
        check_rate("rate1", rate1, false)?;
        check_rate("rate2", rate2, false)?;
        check_rate("common rate", common, true)?;
        Ok(Self { rate1, rate2, common })
    }

    pub fn as_common(&self) -> CommonCovMVP {
        CommonCovMVP {
            common: self.common,
            rates: vec![self.rate1, self.rate2],
        }
    }

    pub fn ln_pmf(&self, x1: u64, x2: u64) -> f64 {
        self.as_common().ln_pmf(&[x1, x2])
    }

    pub fn pmf(&self, x1: u64, x2: u64) -> f64 {
        self.ln_pmf(x1, x2).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        self.as_common().sample(n, rng)
    }
}

pub fn bipois_pmf(x1: u64, x2: u64, params: &BivariatePoisson) -> f64 {
    params.pmf(x1, x2)
}

/// Common-covariance multivariate Poisson: `x_i = y_i + z` for a shared `z ~ Pois(λ0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonCovMVP {
    pub common: f64,
    pub rates: Vec<f64>,
}

impl CommonCovMVP {
    pub fn new(common: f64, rates: Vec<f64>) -> Result<Self> {
        check_rate("common rate", common, true)?;
        if rates.is_empty() {
            return invalid("need at least one rate");
        }
        for &r in &rates {
            check_rate("rate", r, false)?;
        }
        Ok(Self { common, rates })
    }

    pub fn d(&self) -> usize {
        self.rates.len()
    }

    /// Log pmf, summing the shared component `z` over `0..=min x_i` in log space.
    pub fn ln_pmf(&self, x: &[u64]) -> f64 {
        if x.len() != self.rates.len() {
            return f64::NEG_INFINITY;
        }
        let total: f64 = self.common + self.rates.iter().sum::<f64>();
        let base: f64 = -total
            + x.iter()
                .zip(&self.rates)
                .map(|(&xi, &li)| xi as f64 * li.ln() - ln_factorial(xi))
                .sum::<f64>();
        if self.common == 0.0 {
            return base;
        }
        let zmax = *x.iter().min().expect("non-empty");
        let ratio = self.common.ln() - self.rates.iter().map(|l| l.ln()).sum::<f64>();
        let dm1 = (x.len() - 1) as f64;
        let terms: Vec<f64> = (0..=zmax)
            .map(|z| {
                x.iter().map(|&xi| ln_choose(xi, z)).sum::<f64>() + dm1 * ln_factorial(z) + z as f64 * ratio
            })
            .collect();
        base + log_sum_exp(&terms)
    }

    pub fn pmf(&self, x: &[u64]) -> f64 {
        self.ln_pmf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let d = self.d();
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            let z = poisson_draw(self.common, rng);
            for &l in &self.rates {
                values.push(poisson_draw(l, rng) + z);
            }
        }
        CountMatrix::new(values, n, d, crate::data::default_names(d)).expect("valid shape")
    }
}

pub fn mvpois_pmf(x: &[u64], params: &CommonCovMVP) -> f64 {
    params.pmf(x)
}

/// Largest dimension accepted by [`build_full_reduction`] (latent size `2^d − 1`).
pub const MAX_FULL_REDUCTION_DIM: usize = 10;

/// Cap on `Σ x` for brute-force latent enumeration.
pub const MAX_ENUMERATED_TOTAL: u64 = 25;

/// General multivariate reduction `x = A y` with independent `y_j ~ Pois(λ_j)`.
///
/// `columns[j]` is column `j` of the zero-one matrix `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionMVP {
    d: usize,
    columns: Vec<Vec<u8>>,
    rates: Vec<f64>,
}

impl ReductionMVP {
    pub fn new(d: usize, columns: Vec<Vec<u8>>, rates: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return invalid("reduction matrix needs at least one column");
        }
        if columns.len() != rates.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: rates.len(),
            });
        }
        for c in &columns {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.len(),
                });
            }
            if c.iter().any(|&v| v > 1) {
                return invalid("reduction matrix must be zero-one");
            }
        }
        for i in 0..columns.len() {
            for j in (i + 1)..columns.len() {
                if columns[i] == columns[j] {
                    return invalid(format!("duplicate columns {i} and {j} in reduction matrix"));
                }
            }
        }
        for &r in &rates {
            check_rate("latent rate", r, false)?;
        }
        Ok(Self { d, columns, rates })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn with_rates(self, rates: Vec<f64>) -> Result<Self> {
        Self::new(self.d, self.columns, rates)
    }

    /// Block sizes: number of columns with exactly `i` ones, for `i = 1..=d`.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.d];
        for c in &self.columns {
            let ones = c.iter().filter(|&&v| v == 1).count();
            if ones > 0 {
                s[ones - 1] += 1;
            }
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let mut values = Vec::with_capacity(n * self.d);
        let mut row = vec![0u64; self.d];
        for _ in 0..n {
            row.iter_mut().for_each(|v| *v = 0);
            for (col, &rate) in self.columns.iter().zip(&self.rates) {
                let y = poisson_draw(rate, rng);
                for (r, &a) in row.iter_mut().zip(col) {
                    *r += a as u64 * y;
                }
            }
            values.extend_from_slice(&row);
        }
        CountMatrix::new(values, n, self.d, crate::data::default_names(self.d)).expect("valid shape")
    }

    /// Exact pmf by enumerating every latent vector with `A y = x`.
    pub fn ln_pmf_enumerated(&self, x: &[u64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        let total: u64 = x.iter().sum();
        if total > MAX_ENUMERATED_TOTAL {
            return Err(Error::TooLarge(format!(
                "latent enumeration capped at total count {MAX_ENUMERATED_TOTAL}, got {total}"
            )));
        }
        let mut terms = Vec::new();
        let mut remaining = x.to_vec();
        self.enumerate(0, &mut remaining, 0.0, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    fn enumerate(&self, j: usize, remaining: &mut [u64], acc: f64, out: &mut Vec<f64>) {
        if j == self.columns.len() {
            if remaining.iter().all(|&r| r == 0) {
                out.push(acc);
            }
            return;
        }
        let col = &self.columns[j];
        let cap = col
            .iter()
            .zip(remaining.iter())
            .filter(|(&a, _)| a == 1)
            .map(|(_, &r)| r)
            .min()
            .unwrap_or(0);
        let rate = self.rates[j];
        for y in 0..=cap {
            let lp = y as f64 * rate.ln() - rate - ln_factorial(y);
            for (r, &a) in remaining.iter_mut().zip(col) {
                *r -= a as u64 * y;
            }
            self.enumerate(j + 1, remaining, acc + lp, out);
            for (r, &a) in remaining.iter_mut().zip(col) {
                *r += a as u64 * y;
            }
        }
    }
}

/// `A = [A_1, …, A_d]` where block `A_i` holds every column with exactly `i`
/// ones, support sets in lexicographic order. Latent rates default to 1.
pub fn build_full_reduction(d: usize) -> Result<ReductionMVP> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    if d > MAX_FULL_REDUCTION_DIM {
        return Err(Error::TooLarge(format!(
            "full reduction limited to d <= {MAX_FULL_REDUCTION_DIM} (2^d - 1 latent variables), got {d}"
        )));
    }
    let mut columns = Vec::with_capacity((1 << d) - 1);
    for size in 1..=d {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let mut col = vec![0u8; d];
            for &i in &subset {
                col[i] = 1;
            }
            columns.push(col);
            // next combination in lexicographic order
            let mut k = size;
            while k > 0 && subset[k - 1] == d - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            subset[k - 1] += 1;
            for t in k..size {
                subset[t] = subset[t - 1] + 1;
            }
        }
    }
    let m = columns.len();
    ReductionMVP::new(d, columns, vec![1.0; m])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::univariate::Poisson;

    fn pois(x: u64, l: f64) -> f64 {
        Poisson::new(l).unwrap().pmf(x)
    }

    #[test]
    fn bivariate_origin_and_independence() {
        let p = BivariatePoisson::new(1.3, 0.7, 0.4).unwrap();
        assert!((bipois_pmf(0, 0, &p) - (-2.4f64).exp()).abs() < 1e-15);
        let ind = BivariatePoisson::new(1.3, 0.7, 0.0).unwrap();
        for x1 in 0..6 {
            for x2 in 0..6 {
                let want = pois(x1, 1.3) * pois(x2, 0.7);
                assert!((bipois_pmf(x1, x2, &ind) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bivariate_matches_latent_triples() {
        // x1 = y1 + z, x2 = y2 + z: sum over z of the three independent pmfs
        let oracle = |x1: u64, x2: u64, l1: f64, l2: f64, l0: f64| -> f64 {
            (0..=x1.min(x2))
                .map(|z| pois(x1 - z, l1) * pois(x2 - z, l2) * pois(z, l0))
                .sum()
        };
        let p = BivariatePoisson::new(1.0, 1.0, 1.0).unwrap();
        assert!((bipois_pmf(1, 1, &p) - oracle(1, 1, 1.0, 1.0, 1.0)).abs() < 1e-15);
        let q = BivariatePoisson::new(2.5, 0.4, 1.7).unwrap();
        for x1 in 0..12 {
            for x2 in 0..12 {
                let (a, b) = (bipois_pmf(x1, x2, &q), oracle(x1, x2, 2.5, 0.4, 1.7));
                assert!((a - b).abs() < 1e-13 * (1.0 + b), "{x1},{x2}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn multivariate_examples() {
        let p = CommonCovMVP::new(0.5, vec![1.0, 1.0, 2.0]).unwrap();
        assert!((mvpois_pmf(&[0, 0, 0], &p) - (-4.5f64).exp()).abs() < 1e-15);
        let ind = CommonCovMVP::new(0.0, vec![1.0, 0.3, 2.0]).unwrap();
        let x = [2, 0, 3];
        let prod: f64 = x.iter().zip(&ind.rates).map(|(&xi, &l)| pois(xi, l).ln()).sum();
        assert!((ind.ln_pmf(&x) - prod).abs() < 1e-12);
        // brute force over z with y_i = x_i − z
        for x in [[1, 2, 1], [3, 4, 5], [6, 2, 3]] {
            let zmax = *x.iter().min().unwrap();
            let brute: f64 = (0..=zmax)
                .map(|z| {
                    pois(z, 0.5) * x.iter().zip(&p.rates).map(|(&xi, &l)| pois(xi - z, l)).product::<f64>()
                })
                .sum();
            assert!((mvpois_pmf(&x, &p) - brute).abs() < 1e-12 * brute.max(1e-300) + 1e-15, "{x:?}");
        }
    }

    #[test]
    fn trivariate_grid_sums_to_one() {
        let p = CommonCovMVP::new(1.5, vec![2.0, 3.0, 4.0]).unwrap();
        let mut total = 0.0;
        for a in 0..40u64 {
            for b in 0..40u64 {
                for c in 0..40u64 {
                    total += p.pmf(&[a, b, c]);
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn pmf_grids_sum_to_one() {
        for &(l1, l2, l0) in &[(0.5, 2.0, 1.0), (5.0, 5.0, 5.0), (3.0, 0.2, 0.0)] {
            let p = BivariatePoisson::new(l1, l2, l0).unwrap();
            let top = |l: f64| (l + 40.0 * f64::sqrt(l) + 40.0).ceil() as u64;
            let (t1, t2) = (top(l1 + l0), top(l2 + l0));
            let mut total = 0.0;
            for a in 0..=t1 {
                for b in 0..=t2 {
                    total += p.pmf(a, b);
                }
            }
            assert!((total - 1.0).abs() < 1e-8, "{total}");
        }
    }

    fn sample_cov(x: &CountMatrix, i: usize, j: usize) -> (f64, f64) {
        let n = x.n() as f64;
        let (ci, cj) = (x.column_f64(i), x.column_f64(j));
        let (mi, mj) = (ci.iter().sum::<f64>() / n, cj.iter().sum::<f64>() / n);
        let prods: Vec<f64> = ci.iter().zip(&cj).map(|(a, b)| (a - mi) * (b - mj)).collect();
        let c = prods.iter().sum::<f64>() / n;
        let se = (prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        (c, se)
    }

    #[test]
    fn sampler_moments() {
        let mut rng = seeded(17);
        let n = 100_000;
        let ind = BivariatePoisson::new(1.0, 2.0, 0.0).unwrap().sample(n, &mut rng);
        let (c, se) = sample_cov(&ind, 0, 1);
        assert!(c.abs() < 3.0 * se, "cov {c} se {se}");

        let dep = BivariatePoisson::new(1.0, 1.0, 2.0).unwrap().sample(n, &mut rng);
        let (c, se) = sample_cov(&dep, 0, 1);
        assert!((c - 2.0).abs() < 3.0 * se, "cov {c} se {se}");
        let m = dep.column_means()[0];
        let se_m = (3.0f64 / n as f64).sqrt();
        assert!((m - 3.0).abs() < 3.0 * se_m, "mean {m}");
    }

    #[test]
    fn common_covariance_correlations_not_negative() {
        let mut rng = seeded(2);
        let x = CommonCovMVP::new(0.3, vec![1.0, 4.0, 0.5]).unwrap().sample(20_000, &mut rng);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (c, se) = sample_cov(&x, i, j);
            assert!(c >= -3.0 * se);
        }
    }

    #[test]
    fn full_reduction_layout() {
        let a3 = build_full_reduction(3).unwrap();
        assert_eq!(a3.columns().len(), 7);
        assert_eq!(a3.block_sizes(), vec![3, 3, 1]);
        assert_eq!(a3.columns()[0], vec![1, 0, 0]);
        assert_eq!(a3.columns()[3], vec![1, 1, 0]);
        assert_eq!(a3.columns()[5], vec![0, 1, 1]);
        assert_eq!(a3.columns()[6], vec![1, 1, 1]);
        assert_eq!(build_full_reduction(10).unwrap().columns().len(), 1023);
        assert!(matches!(build_full_reduction(11), Err(Error::TooLarge(_))));
    }

    #[test]
    fn duplicate_columns_rejected() {
        let r = ReductionMVP::new(2, vec![vec![1, 0], vec![1, 0]], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn identity_reduction_is_independent_poisson() {
        let r = ReductionMVP::new(2, vec![vec![1, 0], vec![0, 1]], vec![0.8, 2.2]).unwrap();
        for x1 in 0..5 {
            for x2 in 0..5 {
                let want = (pois(x1, 0.8) * pois(x2, 2.2)).ln();
                assert!((r.ln_pmf_enumerated(&[x1, x2]).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_reduction_in_two_dims_is_bivariate_poisson() {
        let r = build_full_reduction(2).unwrap().with_rates(vec![1.5, 0.6, 0.9]).unwrap();
        let b = BivariatePoisson::new(1.5, 0.6, 0.9).unwrap();
        for x1 in 0..7 {
            for x2 in 0..7 {
                assert!((r.ln_pmf_enumerated(&[x1, x2]).unwrap() - b.ln_pmf(x1, x2)).abs() < 1e-12);
            }
        }
        // sampling law: same moments
        let mut rng = seeded(4);
        let xs = r.sample(50_000, &mut rng);
        let (c, se) = sample_cov(&xs, 0, 1);
        assert!((c - 0.9).abs() < 3.0 * se);
    }

    #[test]
    fn enumeration_is_capped() {
        let r = build_full_reduction(2).unwrap();
        assert!(matches!(r.ln_pmf_enumerated(&[20, 6]), Err(Error::TooLarge(_))));
    }
}
