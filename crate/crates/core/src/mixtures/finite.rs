//! Finite mixtures of independent Poissons fitted by EM.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classic_mv::log_sum_exp;
use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Error, Result};
use crate::parallel::{map_indexed, sample_rows};
use crate::univariate::{ln_factorial, poisson_draw};

use super::kmeans;

/// Lower bound on every component rate.
pub const RATE_FLOOR: f64 = 1e-6;
pub const MAX_EM_ITERS: usize = 100;
pub const KMEANS_RUNS: usize = 10;
/// EM stops once the log-likelihood gain drops below this times `n`.
pub const RELATIVE_GAIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FiniteRepr {
    pi: Vec<f64>,
    #[serde(rename = "Lambda")]
    lambda: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteRepr", into = "FiniteRepr")]
pub struct FiniteMixturePoisson {
    pi: Vec<f64>,
    lambda: Vec<Vec<f64>>,
}

impl TryFrom<FiniteRepr> for FiniteMixturePoisson {
    type Error = Error;
    fn try_from(v: FiniteRepr) -> Result<Self> {
        Self::new(v.pi, v.lambda)
    }
}

impl From<FiniteMixturePoisson> for FiniteRepr {
    fn from(m: FiniteMixturePoisson) -> Self {
        FiniteRepr {
            pi: m.pi,
            lambda: m.lambda,
        }
    }
}

impl FiniteMixturePoisson {
    pub fn new(pi: Vec<f64>, lambda: Vec<Vec<f64>>) -> Result<Self> {
        if pi.is_empty() || pi.len() != lambda.len() {
            return invalid("mixture needs one weight per component");
        }
        if pi.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return invalid("mixture weights must be non-negative");
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("mixture weights sum to {total}"));
        }
        let d = lambda[0].len();
        if d == 0 {
            return invalid("mixture components need at least one rate");
        }
        for row in &lambda {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().any(|&l| !(l >= RATE_FLOOR) || !l.is_finite()) {
                return invalid(format!("component rates must be at least {RATE_FLOOR}"));
            }
        }
        let pi = pi.iter().map(|p| p / total).collect();
        Ok(Self { pi, lambda })
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn d(&self) -> usize {
        self.lambda[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.pi
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    /// `Σ_k π_k Λ_k`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d()];
        for (p, row) in self.pi.iter().zip(&self.lambda) {
            for (mi, l) in m.iter_mut().zip(row) {
                *mi += p * l;
            }
        }
        m
    }

    /// Per-component `ln π_k + Σ_i ln Pois(x_i; Λ_ki)`.
    fn component_terms(&self, x: &[u64], ln_fact: f64, ln_lambda: &[Vec<f64>], sums: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|k| {
                let dot: f64 = x.iter().zip(&ln_lambda[k]).map(|(&xi, &ll)| xi as f64 * ll).sum();
                self.pi[k].ln() + dot - sums[k] - ln_fact
            })
            .collect()
    }

    fn caches(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let ln_lambda = self.lambda.iter().map(|r| r.iter().map(|l| l.ln()).collect()).collect();
        let sums = self.lambda.iter().map(|r| r.iter().sum()).collect();
        (ln_lambda, sums)
    }

    pub fn ln_pmf(&self, x: &[u64]) -> f64 {
        if x.len() != self.d() {
            return f64::NEG_INFINITY;
        }
        let (ll, sums) = self.caches();
        let lf: f64 = x.iter().map(|&v| ln_factorial(v)).sum();
        log_sum_exp(&self.component_terms(x, lf, &ll, &sums))
    }

    /// Total log-likelihood of the rows of `x`.
    pub fn log_likelihood(&self, x: &CountMatrix) -> f64 {
        let (ll, sums) = self.caches();
        map_indexed(x.n(), |i| {
            let row = x.row(i);
            let lf: f64 = row.iter().map(|&v| ln_factorial(v)).sum();
            log_sum_exp(&self.component_terms(row, lf, &ll, &sums))
        })
        .iter()
        .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let d = self.d();
        let seed = rng.random::<u64>();
        let values = sample_rows(n, d, seed, |rng, out| {
            let mut t = rng.random::<f64>();
            let mut comp = self.k() - 1;
            for (k, &p) in self.pi.iter().enumerate() {
                if t < p {
                    comp = k;
                    break;
                }
                t -= p;
            }
            for (o, &l) in out.iter_mut().zip(&self.lambda[comp]) {
                *o = poisson_draw(l, rng);
            }
        });
        CountMatrix::new(values, n, d, default_names(d)).expect("valid shape")
    }
}

pub fn fm_logpmf(x: &[u64], model: &FiniteMixturePoisson) -> f64 {
    model.ln_pmf(x)
}

pub fn fm_sample<R: Rng + ?Sized>(model: &FiniteMixturePoisson, n: usize, rng: &mut R) -> CountMatrix {
    model.sample(n, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub model: FiniteMixturePoisson,
    /// Training log-likelihood after initialisation and after each EM update.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// EM from the best of ten k-means runs; at most 100 iterations.
pub fn fm_fit_em(x: &CountMatrix, k: usize, seed: u64) -> Result<EmFit> {
    let (n, d) = (x.n(), x.d());
    if k == 0 {
        return invalid("mixture needs at least one component");
    }
    if k > n {
        return invalid(format!("cannot fit {k} components to {n} rows"));
    }
    let km = kmeans::best_of(x, k, KMEANS_RUNS, seed)?;
    let mut counts = vec![0usize; k];
    for &l in &km.labels {
        counts[l] += 1;
    }
    let denom: f64 = counts.iter().map(|&c| c.max(1) as f64).sum();
    let pi: Vec<f64> = counts.iter().map(|&c| c.max(1) as f64 / denom).collect();
    let lambda: Vec<Vec<f64>> = km
        .centroids
        .iter()
        .map(|c| c.iter().map(|v| v.max(RATE_FLOOR)).collect())
        .collect();
    let mut model = FiniteMixturePoisson::new(pi, lambda)?;
    let row_lf: Vec<f64> = (0..n).map(|i| x.row(i).iter().map(|&v| ln_factorial(v)).sum()).collect();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..=MAX_EM_ITERS {
        // E-step
        let (ll, sums) = model.caches();
        let resp: Vec<(Vec<f64>, f64)> = map_indexed(n, |i| {
            let terms = model.component_terms(x.row(i), row_lf[i], &ll, &sums);
            let lse = log_sum_exp(&terms);
            (terms.iter().map(|t| (t - lse).exp()).collect(), lse)
        });
        let loglik: f64 = resp.iter().map(|r| r.1).sum();
        if let Some(&prev) = trace.last() {
            if loglik - prev < RELATIVE_GAIN_TOL * n as f64 {
                trace.push(loglik);
                converged = true;
                break;
            }
        }
        trace.push(loglik);
        if it == MAX_EM_ITERS {
            break;
        }
        iterations = it + 1;
        // M-step
        let mut nk = vec![0.0; k];
        let mut sx = vec![vec![0.0; d]; k];
        for (i, (r, _)) in resp.iter().enumerate() {
            let row = x.row(i);
            for c in 0..k {
                if r[c] == 0.0 {
                    continue;
                }
                nk[c] += r[c];
                for (s, &v) in sx[c].iter_mut().zip(row) {
                    *s += r[c] * v as f64;
                }
            }
        }
        let total: f64 = nk.iter().sum();
        let pi: Vec<f64> = nk.iter().map(|v| v / total).collect();
        let lambda: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                if nk[c] > 0.0 {
                    sx[c].iter().map(|s| (s / nk[c]).max(RATE_FLOOR)).collect()
                } else {
                    model.lambda[c].clone()
                }
            })
            .collect();
        model = FiniteMixturePoisson::new(pi, lambda)?;
    }
    Ok(EmFit {
        model,
        loglik_trace: trace,
        iterations,
        converged,
    })
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
    fn logpmf_examples() {
        let one = FiniteMixturePoisson::new(vec![1.0], vec![vec![1.5, 3.0]]).unwrap();
        let want = pois(2, 1.5).ln() + pois(4, 3.0).ln();
        assert!((fm_logpmf(&[2, 4], &one) - want).abs() < 1e-12);
        let twin = FiniteMixturePoisson::new(vec![0.3, 0.7], vec![vec![1.5, 3.0], vec![1.5, 3.0]]).unwrap();
        assert!((fm_logpmf(&[2, 4], &twin) - want).abs() < 1e-12);
        let m = FiniteMixturePoisson::new(vec![0.5, 0.5], vec![vec![1.0], vec![5.0]]).unwrap();
        let hand = (0.5 * pois(2, 1.0) + 0.5 * pois(2, 5.0)).ln();
        assert!((fm_logpmf(&[2], &m) - hand).abs() < 1e-12);
    }

    #[test]
    fn logpmf_sums_to_one() {
        let m = FiniteMixturePoisson::new(
            vec![0.2, 0.5, 0.3],
            vec![vec![0.5, 8.0], vec![4.0, 1.0], vec![7.5, 7.5]],
        )
        .unwrap();
        let top = (8.0 + 40.0 * 8f64.sqrt() + 40.0) as u64;
        let mut total = 0.0;
        for a in 0..=top {
            for b in 0..=top {
                total += fm_logpmf(&[a, b], &m).exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_component_recovers_mean() {
        let mut rng = seeded(3);
        let v: Vec<u64> = (0..5_000).map(|_| poisson_draw(4.0, &mut rng)).collect();
        let x = CountMatrix::new(v, 5_000, 1, default_names(1)).unwrap();
        let fit = fm_fit_em(&x, 1, 0).unwrap();
        let se = (4.0f64 / 5_000.0).sqrt();
        assert!((fit.model.rates()[0][0] - 4.0).abs() < 3.0 * se);
    }

    #[test]
    fn separated_components_recovered() {
        let truth = FiniteMixturePoisson::new(vec![0.5, 0.5], vec![vec![1.0], vec![20.0]]).unwrap();
        let x = truth.sample(10_000, &mut seeded(6));
        let fit = fm_fit_em(&x, 2, 1).unwrap();
        let mut comps: Vec<(f64, f64)> = fit
            .model
            .rates()
            .iter()
            .zip(fit.model.weights())
            .map(|(r, &p)| (r[0], p))
            .collect();
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((comps[0].0 / 1.0 - 1.0).abs() < 0.05, "{comps:?}");
        assert!((comps[1].0 / 20.0 - 1.0).abs() < 0.05, "{comps:?}");
        assert!((comps[0].1 - 0.5).abs() < 0.02);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn em_is_deterministic_and_handles_k_equal_n() {
        let x = CountMatrix::from_rows(&[vec![0, 1], vec![0, 1], vec![3, 0], vec![9, 9]]).unwrap();
        let a = fm_fit_em(&x, 4, 2).unwrap();
        let b = fm_fit_em(&x, 4, 2).unwrap();
        assert_eq!(a, b);
        assert!((a.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fm_fit_em(&x, 5, 2).is_err());
    }

    #[test]
    fn sample_moments_follow_mixture() {
        let m = FiniteMixturePoisson::new(vec![0.3, 0.7], vec![vec![1.0, 2.0], vec![10.0, 0.5]]).unwrap();
        let n = 100_000;
        let x = m.sample(n, &mut seeded(10));
        let mean = m.mean();
        let cov = x.covariance();
        for j in 0..2 {
            let got = x.column_means()[j];
            let se = (cov[j][j] / n as f64).sqrt();
            assert!((got - mean[j]).abs() < 3.0 * se);
        }
        assert!(cov[0][0] > x.column_means()[0]);
    }

    #[test]
    fn json_shape() {
        let m = FiniteMixturePoisson::new(vec![0.4, 0.6], vec![vec![1.0], vec![2.0]]).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert!(v.get("pi").is_some() && v.get("Lambda").is_some());
        let back: FiniteMixturePoisson = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
