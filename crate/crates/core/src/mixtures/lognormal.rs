//! Poisson log-normal: `ln λ ~ N(μ, Σ)`, `x_i | λ ~ Pois(λ_i)` independently.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::{clip_eigenvalues, from_rows, min_eigenvalue, sampling_factor, to_rows};
use crate::parallel::sample_rows;
use crate::univariate::poisson_draw;

/// Eigenvalue floor for the moment-matched `Σ`.
pub const SIGMA_EIGEN_FLOOR: f64 = 1e-10;
/// Floor on `1 + S_ij / (m_i m_j)` before taking logs.
pub const MOMENT_RATIO_FLOOR: f64 = 1e-6;
/// Log-rates are capped here before exponentiation.
const MAX_LOG_RATE: f64 = 700.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LogNormalRepr {
    mu: Vec<f64>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LogNormalRepr", into = "LogNormalRepr")]
pub struct LogNormalPoisson {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl TryFrom<LogNormalRepr> for LogNormalPoisson {
    type Error = Error;
    fn try_from(v: LogNormalRepr) -> Result<Self> {
        Self::new(v.mu, from_rows(&v.sigma)?)
    }
}

impl From<LogNormalPoisson> for LogNormalRepr {
    fn from(m: LogNormalPoisson) -> Self {
        LogNormalRepr {
            mu: m.mu.iter().cloned().collect(),
            sigma: to_rows(&m.sigma),
        }
    }
}

impl LogNormalPoisson {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return invalid("log-normal mixture needs at least one dimension");
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: sigma.nrows(),
            });
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return invalid("log-normal parameters must be finite");
        }
        if (&sigma - sigma.transpose()).abs().max() > 1e-9 {
            return invalid("Sigma must be symmetric");
        }
        let e = min_eigenvalue(&sigma);
        if e < -1e-8 {
            return invalid(format!("Sigma is not PSD (smallest eigenvalue {e})"));
        }
        Ok(Self {
            mu: DVector::from_vec(mu),
            sigma,
        })
    }

    /// Two-dimensional construction with `μ = 0`, `Σ = 2 ln α [[1, ρ], [ρ, 1]]`,
    /// so both marginal means equal `α`.
    pub fn bivariate_extreme(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return invalid(format!("alpha must exceed 1, got {alpha}"));
        }
        let s = 2.0 * alpha.ln();
        Self::new(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[s, s * rho, s * rho, s]))
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `α_i = exp(μ_i + Σ_ii / 2)`.
    pub fn alpha(&self) -> Vec<f64> {
        (0..self.d()).map(|i| (self.mu[i] + 0.5 * self.sigma[(i, i)]).exp()).collect()
    }

    /// Closed-form mean and covariance of the counts.
    pub fn moments(&self) -> (Vec<f64>, DMatrix<f64>) {
        let a = self.alpha();
        let d = self.d();
        let cov = DMatrix::from_fn(d, d, |i, j| {
            let c = a[i] * a[j] * (self.sigma[(i, j)].exp() - 1.0);
            if i == j {
                a[i] + c
            } else {
                c
            }
        });
        (a, cov)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let d = self.d();
        let l = sampling_factor(&self.sigma);
        let seed = rng.random::<u64>();
        let values = sample_rows(n, d, seed, |rng, out| {
            let eps = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
            let z = &self.mu + &l * eps;
            for (o, &v) in out.iter_mut().zip(z.iter()) {
                *o = poisson_draw(v.min(MAX_LOG_RATE).exp(), rng);
            }
        });
        CountMatrix::new(values, n, d, default_names(d)).expect("valid shape")
    }
}

pub fn ln_moments(model: &LogNormalPoisson) -> (Vec<f64>, DMatrix<f64>) {
    model.moments()
}

pub fn ln_sample<R: Rng + ?Sized>(model: &LogNormalPoisson, n: usize, rng: &mut R) -> CountMatrix {
    model.sample(n, rng)
}

/// Method-of-moments fit inverting the closed-form count moments.
pub fn ln_fit_moments(x: &CountMatrix) -> Result<LogNormalPoisson> {
    let d = x.d();
    if x.n() < 2 {
        return Err(Error::EmptyData("log-normal fit needs at least two rows".into()));
    }
    let m = x.column_means();
    let s = x.covariance();
    for j in 0..d {
        if !(m[j] > 0.0) || !(s[j][j] > m[j]) {
            return Err(Error::Underdispersed {
                column: x.names()[j].clone(),
                mean: m[j],
                variance: s[j][j],
            });
        }
    }
    let raw = DMatrix::from_fn(d, d, |i, j| {
        let excess = if i == j { s[i][i] - m[i] } else { s[i][j] };
        (1.0 + excess / (m[i] * m[j])).max(MOMENT_RATIO_FLOOR).ln()
    });
    let sigma = clip_eigenvalues(&raw, SIGMA_EIGEN_FLOOR);
    let mu = (0..d).map(|i| m[i].ln() - 0.5 * sigma[(i, i)]).collect();
    LogNormalPoisson::new(mu, sigma)
}
