//! Synthetic datasets drawn from the model samplers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classic_mv::CommonCovMVP;
use crate::copula::GaussianCopulaPoisson;
use crate::data::CountMatrix;
use crate::error::{invalid, Result};
use crate::linalg::from_rows;
use crate::mixtures::{FiniteMixturePoisson, LogNormalPoisson};
use crate::pgm::{gibbs_sample, flpgm_sample, LengthDist, Omega, PairwiseGM, Variant};
use crate::rng::seeded;

fn default_gibbs() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    /// Equicorrelated Gaussian copula with Poisson marginals.
    Copula { lambda: Vec<f64>, rho: f64 },
    FiniteMixture {
        pi: Vec<f64>,
        #[serde(rename = "Lambda")]
        lambda: Vec<Vec<f64>>,
    },
    /// Either explicit `mu`/`Sigma`, or the two-variable construction
    /// `Σ = 2 ln α [[1, ρ], [ρ, 1]]` from `alpha` and `rho`.
    LogNormal {
        #[serde(default)]
        mu: Option<Vec<f64>>,
        #[serde(rename = "Sigma", default)]
        sigma: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        rho: Option<f64>,
    },
    Tpgm {
        theta: Vec<f64>,
        #[serde(rename = "Phi")]
        phi: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: u64,
        #[serde(default = "default_gibbs")]
        gibbs_iters: usize,
    },
    /// Common-covariance multivariate Poisson (bivariate when two rates are given).
    BivariatePoisson { rates: Vec<f64>, common: f64 },
    /// Multinomial rows with Poisson lengths.
    Multinomial { probs: Vec<f64>, length_rate: f64 },
    IndependentPoisson { rates: Vec<f64> },
}

impl SynthSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SynthSpec::Copula { .. } => "copula",
            SynthSpec::FiniteMixture { .. } => "finite_mixture",
            SynthSpec::LogNormal { .. } => "log_normal",
            SynthSpec::Tpgm { .. } => "tpgm",
            SynthSpec::BivariatePoisson { .. } => "bivariate_poisson",
            SynthSpec::Multinomial { .. } => "multinomial",
            SynthSpec::IndependentPoisson { .. } => "independent_poisson",
        }
    }
}

pub fn synth_generate(spec: &SynthSpec, n: usize, seed: u64) -> Result<CountMatrix> {
    let mut rng = seeded(seed);
    match spec {
        SynthSpec::Copula { lambda, rho } => {
            Ok(GaussianCopulaPoisson::equicorrelated(lambda.clone(), *rho)?.sample(n, &mut rng))
        }
        SynthSpec::FiniteMixture { pi, lambda } => {
            Ok(FiniteMixturePoisson::new(pi.clone(), lambda.clone())?.sample(n, &mut rng))
        }
        SynthSpec::LogNormal { mu, sigma, alpha, rho } => {
            let model = match (mu, sigma, alpha, rho) {
                (Some(mu), Some(sigma), None, None) => LogNormalPoisson::new(mu.clone(), from_rows(sigma)?)?,
                (None, None, Some(a), Some(r)) => LogNormalPoisson::bivariate_extreme(*a, *r)?,
                _ => return invalid("log_normal synth needs either mu and Sigma, or alpha and rho"),
            };
            Ok(model.sample(n, &mut rng))
        }
        SynthSpec::Tpgm { theta, phi, r, gibbs_iters } => {
            let model = PairwiseGM::new(Variant::Tpgm { r: *r }, theta.clone(), from_rows(phi)?)?;
            gibbs_sample(&model, n, *gibbs_iters, &mut rng)
        }
        SynthSpec::BivariatePoisson { rates, common } => {
            Ok(CommonCovMVP::new(*common, rates.clone())?.sample(n, &mut rng))
        }
        SynthSpec::Multinomial { probs, length_rate } => {
            if probs.iter().any(|&p| !(p > 0.0)) {
                return invalid("multinomial probabilities must be positive");
            }
            let d = probs.len();
            let model = PairwiseGM::new(
                Variant::Flpgm {
                    length: LengthDist::Poisson { rate: *length_rate },
                    omega: Omega::default(),
                },
                probs.iter().map(|p| p.ln()).collect(),
                DMatrix::zeros(d, d),
            )?;
            flpgm_sample(&model, n, &mut rng)
        }
        SynthSpec::IndependentPoisson { rates } => {
            let model = CommonCovMVP::new(0.0, rates.clone())?;
            Ok(model.sample(n, &mut rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_generates() {
        let specs = vec![
            SynthSpec::Copula { lambda: vec![2.0, 3.0], rho: 0.4 },
            SynthSpec::FiniteMixture {
                pi: vec![0.5, 0.5],
                lambda: vec![vec![1.0, 2.0], vec![8.0, 1.0]],
            },
            SynthSpec::LogNormal {
                mu: None,
                sigma: None,
                alpha: Some(2.0),
                rho: Some(0.999),
            },
            SynthSpec::Tpgm {
                theta: vec![0.1, 0.2],
                phi: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
                r: 4,
                gibbs_iters: 20,
            },
            SynthSpec::BivariatePoisson { rates: vec![1.0, 2.0], common: 0.5 },
            SynthSpec::Multinomial { probs: vec![0.2, 0.8], length_rate: 6.0 },
            SynthSpec::IndependentPoisson { rates: vec![1.0, 4.0, 2.0] },
        ];
        for s in specs {
            let x = synth_generate(&s, 50, 3).unwrap();
            assert_eq!(x.n(), 50, "{}", s.kind());
            assert_eq!(x, synth_generate(&s, 50, 3).unwrap());
        }
        let tp = synth_generate(
            &SynthSpec::Tpgm {
                theta: vec![0.5, 0.5],
                phi: vec![vec![0.0, 0.3], vec![0.3, 0.0]],
                r: 4,
                gibbs_iters: 10,
            },
            200,
            1,
        )
        .unwrap();
        assert!(tp.values().iter().all(|&v| v <= 4));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let err = serde_json::from_str::<SynthSpec>(r#"{"kind":"weird"}"#);
        assert!(err.is_err());
        let bad = SynthSpec::LogNormal {
            mu: None,
            sigma: None,
            alpha: Some(2.0),
            rho: None,
        };
        assert!(synth_generate(&bad, 5, 0).is_err());
    }
}
