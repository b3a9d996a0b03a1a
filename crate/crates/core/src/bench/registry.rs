//! Benchmark model registry: fitting by name and a serialisable fitted model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{fit_ifm, GaussianCopulaPoisson, TransformKind};
use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Error, Result};
use crate::mixtures::{fm_fit_em, ln_fit_moments, FiniteMixturePoisson, LogNormalPoisson};
use crate::parallel::sample_rows;
use crate::pgm::{fit_nodewise, lpgm_fit, EdgeRule, LocalPgm, Omega, PairwiseGM, Variant};
use crate::univariate::poisson_draw;

use super::config::ModelSpec;

/// Independent Poisson marginals at the column means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentPoisson {
    pub rates: Vec<f64>,
}

impl IndependentPoisson {
    pub fn fit(x: &CountMatrix) -> Result<Self> {
        if x.n() == 0 {
            return Err(Error::EmptyData("no rows to fit".into()));
        }
        Ok(Self { rates: x.column_means() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CountMatrix {
        let d = self.rates.len();
        let values = sample_rows(n, d, rng.random::<u64>(), |rng, row| {
            for (v, &r) in row.iter_mut().zip(&self.rates) {
                *v = poisson_draw(r, rng);
            }
        });
        CountMatrix::new(values, n, d, default_names(d)).expect("shape is consistent")
    }
}

/// Hyperparameters of one fit. Absent fields do not apply to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Hyperparameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<EdgeRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum FittedModel {
    IndPoisson(IndependentPoisson),
    CopulaPoisson(GaussianCopulaPoisson),
    MixturePoiss(FiniteMixturePoisson),
    LogNormal(LogNormalPoisson),
    Pgm(PairwiseGM),
    Tpgm(PairwiseGM),
    FlpgmPoisson(PairwiseGM),
    PoissonSqr(PairwiseGM),
    Lpgm(LocalPgm),
}

impl FittedModel {
    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::IndPoisson(_) => "ind_poisson",
            FittedModel::CopulaPoisson(_) => "copula_poisson",
            FittedModel::MixturePoiss(_) => "mixture_poiss",
            FittedModel::LogNormal(_) => "log_normal",
            FittedModel::Pgm(_) => "pgm",
            FittedModel::Tpgm(_) => "tpgm",
            FittedModel::FlpgmPoisson(_) => "flpgm_poisson",
            FittedModel::PoissonSqr(_) => "poisson_sqr",
            FittedModel::Lpgm(_) => "lpgm",
        }
    }

    pub fn d(&self) -> usize {
        match self {
            FittedModel::IndPoisson(m) => m.rates.len(),
            FittedModel::CopulaPoisson(m) => m.d(),
            FittedModel::MixturePoiss(m) => m.d(),
            FittedModel::LogNormal(m) => m.d(),
            FittedModel::Pgm(m) | FittedModel::Tpgm(m) | FittedModel::FlpgmPoisson(m) | FittedModel::PoissonSqr(m) => {
                m.d()
            }
            FittedModel::Lpgm(m) => m.d(),
        }
    }

    /// `gibbs_iters` applies to the graphical models only.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, gibbs_iters: usize, rng: &mut R) -> Result<CountMatrix> {
        match self {
            FittedModel::IndPoisson(m) => Ok(m.sample(n, rng)),
            FittedModel::CopulaPoisson(m) => Ok(m.sample(n, rng)),
            FittedModel::MixturePoiss(m) => Ok(m.sample(n, rng)),
            FittedModel::LogNormal(m) => Ok(m.sample(n, rng)),
            FittedModel::Pgm(m) | FittedModel::Tpgm(m) | FittedModel::FlpgmPoisson(m) | FittedModel::PoissonSqr(m) => {
                crate::pgm::gibbs_sample(m, n, gibbs_iters, rng)
            }
            FittedModel::Lpgm(m) => m.sample(n, gibbs_iters, rng),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn need<T>(v: Option<T>, what: &str, model: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("`{model}` needs hyperparameter `{what}`")))
}

/// Fit registry model `name` on `x`. TPGM expects `x` already truncated at `R`.
pub fn fit_model(name: &str, x: &CountMatrix, hp: &Hyperparameters, seed: u64) -> Result<FittedModel> {
    Ok(match name {
        "ind_poisson" => FittedModel::IndPoisson(IndependentPoisson::fit(x)?),
        "copula_poisson" => FittedModel::CopulaPoisson(fit_ifm(x, hp.transform.unwrap_or_default())?),
        "mixture_poiss" => FittedModel::MixturePoiss(fm_fit_em(x, need(hp.k, "k", name)?, seed)?.model),
        "log_normal" => FittedModel::LogNormal(ln_fit_moments(x)?),
        "pgm" => FittedModel::Pgm(fit_nodewise(x, &Variant::Pgm, need(hp.lambda, "lambda", name)?)?.model),
        "tpgm" => {
            let r = need(hp.r, "R", name)?;
            if x.values().iter().any(|&v| v > r) {
                return invalid(format!("tpgm data exceeds the truncation R = {r}"));
            }
            FittedModel::Tpgm(fit_nodewise(x, &Variant::Tpgm { r }, need(hp.lambda, "lambda", name)?)?.model)
        }
        "flpgm_poisson" => {
            let omega = Omega {
                exponent: hp.omega_exponent.unwrap_or(Omega::default().exponent),
            };
            let variant = Variant::Flpgm {
                length: crate::pgm::LengthDist::Poisson { rate: 1.0 },
                omega,
            };
            FittedModel::FlpgmPoisson(fit_nodewise(x, &variant, need(hp.lambda, "lambda", name)?)?.model)
        }
        "poisson_sqr" => FittedModel::PoissonSqr(fit_nodewise(x, &Variant::Sqr, need(hp.lambda, "lambda", name)?)?.model),
        "lpgm" => FittedModel::Lpgm(lpgm_fit(x, need(hp.lambda, "lambda", name)?, hp.rule.unwrap_or_default())?),
        other => return Err(Error::UnknownModel(other.to_string())),
    })
}

/// The variant whose penalty path drives the grid of a penalised model.
pub(crate) fn path_variant(name: &str, r: Option<u64>) -> Option<Variant> {
    match name {
        "pgm" | "lpgm" | "flpgm_poisson" => Some(Variant::Pgm),
        "tpgm" => Some(Variant::Tpgm { r: r.unwrap_or(1) }),
        "poisson_sqr" => Some(Variant::Sqr),
        _ => None,
    }
}

/// Hyperparameters shared by every grid point (everything except `k` and `lambda`).
pub(crate) fn fixed_hyperparameters(spec: &ModelSpec, r: Option<u64>) -> Hyperparameters {
    let mut hp = Hyperparameters::default();
    match spec.name.as_str() {
        "copula_poisson" => hp.transform = Some(spec.transform.unwrap_or_default()),
        "tpgm" => hp.r = r,
        "flpgm_poisson" => hp.omega_exponent = Some(spec.omega_exponent.unwrap_or(Omega::default().exponent)),
        "lpgm" => hp.rule = Some(spec.rule.unwrap_or_default()),
        _ => {}
    }
    hp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn data() -> CountMatrix {
        let mut rng = seeded(2);
        let rows: Vec<Vec<u64>> = (0..120)
            .map(|i| {
                let z = poisson_draw(if i % 2 == 0 { 1.0 } else { 6.0 }, &mut rng);
                vec![z + poisson_draw(1.0, &mut rng), z + poisson_draw(2.0, &mut rng), poisson_draw(3.0, &mut rng)]
            })
            .collect();
        CountMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn every_registry_model_fits_samples_and_round_trips() {
        let x = data();
        let r = crate::pgm::tpgm_truncation(&x);
        let xt = x.map_values(|v| v.min(r));
        for name in super::super::config::REGISTRY {
            let hp = Hyperparameters {
                k: Some(3),
                // positive dependence makes the unconstrained local model's sampler blow up
                lambda: Some(if name == "lpgm" { crate::pgm::lambda_max(&x, &Variant::Pgm) } else { 0.05 }),
                r: Some(r),
                ..Hyperparameters::default()
            };
            let data = if name == "tpgm" { &xt } else { &x };
            let m = fit_model(name, data, &hp, 9).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(m.name(), name);
            assert_eq!(m.d(), 3);
            let s = m.sample(50, 30, &mut seeded(1)).unwrap();
            assert_eq!((s.n(), s.d()), (50, 3));
            let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.to_json().unwrap(), m.to_json().unwrap(), "{name}");
        }
    }

    #[test]
    fn missing_hyperparameters_and_unknown_names() {
        let x = data();
        assert!(matches!(fit_model("pgm", &x, &Hyperparameters::default(), 0), Err(Error::Config(_))));
        assert!(matches!(
            fit_model("gaussian", &x, &Hyperparameters::default(), 0),
            Err(Error::UnknownModel(_))
        ));
        let hp = Hyperparameters {
            r: Some(1),
            lambda: Some(0.1),
            ..Hyperparameters::default()
        };
        assert!(fit_model("tpgm", &x, &hp, 0).is_err());
    }

    #[test]
    fn independent_poisson_rates_are_means() {
        let x = data();
        let m = IndependentPoisson::fit(&x).unwrap();
        assert_eq!(m.rates, x.column_means());
    }
}
