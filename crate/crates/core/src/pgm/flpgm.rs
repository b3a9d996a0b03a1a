//! Fixed-length model: a length law times a pairwise model on the simplex
//! `{x : Σ x_i = L}` with length-dependent interaction weight `ω(L)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::classic_mv::log_sum_exp;
use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Error, Result};
use crate::parallel::sample_rows;
use crate::univariate::ln_factorial;

use super::fit::{fit_nodewise, NodewiseFit};
use super::model::{LengthDist, Omega, PairwiseGM, Variant};

/// Limits for exact normalisation by enumerating the simplex.
pub const MAX_ENUM_DIM: usize = 6;
pub const MAX_ENUM_LENGTH: u64 = 20;

fn parts(model: &PairwiseGM) -> Result<(LengthDist, Omega)> {
    match *model.variant() {
        Variant::Flpgm { length, omega } => Ok((length, omega)),
        _ => invalid("expected a fixed-length model"),
    }
}

/// Visit every composition of `total` into `d` non-negative parts.
fn for_each_composition(d: usize, total: u64, mut visit: impl FnMut(&[u64])) {
    fn rec(x: &mut Vec<u64>, k: usize, left: u64, visit: &mut dyn FnMut(&[u64])) {
        if k + 1 == x.len() {
            x[k] = left;
            visit(x);
            return;
        }
        for v in 0..=left {
            x[k] = v;
            rec(x, k + 1, left - v, visit);
        }
    }
    let mut x = vec![0u64; d];
    rec(&mut x, 0, total, &mut visit);
}

/// `A_L`: log-normaliser on the simplex of length `length`.
pub fn flpgm_log_normalizer(model: &PairwiseGM, length: u64) -> Result<f64> {
    parts(model)?;
    let d = model.d();
    if d > MAX_ENUM_DIM || length > MAX_ENUM_LENGTH {
        return Err(Error::TooLarge(format!(
            "simplex enumeration limited to d <= {MAX_ENUM_DIM} and L <= {MAX_ENUM_LENGTH}, got d={d}, L={length}"
        )));
    }
    let mut terms = Vec::new();
    for_each_composition(d, length, |x| terms.push(model.unnorm_logdensity(x)));
    Ok(log_sum_exp(&terms))
}

/// `log P(x | ‖x‖₁ = L)` by exact enumeration.
pub fn flpgm_logpmf_given_length(x: &[u64], model: &PairwiseGM) -> Result<f64> {
    if x.len() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: x.len(),
        });
    }
    let length = x.iter().sum();
    Ok(model.unnorm_logdensity(x) - flpgm_log_normalizer(model, length)?)
}

/// `log P(L) + log P(x | L)`.
pub fn flpgm_logpmf(x: &[u64], model: &PairwiseGM) -> Result<f64> {
    let (length, _) = parts(model)?;
    Ok(length.ln_pmf(x.iter().sum()) + flpgm_logpmf_given_length(x, model)?)
}

/// Draw `L`, start from the multinomial with probabilities `softmax(θ)`, then
/// apply `d²` exact pair updates that redistribute `x_i + x_j`.
pub fn flpgm_sample<R: Rng + ?Sized>(model: &PairwiseGM, n: usize, rng: &mut R) -> Result<CountMatrix> {
    let (length, omega) = parts(model)?;
    let d = model.d();
    let theta = model.theta();
    let phi = model.phi();
    let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = theta.iter().map(|t| (t - m).exp()).collect();
    let seed = rng.random::<u64>();
    let values = sample_rows(n, d, seed, |rng, x| {
        let total = length.sample(rng);
        let mut left = total;
        let mut mass: f64 = probs.iter().sum();
        for i in 0..d {
            if i + 1 == d {
                x[i] = left;
                break;
            }
            let p = (probs[i] / mass).clamp(0.0, 1.0);
            x[i] = if left == 0 || p == 0.0 {
                0
            } else {
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            left -= x[i];
            mass -= probs[i];
        }
        if d < 2 || total == 0 {
            return;
        }
        let w = omega.weight(total);
        let mut lw = Vec::new();
        for _ in 0..d * d {
            let i = rng.random_range(0..d);
            let mut j = rng.random_range(0..d - 1);
            if j >= i {
                j += 1;
            }
            let t = x[i] + x[j];
            let (mut ci, mut cj) = (0.0, 0.0);
            for k in 0..d {
                if k != i && k != j && x[k] != 0 {
                    ci += phi[(i, k)] * x[k] as f64;
                    cj += phi[(j, k)] * x[k] as f64;
                }
            }
            lw.clear();
            for a in 0..=t {
                let (af, bf) = (a as f64, (t - a) as f64);
                lw.push(
                    theta[i] * af + theta[j] * bf
                        + w * 2.0 * (phi[(i, j)] * af * bf + af * ci + bf * cj)
                        - ln_factorial(a)
                        - ln_factorial(t - a),
                );
            }
            let a = super::node::inverse_cdf_draw(&lw, rng.random::<f64>());
            x[i] = a;
            x[j] = t - a;
        }
    });
    CountMatrix::new(values, n, d, default_names(d))
}

/// Heuristic fit: node-wise Poisson regressions with `ω(L)`-scaled
/// interactions and a Poisson length law at the mean row sum. No consistency
/// guarantee is claimed for this estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlpgmFit {
    pub fit: NodewiseFit,
    pub heuristic: bool,
}

pub fn flpgm_fit_heuristic(x: &CountMatrix, lambda: f64, omega: Omega) -> Result<FlpgmFit> {
    let variant = Variant::Flpgm {
        length: LengthDist::Poisson { rate: 1.0 },
        omega,
    };
    Ok(FlpgmFit {
        fit: fit_nodewise(x, &variant, lambda)?,
        heuristic: true,
    })
}
