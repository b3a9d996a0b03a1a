//! Univariate Poisson and negative binomial primitives.
//!
//! All factorials go through `ln_gamma`; no factorial tables are used.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{invalid, Result};

/// `log(x!)` via the log-gamma function.
#[inline]
pub fn ln_factorial(x: u64) -> f64 {
    if x < 2 {
        return 0.0;
    }
    ln_gamma(x as f64 + 1.0)
}

/// Rates below this value use plain forward summation for cdf and quantile.
const FORWARD_SUM_LIMIT: f64 = 30.0;

/// Poisson law with positive rate. The natural parameter is `ln(rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poisson {
    rate: f64,
}

impl Poisson {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return invalid(format!("poisson rate must be positive and finite, got {rate}"));
        }
        Ok(Self { rate })
    }

    /// Build from the natural parameter `η = ln λ`.
    pub fn from_natural(eta: f64) -> Result<Self> {
        Self::new(eta.exp())
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn natural(&self) -> f64 {
        self.rate.ln()
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        x as f64 * self.rate.ln() - self.rate - ln_factorial(x)
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// `P(X <= x)`; `x < 0` is the empty sum.
    pub fn cdf(&self, x: i64) -> f64 {
        if x < 0 {
            return 0.0;
        }
        if self.rate < FORWARD_SUM_LIMIT {
            let mut term = (-self.rate).exp();
            let mut acc = term;
            for k in 1..=x as u64 {
                term *= self.rate / k as f64;
                acc += term;
                if term == 0.0 && k as f64 > self.rate {
                    break;
                }
            }
            acc.min(1.0)
        } else {
            gamma_ur(x as f64 + 1.0, self.rate).clamp(0.0, 1.0)
        }
    }

    /// Smallest `x` with `cdf(x) >= u`, for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<u64> {
        if !(0.0..1.0).contains(&u) {
            return invalid(format!("quantile level must lie in [0, 1), got {u}"));
        }
        if u == 0.0 {
            return Ok(0);
        }
        let lam = self.rate;
        let cap = lam + 40.0 * lam.sqrt() + 40.0;
        if lam < FORWARD_SUM_LIMIT {
            let mut term = (-lam).exp();
            let mut acc = term;
            let mut x = 0u64;
            while acc < u {
                x += 1;
                term *= lam / x as f64;
                acc += term;
                if x as f64 > cap {
                    break;
                }
            }
            return Ok(x);
        }
        // Warm start at floor(λ), then walk.
        let mut x = lam.floor() as u64;
        let mut c = self.cdf(x as i64);
        let mut p = self.pmf(x);
        if c >= u {
            while x > 0 && c - p >= u {
                c -= p;
                p *= x as f64 / lam;
                x -= 1;
            }
        } else {
            while c < u {
                x += 1;
                p *= lam / x as f64;
                c += p;
                if x as f64 > cap {
                    break;
                }
            }
        }
        Ok(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        poisson_draw(self.rate, rng)
    }
}

/// Largest rate handed to the sampler; larger rates are clamped.
const MAX_SAMPLING_RATE: f64 = 1.0e15;

/// Exact Poisson draw; a zero rate yields zero.
pub fn poisson_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if !(rate > 0.0) {
        return 0;
    }
    let rate = rate.min(MAX_SAMPLING_RATE);
    let d = rand_distr::Poisson::new(rate).expect("positive finite rate");
    d.sample(rng) as u64
}

pub fn pois_logpmf(x: u64, rate: f64) -> Result<f64> {
    Ok(Poisson::new(rate)?.ln_pmf(x))
}

pub fn pois_cdf(x: i64, rate: f64) -> Result<f64> {
    Ok(Poisson::new(rate)?.cdf(x))
}

pub fn pois_quantile(u: f64, rate: f64) -> Result<u64> {
    Poisson::new(rate)?.quantile(u)
}

pub fn pois_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    Ok(Poisson::new(rate)?.sample(rng))
}

/// Negative binomial with shape `r` and success probability `p`:
/// `Γ(r+x)/(Γ(r)Γ(x+1)) p^r (1-p)^x`, mean `r(1-p)/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinomial {
    r: f64,
    p: f64,
}

impl NegBinomial {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("negative binomial shape must be positive, got {r}"));
        }
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("negative binomial p must lie in (0, 1), got {p}"));
        }
        Ok(Self { r, p })
    }

    /// Parameterise by mean and shape: `p = r / (r + mean)`.
    pub fn from_mean(mean: f64, r: f64) -> Result<Self> {
        if !(mean > 0.0) {
            return invalid(format!("mean must be positive, got {mean}"));
        }
        Self::new(r, r / (r + mean))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mean(&self) -> f64 {
        self.r * (1.0 - self.p) / self.p
    }

    pub fn variance(&self) -> f64 {
        self.mean() / self.p
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        let xf = x as f64;
        ln_gamma(self.r + xf) - ln_gamma(self.r) - ln_gamma(xf + 1.0)
            + self.r * self.p.ln()
            + xf * (1.0 - self.p).ln()
    }

    /// Gamma–Poisson mixture draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let scale = (1.0 - self.p) / self.p;
        let g = Gamma::new(self.r, scale).expect("valid gamma parameters");
        poisson_draw(g.sample(rng), rng)
    }
}

pub fn negbin_logpmf(x: u64, r: f64, p: f64) -> Result<f64> {
    Ok(NegBinomial::new(r, p)?.ln_pmf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Product-form oracle: λ^x e^{-λ} / x! with explicit factorial arithmetic.
    fn pmf_product_form(x: u64, lam: f64) -> f64 {
        let mut v = (-lam).exp();
        for k in 1..=x {
            v *= lam / k as f64;
        }
        v
    }

    #[test]
    fn logpmf_examples() {
        assert!((pois_logpmf(0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((pois_logpmf(2, 2.0).unwrap() - (2f64.ln() - 2.0)).abs() < 1e-14);
        let direct = pmf_product_form(7, 3.5).ln();
        assert!((pois_logpmf(7, 3.5).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn logpmf_rejects_nonpositive_rate() {
        assert!(pois_logpmf(1, 0.0).is_err());
        assert!(pois_logpmf(1, -2.0).is_err());
    }

    #[test]
    fn exponential_family_form_matches() {
        for &lam in &[0.1, 1.0, 3.7, 25.0, 400.0] {
            let eta = f64::ln(lam);
            for x in 0..60u64 {
                let ef = eta * x as f64 - ln_factorial(x) - eta.exp();
                assert!((pois_logpmf(x, lam).unwrap() - ef).abs() < 1e-12 * (1.0 + ef.abs()));
            }
        }
    }

    #[test]
    fn mass_covers_adaptive_grid() {
        for &lam in &[0.2, 1.0, 5.0, 17.0, 60.0] {
            let top = (lam + 40.0 * f64::sqrt(lam) + 40.0).ceil() as u64;
            let total: f64 = (0..=top).map(|x| pois_logpmf(x, lam).unwrap().exp()).sum();
            assert!(total >= 1.0 - 1e-12, "lam={lam} total={total}");
        }
    }

    #[test]
    fn cdf_and_quantile_edges() {
        assert_eq!(pois_cdf(-1, 3.0).unwrap(), 0.0);
        assert_eq!(pois_quantile(0.0, 3.0).unwrap(), 0);
        assert!(pois_quantile(1.0, 3.0).is_err());
        assert!(pois_quantile(-0.1, 3.0).is_err());
        for x in 0..=10 {
            let u = pois_cdf(x, 2.0).unwrap();
            if u < 1.0 {
                assert!(pois_quantile(u, 2.0).unwrap() >= x as u64);
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf_for_large_rates() {
        let p = Poisson::new(250.0).unwrap();
        for &u in &[1e-9, 0.01, 0.3, 0.5, 0.77, 0.999999] {
            let q = p.quantile(u).unwrap();
            assert!(p.cdf(q as i64) >= u - 1e-12);
            assert!(q == 0 || p.cdf(q as i64 - 1) < u + 1e-12);
        }
    }

    #[test]
    fn cdf_branches_agree_near_switch() {
        let a = Poisson::new(29.999_999).unwrap();
        let b = Poisson::new(30.0).unwrap();
        for x in [10, 25, 30, 45] {
            assert!((a.cdf(x) - b.cdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn negbin_examples() {
        let (r, p) = (2.5, 0.3);
        assert!((negbin_logpmf(0, r, p).unwrap() - r * p.ln()).abs() < 1e-13);
        for x in 0..10u64 {
            let geo = 0.4f64.ln() + x as f64 * 0.6f64.ln();
            assert!((negbin_logpmf(x, 1.0, 0.4).unwrap() - geo).abs() < 1e-12);
        }
        assert!(negbin_logpmf(1, 0.0, 0.5).is_err());
        assert!(negbin_logpmf(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn negbin_approaches_poisson() {
        let nb = NegBinomial::from_mean(3.0, 1e6).unwrap();
        for x in 0..=15u64 {
            let diff = (nb.ln_pmf(x) - pois_logpmf(x, 3.0).unwrap()).abs();
            assert!(diff < 1e-4, "x={x} diff={diff}");
        }
    }

    #[test]
    fn negbin_samples_are_overdispersed() {
        let mut rng = seeded(11);
        for &(r, p) in &[(1.0, 0.3), (5.0, 0.5), (20.0, 0.8)] {
            let nb = NegBinomial::new(r, p).unwrap();
            let xs: Vec<f64> = (0..20_000).map(|_| nb.sample(&mut rng) as f64).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!(v > m, "r={r} p={p} mean={m} var={v}");
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let a: Vec<u64> = {
            let mut rng = seeded(3);
            (0..50).map(|_| pois_sample(4.2, &mut rng).unwrap()).collect()
        };
        let b: Vec<u64> = {
            let mut rng = seeded(3);
            (0..50).map(|_| pois_sample(4.2, &mut rng).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
