//! Univariate node conditionals and their log-partition series.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tail tolerance when evaluating a log-partition series.
pub const SERIES_TOL: f64 = 1e-14;
/// Relative tail tolerance when enumerating a support for sampling.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Largest number of terms or states visited before declaring divergence.
pub const MAX_SUPPORT: u64 = 1_000_000;

/// Sub-linear statistic: identity up to `r0`, a quadratic bridge up to `r`,
/// constant `(r + r0) / 2` beyond.
pub fn spgm_suffstat(z: f64, r0: f64, r: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0 < r) {
        return invalid(format!("sub-linear knots need 0 < R0 < R, got R0={r0}, R={r}"));
    }
    Ok(spgm_stat(z, r0, r))
}

pub(crate) fn spgm_stat(z: f64, r0: f64, r: f64) -> f64 {
    if z <= r0 {
        z
    } else if z <= r {
        (-z * z + 2.0 * r * z - r0 * r0) / (2.0 * (r - r0))
    } else {
        0.5 * (r + r0)
    }
}

/// One node conditional of a pairwise model, given the other coordinates.
///
/// * `Poisson`: `exp(η x − ln x!)`
/// * `Truncated`: the same on `{0..r}`
/// * `SubLinear`: `exp(η T(x) − ln x!)` with the sub-linear statistic
/// * `Quadratic`: `exp(linear x + quadratic x²)` with `quadratic < 0`
/// * `SquareRoot`: `exp(η1 x + η2 √x − ln x!)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeConditional {
    Poisson { eta: f64 },
    Truncated { eta: f64, r: u64 },
    SubLinear { eta: f64, r0: u64, r: u64 },
    Quadratic { linear: f64, quadratic: f64 },
    SquareRoot { eta1: f64, eta2: f64 },
}

/// Log-partition value and the expectations of the two sufficient statistics.
///
/// The primary statistic is `x` (`T(x)` for the sub-linear family, `√x` for
/// the square-root family); the secondary one is `x²` for the quadratic family
/// and `x` for the square-root family, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSummary {
    pub log_partition: f64,
    pub mean_primary: f64,
    pub mean_secondary: f64,
}

impl NodeConditional {
    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            NodeConditional::Poisson { eta } => eta.is_finite(),
            NodeConditional::Truncated { eta, .. } => eta.is_finite(),
            NodeConditional::SubLinear { eta, r0, r } => {
                if !(r0 > 0 && r0 < r) {
                    return invalid(format!("sub-linear knots need 0 < R0 < R, got R0={r0}, R={r}"));
                }
                eta.is_finite()
            }
            NodeConditional::Quadratic { linear, quadratic } => {
                if quadratic.is_finite() && quadratic >= 0.0 {
                    return Err(Error::Divergent(format!(
                        "quadratic node needs a negative quadratic coefficient, got {quadratic}"
                    )));
                }
                linear.is_finite() && quadratic.is_finite()
            }
            NodeConditional::SquareRoot { eta1, eta2 } => eta1.is_finite() && eta2.is_finite(),
        };
        if !finite {
            return Err(Error::Divergent(format!("non-finite node parameters {self:?}")));
        }
        Ok(())
    }

    fn upper(&self) -> Option<u64> {
        match *self {
            NodeConditional::Truncated { r, .. } => Some(r),
            _ => None,
        }
    }

    /// Unnormalised log weight and statistics at `x`, given `ln x!`.
    #[inline]
    fn term(&self, x: u64, ln_fact: f64) -> (f64, f64, f64) {
        let xf = x as f64;
        match *self {
            NodeConditional::Poisson { eta } | NodeConditional::Truncated { eta, .. } => {
                (eta * xf - ln_fact, xf, 0.0)
            }
            NodeConditional::SubLinear { eta, r0, r } => {
                let t = spgm_stat(xf, r0 as f64, r as f64);
                (eta * t - ln_fact, t, 0.0)
            }
            NodeConditional::Quadratic { linear, quadratic } => {
                (linear * xf + quadratic * xf * xf, xf, xf * xf)
            }
            NodeConditional::SquareRoot { eta1, eta2 } => {
                let s = xf.sqrt();
                (eta1 * xf + eta2 * s - ln_fact, s, xf)
            }
        }
    }

    /// Non-increasing upper bound on `log w(y+1) − log w(y)` for all `y ≥ x`.
    #[inline]
    fn increment_bound(&self, x: u64) -> f64 {
        let xf = x as f64;
        match *self {
            NodeConditional::Poisson { eta } | NodeConditional::Truncated { eta, .. } => {
                eta - (xf + 1.0).ln()
            }
            NodeConditional::SubLinear { eta, r0, r } => {
                let dt = spgm_stat(xf + 1.0, r0 as f64, r as f64) - spgm_stat(xf, r0 as f64, r as f64);
                eta.max(0.0) * dt - (xf + 1.0).ln()
            }
            NodeConditional::Quadratic { linear, quadratic } => linear + quadratic * (2.0 * xf + 1.0),
            NodeConditional::SquareRoot { eta1, eta2 } => {
                eta1 + eta2.max(0.0) * ((xf + 1.0).sqrt() - xf.sqrt()) - (xf + 1.0).ln()
            }
        }
    }

    /// Walk the support from zero, calling `visit(x, log_w, s1, s2)`, until the
    /// geometric tail bound falls below `tol` times the accumulated mass.
    fn walk(&self, tol: f64, mut visit: impl FnMut(u64, f64, f64, f64)) -> Result<()> {
        self.validate()?;
        let upper = self.upper();
        let mut ln_fact = 0.0;
        let mut max_lw = f64::NEG_INFINITY;
        let mut scaled_mass = 0.0;
        let mut x = 0u64;
        loop {
            if x > 0 {
                ln_fact += (x as f64).ln();
            }
            let (lw, s1, s2) = self.term(x, ln_fact);
            if !lw.is_finite() {
                return Err(Error::Divergent(format!("non-finite series term at x={x} for {self:?}")));
            }
            visit(x, lw, s1, s2);
            if lw > max_lw {
                scaled_mass = scaled_mass * (max_lw - lw).exp() + 1.0;
                max_lw = lw;
            } else {
                scaled_mass += (lw - max_lw).exp();
            }
            if upper == Some(x) {
                return Ok(());
            }
            let b = self.increment_bound(x);
            if b < 0.0 {
                let tail = (lw - max_lw).exp() * b.exp() / (1.0 - b.exp());
                if tail < tol * scaled_mass {
                    return Ok(());
                }
            }
            x += 1;
            if x >= MAX_SUPPORT {
                return Err(Error::Divergent(format!(
                    "node conditional {self:?} needs more than {MAX_SUPPORT} support points"
                )));
            }
        }
    }

    pub fn summary(&self) -> Result<NodeSummary> {
        if let NodeConditional::Poisson { eta } = *self {
            self.validate()?;
            let a = eta.exp();
            if !a.is_finite() {
                return Err(Error::Divergent(format!("poisson node partition overflows at eta={eta}")));
            }
            return Ok(NodeSummary {
                log_partition: a,
                mean_primary: a,
                mean_secondary: 0.0,
            });
        }
        let mut m = f64::NEG_INFINITY;
        let (mut s, mut e1, mut e2) = (0.0, 0.0, 0.0);
        self.walk(SERIES_TOL, |_, lw, s1, s2| {
            if lw > m {
                let c = (m - lw).exp();
                s *= c;
                e1 *= c;
                e2 *= c;
                m = lw;
            }
            let w = (lw - m).exp();
            s += w;
            e1 += w * s1;
            e2 += w * s2;
        })?;
        Ok(NodeSummary {
            log_partition: m + s.ln(),
            mean_primary: e1 / s,
            mean_secondary: e2 / s,
        })
    }

    pub fn log_partition(&self) -> Result<f64> {
        Ok(self.summary()?.log_partition)
    }

    pub fn ln_pmf(&self, x: u64) -> Result<f64> {
        if self.upper().is_some_and(|r| x > r) {
            return Ok(f64::NEG_INFINITY);
        }
        let ln_fact = crate::univariate::ln_factorial(x);
        Ok(self.term(x, ln_fact).0 - self.log_partition()?)
    }

    /// Log weights over the enumerated support `0..len`.
    pub fn support_log_weights(&self) -> Result<Vec<f64>> {
        if let NodeConditional::Poisson { eta } = *self {
            if eta.exp() > 0.5 * MAX_SUPPORT as f64 {
                return Err(Error::Divergent(format!(
                    "poisson node mean e^{eta} exceeds the support cap {MAX_SUPPORT}"
                )));
            }
        }
        let mut out = Vec::new();
        self.walk(SUPPORT_TOL, |_, lw, _, _| out.push(lw))?;
        Ok(out)
    }

    /// Exact inverse-CDF draw over the enumerated support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        if let NodeConditional::Poisson { eta } = *self {
            self.validate()?;
            let rate = eta.exp();
            if rate > 0.5 * MAX_SUPPORT as f64 {
                return Err(Error::Divergent(format!(
                    "poisson node mean e^{eta} exceeds the support cap {MAX_SUPPORT}"
                )));
            }
            return Ok(crate::univariate::poisson_draw(rate, rng));
        }
        let lw = self.support_log_weights()?;
        Ok(inverse_cdf_draw(&lw, rng.random::<f64>()))
    }
}

/// Index drawn from unnormalised log weights with the uniform `u`.
pub(crate) fn inverse_cdf_draw(log_weights: &[f64], u: f64) -> u64 {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut target = u * total;
    for (k, &wk) in w.iter().enumerate() {
        if target < wk {
            return k as u64;
        }
        target -= wk;
    }
    // rounding: fall back to the last state with positive weight
    w.iter().rposition(|&v| v > 0.0).unwrap_or(0) as u64
}
