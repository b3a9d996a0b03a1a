//! Pairwise graphical-model parameters, variants and the unnormalised density.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{from_rows, to_rows};
use crate::univariate::{ln_factorial, poisson_draw, NegBinomial};

use super::node::{spgm_stat, NodeConditional};

/// Length law of the fixed-length model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthDist {
    Poisson { rate: f64 },
    NegBinomial { r: f64, p: f64 },
}

impl LengthDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LengthDist::Poisson { rate } => {
                if !(rate > 0.0) || !rate.is_finite() {
                    return invalid(format!("length rate must be positive, got {rate}"));
                }
            }
            LengthDist::NegBinomial { r, p } => {
                NegBinomial::new(r, p)?;
            }
        }
        Ok(())
    }

    pub fn ln_pmf(&self, l: u64) -> f64 {
        match *self {
            LengthDist::Poisson { rate } => l as f64 * rate.ln() - rate - ln_factorial(l),
            LengthDist::NegBinomial { r, p } => NegBinomial::new(r, p).map(|nb| nb.ln_pmf(l)).unwrap_or(f64::NAN),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            LengthDist::Poisson { rate } => poisson_draw(rate, rng),
            LengthDist::NegBinomial { r, p } => NegBinomial::new(r, p).expect("validated").sample(rng),
        }
    }
}

/// Interaction weight as a function of the vector length: `ω(L) = max(L, 1)^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    pub exponent: f64,
}

impl Default for Omega {
    fn default() -> Self {
        Self { exponent: 1.0 }
    }
}

impl Omega {
    pub fn weight(&self, length: u64) -> f64 {
        (length.max(1) as f64).powf(-self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    Pgm,
    Tpgm { r: u64 },
    Qpgm,
    Spgm { r0: u64, r: u64 },
    Sqr,
    Flpgm { length: LengthDist, omega: Omega },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Pgm => "pgm",
            Variant::Tpgm { .. } => "tpgm",
            Variant::Qpgm => "qpgm",
            Variant::Spgm { .. } => "spgm",
            Variant::Sqr => "sqr",
            Variant::Flpgm { .. } => "flpgm",
        }
    }

    /// Whether `Φ_ii` enters the node conditional as a free parameter.
    pub fn has_diagonal(&self) -> bool {
        matches!(self, Variant::Qpgm | Variant::Sqr)
    }

    /// Sufficient statistic of a single coordinate.
    pub fn stat(&self, x: u64) -> f64 {
        match *self {
            Variant::Spgm { r0, r } => spgm_stat(x as f64, r0 as f64, r as f64),
            Variant::Sqr => (x as f64).sqrt(),
            _ => x as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmRepr {
    variant: String,
    theta: Vec<f64>,
    #[serde(rename = "Phi")]
    phi: Vec<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<u64>,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    r0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<Omega>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_dist: Option<LengthDist>,
}

/// `θ`, symmetric `Φ` and the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmRepr", into = "GmRepr")]
pub struct PairwiseGM {
    variant: Variant,
    theta: Vec<f64>,
    phi: DMatrix<f64>,
}

impl TryFrom<GmRepr> for PairwiseGM {
    type Error = Error;
    fn try_from(v: GmRepr) -> Result<Self> {
        let need = |o: Option<u64>, what: &str| o.ok_or_else(|| Error::InvalidParameter(format!("{} model needs {what}", v.variant)));
        let variant = match v.variant.as_str() {
            "pgm" => Variant::Pgm,
            "tpgm" => Variant::Tpgm { r: need(v.r, "R")? },
            "qpgm" => Variant::Qpgm,
            "spgm" => Variant::Spgm {
                r0: need(v.r0, "R0")?,
                r: need(v.r, "R")?,
            },
            "sqr" => Variant::Sqr,
            "flpgm" => Variant::Flpgm {
                length: v
                    .length_dist
                    .ok_or_else(|| Error::InvalidParameter("flpgm model needs length_dist".into()))?,
                omega: v.omega.unwrap_or_default(),
            },
            other => return Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        };
        Self::new(variant, v.theta, from_rows(&v.phi)?)
    }
}

impl From<PairwiseGM> for GmRepr {
    fn from(m: PairwiseGM) -> Self {
        let (r, r0, omega, length_dist) = match m.variant {
            Variant::Tpgm { r } => (Some(r), None, None, None),
            Variant::Spgm { r0, r } => (Some(r), Some(r0), None, None),
            Variant::Flpgm { length, omega } => (None, None, Some(omega), Some(length)),
            _ => (None, None, None, None),
        };
        GmRepr {
            variant: m.variant.name().to_string(),
            theta: m.theta,
            phi: to_rows(&m.phi),
            r,
            r0,
            omega,
            length_dist,
        }
    }
}

impl PairwiseGM {
    pub fn new(variant: Variant, theta: Vec<f64>, phi: DMatrix<f64>) -> Result<Self> {
        let d = theta.len();
        if d == 0 {
            return invalid("model needs at least one node");
        }
        if phi.nrows() != d || phi.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: phi.nrows(),
            });
        }
        if theta.iter().chain(phi.iter()).any(|v| !v.is_finite()) {
            return invalid("model parameters must be finite");
        }
        for i in 0..d {
            for j in 0..i {
                if (phi[(i, j)] - phi[(j, i)]).abs() > 1e-9 {
                    return invalid(format!("Phi must be symmetric (entry {i},{j})"));
                }
            }
        }
        if !variant.has_diagonal() && (0..d).any(|i| phi[(i, i)] != 0.0) {
            return invalid(format!("{} model needs a zero Phi diagonal", variant.name()));
        }
        match variant {
            Variant::Pgm => {
                for i in 0..d {
                    for j in 0..d {
                        if i != j && phi[(i, j)] > 0.0 {
                            return invalid(format!(
                                "pgm interactions must be non-positive, Phi[{i},{j}] = {}",
                                phi[(i, j)]
                            ));
                        }
                    }
                }
            }
            Variant::Tpgm { r } if r == 0 => return invalid("truncation R must be at least 1"),
            Variant::Spgm { r0, r } if !(r0 > 0 && r0 < r) => {
                return invalid(format!("sub-linear knots need 0 < R0 < R, got R0={r0}, R={r}"));
            }
            Variant::Qpgm => {
                if let Some(i) = (0..d).find(|&i| phi[(i, i)] >= 0.0) {
                    return Err(Error::Divergent(format!(
                        "qpgm needs a negative Phi diagonal, Phi[{i},{i}] = {}",
                        phi[(i, i)]
                    )));
                }
            }
            Variant::Flpgm { length, .. } => length.validate()?,
            _ => {}
        }
        Ok(Self { variant, theta, phi })
    }

    /// Independent model (`Φ = 0`; diagonal `-1` for the quadratic variant).
    pub fn independent(variant: Variant, theta: Vec<f64>) -> Result<Self> {
        let d = theta.len();
        let mut phi = DMatrix::zeros(d, d);
        if matches!(variant, Variant::Qpgm) {
            phi.fill_diagonal(-1.0);
        }
        Self::new(variant, theta, phi)
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// `θᵀT(x) + T(x)ᵀΦT(x) − Σ B(x_i)`; `−∞` outside the domain.
    pub fn unnorm_logdensity(&self, x: &[u64]) -> f64 {
        let d = self.d();
        if x.len() != d {
            return f64::NEG_INFINITY;
        }
        if let Variant::Tpgm { r } = self.variant {
            if x.iter().any(|&v| v > r) {
                return f64::NEG_INFINITY;
            }
        }
        let t: Vec<f64> = x.iter().map(|&v| self.variant.stat(v)).collect();
        let length = x.iter().sum::<u64>();
        let scale = match self.variant {
            Variant::Flpgm { omega, .. } => omega.weight(length),
            _ => 1.0,
        };
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..d {
            lin += self.theta[i] * t[i];
            if t[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                quad += t[i] * self.phi[(i, j)] * t[j];
            }
        }
        let base: f64 = match self.variant {
            Variant::Qpgm => 0.0,
            _ => x.iter().map(|&v| ln_factorial(v)).sum(),
        };
        lin + scale * quad - base
    }

    /// Natural parameter of node `i` given the other coordinates of `x`.
    pub(crate) fn node_eta(&self, i: usize, x: &[u64]) -> f64 {
        let mut eta = self.theta[i];
        for (j, &xj) in x.iter().enumerate() {
            if j != i && xj != 0 {
                eta += 2.0 * self.phi[(i, j)] * self.variant.stat(xj);
            }
        }
        eta
    }

    /// Conditional law of `x_i` given the rest (ignored for the fixed-length variant,
    /// whose conditionals are taken on the simplex).
    pub fn node_conditional(&self, i: usize, x: &[u64]) -> NodeConditional {
        let eta = self.node_eta(i, x);
        match self.variant {
            Variant::Pgm | Variant::Flpgm { .. } => NodeConditional::Poisson { eta },
            Variant::Tpgm { r } => NodeConditional::Truncated { eta, r },
            Variant::Spgm { r0, r } => NodeConditional::SubLinear { eta, r0, r },
            Variant::Qpgm => NodeConditional::Quadratic {
                linear: eta,
                quadratic: self.phi[(i, i)],
            },
            Variant::Sqr => NodeConditional::SquareRoot {
                eta1: self.phi[(i, i)],
                eta2: eta,
            },
        }
    }

    /// Log-normaliser of the truncated model by full enumeration of `{0..R}^d`.
    pub fn tpgm_log_partition(&self) -> Result<f64> {
        let r = match self.variant {
            Variant::Tpgm { r } => r,
            _ => return invalid("exact normalisation is only available for the truncated variant"),
        };
        let d = self.d();
        let states = (r as f64 + 1.0).powi(d as i32);
        if states > 1e7 {
            return Err(Error::TooLarge(format!("{states} states in (R+1)^d grid")));
        }
        let mut x = vec![0u64; d];
        let mut terms = Vec::with_capacity(states as usize);
        loop {
            terms.push(self.unnorm_logdensity(&x));
            let mut k = 0;
            while k < d {
                if x[k] < r {
                    x[k] += 1;
                    break;
                }
                x[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        Ok(crate::classic_mv::log_sum_exp(&terms))
    }
}

pub fn unnorm_logdensity(x: &[u64], model: &PairwiseGM) -> f64 {
    model.unnorm_logdensity(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    #[test]
    fn zero_vector_has_zero_kernel() {
        let theta = vec![0.3, -1.0];
        for v in [Variant::Pgm, Variant::Tpgm { r: 5 }, Variant::Sqr] {
            let m = PairwiseGM::new(v, theta.clone(), m2(0.0, -0.2, 0.0)).unwrap();
            assert_eq!(m.unnorm_logdensity(&[0, 0]), 0.0);
        }
        let q = PairwiseGM::new(Variant::Qpgm, theta, m2(-0.5, 0.2, -0.3)).unwrap();
        assert_eq!(q.unnorm_logdensity(&[0, 0]), 0.0);
    }

    #[test]
    fn independent_pgm_kernel() {
        let m = PairwiseGM::independent(Variant::Pgm, vec![0.5, 1.5]).unwrap();
        let x = [3, 1];
        let want = 0.5 * 3.0 - ln_factorial(3) + 1.5 - ln_factorial(1);
        assert!((m.unnorm_logdensity(&x) - want).abs() < 1e-14);
    }

    #[test]
    fn square_root_hand_value() {
        let m = PairwiseGM::new(Variant::Sqr, vec![0.0, 0.0], m2(-0.1, 0.2, -0.1)).unwrap();
        let want = -0.1 * 1.0 - 0.1 * 4.0 + 2.0 * 0.2 * 1.0 * 2.0 - ln_factorial(1) - ln_factorial(4);
        assert!((m.unnorm_logdensity(&[1, 4]) - want).abs() < 1e-14);
    }

    #[test]
    fn construction_guards() {
        assert!(PairwiseGM::new(Variant::Pgm, vec![0.0, 0.0], m2(0.0, 0.1, 0.0)).is_err());
        assert!(PairwiseGM::new(Variant::Pgm, vec![0.0, 0.0], m2(0.1, 0.0, 0.0)).is_err());
        assert!(matches!(
            PairwiseGM::new(Variant::Qpgm, vec![0.0, 0.0], m2(0.0, 0.1, -1.0)),
            Err(Error::Divergent(_))
        ));
        assert!(PairwiseGM::new(Variant::Spgm { r0: 3, r: 3 }, vec![0.0], DMatrix::zeros(1, 1)).is_err());
        assert!(PairwiseGM::new(Variant::Tpgm { r: 4 }, vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.0])).is_err());
    }

    #[test]
    fn truncated_domain() {
        let m = PairwiseGM::new(Variant::Tpgm { r: 3 }, vec![0.0, 0.0], m2(0.0, 0.4, 0.0)).unwrap();
        assert_eq!(m.unnorm_logdensity(&[4, 0]), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_grid_sums_to_one() {
        for (d, r) in [(1usize, 6u64), (2, 5), (3, 6)] {
            let theta: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.2).collect();
            let phi = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { 0.15 * ((i + j) as f64) - 0.2 });
            let m = PairwiseGM::new(Variant::Tpgm { r }, theta, phi).unwrap();
            let a = m.tpgm_log_partition().unwrap();
            let mut total = 0.0;
            let mut x = vec![0u64; d];
            loop {
                total += (m.unnorm_logdensity(&x) - a).exp();
                let mut k = 0;
                while k < d && x[k] == r {
                    x[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
                x[k] += 1;
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn square_root_without_interactions_is_independent_poisson() {
        let m = PairwiseGM::new(Variant::Sqr, vec![0.0, 0.0], m2(0.4, 0.0, -0.7)).unwrap();
        let a = 0.4f64.exp() + (-0.7f64).exp();
        for x in [[0u64, 0], [2, 1], [5, 3]] {
            let want = crate::univariate::pois_logpmf(x[0], 0.4f64.exp()).unwrap()
                + crate::univariate::pois_logpmf(x[1], (-0.7f64).exp()).unwrap();
            assert!((m.unnorm_logdensity(&x) - a - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_nodes_converge_with_negative_definite_phi() {
        let phi = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.3, 0.4, -0.8, 0.2, 0.3, 0.2, -0.9]);
        let m = PairwiseGM::new(Variant::Qpgm, vec![1.0, 0.5, 2.0], phi).unwrap();
        for x in [[0u64, 0, 0], [3, 7, 1], [20, 20, 20]] {
            for i in 0..3 {
                assert!(m.node_conditional(i, &x).log_partition().unwrap().is_finite());
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let models = vec![
            PairwiseGM::new(Variant::Tpgm { r: 7 }, vec![0.1, 0.2], m2(0.0, 0.3, 0.0)).unwrap(),
            PairwiseGM::new(Variant::Spgm { r0: 2, r: 9 }, vec![0.1, 0.2], m2(0.0, -0.3, 0.0)).unwrap(),
            PairwiseGM::new(
                Variant::Flpgm {
                    length: LengthDist::Poisson { rate: 4.0 },
                    omega: Omega::default(),
                },
                vec![0.1, 0.2],
                m2(0.0, 0.3, 0.0),
            )
            .unwrap(),
        ];
        for m in models {
            let s = serde_json::to_string(&m).unwrap();
            assert!(s.contains("\"variant\"") && s.contains("\"Phi\""));
            let back: PairwiseGM = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
        }
    }
}
