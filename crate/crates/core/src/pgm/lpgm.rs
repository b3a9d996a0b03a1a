//! Local neighbourhood selection with unconstrained node-wise Poisson
//! regressions. The node conditionals need not be compatible with any joint
//! density; sampling runs pseudo-Gibbs on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Result};
use crate::parallel::map_indexed;
use crate::rng::stream;

use super::fit::{solve_all, NodeSolution, SignConstraint};
use super::model::Variant;
use super::node::NodeConditional;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRule {
    /// Edge iff both node regressions select it.
    #[default]
    And,
    /// Edge iff either node regression selects it.
    Or,
}

/// Symmetric signed adjacency; `weights[i][j]` is the average of the two
/// node-wise coefficients, zero where there is no edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedAdjacency {
    pub d: usize,
    pub weights: Vec<Vec<f64>>,
}

impl SignedAdjacency {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[i][j] != 0.0
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if self.has_edge(i, j) {
                    out.push((i, j, self.weights[i][j]));
                }
            }
        }
        out
    }

    /// `i,j,weight,sign` with one line per edge.
    pub fn edge_list_csv(&self, names: Option<&[String]>) -> String {
        let mut s = String::from("i,j,weight,sign\n");
        for (i, j, w) in self.edges() {
            let (a, b) = match names {
                Some(n) => (n[i].clone(), n[j].clone()),
                None => (i.to_string(), j.to_string()),
            };
            s.push_str(&format!("{a},{b},{w},{}\n", if w > 0.0 { "+" } else { "-" }));
        }
        s
    }
}

/// Per-node regressions `η_i = θ_i + 2 Σ_j w_ij x_j` (rows need not be symmetric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPgm {
    pub theta: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub lambda: f64,
    pub rule: EdgeRule,
    pub converged: bool,
}

impl LocalPgm {
    pub fn d(&self) -> usize {
        self.theta.len()
    }

    fn from_solutions(d: usize, nodes: &[NodeSolution], lambda: f64, rule: EdgeRule) -> Self {
        let mut weights = vec![vec![0.0; d]; d];
        for (i, s) in nodes.iter().enumerate() {
            let mut k = 1;
            for j in 0..d {
                if j != i {
                    weights[i][j] = s.weights[k];
                    k += 1;
                }
            }
        }
        Self {
            theta: nodes.iter().map(|s| s.weights[0]).collect(),
            weights,
            lambda,
            rule,
            converged: nodes.iter().all(|s| s.converged),
        }
    }

    pub fn adjacency(&self) -> SignedAdjacency {
        let d = self.d();
        let mut w = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in (i + 1)..d {
                let (a, b) = (self.weights[i][j], self.weights[j][i]);
                let keep = match self.rule {
                    EdgeRule::And => a != 0.0 && b != 0.0,
                    EdgeRule::Or => a != 0.0 || b != 0.0,
                };
                if keep {
                    let avg = 0.5 * (a + b);
                    w[i][j] = avg;
                    w[j][i] = avg;
                }
            }
        }
        SignedAdjacency { d, weights: w }
    }

    /// Pseudo-Gibbs: systematic scan over the node regressions, one chain per row.
    /// Fails with a divergence error when a chain runs off to infinity.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, iters: usize, rng: &mut R) -> Result<CountMatrix> {
        if iters == 0 {
            return invalid("pseudo-Gibbs needs at least one sweep");
        }
        let d = self.d();
        let seed = rng.random::<u64>();
        let rows = map_indexed(n, |row| -> Result<Vec<u64>> {
            let mut rng = stream(seed, row as u64);
            let mut x = vec![0u64; d];
            for _ in 0..iters {
                for i in 0..d {
                    let mut eta = self.theta[i];
                    for (j, &xj) in x.iter().enumerate() {
                        if j != i {
                            eta += 2.0 * self.weights[i][j] * xj as f64;
                        }
                    }
                    x[i] = NodeConditional::Poisson { eta }.sample(&mut rng)?;
                }
            }
            Ok(x)
        });
        let mut values = Vec::with_capacity(n * d);
        for r in rows {
            values.extend(r?);
        }
        CountMatrix::new(values, n, d, default_names(d))
    }
}

pub fn lpgm_fit(x: &CountMatrix, lambda: f64, rule: EdgeRule) -> Result<LocalPgm> {
    let nodes = solve_all(x, &Variant::Pgm, lambda, SignConstraint::Free, None)?;
    Ok(LocalPgm::from_solutions(x.d(), &nodes, lambda, rule))
}

pub fn lpgm_structure(x: &CountMatrix, lambda: f64) -> Result<SignedAdjacency> {
    Ok(lpgm_fit(x, lambda, EdgeRule::And)?.adjacency())
}
