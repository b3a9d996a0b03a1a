//! Conditional graphical models whose node conditionals are Poisson-like:
//! the Poisson graphical model and its truncated, quadratic, sub-linear,
//! square-root and fixed-length variants, plus local neighbourhood selection.

pub mod fit;
pub mod flpgm;
pub mod gibbs;
pub mod lpgm;
pub mod model;
pub mod node;

pub use fit::{
    fit_nodewise, fit_nodewise_warm, lambda_max, reg_path, solve_node, tpgm_truncation, NodeProblem,
    NodeSolution, NodewiseFit, SignConstraint,
};
pub use flpgm::{flpgm_fit_heuristic, flpgm_logpmf, flpgm_logpmf_given_length, flpgm_sample, FlpgmFit};
pub use gibbs::{gibbs_sample, DEFAULT_GIBBS_ITERS};
pub use lpgm::{lpgm_fit, lpgm_structure, EdgeRule, LocalPgm, SignedAdjacency};
pub use model::{unnorm_logdensity, LengthDist, Omega, PairwiseGM, Variant};
pub use node::{spgm_suffstat, NodeConditional, NodeSummary};
