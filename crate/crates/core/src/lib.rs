//! Multivariate count distributions derived from the univariate Poisson.
//!
//! Three model classes are covered:
//!
//! * marginal models, where every univariate marginal is Poisson
//!   ([`classic_mv`] latent-sum constructions and the Gaussian copula in [`copula`]);
//! * mixture models of independent Poissons ([`mixtures`]: finite mixtures
//!   fitted by EM and the Poisson log-normal);
//! * conditional models, where every node conditional is Poisson-like
//!   ([`pgm`]: PGM, truncated, quadratic, sub-linear, square-root and
//!   fixed-length variants, plus local neighbourhood selection).
//!
//! [`metrics`] implements the pairwise MMD and Spearman-difference scores and
//! [`bench`] the cross-validated comparison harness behind the CLI.

pub mod bench;
pub mod classic_mv;
pub mod copula;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mixtures;
pub mod parallel;
pub mod pgm;
pub mod rng;
pub mod univariate;

pub use data::{load_csv, CountMatrix};
pub use error::{Error, Result};
