//! Mixtures of independent Poissons: finite mixtures fitted by EM and the
//! Poisson log-normal fitted by moment matching.

pub mod finite;
pub mod kmeans;
pub mod lognormal;

pub use finite::{fm_fit_em, fm_logpmf, fm_sample, EmFit, FiniteMixturePoisson};
pub use lognormal::{ln_fit_moments, ln_moments, ln_sample, LogNormalPoisson};
