//! Evaluation metrics: pairwise maximum mean discrepancy over a Gaussian
//! kernel bank and pairwise Spearman rank-correlation differences.

pub mod matrix;
pub mod mmd;
pub mod spearman;

pub use matrix::{MetricKind, MetricMatrix};
pub use mmd::{mmd, pairwise_mmd_matrix, KernelBank, MmdMode, PointSet};
pub use spearman::{average_ranks, pairwise_spearman_diff, spearman, spearman_matrix};
