//! Benchmark harness: configuration, model registry, synthetic data and the
//! cross-validated runner.

pub mod config;
pub mod registry;
pub mod runner;
pub mod synth;

pub use config::{DatasetSource, ExperimentConfig, ModelEntry, ModelSpec, Selection, TuningMetric, REGISTRY};
pub use registry::{fit_model, FittedModel, Hyperparameters, IndependentPoisson};
pub use runner::{
    default_k_grid, prepare_dataset, run_and_write, run_benchmark, run_benchmark_on, summarize_results, summary_csv,
    write_results, ModelSummary, ResultRecord, ResultSet, Status, TuningPoint,
};
pub use synth::{synth_generate, SynthSpec};
