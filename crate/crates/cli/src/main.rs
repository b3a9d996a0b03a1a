use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use countmodels::bench::{
    fit_model, run_and_write, summarize_results, synth_generate, DatasetSource, ExperimentConfig, FittedModel,
    Hyperparameters, SynthSpec, REGISTRY,
};
use countmodels::copula::TransformKind;
use countmodels::data::summarize;
use countmodels::metrics::{pairwise_mmd_matrix, pairwise_spearman_diff, KernelBank, MmdMode};
use countmodels::pgm::{tpgm_truncation, EdgeRule, DEFAULT_GIBBS_ITERS};
use countmodels::rng::seeded;
use countmodels::{load_csv, CountMatrix, Error, Result};

/// Multivariate count models: fit, sample, evaluate and benchmark.
#[derive(Parser)]
#[command(name = "countmodels", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Rff,
    Auto,
}

impl From<Mode> for MmdMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => MmdMode::Exact,
            Mode::Rff => MmdMode::RandomFeatures,
            Mode::Auto => MmdMode::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Transform {
    Dt,
    Ce,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    And,
    Or,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one registry model to a CSV dataset and write it as JSON.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: String,
        /// Mixture components.
        #[arg(long)]
        k: Option<usize>,
        /// Penalty for the graphical models.
        #[arg(long)]
        lambda: Option<f64>,
        /// TPGM truncation; default is the 99th percentile of the non-zeros.
        #[arg(long = "truncation")]
        r: Option<u64>,
        #[arg(long, value_enum, default_value = "dt")]
        transform: Transform,
        #[arg(long, value_enum, default_value = "and")]
        rule: Rule,
        #[arg(long)]
        omega_exponent: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw rows from a fitted model file as CSV.
    Sample {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GIBBS_ITERS)]
        gibbs_iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise MMD and Spearman-difference matrices between two CSVs.
    Evaluate {
        reference: PathBuf,
        candidate: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Seed of the random-feature bank.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a cross-validated benchmark from a JSON config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Restrict the run to these models.
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Aggregate table of a results directory, or a dataset summary with --dataset.
    Summarize {
        results: Option<PathBuf>,
        #[arg(long, conflicts_with = "results")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from a JSON generator spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())
                .and_then(|_| s.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[allow(clippy::too_many_arguments)]
fn fit(
    dataset: &Path,
    model: &str,
    k: Option<usize>,
    lambda: Option<f64>,
    r: Option<u64>,
    transform: Transform,
    rule: Rule,
    omega_exponent: Option<f64>,
    seed: u64,
) -> Result<String> {
    if !REGISTRY.contains(&model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut x = load_csv(dataset)?;
    let mut hp = Hyperparameters {
        k,
        lambda,
        omega_exponent,
        ..Hyperparameters::default()
    };
    match model {
        "copula_poisson" => {
            hp.transform = Some(match transform {
                Transform::Dt => TransformKind::Dt,
                Transform::Ce => TransformKind::Ce { seed },
            })
        }
        "tpgm" => {
            let r = r.unwrap_or_else(|| tpgm_truncation(&x));
            x = x.map_values(|v| v.min(r));
            hp.r = Some(r);
        }
        "lpgm" => {
            hp.rule = Some(match rule {
                Rule::And => EdgeRule::And,
                Rule::Or => EdgeRule::Or,
            })
        }
        _ => {}
    }
    fit_model(model, &x, &hp, seed)?.to_json().map(|s| s + "\n")
}

fn evaluate(a: &CountMatrix, b: &CountMatrix, mode: MmdMode, seed: u64) -> Result<String> {
    let bank = KernelBank::default().with_seed(seed);
    let m = pairwise_mmd_matrix(a, b, &bank, mode)?;
    let s = pairwise_spearman_diff(a, b)?;
    let nullable = |v: f64| if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null };
    let doc = serde_json::json!({
        "names": a.names(),
        "MMD": m,
        "SpearmanDiff": s,
        "mean_MMD": nullable(m.mean()),
        "mean_SpearmanDiff": nullable(s.mean()),
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            dataset,
            model,
            k,
            lambda,
            r,
            transform,
            rule,
            omega_exponent,
            seed,
            out,
        } => emit(
            out.as_deref(),
            &fit(&dataset, &model, k, lambda, r, transform, rule, omega_exponent, seed)?,
        ),
        Command::Sample {
            model,
            n,
            seed,
            gibbs_iters,
            out,
        } => {
            let m = FittedModel::from_json(&read(&model)?)?;
            let x = m.sample(n, gibbs_iters, &mut seeded(seed))?;
            emit(out.as_deref(), &x.to_csv_string())
        }
        Command::Evaluate {
            reference,
            candidate,
            mode,
            seed,
            out,
        } => {
            let (a, b) = (load_csv(&reference)?, load_csv(&candidate)?);
            emit(out.as_deref(), &evaluate(&a, &b, mode.into(), seed)?)
        }
        Command::Benchmark {
            config,
            out,
            dataset,
            folds,
            seed,
            mode,
            models,
        } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            if let Some(p) = dataset {
                c.dataset = DatasetSource::Path { path: p };
            }
            if let Some(f) = folds {
                c.folds = f;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(m) = mode {
                c.mmd_mode = m.into();
            }
            if !models.is_empty() {
                for m in &models {
                    if !REGISTRY.contains(&m.as_str()) {
                        return Err(Error::UnknownModel(m.clone()));
                    }
                }
                c.models.retain(|e| models.contains(&e.spec().name));
            }
            c.validate()?;
            let set = run_and_write(&c, out.as_deref())?;
            for s in &set.summary {
                eprintln!(
                    "{}: {}/{} folds ok, mean MMD {}",
                    s.model,
                    s.folds_ok,
                    s.folds_ok + s.folds_failed,
                    s.mmd.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
                );
            }
            Ok(())
        }
        Command::Summarize { results, dataset, out } => match (results, dataset) {
            (_, Some(d)) => {
                let s = summarize(&load_csv(&d)?);
                emit(out.as_deref(), &(serde_json::to_string_pretty(&s)? + "\n"))
            }
            (Some(r), None) => emit(out.as_deref(), &summarize_results(&r)?),
            (None, None) => Err(Error::Config("summarize needs a results directory or --dataset".into())),
        },
        Command::Synth { spec, n, seed, out } => {
            let spec: SynthSpec = serde_json::from_str(&read(&spec)?)?;
            let x = synth_generate(&spec, n, seed)?;
            emit(out.as_deref(), &x.to_csv_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("COUNTMODELS_THREADS") {
        let threads = match v.trim().parse::<usize>() {
            Ok(t) => t,
            Err(_) => {
                eprintln!("error: COUNTMODELS_THREADS must be a positive integer, got `{v}`");
                return ExitCode::FAILURE;
            }
        };
        if let Err(e) = countmodels::parallel::configure_threads(threads) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
