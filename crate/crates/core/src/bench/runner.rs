//! Cross-validated benchmark: tune on a split of each training fold, refit,
//! sample and score against the held-out rows.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, summarize, CountMatrix, DatasetSummary, SelectRule};
use crate::error::{Error, Result};
use crate::metrics::{pairwise_mmd_matrix, pairwise_spearman_diff, KernelBank, MetricMatrix};
use crate::parallel::map_indexed;
use crate::pgm::{reg_path, tpgm_truncation};
use crate::rng::{derive_seed, label, seeded};

use super::config::{ExperimentConfig, ModelSpec, TuningMetric};
use super::registry::{fit_model, fixed_hyperparameters, path_variant, Hyperparameters};

/// Dimension from which mixtures use a single `k` and penalties are tuned on
/// a reduced variable set.
pub const HIGH_DIM: usize = 1000;
pub const HIGH_DIM_K: usize = 50;
pub const HIGH_DIM_TUNING_VARS: usize = 100;

pub fn default_k_grid() -> Vec<usize> {
    (1..=10).map(|i| 10 * i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub hyperparameters: Hyperparameters,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Outcome for one model on one fold. `wall_seconds` is kept out of the JSON
/// so that records are byte-stable; it is written to `timings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub model: String,
    pub fold: usize,
    pub status: Status,
    pub hyperparameters: Option<Hyperparameters>,
    pub tuning: Vec<TuningPoint>,
    #[serde(rename = "MMD")]
    pub mmd: Option<MetricMatrix>,
    #[serde(rename = "SpearmanDiff")]
    pub spearman_diff: Option<MetricMatrix>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub folds_ok: usize,
    pub folds_failed: usize,
    /// Mean over folds of the mean pairwise MMD.
    pub mmd: Option<f64>,
    pub spearman_diff: Option<f64>,
    #[serde(rename = "MMD_matrix")]
    pub mmd_matrix: Option<MetricMatrix>,
    #[serde(rename = "SpearmanDiff_matrix")]
    pub spearman_diff_matrix: Option<MetricMatrix>,
    pub hyperparameters: Vec<Option<Hyperparameters>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub n: usize,
    pub d: usize,
    pub names: Vec<String>,
    pub fold_sizes: Vec<usize>,
    pub records: Vec<ResultRecord>,
    pub summary: Vec<ModelSummary>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn summarize_records(models: &[String], records: &[ResultRecord]) -> Result<Vec<ModelSummary>> {
    models
        .iter()
        .map(|m| {
            let mine: Vec<&ResultRecord> = records.iter().filter(|r| &r.model == m).collect();
            let ok: Vec<&ResultRecord> = mine.iter().copied().filter(|r| r.status == Status::Ok).collect();
            let avg = |get: fn(&ResultRecord) -> &Option<MetricMatrix>| -> Result<Option<MetricMatrix>> {
                let ms: Vec<MetricMatrix> = ok.iter().filter_map(|r| get(r).clone()).collect();
                if ms.is_empty() {
                    Ok(None)
                } else {
                    MetricMatrix::average(&ms).map(Some)
                }
            };
            let scalar = |get: fn(&ResultRecord) -> &Option<MetricMatrix>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| get(r).as_ref().map(|m| m.mean())).filter(|v| v.is_finite()).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            Ok(ModelSummary {
                model: m.clone(),
                folds_ok: ok.len(),
                folds_failed: mine.len() - ok.len(),
                mmd: scalar(|r| &r.mmd),
                spearman_diff: scalar(|r| &r.spearman_diff),
                mmd_matrix: avg(|r| &r.mmd)?,
                spearman_diff_matrix: avg(|r| &r.spearman_diff)?,
                hyperparameters: mine.iter().map(|r| r.hyperparameters.clone()).collect(),
            })
        })
        .collect()
}

/// Dataset after optional top-`d` variable selection.
pub fn prepare_dataset(config: &ExperimentConfig) -> Result<CountMatrix> {
    let x = config.dataset.load()?;
    if x.n() < config.folds {
        return Err(Error::Config(format!("{} rows cannot form {} folds", x.n(), config.folds)));
    }
    match config.select {
        Some(s) if s.d < x.d() => Ok(x.select_top(s.d, s.rule)?.0),
        _ => Ok(x),
    }
}

pub fn run_benchmark(config: &ExperimentConfig) -> Result<ResultSet> {
    config.validate()?;
    let x = prepare_dataset(config)?;
    run_benchmark_on(config, &x)
}

/// As [`run_benchmark`] on an already-loaded dataset.
pub fn run_benchmark_on(config: &ExperimentConfig, x: &CountMatrix) -> Result<ResultSet> {
    config.validate()?;
    let folds = make_folds(x.n(), config.folds, derive_seed(config.seed, &[label("folds")]))?;
    let specs = config.specs();
    let tasks: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|m| (1..=config.folds).map(move |f| (m, f)))
        .collect();
    let records = map_indexed(tasks.len(), |t| {
        let (m, fold) = tasks[t];
        let spec = &specs[m];
        let start = Instant::now();
        let (train, test) = folds.split(fold);
        let mut rec = match (x.select_rows(&train), x.select_rows(&test)) {
            (Ok(train), Ok(test)) => run_task(config, spec, &train, &test, fold),
            (Err(e), _) | (_, Err(e)) => failed(spec, fold, e.to_string(), Vec::new(), Vec::new()),
        };
        rec.wall_seconds = start.elapsed().as_secs_f64();
        rec
    });
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let summary = summarize_records(&names, &records)?;
    Ok(ResultSet {
        config: config.clone(),
        n: x.n(),
        d: x.d(),
        names: x.names().to_vec(),
        fold_sizes: folds.sizes(),
        records,
        summary,
    })
}

fn failed(spec: &ModelSpec, fold: usize, error: String, tuning: Vec<TuningPoint>, warnings: Vec<String>) -> ResultRecord {
    ResultRecord {
        model: spec.name.clone(),
        fold,
        status: Status::Failed,
        hyperparameters: None,
        tuning,
        mmd: None,
        spearman_diff: None,
        warnings,
        error: Some(error),
        wall_seconds: 0.0,
    }
}

fn truncate_for(hp: &Hyperparameters, x: &CountMatrix) -> CountMatrix {
    match hp.r {
        Some(r) => x.map_values(|v| v.min(r)),
        None => x.clone(),
    }
}

fn score(config: &ExperimentConfig, reference: &CountMatrix, sample: &CountMatrix) -> Result<f64> {
    let m = match config.tuning_metric {
        TuningMetric::Mmd => pairwise_mmd_matrix(reference, sample, &kernel_bank(config), config.mmd_mode)?,
        TuningMetric::SpearmanDiff => pairwise_spearman_diff(reference, sample)?,
    };
    Ok(m.mean())
}

fn kernel_bank(config: &ExperimentConfig) -> KernelBank {
    KernelBank::default().with_seed(derive_seed(config.seed, &[label("kernel_bank")]))
}

/// Candidate hyperparameters plus any warnings about the grid.
fn candidates(
    spec: &ModelSpec,
    fit_part: &CountMatrix,
    d: usize,
    base: &Hyperparameters,
    warnings: &mut Vec<String>,
) -> Result<Vec<Hyperparameters>> {
    if spec.name == "mixture_poiss" {
        let grid = match &spec.k {
            Some(k) => k.clone(),
            None if d >= HIGH_DIM => vec![HIGH_DIM_K],
            None => default_k_grid(),
        };
        let kept: Vec<usize> = grid.iter().copied().filter(|&k| k <= fit_part.n()).collect();
        if kept.len() < grid.len() {
            warnings.push(format!("k values above the {} fitting rows were dropped", fit_part.n()));
        }
        if kept.is_empty() {
            return Err(Error::Config(format!("no k in the grid fits {} rows", fit_part.n())));
        }
        return Ok(kept
            .into_iter()
            .map(|k| Hyperparameters { k: Some(k), ..base.clone() })
            .collect());
    }
    if let Some(variant) = path_variant(&spec.name, base.r) {
        let lambdas = match &spec.lambda {
            Some(l) => l.clone(),
            None => reg_path(&truncate_for(base, fit_part), &variant)?,
        };
        return Ok(lambdas
            .into_iter()
            .map(|l| Hyperparameters { lambda: Some(l), ..base.clone() })
            .collect());
    }
    Ok(vec![base.clone()])
}

fn high_dim_columns(x: &CountMatrix) -> Result<Vec<usize>> {
    Ok(x.select_top(HIGH_DIM_TUNING_VARS, SelectRule::Variance)?.1)
}

fn run_task(config: &ExperimentConfig, spec: &ModelSpec, train: &CountMatrix, test: &CountMatrix, fold: usize) -> ResultRecord {
    let mut warnings = Vec::new();
    let model_seed = derive_seed(config.seed, &[label(&spec.name), fold as u64]);
    let d = train.d();
    let r = (spec.name == "tpgm").then(|| spec.r.unwrap_or_else(|| tpgm_truncation(train)));
    if let Some(r) = r {
        let clipped = train.values().iter().filter(|&&v| v > r).count();
        if clipped > 0 {
            warnings.push(format!("{clipped} training entries truncated at R = {r}"));
        }
    }
    let base = fixed_hyperparameters(spec, r);

    let mut order: Vec<usize> = (0..train.n()).collect();
    order.shuffle(&mut seeded(derive_seed(config.seed, &[label("tuning"), fold as u64])));
    let n_fit = ((config.tuning_fraction * train.n() as f64).round() as usize).clamp(1, train.n().saturating_sub(1).max(1));
    let (fit_idx, tune_idx) = order.split_at(n_fit);
    let reduce = d >= HIGH_DIM && path_variant(&spec.name, r).is_some() && spec.lambda.is_none();
    let split = (|| -> Result<(CountMatrix, CountMatrix)> {
        let (mut f, mut t) = (train.select_rows(fit_idx)?, train.select_rows(tune_idx)?);
        if reduce {
            let cols = high_dim_columns(&f)?;
            f = f.select_columns(&cols)?;
            t = t.select_columns(&cols)?;
        }
        Ok((f, t))
    })();
    let (fit_part, tune_part) = match split {
        Ok(p) => p,
        Err(e) => return failed(spec, fold, e.to_string(), Vec::new(), warnings),
    };
    if reduce {
        warnings.push(format!("penalty tuned on the {HIGH_DIM_TUNING_VARS} highest-variance variables"));
    }

    let grid = match candidates(spec, &fit_part, d, &base, &mut warnings) {
        Ok(g) => g,
        Err(e) => return failed(spec, fold, e.to_string(), Vec::new(), warnings),
    };

    let (chosen, tuning) = if grid.len() == 1 || tune_part.n() == 0 {
        (grid[0].clone(), Vec::new())
    } else {
        let tuning: Vec<TuningPoint> = map_indexed(grid.len(), |g| {
            let hp = &grid[g];
            let out = (|| -> Result<f64> {
                let seed = derive_seed(model_seed, &[label("tune"), g as u64]);
                let m = fit_model(&spec.name, &truncate_for(hp, &fit_part), hp, seed)?;
                let s = m.sample(config.samples, config.gibbs_iters, &mut seeded(derive_seed(seed, &[label("sample")])))?;
                score(config, &tune_part, &s)
            })();
            match out {
                Ok(v) => TuningPoint {
                    hyperparameters: hp.clone(),
                    score: finite(v),
                    error: (!v.is_finite()).then(|| "score undefined".to_string()),
                },
                Err(e) => TuningPoint {
                    hyperparameters: hp.clone(),
                    score: None,
                    error: Some(e.to_string()),
                },
            }
        });
        let best = tuning
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.score.map(|s| (i, s)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let failures = tuning.iter().filter(|p| p.error.is_some()).count();
        if failures > 0 {
            warnings.push(format!("{failures} of {} grid points failed during tuning", grid.len()));
        }
        match best {
            Some((i, _)) => (grid[i].clone(), tuning),
            None => return failed(spec, fold, "every grid point failed during tuning".into(), tuning, warnings),
        }
    };

    let result = (|| -> Result<(MetricMatrix, MetricMatrix)> {
        let seed = derive_seed(model_seed, &[label("final")]);
        let m = fit_model(&spec.name, &truncate_for(&chosen, train), &chosen, seed)?;
        let s = m.sample(config.samples, config.gibbs_iters, &mut seeded(derive_seed(seed, &[label("sample")])))?;
        Ok((
            pairwise_mmd_matrix(test, &s, &kernel_bank(config), config.mmd_mode)?,
            pairwise_spearman_diff(test, &s)?,
        ))
    })();
    match result {
        Ok((mmd, sd)) => ResultRecord {
            model: spec.name.clone(),
            fold,
            status: Status::Ok,
            hyperparameters: Some(chosen),
            tuning,
            mmd: Some(mmd),
            spearman_diff: Some(sd),
            warnings,
            error: None,
            wall_seconds: 0.0,
        },
        Err(e) => {
            let mut rec = failed(spec, fold, e.to_string(), tuning, warnings);
            rec.hyperparameters = Some(chosen);
            rec
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn hp_cell(hp: &Option<Hyperparameters>) -> String {
    let Some(hp) = hp else { return String::new() };
    let v = serde_json::to_value(hp).unwrap_or_default();
    let map: BTreeMap<String, serde_json::Value> = serde_json::from_value(v).unwrap_or_default();
    map.iter()
        .map(|(k, v)| match v {
            serde_json::Value::Object(o) => format!("{k}={}", o.get("kind").and_then(|s| s.as_str()).unwrap_or("?")),
            serde_json::Value::String(s) => format!("{k}={s}"),
            v => format!("{k}={v}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `model,folds_ok,folds_failed,mmd,spearman_diff,hyperparameters` with one
/// `;`-separated hyperparameter list per fold, folds joined by `|`.
pub fn summary_csv(summary: &[ModelSummary]) -> String {
    let mut out = String::from("model,folds_ok,folds_failed,mmd,spearman_diff,hyperparameters\n");
    for s in summary {
        let hps = s.hyperparameters.iter().map(hp_cell).collect::<Vec<_>>().join("|");
        out.push_str(&format!(
            "{},{},{},{},{},{hps}\n",
            s.model,
            s.folds_ok,
            s.folds_failed,
            opt_cell(s.mmd),
            opt_cell(s.spearman_diff)
        ));
    }
    out
}

/// Layout under `dir`:
/// `results.json`, `summary.json`, `summary.csv`, `dataset_summary.json`,
/// `folds/<model>_fold<k>.json`, `matrices/<model>_{mmd,spearman_diff}.csv`
/// and `timings.csv` (the only file that differs between identical runs).
pub fn write_results(set: &ResultSet, dataset: &DatasetSummary, dir: &Path) -> Result<()> {
    for sub in ["", "folds", "matrices"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    write(&dir.join("results.json"), &json(set)?)?;
    write(&dir.join("summary.json"), &json(&set.summary)?)?;
    write(&dir.join("summary.csv"), &summary_csv(&set.summary))?;
    write(&dir.join("dataset_summary.json"), &json(dataset)?)?;
    let mut timings = String::from("model,fold,wall_seconds\n");
    for r in &set.records {
        write(&dir.join("folds").join(format!("{}_fold{}.json", r.model, r.fold)), &json(r)?)?;
        timings.push_str(&format!("{},{},{:.3}\n", r.model, r.fold, r.wall_seconds));
    }
    for s in &set.summary {
        if let Some(m) = &s.mmd_matrix {
            write(&dir.join("matrices").join(format!("{}_mmd.csv", s.model)), &m.to_csv(&set.names))?;
        }
        if let Some(m) = &s.spearman_diff_matrix {
            write(
                &dir.join("matrices").join(format!("{}_spearman_diff.csv", s.model)),
                &m.to_csv(&set.names),
            )?;
        }
    }
    write(&dir.join("timings.csv"), &timings)
}

/// Load the benchmark at `config`, run it and write everything to the
/// configured output directory (or `out` when given).
pub fn run_and_write(config: &ExperimentConfig, out: Option<&Path>) -> Result<ResultSet> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let x = prepare_dataset(config)?;
    let set = run_benchmark_on(config, &x)?;
    write_results(&set, &summarize(&x), &dir)?;
    Ok(set)
}

/// Aggregate table from the per-fold records under `dir/folds`.
pub fn summarize_results(dir: &Path) -> Result<String> {
    let folds = dir.join("folds");
    let mut paths: Vec<_> = std::fs::read_dir(&folds)
        .map_err(|e| io_err(&folds, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyData(format!("no fold records under {}", folds.display())));
    }
    let mut records = Vec::new();
    for p in &paths {
        let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let mut rec: ResultRecord = serde_json::from_str(&text)?;
        rec.wall_seconds = 0.0;
        records.push(rec);
    }
    records.sort_by(|a, b| (a.model.as_str(), a.fold).cmp(&(b.model.as_str(), b.fold)));
    let mut models: Vec<String> = records.iter().map(|r| r.model.clone()).collect();
    models.dedup();
    let summary = summarize_records(&models, &records)?;
    let rows: Vec<[String; 5]> = summary
        .iter()
        .map(|s| {
            let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            [
                s.model.clone(),
                format!("{}/{}", s.folds_ok, s.folds_ok + s.folds_failed),
                f(s.mmd),
                f(s.spearman_diff),
                s.hyperparameters.iter().map(hp_cell).collect::<Vec<_>>().join(" | "),
            ]
        })
        .collect();
    let header = ["model", "folds", "MMD", "SpearmanDiff", "hyperparameters"];
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec()) + "\n";
    for r in &rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    Ok(out)
}
