//! Count datasets: CSV ingestion, summary statistics and fold construction.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::spearman::spearman;
use crate::rng::seeded;

/// An `n × d` table of non-negative integer observations, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    values: Vec<u64>,
    n: usize,
    d: usize,
    names: Vec<String>,
}

impl CountMatrix {
    pub fn new(values: Vec<u64>, n: usize, d: usize, names: Vec<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyData("matrix has no rows".into()));
        }
        if d == 0 {
            return Err(Error::EmptyData("matrix has no columns".into()));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return invalid(format!("duplicate column name `{name}`"));
            }
        }
        Ok(Self { values, n, d, names })
    }

    /// Build from rows with generated column names `x1..xd`.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        Self::from_rows_named(rows, default_names(d))
    }

    pub fn from_rows_named(rows: &[Vec<u64>], names: Vec<String>) -> Result<Self> {
        let d = names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(values, rows.len(), d, names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.values[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn column_f64(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j) as f64).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (acc, &v) in m.iter_mut().zip(r) {
                *acc += v as f64;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Sample covariance (denominator `n - 1`; zero when `n == 1`).
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let means = self.column_means();
        let mut c = vec![vec![0.0; self.d]; self.d];
        for r in self.rows() {
            for i in 0..self.d {
                let di = r[i] as f64 - means[i];
                for j in i..self.d {
                    c[i][j] += di * (r[j] as f64 - means[j]);
                }
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        for i in 0..self.d {
            for j in i..self.d {
                c[i][j] /= denom;
                c[j][i] = c[i][j];
            }
        }
        c
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::new(values, idx.len(), self.d, self.names.clone())
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.n * cols.len());
        for r in self.rows() {
            values.extend(cols.iter().map(|&j| r[j]));
        }
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        Self::new(values, self.n, cols.len(), names)
    }

    /// Keep the `d` columns ranked highest by mean or by variance, in their
    /// original order. Ties break toward the lower column index.
    pub fn select_top(&self, d: usize, rule: SelectRule) -> Result<(Self, Vec<usize>)> {
        if d == 0 || d > self.d {
            return invalid(format!("cannot select {d} of {} columns", self.d));
        }
        let score: Vec<f64> = match rule {
            SelectRule::Mean => self.column_means(),
            SelectRule::Variance => {
                let c = self.covariance();
                (0..self.d).map(|i| c[i][i]).collect()
            }
        };
        let mut order: Vec<usize> = (0..self.d).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let mut keep: Vec<usize> = order[..d].to_vec();
        keep.sort_unstable();
        Ok((self.select_columns(&keep)?, keep))
    }

    /// Apply `f` to every entry (e.g. truncation at a cap).
    pub fn map_values(&self, f: impl Fn(u64) -> u64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            n: self.n,
            d: self.d,
            names: self.names.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.names.join(","))?;
        let mut line = String::new();
        for r in self.rows() {
            line.clear();
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| io_err(path, e))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

/// Read a comma-separated file with a header row and non-negative integer cells.
pub fn load_csv(path: impl AsRef<Path>) -> Result<CountMatrix> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_csv(f)
}

pub fn read_csv<R: Read>(reader: R) -> Result<CountMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| io_err(Path::new("<reader>"), e))?,
        None => return Err(Error::EmptyData("missing header row".into())),
    };
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let d = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(Path::new("<reader>"), e))?;
        let line = line.trim_end_matches('\r');
        let row = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d {
            return Err(Error::Csv {
                row,
                column: cells.len().min(d) + 1,
                message: format!("expected {d} cells, found {}", cells.len()),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let v: u64 = cell.parse().map_err(|_| Error::Csv {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a non-negative integer"),
            })?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyData("no data rows after header".into()));
    }
    CountMatrix::new(values, n, d, names)
}

/// Sample variance (denominator `n - 1`) over sample mean.
pub fn dispersion_index(column: &[u64]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyData("dispersion of an empty column".into()));
    }
    if column.len() < 2 {
        return invalid("dispersion needs at least two observations");
    }
    let n = column.len() as f64;
    let mean = column.iter().map(|&v| v as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::UndefinedDispersion);
    }
    let var = column
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(var / mean)
}

/// Variable-selection rule for high-dimensional inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectRule {
    Mean,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMedMax {
    pub min: f64,
    pub med: f64,
    pub max: f64,
}

impl MinMedMax {
    /// Summary of the finite entries; `None` when there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let k = v.len();
        let med = if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        };
        Some(Self {
            min: v[0],
            med,
            max: v[k - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRanges {
    pub means: Option<MinMedMax>,
    pub dispersions: Option<MinMedMax>,
    pub spearman: Option<MinMedMax>,
}

/// Per-variable means and dispersion indices plus the pairwise Spearman matrix.
/// Undefined entries are `None` (rendered as JSON `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub dispersions: Vec<Option<f64>>,
    pub spearman: Vec<Vec<Option<f64>>>,
    pub min_med_max: SummaryRanges,
}

pub fn summarize(x: &CountMatrix) -> DatasetSummary {
    let d = x.d();
    let means = x.column_means();
    let cols: Vec<Vec<u64>> = (0..d).map(|j| x.column(j)).collect();
    let dispersions: Vec<Option<f64>> = cols.iter().map(|c| dispersion_index(c).ok()).collect();
    let fcols: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    let mut sp = vec![vec![None; d]; d];
    for i in 0..d {
        sp[i][i] = Some(1.0);
        for j in (i + 1)..d {
            let r = spearman(&fcols[i], &fcols[j]).ok();
            sp[i][j] = r;
            sp[j][i] = r;
        }
    }
    let off_diag = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .filter_map(|(i, j)| sp[i][j])
        .collect::<Vec<_>>();
    let min_med_max = SummaryRanges {
        means: MinMedMax::of(means.iter().cloned()),
        dispersions: MinMedMax::of(dispersions.iter().flatten().cloned()),
        spearman: MinMedMax::of(off_diag),
    };
    DatasetSummary {
        names: x.names().to_vec(),
        means,
        dispersions,
        spearman: sp,
        min_med_max,
    }
}

impl DatasetSummary {
    /// One row per variable: `name,mean,dispersion` (blank when undefined).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,mean,dispersion\n");
        for (i, name) in self.names.iter().enumerate() {
            let disp = self.dispersions[i]
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{name},{},{disp}\n", self.means[i]));
        }
        out
    }
}

/// Balanced random partition of `0..n` into `k` folds labelled `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return invalid(format!("need at least 2 folds, got {k}"));
    }
    if k > n {
        return invalid(format!("cannot split {n} rows into {k} folds"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut assignments = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k + 1;
    }
    Ok(FoldSplit {
        k,
        assignments,
        seed,
    })
}

impl FoldSplit {
    /// `(train, test)` row indices for fold `fold` in `1..=k`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignments {
            s[f - 1] += 1;
        }
        s
    }
}
