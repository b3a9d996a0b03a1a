use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "MMD")]
    Mmd,
    #[serde(rename = "SpearmanDiff")]
    SpearmanDiff,
}

/// Symmetric `d × d` matrix of pairwise discrepancies.
///
/// Undefined entries are NaN in memory and `null` in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    metric: MetricKind,
    d: usize,
    values: Vec<f64>,
}

impl MetricMatrix {
    pub fn new(metric: MetricKind, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: values.len(),
            });
        }
        Ok(Self { metric, d, values })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.get(i, i)).collect()
    }

    pub fn off_diagonal(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                v.push(self.get(i, j));
            }
        }
        v
    }

    /// Mean over the upper triangle including the diagonal, skipping undefined entries.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        let mut k = 0usize;
        for i in 0..self.d {
            for j in i..self.d {
                let v = self.get(i, j);
                if v.is_finite() {
                    acc += v;
                    k += 1;
                }
            }
        }
        if k == 0 {
            f64::NAN
        } else {
            acc / k as f64
        }
    }

    /// Entrywise average of several matrices of the same kind and size.
    pub fn average(ms: &[MetricMatrix]) -> Result<MetricMatrix> {
        let first = ms
            .first()
            .ok_or_else(|| Error::EmptyData("no matrices to average".into()))?;
        let mut acc = vec![0.0; first.values.len()];
        for m in ms {
            if m.d != first.d {
                return Err(Error::DimensionMismatch {
                    expected: first.d,
                    found: m.d,
                });
            }
            for (a, v) in acc.iter_mut().zip(&m.values) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= ms.len() as f64);
        MetricMatrix::new(first.metric, first.d, acc)
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("s,t,value\n");
        for i in 0..self.d {
            for j in 0..self.d {
                let v = self.get(i, j);
                let cell = if v.is_finite() { v.to_string() } else { String::new() };
                out.push_str(&format!("{},{},{cell}\n", names[i], names[j]));
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct MetricMatrixRepr {
    metric: MetricKind,
    values: Vec<Vec<Option<f64>>>,
}

impl Serialize for MetricMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let values = (0..self.d)
            .map(|i| {
                (0..self.d)
                    .map(|j| Some(self.get(i, j)).filter(|v| v.is_finite()))
                    .collect()
            })
            .collect();
        MetricMatrixRepr {
            metric: self.metric,
            values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = MetricMatrixRepr::deserialize(de)?;
        let d = repr.values.len();
        let mut values = Vec::with_capacity(d * d);
        for row in &repr.values {
            if row.len() != d {
                return Err(serde::de::Error::custom("metric matrix must be square"));
            }
            values.extend(row.iter().map(|v| v.unwrap_or(f64::NAN)));
        }
        Ok(MetricMatrix {
            metric: repr.metric,
            d,
            values,
        })
    }
}
