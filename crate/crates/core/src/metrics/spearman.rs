use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::metrics::matrix::{MetricKind, MetricMatrix};

/// Ranks starting at 1, ties receiving the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
///
/// Undefined (an error) when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyData("spearman needs at least two pairs".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Degenerate("spearman undefined for a constant input".into()))
}

/// `d × d` Spearman matrix; NaN where a column is constant.
pub fn spearman_matrix(x: &CountMatrix) -> Vec<Vec<f64>> {
    let d = x.d();
    let ranks: Vec<Vec<f64>> = (0..d).map(|j| average_ranks(&x.column_f64(j))).collect();
    let mut m = vec![vec![f64::NAN; d]; d];
    for i in 0..d {
        if pearson(&ranks[i], &ranks[i]).is_some() {
            m[i][i] = 1.0;
        }
        for j in (i + 1)..d {
            let r = pearson(&ranks[i], &ranks[j]).unwrap_or(f64::NAN);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

/// `D_st = |ρ(x_s, x_t) − ρ(x̂_s, x̂_t)|`; undefined entries are NaN.
pub fn pairwise_spearman_diff(x: &CountMatrix, xhat: &CountMatrix) -> Result<MetricMatrix> {
    if x.d() != xhat.d() {
        return Err(Error::DimensionMismatch {
            expected: x.d(),
            found: xhat.d(),
        });
    }
    let a = spearman_matrix(x);
    let b = spearman_matrix(xhat);
    let d = x.d();
    let mut values = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            values.push((a[i][j] - b[i][j]).abs());
        }
    }
    MetricMatrix::new(MetricKind::SpearmanDiff, d, values)
}
