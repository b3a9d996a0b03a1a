//! Small dense helpers on top of nalgebra: PSD repair, sampling factors,
//! correlation matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Project a symmetric matrix onto the PSD cone by clipping eigenvalues below `floor`.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&out)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Nearest-valid correlation repair: clip negative eigenvalues to zero,
/// then rescale to unit diagonal.
pub fn repair_correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let psd = clip_eigenvalues(m, 0.0);
    let d = psd.nrows();
    let mut out = psd.clone();
    for i in 0..d {
        for j in 0..d {
            let s = (psd[(i, i)] * psd[(j, j)]).sqrt();
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Degenerate(format!(
                    "correlation repair produced a zero diagonal at {i}"
                )));
            }
            out[(i, j)] = psd[(i, j)] / s;
        }
        out[(i, i)] = 1.0;
    }
    Ok(symmetrize(&out))
}

/// Factor `L` with `L Lᵀ = m`: Cholesky when positive definite, otherwise
/// the eigen square root of the PSD part.
pub fn sampling_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        return ch.l();
    }
    let eig = symmetrize(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Pearson correlation matrix of the columns of `cols` (each inner vec one column).
pub fn correlation(cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = cols.len();
    let centered: Vec<DVector<f64>> = cols
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            DVector::from_iterator(c.len(), c.iter().map(|v| v - m))
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.norm()).collect();
    for (j, &s) in norms.iter().enumerate() {
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Degenerate(format!("column {j} has zero variance")));
        }
    }
    let upper = crate::parallel::map_indexed(d, |i| {
        ((i + 1)..d)
            .map(|j| (centered[i].dot(&centered[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0))
            .collect::<Vec<f64>>()
    });
    let mut r = DMatrix::identity(d, d);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}
