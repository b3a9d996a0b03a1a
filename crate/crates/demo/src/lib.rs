//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function takes plain numbers and returns a JSON string, so
//! the page needs no bindings beyond `JSON.parse`. The pure functions in this
//! module are what the wrappers call and what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use countmodels::copula::GaussianCopulaPoisson;
use countmodels::metrics::spearman;
use countmodels::mixtures::LogNormalPoisson;
use countmodels::pgm::{gibbs_sample, PairwiseGM, Variant};
use countmodels::rng::seeded;
use countmodels::Result;

/// Largest sample the page may request.
pub const MAX_ROWS: usize = 200_000;
/// Points returned for plotting.
pub const MAX_POINTS: usize = 2_000;

#[derive(Debug, Serialize)]
pub struct Scatter {
    pub spearman: Option<f64>,
    pub points: Vec<[u64; 2]>,
    pub n: usize,
}

/// Frequency table on `0..=max` squared; mass beyond `max` is folded into the edge.
#[derive(Debug, Serialize)]
pub struct Grid {
    pub max: u64,
    pub freq: Vec<Vec<f64>>,
    pub spearman: Option<f64>,
}

fn check_rows(n: usize) -> Result<()> {
    if n < 2 || n > MAX_ROWS {
        return Err(countmodels::Error::InvalidParameter(format!(
            "row count must lie in 2..={MAX_ROWS}, got {n}"
        )));
    }
    Ok(())
}

fn grid_of(x: &countmodels::CountMatrix, max: u64) -> Grid {
    let side = max as usize + 1;
    let mut freq = vec![vec![0.0; side]; side];
    for r in x.rows() {
        freq[r[0].min(max) as usize][r[1].min(max) as usize] += 1.0;
    }
    let n = x.n() as f64;
    freq.iter_mut().flatten().for_each(|v| *v /= n);
    Grid {
        max,
        freq,
        spearman: spearman(&x.column_f64(0), &x.column_f64(1)).ok(),
    }
}

/// Two-variable log-normal mixture with `Σ = 2 ln α [[1, ρ], [ρ, 1]]`.
pub fn lognormal_scatter(alpha: f64, rho: f64, n: usize, seed: u64) -> Result<Scatter> {
    check_rows(n)?;
    let x = LogNormalPoisson::bivariate_extreme(alpha, rho)?.sample(n, &mut seeded(seed));
    let step = n.div_ceil(MAX_POINTS);
    Ok(Scatter {
        spearman: spearman(&x.column_f64(0), &x.column_f64(1)).ok(),
        points: x.rows().step_by(step).map(|r| [r[0], r[1]]).collect(),
        n,
    })
}

/// Empirical joint of a two-variable Gaussian copula with Poisson marginals.
pub fn copula_grid(lambda1: f64, lambda2: f64, rho: f64, n: usize, seed: u64, max: u64) -> Result<Grid> {
    check_rows(n)?;
    let r = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    let x = GaussianCopulaPoisson::new(vec![lambda1, lambda2], r)?.sample(n, &mut seeded(seed));
    Ok(grid_of(&x, max))
}

/// Gibbs-sampled joint of a two-node truncated (`"tpgm"`) or square-root (`"sqr"`) model.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_grid(
    variant: &str,
    theta1: f64,
    theta2: f64,
    phi12: f64,
    truncation: u64,
    n: usize,
    sweeps: usize,
    seed: u64,
) -> Result<Grid> {
    check_rows(n)?;
    let (v, max) = match variant {
        "tpgm" => (Variant::Tpgm { r: truncation }, truncation),
        "sqr" => (Variant::Sqr, truncation.max(1)),
        other => {
            return Err(countmodels::Error::InvalidParameter(format!(
                "demo variant must be tpgm or sqr, got `{other}`"
            )))
        }
    };
    let phi = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, phi12, phi12, 0.0]);
    let m = PairwiseGM::new(v, vec![theta1, theta2], phi)?;
    let x = gibbs_sample(&m, n, sweeps, &mut seeded(seed))?;
    Ok(grid_of(&x, max))
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = lognormalScatter)]
pub fn lognormal_scatter_js(alpha: f64, rho: f64, n: usize, seed: u64) -> std::result::Result<String, JsValue> {
    to_js(lognormal_scatter(alpha, rho, n, seed))
}

#[wasm_bindgen(js_name = copulaGrid)]
pub fn copula_grid_js(
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    n: usize,
    seed: u64,
    max: u64,
) -> std::result::Result<String, JsValue> {
    to_js(copula_grid(lambda1, lambda2, rho, n, seed, max))
}

#[wasm_bindgen(js_name = gibbsGrid)]
#[allow(clippy::too_many_arguments)]
pub fn gibbs_grid_js(
    variant: &str,
    theta1: f64,
    theta2: f64,
    phi12: f64,
    truncation: u64,
    n: usize,
    sweeps: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(gibbs_grid(variant, theta1, theta2, phi12, truncation, n, sweeps, seed))
}
