//! Systematic-scan Gibbs sampling, one independent chain per output row.

use rand::Rng;

use crate::data::{default_names, CountMatrix};
use crate::error::{invalid, Result};
use crate::parallel::map_indexed;
use crate::rng::stream;

use super::flpgm::flpgm_sample;
use super::model::{PairwiseGM, Variant};

pub const DEFAULT_GIBBS_ITERS: usize = 5000;

/// Run `n` chains of `iters` sweeps from the zero vector and keep the last state
/// of each. The fixed-length variant uses its own simplex sampler.
pub fn gibbs_sample<R: Rng + ?Sized>(model: &PairwiseGM, n: usize, iters: usize, rng: &mut R) -> Result<CountMatrix> {
    if iters == 0 {
        return invalid("Gibbs sampling needs at least one sweep");
    }
    if matches!(model.variant(), Variant::Flpgm { .. }) {
        return flpgm_sample(model, n, rng);
    }
    let d = model.d();
    let seed = rng.random::<u64>();
    let rows = map_indexed(n, |row| -> Result<Vec<u64>> {
        let mut rng = stream(seed, row as u64);
        let mut x = vec![0u64; d];
        for _ in 0..iters {
            for i in 0..d {
                x[i] = model.node_conditional(i, &x).sample(&mut rng)?;
            }
        }
        Ok(x)
    });
    let mut values = Vec::with_capacity(n * d);
    for r in rows {
        values.extend(r?);
    }
    CountMatrix::new(values, n, d, default_names(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use nalgebra::DMatrix;

    #[test]
    fn independent_models_give_poisson_means() {
        let theta = vec![0.5, 1.2];
        for v in [Variant::Pgm, Variant::Sqr] {
            let phi = if matches!(v, Variant::Sqr) {
                DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.2])
            } else {
                DMatrix::zeros(2, 2)
            };
            let th = if matches!(v, Variant::Sqr) { vec![0.0, 0.0] } else { theta.clone() };
            let m = PairwiseGM::new(v, th, phi).unwrap();
            let n = 20_000;
            let x = gibbs_sample(&m, n, 3, &mut seeded(2)).unwrap();
            for (j, &t) in theta.iter().enumerate() {
                let rate = f64::exp(t);
                let se = (rate / n as f64).sqrt();
                assert!((x.column_means()[j] - rate).abs() < 3.0 * se, "{v:?} col {j}");
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let m = PairwiseGM::new(
            Variant::Tpgm { r: 5 },
            vec![0.2, 0.1, -0.3],
            DMatrix::from_row_slice(3, 3, &[0.0, 0.2, -0.1, 0.2, 0.0, 0.1, -0.1, 0.1, 0.0]),
        )
        .unwrap();
        let a = gibbs_sample(&m, 50, 20, &mut seeded(9)).unwrap();
        let b = gibbs_sample(&m, 50, 20, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        assert!(gibbs_sample(&m, 5, 0, &mut seeded(9)).is_err());
    }
}
