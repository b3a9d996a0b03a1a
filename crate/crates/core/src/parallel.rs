//! Order-preserving parallel map; serial when the `parallel` feature is off.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Rows per independent random stream in [`sample_rows`].
pub(crate) const ROWS_PER_STREAM: usize = 256;

/// Fill an `n × d` row-major count buffer, one ChaCha stream per block of
/// rows so the output does not depend on the thread count.
pub(crate) fn sample_rows<F>(n: usize, d: usize, seed: u64, fill: F) -> Vec<u64>
where
    F: Fn(&mut crate::rng::StreamRng, &mut [u64]) + Sync + Send,
{
    let blocks = n.div_ceil(ROWS_PER_STREAM);
    let parts = map_indexed(blocks, |b| {
        let mut rng = crate::rng::stream(seed, b as u64);
        let rows = ROWS_PER_STREAM.min(n - b * ROWS_PER_STREAM);
        let mut out = vec![0u64; rows * d];
        for r in 0..rows {
            fill(&mut rng, &mut out[r * d..(r + 1) * d]);
        }
        out
    });
    parts.concat()
}

/// Cap the global worker pool at `threads`. Only the first call takes effect;
/// without the `parallel` feature this does nothing.
pub fn configure_threads(threads: usize) -> crate::error::Result<()> {
    if threads == 0 {
        return crate::error::invalid("thread count must be positive");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
    Ok(())
}
