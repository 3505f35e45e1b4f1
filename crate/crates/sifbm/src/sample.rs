//! Row-parallel sampling. Every row draws from its own `(seed, row)` stream,
//! so the output does not depend on the worker count.

use rayon::prelude::*;
use sifbm_core::flows::PathEnsemble;
use sifbm_core::gaussian::{GaussianField, SampleEnsemble};
use sifbm_core::intrep::{time_change_of, HalfSampler, IntegralSampler, RepConfig};
use sifbm_core::{Error, Result};

pub fn sample_field(field: &GaussianField, n: usize, seed: u64) -> Result<SampleEnsemble> {
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    let k = field.indices().len();
    let mut values = vec![0.0; n * k];
    values
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(row, out)| field.sample_row(seed, row as u64, out));
    SampleEnsemble::new(field.indices().to_vec(), n, values, Some(field.hurst()), Some(seed))
}

/// Integral representation below `H = 1/2`, Brownian increments at it.
pub fn sample_flow(masses: &[f64], cfg: &RepConfig, n: usize) -> Result<PathEnsemble> {
    let k = masses.len();
    let mut values = vec![0.0; n * k];
    let seed = cfg.seed();
    if cfg.hurst().is_half() {
        let s = HalfSampler::new(masses)?;
        values.par_chunks_mut(k).enumerate().for_each(|(row, out)| s.sample_row(seed, row as u64, out));
    } else {
        let s = IntegralSampler::new(masses, cfg)?;
        values.par_chunks_mut(k).enumerate().for_each(|(row, out)| s.sample_row(seed, row as u64, out));
    }
    PathEnsemble::new(time_change_of(masses), n, values)
}
