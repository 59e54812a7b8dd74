//! Seeded Monte-Carlo and midpoint quadrature with a fixed reduction order.
//!
//! Work is split into fixed-size chunks. Monte-Carlo chunk `c` draws from
//! `ChaCha8Rng` seeded with the run seed on stream `c`, and partial sums are
//! always added in chunk order, so results do not depend on how many
//! threads ran the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CHUNK: usize = 1024;
/// Number of contiguous batches used for batch-means standard errors.
pub const BATCHES: usize = 32;

/// Running first and second moments of several outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Accumulator {
    pub fn new(outputs: usize) -> Self {
        Accumulator { count: 0, sum: vec![0.0; outputs], sum_sq: vec![0.0; outputs] }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.count += 1;
        for (k, v) in values.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.count as f64
    }

    /// Standard error of the mean, `sd / √n`.
    pub fn stderr(&self, k: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let mean = self.sum[k] / n;
        let var = ((self.sum_sq[k] - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Draws `samples` evaluations of `f`, each returning `outputs` values.
pub fn monte_carlo<F>(samples: usize, seed: u64, outputs: usize, f: F) -> Result<Accumulator>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Vec<f64>> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut acc = Accumulator::new(outputs);
            for _ in 0..n {
                acc.push(&f(&mut rng)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Accumulator::new(outputs);
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

/// Midpoint-rule values of `f` on `(0, Λ]` with `n = ⌈Λ/step⌉` cells.
/// Returns, per output, the mean and a batch-means standard error.
pub fn midpoint_mean<F>(capital_lambda: f64, step: f64, outputs: usize, f: F) -> Result<MidpointResult>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    if !(capital_lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("averaging range must be positive (got {capital_lambda})")));
    }
    let n = (capital_lambda / step).ceil().max(1.0) as usize;
    let h = capital_lambda / n as f64;
    let chunks = n.div_ceil(CHUNK);
    let values: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(n)).map(|i| f((i as f64 + 0.5) * h)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut total = Accumulator::new(outputs);
    let mut batches = vec![Accumulator::new(outputs); BATCHES.min(n)];
    let per_batch = n.div_ceil(batches.len());
    for (i, v) in values.iter().flatten().enumerate() {
        total.push(v);
        batches[i / per_batch].push(v);
    }
    let batches: Vec<&Accumulator> = batches.iter().filter(|b| b.count > 0).collect();
    let stderr = (0..outputs)
        .map(|k| {
            let m = batches.len() as f64;
            if batches.len() < 2 {
                return 0.0;
            }
            let means: Vec<f64> = batches.iter().map(|b| b.mean(k)).collect();
            let centre = means.iter().sum::<f64>() / m;
            let var = means.iter().map(|x| (x - centre).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(MidpointResult { cells: n, step: h, means: (0..outputs).map(|k| total.mean(k)).collect(), stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MidpointResult {
    pub cells: usize,
    pub step: f64,
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
}
