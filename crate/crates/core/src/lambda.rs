//! The `λ`-spectrum: positive roots of `det[I − e^{iλL} S₀] = 0` with
//! multiplicities and fixed-point eigenvectors.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crossing::{Crossing, FlowOperator, CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::graph::{self, BondScatteringMatrix, MetricGraph};
use crate::linalg::{self, CMatrix, Eigensystem, C64, TAU};

/// Roots at or below this are the zero eigenvalue and are never reported.
pub const ZERO_EXCLUSION: f64 = 1e-8;
/// A vector counts as fixed when `‖U v − v‖` is below this.
pub const SPECTRAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralLevel {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Orthonormal basis of `{c : U(λ) c = c}`, one column per unit of
    /// multiplicity.
    pub basis: Option<CMatrix>,
}

#[derive(Debug, Clone)]
pub struct LambdaSpectrum {
    lambda_max: f64,
    levels: Vec<SpectralLevel>,
    eigenvalues: Vec<f64>,
    fingerprint: u64,
    total_length: f64,
    mean_length: f64,
    bond_count: usize,
}

impl LambdaSpectrum {
    fn assemble(graph: &MetricGraph, lambda_max: f64, levels: Vec<SpectralLevel>) -> Self {
        let eigenvalues =
            levels.iter().flat_map(|l| std::iter::repeat_n(l.lambda, l.multiplicity)).collect();
        LambdaSpectrum {
            lambda_max,
            levels,
            eigenvalues,
            fingerprint: graph.fingerprint(),
            total_length: graph.total_length(),
            mean_length: graph.mean_length(),
            bond_count: graph.bond_count(),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Sorted, each repeated per multiplicity.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn levels(&self) -> &[SpectralLevel] {
        &self.levels
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.multiplicity).collect()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn mean_length(&self) -> f64 {
        self.mean_length
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn has_vectors(&self) -> bool {
        !self.levels.is_empty() && self.levels.iter().all(|l| l.basis.is_some())
    }

    /// `N(Λ)`: eigenvalues `≤ Λ`, with multiplicity.
    pub fn counting(&self, capital_lambda: f64) -> usize {
        self.eigenvalues.partition_point(|&l| l <= capital_lambda)
    }

    /// Eigenvalues in `(a, b]`, with multiplicity.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.counting(b) - self.counting(a)
    }

    /// Every stored vector, paired with its eigenvalue, in spectral order.
    pub fn vectors(&self) -> Result<Vec<(f64, nalgebra::DVector<C64>)>> {
        let mut out = Vec::with_capacity(self.len());
        for level in &self.levels {
            let basis = level.basis.as_ref().ok_or(Error::MissingEigenvectors)?;
            for c in 0..basis.ncols() {
                out.push((level.lambda, basis.column(c).into_owned()));
            }
        }
        Ok(out)
    }

    /// `L̄ λ_N / N`, the mean of the normalised spacings `L̄(λ_n − λ_{n−1})`
    /// with `λ_0 = 0`.
    pub fn mean_normalized_spacing(&self) -> Result<f64> {
        let last = *self.eigenvalues.last().ok_or(Error::EmptySpectrum)?;
        Ok(self.mean_length * last / self.len() as f64)
    }

    /// Limit value `π / B` of [`LambdaSpectrum::mean_normalized_spacing`].
    pub fn expected_mean_spacing(&self) -> f64 {
        std::f64::consts::PI / self.bond_count as f64
    }

    /// CSV with columns `n, lambda, multiplicity`; one row per eigenvalue
    /// counted with multiplicity.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "lambda", "multiplicity"])?;
        let mut n = 0usize;
        for level in &self.levels {
            for _ in 0..level.multiplicity {
                n += 1;
                w.write_record([n.to_string(), format!("{:.15}", level.lambda), level.multiplicity.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `n, lambda, re_1, im_1, ..., re_2B, im_2B`.
    pub fn write_vectors_csv<W: Write>(&self, out: W) -> Result<()> {
        let vectors = self.vectors()?;
        let mut w = csv::Writer::from_writer(out);
        let dim = 2 * self.bond_count;
        let mut header = vec!["n".to_string(), "lambda".to_string()];
        for k in 1..=dim {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        w.write_record(&header)?;
        for (n, (lambda, v)) in vectors.iter().enumerate() {
            let mut rec = vec![(n + 1).to_string(), format!("{lambda:.15}")];
            for z in v.iter() {
                rec.push(format!("{:.15e}", z.re));
                rec.push(format!("{:.15e}", z.im));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Crossing times `t ∈ (ε₀, t_max]` of the flow `e^{itL} base`. A root
/// that rounding puts within [`CLUSTER_TOL`] past `t_max` is reported at
/// `t_max`.
pub(crate) fn crossing_times(graph: &MetricGraph, base: CMatrix, t_max: f64) -> Result<Vec<Crossing>> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("range end must be positive (got {t_max})")));
    }
    let flow = FlowOperator::new(graph, base);
    Ok(flow
        .crossings(0.0, t_max + CLUSTER_TOL, true)?
        .into_iter()
        .filter(|c| c.t > ZERO_EXCLUSION)
        .map(|c| Crossing { t: c.t.min(t_max), ..c })
        .collect())
}

/// Eigenvalues up to `λ_max` together with fixed-point bases.
pub fn solve_spectrum(graph: &MetricGraph, s0: &BondScatteringMatrix, lambda_max: f64) -> Result<LambdaSpectrum> {
    let crossings = crossing_times(graph, s0.matrix().clone(), lambda_max)?;
    let levels = crossings
        .par_iter()
        .map(|c| {
            let u = graph::evolution_operator(graph, s0, c.t);
            let (basis, _) = fixed_point_basis(&u, graph, c.multiplicity, c.t)?;
            Ok(SpectralLevel { lambda: c.t, multiplicity: c.multiplicity, basis: Some(basis) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LambdaSpectrum::assemble(graph, lambda_max, levels))
}

/// Eigenvalues only.
pub fn solve_eigenvalues(graph: &MetricGraph, s0: &BondScatteringMatrix, lambda_max: f64) -> Result<LambdaSpectrum> {
    let crossings = crossing_times(graph, s0.matrix().clone(), lambda_max)?;
    Ok(LambdaSpectrum::assemble(graph, lambda_max, levels_without_vectors(crossings)))
}

/// Spectrum of `det[I − e^{−iα} e^{iλL} S₀] = 0`. At `α = 0` this is the
/// computation done by [`solve_eigenvalues`].
pub fn solve_shifted_spectrum(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    alpha: f64,
    lambda_max: f64,
) -> Result<LambdaSpectrum> {
    let base = if alpha == 0.0 { s0.matrix().clone() } else { s0.matrix() * C64::from_polar(1.0, -alpha) };
    let crossings = crossing_times(graph, base, lambda_max)?;
    Ok(LambdaSpectrum::assemble(graph, lambda_max, levels_without_vectors(crossings)))
}

fn levels_without_vectors(crossings: Vec<Crossing>) -> Vec<SpectralLevel> {
    crossings.into_iter().map(|c| SpectralLevel { lambda: c.t, multiplicity: c.multiplicity, basis: None }).collect()
}

/// The `k` eigenvectors of `u` whose eigenvalues are closest to 1, rotated
/// onto the canonical basis of the cluster. Also returns the worst
/// `|e^{iθ} − 1|`.
pub(crate) fn fixed_point_basis(u: &CMatrix, graph: &MetricGraph, k: usize, lambda: f64) -> Result<(CMatrix, f64)> {
    let es = Eigensystem::of_unitary(u)?;
    let n = u.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let dist: Vec<f64> = es.phases.iter().map(|&p| linalg::circular_distance(p, 0.0)).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
    let chosen = &order[..k.min(n)];
    let residual = chosen.iter().map(|&j| 2.0 * (0.5 * dist[j]).sin()).fold(0.0, f64::max);
    if residual > SPECTRAL_TOL {
        return Err(Error::NotSpectral { lambda, residual });
    }
    let mut basis = CMatrix::from_fn(n, chosen.len(), |r, c| es.vectors[(r, chosen[c])]);
    if chosen.len() > 1 {
        let all: Vec<usize> = (0..chosen.len()).collect();
        linalg::rotate_cluster(&mut basis, &all, &graph.doubled_lengths());
    }
    Ok((basis, residual))
}

/// Orthonormal basis of the fixed space of `U(λ)`; an error when `λ` is not
/// an eigenvalue.
pub fn eigenvector_at(graph: &MetricGraph, s0: &BondScatteringMatrix, lambda: f64) -> Result<CMatrix> {
    let u = graph::evolution_operator(graph, s0, lambda);
    let phases = linalg::eigenphases(&u)?;
    let residuals: Vec<f64> = phases.iter().map(|&p| 2.0 * (0.5 * linalg::circular_distance(p, 0.0)).sin()).collect();
    let k = residuals.iter().filter(|&&r| r <= SPECTRAL_TOL).count();
    if k == 0 {
        let best = residuals.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::NotSpectral { lambda, residual: best });
    }
    Ok(fixed_point_basis(&u, graph, k, lambda)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylReport {
    pub capital_lambda: f64,
    pub count: usize,
    pub weyl: f64,
    /// `N(Λ) π / (𝓛 Λ)`.
    pub ratio: f64,
}

/// Compares `N(λ_max)` with `𝓛 λ_max / π`.
pub fn weyl_check(spectrum: &LambdaSpectrum, graph: &MetricGraph) -> Result<WeylReport> {
    weyl_check_at(spectrum, graph, spectrum.lambda_max)
}

pub fn weyl_check_at(spectrum: &LambdaSpectrum, graph: &MetricGraph, capital_lambda: f64) -> Result<WeylReport> {
    check_fingerprint(spectrum, graph)?;
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if !(capital_lambda > 0.0) || capital_lambda > spectrum.lambda_max {
        return Err(Error::WindowOutOfRange { start: 0.0, end: capital_lambda, range: spectrum.lambda_max });
    }
    let count = spectrum.counting(capital_lambda);
    let weyl = graph.total_length() * capital_lambda / std::f64::consts::PI;
    Ok(WeylReport { capital_lambda, count, weyl, ratio: count as f64 / weyl })
}

fn check_fingerprint(spectrum: &LambdaSpectrum, graph: &MetricGraph) -> Result<()> {
    if spectrum.fingerprint != graph.fingerprint() {
        return Err(Error::InvalidParameter("spectrum was computed for a different graph".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub trials: usize,
    pub seed: u64,
    /// `2π / L_min`; such windows must hold at least `2B` eigenvalues.
    pub long_window: f64,
    /// `2π / L_max`; such windows hold at most `2B`.
    pub short_window: f64,
    pub required: usize,
    pub min_long_count: usize,
    pub max_short_count: usize,
    pub long_violations: usize,
    pub short_violations: usize,
}

impl WindowReport {
    pub fn passed(&self) -> bool {
        self.long_violations == 0 && self.short_violations == 0
    }
}

/// Counts eigenvalues in half-open windows `(s, s + w]` at random starts
/// `s ∈ (0, λ_max − 2π/L_min]`.
pub fn window_count_bounds(
    spectrum: &LambdaSpectrum,
    graph: &MetricGraph,
    trials: usize,
    seed: u64,
) -> Result<WindowReport> {
    check_fingerprint(spectrum, graph)?;
    let long_window = TAU / graph.min_length();
    let short_window = TAU / graph.max_length();
    let span = spectrum.lambda_max - long_window;
    if !(span > 0.0) {
        return Err(Error::WindowOutOfRange { start: 0.0, end: long_window, range: spectrum.lambda_max });
    }
    let required = graph.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = WindowReport {
        trials,
        seed,
        long_window,
        short_window,
        required,
        min_long_count: usize::MAX,
        max_short_count: 0,
        long_violations: 0,
        short_violations: 0,
    };
    for _ in 0..trials {
        let start = span * (1.0 - rng.gen::<f64>());
        let long = spectrum.count_in(start, start + long_window);
        let short = spectrum.count_in(start, start + short_window);
        report.min_long_count = report.min_long_count.min(long);
        report.max_short_count = report.max_short_count.max(short);
        report.long_violations += usize::from(long < required);
        report.short_violations += usize::from(short > required);
    }
    Ok(report)
}
