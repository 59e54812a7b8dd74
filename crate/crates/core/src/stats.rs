//! Spacing functionals and eigenvector-moment averages.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::eigenphase::{spacings_from_phases, EigenphaseFrame};
use crate::error::{Error, Result};
use crate::graph::{self, BondScatteringMatrix, MetricGraph, Observable};
use crate::lambda::{self, LambdaSpectrum};
use crate::linalg::{self, TAU};
use crate::sampling::{self, Accumulator};

/// Minimum Monte-Carlo sample count accepted by the ensemble estimators.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone)]
enum Shape {
    Gaussian { c: f64, w: f64 },
    Indicator { a: f64, b: f64, w: f64 },
    PolyGaussian { k: i32, c: f64, w: f64 },
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A bounded continuous function on `[0, ∞)` with a declared bound.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    bound: f64,
    shape: Shape,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({}, bound {})", self.name, self.bound)
    }
}

impl TestFunction {
    /// `exp(−(s−c)²/2w²)`.
    pub fn gaussian(c: f64, w: f64) -> Result<Self> {
        positive("w", w)?;
        Ok(TestFunction { name: format!("gaussian:c={c},w={w}"), bound: 1.0, shape: Shape::Gaussian { c, w } })
    }

    /// Smooth step up at `a` and down at `b`, edge width `w`:
    /// `(tanh((s−a)/w) − tanh((s−b)/w)) / 2`.
    pub fn smoothed_indicator(a: f64, b: f64, w: f64) -> Result<Self> {
        positive("w", w)?;
        if !(b > a) {
            return Err(Error::InvalidParameter(format!("indicator needs a < b (got {a}, {b})")));
        }
        Ok(TestFunction { name: format!("indicator:a={a},b={b},w={w}"), bound: 1.0, shape: Shape::Indicator { a, b, w } })
    }

    /// `s^k exp(−(s−c)²/2w²)`, maximal at `s* = (c + √(c² + 4kw²))/2`.
    pub fn poly_gaussian(k: i32, c: f64, w: f64) -> Result<Self> {
        positive("w", w)?;
        if k < 0 {
            return Err(Error::InvalidParameter(format!("polynomial degree must be ≥ 0 (got {k})")));
        }
        let s_star = ((c + (c * c + 4.0 * k as f64 * w * w).sqrt()) / 2.0).max(0.0);
        let bound = if k == 0 { 1.0 } else { s_star.powi(k) * (-(s_star - c).powi(2) / (2.0 * w * w)).exp() };
        Ok(TestFunction { name: format!("polygauss:k={k},c={c},w={w}"), bound, shape: Shape::PolyGaussian { k, c, w } })
    }

    pub fn constant(v: f64) -> Self {
        TestFunction { name: format!("const:v={v}"), bound: v.abs(), shape: Shape::Constant(v) }
    }

    /// A caller-supplied function. The bound is checked by [`TestFunction::probe`].
    pub fn custom(name: &str, bound: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction { name: name.to_string(), bound, shape: Shape::Custom(Arc::new(f)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Gaussian { c, w } => (-(s - c).powi(2) / (2.0 * w * w)).exp(),
            Shape::Indicator { a, b, w } => 0.5 * (((s - a) / w).tanh() - ((s - b) / w).tanh()),
            Shape::PolyGaussian { k, c, w } => s.powi(*k) * (-(s - c).powi(2) / (2.0 * w * w)).exp(),
            Shape::Constant(v) => *v,
            Shape::Custom(f) => f(s),
        }
    }

    /// Checks the declared bound and a continuity modulus on `[0, max]`.
    pub fn probe(&self, max: f64, points: usize) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.bound);
        for i in 0..=points {
            let s = max * i as f64 / points as f64;
            let v = self.eval(s);
            if !v.is_finite() || v.abs() > self.bound + slack {
                return Err(Error::BoundExceeded { name: self.name.clone(), bound: self.bound, value: v });
            }
            let jump = (self.eval(s + 1e-6) - v).abs();
            if jump > 1e-3 * (1.0 + self.bound) {
                return Err(Error::InvalidParameter(format!("{} jumps by {jump} near s = {s}", self.name)));
            }
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")))
    }
}

/// `name:key=val,...`, e.g. `gaussian:c=1,w=0.5`.
impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let mut kv = std::collections::BTreeMap::new();
        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("test function parameter '{item}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("test function parameter '{item}' is not numeric")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let mut take = |key: &str, default: Option<f64>| {
            kv.remove(key)
                .or(default)
                .ok_or_else(|| Error::InvalidParameter(format!("test function '{name}' needs '{key}'")))
        };
        let h = match name.trim() {
            "gaussian" => TestFunction::gaussian(take("c", None)?, take("w", None)?)?,
            "indicator" => TestFunction::smoothed_indicator(take("a", None)?, take("b", None)?, take("w", Some(0.05))?)?,
            "polygauss" => {
                let k = take("k", None)?;
                if k.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("polygauss degree must be an integer (got {k})")));
                }
                TestFunction::poly_gaussian(k as i32, take("c", None)?, take("w", None)?)?
            }
            "const" | "constant" => TestFunction::constant(take("v", Some(1.0))?),
            "one" => TestFunction::constant(1.0),
            other => return Err(Error::InvalidParameter(format!("unknown test function '{other}'"))),
        };
        if let Some(extra) = kv.keys().next() {
            return Err(Error::InvalidParameter(format!("unknown parameter '{extra}' for '{name}'")));
        }
        Ok(h)
    }
}

/// An estimate with its sampling error and, for truncated limits, a
/// convergence diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatResult {
    pub estimate: f64,
    pub samples: usize,
    /// Standard error; zero when not applicable.
    pub stderr: f64,
    /// Truncation diagnostic for deterministic limits.
    pub diagnostic: Option<f64>,
    pub seed: Option<u64>,
}

impl StatResult {
    pub fn exact(estimate: f64, samples: usize) -> Self {
        StatResult { estimate, samples, stderr: 0.0, diagnostic: None, seed: None }
    }

    /// `√(σ_a² + σ_b²)`.
    pub fn combined_stderr(&self, other: &StatResult) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// `(1/(N−r)) Σ_{n>r} h(L̄(λ_n − λ_{n−r}))`. The diagnostic is the change
/// caused by dropping the last tenth of the spectrum.
pub fn lambda_spacing_functional(spectrum: &LambdaSpectrum, h: &TestFunction, r: usize) -> Result<StatResult> {
    if r == 0 {
        return Err(Error::InvalidParameter("spacing order must be at least 1".into()));
    }
    let ev = spectrum.eigenvalues();
    if ev.len() < r + 1 {
        return Err(Error::TooFewEigenvalues { needed: r + 1, available: ev.len() });
    }
    let mean_length = spectrum.mean_length();
    let values: Vec<f64> = (r..ev.len()).map(|n| h.eval(mean_length * (ev[n] - ev[n - r]))).collect();
    let mut acc = Accumulator::new(1);
    let cut = values.len() - values.len() / 10;
    let mut head = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i == cut {
            head = acc.mean(0);
        }
        acc.push(&[*v]);
    }
    let estimate = acc.mean(0);
    let diagnostic = if cut < values.len() && cut > 0 { (estimate - head).abs() } else { 0.0 };
    Ok(StatResult { estimate, samples: values.len(), stderr: acc.stderr(0), diagnostic: Some(diagnostic), seed: None })
}

/// All normalised `r`-th spacings of a spectrum.
pub fn lambda_spacings(spectrum: &LambdaSpectrum, r: usize) -> Vec<f64> {
    let ev = spectrum.eigenvalues();
    let mean_length = spectrum.mean_length();
    (r..ev.len()).map(|n| mean_length * (ev[n] - ev[n - r])).collect()
}

fn check_quadrature_step(graph: &MetricGraph, step: f64) -> Result<()> {
    let max = std::f64::consts::PI / (4.0 * graph.max_length());
    if !(step > 0.0) || step > max {
        return Err(Error::StepTooCoarse { step, max });
    }
    Ok(())
}

/// Midpoint quadrature at `step` with the step-halving diagnostic.
fn quadrature<F>(capital_lambda: f64, step: f64, outputs: usize, f: F) -> Result<Vec<StatResult>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let coarse = sampling::midpoint_mean(capital_lambda, step, outputs, &f)?;
    let fine = sampling::midpoint_mean(capital_lambda, 0.5 * step, outputs, &f)?;
    Ok((0..outputs)
        .map(|k| StatResult {
            estimate: coarse.means[k],
            samples: coarse.cells,
            stderr: coarse.stderr[k],
            diagnostic: Some((coarse.means[k] - fine.means[k]).abs()),
            seed: None,
        })
        .collect())
}

/// `(1/Λ) ∫₀^Λ (1/2B) Σ_j h(σ_j(λ)) dλ` by the composite midpoint rule.
pub fn theta_spacing_functional(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    h: &TestFunction,
    capital_lambda: f64,
    step: f64,
) -> Result<StatResult> {
    check_quadrature_step(graph, step)?;
    let dim = graph.dim() as f64;
    let out = quadrature(capital_lambda, step, 1, |lambda| {
        let mut phases = linalg::eigenphases(&graph::evolution_operator(graph, s0, lambda))?;
        phases.sort_by(|a, b| b.total_cmp(a));
        Ok(vec![spacings_from_phases(&phases).iter().map(|&s| h.eval(s)).sum::<f64>() / dim])
    })?;
    Ok(out[0])
}

/// `θ`-spacings `σ_j(λ)` on the midpoint grid of `(0, Λ]`.
pub fn theta_spacings(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    capital_lambda: f64,
    step: f64,
) -> Result<Vec<f64>> {
    check_quadrature_step(graph, step)?;
    let n = (capital_lambda / step).ceil().max(1.0) as usize;
    let h = capital_lambda / n as f64;
    let mut out = Vec::with_capacity(n * graph.dim());
    for i in 0..n {
        let mut phases = linalg::eigenphases(&graph::evolution_operator(graph, s0, (i as f64 + 0.5) * h))?;
        phases.sort_by(|a, b| b.total_cmp(a));
        out.extend(spacings_from_phases(&phases));
    }
    Ok(out)
}

/// A one-parameter family `ℓ₀(1,…,1) + δ u` probed at several `δ`.
#[derive(Debug, Clone)]
pub struct EquivalenceStudy {
    pub base_length: f64,
    pub direction: Vec<f64>,
    pub deltas: Vec<f64>,
    pub h: TestFunction,
    /// Target eigenvalue count; `Λ = N π / 𝓛`.
    pub eigenvalue_count: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub delta: f64,
    pub lengths: Vec<f64>,
    pub capital_lambda: f64,
    pub p_lambda: StatResult,
    pub p_theta: StatResult,
    pub difference: f64,
    /// Sum of the two truncation diagnostics.
    pub difference_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceTable {
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].difference < w[0].difference)
    }

    pub fn decreasing_within_errors(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].difference < w[0].difference + w[0].difference_error + w[1].difference_error)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "delta",
            "capital_lambda",
            "eigenvalues",
            "p_lambda",
            "p_lambda_diagnostic",
            "p_theta",
            "p_theta_diagnostic",
            "difference",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.delta.to_string(),
                format!("{:.6}", r.capital_lambda),
                r.p_lambda.samples.to_string(),
                format!("{:.12e}", r.p_lambda.estimate),
                format!("{:.3e}", r.p_lambda.diagnostic.unwrap_or(0.0)),
                format!("{:.12e}", r.p_theta.estimate),
                format!("{:.3e}", r.p_theta.diagnostic.unwrap_or(0.0)),
                format!("{:.6e}", r.difference),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the family on the topology of `graph` with scattering matrix `s0`.
pub fn spacing_equivalence_study(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    study: &EquivalenceStudy,
) -> Result<EquivalenceTable> {
    let b = graph.bond_count();
    if study.direction.len() != b {
        return Err(Error::DimensionMismatch { expected: b, found: study.direction.len() });
    }
    for i in 0..b {
        for j in i + 1..b {
            if study.direction[i] == study.direction[j] {
                return Err(Error::InvalidParameter("direction components must be distinct".into()));
            }
        }
    }
    if study.deltas.contains(&0.0) {
        return Err(Error::DegenerateLengths);
    }
    if study.deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("deltas must be strictly decreasing".into()));
    }
    if study.eigenvalue_count < 2 {
        return Err(Error::InvalidParameter("need at least two eigenvalues".into()));
    }
    let mut rows = Vec::with_capacity(study.deltas.len());
    for &delta in &study.deltas {
        let lengths: Vec<f64> = study.direction.iter().map(|u| study.base_length + delta * u).collect();
        let g = graph.with_lengths(&lengths)?;
        let capital_lambda = study.eigenvalue_count as f64 * std::f64::consts::PI / g.total_length();
        let spectrum = lambda::solve_eigenvalues(&g, s0, capital_lambda)?;
        let p_lambda = lambda_spacing_functional(&spectrum, &study.h, 1)?;
        let p_theta = theta_spacing_functional(&g, s0, &study.h, capital_lambda, study.step)?;
        rows.push(EquivalenceRow {
            delta,
            lengths,
            capital_lambda,
            p_lambda,
            p_theta,
            difference: (p_lambda.estimate - p_theta.estimate).abs(),
            difference_error: p_lambda.diagnostic.unwrap_or(0.0) + p_theta.diagnostic.unwrap_or(0.0),
        });
    }
    Ok(EquivalenceTable { rows })
}

fn check_observable(graph: &MetricGraph, a: &Observable) -> Result<()> {
    if a.matrix().nrows() != graph.dim() {
        return Err(Error::DimensionMismatch { expected: graph.dim(), found: a.matrix().nrows() });
    }
    Ok(())
}

/// `(1/N) Σ_n A_n^m L̄ / ⟨φ_n|L|φ_n⟩` for each `m`, with batch-means errors
/// over contiguous blocks of the spectrum.
pub fn evec_moments_spectral(
    spectrum: &LambdaSpectrum,
    graph: &MetricGraph,
    a: &Observable,
    ms: &[u32],
) -> Result<Vec<StatResult>> {
    check_observable(graph, a)?;
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let vectors = spectrum.vectors()?;
    let doubled = graph.doubled_lengths();
    let mean_length = graph.mean_length();
    let values: Vec<Vec<f64>> = vectors
        .iter()
        .map(|(_, v)| {
            let an = a.expectation(v.iter());
            let ln = linalg::diagonal_expectation(v.iter(), &doubled);
            ms.iter().map(|&m| an.powi(m as i32) * mean_length / ln).collect()
        })
        .collect();
    Ok(batch_results(&values, ms.len()))
}

fn batch_results(values: &[Vec<f64>], outputs: usize) -> Vec<StatResult> {
    let n = values.len();
    let batches = sampling::BATCHES.min(n);
    let per = n.div_ceil(batches);
    let mut total = Accumulator::new(outputs);
    let mut parts = vec![Accumulator::new(outputs); batches];
    for (i, v) in values.iter().enumerate() {
        total.push(v);
        parts[i / per].push(v);
    }
    let parts: Vec<&Accumulator> = parts.iter().filter(|p| p.count > 0).collect();
    (0..outputs)
        .map(|k| {
            let m = parts.len() as f64;
            let stderr = if parts.len() < 2 {
                0.0
            } else {
                let means: Vec<f64> = parts.iter().map(|p| p.mean(k)).collect();
                let c = means.iter().sum::<f64>() / m;
                (means.iter().map(|x| (x - c).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            };
            StatResult { estimate: total.mean(k), samples: n, stderr, diagnostic: None, seed: None }
        })
        .collect()
}

pub fn evec_moment_spectral(spectrum: &LambdaSpectrum, graph: &MetricGraph, a: &Observable, m: u32) -> Result<StatResult> {
    Ok(evec_moments_spectral(spectrum, graph, a, &[m])?[0])
}

/// `(1/2B) Σ_j A_j^m` over an orthonormal eigenbasis of a frame.
fn frame_moments(frame: &EigenphaseFrame, a: &Observable, ms: &[u32]) -> Vec<f64> {
    let dim = frame.dim() as f64;
    let mut out = vec![0.0; ms.len()];
    for j in 0..frame.dim() {
        let aj = a.expectation(frame.vectors.column(j).iter());
        for (k, &m) in ms.iter().enumerate() {
            out[k] += aj.powi(m as i32);
        }
    }
    out.iter_mut().for_each(|x| *x /= dim);
    out
}

/// `(1/Λ) ∫₀^Λ (1/2B) Σ_j A_j(λ)^m dλ` for each `m`.
pub fn evec_moments_lambda_average(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    a: &Observable,
    ms: &[u32],
    capital_lambda: f64,
    step: f64,
) -> Result<Vec<StatResult>> {
    check_observable(graph, a)?;
    check_quadrature_step(graph, step)?;
    quadrature(capital_lambda, step, ms.len(), |lambda| {
        Ok(frame_moments(&EigenphaseFrame::at_lambda(graph, s0, lambda)?, a, ms))
    })
}

pub fn evec_moment_lambda_average(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    a: &Observable,
    m: u32,
    capital_lambda: f64,
    step: f64,
) -> Result<StatResult> {
    Ok(evec_moments_lambda_average(graph, s0, a, &[m], capital_lambda, step)?[0])
}

/// Mean of `(1/2B) Σ_j ⟨ψ_j(D)|A|ψ_j(D)⟩^m` over `D = e^{iX}`, `X` uniform
/// on the torus.
pub fn evec_moments_ensemble(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    a: &Observable,
    ms: &[u32],
    samples: usize,
    seed: u64,
) -> Result<Vec<StatResult>> {
    check_observable(graph, a)?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SAMPLES} samples (got {samples})")));
    }
    let b = graph.bond_count();
    let acc = sampling::monte_carlo(samples, seed, ms.len(), |rng| {
        let x: Vec<f64> = (0..b).map(|_| rng.gen::<f64>() * TAU).collect();
        Ok(frame_moments(&EigenphaseFrame::at_torus(graph, s0, &x)?, a, ms))
    })?;
    Ok((0..ms.len())
        .map(|k| StatResult {
            estimate: acc.mean(k),
            samples,
            stderr: acc.stderr(k),
            diagnostic: None,
            seed: Some(seed),
        })
        .collect())
}

pub fn evec_moment_ensemble(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    a: &Observable,
    m: u32,
    samples: usize,
    seed: u64,
) -> Result<StatResult> {
    Ok(evec_moments_ensemble(graph, s0, a, &[m], samples, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width bins on `[lo, hi)`; values outside are dropped from the
/// counts but not from the density normalisation.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!("bad histogram range [{lo}, {hi}) with {bins} bins")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v < hi {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = values.len().max(1) as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            left: lo + i as f64 * width,
            right: lo + (i + 1) as f64 * width,
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "count", "density"])?;
    for b in bins {
        w.write_record([format!("{:.6}", b.left), format!("{:.6}", b.right), b.count.to_string(), format!("{:.9e}", b.density)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::kirchhoff_s0;
    use std::f64::consts::PI;

    #[test]
    fn parse_test_functions() {
        let h: TestFunction = "gaussian:c=1,w=0.5".parse().unwrap();
        assert!((h.eval(1.0) - 1.0).abs() < 1e-15);
        assert!((h.eval(1.5) - (-0.5f64).exp()).abs() < 1e-15);
        assert!("gaussian:c=1".parse::<TestFunction>().is_err());
        assert!("gaussian:c=1,w=x".parse::<TestFunction>().is_err());
        assert!("gaussian:c=1,w=0.5,z=2".parse::<TestFunction>().is_err());
        assert!("sinc:a=1".parse::<TestFunction>().is_err());
        assert_eq!("one".parse::<TestFunction>().unwrap().eval(3.0), 1.0);
    }

    #[test]
    fn declared_bounds_hold() {
        for text in ["gaussian:c=1,w=0.5", "indicator:a=0.5,b=2,w=0.1", "polygauss:k=2,c=1,w=0.5", "polygauss:k=3,c=-1,w=2"] {
            let h: TestFunction = text.parse().unwrap();
            h.probe(20.0, 20000).unwrap();
        }
        let bad = TestFunction::custom("bad", 0.5, |s| s);
        assert!(matches!(bad.probe(2.0, 100), Err(Error::BoundExceeded { .. })));
    }

    #[test]
    fn poly_gaussian_bound_is_attained() {
        let h = TestFunction::poly_gaussian(2, 1.0, 0.5).unwrap();
        let s_star = (1.0 + (1.0f64 + 4.0 * 2.0 * 0.25).sqrt()) / 2.0;
        assert!((h.eval(s_star) - h.bound()).abs() < 1e-15);
        assert!(h.eval(s_star + 1e-3) < h.bound() && h.eval(s_star - 1e-3) < h.bound());
    }

    #[test]
    fn interval_spacings_are_pi() {
        let g = MetricGraph::interval(PI).unwrap();
        let spec = lambda::solve_eigenvalues(&g, &kirchhoff_s0(&g), 40.5).unwrap();
        let h = TestFunction::gaussian(3.0, 0.7).unwrap();
        let r = lambda_spacing_functional(&spec, &h, 1).unwrap();
        assert!((r.estimate - h.eval(PI)).abs() < 1e-12);
        let r2 = lambda_spacing_functional(&spec, &h, 2).unwrap();
        assert!((r2.estimate - h.eval(2.0 * PI)).abs() < 1e-12);
        assert!(lambda_spacing_functional(&spec, &h, 40).is_err());
    }

    #[test]
    fn constant_h_gives_one() {
        let g = MetricGraph::star(&[1.0, 1.05, 0.95]).unwrap();
        let s0 = kirchhoff_s0(&g);
        let one = TestFunction::constant(1.0);
        let spec = lambda::solve_eigenvalues(&g, &s0, 30.0).unwrap();
        assert_eq!(lambda_spacing_functional(&spec, &one, 1).unwrap().estimate, 1.0);
        let t = theta_spacing_functional(&g, &s0, &one, 30.0, 0.1).unwrap();
        assert!((t.estimate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_quadrature_rejected() {
        let g = MetricGraph::star(&[1.0, 1.05, 0.95]).unwrap();
        let s0 = kirchhoff_s0(&g);
        let one = TestFunction::constant(1.0);
        assert!(matches!(theta_spacing_functional(&g, &s0, &one, 10.0, 0.8), Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn zero_delta_rejected() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap();
        let study = EquivalenceStudy {
            base_length: 1.0,
            direction: vec![0.5, -0.3, -0.2],
            deltas: vec![0.1, 0.0],
            h: TestFunction::constant(1.0),
            eigenvalue_count: 100,
            step: 0.1,
        };
        assert!(matches!(spacing_equivalence_study(&g, &kirchhoff_s0(&g), &study), Err(Error::DegenerateLengths)));
    }

    #[test]
    fn single_bond_ensemble_matches_hand_formula() {
        let g = MetricGraph::interval(1.3).unwrap();
        let s0 = kirchhoff_s0(&g);
        let m = crate::linalg::CMatrix::from_row_slice(
            2,
            2,
            &[
                crate::linalg::C64::new(0.7, 0.0),
                crate::linalg::C64::new(0.2, 0.1),
                crate::linalg::C64::new(0.2, -0.1),
                crate::linalg::C64::new(0.4, 0.0),
            ],
        );
        let a = Observable::new(&g, m).unwrap();
        for mm in [1u32, 2, 3] {
            let r = evec_moment_ensemble(&g, &s0, &a, mm, 1000, 3).unwrap();
            let mid = (0.7 + 0.4) / 2.0;
            let expected = ((mid + 0.2f64).powi(mm as i32) + (mid - 0.2f64).powi(mm as i32)) / 2.0;
            assert!((r.estimate - expected).abs() < 1e-12, "m={mm}: {} vs {expected}", r.estimate);
        }
    }

    #[test]
    fn histogram_counts() {
        let bins = histogram(&[0.1, 0.2, 0.7, 1.5], 2, 0.0, 1.0).unwrap();
        assert_eq!(bins[0].count, 2);
        assert_eq!(bins[1].count, 1);
        assert!((bins[0].density - 1.0).abs() < 1e-15);
    }
}
