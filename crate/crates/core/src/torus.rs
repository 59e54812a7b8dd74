//! The straight-line flow on the torus of bond phases and the surface `Σ`
//! where `e^{ix} S₀` has eigenvalue 1.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::crossing::{Crossing, FlowOperator};
use crate::eigenphase;
use crate::error::{Error, Result};
use crate::graph::{self, BondScatteringMatrix, MetricGraph, Observable};
use crate::lambda;
use crate::linalg::{self, CMatrix, Eigensystem, TAU};
use crate::sampling;
use crate::stats::{StatResult, TestFunction, MIN_SAMPLES};

/// Phase distance from `2π` below which a point is on `Σ`.
pub const SIGMA_TOL: f64 = 1e-9;

/// A point of `[0, 2π)^B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Reduces every coordinate mod `2π`.
    pub fn new(coords: &[f64]) -> Self {
        TorusPoint(coords.iter().map(|&c| reduce(c)).collect())
    }

    pub fn origin(b: usize) -> Self {
        TorusPoint(vec![0.0; b])
    }

    /// `−α (1, …, 1)`.
    pub fn diagonal(b: usize, alpha: f64) -> Self {
        TorusPoint::new(&vec![-alpha; b])
    }

    pub fn random<R: Rng>(b: usize, rng: &mut R) -> Self {
        TorusPoint((0..b).map(|_| rng.gen::<f64>() * TAU).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Largest per-coordinate circular distance.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| linalg::circular_distance(*a, *b)).fold(0.0, f64::max)
    }
}

fn reduce(c: f64) -> f64 {
    let r = c.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `φ_t(x₀) = x₀ + tL mod 2π`.
pub fn flow_point(x0: &TorusPoint, t: f64, graph: &MetricGraph) -> TorusPoint {
    TorusPoint(x0.0.iter().zip(graph.lengths()).map(|(x, l)| reduce(x + t * l)).collect())
}

fn shifted(graph: &MetricGraph, s0: &BondScatteringMatrix, x: &TorusPoint) -> Result<CMatrix> {
    if x.0.len() != graph.bond_count() {
        return Err(Error::DimensionMismatch { expected: graph.bond_count(), found: x.0.len() });
    }
    Ok(graph::shifted_operator(graph, s0.matrix(), &x.0))
}

/// Whether an eigenphase of `e^{ix} S₀` lies within `tol` of `2π`.
pub fn on_sigma(graph: &MetricGraph, s0: &BondScatteringMatrix, x: &TorusPoint, tol: f64) -> Result<bool> {
    let phases = linalg::eigenphases(&shifted(graph, s0, x)?)?;
    Ok(phases.iter().any(|&p| linalg::circular_distance(p, 0.0) <= tol))
}

/// Times `t ∈ (0, t_max]` at which `φ_t(x₀) ∈ Σ`. From the origin this is
/// the `λ`-spectrum.
pub fn crossings_from(
    x0: &TorusPoint,
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    t_max: f64,
) -> Result<Vec<Crossing>> {
    lambda::crossing_times(graph, shifted(graph, s0, x0)?, t_max)
}

/// A point of `Σ` with the data surface functions are built from.
#[derive(Debug, Clone)]
pub struct SurfacePoint {
    pub x: TorusPoint,
    pub multiplicity: usize,
    /// Orthonormal basis of the fixed space, one column per branch,
    /// ordered by decreasing velocity.
    pub fixed_vectors: CMatrix,
    /// `⟨φ|L|φ⟩` per branch.
    pub velocities: Vec<f64>,
    /// The remaining eigenphases, decreasing.
    pub other_phases: Vec<f64>,
    /// `d(x)`, when it has been computed.
    pub next_crossing: Option<f64>,
}

impl SurfacePoint {
    /// Builds the point assuming `multiplicity` eigenvalues at 1; fails if
    /// any of them is further than [`SIGMA_TOL`] from `2π`.
    pub fn new(graph: &MetricGraph, s0: &BondScatteringMatrix, x: TorusPoint, multiplicity: usize) -> Result<Self> {
        let u = shifted(graph, s0, &x)?;
        let es = Eigensystem::of_unitary(&u)?;
        let n = u.nrows();
        let dist: Vec<f64> = es.phases.iter().map(|&p| linalg::circular_distance(p, 0.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        let k = multiplicity.clamp(1, n);
        let worst = order[..k].iter().map(|&j| dist[j]).fold(0.0, f64::max);
        if worst > SIGMA_TOL {
            return Err(Error::OffSurface { distance: worst });
        }
        let doubled = graph.doubled_lengths();
        let mut fixed_vectors = CMatrix::from_fn(n, k, |r, c| es.vectors[(r, order[c])]);
        if k > 1 {
            let all: Vec<usize> = (0..k).collect();
            linalg::rotate_cluster(&mut fixed_vectors, &all, &doubled);
        }
        let velocities =
            (0..k).map(|c| linalg::diagonal_expectation(fixed_vectors.column(c).iter(), &doubled)).collect();
        let mut other_phases: Vec<f64> = order[k..].iter().map(|&j| es.phases[j]).collect();
        other_phases.sort_by(|a, b| b.total_cmp(a));
        Ok(SurfacePoint { x, multiplicity: k, fixed_vectors, velocities, other_phases, next_crossing: None })
    }

    /// Like [`SurfacePoint::new`], counting the eigenvalues at 1 itself.
    pub fn locate(graph: &MetricGraph, s0: &BondScatteringMatrix, x: TorusPoint) -> Result<Self> {
        let phases = linalg::eigenphases(&shifted(graph, s0, &x)?)?;
        let dists: Vec<f64> = phases.iter().map(|&p| linalg::circular_distance(p, 0.0)).collect();
        let k = dists.iter().filter(|&&d| d <= SIGMA_TOL).count();
        if k == 0 {
            return Err(Error::OffSurface { distance: dists.iter().copied().fold(f64::INFINITY, f64::min) });
        }
        Self::new(graph, s0, x, k)
    }

    pub fn with_next_crossing(mut self, graph: &MetricGraph, s0: &BondScatteringMatrix) -> Result<Self> {
        self.next_crossing = Some(eigenphase::next_crossing_time(graph, s0, self.x.coords())?);
        Ok(self)
    }

    /// `σ₁ = 2π − θ̂_{k+1}`: the gap below the eigenvalue(s) at 1.
    pub fn first_spacing(&self) -> f64 {
        self.other_phases.first().map_or(TAU, |&p| TAU - p)
    }

    /// Per-branch spacings: zero inside the cluster, `σ₁` for its last
    /// (slowest) branch.
    pub fn branch_spacings(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.multiplicity];
        s[self.multiplicity - 1] = self.first_spacing();
        s
    }
}

/// A bounded function on `Σ`. At a point where the eigenvalue 1 has
/// multiplicity `k` the value is the sum over the `k` branches.
pub trait SurfaceFunction: Sync {
    fn name(&self) -> String;
    fn bound(&self, graph: &MetricGraph) -> f64;
    fn needs_next_crossing(&self) -> bool {
        false
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64>;
}

/// `Φ ≡ c` per branch.
pub struct ConstantFunction(pub f64);

impl SurfaceFunction for ConstantFunction {
    fn name(&self) -> String {
        format!("const:{}", self.0)
    }
    fn bound(&self, graph: &MetricGraph) -> f64 {
        self.0.abs() * graph.dim() as f64
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        Ok(self.0 * p.multiplicity as f64)
    }
}

/// `Φ = σ₁`.
pub struct FirstSpacing;

impl SurfaceFunction for FirstSpacing {
    fn name(&self) -> String {
        "sigma1".into()
    }
    fn bound(&self, _: &MetricGraph) -> f64 {
        TAU
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        Ok(p.first_spacing())
    }
}

/// `Φ^σ = h(σ₁) / v`, with `v` the velocity of the branch at `2π`.
pub struct SpacingOverVelocity(pub TestFunction);

impl SurfaceFunction for SpacingOverVelocity {
    fn name(&self) -> String {
        format!("h(sigma1)/v [{}]", self.0.name())
    }
    fn bound(&self, graph: &MetricGraph) -> f64 {
        self.0.bound() * graph.dim() as f64 / graph.min_length()
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        Ok(p.branch_spacings().iter().zip(&p.velocities).map(|(&s, &v)| self.0.eval(s) / v).sum())
    }
}

/// `Φ^d = h(L̄ d)`; the other branches of a cluster return immediately and
/// contribute `h(0)`.
pub struct NextCrossingFunction {
    pub h: TestFunction,
    pub mean_length: f64,
}

impl SurfaceFunction for NextCrossingFunction {
    fn name(&self) -> String {
        format!("h(Lbar d) [{}]", self.h.name())
    }
    fn bound(&self, graph: &MetricGraph) -> f64 {
        self.h.bound() * graph.dim() as f64
    }
    fn needs_next_crossing(&self) -> bool {
        true
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        let d = p.next_crossing.ok_or_else(|| Error::InvalidParameter("next crossing time not computed".into()))?;
        Ok(self.h.eval(self.mean_length * d) + (p.multiplicity - 1) as f64 * self.h.eval(0.0))
    }
}

/// `Φ = ⟨φ|A|φ⟩^m L̄ / ⟨φ|L|φ⟩`, the summand of the spectral moment.
pub struct EigenvectorMoment {
    pub a: Observable,
    pub m: u32,
    pub mean_length: f64,
}

impl SurfaceFunction for EigenvectorMoment {
    fn name(&self) -> String {
        format!("A^{} Lbar/L", self.m)
    }
    fn bound(&self, graph: &MetricGraph) -> f64 {
        let norm = self.a.matrix().norm();
        graph.dim() as f64 * norm.powi(self.m as i32) * self.mean_length / graph.min_length()
    }
    fn evaluate(&self, p: &SurfacePoint) -> Result<f64> {
        Ok((0..p.multiplicity)
            .map(|c| {
                let a = self.a.expectation(p.fixed_vectors.column(c).iter());
                a.powi(self.m as i32) * self.mean_length / p.velocities[c]
            })
            .sum())
    }
}

fn checked(phi: &dyn SurfaceFunction, graph: &MetricGraph, p: &SurfacePoint) -> Result<f64> {
    let v = phi.evaluate(p)?;
    let bound = phi.bound(graph);
    if !v.is_finite() || v.abs() > bound * (1.0 + 1e-12) {
        return Err(Error::BoundExceeded { name: phi.name(), bound, value: v });
    }
    Ok(v)
}

/// `(1/N) Σ_n Φ(φ_{t_n}(x₀))` over the first `N` crossings (with
/// multiplicity) for several `Φ` at once.
pub fn ergodic_averages(
    phis: &[&dyn SurfaceFunction],
    x0: &TorusPoint,
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    n: usize,
) -> Result<Vec<StatResult>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one crossing".into()));
    }
    let flow = FlowOperator::new(graph, shifted(graph, s0, x0)?);
    // one crossing beyond the N-th gives the last return time
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut total = 0usize;
    let chunk = (n as f64 * std::f64::consts::PI / graph.total_length()) * 1.05 + TAU / graph.min_length();
    let mut t = 0.0;
    while total < n || crossings.len() <= crossings_needed(&crossings, n) {
        let next = flow.crossings(t, t + chunk, t == 0.0)?;
        let next: Vec<Crossing> = next.into_iter().filter(|c| c.t > lambda::ZERO_EXCLUSION).collect();
        total += next.iter().map(|c| c.multiplicity).sum::<usize>();
        crossings.extend(next);
        t += chunk;
    }
    let used = crossings_needed(&crossings, n);
    let want_d = phis.iter().any(|p| p.needs_next_crossing());
    let mut sums = vec![0.0; phis.len()];
    let mut accs = sampling::Accumulator::new(phis.len());
    let mut counted = 0usize;
    for i in 0..used {
        let c = crossings[i];
        let mut p = SurfacePoint::new(graph, s0, flow_point(x0, c.t, graph), c.multiplicity)?;
        if want_d {
            p.next_crossing = Some(crossings[i + 1].t - c.t);
        }
        // the last distinct crossing may straddle N; take only what is needed
        let take = c.multiplicity.min(n - counted);
        let mut per_branch = Vec::with_capacity(phis.len());
        for (k, phi) in phis.iter().enumerate() {
            let v = checked(*phi, graph, &p)? * take as f64 / c.multiplicity as f64;
            sums[k] += v;
            per_branch.push(v / take as f64);
        }
        for _ in 0..take {
            accs.push(&per_branch);
        }
        counted += take;
    }
    Ok((0..phis.len())
        .map(|k| StatResult { estimate: sums[k] / n as f64, samples: n, stderr: accs.stderr(k), diagnostic: None, seed: None })
        .collect())
}

/// Distinct crossings needed to cover `n` with multiplicity.
fn crossings_needed(crossings: &[Crossing], n: usize) -> usize {
    let mut total = 0;
    for (i, c) in crossings.iter().enumerate() {
        total += c.multiplicity;
        if total >= n {
            return i + 1;
        }
    }
    usize::MAX
}

pub fn ergodic_average(
    phi: &dyn SurfaceFunction,
    x0: &TorusPoint,
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    n: usize,
) -> Result<StatResult> {
    Ok(ergodic_averages(&[phi], x0, graph, s0, n)?[0])
}

/// Monte-Carlo estimate of `(1/(d̄ (2π)^B ε)) ∫ Φ_ε`, `d̄ = 𝓛/π`, for
/// several `Φ` on shared samples. `Φ_ε(x)` sums `Φ` over the crossings of
/// the flow segment `{φ_s(x) : |s| ≤ ε/2}`.
pub fn thickened_averages(
    phis: &[&dyn SurfaceFunction],
    epsilon: f64,
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    samples: usize,
    seed: u64,
) -> Result<Vec<StatResult>> {
    let max = TAU / graph.max_length();
    if !(epsilon > 0.0 && epsilon < max) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, {max}) (got {epsilon})")));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SAMPLES} samples (got {samples})")));
    }
    let b = graph.bond_count();
    let want_d = phis.iter().any(|p| p.needs_next_crossing());
    // a segment can only cross if its start has a phase within L_max ε of 2π
    let reach = graph.max_length() * epsilon * (1.0 + 1e-9) + 1e-12;
    let acc = sampling::monte_carlo(samples, seed, phis.len(), |rng| {
        let x = TorusPoint::random(b, rng);
        let start = flow_point(&x, -0.5 * epsilon, graph);
        let base = shifted(graph, s0, &start)?;
        let mut out = vec![0.0; phis.len()];
        let top = linalg::eigenphases(&base)?.into_iter().fold(0.0, f64::max);
        if TAU - top > reach {
            return Ok(out);
        }
        let flow = FlowOperator::new(graph, base);
        for c in flow.crossings(0.0, epsilon, true)? {
            let mut p = SurfacePoint::new(graph, s0, flow_point(&start, c.t, graph), c.multiplicity)?;
            if want_d {
                p = p.with_next_crossing(graph, s0)?;
            }
            for (k, phi) in phis.iter().enumerate() {
                out[k] += checked(*phi, graph, &p)?;
            }
        }
        Ok(out)
    })?;
    let scale = graph.total_length() / std::f64::consts::PI * epsilon;
    Ok((0..phis.len())
        .map(|k| StatResult {
            estimate: acc.mean(k) / scale,
            samples,
            stderr: acc.stderr(k) / scale,
            diagnostic: None,
            seed: Some(seed),
        })
        .collect())
}

pub fn thickened_average(
    phi: &dyn SurfaceFunction,
    epsilon: f64,
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    samples: usize,
    seed: u64,
) -> Result<StatResult> {
    Ok(thickened_averages(&[phi], epsilon, graph, s0, samples, seed)?[0])
}

/// Both sides of the crossing-average identity for one `Φ`.
#[derive(Debug, Clone, Serialize)]
pub struct PropositionRow {
    pub function: String,
    pub ergodic: Vec<StatResult>,
    pub thickened: Vec<StatResult>,
    /// `residuals[i][j] = |ergodic[i] − thickened[j]|`.
    pub residuals: Vec<Vec<f64>>,
}

impl PropositionRow {
    fn all(&self) -> Vec<StatResult> {
        self.ergodic.iter().chain(&self.thickened).copied().collect()
    }

    /// Largest pairwise difference over all estimates, relative to the
    /// pair's larger magnitude.
    pub fn max_relative_spread(&self) -> f64 {
        let all = self.all();
        let mut worst = 0.0f64;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let scale = all[i].estimate.abs().max(all[j].estimate.abs());
                if scale > 0.0 {
                    worst = worst.max((all[i].estimate - all[j].estimate).abs() / scale);
                }
            }
        }
        worst
    }

    /// Every pair agrees to `max(rel · scale, sigmas · combined stderr)`.
    pub fn pairwise_agree(&self, rel: f64, sigmas: f64) -> bool {
        let all = self.all();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let scale = all[i].estimate.abs().max(all[j].estimate.abs());
                let tol = (rel * scale).max(sigmas * all[i].combined_stderr(&all[j]));
                if (all[i].estimate - all[j].estimate).abs() >= tol {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionReport {
    pub x0s: Vec<Vec<f64>>,
    pub epsilons: Vec<f64>,
    pub crossings: usize,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<PropositionRow>,
}

impl PropositionReport {
    /// CSV of `(function, x0 id, epsilon, estimate, stderr, samples)`; the
    /// ergodic rows leave `epsilon` empty, the thickened ones `x0 id`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["function", "x0_id", "epsilon", "estimate", "stderr", "samples"])?;
        for row in &self.rows {
            for (i, r) in row.ergodic.iter().enumerate() {
                w.write_record([row.function.clone(), i.to_string(), String::new(), format!("{:.12e}", r.estimate), format!("{:.3e}", r.stderr), r.samples.to_string()])?;
            }
            for (eps, r) in self.epsilons.iter().zip(&row.thickened) {
                w.write_record([row.function.clone(), String::new(), eps.to_string(), format!("{:.12e}", r.estimate), format!("{:.3e}", r.stderr), r.samples.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Ergodic averages from every `x₀` against thickened averages at every
/// `ε`, for each `Φ`.
#[allow(clippy::too_many_arguments)]
pub fn proposition_residual(
    phis: &[&dyn SurfaceFunction],
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    x0s: &[TorusPoint],
    epsilons: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PropositionReport> {
    let ergodic: Vec<Vec<StatResult>> =
        x0s.iter().map(|x0| ergodic_averages(phis, x0, graph, s0, n)).collect::<Result<_>>()?;
    let thickened: Vec<Vec<StatResult>> = epsilons
        .iter()
        .map(|&eps| thickened_averages(phis, eps, graph, s0, samples, seed))
        .collect::<Result<_>>()?;
    let rows = phis
        .iter()
        .enumerate()
        .map(|(k, phi)| {
            let e: Vec<StatResult> = ergodic.iter().map(|r| r[k]).collect();
            let t: Vec<StatResult> = thickened.iter().map(|r| r[k]).collect();
            let residuals =
                e.iter().map(|a| t.iter().map(|b| (a.estimate - b.estimate).abs()).collect()).collect();
            PropositionRow { function: phi.name(), ergodic: e, thickened: t, residuals }
        })
        .collect();
    Ok(PropositionReport {
        x0s: x0s.iter().map(|x| x.coords().to_vec()).collect(),
        epsilons: epsilons.to_vec(),
        crossings: n,
        samples,
        seed,
        rows,
    })
}
