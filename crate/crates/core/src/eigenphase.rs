//! Eigenphases of the evolution operator at a point, their velocities,
//! spacing functions and continuous branches in `λ`.

use std::io::Write;

use crate::crossing::FlowOperator;
use crate::error::{Error, Result};
use crate::graph::{self, BondScatteringMatrix, MetricGraph};
use crate::linalg::{self, CMatrix, Eigensystem, C64, TAU};

/// Input matrices must be unitary to this tolerance.
pub const FRAME_UNITARY_TOL: f64 = 1e-10;

/// Where a frame was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum FramePoint {
    Lambda(f64),
    Torus(Vec<f64>),
    Unspecified,
}

/// Sorted eigenphases with eigenvectors and velocities.
#[derive(Debug, Clone)]
pub struct EigenphaseFrame {
    pub point: FramePoint,
    /// In `(0, 2π]`, decreasing.
    pub phases: Vec<f64>,
    /// Column `j` belongs to `phases[j]`.
    pub vectors: CMatrix,
    pub velocities: Vec<f64>,
}

/// Diagonalises a unitary `2B x 2B` matrix.
pub fn eigenphase_frame(u: &CMatrix, graph: &MetricGraph) -> Result<EigenphaseFrame> {
    if u.nrows() != graph.dim() || u.ncols() != graph.dim() {
        return Err(Error::DimensionMismatch { expected: graph.dim(), found: u.nrows() });
    }
    let deviation = linalg::unitarity_deviation(u);
    if deviation > FRAME_UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    frame_unchecked(u, graph, FramePoint::Unspecified)
}

pub(crate) fn frame_unchecked(u: &CMatrix, graph: &MetricGraph, point: FramePoint) -> Result<EigenphaseFrame> {
    let doubled = graph.doubled_lengths();
    let mut es = Eigensystem::of_unitary(u)?;
    es.canonicalize(&doubled);
    let velocities = es.velocities(&doubled);
    Ok(EigenphaseFrame { point, phases: es.phases, vectors: es.vectors, velocities })
}

impl EigenphaseFrame {
    pub fn at_lambda(graph: &MetricGraph, s0: &BondScatteringMatrix, lambda: f64) -> Result<Self> {
        let u = graph::evolution_operator(graph, s0, lambda);
        frame_unchecked(&u, graph, FramePoint::Lambda(lambda))
    }

    /// Frame of `e^{ix} S₀`.
    pub fn at_torus(graph: &MetricGraph, s0: &BondScatteringMatrix, x: &[f64]) -> Result<Self> {
        if x.len() != graph.bond_count() {
            return Err(Error::DimensionMismatch { expected: graph.bond_count(), found: x.len() });
        }
        let u = graph::shifted_operator(graph, s0.matrix(), x);
        frame_unchecked(&u, graph, FramePoint::Torus(x.to_vec()))
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// `max_j ‖U ψ_j − e^{iθ_j} ψ_j‖`.
    pub fn residual(&self, u: &CMatrix) -> f64 {
        (0..self.dim())
            .map(|j| {
                let v = self.vectors.column(j).into_owned();
                (u * &v - v * C64::from_polar(1.0, self.phases[j])).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|V†V − I|`.
    pub fn orthonormality_deviation(&self) -> f64 {
        linalg::unitarity_deviation(&self.vectors.adjoint())
    }
}

/// `σ_j = θ̂_j − θ̂_{j+1}`, closed by the wrap-around spacing
/// `σ_{2B} = θ̂_{2B} + 2π − θ̂_1`.
pub fn spacings_from_phases(phases_desc: &[f64]) -> Vec<f64> {
    let n = phases_desc.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n.saturating_sub(1) {
        out.push(phases_desc[j] - phases_desc[j + 1]);
    }
    if n > 0 {
        out.push(phases_desc[n - 1] + TAU - phases_desc[0]);
    }
    out
}

pub fn spacing_functions(frame: &EigenphaseFrame) -> Vec<f64> {
    spacings_from_phases(&frame.phases)
}

/// `⟨ψ_j|L|ψ_j⟩` for every eigenvector of the frame.
pub fn phase_velocity(frame: &EigenphaseFrame, graph: &MetricGraph) -> Vec<f64> {
    linalg::Eigensystem { phases: frame.phases.clone(), vectors: frame.vectors.clone() }
        .velocities(&graph.doubled_lengths())
}

/// Continuous eigenphase branches on a `λ` grid.
#[derive(Debug, Clone)]
pub struct BranchTrack {
    pub lambdas: Vec<f64>,
    /// `phases[node][branch]`, unwrapped.
    pub phases: Vec<Vec<f64>>,
    /// `vectors[node]`, column `branch`.
    pub vectors: Vec<CMatrix>,
}

impl BranchTrack {
    pub fn branch_count(&self) -> usize {
        self.phases.first().map_or(0, Vec::len)
    }

    /// Velocities `⟨ψ|L|ψ⟩` of the stored vectors at one node.
    pub fn velocities_at(&self, node: usize, graph: &MetricGraph) -> Vec<f64> {
        let doubled = graph.doubled_lengths();
        let v = &self.vectors[node];
        (0..v.ncols()).map(|j| linalg::diagonal_expectation(v.column(j).iter(), &doubled)).collect()
    }

    /// CSV with columns `lambda, theta_1, ..., theta_2B`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["lambda".to_string()];
        header.extend((1..=self.branch_count()).map(|j| format!("theta_{j}")));
        w.write_record(&header)?;
        for (lambda, row) in self.lambdas.iter().zip(&self.phases) {
            let mut rec = vec![format_float(*lambda)];
            rec.extend(row.iter().map(|p| format_float(*p)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.17e}")
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Base step; must not exceed `π / L_max`.
    pub step: f64,
    /// Halving stops here and matching is declared failed.
    pub min_step: f64,
    /// Smallest acceptable overlap weight of a matched branch.
    pub min_overlap: f64,
    /// Slack on the velocity bounds for a single increment.
    pub increment_tol: f64,
}

impl TrackOptions {
    pub fn with_step(step: f64) -> Self {
        TrackOptions { step, min_step: 1e-9, min_overlap: 0.5, increment_tol: 1e-9 }
    }
}

/// Follows all `2B` eigenphases from `λ_start` to `λ_end`.
pub fn track_branches(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    lambda_start: f64,
    lambda_end: f64,
    options: TrackOptions,
) -> Result<BranchTrack> {
    if !(lambda_end > lambda_start) {
        return Err(Error::InvalidParameter(format!(
            "track needs lambda_start < lambda_end (got {lambda_start}, {lambda_end})"
        )));
    }
    let max = std::f64::consts::PI / graph.max_length();
    if !(options.step > 0.0) || options.step > max {
        return Err(Error::StepTooCoarse { step: options.step, max });
    }
    let l_min = graph.min_length();
    let l_max = graph.max_length();
    let doubled = graph.doubled_lengths();

    let first = EigenphaseFrame::at_lambda(graph, s0, lambda_start)?;
    let mut track = BranchTrack {
        lambdas: vec![lambda_start],
        phases: vec![first.phases.clone()],
        vectors: vec![first.vectors.clone()],
    };
    let mut velocities = first.velocities.clone();
    let mut lambda = lambda_start;
    let mut h = options.step;
    while lambda < lambda_end {
        let target = if lambda + h >= lambda_end { lambda_end } else { lambda + h };
        let delta = target - lambda;
        let frame = EigenphaseFrame::at_lambda(graph, s0, target)?;
        let prev_phases = track.phases.last().unwrap();
        let prev_vectors = track.vectors.last().unwrap();
        match match_branches(prev_phases, prev_vectors, &velocities, &frame, delta, l_min, l_max, &options) {
            Some(assignment) => {
                let n = frame.dim();
                let mut phases = Vec::with_capacity(n);
                let mut vectors = CMatrix::zeros(n, n);
                for (i, &(j, increment)) in assignment.iter().enumerate() {
                    phases.push(prev_phases[i] + increment);
                    vectors.set_column(i, &frame.vectors.column(j));
                }
                velocities = (0..n)
                    .map(|i| linalg::diagonal_expectation(vectors.column(i).iter(), &doubled))
                    .collect();
                track.lambdas.push(target);
                track.phases.push(phases);
                track.vectors.push(vectors);
                lambda = target;
                h = (2.0 * h).min(options.step);
            }
            None => {
                h *= 0.5;
                if h < options.min_step {
                    return Err(Error::BranchMatching { lambda });
                }
            }
        }
    }
    Ok(track)
}

/// For every previous branch `i`, the new column `j` and the unwrapped
/// increment. `None` when the step has to be refined.
#[allow(clippy::too_many_arguments)]
fn match_branches(
    prev_phases: &[f64],
    prev_vectors: &CMatrix,
    prev_velocities: &[f64],
    frame: &EigenphaseFrame,
    delta: f64,
    l_min: f64,
    l_max: f64,
    options: &TrackOptions,
) -> Option<Vec<(usize, f64)>> {
    let n = frame.dim();
    let clusters = linalg::phase_clusters(&frame.phases, linalg::DEGENERACY_TOL);
    let mut cluster_of = vec![0usize; n];
    for (c, members) in clusters.iter().enumerate() {
        for &j in members {
            cluster_of[j] = c;
        }
    }
    let overlap = prev_vectors.adjoint() * &frame.vectors;
    let mut candidates = Vec::with_capacity(n * n);
    for i in 0..n {
        let predicted = prev_phases[i] + prev_velocities[i] * delta;
        for j in 0..n {
            let score: f64 = clusters[cluster_of[j]].iter().map(|&k| overlap[(i, k)].norm_sqr()).sum();
            let miss = linalg::circular_distance(predicted, frame.phases[j]);
            candidates.push((score, miss, i, j));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut taken_prev = vec![false; n];
    let mut taken_new = vec![false; n];
    let mut assignment = vec![(usize::MAX, 0.0); n];
    let mut left = n;
    for (score, _, i, j) in candidates {
        if left == 0 {
            break;
        }
        if taken_prev[i] || taken_new[j] {
            continue;
        }
        if score < options.min_overlap {
            return None;
        }
        let increment = (frame.phases[j] - prev_phases[i]).rem_euclid(TAU);
        let lo = l_min * delta - options.increment_tol;
        let hi = l_max * delta + options.increment_tol;
        // a branch that barely moved can land just below a full turn
        let increment = if increment > TAU - options.increment_tol && lo <= 0.0 { increment - TAU } else { increment };
        if increment < lo || increment > hi {
            return None;
        }
        taken_prev[i] = true;
        taken_new[j] = true;
        assignment[i] = (j, increment);
        left -= 1;
    }
    Some(assignment)
}

/// Central difference of tracked branches: for every branch at `λ`,
/// `(wrapped phase, ⟨ψ|L|ψ⟩, (θ(λ+h) − θ(λ−h)) / 2h)`.
pub fn finite_difference_velocities(
    graph: &MetricGraph,
    s0: &BondScatteringMatrix,
    lambda: f64,
    h: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let track = track_branches(graph, s0, lambda - h, lambda + h, TrackOptions::with_step(h))?;
    let last = track.lambdas.len() - 1;
    let mid = track
        .lambdas
        .iter()
        .position(|&l| (l - lambda).abs() <= 1e-3 * h)
        .ok_or(Error::BranchMatching { lambda })?;
    let velocities = track.velocities_at(mid, graph);
    let span = track.lambdas[last] - track.lambdas[0];
    Ok((0..track.branch_count())
        .map(|j| {
            let slope = (track.phases[last][j] - track.phases[0][j]) / span;
            (linalg::wrap_phase(track.phases[mid][j]), velocities[j], slope)
        })
        .collect())
}

/// `d(x)`: the first `t > 0` at which `e^{i(x + tL)} S₀` has eigenvalue 1.
pub fn next_crossing_time(graph: &MetricGraph, s0: &BondScatteringMatrix, x: &[f64]) -> Result<f64> {
    if x.len() != graph.bond_count() {
        return Err(Error::DimensionMismatch { expected: graph.bond_count(), found: x.len() });
    }
    let base = graph::shifted_operator(graph, s0.matrix(), x);
    let flow = FlowOperator::new(graph, base);
    // every branch wraps within 2π / L_min
    let horizon = TAU / graph.min_length() * (1.0 + 1e-9) + 1e-9;
    flow.first_crossing(0.0, horizon, true)?
        .map(|c| c.t)
        .ok_or(Error::CountMismatch { t: horizon, fraction: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::kirchhoff_s0;
    use std::f64::consts::PI;

    fn star3() -> MetricGraph {
        MetricGraph::star(&[1.0, 1.05, 0.95]).unwrap()
    }

    #[test]
    fn swap_phases() {
        let g = MetricGraph::interval(1.0).unwrap();
        let s0 = kirchhoff_s0(&g);
        let f = eigenphase_frame(s0.matrix(), &g).unwrap();
        assert_eq!(f.phases.len(), 2);
        assert!((f.phases[0] - TAU).abs() < 1e-14);
        assert!((f.phases[1] - PI).abs() < 1e-14);
        assert_eq!(spacing_functions(&f).len(), 2);
        for s in spacing_functions(&f) {
            assert!((s - PI).abs() < 1e-14);
        }
    }

    #[test]
    fn interval_scalar_shift() {
        let g = MetricGraph::interval(PI).unwrap();
        let f = EigenphaseFrame::at_lambda(&g, &kirchhoff_s0(&g), 0.5).unwrap();
        assert!((f.phases[0] - 1.5 * PI).abs() < 1e-13);
        assert!((f.phases[1] - 0.5 * PI).abs() < 1e-13);
        for v in &f.velocities {
            assert!((v - PI).abs() < 1e-13);
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let g = MetricGraph::interval(1.0).unwrap();
        let m = kirchhoff_s0(&g).matrix() * C64::new(1.0 + 1e-8, 0.0);
        assert!(matches!(eigenphase_frame(&m, &g), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn equilateral_velocities_and_spacing_sum() {
        let g = MetricGraph::star(&[1.3, 1.3, 1.3]).unwrap();
        let f = EigenphaseFrame::at_lambda(&g, &kirchhoff_s0(&g), 0.77).unwrap();
        for v in &f.velocities {
            assert!((v - 1.3).abs() < 1e-12);
        }
        let total: f64 = spacing_functions(&f).iter().sum();
        assert!((total - TAU).abs() < 1e-12);
    }

    #[test]
    fn full_degeneracy_spacings() {
        let s = spacings_from_phases(&[1.0, 1.0, 1.0]);
        assert_eq!(s, vec![0.0, 0.0, TAU]);
    }

    #[test]
    fn frame_residual_and_velocity_bounds() {
        let g = star3();
        let s0 = kirchhoff_s0(&g);
        let u = graph::evolution_operator(&g, &s0, 1.7);
        let f = eigenphase_frame(&u, &g).unwrap();
        assert!(f.residual(&u) < 1e-10);
        assert!(f.orthonormality_deviation() < 1e-10);
        for v in phase_velocity(&f, &g) {
            assert!((0.95 - 1e-10..=1.05 + 1e-10).contains(&v));
        }
        for w in f.phases.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn interval_track_has_slope_pi() {
        let g = MetricGraph::interval(PI).unwrap();
        let track = track_branches(&g, &kirchhoff_s0(&g), 0.0, 2.0, TrackOptions::with_step(0.25)).unwrap();
        let last = track.lambdas.len() - 1;
        for j in 0..2 {
            let slope = (track.phases[last][j] - track.phases[0][j]) / 2.0;
            assert!((slope - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_step_rejected() {
        let g = star3();
        let err = track_branches(&g, &kirchhoff_s0(&g), 0.0, 1.0, TrackOptions::with_step(3.1)).unwrap_err();
        assert!(matches!(err, Error::StepTooCoarse { .. }));
    }

    #[test]
    fn interval_next_crossing() {
        let g = MetricGraph::interval(PI).unwrap();
        let d = next_crossing_time(&g, &kirchhoff_s0(&g), &[0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-10, "{d}");
    }

    #[test]
    fn equilateral_next_crossing_is_first_spacing_over_length() {
        let g = MetricGraph::star(&[0.8, 0.8, 0.8]).unwrap();
        let s0 = kirchhoff_s0(&g);
        let x = [0.3, 2.0, 4.4];
        let f = EigenphaseFrame::at_torus(&g, &s0, &x).unwrap();
        let d = next_crossing_time(&g, &s0, &x).unwrap();
        let expected = (TAU - f.phases[0]) / 0.8;
        assert!((d - expected).abs() < 1e-10, "{d} vs {expected}");
    }
}
