//! Locating the times at which an eigenphase of `e^{itL} S` passes through
//! a multiple of `2π`.
//!
//! Two exact facts drive the solver:
//!
//! * `det e^{itL} S = e^{2i𝓛t} det S`, so the unwrapped eigenphases always
//!   sum to `arg det S + 2𝓛t`. Comparing that with the sum of the phases
//!   wrapped into `(0, 2π]` counts, with multiplicity, how many branches
//!   wrapped between two times. No eigenvector matching is needed.
//! * `Z(t) = det(I - U(t)) e^{-i(arg det S + 2𝓛t)/2}` is real, analytic and
//!   changes sign at every simple crossing.
//!
//! Intervals are split on the count until each holds one crossing, which is
//! then refined on `Z` by a bracketed Illinois iteration. Coincident
//! crossings are resolved by count bisection alone.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{self, CMatrix, C64, TAU};

/// At the start of a scan, phases this close below `2π` count as having
/// crossed already.
pub const START_TOL: f64 = 1e-9;
/// Count bisection stops once a bracket is this narrow.
pub const BISECT_TOL: f64 = 1e-10;
/// Crossings closer than this are one crossing of higher multiplicity.
pub const CLUSTER_TOL: f64 = 1e-9;

/// A time at which `multiplicity` eigenphases sit at `2π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub multiplicity: usize,
}

/// The one-parameter family `t ↦ e^{itL} S`.
#[derive(Debug, Clone)]
pub struct FlowOperator {
    base: CMatrix,
    lengths: Vec<f64>,
    doubled: Vec<f64>,
    base_det_arg: f64,
    l_max: f64,
    total_length: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    sum: f64,
}

impl FlowOperator {
    pub fn new(graph: &MetricGraph, base: CMatrix) -> Self {
        let det = base.determinant();
        FlowOperator {
            base,
            lengths: graph.lengths().to_vec(),
            doubled: graph.doubled_lengths(),
            base_det_arg: det.im.atan2(det.re),
            l_max: graph.max_length(),
            total_length: graph.total_length(),
        }
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let phases: Vec<f64> = self.doubled.iter().map(|l| t * l).collect();
        linalg::phase_rows(&self.base, &phases)
    }

    /// Growth of the unwrapped phase sum from time 0 to `t`, built from the
    /// same products `t * L_b` that enter [`FlowOperator::at`].
    fn advance(&self, t: f64) -> f64 {
        2.0 * self.lengths.iter().map(|l| t * l).sum::<f64>()
    }

    fn wrapped_sum(&self, t: f64, at_start: bool) -> Result<f64> {
        let phases = linalg::eigenphases(&self.at(t))?;
        Ok(phases
            .iter()
            .map(|&p| if at_start && p > TAU - START_TOL { p - TAU } else { p })
            .sum())
    }

    /// Real secular function; zero exactly when `U(t)` has eigenvalue 1.
    pub fn secular(&self, t: f64) -> f64 {
        let n = self.base.nrows();
        let m = CMatrix::identity(n, n) - self.at(t);
        let rot = C64::from_polar(1.0, -0.5 * (self.base_det_arg + self.advance(t)));
        (m.determinant() * rot).re
    }

    fn node(&self, t: f64, at_start: bool) -> Result<Node> {
        Ok(Node { t, sum: self.wrapped_sum(t, at_start)? })
    }

    fn count(&self, a: Node, b: Node) -> Result<usize> {
        let raw = (a.sum - b.sum + self.advance(b.t) - self.advance(a.t)) / TAU;
        let k = raw.round();
        let fraction = (raw - k).abs();
        if fraction > 0.25 || k < 0.0 {
            return Err(Error::CountMismatch { t: b.t, fraction });
        }
        Ok(k as usize)
    }

    fn grid_step(&self) -> f64 {
        (std::f64::consts::PI / (2.0 * self.total_length)).min(std::f64::consts::PI / self.l_max)
    }

    /// Number of crossings in `(t0, t1]`, with multiplicity.
    pub fn count_crossings(&self, t0: f64, t1: f64, adjust_start: bool) -> Result<usize> {
        let a = self.node(t0, adjust_start)?;
        let b = self.node(t1, false)?;
        self.count(a, b)
    }

    /// All crossings in `(t0, t1]`. With `adjust_start`, branches sitting
    /// within [`START_TOL`] below `2π` at `t0` are treated as already past
    /// the cut, so a scan that starts on the surface does not report its
    /// own starting point.
    pub fn crossings(&self, t0: f64, t1: f64, adjust_start: bool) -> Result<Vec<Crossing>> {
        if !(t1 > t0) {
            return Ok(Vec::new());
        }
        let n = ((t1 - t0) / self.grid_step()).ceil().max(1.0) as usize;
        let times: Vec<f64> =
            (0..=n).map(|k| if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 }).collect();
        let nodes: Vec<Node> = times
            .par_iter()
            .enumerate()
            .map(|(k, &t)| self.node(t, adjust_start && k == 0))
            .collect::<Result<_>>()?;
        let per_interval: Vec<Vec<Crossing>> = nodes
            .par_windows(2)
            .map(|w| {
                let mut out = Vec::new();
                let k = self.count(w[0], w[1])?;
                self.isolate(w[0], w[1], k, &mut out, false)?;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(merge_clusters(per_interval.into_iter().flatten()))
    }

    /// The first crossing in `(t0, t1]`, if any.
    pub fn first_crossing(&self, t0: f64, t1: f64, adjust_start: bool) -> Result<Option<Crossing>> {
        if !(t1 > t0) {
            return Ok(None);
        }
        let n = ((t1 - t0) / self.grid_step()).ceil().max(1.0) as usize;
        let mut prev = self.node(t0, adjust_start)?;
        for k in 1..=n {
            let t = if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 };
            let next = self.node(t, false)?;
            let count = self.count(prev, next)?;
            if count > 0 {
                let mut out = Vec::new();
                self.isolate(prev, next, count, &mut out, true)?;
                // include anything within the cluster tolerance of the first hit
                let first = out[0];
                let hi = (first.t + CLUSTER_TOL).min(next.t);
                if hi > first.t {
                    let mut rest = Vec::new();
                    let a = Node { t: first.t + 0.5 * BISECT_TOL, sum: self.wrapped_sum(first.t + 0.5 * BISECT_TOL, false)? };
                    let b = self.node(hi, false)?;
                    let extra = self.count(a, b)?;
                    self.isolate(a, b, extra, &mut rest, false)?;
                    out.extend(rest);
                }
                return Ok(merge_clusters(out).into_iter().next());
            }
            prev = next;
        }
        Ok(None)
    }

    fn isolate(&self, a: Node, b: Node, k: usize, out: &mut Vec<Crossing>, first_only: bool) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        if b.t - a.t <= BISECT_TOL {
            out.push(Crossing { t: 0.5 * (a.t + b.t), multiplicity: k });
            return Ok(());
        }
        if k == 1 {
            let za = self.secular(a.t);
            let zb = self.secular(b.t);
            if za * zb < 0.0 {
                out.push(Crossing { t: self.illinois(a.t, za, b.t, zb), multiplicity: 1 });
                return Ok(());
            }
        }
        let mid = 0.5 * (a.t + b.t);
        let m = self.node(mid, false)?;
        let left = self.count(a, m)?;
        let right = self.count(m, b)?;
        if left + right != k {
            return Err(Error::CountMismatch { t: mid, fraction: 0.0 });
        }
        self.isolate(a, m, left, out, first_only)?;
        if first_only && !out.is_empty() {
            return Ok(());
        }
        self.isolate(m, b, right, out, first_only)
    }

    /// Bracketed regula falsi with the Illinois modification.
    fn illinois(&self, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> f64 {
        let tol = 4.0 * f64::EPSILON * a.abs().max(b.abs()) + 1e-14;
        for _ in 0..200 {
            if (b - a).abs() <= tol {
                break;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut c = b - fb * (b - a) / (fb - fa);
            if !(c > lo && c < hi) {
                c = 0.5 * (a + b);
            }
            let fc = self.secular(c);
            if fc == 0.0 {
                return c;
            }
            if fc * fb < 0.0 {
                a = b;
                fa = fb;
            } else {
                fa *= 0.5;
            }
            b = c;
            fb = fc;
        }
        b
    }
}

/// Sorts crossings and fuses those within [`CLUSTER_TOL`] of each other.
pub fn merge_clusters(crossings: impl IntoIterator<Item = Crossing>) -> Vec<Crossing> {
    let mut all: Vec<Crossing> = crossings.into_iter().collect();
    all.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut out: Vec<Crossing> = Vec::with_capacity(all.len());
    for c in all {
        match out.last_mut() {
            Some(last) if c.t - last.t < CLUSTER_TOL => {
                let total = last.multiplicity + c.multiplicity;
                last.t = (last.t * last.multiplicity as f64 + c.t * c.multiplicity as f64) / total as f64;
                last.multiplicity = total;
            }
            _ => out.push(c),
        }
    }
    out
}
