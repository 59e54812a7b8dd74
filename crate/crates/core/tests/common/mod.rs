//! Independent oracles shared by the integration tests. Nothing here goes
//! through the crossing solver or the eigenphase code.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use qgraph::MetricGraph;

pub type C = Complex<f64>;

/// Kirchhoff bond scattering matrix built straight from the definition.
pub fn kirchhoff(graph: &MetricGraph) -> DMatrix<C> {
    let n = graph.dim();
    DMatrix::from_fn(n, n, |into, from| {
        let (_, head) = graph.directed_bond(from);
        let (tail, _) = graph.directed_bond(into);
        if head != tail {
            return C::new(0.0, 0.0);
        }
        let d = graph.degree(head) as f64;
        let back = if into == graph.reverse(from) { 1.0 } else { 0.0 };
        C::new(2.0 / d - back, 0.0)
    })
}

/// `e^{iλL} S` with `L` the doubled length vector.
pub fn evolution(graph: &MetricGraph, s: &DMatrix<C>, lambda: f64) -> DMatrix<C> {
    let b = graph.bond_count();
    let mut u = s.clone();
    for i in 0..2 * b {
        let z = C::from_polar(1.0, lambda * graph.lengths()[i % b]);
        for j in 0..2 * b {
            u[(i, j)] *= z;
        }
    }
    u
}

pub fn singular_values(graph: &MetricGraph, s: &DMatrix<C>, lambda: f64) -> Vec<f64> {
    let n = graph.dim();
    let m = DMatrix::<C>::identity(n, n) - evolution(graph, s, lambda);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

fn smallest_sv(graph: &MetricGraph, s: &DMatrix<C>, lambda: f64) -> f64 {
    singular_values(graph, s, lambda)[0]
}

/// Roots of `det(I − U(λ))` on `(0, λ_max]` from a uniform scan of the
/// smallest singular value of `I − U`, refined by golden-section search.
/// Multiplicity is the number of singular values below `1e-6` at the root.
pub fn dense_scan(graph: &MetricGraph, lambda_max: f64, step: f64) -> Vec<(f64, usize)> {
    let s = kirchhoff(graph);
    let n = (lambda_max / step).ceil() as usize + 1;
    let g: Vec<f64> = (0..=n).map(|i| smallest_sv(graph, &s, i as f64 * step)).collect();
    let threshold = 4.0 * step * graph.max_length();
    let mut roots = Vec::new();
    for i in 1..n {
        if !(g[i] <= g[i - 1] && g[i] < g[i + 1] && g[i] < threshold) {
            continue;
        }
        let (mut a, mut b) = ((i - 1) as f64 * step, (i + 1) as f64 * step);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (smallest_sv(graph, &s, c), smallest_sv(graph, &s, d));
        while b - a > 1e-13 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = smallest_sv(graph, &s, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = smallest_sv(graph, &s, d);
            }
        }
        let root = 0.5 * (a + b);
        let sv = singular_values(graph, &s, root);
        if sv[0] < 1e-9 && root > 1e-8 && root <= lambda_max {
            roots.push((root, sv.iter().filter(|&&x| x < 1e-6).count()));
        }
    }
    roots
}

/// Star with Kirchhoff centre and free ends: eigenvalues are the zeros of
/// `Σ_j sin(λL_j) Π_{i≠j} cos(λL_i)`.
pub fn star_secular(lengths: &[f64], lambda: f64) -> f64 {
    (0..lengths.len())
        .map(|j| {
            let mut p = (lambda * lengths[j]).sin();
            for (i, l) in lengths.iter().enumerate() {
                if i != j {
                    p *= (lambda * l).cos();
                }
            }
            p
        })
        .sum()
}

/// Sign changes of [`star_secular`] on a grid, bisected to `1e-13`.
pub fn star_roots(lengths: &[f64], lambda_max: f64, step: f64) -> Vec<f64> {
    let f = |x: f64| star_secular(lengths, x);
    let n = (lambda_max / step).ceil() as usize;
    let mut roots = Vec::new();
    let mut prev = f(step * 0.5);
    for i in 1..=n {
        let x1 = (i as f64 * step + 0.5 * step).min(lambda_max);
        let x0 = (i - 1) as f64 * step + 0.5 * step;
        if x0 >= lambda_max {
            break;
        }
        let cur = f(x1);
        if prev == 0.0 || prev.signum() != cur.signum() {
            let (mut a, mut b) = (x0, x1);
            let fa = f(a);
            while b - a > 1e-13 {
                let m = 0.5 * (a + b);
                if f(m).signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

/// Eigenphases of a unitary matrix in `(0, 2π]`, decreasing.
pub fn phases(u: &DMatrix<C>) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut p: Vec<f64> = nalgebra::Schur::new(u.clone())
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .map(|z| {
            let a = z.arg().rem_euclid(tau);
            if a <= 0.0 {
                tau
            } else {
                a
            }
        })
        .collect();
    p.sort_by(|a, b| b.total_cmp(a));
    p
}
