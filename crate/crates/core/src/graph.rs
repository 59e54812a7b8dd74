//! Metric graphs, vertex scattering matrices and the evolution operator.
//!
//! Directed bonds are indexed `0..2B`: bond `b` (as listed) runs forward
//! `from -> to` at index `b` and backward `to -> from` at index `b + B`.
//! Matrices act on coefficient vectors indexed by directed bonds, and the
//! entry at `(row, col)` scatters *from* directed bond `col` *into*
//! directed bond `row`. It can only be non-zero when `col` ends at the
//! vertex where `row` starts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Unitarity tolerance used when validating scattering matrices.
pub const UNITARY_TOL: f64 = 1e-12;

/// One bond of a graph description: endpoints by vertex name and a length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondSpec {
    pub from: String,
    pub to: String,
    pub length: f64,
}

/// Plain description of a graph, as read from a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDescription {
    pub vertices: Vec<String>,
    pub bonds: Vec<BondSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    bonds: Vec<(usize, usize)>,
    lengths: Vec<f64>,
    degrees: Vec<usize>,
    warnings: Vec<String>,
}

/// Validates a description and fixes the directed-bond ordering.
pub fn build_graph(spec: &GraphDescription) -> Result<MetricGraph> {
    if spec.bonds.is_empty() {
        return Err(Error::InvalidGraph("empty bond list".into()));
    }
    let mut vertices: Vec<String> = Vec::with_capacity(spec.vertices.len());
    for v in &spec.vertices {
        if vertices.contains(v) {
            return Err(Error::InvalidGraph(format!("duplicate vertex '{v}'")));
        }
        vertices.push(v.clone());
    }
    let index_of = |name: &str| {
        vertices
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::InvalidGraph(format!("bond references unknown vertex '{name}'")))
    };
    let mut bonds = Vec::with_capacity(spec.bonds.len());
    let mut lengths = Vec::with_capacity(spec.bonds.len());
    let mut degrees = vec![0usize; vertices.len()];
    let mut warnings = Vec::new();
    for (b, bond) in spec.bonds.iter().enumerate() {
        if !(bond.length > 0.0) || !bond.length.is_finite() {
            return Err(Error::InvalidGraph(format!(
                "non-positive length {} on bond {}",
                bond.length,
                b + 1
            )));
        }
        let u = index_of(&bond.from)?;
        let v = index_of(&bond.to)?;
        if u == v {
            warnings.push(format!(
                "bond {} is a loop at '{}': loops can carry persistent eigenvalues of multiplicity two",
                b + 1,
                bond.from
            ));
        }
        degrees[u] += 1;
        degrees[v] += 1;
        bonds.push((u, v));
        lengths.push(bond.length);
    }
    if let Some(i) = degrees.iter().position(|&d| d == 0) {
        return Err(Error::InvalidGraph(format!("vertex '{}' has no bonds", vertices[i])));
    }
    Ok(MetricGraph { vertices, bonds, lengths, degrees, warnings })
}

impl MetricGraph {
    /// Graph on vertices `0..n` named by their index.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let vertices: Vec<String> = (0..n_vertices).map(|i| format!("v{i}")).collect();
        let mut bonds = Vec::with_capacity(edges.len());
        for &(u, v, length) in edges {
            let name = |i: usize| {
                vertices.get(i).cloned().ok_or_else(|| {
                    Error::InvalidGraph(format!("bond references unknown vertex index {i}"))
                })
            };
            bonds.push(BondSpec { from: name(u)?, to: name(v)?, length });
        }
        build_graph(&GraphDescription { vertices, bonds })
    }

    /// A single bond of length `length` between two degree-one vertices.
    pub fn interval(length: f64) -> Result<Self> {
        Self::from_edges(2, &[(0, 1, length)])
    }

    /// Star graph: a centre (vertex 0) joined to one tip per length.
    pub fn star(lengths: &[f64]) -> Result<Self> {
        let edges: Vec<_> = lengths.iter().enumerate().map(|(i, &l)| (0, i + 1, l)).collect();
        Self::from_edges(lengths.len() + 1, &edges)
    }

    /// Same topology with new bond lengths.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != self.bond_count() {
            return Err(Error::DimensionMismatch { expected: self.bond_count(), found: lengths.len() });
        }
        let bonds = self
            .bonds
            .iter()
            .zip(lengths)
            .map(|(&(u, v), &length)| BondSpec {
                from: self.vertices[u].clone(),
                to: self.vertices[v].clone(),
                length,
            })
            .collect();
        build_graph(&GraphDescription { vertices: self.vertices.clone(), bonds })
    }

    pub fn description(&self) -> GraphDescription {
        GraphDescription {
            vertices: self.vertices.clone(),
            bonds: self
                .bonds
                .iter()
                .zip(&self.lengths)
                .map(|(&(u, v), &length)| BondSpec {
                    from: self.vertices[u].clone(),
                    to: self.vertices[v].clone(),
                    length,
                })
                .collect(),
        }
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.degrees[vertex]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of bonds `B`.
    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Number of directed bonds `2B`.
    pub fn dim(&self) -> usize {
        2 * self.bonds.len()
    }

    /// Endpoints `(tail, head)` of directed bond `i`.
    pub fn directed_bond(&self, i: usize) -> (usize, usize) {
        let b = self.bond_count();
        if i < b {
            self.bonds[i]
        } else {
            let (u, v) = self.bonds[i - b];
            (v, u)
        }
    }

    /// Index of the same bond traversed the other way.
    pub fn reverse(&self, i: usize) -> usize {
        (i + self.bond_count()) % self.dim()
    }

    /// Lengths repeated over forward and backward directed bonds.
    pub fn doubled_lengths(&self) -> Vec<f64> {
        self.lengths.iter().chain(&self.lengths).copied().collect()
    }

    /// Total length `𝓛`.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Mean bond length `L̄ = 𝓛 / B`.
    pub fn mean_length(&self) -> f64 {
        self.total_length() / self.bond_count() as f64
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    /// Whether scattering from directed bond `from` into `into` is allowed.
    pub fn connects(&self, from: usize, into: usize) -> bool {
        self.directed_bond(from).1 == self.directed_bond(into).0
    }

    /// Stable identifier of topology and lengths (FNV-1a over the bits).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (&(u, v), &l) in self.bonds.iter().zip(&self.lengths) {
            eat(u as u64);
            eat(v as u64);
            eat(l.to_bits());
        }
        h
    }
}

/// A validated `2B x 2B` unitary respecting the connectivity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BondScatteringMatrix {
    matrix: CMatrix,
}

impl BondScatteringMatrix {
    /// Accepts a user-supplied matrix if it passes [`validate_unitary`].
    pub fn new(graph: &MetricGraph, matrix: CMatrix) -> Result<Self> {
        let report = validate_unitary(&matrix, graph, UNITARY_TOL)?;
        if !report.mask_violations.is_empty() {
            return Err(Error::MaskViolation { count: report.mask_violations.len() });
        }
        if report.max_deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation: report.max_deviation });
        }
        Ok(BondScatteringMatrix { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Kirchhoff (Neumann) vertex conditions: transmission `2/d`, reflection
/// `2/d - 1` at a vertex of degree `d`.
pub fn kirchhoff_s0(graph: &MetricGraph) -> BondScatteringMatrix {
    let n = graph.dim();
    let mut m = CMatrix::zeros(n, n);
    for from in 0..n {
        let vertex = graph.directed_bond(from).1;
        let d = graph.degree(vertex) as f64;
        for into in 0..n {
            if !graph.connects(from, into) {
                continue;
            }
            let reflect = if into == graph.reverse(from) { 1.0 } else { 0.0 };
            m[(into, from)] = C64::new(2.0 / d - reflect, 0.0);
        }
    }
    BondScatteringMatrix { matrix: m }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Largest entry of `|S S† - I|`.
    pub max_deviation: f64,
    /// `(row, col)` entries that are non-zero although the bonds do not meet.
    pub mask_violations: Vec<(usize, usize)>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tol && self.mask_violations.is_empty()
    }
}

pub fn validate_unitary(matrix: &CMatrix, graph: &MetricGraph, tol: f64) -> Result<ValidationReport> {
    let n = graph.dim();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
    }
    let max_deviation = linalg::unitarity_deviation(matrix);
    let mut mask_violations = Vec::new();
    for into in 0..n {
        for from in 0..n {
            if !graph.connects(from, into) && matrix[(into, from)].norm() > tol {
                mask_violations.push((into, from));
            }
        }
    }
    Ok(ValidationReport { max_deviation, mask_violations, tol })
}

/// `U(λ) = e^{iλL} S₀` with `L` the doubled diagonal length matrix.
pub fn evolution_operator(graph: &MetricGraph, s0: &BondScatteringMatrix, lambda: f64) -> CMatrix {
    let phases: Vec<f64> = graph.doubled_lengths().iter().map(|l| lambda * l).collect();
    linalg::phase_rows(s0.matrix(), &phases)
}

/// `e^{ix} S` for a torus point `x` (one coordinate per bond, doubled).
pub fn shifted_operator(graph: &MetricGraph, s: &CMatrix, x: &[f64]) -> CMatrix {
    let phases: Vec<f64> = x.iter().chain(x.iter()).copied().collect();
    debug_assert_eq!(phases.len(), graph.dim());
    linalg::phase_rows(s, &phases)
}

/// Hermitian `2B x 2B` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
}

impl Observable {
    pub const HERMITIAN_TOL: f64 = 1e-12;

    pub fn new(graph: &MetricGraph, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != graph.dim() || matrix.ncols() != graph.dim() {
            return Err(Error::DimensionMismatch { expected: graph.dim(), found: matrix.nrows() });
        }
        let deviation = linalg::hermiticity_deviation(&matrix);
        if deviation > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Observable { matrix })
    }

    /// Projector onto both directed copies of `bond` (0-based).
    pub fn bond_projector(graph: &MetricGraph, bond: usize) -> Result<Self> {
        if bond >= graph.bond_count() {
            return Err(Error::InvalidParameter(format!(
                "bond index {} out of range (graph has {} bonds)",
                bond + 1,
                graph.bond_count()
            )));
        }
        let mut m = CMatrix::zeros(graph.dim(), graph.dim());
        m[(bond, bond)] = C64::new(1.0, 0.0);
        m[(bond + graph.bond_count(), bond + graph.bond_count())] = C64::new(1.0, 0.0);
        Ok(Observable { matrix: m })
    }

    pub fn identity(graph: &MetricGraph) -> Self {
        Observable { matrix: CMatrix::identity(graph.dim(), graph.dim()) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The real diagonal, when the matrix is diagonal.
    pub fn diagonal(&self) -> Option<Vec<f64>> {
        let n = self.matrix.nrows();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.matrix[(i, j)].norm() != 0.0 {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.matrix[(i, i)].re).collect())
    }

    /// `⟨v|A|v⟩`.
    pub fn expectation<'a>(&self, v: impl Iterator<Item = &'a C64>) -> f64 {
        let n = self.matrix.nrows();
        let coeffs: Vec<C64> = v.copied().collect();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let row: C64 = coeffs.iter().enumerate().map(|(j, c)| self.matrix[(i, j)] * c).sum();
            acc += coeffs[i].conj() * row;
        }
        acc.re
    }
}

/// Bond-length observable `diag(L, L)`.
pub fn length_observable(graph: &MetricGraph) -> Observable {
    let d = graph.doubled_lengths();
    let m = CMatrix::from_fn(graph.dim(), graph.dim(), |i, j| {
        if i == j {
            C64::new(d[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Observable { matrix: m }
}

/// Searches for a small integer relation `Σ k_b L_b ≈ 0` with
/// `|k_b| <= max_coeff`, not all zero. Returns a relation with the smallest
/// possible largest coefficient, normalised so the first non-zero
/// coefficient is positive.
///
/// Exhaustive for up to four bonds; beyond that only pairs and triples of
/// bonds are examined.
pub fn integer_relation(lengths: &[f64], max_coeff: i64, rel_tol: f64) -> Option<Vec<i64>> {
    (1..=max_coeff).find_map(|m| relation_with_bound(lengths, m, rel_tol))
}

fn relation_with_bound(lengths: &[f64], max_coeff: i64, rel_tol: f64) -> Option<Vec<i64>> {
    let b = lengths.len();
    let scale = lengths.iter().copied().fold(0.0, f64::max);
    let tol = rel_tol * scale;
    let try_subset = |subset: &[usize]| -> Option<Vec<i64>> {
        let k = subset.len();
        let mut coeffs = vec![-max_coeff; k];
        loop {
            let nonzero = coeffs.iter().any(|&c| c != 0);
            let first_positive = coeffs.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0);
            if nonzero && first_positive {
                let s: f64 = coeffs.iter().zip(subset).map(|(&c, &i)| c as f64 * lengths[i]).sum();
                if s.abs() <= tol {
                    let mut full = vec![0; b];
                    for (&c, &i) in coeffs.iter().zip(subset) {
                        full[i] = c;
                    }
                    return Some(full);
                }
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return None;
                }
                coeffs[pos] += 1;
                if coeffs[pos] > max_coeff {
                    coeffs[pos] = -max_coeff;
                    pos += 1;
                } else {
                    break;
                }
            }
        }
    };
    if b < 2 {
        return None;
    }
    if b <= 4 {
        let all: Vec<usize> = (0..b).collect();
        return try_subset(&all);
    }
    for i in 0..b {
        for j in i + 1..b {
            if let Some(r) = try_subset(&[i, j]) {
                return Some(r);
            }
        }
    }
    for i in 0..b {
        for j in i + 1..b {
            for k in j + 1..b {
                if let Some(r) = try_subset(&[i, j, k]) {
                    return Some(r);
                }
            }
        }
    }
    None
}
