//! Small dense complex linear algebra shared by the spectral modules.
//!
//! Everything here works on `2B x 2B` matrices, where `B` is the number of
//! bonds, so plain dense storage is the right tool.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const TAU: f64 = std::f64::consts::TAU;

/// Eigenvalues whose phases differ by less than this are one cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 10_000;

/// Argument of `z`, mapped into `(0, 2π]`. An argument of exactly zero is
/// reported as `2π`.
pub fn phase_of(z: C64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Maps an arbitrary angle into `(0, 2π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let p = theta.rem_euclid(TAU);
    if p == 0.0 {
        TAU
    } else {
        p
    }
}

/// Distance between two angles on the unit circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Largest entry of `|U U† - I|`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Largest entry of `|A - A†|`.
pub fn hermiticity_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `diag(e^{i p_r}) * base`, i.e. every row `r` multiplied by `e^{i p_r}`.
pub fn phase_rows(base: &CMatrix, row_phases: &[f64]) -> CMatrix {
    let mut out = base.clone();
    for (r, &p) in row_phases.iter().enumerate() {
        let z = C64::from_polar(1.0, p);
        for c in 0..out.ncols() {
            out[(r, c)] *= z;
        }
    }
    out
}

/// Eigenphases of a unitary matrix, unsorted, each in `(0, 2π]`.
pub fn eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    let values = u.clone().eigenvalues().ok_or(Error::Eigendecomposition)?;
    Ok(values.iter().map(|&z| phase_of(z)).collect())
}

/// Diagonal expectation `Σ w_k |v_k|²` of a diagonal weight matrix.
pub fn diagonal_expectation<'a>(v: impl Iterator<Item = &'a C64>, weights: &[f64]) -> f64 {
    v.zip(weights).map(|(z, w)| w * z.norm_sqr()).sum()
}

/// `⟨v|A|v⟩` for a Hermitian `A`; the tiny imaginary part is discarded.
pub fn expectation(a: &CMatrix, v: &DVector<C64>) -> f64 {
    (v.adjoint() * a * v)[(0, 0)].re
}

/// Eigenphases (sorted decreasing, in `(0, 2π]`) and matching orthonormal
/// eigenvectors of a unitary matrix.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub phases: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    /// Complex Schur form of a normal matrix is diagonal, so the Schur
    /// vectors are eigenvectors even inside degenerate eigenspaces.
    pub fn of_unitary(u: &CMatrix) -> Result<Self> {
        let schur =
            Schur::try_new(u.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::Eigendecomposition)?;
        let (q, t) = schur.unpack();
        let n = u.nrows();
        let raw: Vec<f64> = (0..n).map(|i| phase_of(t[(i, i)])).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
        let phases = order.iter().map(|&i| raw[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| q[(r, order[c])]);
        Ok(Eigensystem { phases, vectors })
    }

    /// Rotates every degenerate cluster onto the basis that diagonalises the
    /// compressed length observable, so each basis vector follows one
    /// analytic branch through the degeneracy. Vectors inside a cluster are
    /// ordered by decreasing velocity.
    pub fn canonicalize(&mut self, doubled_lengths: &[f64]) {
        for cluster in phase_clusters(&self.phases, DEGENERACY_TOL) {
            if cluster.len() < 2 {
                continue;
            }
            rotate_cluster(&mut self.vectors, &cluster, doubled_lengths);
        }
    }

    /// `⟨ψ_j|L|ψ_j⟩` for every column.
    pub fn velocities(&self, doubled_lengths: &[f64]) -> Vec<f64> {
        (0..self.vectors.ncols())
            .map(|j| diagonal_expectation(self.vectors.column(j).iter(), doubled_lengths))
            .collect()
    }
}

/// Diagonalises `V† L V` on the columns `cluster` and writes the rotated
/// vectors back, ordered by decreasing velocity.
pub(crate) fn rotate_cluster(vectors: &mut CMatrix, cluster: &[usize], doubled_lengths: &[f64]) {
    let n = vectors.nrows();
    let k = cluster.len();
    let v = CMatrix::from_fn(n, k, |r, c| vectors[(r, cluster[c])]);
    let lv = CMatrix::from_fn(n, k, |r, c| v[(r, c)] * doubled_lengths[r]);
    let compressed = v.adjoint() * lv;
    let eig = compressed.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rotated = &v * &eig.eigenvectors;
    for (slot, &src) in cluster.iter().zip(&order) {
        for r in 0..n {
            vectors[(r, *slot)] = rotated[(r, src)];
        }
    }
}

/// Groups indices of phases (sorted decreasing) into clusters whose
/// neighbouring gaps are below `tol`. Clusters wrap around the cut at
/// `0 ≡ 2π`, so a phase just below `2π` and one just above `0` share a
/// cluster.
pub fn phase_clusters(phases_desc: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let n = phases_desc.len();
    if n == 0 {
        return Vec::new();
    }
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..n {
        if phases_desc[i - 1] - phases_desc[i] < tol {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    if groups.len() > 1 {
        let wrap_gap = phases_desc[n - 1] + TAU - phases_desc[0];
        if wrap_gap < tol {
            let last = groups.pop().unwrap();
            let mut merged = last;
            merged.extend(groups[0].iter().copied());
            groups[0] = merged;
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_of_maps_one_to_two_pi() {
        assert_eq!(phase_of(C64::new(1.0, 0.0)), TAU);
        assert_eq!(phase_of(C64::new(1.0, -0.0)), TAU);
        assert!((phase_of(C64::new(-1.0, 0.0)) - std::f64::consts::PI).abs() < 1e-15);
        assert!((phase_of(C64::new(0.0, -1.0)) - 1.5 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn wrap_phase_half_open() {
        assert_eq!(wrap_phase(0.0), TAU);
        assert_eq!(wrap_phase(TAU), TAU);
        assert!((wrap_phase(-1.0) - (TAU - 1.0)).abs() < 1e-15);
        assert!((wrap_phase(7.0) - (7.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn clusters_wrap_across_the_cut() {
        let phases = [TAU - 1e-12, 3.0, 2.0, 1e-12];
        let groups = phase_clusters(&phases, 1e-9);
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().any(|g| g.len() == 2 && g.contains(&0) && g.contains(&3)));
    }

    #[test]
    fn schur_vectors_of_a_swap() {
        let u = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        );
        let es = Eigensystem::of_unitary(&u).unwrap();
        assert!((es.phases[0] - TAU).abs() < 1e-12 || es.phases[0] < 1e-12);
        assert!((es.phases[1] - std::f64::consts::PI).abs() < 1e-12);
        for j in 0..2 {
            let v = es.vectors.column(j).into_owned();
            let uv = &u * &v;
            let z = C64::from_polar(1.0, es.phases[j]);
            assert!((uv - v * z).norm() < 1e-12);
        }
    }
}
