//! Dense complex linear algebra helpers shared by every module.
//!
//! Everything is built on `nalgebra` dense matrices over `Complex64`. Rank
//! decisions go through singular values with a cutoff relative to
//! `max(1, sigma_max)`, so a single `eps_rank` works for operators of any
//! reasonable scale.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical thresholds used throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Singular-value cutoff for rank and null-space decisions.
    pub eps_rank: f64,
    /// Threshold for identity checks (residual norms).
    pub eps_assert: f64,
    /// Default length of Cesàro sequences.
    pub cesaro_n_max: usize,
    /// Residual threshold for the least-squares extension of the lifted trace.
    pub extension_residual: f64,
    /// Cluster width for eigenvalues of unitaries and generic Hermitian elements.
    pub eigen_cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_rank: 1e-10,
            eps_assert: 1e-8,
            cesaro_n_max: 256,
            extension_residual: 1e-8,
            eigen_cluster: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn is_valid(&self) -> bool {
        self.eps_rank > 0.0
            && self.eps_assert > 0.0
            && self.cesaro_n_max > 0
            && self.extension_residual > 0.0
            && self.eigen_cluster > 0.0
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Hilbert–Schmidt inner product `tr(a* b)`, conjugate-linear in `a`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.dotc(b)
}

/// Standard matrix trace.
pub fn trace(a: &CMatrix) -> C64 {
    a.trace()
}

/// Column-major flattening of a matrix into a vector.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Entrywise conjugate.
pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

pub fn conj_vec(v: &CVector) -> CVector {
    v.map(|z| z.conj())
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖U*U − I‖ + ‖UU* − I‖` in Frobenius norm.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(n, n);
    (u.adjoint() * u - &id).norm() + (u * u.adjoint() - id).norm()
}

fn cutoff(sigma_max: f64, eps: f64) -> f64 {
    eps * sigma_max.max(1.0)
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// Tall systems are first reduced by a QR factorization, which preserves the
/// singular values, so the SVD only ever sees a square matrix.
pub fn null_space(m: &CMatrix, eps_rank: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    let square = if m.nrows() > cols {
        m.clone().qr().r()
    } else {
        let mut padded = CMatrix::zeros(cols, cols);
        padded.rows_mut(0, m.nrows()).copy_from(m);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = cutoff(smax, eps_rank);
    let picked: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    columns_to_matrix(cols, &picked)
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range_basis(m: &CMatrix, eps_rank: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = cutoff(smax, eps_rank);
    let picked: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    columns_to_matrix(rows, &picked)
}

pub fn rank(m: &CMatrix, eps_rank: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = cutoff(smax, eps_rank);
    s.iter().filter(|&&x| x > cut).count()
}

pub fn columns_to_matrix(rows: usize, cols: &[CVector]) -> CMatrix {
    let mut out = CMatrix::zeros(rows, cols.len());
    for (j, v) in cols.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

/// Orthogonal projector `Q Q*` onto the span of orthonormal columns `q`.
pub fn projector(q: &CMatrix) -> CMatrix {
    q * q.adjoint()
}

/// `‖(I − P_Y) P_X‖`: zero exactly when range(P_X) ⊆ range(P_Y).
pub fn inclusion_residual(px: &CMatrix, py: &CMatrix) -> f64 {
    (px - py * px).norm()
}

/// Least-squares solution of `m x = b` and the residual `‖m x − b‖`.
pub fn least_squares(m: &CMatrix, b: &CVector, eps_rank: f64) -> (CVector, f64) {
    if m.ncols() == 0 {
        return (CVector::zeros(0), b.norm());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd
        .solve(b, cutoff(smax, eps_rank))
        .expect("U and V were computed");
    let res = (m * &x - b).norm();
    (x, res)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Groups ascending values into clusters whose consecutive gaps are `<= tol`.
pub fn clusters(sorted: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Smallest gap between consecutive clusters (infinite with fewer than two).
pub fn cluster_separation(sorted: &[f64], groups: &[std::ops::Range<usize>]) -> f64 {
    groups
        .windows(2)
        .map(|w| sorted[w[1].start] - sorted[w[0].end - 1])
        .fold(f64::INFINITY, f64::min)
}

/// Eigen-decomposition of a unitary (more generally, normal) matrix.
///
/// The Hermitian and anti-Hermitian parts commute; the first is diagonalized,
/// then the second is diagonalized inside each eigenspace of the first. This
/// avoids a general non-Hermitian eigensolver. Returns eigenvalues and an
/// orthonormal eigenbasis as columns.
pub fn normal_eigen(u: &CMatrix, cluster_tol: f64) -> (Vec<C64>, CMatrix) {
    let n = u.nrows();
    let re_part = hermitian_part(u);
    let im_part = (u - u.adjoint()).map(|z| z * c(0.0, -0.5));
    let (vals, vecs) = hermitian_eigen(&re_part);
    let mut out_vals = Vec::with_capacity(n);
    let mut out_vecs = CMatrix::zeros(n, n);
    let mut col = 0;
    for group in clusters(&vals, cluster_tol) {
        let q = vecs.columns(group.start, group.len()).into_owned();
        let compressed = q.adjoint() * &im_part * &q;
        let (ivals, ivecs) = hermitian_eigen(&compressed);
        let block = &q * ivecs;
        for k in 0..ivals.len() {
            let v = block.column(k).into_owned();
            let lambda = (v.adjoint() * u * &v)[(0, 0)];
            out_vals.push(lambda);
            out_vecs.set_column(col, &v);
            col += 1;
        }
    }
    (out_vals, out_vecs)
}

/// Incremental modified Gram–Schmidt with one re-orthogonalization pass.
#[derive(Debug, Clone, Default)]
pub struct Orthonormalizer {
    vectors: Vec<CVector>,
    eps: f64,
}

impl Orthonormalizer {
    pub fn new(eps: f64) -> Self {
        Self {
            vectors: Vec::new(),
            eps,
        }
    }

    /// Adds `v` if it is independent of the current span; returns the new
    /// normalized vector when accepted.
    pub fn push(&mut self, v: &CVector) -> Option<&CVector> {
        let norm0 = v.norm();
        if !(norm0 > self.eps) {
            return None;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let coef = q.dotc(&r);
                r.axpy(-coef, q, ONE);
            }
        }
        let nr = r.norm();
        if nr <= self.eps * norm0.max(1.0) {
            return None;
        }
        self.vectors.push(r.unscale(nr));
        self.vectors.last()
    }

    pub fn residual_norm(&self, v: &CVector) -> f64 {
        let mut r = v.clone();
        for q in &self.vectors {
            let coef = q.dotc(&r);
            r.axpy(-coef, q, ONE);
        }
        r.norm()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<CVector> {
        self.vectors
    }
}
