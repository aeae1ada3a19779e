//! Finite-dimensional *-subalgebras of matrix algebras, their traces and
//! automorphisms, and the systems built from them.
//!
//! A [`MatrixStarAlgebra`] is stored as a Hilbert–Schmidt orthonormal basis of
//! N×N matrices. All linear maps on an algebra (automorphisms, conditional
//! expectations) are coordinate matrices over that basis.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, clusters, cluster_separation, commutator, hermitian_eigen, hs_inner, kron, null_space,
    projector, real, unitarity_residual, vectorize, CMatrix, CVector, Orthonormalizer, Tolerances,
    ONE, ZERO,
};

/// Seed used for the generic elements that drive internal decompositions.
const DECOMPOSITION_SEED: u64 = 0x5eed_0001;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex<R: Rng>(rng: &mut R) -> linalg::C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStarAlgebra {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
    contains_identity: bool,
}

impl MatrixStarAlgebra {
    /// Smallest unital *-subalgebra of M_N containing `generators`.
    ///
    /// Words in the generators and their adjoints are added breadth-first
    /// until the span stops growing; the basis comes out of modified
    /// Gram–Schmidt in the order the words were discovered.
    pub fn generate(generators: &[CMatrix], ambient_dim: usize, tol: &Tolerances) -> Result<Self> {
        for (index, g) in generators.iter().enumerate() {
            if g.nrows() != g.ncols() {
                return Err(Error::NonSquareGenerator {
                    index,
                    rows: g.nrows(),
                    cols: g.ncols(),
                });
            }
            if g.nrows() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: g.nrows(),
                });
            }
        }
        let n = ambient_dim;
        let mut letters: Vec<CMatrix> = Vec::with_capacity(2 * generators.len());
        for g in generators {
            letters.push(g.clone());
            letters.push(g.adjoint());
        }

        let mut ortho = Orthonormalizer::new(tol.eps_rank);
        let mut basis: Vec<CMatrix> = Vec::new();
        let mut frontier: Vec<CMatrix> = Vec::new();
        let accept = |m: &CMatrix, ortho: &mut Orthonormalizer, basis: &mut Vec<CMatrix>| {
            if let Some(q) = ortho.push(&vectorize(m)) {
                let q = linalg::unvectorize(q, n, n);
                basis.push(q.clone());
                Some(q)
            } else {
                None
            }
        };

        let id = CMatrix::identity(n, n);
        if let Some(q) = accept(&id, &mut ortho, &mut basis) {
            frontier.push(q);
        }
        for g in &letters {
            if let Some(q) = accept(g, &mut ortho, &mut basis) {
                frontier.push(q);
            }
        }

        let cap = (n * n).max(1);
        let mut rounds = 0;
        while !frontier.is_empty() && rounds < cap && basis.len() < n * n {
            let mut next = Vec::new();
            for w in &frontier {
                for g in &letters {
                    if let Some(q) = accept(&(g * w), &mut ortho, &mut basis) {
                        next.push(q);
                    }
                }
            }
            frontier = next;
            rounds += 1;
        }

        Ok(Self {
            ambient_dim: n,
            basis,
            contains_identity: true,
        })
    }

    /// Wraps an explicit Hilbert–Schmidt orthonormal basis, validating
    /// orthonormality and closure.
    pub fn from_orthonormal_basis(
        ambient_dim: usize,
        basis: Vec<CMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        for (index, b) in basis.iter().enumerate() {
            if b.nrows() != b.ncols() {
                return Err(Error::NonSquareGenerator {
                    index,
                    rows: b.nrows(),
                    cols: b.ncols(),
                });
            }
            if b.nrows() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: b.nrows(),
                });
            }
        }
        let k = basis.len();
        for i in 0..k {
            for j in 0..k {
                let expected = if i == j { ONE } else { ZERO };
                if (hs_inner(&basis[i], &basis[j]) - expected).norm() > tol.eps_assert {
                    return Err(Error::InvalidAlgebra(format!(
                        "basis elements {i} and {j} are not Hilbert-Schmidt orthonormal"
                    )));
                }
            }
        }
        let mut alg = Self {
            ambient_dim,
            basis,
            contains_identity: false,
        };
        alg.contains_identity = alg.distance(&CMatrix::identity(ambient_dim, ambient_dim)) < tol.eps_assert;
        alg.validate(tol)?;
        Ok(alg)
    }

    pub fn scalars(n: usize) -> Self {
        Self {
            ambient_dim: n,
            basis: vec![CMatrix::identity(n, n).unscale((n as f64).sqrt())],
            contains_identity: true,
        }
    }

    pub fn full(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let mut m = CMatrix::zeros(n, n);
                m[(i, j)] = ONE;
                basis.push(m);
            }
        }
        Self {
            ambient_dim: n,
            basis,
            contains_identity: true,
        }
    }

    pub fn diagonal(n: usize) -> Self {
        let basis = (0..n)
            .map(|i| {
                let mut m = CMatrix::zeros(n, n);
                m[(i, i)] = ONE;
                m
            })
            .collect();
        Self {
            ambient_dim: n,
            basis,
            contains_identity: true,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn contains_identity(&self) -> bool {
        self.contains_identity
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.ambient_dim, self.ambient_dim)
    }

    /// Hilbert–Schmidt coordinates of `x` (its orthogonal projection onto the span).
    pub fn coords(&self, x: &CMatrix) -> CVector {
        CVector::from_iterator(self.dim(), self.basis.iter().map(|b| hs_inner(b, x)))
    }

    pub fn element(&self, coords: &CVector) -> CMatrix {
        let n = self.ambient_dim;
        let mut out = CMatrix::zeros(n, n);
        for (b, &w) in self.basis.iter().zip(coords.iter()) {
            out += b * w;
        }
        out
    }

    /// Distance from `x` to the span of the basis.
    pub fn distance(&self, x: &CMatrix) -> f64 {
        (x - self.element(&self.coords(x))).norm()
    }

    pub fn contains(&self, x: &CMatrix, tol: &Tolerances) -> bool {
        self.distance(x) < tol.eps_assert * x.norm().max(1.0)
    }

    /// Vectorized basis as columns of an N²×dim matrix.
    pub fn basis_matrix(&self) -> CMatrix {
        let cols: Vec<CVector> = self.basis.iter().map(vectorize).collect();
        linalg::columns_to_matrix(self.ambient_dim * self.ambient_dim, &cols)
    }

    /// Symmetric subspace residual `max(‖(I−P_B)P_A‖, ‖(I−P_A)P_B‖)`.
    pub fn span_residual(&self, other: &MatrixStarAlgebra) -> f64 {
        if self.ambient_dim != other.ambient_dim {
            return f64::INFINITY;
        }
        let a = self.basis_matrix();
        let b = other.basis_matrix();
        let a_in_b = (&a - &b * (b.adjoint() * &a)).norm();
        let b_in_a = (&b - &a * (a.adjoint() * &b)).norm();
        a_in_b.max(b_in_a)
    }

    /// Checks closure under products and adjoints, and orthonormality.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        for (i, x) in self.basis.iter().enumerate() {
            if !linalg::is_finite(x) {
                return Err(Error::InvalidAlgebra(format!("basis element {i} is not finite")));
            }
            let adj = x.adjoint();
            if self.distance(&adj) > tol.eps_assert {
                return Err(Error::InvalidAlgebra(format!(
                    "adjoint of basis element {i} leaves the span"
                )));
            }
            for (j, y) in self.basis.iter().enumerate() {
                if self.distance(&(x * y)) > tol.eps_assert {
                    return Err(Error::InvalidAlgebra(format!(
                        "product of basis elements {i} and {j} leaves the span"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_commutative(&self, tol: &Tolerances) -> bool {
        self.basis.iter().enumerate().all(|(i, x)| {
            self.basis[i + 1..]
                .iter()
                .all(|y| commutator(x, y).norm() < tol.eps_assert)
        })
    }

    /// Coordinate matrix of left multiplication by `x` on the algebra.
    pub fn left_multiplication(&self, x: &CMatrix) -> CMatrix {
        let products: Vec<CVector> = self.basis.iter().map(|b| vectorize(&(x * b))).collect();
        let prod = linalg::columns_to_matrix(self.ambient_dim * self.ambient_dim, &products);
        self.basis_matrix().adjoint() * prod
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R) -> CMatrix {
        let coords = CVector::from_fn(self.dim(), |_, _| random_complex(rng));
        self.element(&coords)
    }

    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> CMatrix {
        linalg::hermitian_part(&self.random_element(rng))
    }

    /// The commutant `{X : Xb = bX for all b}` inside M_N.
    pub fn commutant(&self, tol: &Tolerances) -> Result<MatrixStarAlgebra> {
        // Two generic Hermitian elements generate the algebra almost
        // surely; the result is verified against the full basis and
        // recomputed from it if that failed.
        if self.dim() > 4 {
            let mut rng = seeded_rng(DECOMPOSITION_SEED);
            let x = self.random_hermitian(&mut rng);
            let y = self.random_hermitian(&mut rng);
            let candidate = hermitian_commutant(&[x, y], self.ambient_dim, tol);
            let ok = candidate.basis.iter().all(|z| {
                self.basis
                    .iter()
                    .all(|b| commutator(z, b).norm() < tol.eps_assert)
            });
            if ok {
                return Ok(candidate);
            }
        }
        commutant_of(&self.basis, self.ambient_dim, tol)
    }

    /// The center `A ∩ A′`.
    pub fn center(&self, tol: &Tolerances) -> MatrixStarAlgebra {
        let n = self.ambient_dim;
        let solve = |ops: &[CMatrix]| -> Vec<CMatrix> {
            let rows = ops.len() * n * n;
            let mut m = CMatrix::zeros(rows, self.dim());
            for (k, b) in self.basis.iter().enumerate() {
                for (l, g) in ops.iter().enumerate() {
                    let v = vectorize(&commutator(b, g));
                    m.view_mut((l * n * n, k), (n * n, 1)).copy_from(&v);
                }
            }
            let ns = null_space(&m, tol.eps_rank);
            (0..ns.ncols())
                .map(|j| self.element(&ns.column(j).into_owned()))
                .collect()
        };
        let central = |zs: &[CMatrix]| {
            zs.iter().all(|z| {
                self.basis
                    .iter()
                    .all(|b| commutator(z, b).norm() < tol.eps_assert)
            })
        };
        let mut found = None;
        if self.dim() > 4 {
            let mut rng = seeded_rng(DECOMPOSITION_SEED ^ 1);
            let gens = [self.random_element(&mut rng), self.random_element(&mut rng)];
            let zs = solve(&gens);
            if central(&zs) {
                found = Some(zs);
            }
        }
        let zs = found.unwrap_or_else(|| solve(&self.basis));
        // The null-space vectors are orthonormal coordinate vectors, hence the
        // elements are Hilbert–Schmidt orthonormal.
        MatrixStarAlgebra {
            ambient_dim: n,
            basis: zs,
            contains_identity: self.contains_identity,
        }
    }

    /// Minimal projections of the center: pairwise orthogonal, summing to the
    /// unit. Returned in a canonical order (descending rank, then entries).
    pub fn block_decomposition(&self, tol: &Tolerances) -> Vec<CMatrix> {
        let n = self.ambient_dim;
        let center = self.center(tol);
        if center.dim() <= 1 {
            return vec![self.unit()];
        }
        let mut rng = seeded_rng(DECOMPOSITION_SEED ^ 2);
        let mut best: Option<Vec<CMatrix>> = None;
        for _attempt in 0..8 {
            let h = center.random_hermitian(&mut rng);
            let (vals, vecs) = hermitian_eigen(&h);
            let groups = clusters(&vals, tol.eigen_cluster.max(1e3 * tol.eps_rank));
            // Eigenvalue zero of h outside the support of the unit belongs to
            // no block; drop eigenvectors annihilated by the unit.
            let unit = self.unit();
            let projections: Vec<CMatrix> = groups
                .iter()
                .map(|g| projector(&vecs.columns(g.start, g.len()).into_owned()))
                .filter(|p| (&unit * p).norm() > 0.5)
                .collect();
            let separated = cluster_separation(&vals, &groups) > 1e-6;
            if projections.len() == center.dim()
                && separated
                && projections.iter().all(|p| center.distance(p) < tol.eps_assert.max(1e-9 * n as f64))
            {
                best = Some(projections);
                break;
            }
        }
        let mut blocks = best.unwrap_or_else(|| vec![self.unit()]);
        sort_projections(&mut blocks);
        blocks
    }

    /// The unit of the algebra (the identity when `contains_identity`).
    pub fn unit(&self) -> CMatrix {
        if self.contains_identity {
            return self.identity();
        }
        // Support projection of the algebra.
        let sum = self
            .basis
            .iter()
            .fold(CMatrix::zeros(self.ambient_dim, self.ambient_dim), |acc, b| {
                acc + b * b.adjoint()
            });
        let q = linalg::range_basis(&sum, 1e-10);
        projector(&q)
    }
}

/// Sorts projections by descending rank, then descending lexicographically on entries
/// rounded to 1e-6.
pub fn sort_projections(ps: &mut [CMatrix]) {
    ps.sort_by(|a, b| {
        let ra = a.trace().re.round() as i64;
        let rb = b.trace().re.round() as i64;
        rb.cmp(&ra).then_with(|| rounded_key(b).cmp(&rounded_key(a)))
    });
}

pub(crate) fn rounded_key(m: &CMatrix) -> Vec<(i64, i64)> {
    m.iter()
        .map(|z| ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64))
        .collect()
}

/// Commutant of Hermitian operators as the kernel of `Σ ad_h²`, assembled
/// from Kronecker products without forming `ad_h` itself.
fn hermitian_commutant(hs: &[CMatrix], n: usize, tol: &Tolerances) -> MatrixStarAlgebra {
    let id = CMatrix::identity(n, n);
    let mut lap = CMatrix::zeros(n * n, n * n);
    for h in hs {
        let h2 = h * h;
        lap += kron(&id, &h2) + kron(&h2.transpose(), &id) - kron(&h.transpose(), h) * linalg::real(2.0);
    }
    let (vals, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(&lap));
    let cut = tol.eps_rank * vals.last().copied().unwrap_or(0.0).max(1.0);
    let basis = vals
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v <= cut)
        .map(|(j, _)| linalg::unvectorize(&vecs.column(j).into_owned(), n, n))
        .collect();
    MatrixStarAlgebra {
        ambient_dim: n,
        basis,
        contains_identity: true,
    }
}

/// Commutant of an arbitrary set of N×N operators (and their adjoints).
pub fn commutant_of(ops: &[CMatrix], n: usize, tol: &Tolerances) -> Result<MatrixStarAlgebra> {
    for (index, g) in ops.iter().enumerate() {
        if g.nrows() != g.ncols() {
            return Err(Error::NonSquareGenerator {
                index,
                rows: g.nrows(),
                cols: g.ncols(),
            });
        }
        if g.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.nrows(),
            });
        }
    }
    let id = CMatrix::identity(n, n);
    let mut blocks: Vec<CMatrix> = Vec::new();
    for g in ops {
        let mut letters = vec![g.clone()];
        if (g - g.adjoint()).norm() > 1e-14 {
            letters.push(g.adjoint());
        }
        for h in letters {
            // vec(hX − Xh) = (I ⊗ h − hᵀ ⊗ I) vec(X) for column-major vec.
            blocks.push(kron(&id, &h) - kron(&h.transpose(), &id));
        }
    }
    if blocks.is_empty() {
        return Ok(MatrixStarAlgebra::full(n));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stacked = CMatrix::zeros(rows, n * n);
    let mut r = 0;
    for b in &blocks {
        stacked.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    let ns = null_space(&stacked, tol.eps_rank);
    let basis = (0..ns.ncols())
        .map(|j| linalg::unvectorize(&ns.column(j).into_owned(), n, n))
        .collect();
    Ok(MatrixStarAlgebra {
        ambient_dim: n,
        basis,
        contains_identity: true,
    })
}

/// A trace given by a density matrix: `μ(a) = tr(ρ a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFunctional {
    density: CMatrix,
    normalized: bool,
}

impl TraceFunctional {
    pub fn new(density: CMatrix, normalized: bool) -> Self {
        Self {
            density,
            normalized,
        }
    }

    /// Normalized matrix trace `tr(a)/N`.
    pub fn normalized_trace(n: usize) -> Self {
        Self::new(CMatrix::identity(n, n).unscale(n as f64), true)
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn value(&self, a: &CMatrix) -> linalg::C64 {
        // tr(ρa) = Σ_ij ρ_ij a_ji = ⟨ρ*, a⟩_HS
        hs_inner(&self.density.adjoint(), a)
    }

    /// Gram matrix `G_kl = μ(b_k* b_l)` over the algebra basis.
    pub fn gram(&self, alg: &MatrixStarAlgebra) -> CMatrix {
        let d = alg.dim();
        // μ(b_k* b_l) = tr(b_k* b_l ρ) = ⟨b_k, b_l ρ⟩
        let right: Vec<CMatrix> = alg.basis().iter().map(|b| b * &self.density).collect();
        CMatrix::from_fn(d, d, |k, l| hs_inner(&alg.basis()[k], &right[l]))
    }

    pub fn validate_on(&self, alg: &MatrixStarAlgebra, tol: &Tolerances) -> Result<()> {
        let n = alg.ambient_dim();
        if self.density.nrows() != n || self.density.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.density.nrows(),
            });
        }
        if !linalg::is_finite(&self.density) {
            return Err(Error::InvalidTrace("density is not finite".into()));
        }
        if (&self.density - self.density.adjoint()).norm() > tol.eps_assert {
            return Err(Error::InvalidTrace("density is not Hermitian".into()));
        }
        let gram = self.gram(alg);
        let (vals, _) = hermitian_eigen(&gram);
        let min = vals.first().copied().unwrap_or(1.0);
        if min <= tol.eps_rank {
            return Err(Error::TraceNotFaithful { min_eigenvalue: min });
        }
        let scale = self.density.norm().max(1.0);
        for (i, x) in alg.basis().iter().enumerate() {
            for y in &alg.basis()[i + 1..] {
                let r = (self.value(&(x * y)) - self.value(&(y * x))).norm();
                if r > tol.eps_assert * scale {
                    return Err(Error::InvalidTrace(format!(
                        "not tracial on the algebra (residual {r:e})"
                    )));
                }
            }
        }
        if self.normalized {
            let one = self.value(&alg.identity());
            if (one - ONE).norm() > tol.eps_assert {
                return Err(Error::InvalidTrace(format!("μ(1) = {one} but trace is normalized")));
            }
        }
        Ok(())
    }
}

/// A *-automorphism stored as its coordinate matrix over an algebra basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StarAutomorphism {
    matrix: CMatrix,
    implementing_unitary: Option<CMatrix>,
}

impl StarAutomorphism {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            implementing_unitary: None,
        }
    }

    pub fn from_coordinates(matrix: CMatrix) -> Self {
        Self {
            matrix,
            implementing_unitary: None,
        }
    }

    /// `a ↦ W a W*`, normalized to coordinate form.
    pub fn from_unitary(alg: &MatrixStarAlgebra, w: &CMatrix, tol: &Tolerances) -> Result<Self> {
        let n = alg.ambient_dim();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.nrows(),
            });
        }
        let res = unitarity_residual(w);
        if !(res < tol.eps_assert) {
            return Err(Error::NotUnitary(format!("implementing unitary (residual {res:e})")));
        }
        let wa = w.adjoint();
        let images: Vec<CMatrix> = alg.basis().iter().map(|b| w * b * &wa).collect();
        for (i, img) in images.iter().enumerate() {
            if alg.distance(img) > tol.eps_assert {
                return Err(Error::NotAutomorphism(format!(
                    "conjugation maps basis element {i} outside the algebra"
                )));
            }
        }
        let d = alg.dim();
        let matrix = CMatrix::from_fn(d, d, |k, l| hs_inner(&alg.basis()[k], &images[l]));
        Ok(Self {
            matrix,
            implementing_unitary: Some(w.clone()),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn implementing_unitary(&self) -> Option<&CMatrix> {
        self.implementing_unitary.as_ref()
    }

    pub fn apply_coords(&self, coords: &CVector) -> CVector {
        &self.matrix * coords
    }

    pub fn apply(&self, alg: &MatrixStarAlgebra, a: &CMatrix) -> CMatrix {
        alg.element(&self.apply_coords(&alg.coords(a)))
    }

    pub fn validate(
        &self,
        alg: &MatrixStarAlgebra,
        trace: &TraceFunctional,
        tol: &Tolerances,
    ) -> Result<()> {
        let d = alg.dim();
        if self.matrix.nrows() != d || self.matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.matrix.nrows(),
            });
        }
        if !linalg::is_finite(&self.matrix) {
            return Err(Error::NotAutomorphism("coordinate matrix is not finite".into()));
        }
        if linalg::rank(&self.matrix, tol.eps_rank) < d {
            return Err(Error::NotAutomorphism("map is not invertible".into()));
        }
        let images: Vec<CMatrix> = alg.basis().iter().map(|b| self.apply(alg, b)).collect();
        for (i, x) in alg.basis().iter().enumerate() {
            let r = (self.apply(alg, &x.adjoint()) - images[i].adjoint()).norm();
            if r > tol.eps_assert {
                return Err(Error::NotAutomorphism(format!(
                    "does not preserve adjoints on basis element {i} (residual {r:e})"
                )));
            }
            for (j, y) in alg.basis().iter().enumerate() {
                let r = (self.apply(alg, &(x * y)) - &images[i] * &images[j]).norm();
                if r > tol.eps_assert {
                    return Err(Error::NotAutomorphism(format!(
                        "not multiplicative on basis pair ({i}, {j}) (residual {r:e})"
                    )));
                }
            }
            let r = (trace.value(&images[i]) - trace.value(x)).norm();
            if r > tol.eps_assert * trace.density().norm().max(1.0) {
                return Err(Error::NotAutomorphism(format!(
                    "does not preserve the trace on basis element {i} (residual {r:e})"
                )));
            }
        }
        Ok(())
    }
}

/// A system: algebra, faithful trace, trace-preserving *-automorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct WStarSystem {
    algebra: MatrixStarAlgebra,
    trace: TraceFunctional,
    dynamics: StarAutomorphism,
}

impl WStarSystem {
    pub fn new(
        algebra: MatrixStarAlgebra,
        trace: TraceFunctional,
        dynamics: StarAutomorphism,
        tol: &Tolerances,
    ) -> Result<Self> {
        if !algebra.contains_identity() {
            return Err(Error::InvalidAlgebra("algebra must contain the identity".into()));
        }
        algebra.validate(tol)?;
        trace.validate_on(&algebra, tol)?;
        dynamics.validate(&algebra, &trace, tol)?;
        Ok(Self {
            algebra,
            trace,
            dynamics,
        })
    }

    /// Builds a system whose dynamics is conjugation by the unitary `w`.
    pub fn with_unitary(
        algebra: MatrixStarAlgebra,
        trace: TraceFunctional,
        w: &CMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let dynamics = StarAutomorphism::from_unitary(&algebra, w, tol)?;
        Self::new(algebra, trace, dynamics, tol)
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        &self.algebra
    }

    pub fn trace(&self) -> &TraceFunctional {
        &self.trace
    }

    pub fn dynamics(&self) -> &StarAutomorphism {
        &self.dynamics
    }

    pub fn mu(&self, a: &CMatrix) -> linalg::C64 {
        self.trace.value(a)
    }

    pub fn alpha(&self, a: &CMatrix) -> CMatrix {
        self.dynamics.apply(&self.algebra, a)
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }
}

/// A unital subalgebra `F ⊆ A` with `α(F) = F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    parent: WStarSystem,
    sub_algebra: MatrixStarAlgebra,
    /// Coordinates of the F basis in the A basis (dim A × dim F).
    embedding: CMatrix,
}

impl Subsystem {
    pub fn new(parent: WStarSystem, sub_algebra: MatrixStarAlgebra, tol: &Tolerances) -> Result<Self> {
        let a = parent.algebra();
        if sub_algebra.ambient_dim() != a.ambient_dim() {
            return Err(Error::SubsystemInvalid(format!(
                "subalgebra lives in M_{} but the algebra in M_{}",
                sub_algebra.ambient_dim(),
                a.ambient_dim()
            )));
        }
        if !sub_algebra.contains_identity() {
            return Err(Error::SubsystemInvalid("subalgebra must contain the unit".into()));
        }
        for (i, f) in sub_algebra.basis().iter().enumerate() {
            let dist = a.distance(f);
            if dist > tol.eps_assert {
                return Err(Error::SubsystemInvalid(format!(
                    "basis element {i} of F is not in A (distance {dist:e})"
                )));
            }
            let img = parent.alpha(f);
            let dist = sub_algebra.distance(&img);
            if dist > tol.eps_assert {
                return Err(Error::SubsystemInvalid(format!(
                    "α maps basis element {i} of F outside F (distance {dist:e})"
                )));
            }
        }
        let gram = parent.trace().gram(&sub_algebra);
        let (vals, _) = hermitian_eigen(&gram);
        if vals.first().copied().unwrap_or(1.0) <= tol.eps_rank {
            return Err(Error::SubsystemInvalid("restricted trace is not faithful on F".into()));
        }
        let embedding = CMatrix::from_fn(a.dim(), sub_algebra.dim(), |k, l| {
            hs_inner(&a.basis()[k], &sub_algebra.basis()[l])
        });
        Ok(Self {
            parent,
            sub_algebra,
            embedding,
        })
    }

    pub fn full(parent: WStarSystem, tol: &Tolerances) -> Result<Self> {
        let alg = parent.algebra().clone();
        Self::new(parent, alg, tol)
    }

    pub fn scalars(parent: WStarSystem, tol: &Tolerances) -> Result<Self> {
        let n = parent.algebra().ambient_dim();
        Self::new(parent, MatrixStarAlgebra::scalars(n), tol)
    }

    pub fn parent(&self) -> &WStarSystem {
        &self.parent
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        &self.sub_algebra
    }

    pub fn embedding(&self) -> &CMatrix {
        &self.embedding
    }

    pub fn dim(&self) -> usize {
        self.sub_algebra.dim()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.parent.dim()
    }
}

/// The trace-preserving conditional expectation `D: A → F` as a coordinate
/// matrix on A.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    matrix: CMatrix,
}

impl ConditionalExpectation {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply_coords(&self, coords: &CVector) -> CVector {
        &self.matrix * coords
    }

    pub fn apply(&self, alg: &MatrixStarAlgebra, a: &CMatrix) -> CMatrix {
        alg.element(&self.apply_coords(&alg.coords(a)))
    }
}

/// Orthogonal projection of A onto F for `⟨a, b⟩ = μ(a*b)`.
pub fn conditional_expectation(sub: &Subsystem) -> Result<ConditionalExpectation> {
    let parent = sub.parent();
    let g = parent.trace().gram(parent.algebra());
    let e = sub.embedding();
    let inner = e.adjoint() * &g * e;
    let inv = inner
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SubsystemInvalid("trace Gram matrix of F is singular".into()))?;
    Ok(ConditionalExpectation {
        matrix: e * inv * e.adjoint() * g,
    })
}

/// Minimal projections of a commutative algebra with their trace weights.
pub fn atoms(
    alg: &MatrixStarAlgebra,
    trace: &TraceFunctional,
    tol: &Tolerances,
) -> Result<Vec<(CMatrix, f64)>> {
    if !alg.is_commutative(tol) {
        return Err(Error::NotCommutative);
    }
    Ok(alg
        .block_decomposition(tol)
        .into_iter()
        .map(|p| {
            let w = trace.value(&p).re;
            (p, w)
        })
        .collect())
}

pub fn real_diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| real(v))))
}
