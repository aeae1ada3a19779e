//! GNS representation of a tracial algebra: `H = L²(A, μ)` with cyclic
//! vector Ω, left action, modular conjugation J and the unitary U.
//!
//! Vectors in H are coordinates over a μ-orthonormal basis obtained from the
//! Cholesky factor of the Gram matrix `G_kl = μ(b_k* b_l) = L L*`; the vector
//! of `a = Σ c_k b_k` is `L* c`.

use nalgebra::Cholesky;

use crate::algebra::{MatrixStarAlgebra, StarAutomorphism, Subsystem, TraceFunctional, WStarSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, conj, conj_vec, hermitian_eigen, hs_inner, CMatrix, CVector, Orthonormalizer, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct GnsSpace {
    algebra: MatrixStarAlgebra,
    trace: TraceFunctional,
    gram: CMatrix,
    factor: CMatrix,
    factor_inv: CMatrix,
    omega: CVector,
    j_matrix: CMatrix,
    u: CMatrix,
}

impl GnsSpace {
    pub fn build(system: &WStarSystem, tol: &Tolerances) -> Result<Self> {
        Self::new(system.algebra(), system.trace(), system.dynamics(), tol)
    }

    /// GNS data for any faithful trace (not necessarily normalized) and a
    /// trace-preserving automorphism.
    pub fn new(
        algebra: &MatrixStarAlgebra,
        trace: &TraceFunctional,
        dynamics: &StarAutomorphism,
        tol: &Tolerances,
    ) -> Result<Self> {
        let gram = linalg::hermitian_part(&trace.gram(algebra));
        let (vals, _) = hermitian_eigen(&gram);
        let min = vals.first().copied().unwrap_or(1.0);
        let scale = vals.last().copied().unwrap_or(1.0).max(1.0);
        if min <= tol.eps_rank * scale {
            return Err(Error::TraceNotFaithful { min_eigenvalue: min });
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::TraceNotFaithful { min_eigenvalue: min })?;
        let factor = chol.l().adjoint();
        let factor_inv = factor
            .clone()
            .try_inverse()
            .ok_or(Error::TraceNotFaithful { min_eigenvalue: min })?;

        let d = algebra.dim();
        // Coordinates of b_k* in the basis.
        let star = CMatrix::from_fn(d, d, |l, k| hs_inner(&algebra.basis()[l], &algebra.basis()[k].adjoint()));
        let j_matrix = &factor * star * conj(&factor_inv);
        let omega = &factor * algebra.coords(&algebra.identity());
        let u = &factor * dynamics.matrix() * &factor_inv;

        Ok(Self {
            algebra: algebra.clone(),
            trace: trace.clone(),
            gram,
            factor,
            factor_inv,
            omega,
            j_matrix,
            u,
        })
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        &self.algebra
    }

    pub fn trace(&self) -> &TraceFunctional {
        &self.trace
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn omega(&self) -> &CVector {
        &self.omega
    }

    /// Real-linear part of J: `Jx = j_matrix · conj(x)`.
    pub fn j_matrix(&self) -> &CMatrix {
        &self.j_matrix
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn vec_of(&self, a: &CMatrix) -> CVector {
        self.vec_of_coords(&self.algebra.coords(a))
    }

    pub fn vec_of_coords(&self, coords: &CVector) -> CVector {
        &self.factor * coords
    }

    /// Algebra coordinates of the element `a` with `aΩ = x`.
    pub fn coords_of(&self, x: &CVector) -> CVector {
        &self.factor_inv * x
    }

    pub fn element_of(&self, x: &CVector) -> CMatrix {
        self.algebra.element(&self.coords_of(x))
    }

    /// Matrix of left multiplication by `a` on H.
    pub fn left_rep(&self, a: &CMatrix) -> CMatrix {
        &self.factor * self.algebra.left_multiplication(a) * &self.factor_inv
    }

    pub fn left_reps(&self) -> Vec<CMatrix> {
        self.algebra.basis().iter().map(|b| self.left_rep(b)).collect()
    }

    pub fn apply_j(&self, x: &CVector) -> CVector {
        &self.j_matrix * conj_vec(x)
    }

    /// `j(T) = J T* J` for an operator T on H.
    pub fn j(&self, t: &CMatrix) -> CMatrix {
        &self.j_matrix * t.transpose() * conj(&self.j_matrix)
    }

    /// `xa := j(a)x`.
    pub fn right_action(&self, x: &CVector, a: &CMatrix) -> CVector {
        self.j(&self.left_rep(a)) * x
    }

    /// Projection e onto `H_F = span{fΩ : f ∈ F}`.
    pub fn subspace_hf(&self, sub: &MatrixStarAlgebra, tol: &Tolerances) -> CMatrix {
        let mut ortho = Orthonormalizer::new(tol.eps_rank);
        for f in sub.basis() {
            ortho.push(&self.vec_of(f));
        }
        let q = linalg::columns_to_matrix(self.dim(), ortho.vectors());
        linalg::projector(&q)
    }

    pub fn subsystem_projection(&self, sub: &Subsystem, tol: &Tolerances) -> CMatrix {
        self.subspace_hf(sub.algebra(), tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::real_diagonal;
    use crate::linalg::{c, real, ONE, ZERO};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn unit(n: usize, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    fn m2(w: &CMatrix) -> WStarSystem {
        WStarSystem::with_unitary(MatrixStarAlgebra::full(2), TraceFunctional::normalized_trace(2), w, &tol()).unwrap()
    }

    #[test]
    fn scalar_algebra_has_one_dimensional_space() {
        let sys = WStarSystem::new(
            MatrixStarAlgebra::scalars(1),
            TraceFunctional::normalized_trace(1),
            StarAutomorphism::identity(1),
            &tol(),
        )
        .unwrap();
        let g = GnsSpace::build(&sys, &tol()).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.u()[(0, 0)] - ONE).norm() < 1e-12);
        let x = CVector::from_element(1, c(0.3, 0.4));
        assert!((g.apply_j(&x)[0] - c(0.3, -0.4)).norm() < 1e-12);
    }

    #[test]
    fn m2_inner_products() {
        let g = GnsSpace::build(&m2(&CMatrix::identity(2, 2)), &tol()).unwrap();
        assert_eq!(g.dim(), 4);
        let v = g.vec_of(&unit(2, 0, 0));
        assert!((v.dotc(&v) - real(0.5)).norm() < 1e-12);
    }

    #[test]
    fn weighted_diagonal_gram() {
        let t = tol();
        let s = 1.0 / 3.0;
        let sys = WStarSystem::new(
            MatrixStarAlgebra::diagonal(2),
            TraceFunctional::new(real_diagonal(&[s, 1.0 - s]), true),
            StarAutomorphism::identity(2),
            &t,
        )
        .unwrap();
        let g = GnsSpace::build(&sys, &t).unwrap();
        assert!((g.gram() - real_diagonal(&[s, 1.0 - s])).norm() < 1e-12);
    }

    #[test]
    fn modular_conjugation_identities() {
        let w = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, 1.0)]);
        let g = GnsSpace::build(&m2(&w), &tol()).unwrap();
        let jm = g.j_matrix();
        // J² = 1
        assert!((jm * conj(jm) - CMatrix::identity(4, 4)).norm() < 1e-12);
        assert!((g.apply_j(g.omega()) - g.omega()).norm() < 1e-12);
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), real(3.0), c(0.0, -1.0), real(0.5)]);
        assert!((g.apply_j(&g.vec_of(&a)) - g.vec_of(&a.adjoint())).norm() < 1e-12);
        // UJ = JU
        let uj = g.u() * jm;
        let ju = jm * conj(g.u());
        assert!((uj - ju).norm() < 1e-12);
    }

    #[test]
    fn right_action_examples() {
        let g = GnsSpace::build(&m2(&CMatrix::identity(2, 2)), &tol()).unwrap();
        let a = CMatrix::from_row_slice(2, 2, &[real(1.0), c(2.0, 1.0), real(-1.0), real(0.5)]);
        assert!((g.right_action(g.omega(), &a) - g.vec_of(&a)).norm() < 1e-12);
        let x = g.vec_of(&unit(2, 0, 1));
        assert!((g.right_action(&x, &CMatrix::identity(2, 2)) - &x).norm() < 1e-12);
        // E12·E11 = 0 on the right, E11·E12 = E12 on the left
        assert!(g.right_action(&x, &unit(2, 0, 0)).norm() < 1e-12);
        assert!((g.left_rep(&unit(2, 0, 0)) * &x - &x).norm() < 1e-12);
    }

    #[test]
    fn subspace_hf_examples() {
        let t = tol();
        let g = GnsSpace::build(&m2(&CMatrix::identity(2, 2)), &t).unwrap();
        let e = g.subspace_hf(&MatrixStarAlgebra::full(2), &t);
        assert!((e - CMatrix::identity(4, 4)).norm() < 1e-12);
        let e = g.subspace_hf(&MatrixStarAlgebra::scalars(2), &t);
        assert!((e.trace() - ONE).norm() < 1e-12);
        assert!((&e * g.omega() - g.omega()).norm() < 1e-12);
        let e = g.subspace_hf(&MatrixStarAlgebra::diagonal(2), &t);
        assert!((e.trace() - real(2.0)).norm() < 1e-12);
    }
}
