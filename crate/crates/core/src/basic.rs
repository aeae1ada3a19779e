//! The basic construction `⟨A,e⟩` over a subsystem, its lifted trace μ̄, the
//! extended dynamics `ᾱ = Ad(U)` and the GNS pair `(H̄, Ū)`.

use rand::Rng;

use crate::algebra::{
    conditional_expectation, ConditionalExpectation, MatrixStarAlgebra, StarAutomorphism, Subsystem,
    TraceFunctional,
};
use crate::error::{Error, Result};
use crate::gns::GnsSpace;
use crate::linalg::{self, hermitian_part, least_squares, rank, vectorize, CMatrix, CVector, Tolerances, C64};

#[derive(Debug, Clone)]
pub struct BasicConstruction {
    gns: GnsSpace,
    sub: Subsystem,
    expectation: ConditionalExpectation,
    e: CMatrix,
    left_reps: Vec<CMatrix>,
    j_f: Vec<CMatrix>,
    alg_bar: MatrixStarAlgebra,
    commutant_residual: f64,
    mu_bar: TraceFunctional,
    extension_residual: f64,
    alpha_bar: StarAutomorphism,
    bar_gns: GnsSpace,
}

impl BasicConstruction {
    pub fn build(sub: &Subsystem, tol: &Tolerances) -> Result<Self> {
        let gns = GnsSpace::build(sub.parent(), tol)?;
        Self::from_gns(gns, sub, tol)
    }

    pub fn from_gns(gns: GnsSpace, sub: &Subsystem, tol: &Tolerances) -> Result<Self> {
        let n = gns.dim();
        let expectation = conditional_expectation(sub)?;
        let e = gns.subsystem_projection(sub, tol);
        let left_reps = gns.left_reps();

        let mut generators = left_reps.clone();
        generators.push(e.clone());
        let alg_bar = MatrixStarAlgebra::generate(&generators, n, tol)?;

        let j_f: Vec<CMatrix> = sub
            .algebra()
            .basis()
            .iter()
            .map(|f| gns.j(&gns.left_rep(f)))
            .collect();
        let jf_alg = MatrixStarAlgebra::generate(&j_f, n, tol)?;
        let commutant = jf_alg.commutant(tol)?;
        let commutant_residual = if commutant.dim() == alg_bar.dim() {
            alg_bar.span_residual(&commutant)
        } else {
            f64::INFINITY
        };
        if !(commutant_residual < tol.eps_assert) {
            return Err(Error::CommutantMismatch {
                residual: commutant_residual,
            });
        }

        let (mu_bar, extension_residual) = solve_lifted_trace(&gns, &left_reps, &e, &alg_bar, tol)?;
        mu_bar.validate_on(&alg_bar, tol)?;

        let alpha_bar = StarAutomorphism::from_unitary(&alg_bar, gns.u(), tol)?;
        let bar_gns = GnsSpace::new(&alg_bar, &mu_bar, &alpha_bar, tol)?;

        Ok(Self {
            gns,
            sub: sub.clone(),
            expectation,
            e,
            left_reps,
            j_f,
            alg_bar,
            commutant_residual,
            mu_bar,
            extension_residual,
            alpha_bar,
            bar_gns,
        })
    }

    pub fn gns(&self) -> &GnsSpace {
        &self.gns
    }

    pub fn subsystem(&self) -> &Subsystem {
        &self.sub
    }

    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.expectation
    }

    pub fn e(&self) -> &CMatrix {
        &self.e
    }

    /// Left representations of the A basis on H.
    pub fn left_reps(&self) -> &[CMatrix] {
        &self.left_reps
    }

    /// `j(f)` on H for the F basis.
    pub fn j_f(&self) -> &[CMatrix] {
        &self.j_f
    }

    pub fn alg_bar(&self) -> &MatrixStarAlgebra {
        &self.alg_bar
    }

    pub fn commutant_residual(&self) -> f64 {
        self.commutant_residual
    }

    pub fn mu_bar(&self) -> &TraceFunctional {
        &self.mu_bar
    }

    pub fn mu_bar_value(&self, x: &CMatrix) -> C64 {
        self.mu_bar.value(x)
    }

    /// Relative residual of the least-squares extension of `μ̄(aeb) = μ(ab)`.
    pub fn extension_residual(&self) -> f64 {
        self.extension_residual
    }

    pub fn alpha_bar(&self) -> &StarAutomorphism {
        &self.alpha_bar
    }

    pub fn bar_gns(&self) -> &GnsSpace {
        &self.bar_gns
    }

    pub fn u(&self) -> &CMatrix {
        self.gns.u()
    }

    pub fn u_bar(&self) -> &CMatrix {
        self.bar_gns.u()
    }

    /// `γ_μ̄`: ⟨A,e⟩ → H̄.
    pub fn gamma(&self, x: &CMatrix) -> CVector {
        self.bar_gns.vec_of(x)
    }

    pub fn left_rep(&self, a: &CMatrix) -> CMatrix {
        self.gns.left_rep(a)
    }

    /// Largest `|μ̄(a e b) − μ(ab)|` over `samples` random pairs.
    pub fn extension_check<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let alg = self.sub.parent().algebra();
        let mu = self.sub.parent().trace();
        (0..samples)
            .map(|_| {
                let a = alg.random_element(rng);
                let b = alg.random_element(rng);
                let lhs = self.mu_bar_value(&(self.left_rep(&a) * &self.e * self.left_rep(&b)));
                (lhs - mu.value(&(&a * &b))).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|μ̄(xy) − μ̄(yx)|` over random pairs in ⟨A,e⟩.
    pub fn tracial_check<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        (0..samples)
            .map(|_| {
                let x = self.alg_bar.random_element(rng);
                let y = self.alg_bar.random_element(rng);
                (self.mu_bar_value(&(&x * &y)) - self.mu_bar_value(&(&y * &x))).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest of `|μ̄(ᾱ(x)) − μ̄(x)|` and `‖Ūγ(x) − γ(ᾱ(x))‖` over the ⟨A,e⟩ basis.
    pub fn alpha_bar_check(&self) -> f64 {
        let u = self.u();
        let ua = u.adjoint();
        self.alg_bar
            .basis()
            .iter()
            .map(|x| {
                let ax = u * x * &ua;
                let inv = (self.mu_bar_value(&ax) - self.mu_bar_value(x)).norm();
                let inter = (self.u_bar() * self.gamma(x) - self.gamma(&ax)).norm();
                inv.max(inter)
            })
            .fold(0.0, f64::max)
    }

    /// Partial isometries `v_i = e·j(u_i)` from a family `u_i ∈ A` with
    /// `Σ u_i e u_i* = 1`.
    pub fn partial_isometries_from_right_basis(&self, us: &[CMatrix]) -> Vec<CMatrix> {
        us.iter()
            .map(|u| &self.e * self.gns.j(&self.left_rep(u)))
            .collect()
    }

    /// The lifted trace computed as `μ̄(t) = Σ ⟨Jv_i*Ω, t Jv_i*Ω⟩`.
    pub fn lifted_trace_via_isometries(
        &self,
        partial_isometries: &[CMatrix],
        tol: &Tolerances,
    ) -> Result<IsometryTrace> {
        let n = self.gns.dim();
        let mut sum = CMatrix::zeros(n, n);
        for (i, v) in partial_isometries.iter().enumerate() {
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.nrows(),
                });
            }
            // v_i must lie in ⟨A′, e⟩ = F′.
            let r = self
                .sub
                .algebra()
                .basis()
                .iter()
                .map(|f| linalg::commutator(v, &self.left_rep(f)).norm())
                .fold(0.0, f64::max);
            if r > tol.eps_assert {
                return Err(Error::PartitionInvalid(format!(
                    "v_{i} does not commute with F (residual {r:e})"
                )));
            }
            sum += v.adjoint() * &self.e * v;
        }
        let r = (sum - CMatrix::identity(n, n)).norm();
        if !(r < tol.eps_assert) {
            return Err(Error::PartitionInvalid(format!("‖Σ v_i* e v_i − 1‖ = {r:e}")));
        }
        let vectors = partial_isometries
            .iter()
            .map(|v| self.gns.apply_j(&(v.adjoint() * self.gns.omega())))
            .collect();
        Ok(IsometryTrace { vectors })
    }

    /// Largest deviation between the two lifted-trace computations on the
    /// ⟨A,e⟩ basis.
    pub fn isometry_trace_residual(&self, trace: &IsometryTrace) -> f64 {
        self.alg_bar
            .basis()
            .iter()
            .map(|x| (trace.value(x) - self.mu_bar_value(x)).norm())
            .fold(0.0, f64::max)
    }
}

/// `t ↦ Σ ⟨ξ_i, t ξ_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryTrace {
    vectors: Vec<CVector>,
}

impl IsometryTrace {
    pub fn value(&self, t: &CMatrix) -> C64 {
        self.vectors.iter().map(|x| x.dotc(&(t * x))).sum()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }
}

/// Solves `μ̄(L_i e L_j) = μ(b_i b_j)` for μ̄ on ⟨A,e⟩ and returns it as a
/// density in ⟨A,e⟩ together with the relative residual.
fn solve_lifted_trace(
    gns: &GnsSpace,
    left_reps: &[CMatrix],
    e: &CMatrix,
    alg_bar: &MatrixStarAlgebra,
    tol: &Tolerances,
) -> Result<(TraceFunctional, f64)> {
    let alg = gns.algebra();
    let mu = gns.trace();
    let d = alg.dim();
    let n = gns.dim();
    let le: Vec<CMatrix> = left_reps.iter().map(|l| l * e).collect();
    let mut family = CMatrix::zeros(n * n, d * d);
    let mut rhs = CVector::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let col = i * d + j;
            family.set_column(col, &vectorize(&(&le[i] * &left_reps[j])));
            rhs[col] = mu.value(&(&alg.basis()[i] * &alg.basis()[j]));
        }
    }
    // Row (ij) of the system holds the ⟨A,e⟩ coordinates of L_i e L_j.
    let system = (alg_bar.basis_matrix().adjoint() * &family).transpose();
    let span = rank(&system, tol.eps_rank);
    if span != alg_bar.dim() {
        return Err(Error::SpanDeficient {
            rank: span,
            dim: alg_bar.dim(),
        });
    }
    let (phi, res) = least_squares(&system, &rhs, tol.eps_rank);
    let residual = res / rhs.norm().max(1.0);
    if !(residual < tol.extension_residual) {
        return Err(Error::ExtensionInconsistent { residual });
    }
    let mut density = CMatrix::zeros(n, n);
    for (x, &p) in alg_bar.basis().iter().zip(phi.iter()) {
        density += x.adjoint() * p;
    }
    Ok((TraceFunctional::new(hermitian_part(&density), false), residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::WStarSystem;
    use crate::linalg::{c, real, ONE, ZERO};
    use crate::algebra::seeded_rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn m2(w: &CMatrix) -> WStarSystem {
        WStarSystem::with_unitary(MatrixStarAlgebra::full(2), TraceFunctional::normalized_trace(2), w, &tol()).unwrap()
    }

    fn flip() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    #[test]
    fn scalars_give_all_of_b_h_with_canonical_trace() {
        let t = tol();
        let sub = Subsystem::scalars(m2(&flip()), &t).unwrap();
        let bc = BasicConstruction::build(&sub, &t).unwrap();
        assert_eq!(bc.alg_bar().dim(), 16);
        assert!((bc.mu_bar_value(&CMatrix::identity(4, 4)) - real(4.0)).norm() < 1e-10);
        assert!((bc.mu_bar_value(bc.e()) - ONE).norm() < 1e-10);
        assert!((bc.mu_bar().density() - CMatrix::identity(4, 4)).norm() < 1e-10);
        assert_eq!(bc.bar_gns().dim(), 16);
    }

    #[test]
    fn full_subsystem_gives_e_equal_one() {
        let t = tol();
        let sub = Subsystem::full(m2(&flip()), &t).unwrap();
        let bc = BasicConstruction::build(&sub, &t).unwrap();
        assert!((bc.e() - CMatrix::identity(4, 4)).norm() < 1e-12);
        assert_eq!(bc.alg_bar().dim(), 4);
        assert!((bc.mu_bar_value(&CMatrix::identity(4, 4)) - ONE).norm() < 1e-10);
        let v = bc.lifted_trace_via_isometries(&[CMatrix::identity(4, 4)], &t).unwrap();
        assert!(bc.isometry_trace_residual(&v) < 1e-10);
    }

    #[test]
    fn lifted_trace_identities_hold() {
        let t = tol();
        let w = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, 1.0)]);
        let sub = Subsystem::new(m2(&w), MatrixStarAlgebra::diagonal(2), &t).unwrap();
        let bc = BasicConstruction::build(&sub, &t).unwrap();
        let mut rng = seeded_rng(3);
        assert!(bc.extension_check(&mut rng, 50) < 1e-8);
        assert!(bc.tracial_check(&mut rng, 50) < 1e-8);
        assert!(bc.alpha_bar_check() < 1e-8);
        assert!(bc.commutant_residual() < 1e-8);
    }

    #[test]
    fn incomplete_partition_is_rejected() {
        let t = tol();
        let sub = Subsystem::scalars(m2(&flip()), &t).unwrap();
        let bc = BasicConstruction::build(&sub, &t).unwrap();
        // μ-orthonormal basis √2·E_ij of M_2 is a right basis over C·1.
        let mut us = Vec::new();
        for j in 0..2 {
            for i in 0..2 {
                let mut m = CMatrix::zeros(2, 2);
                m[(i, j)] = real(2f64.sqrt());
                us.push(m);
            }
        }
        let vs = bc.partial_isometries_from_right_basis(&us);
        let tr = bc.lifted_trace_via_isometries(&vs, &t).unwrap();
        assert!(bc.isometry_trace_residual(&tr) < 1e-10);
        let err = bc.lifted_trace_via_isometries(&vs[..3], &t).unwrap_err();
        assert!(matches!(err, Error::PartitionInvalid(_)));
    }
}
