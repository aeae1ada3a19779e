//! Builders for the standard example families: classical systems on finite
//! atomic spaces, group von Neumann algebras of finite groups, tensor
//! products, skew products and finite extensions over `B ⊗ M_2`.

use crate::algebra::{MatrixStarAlgebra, StarAutomorphism, Subsystem, TraceFunctional, WStarSystem};
use crate::error::{Error, Result};
use crate::gns::GnsSpace;
use crate::linalg::{self, kron, real, unitarity_residual, CMatrix, CVector, Tolerances, ONE};
use crate::spectrum::span_projection;

fn basis_vector_matrix(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Validates a permutation given as `perm[x] = T(x)`.
fn check_permutation(perm: &[usize], n: usize, what: &str) -> Result<()> {
    if perm.len() != n {
        return Err(Error::SpecInvalid(format!("{what} has {} entries, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::SpecInvalid(format!("{what} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_weights(weights: &[f64], tol: &Tolerances) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::SpecInvalid("at least one atom is required".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::SpecInvalid("atom weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol.eps_assert {
        return Err(Error::SpecInvalid(format!("atom weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Permutation matrix `P = Σ_x |x⟩⟨T(x)|`, so that `Ad(P)(f) = f∘T`.
pub fn permutation_unitary(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut p = CMatrix::zeros(n, n);
    for (x, &tx) in perm.iter().enumerate() {
        p[(x, tx)] = ONE;
    }
    p
}

/// Commutative system on `n` atoms with `α(f) = f∘T`.
pub fn build_classical_system(weights: &[f64], perm: &[usize], tol: &Tolerances) -> Result<WStarSystem> {
    check_weights(weights, tol)?;
    check_permutation(perm, weights.len(), "permutation")?;
    for (x, &tx) in perm.iter().enumerate() {
        if (weights[x] - weights[tx]).abs() > tol.eps_assert {
            return Err(Error::WeightsNotPreserved {
                atom: x,
                from: weights[x],
                to: weights[tx],
            });
        }
    }
    let n = weights.len();
    WStarSystem::with_unitary(
        MatrixStarAlgebra::diagonal(n),
        TraceFunctional::new(crate::algebra::real_diagonal(weights), true),
        &permutation_unitary(perm),
        tol,
    )
}

/// A finite group given by its multiplication table `table[g][h] = gh`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    table: Vec<Vec<usize>>,
    identity: usize,
}

impl FiniteGroup {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::SpecInvalid("group table is empty".into()));
        }
        for (g, row) in table.iter().enumerate() {
            check_permutation(row, n, &format!("row {g} of the group table"))?;
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|h| table[e][h] == h && table[h][e] == h))
            .ok_or_else(|| Error::SpecInvalid("group table has no identity".into()))?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::SpecInvalid(format!(
                            "group table is not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        Ok(Self { table, identity })
    }

    /// The cyclic group Z_n.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|g| (0..n).map(|h| (g + h) % n).collect()).collect();
        Self { table, identity: 0 }
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g][h]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Checks that `t` is a bijective homomorphism.
    pub fn check_automorphism(&self, t: &[usize]) -> Result<()> {
        let n = self.order();
        check_permutation(t, n, "group automorphism").map_err(|e| Error::NotAutomorphism(e.to_string()))?;
        for g in 0..n {
            for h in 0..n {
                if t[self.mul(g, h)] != self.mul(t[g], t[h]) {
                    return Err(Error::NotAutomorphism(format!(
                        "T(gh) ≠ T(g)T(h) for g = {g}, h = {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Left regular representation `l(g)δ_h = δ_{gh}`.
    pub fn left_regular(&self, g: usize) -> CMatrix {
        let n = self.order();
        let mut m = CMatrix::zeros(n, n);
        for h in 0..n {
            m[(self.mul(g, h), h)] = ONE;
        }
        m
    }

    /// Orbits of `t`, each sorted, ordered by smallest element.
    pub fn orbits(&self, t: &[usize]) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for g in 0..n {
            if seen[g] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut x = g;
            while !seen[x] {
                seen[x] = true;
                orbit.push(x);
                x = t[x];
            }
            orbit.sort_unstable();
            out.push(orbit);
        }
        out
    }
}

/// `U_γ δ_g = δ_{T⁻¹g}`, so that `U_γ f = f∘T` on ℓ²(G).
pub fn group_automorphism_unitary(t: &[usize]) -> CMatrix {
    permutation_unitary(t)
}

/// Group von Neumann algebra `span{l(g)}` with `σ(a) = ⟨δ_e, aδ_e⟩` and
/// `γ = Ad(U_γ)`.
pub fn build_group_vn_system(group: &FiniteGroup, t: &[usize], tol: &Tolerances) -> Result<WStarSystem> {
    group.check_automorphism(t)?;
    let n = group.order();
    let scale = (n as f64).sqrt();
    let basis = (0..n).map(|g| group.left_regular(g).unscale(scale)).collect();
    let algebra = MatrixStarAlgebra::from_orthonormal_basis(n, basis, tol)?;
    let e = group.identity();
    let trace = TraceFunctional::new(basis_vector_matrix(n, e, e), true);
    WStarSystem::with_unitary(algebra, trace, &group_automorphism_unitary(t), tol)
}

/// Integer power of a unitary.
fn unitary_power(u: &CMatrix, k: i64) -> CMatrix {
    let base = if k < 0 { u.adjoint() } else { u.clone() };
    let mut out = CMatrix::identity(u.nrows(), u.ncols());
    for _ in 0..k.unsigned_abs() {
        out = &base * out;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewProductSpec {
    pub weights: Vec<f64>,
    /// `s[p] = S(p)`.
    pub s: Vec<usize>,
    pub group: FiniteGroup,
    /// `t[g] = T(g)`.
    pub t: Vec<usize>,
    pub k: Vec<i64>,
}

/// An invariant submodule attached to a T-orbit of group elements.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitModule {
    pub orbit: Vec<usize>,
    /// Projection onto `span{(E_xx ⊗ l(h))Ω : x ∈ X, h ∈ orbit}` on H.
    pub projection: CMatrix,
}

#[derive(Debug, Clone)]
pub struct SkewProduct {
    pub subsystem: Subsystem,
    /// Orbit modules for every T-orbit other than `{e}`.
    pub orbit_modules: Vec<OrbitModule>,
}

impl SkewProduct {
    pub fn system(&self) -> &WStarSystem {
        self.subsystem.parent()
    }

    pub fn hints(&self) -> Vec<CMatrix> {
        self.orbit_modules.iter().map(|m| m.projection.clone()).collect()
    }
}

/// Skew product `α(a)(p) = γ^{k(p)}(a(Sp))` on functions `X → C`, realized as
/// block-diagonal matrices indexed by `x·|G| + h`, over `F = L∞(ρ) ⊗ 1`.
pub fn build_skew_product(spec: &SkewProductSpec, tol: &Tolerances) -> Result<SkewProduct> {
    let nx = spec.weights.len();
    check_weights(&spec.weights, tol)?;
    check_permutation(&spec.s, nx, "S")?;
    for (p, &sp) in spec.s.iter().enumerate() {
        if (spec.weights[p] - spec.weights[sp]).abs() > tol.eps_assert {
            return Err(Error::SpecInvalid(format!(
                "S does not preserve weights at atom {p} ({} vs {})",
                spec.weights[p], spec.weights[sp]
            )));
        }
    }
    if spec.k.len() != nx {
        return Err(Error::SpecInvalid(format!("k has {} entries, expected {nx}", spec.k.len())));
    }
    let group = &spec.group;
    group
        .check_automorphism(&spec.t)
        .map_err(|e| Error::SpecInvalid(format!("T: {e}")))?;
    let ng = group.order();
    let n = nx * ng;

    let atom = |x: usize| basis_vector_matrix(nx, x, x);
    let scale = (ng as f64).sqrt();
    let mut basis = Vec::with_capacity(nx * ng);
    for x in 0..nx {
        for g in 0..ng {
            basis.push(kron(&atom(x), &group.left_regular(g)).unscale(scale));
        }
    }
    let algebra = MatrixStarAlgebra::from_orthonormal_basis(n, basis, tol)?;
    let e = group.identity();
    let rho: CMatrix = (0..nx).fold(CMatrix::zeros(n, n), |acc, x| {
        acc + kron(&atom(x), &basis_vector_matrix(ng, e, e)) * real(spec.weights[x])
    });
    let trace = TraceFunctional::new(rho, true);

    let u_gamma = group_automorphism_unitary(&spec.t);
    let mut v = CMatrix::zeros(n, n);
    for p in 0..nx {
        let shift = basis_vector_matrix(nx, p, spec.s[p]);
        v += kron(&shift, &unitary_power(&u_gamma, spec.k[p]));
    }
    let system = WStarSystem::with_unitary(algebra, trace, &v, tol)?;

    let id_g = CMatrix::identity(ng, ng);
    let sub_basis = (0..nx).map(|x| kron(&atom(x), &id_g).unscale(scale)).collect();
    let sub_algebra = MatrixStarAlgebra::from_orthonormal_basis(n, sub_basis, tol)?;
    let subsystem = Subsystem::new(system, sub_algebra, tol)?;

    let gns = GnsSpace::build(subsystem.parent(), tol)?;
    let orbit_modules = group
        .orbits(&spec.t)
        .into_iter()
        .filter(|o| o != &vec![e])
        .map(|orbit| {
            let vectors: Vec<CVector> = (0..nx)
                .flat_map(|x| orbit.iter().map(move |&h| (x, h)))
                .map(|(x, h)| gns.vec_of(&kron(&atom(x), &group.left_regular(h))))
                .collect();
            OrbitModule {
                projection: span_projection(&vectors, gns.dim(), tol),
                orbit,
            }
        })
        .collect();

    Ok(SkewProduct {
        subsystem,
        orbit_modules,
    })
}

#[derive(Debug, Clone)]
pub struct TensorSystem {
    pub subsystem: Subsystem,
    /// `u_i = 1 ⊗ c_i` for a σ-orthonormal basis `{c_i}` of C; satisfies
    /// `Σ u_i e u_i* = 1`.
    pub right_basis: Vec<CMatrix>,
    pub dim_b: usize,
    pub dim_c: usize,
}

impl TensorSystem {
    pub fn system(&self) -> &WStarSystem {
        self.subsystem.parent()
    }
}

/// `A = B ⊗ C`, `μ = ν ⊗ σ`, `α = β ⊗ γ`, over `F = B ⊗ 1`.
pub fn build_tensor_system(b: &WStarSystem, c: &WStarSystem, tol: &Tolerances) -> Result<TensorSystem> {
    let nb = b.algebra().ambient_dim();
    let nc = c.algebra().ambient_dim();
    let mut basis = Vec::with_capacity(b.dim() * c.dim());
    for x in b.algebra().basis() {
        for y in c.algebra().basis() {
            basis.push(kron(x, y));
        }
    }
    let algebra = MatrixStarAlgebra::from_orthonormal_basis(nb * nc, basis, tol)?;
    let trace = TraceFunctional::new(kron(b.trace().density(), c.trace().density()), true);
    let dynamics = StarAutomorphism::from_coordinates(kron(b.dynamics().matrix(), c.dynamics().matrix()));
    let system = WStarSystem::new(algebra, trace, dynamics, tol)?;

    let id_c = CMatrix::identity(nc, nc);
    let sub_basis = b
        .algebra()
        .basis()
        .iter()
        .map(|x| kron(x, &id_c).unscale((nc as f64).sqrt()))
        .collect();
    let sub_algebra = MatrixStarAlgebra::from_orthonormal_basis(nb * nc, sub_basis, tol)?;
    let subsystem = Subsystem::new(system, sub_algebra, tol)?;

    let gns_c = GnsSpace::build(c, tol)?;
    let id_b = CMatrix::identity(nb, nb);
    let right_basis = (0..gns_c.dim())
        .map(|i| {
            let mut h = CVector::zeros(gns_c.dim());
            h[i] = ONE;
            kron(&id_b, &gns_c.element_of(&h))
        })
        .collect();

    Ok(TensorSystem {
        subsystem,
        right_basis,
        dim_b: b.dim(),
        dim_c: c.dim(),
    })
}

/// One summand `B_i ⊆ M_{n_i}` of `B = B_1 ⊕ B_2` with its trace density.
#[derive(Debug, Clone, PartialEq)]
pub struct Summand {
    pub algebra: MatrixStarAlgebra,
    pub density: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteExtensionSpec {
    pub b1: Summand,
    /// `None` realizes `B_2 = 0`.
    pub b2: Option<Summand>,
    pub s: f64,
    pub v1: CMatrix,
    pub v2: Option<CMatrix>,
    pub v3: Option<CMatrix>,
    pub v4: CMatrix,
}

/// Residuals of the finite-extension identities.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteExtensionChecks {
    /// Worst of `‖α(b⊗1) − β(b)⊗1‖`, the two expressions for β, and the
    /// vanishing off-diagonal terms, over the B basis.
    pub beta: f64,
    /// `‖α(1⊗m) − displayed block pattern‖` for `m = E12` and `m = E21`.
    pub block_pattern: f64,
    /// Distance of `α(1⊗E12)` from `1⊗M_2`.
    pub nonproduct_distance: f64,
    /// Whether both summands are present, i.e. the non-product claim applies.
    pub nonproduct_expected: bool,
}

#[derive(Debug, Clone)]
pub struct FiniteExtension {
    pub subsystem: Subsystem,
    /// `(B, ν, β)` with `β = Ad(v1 ⊕ v2)`.
    pub base: WStarSystem,
    pub w: CMatrix,
    pub checks: FiniteExtensionChecks,
}

impl FiniteExtension {
    pub fn system(&self) -> &WStarSystem {
        self.subsystem.parent()
    }
}

fn direct_sum(a: &CMatrix, b: Option<&CMatrix>, n2: usize) -> CMatrix {
    let n1 = a.nrows();
    let mut m = CMatrix::zeros(n1 + n2, n1 + n2);
    m.view_mut((0, 0), (n1, n1)).copy_from(a);
    if let Some(b) = b {
        m.view_mut((n1, n1), (n2, n2)).copy_from(b);
    }
    m
}

fn check_unitary_in(v: &CMatrix, alg: &MatrixStarAlgebra, name: &str, tol: &Tolerances) -> Result<()> {
    let n = alg.ambient_dim();
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.nrows(),
        });
    }
    let r = unitarity_residual(v);
    if !(r < tol.eps_assert) {
        return Err(Error::NotUnitary(format!("{name} (residual {r:e})")));
    }
    if !alg.contains(v, tol) {
        return Err(Error::ConstraintViolated(format!("{name} does not lie in its summand")));
    }
    Ok(())
}

fn check_commutes(x: &CMatrix, alg: &MatrixStarAlgebra, name: &str, tol: &Tolerances) -> Result<()> {
    let r = alg
        .basis()
        .iter()
        .map(|b| linalg::commutator(x, b).norm())
        .fold(0.0, f64::max);
    if r > tol.eps_assert {
        return Err(Error::ConstraintViolated(format!(
            "{name} is not in the commutant of its summand (residual {r:e})"
        )));
    }
    Ok(())
}

/// `A = B ⊗ M_2` with `μ = ν ⊗ tr` and `α = Ad(W)`, `W = [[w1, w2], [w3, w4]]`,
/// `w1 = v1⊕0`, `w4 = v4⊕0`, `w2 = 0⊕v2`, `w3 = 0⊕v3`; `F = B ⊗ 1`.
///
/// Ambient index of `b ⊗ m` entries: `(M_2 index)·(n1 + n2) + (B index)`.
pub fn build_finite_extension(spec: &FiniteExtensionSpec, tol: &Tolerances) -> Result<FiniteExtension> {
    let b1 = &spec.b1;
    let n1 = b1.algebra.ambient_dim();
    let (n2, b2_present) = match &spec.b2 {
        Some(b2) => (b2.algebra.ambient_dim(), true),
        None => (0, false),
    };
    if b2_present && !(spec.s > 0.0 && spec.s < 1.0) {
        return Err(Error::SpecInvalid(format!("s = {} must lie in (0, 1)", spec.s)));
    }
    check_unitary_in(&spec.v1, &b1.algebra, "v1", tol)?;
    check_unitary_in(&spec.v4, &b1.algebra, "v4", tol)?;
    check_commutes(&(spec.v4.adjoint() * &spec.v1), &b1.algebra, "v4*v1", tol)?;
    let (v2, v3) = match &spec.b2 {
        Some(b2) => {
            let v2 = spec
                .v2
                .clone()
                .ok_or_else(|| Error::SpecInvalid("v2 is required when B2 is present".into()))?;
            let v3 = spec
                .v3
                .clone()
                .ok_or_else(|| Error::SpecInvalid("v3 is required when B2 is present".into()))?;
            check_unitary_in(&v2, &b2.algebra, "v2", tol)?;
            check_unitary_in(&v3, &b2.algebra, "v3", tol)?;
            check_commutes(&(v3.adjoint() * &v2), &b2.algebra, "v3*v2", tol)?;
            (Some(v2), Some(v3))
        }
        None => (None, None),
    };

    let nb = n1 + n2;
    let s = if b2_present { spec.s } else { 1.0 };
    let embed1 = |x: &CMatrix| direct_sum(x, None, n2);
    let embed2 = |x: &CMatrix| {
        let mut m = CMatrix::zeros(nb, nb);
        m.view_mut((n1, n1), (n2, n2)).copy_from(x);
        m
    };

    // B = B1 ⊕ B2
    let mut b_basis: Vec<CMatrix> = b1.algebra.basis().iter().map(embed1).collect();
    let mut density = embed1(&b1.density) * real(s);
    if let Some(b2) = &spec.b2 {
        b_basis.extend(b2.algebra.basis().iter().map(embed2));
        density += embed2(&b2.density) * real(1.0 - s);
    }
    let b_alg = MatrixStarAlgebra::from_orthonormal_basis(nb, b_basis.clone(), tol)?;
    let nu = TraceFunctional::new(density.clone(), true);
    let v12 = direct_sum(&spec.v1, v2.as_ref(), n2);
    let base = WStarSystem::with_unitary(b_alg, nu, &v12, tol)?;

    let w1 = embed1(&spec.v1);
    let w4 = embed1(&spec.v4);
    let (w2, w3) = match (&v2, &v3) {
        (Some(v2), Some(v3)) => (embed2(v2), embed2(v3)),
        _ => (CMatrix::zeros(nb, nb), CMatrix::zeros(nb, nb)),
    };
    let mut w = CMatrix::zeros(2 * nb, 2 * nb);
    w.view_mut((0, 0), (nb, nb)).copy_from(&w1);
    w.view_mut((0, nb), (nb, nb)).copy_from(&w2);
    w.view_mut((nb, 0), (nb, nb)).copy_from(&w3);
    w.view_mut((nb, nb), (nb, nb)).copy_from(&w4);
    let r = unitarity_residual(&w);
    if !(r < tol.eps_assert) {
        return Err(Error::NotUnitary(format!("W (residual {r:e})")));
    }

    let n = 2 * nb;
    let m2_units = |i: usize, j: usize| basis_vector_matrix(2, i, j);
    let mut a_basis = Vec::with_capacity(4 * b_basis.len());
    for j in 0..2 {
        for i in 0..2 {
            for b in &b_basis {
                a_basis.push(kron(&m2_units(i, j), b));
            }
        }
    }
    let algebra = MatrixStarAlgebra::from_orthonormal_basis(n, a_basis, tol)?;
    let trace = TraceFunctional::new(kron(&CMatrix::identity(2, 2).unscale(2.0), &density), true);
    let system = WStarSystem::with_unitary(algebra, trace, &w, tol)?;

    let id2 = CMatrix::identity(2, 2);
    let sub_basis = b_basis.iter().map(|b| kron(&id2, b).unscale(2f64.sqrt())).collect();
    let sub_algebra = MatrixStarAlgebra::from_orthonormal_basis(n, sub_basis, tol)?;
    let subsystem = Subsystem::new(system, sub_algebra, tol)?;

    // α(b⊗1) = β(b)⊗1 with both expressions for β, and vanishing off-diagonals.
    let wa = w.adjoint();
    let mut beta: f64 = 0.0;
    for b in &b_basis {
        let lhs = &w * kron(&id2, b) * &wa;
        let beta_b = base.alpha(b);
        let first = &w1 * b * w1.adjoint() + &w2 * b * w2.adjoint();
        let second = &w3 * b * w3.adjoint() + &w4 * b * w4.adjoint();
        let off1 = &w1 * b * w3.adjoint() + &w2 * b * w4.adjoint();
        let off2 = &w3 * b * w1.adjoint() + &w4 * b * w2.adjoint();
        beta = beta
            .max((lhs - kron(&id2, &beta_b)).norm())
            .max((&first - &beta_b).norm())
            .max((&second - &beta_b).norm())
            .max(off1.norm())
            .max(off2.norm());
    }

    let block_pattern = [(0, 1), (1, 0), (0, 0), (1, 1)]
        .iter()
        .map(|&(i, j)| {
            let m = m2_units(i, j);
            let lhs = &w * kron(&m, &CMatrix::identity(nb, nb)) * &wa;
            (lhs - displayed_pattern(&m, spec, v2.as_ref(), v3.as_ref(), n1, n2)).norm()
        })
        .fold(0.0, f64::max);

    let e12 = &w * kron(&m2_units(0, 1), &CMatrix::identity(nb, nb)) * &wa;
    let product_part = MatrixStarAlgebra::from_orthonormal_basis(
        n,
        (0..2)
            .flat_map(|j| (0..2).map(move |i| (i, j)))
            .map(|(i, j)| kron(&m2_units(i, j), &CMatrix::identity(nb, nb)).unscale((nb as f64).sqrt()))
            .collect(),
        tol,
    )?;
    let nonproduct_distance = product_part.distance(&e12);

    Ok(FiniteExtension {
        subsystem,
        base,
        w,
        checks: FiniteExtensionChecks {
            beta,
            block_pattern,
            nonproduct_distance,
            nonproduct_expected: b2_present,
        },
    })
}

/// The 4×4 block matrix of `α(1_B ⊗ m)` written out entrywise:
///
/// ```text
/// [ m1·1       0          m2·v1v4*   0        ]
/// [ 0          m4·1       0          m3·v2v3* ]
/// [ m3·v4v1*   0          m4·1       0        ]
/// [ 0          m2·v3v2*   0          m1·1     ]
/// ```
///
/// with row/column blocks (B1, B2) for each M_2 index.
pub fn displayed_pattern(
    m: &CMatrix,
    spec: &FiniteExtensionSpec,
    v2: Option<&CMatrix>,
    v3: Option<&CMatrix>,
    n1: usize,
    n2: usize,
) -> CMatrix {
    let nb = n1 + n2;
    let mut out = CMatrix::zeros(2 * nb, 2 * nb);
    let (m1, m2, m3, m4) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let id1 = CMatrix::identity(n1, n1);
    let mut put = |row: usize, col: usize, block: CMatrix| {
        let (r0, rn) = if row.is_multiple_of(2) { (row / 2 * nb, n1) } else { (row / 2 * nb + n1, n2) };
        let (c0, cn) = if col.is_multiple_of(2) { (col / 2 * nb, n1) } else { (col / 2 * nb + n1, n2) };
        if rn > 0 && cn > 0 {
            out.view_mut((r0, c0), (rn, cn)).copy_from(&block);
        }
    };
    let (v1, v4) = (&spec.v1, &spec.v4);
    put(0, 0, &id1 * m1);
    put(0, 2, v1 * v4.adjoint() * m2);
    put(2, 0, v4 * v1.adjoint() * m3);
    put(2, 2, &id1 * m4);
    if let (Some(v2), Some(v3)) = (v2, v3) {
        let id2 = CMatrix::identity(n2, n2);
        put(1, 1, &id2 * m4);
        put(1, 3, v2 * v3.adjoint() * m3);
        put(3, 1, v3 * v2.adjoint() * m2);
        put(3, 3, &id2 * m1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn classical_examples() {
        let t = tol();
        let sys = build_classical_system(&[1.0], &[0], &t).unwrap();
        assert_eq!(sys.dim(), 1);
        let third = 1.0 / 3.0;
        let sys = build_classical_system(&[third; 3], &[1, 2, 0], &t).unwrap();
        let gns = GnsSpace::build(&sys, &t).unwrap();
        let u = gns.u();
        let u3 = u * u * u;
        assert!((&u3 - CMatrix::identity(3, 3)).norm() < 1e-12);
        assert!((u - CMatrix::identity(3, 3)).norm() > 0.5);
        let err = build_classical_system(&[0.5, 0.25, 0.25], &[1, 0, 2], &t).unwrap_err();
        assert!(matches!(err, Error::WeightsNotPreserved { atom: 0, .. }));
    }

    #[test]
    fn classical_dynamics_is_composition() {
        let t = tol();
        let sys = build_classical_system(&[0.25; 4], &[1, 2, 3, 0], &t).unwrap();
        let f = crate::algebra::real_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        // α(f)(x) = f(T x)
        assert!((sys.alpha(&f) - crate::algebra::real_diagonal(&[2.0, 3.0, 4.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn group_vn_examples() {
        let t = tol();
        let z2 = FiniteGroup::cyclic(2);
        let sys = build_group_vn_system(&z2, &[0, 1], &t).unwrap();
        assert_eq!(sys.dim(), 2);
        assert!(sys.algebra().is_commutative(&t));
        assert!(sys.mu(&z2.left_regular(1)).norm() < 1e-15);

        let z4 = FiniteGroup::cyclic(4);
        let neg = [0, 3, 2, 1];
        let sys = build_group_vn_system(&z4, &neg, &t).unwrap();
        let l = |g| z4.left_regular(g);
        assert!((sys.alpha(&l(1)) - l(3)).norm() < 1e-12);
        assert!((sys.alpha(&l(3)) - l(1)).norm() < 1e-12);
        assert!((sys.alpha(&l(0)) - l(0)).norm() < 1e-12);
        assert!((sys.alpha(&l(2)) - l(2)).norm() < 1e-12);
        for g in 0..4 {
            let expected = if g == 0 { 1.0 } else { 0.0 };
            assert!((sys.mu(&l(g)) - real(expected)).norm() < 1e-15);
        }
        let sys = build_group_vn_system(&z4, &[0, 1, 2, 3], &t).unwrap();
        assert!((sys.dynamics().matrix() - CMatrix::identity(4, 4)).norm() < 1e-12);
        assert!(matches!(
            build_group_vn_system(&z4, &[0, 2, 1, 3], &t),
            Err(Error::NotAutomorphism(_))
        ));
    }

    #[test]
    fn group_table_validation() {
        assert!(FiniteGroup::new(vec![vec![0, 1], vec![1, 1]]).is_err());
        let s3 = s3_table();
        let g = FiniteGroup::new(s3).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(FiniteGroup::cyclic(4).orbits(&[0, 3, 2, 1]), vec![vec![0], vec![1, 3], vec![2]]);
    }

    fn s3_table() -> Vec<Vec<usize>> {
        // permutations of {0,1,2} in lexicographic order
        let perms: Vec<[usize; 3]> = vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        perms
            .iter()
            .map(|a| perms.iter().map(|b| idx([a[b[0]], a[b[1]], a[b[2]]])).collect())
            .collect()
    }

    fn skew_spec(k: Vec<i64>, s: Vec<usize>) -> SkewProductSpec {
        SkewProductSpec {
            weights: vec![1.0 / 3.0; 3],
            s,
            group: FiniteGroup::cyclic(4),
            t: vec![0, 3, 2, 1],
            k,
        }
    }

    #[test]
    fn skew_product_with_trivial_cocycle_and_identity_is_identity() {
        let t = tol();
        let sp = build_skew_product(&skew_spec(vec![0, 0, 0], vec![0, 1, 2]), &t).unwrap();
        assert!((sp.system().dynamics().matrix() - CMatrix::identity(12, 12)).norm() < 1e-12);
    }

    #[test]
    fn skew_product_orbit_modules() {
        let t = tol();
        let sp = build_skew_product(&skew_spec(vec![0, 1, 1], vec![1, 2, 0]), &t).unwrap();
        assert_eq!(sp.system().dim(), 12);
        let orbits: Vec<Vec<usize>> = sp.orbit_modules.iter().map(|m| m.orbit.clone()).collect();
        assert_eq!(orbits, vec![vec![1, 3], vec![2]]);
        assert!((sp.orbit_modules[0].projection.trace() - real(6.0)).norm() < 1e-10);
        assert!((sp.orbit_modules[1].projection.trace() - real(3.0)).norm() < 1e-10);
    }

    #[test]
    fn skew_product_without_cocycle_matches_tensor_product() {
        let t = tol();
        let sp = build_skew_product(&skew_spec(vec![0, 0, 0], vec![1, 2, 0]), &t).unwrap();
        let b = build_classical_system(&[1.0 / 3.0; 3], &[1, 2, 0], &t).unwrap();
        let g = build_group_vn_system(&FiniteGroup::cyclic(4), &[0, 1, 2, 3], &t).unwrap();
        let ts = build_tensor_system(&b, &g, &t).unwrap();
        let a1 = sp.system();
        let a2 = ts.system();
        assert!(a1.algebra().span_residual(a2.algebra()) < 1e-10);
        assert!((a1.trace().density() - a2.trace().density()).norm() < 1e-12);
        for x in a1.algebra().basis() {
            assert!((a1.alpha(x) - a2.alpha(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn tensor_right_basis_is_a_partition() {
        let t = tol();
        let b = build_classical_system(&[0.5, 0.5], &[1, 0], &t).unwrap();
        let u = CMatrix::from_row_slice(2, 2, &[real(0.6), real(0.8), real(-0.8), real(0.6)]);
        let c_sys = WStarSystem::with_unitary(
            MatrixStarAlgebra::full(2),
            TraceFunctional::normalized_trace(2),
            &u,
            &t,
        )
        .unwrap();
        let ts = build_tensor_system(&b, &c_sys, &t).unwrap();
        assert_eq!(ts.right_basis.len(), 4);
        let gns = GnsSpace::build(ts.system(), &t).unwrap();
        let e = gns.subsystem_projection(&ts.subsystem, &t);
        let sum = ts.right_basis.iter().fold(CMatrix::zeros(8, 8), |acc, u| {
            let l = gns.left_rep(u);
            acc + &l * &e * l.adjoint()
        });
        assert!((sum - CMatrix::identity(8, 8)).norm() < 1e-10);
    }

    fn scalar_summand() -> Summand {
        Summand {
            algebra: MatrixStarAlgebra::full(1),
            density: CMatrix::identity(1, 1),
        }
    }

    fn one() -> CMatrix {
        CMatrix::identity(1, 1)
    }

    #[test]
    fn scalar_finite_extension_pattern() {
        let t = tol();
        let spec = FiniteExtensionSpec {
            b1: scalar_summand(),
            b2: Some(scalar_summand()),
            s: 0.5,
            v1: one(),
            v2: Some(one()),
            v3: Some(one()),
            v4: one(),
        };
        let fe = build_finite_extension(&spec, &t).unwrap();
        assert!(fe.checks.beta < 1e-12);
        assert!(fe.checks.block_pattern < 1e-12);
        assert!(fe.checks.nonproduct_distance > 0.1);
        // m2 at block (1,3) of the B1 rows, m2 at (4,2) of the B2 rows
        let e12 = &fe.w * kron(&basis_vector_matrix(2, 0, 1), &CMatrix::identity(2, 2)) * fe.w.adjoint();
        assert!((e12[(0, 2)] - ONE).norm() < 1e-12);
        assert!((e12[(3, 1)] - ONE).norm() < 1e-12);
        assert!((e12.map(|z| z.norm()).sum() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn finite_extension_constraints() {
        let t = tol();
        let b1 = Summand {
            algebra: MatrixStarAlgebra::full(2),
            density: CMatrix::identity(2, 2).unscale(2.0),
        };
        let rot = CMatrix::from_row_slice(2, 2, &[real(0.6), real(-0.8), real(0.8), real(0.6)]);
        let spec = FiniteExtensionSpec {
            b1: b1.clone(),
            b2: Some(scalar_summand()),
            s: 1.0 / 3.0,
            v1: rot.clone(),
            v2: Some(one()),
            v3: Some(CMatrix::from_element(1, 1, c(0.0, 1.0))),
            v4: CMatrix::identity(2, 2),
        };
        let err = build_finite_extension(&spec, &t).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolated(_)));
        let spec = FiniteExtensionSpec { v4: rot.clone(), ..spec };
        let fe = build_finite_extension(&spec, &t).unwrap();
        assert!(fe.checks.beta < 1e-12 && fe.checks.block_pattern < 1e-12);
        let bad = FiniteExtensionSpec {
            v1: rot.scale(2.0),
            ..spec
        };
        assert!(matches!(build_finite_extension(&bad, &t), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn degenerate_extension_is_a_product() {
        let t = tol();
        let rot = CMatrix::from_row_slice(2, 2, &[real(0.6), real(-0.8), real(0.8), real(0.6)]);
        let spec = FiniteExtensionSpec {
            b1: Summand {
                algebra: MatrixStarAlgebra::full(2),
                density: CMatrix::identity(2, 2).unscale(2.0),
            },
            b2: None,
            s: 1.0,
            v1: rot.clone(),
            v2: None,
            v3: None,
            v4: rot.clone(),
        };
        let fe = build_finite_extension(&spec, &t).unwrap();
        assert!(fe.checks.nonproduct_distance < 1e-12);
        assert!(!fe.checks.nonproduct_expected);
        // α = β ⊗ id
        let sys = fe.system();
        for x in sys.algebra().basis() {
            let expected = kron(&CMatrix::identity(2, 2), &rot) * x * kron(&CMatrix::identity(2, 2), &rot).adjoint();
            assert!((sys.alpha(x) - expected).norm() < 1e-12);
        }
    }
}
