//! Relative spectral analysis: U-μ̄-modules in `H ⊖ H_F`, the space
//! `E_{A/F}`, the relative discrete spectrum and weak mixing verdicts, Cesàro
//! averages, and the classical and absolute special cases.

use rand::Rng;

use crate::algebra::{atoms, commutant_of, rounded_key, seeded_rng, Subsystem};
use crate::basic::BasicConstruction;
use crate::error::{Error, Result};
use crate::gns::GnsSpace;
use crate::joining::{relative_ergodicity_check, RelativeErgodicity};
use crate::linalg::{self, commutator, normal_eigen, projector, range_basis, CMatrix, CVector, Orthonormalizer, Tolerances, C64};

/// A candidate submodule `V ⊆ H ⊖ H_F`, given by its projection on H.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmoduleCandidate {
    pub projection: CMatrix,
    pub dim: usize,
    pub is_right_f_module: bool,
    pub is_u_invariant: bool,
    pub mu_bar: f64,
}

impl SubmoduleCandidate {
    pub fn from_projection(bc: &BasicConstruction, projection: CMatrix, tol: &Tolerances) -> Self {
        let u = bc.u();
        let dim = projection.trace().re.round().max(0.0) as usize;
        let is_right_f_module = bc.alg_bar().contains(&projection, tol);
        let is_u_invariant = (u * &projection * u.adjoint() - &projection).norm() < tol.eps_assert;
        let mu_bar = bc.mu_bar_value(&projection).re;
        Self {
            projection,
            dim,
            is_right_f_module,
            is_u_invariant,
            mu_bar,
        }
    }
}

fn validate_hint(bc: &BasicConstruction, p: &CMatrix, index: usize, tol: &Tolerances) -> Result<()> {
    let n = bc.gns().dim();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::InvalidModule(format!("hint {index} has the wrong size")));
    }
    let idem = (p * p - p).norm().max((p - p.adjoint()).norm());
    if idem > tol.eps_assert {
        return Err(Error::InvalidModule(format!("hint {index} is not an orthogonal projection")));
    }
    let mut worst = commutator(p, bc.u()).norm().max(commutator(p, bc.e()).norm());
    for jf in bc.j_f() {
        worst = worst.max(commutator(p, jf).norm());
    }
    if worst > tol.eps_assert {
        return Err(Error::InvalidModule(format!(
            "hint {index} is not a U-invariant right F-submodule projection (residual {worst:e})"
        )));
    }
    Ok(())
}

/// Decomposes `H ⊖ H_F` into the isotypic blocks of the commutant of the
/// algebra generated by U, j(F) and the supplied `hints` (projections onto
/// known U-invariant right F-submodules), restricted to `H ⊖ H_F`.
pub fn find_minimal_modules(
    bc: &BasicConstruction,
    hints: &[CMatrix],
    tol: &Tolerances,
) -> Result<Vec<SubmoduleCandidate>> {
    for (i, p) in hints.iter().enumerate() {
        validate_hint(bc, p, i, tol)?;
    }
    let n = bc.gns().dim();
    let complement = CMatrix::identity(n, n) - bc.e();
    let q = range_basis(&complement, tol.eps_rank);
    let k = q.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let qa = q.adjoint();
    let mut ops = vec![&qa * bc.u() * &q];
    ops.extend(bc.j_f().iter().map(|jf| &qa * jf * &q));
    ops.extend(hints.iter().map(|p| &qa * p * &q));
    let commutant = commutant_of(&ops, k, tol)?;
    let blocks = commutant.block_decomposition(tol);
    let mut modules: Vec<SubmoduleCandidate> = blocks
        .into_iter()
        .map(|p| SubmoduleCandidate::from_projection(bc, &q * p * &qa, tol))
        .collect();
    modules.sort_by(|a, b| {
        let ka = (a.mu_bar * 1e6).round() as i64;
        let kb = (b.mu_bar * 1e6).round() as i64;
        kb.cmp(&ka)
            .then_with(|| rounded_key(&b.projection).cmp(&rounded_key(&a.projection)))
    });
    Ok(modules)
}

/// Residuals certifying a module decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleChecks {
    /// `‖Σ P_V − (1 − e)‖`.
    pub completeness: f64,
    /// `|Σ μ̄(P_V) − μ̄(1 − e)|`.
    pub additivity: f64,
    /// Worst of `‖UP_VU* − P_V‖`, `‖P_V e‖`, `‖[P_V, j(f)]‖`.
    pub module_invariance: f64,
    /// Worst of `‖Ūx − x‖` and `|⟨x, γ_μ̄(ef)⟩|` for `x = γ_μ̄(P_V)`.
    pub witness: f64,
}

pub fn module_checks(bc: &BasicConstruction, modules: &[SubmoduleCandidate]) -> ModuleChecks {
    let n = bc.gns().dim();
    let complement = CMatrix::identity(n, n) - bc.e();
    let sum = modules
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, m| acc + &m.projection);
    let completeness = (&sum - &complement).norm();
    let total: f64 = modules.iter().map(|m| m.mu_bar).sum();
    let additivity = (total - bc.mu_bar_value(&complement).re).abs();
    let u = bc.u();
    let ef: Vec<CVector> = bc
        .subsystem()
        .algebra()
        .basis()
        .iter()
        .map(|f| bc.gamma(&(bc.e() * bc.left_rep(f))))
        .collect();
    let mut module_invariance: f64 = 0.0;
    let mut witness: f64 = 0.0;
    for m in modules {
        let p = &m.projection;
        module_invariance = module_invariance
            .max((u * p * u.adjoint() - p).norm())
            .max((p * bc.e()).norm());
        for jf in bc.j_f() {
            module_invariance = module_invariance.max(commutator(p, jf).norm());
        }
        let x = bc.gamma(p);
        witness = witness.max((bc.u_bar() * &x - &x).norm());
        for y in &ef {
            witness = witness.max(x.dotc(y).norm());
        }
    }
    ModuleChecks {
        completeness,
        additivity,
        module_invariance,
        witness,
    }
}

/// Dimension of `E_{A/F}`: the span of the emitted modules with finite μ̄.
pub fn dim_e(modules: &[SubmoduleCandidate], n: usize, tol: &Tolerances) -> usize {
    let sum = modules
        .iter()
        .filter(|m| m.mu_bar.is_finite())
        .fold(CMatrix::zeros(n, n), |acc, m| acc + &m.projection);
    linalg::rank(&sum, tol.eps_rank.max(1e-8))
}

/// Relative discrete spectrum: `E_{A/F} = H ⊖ H_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdsCertificate {
    pub verdict: bool,
    pub dim_e: usize,
    pub dim_complement: usize,
    /// `(dim V, μ̄(P_V))` for the spanning modules.
    pub modules: Vec<(usize, f64)>,
    pub mu_bar_complement: f64,
}

pub fn rds_verdict(bc: &BasicConstruction, modules: &[SubmoduleCandidate], tol: &Tolerances) -> RdsCertificate {
    let n = bc.gns().dim();
    let complement = CMatrix::identity(n, n) - bc.e();
    let dim_complement = linalg::rank(&complement, tol.eps_rank.max(1e-8));
    let de = dim_e(modules, n, tol);
    RdsCertificate {
        verdict: de == dim_complement,
        dim_e: de,
        dim_complement,
        modules: modules.iter().map(|m| (m.dim, m.mu_bar)).collect(),
        mu_bar_complement: bc.mu_bar_value(&complement).re,
    }
}

/// Relative weak mixing from relative ergodicity of the joining, cross-checked
/// against `dim E_{A/F} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RwmVerdict {
    pub verdict: bool,
    pub dim_e: usize,
    pub ergodicity: RelativeErgodicity,
}

pub fn rwm_verdict_exact(
    bc: &BasicConstruction,
    modules: &[SubmoduleCandidate],
    tol: &Tolerances,
) -> Result<RwmVerdict> {
    let ergodicity = relative_ergodicity_check(bc, tol);
    let de = dim_e(modules, bc.gns().dim(), tol);
    if ergodicity.ergodic != (de == 0) {
        return Err(Error::VerdictMismatch {
            ergodic: ergodicity.ergodic,
            dim_e: de,
        });
    }
    Ok(RwmVerdict {
        verdict: ergodicity.ergodic,
        dim_e: de,
        ergodicity,
    })
}

/// Smallest N at which the early exit may fire.
pub const CESARO_MIN_EXIT: usize = 16;
/// Early-exit threshold on `|c_N − c_{N/2}|`.
pub const CESARO_EXIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CesaroSequence {
    pub values: Vec<f64>,
    pub early_exit_at: Option<usize>,
}

impl CesaroSequence {
    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// `c_N = (1/N) Σ_{n=1..N} λ(|D(a* αⁿ(a))|²)` for `N = 1..n_max`.
///
/// With `early_exit`, stops at the first `N = 2^m ≥ 16` where
/// `|c_N − c_{N/2}| < 1e-6`.
pub fn cesaro_sequence(
    bc: &BasicConstruction,
    a: &CMatrix,
    n_max: usize,
    early_exit: bool,
    tol: &Tolerances,
) -> Result<CesaroSequence> {
    let sys = bc.subsystem().parent();
    let alg = sys.algebra();
    let dexp = bc.expectation();
    let mean = dexp.apply(alg, a).norm();
    if mean > tol.eps_assert * a.norm().max(1.0) {
        return Err(Error::NotMeanZero { norm: mean });
    }
    let a_star = a.adjoint();
    let alpha = sys.dynamics().matrix();
    let mut coords = alg.coords(a);
    let mut sum = 0.0;
    let mut values = Vec::with_capacity(n_max);
    let mut early_exit_at = None;
    for n in 1..=n_max {
        coords = alpha * coords;
        let x = dexp.apply(alg, &(&a_star * alg.element(&coords)));
        sum += sys.mu(&(x.adjoint() * &x)).re;
        values.push(sum / n as f64);
        if early_exit && n >= CESARO_MIN_EXIT && n.is_power_of_two()
            && (values[n - 1] - values[n / 2 - 1]).abs() < CESARO_EXIT_TOL {
                early_exit_at = Some(n);
                break;
            }
    }
    Ok(CesaroSequence {
        values,
        early_exit_at,
    })
}

const ADMISSIBLE_SEED: u64 = 0x5eed_0002;

/// A μ-orthonormal basis of `ker D`, mixed by a seeded unitary.
///
/// Basis elements localized on atoms can have `c_1 = 0` under a shift; the
/// mixed basis elements are generic.
pub fn admissible_elements(bc: &BasicConstruction, tol: &Tolerances) -> Vec<CMatrix> {
    let gns = bc.gns();
    let alg = gns.algebra();
    let dexp = bc.expectation();
    let mut ortho = Orthonormalizer::new(tol.eps_assert);
    for b in alg.basis() {
        let mean_zero = b - dexp.apply(alg, b);
        ortho.push(&gns.vec_of(&mean_zero));
    }
    let q = linalg::columns_to_matrix(gns.dim(), ortho.vectors());
    let k = q.ncols();
    if k == 0 {
        return Vec::new();
    }
    let mut rng = seeded_rng(ADMISSIBLE_SEED);
    let mix = CMatrix::from_fn(k, k, |_, _| linalg::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .qr()
        .q();
    let mixed = q * mix;
    mixed.column_iter().map(|x| gns.element_of(&x.into_owned())).collect()
}

/// Per-atom fibre dimensions of a module over a commutative F.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberAnalysis {
    /// `(ν(y), dim V_y)` per atom y.
    pub fibers: Vec<(f64, usize)>,
    pub sum_dims: f64,
    pub weighted_sum: f64,
    pub mu_bar: f64,
    pub rank: usize,
    pub matches_unweighted: bool,
    pub matches_weighted: bool,
}

pub fn classical_fiber_analysis(
    bc: &BasicConstruction,
    module: &SubmoduleCandidate,
    tol: &Tolerances,
) -> Result<FiberAnalysis> {
    let sub: &Subsystem = bc.subsystem();
    let gns = bc.gns();
    let f_atoms = atoms(sub.algebra(), sub.parent().trace(), tol)?;
    let fibers: Vec<(f64, usize)> = f_atoms
        .iter()
        .map(|(p, nu)| {
            let jp = gns.j(&gns.left_rep(p));
            (*nu, linalg::rank(&(jp * &module.projection), 1e-8))
        })
        .collect();
    let sum_dims = fibers.iter().map(|&(_, d)| d as f64).sum::<f64>();
    let weighted_sum = fibers.iter().map(|&(nu, d)| nu * d as f64).sum::<f64>();
    let rank = fibers.iter().map(|&(_, d)| d).max().unwrap_or(0);
    Ok(FiberAnalysis {
        matches_unweighted: (sum_dims - module.mu_bar).abs() < tol.eps_assert,
        matches_weighted: (weighted_sum - module.mu_bar).abs() < tol.eps_assert,
        fibers,
        sum_dims,
        weighted_sum,
        mu_bar: module.mu_bar,
        rank,
    })
}

/// Eigen-decomposition of U as the discrete-spectrum certificate over C·1.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsoluteSpectrum {
    pub spans: bool,
    pub eigenvalues: Vec<C64>,
    pub residual: f64,
}

pub fn absolute_spectrum_check(gns: &GnsSpace, tol: &Tolerances) -> AbsoluteSpectrum {
    let u = gns.u();
    let n = u.nrows();
    let (vals, vecs) = normal_eigen(u, tol.eigen_cluster);
    let diag = CMatrix::from_diagonal(&CVector::from_vec(vals.clone()));
    let residual = (u * &vecs - &vecs * diag)
        .norm()
        .max((vecs.adjoint() * &vecs - CMatrix::identity(n, n)).norm());
    let spans = linalg::rank(&vecs, tol.eps_rank) == n && residual < tol.eps_assert;
    let mut eigenvalues = vals;
    eigenvalues.sort_by(|a, b| {
        let ka = ((a.arg() * 1e9).round() as i64, (a.norm() * 1e9).round() as i64);
        let kb = ((b.arg() * 1e9).round() as i64, (b.norm() * 1e9).round() as i64);
        ka.cmp(&kb)
    });
    AbsoluteSpectrum {
        spans,
        eigenvalues,
        residual,
    }
}

/// Projector onto the span of the given vectors (helper for module hints).
pub fn span_projection(vectors: &[CVector], dim: usize, tol: &Tolerances) -> CMatrix {
    let mut ortho = Orthonormalizer::new(tol.eps_rank);
    for v in vectors {
        ortho.push(v);
    }
    projector(&linalg::columns_to_matrix(dim, ortho.vectors()))
}
