//! The commutant system `A′`, the relatively independent joining ω of A with
//! A′ over F, its GNS space `(H_ω, W)`, the unitary `R: H_ω → H̄` and the
//! relative ergodicity test.
//!
//! Elements of `A ⊙ A′` are coordinate vectors over the simple tensors
//! `b_k ⊗ j(b_l)`, index `k·d + l`. Since `j(b) = Jb*J` is linear, `a ⊗ j(b)`
//! has coordinates `coords(a) ⊗ coords(b)`.

use rand::Rng;

use crate::algebra::{seeded_rng, MatrixStarAlgebra, TraceFunctional, WStarSystem};
use crate::basic::BasicConstruction;
use crate::error::{Error, Result};
use crate::gns::GnsSpace;
use crate::linalg::{
    self, hermitian_eigen, inclusion_residual, kron, null_space, CMatrix, CVector,
    Orthonormalizer, Tolerances, C64,
};

/// `A′ = j(A)` with `μ′(b) = ⟨Ω, bΩ⟩` and `α′ = Ad(U)`.
#[derive(Debug, Clone)]
pub struct CommutantSystem {
    system: WStarSystem,
    commutant_residual: f64,
}

impl CommutantSystem {
    pub fn build(gns: &GnsSpace, tol: &Tolerances) -> Result<Self> {
        let n = gns.dim();
        let lefts = gns.left_reps();
        let images: Vec<CMatrix> = lefts.iter().map(|l| gns.j(l)).collect();
        let algebra = MatrixStarAlgebra::generate(&images, n, tol)?;
        let left_alg = MatrixStarAlgebra::generate(&lefts, n, tol)?;
        let commutant = left_alg.commutant(tol)?;
        let commutant_residual = if commutant.dim() == algebra.dim() {
            algebra.span_residual(&commutant)
        } else {
            f64::INFINITY
        };
        if !(commutant_residual < tol.eps_assert) {
            return Err(Error::CommutantMismatch {
                residual: commutant_residual,
            });
        }
        let omega = gns.omega();
        let trace = TraceFunctional::new(omega * omega.adjoint(), true);
        let system = WStarSystem::with_unitary(algebra, trace, gns.u(), tol)?;
        Ok(Self {
            system,
            commutant_residual,
        })
    }

    pub fn system(&self) -> &WStarSystem {
        &self.system
    }

    pub fn commutant_residual(&self) -> f64 {
        self.commutant_residual
    }
}

#[derive(Debug, Clone)]
pub struct JoiningData {
    dim_a: usize,
    /// `ω(b_p ⊗ j(b_q))` from `⟨Ω, D(a)D′(b)Ω⟩`.
    omega_values: CMatrix,
    /// The same values from `μ̄(e a e j(b))`.
    omega_values_bar: CMatrix,
    gram: CMatrix,
    min_gram_eigenvalue: f64,
    gamma: CMatrix,
    gamma_pinv: CMatrix,
    kernel: CMatrix,
    tau: CMatrix,
    w: CMatrix,
    r0: CMatrix,
    r: CMatrix,
    identity_coords: CVector,
}

impl JoiningData {
    pub fn build(bc: &BasicConstruction, tol: &Tolerances) -> Result<Self> {
        let gns = bc.gns();
        let sys = bc.subsystem().parent();
        let alg = sys.algebra();
        let d = alg.dim();
        let dexp = bc.expectation();
        let lefts = bc.left_reps();
        let e = bc.e();
        let omega = gns.omega();

        let d_lefts: Vec<CMatrix> = alg
            .basis()
            .iter()
            .map(|b| gns.left_rep(&dexp.apply(alg, b)))
            .collect();
        // D′ = j∘D∘j, so D′(j(b)) = j(D(b)).
        let d_primes: Vec<CMatrix> = d_lefts.iter().map(|l| gns.j(l)).collect();
        let omega_values = CMatrix::from_fn(d, d, |p, q| omega.dotc(&(&d_lefts[p] * &d_primes[q] * omega)));
        let el: Vec<CMatrix> = lefts.iter().map(|l| e * l * e).collect();
        let omega_values_bar = CMatrix::from_fn(d, d, |p, q| bc.mu_bar_value(&(&el[p] * &lefts[q])));

        // G[(k,l),(m,n)] = ω(b_k* b_m ⊗ j(b_n b_l*)).
        let mut s = CMatrix::zeros(d * d, d);
        let mut t = CMatrix::zeros(d * d, d);
        for i in 0..d {
            for j in 0..d {
                let bi = &alg.basis()[i];
                let bj = &alg.basis()[j];
                s.set_row(i * d + j, &alg.coords(&(bi.adjoint() * bj)).transpose());
                t.set_row(i * d + j, &alg.coords(&(bi * bj.adjoint())).transpose());
            }
        }
        let x = &s * &omega_values * t.transpose();
        let gram = CMatrix::from_fn(d * d, d * d, |row, col| {
            let (k, l) = (row / d, row % d);
            let (m, n) = (col / d, col % d);
            x[(k * d + m, n * d + l)]
        });
        let gram = linalg::hermitian_part(&gram);

        let (vals, vecs) = hermitian_eigen(&gram);
        let vmax = vals.last().copied().unwrap_or(0.0).max(1.0);
        let min_gram_eigenvalue = vals.first().copied().unwrap_or(0.0);
        if min_gram_eigenvalue < -tol.eps_assert * vmax {
            return Err(Error::StateNotPositive {
                min_eigenvalue: min_gram_eigenvalue,
            });
        }
        let cut = tol.eps_rank * vmax;
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cut).collect();
        let drop: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= cut).collect();
        let r = keep.len();
        let mut gamma = CMatrix::zeros(r, d * d);
        let mut gamma_pinv = CMatrix::zeros(d * d, r);
        for (row, &i) in keep.iter().enumerate() {
            let v = vecs.column(i);
            let sq = vals[i].sqrt();
            gamma.set_row(row, &(v.adjoint() * linalg::real(sq)));
            gamma_pinv.set_column(row, &(v * linalg::real(1.0 / sq)));
        }
        let kernel = vecs.select_columns(&drop);

        let alpha = sys.dynamics().matrix();
        let tau = kron(alpha, alpha);
        let w = &gamma * &tau * &gamma_pinv;

        let bar = bc.bar_gns();
        let mut r0 = CMatrix::zeros(bar.dim(), d * d);
        let le: Vec<CMatrix> = lefts.iter().map(|l| l * e).collect();
        for k in 0..d {
            for l in 0..d {
                r0.set_column(k * d + l, &bc.gamma(&(&le[k] * &lefts[l])));
            }
        }
        let r_map = &r0 * &gamma_pinv;

        Ok(Self {
            dim_a: d,
            omega_values,
            omega_values_bar,
            gram,
            min_gram_eigenvalue,
            gamma,
            gamma_pinv,
            kernel,
            tau,
            w,
            r0,
            r: r_map,
            identity_coords: alg.coords(&alg.identity()),
        })
    }

    pub fn dim_h_omega(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn omega_values(&self) -> &CMatrix {
        &self.omega_values
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.min_gram_eigenvalue
    }

    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    /// Coordinates of `a ⊗ j(b)` in `A ⊙ A′`.
    pub fn simple_tensor(&self, a: &CVector, b: &CVector) -> CVector {
        a.kronecker(b)
    }

    /// `ω(t)` for a coordinate vector t.
    pub fn omega(&self, t: &CVector) -> C64 {
        let d = self.dim_a;
        let mut sum = C64::new(0.0, 0.0);
        for k in 0..d {
            for l in 0..d {
                sum += t[k * d + l] * self.omega_values[(k, l)];
            }
        }
        sum
    }

    /// `γ_ω(t)` in `H_ω`.
    pub fn gamma_omega(&self, t: &CVector) -> CVector {
        &self.gamma * t
    }

    pub fn omega_vector(&self) -> CVector {
        let one = self.simple_tensor(&self.identity_coords, &self.identity_coords);
        self.gamma_omega(&one)
    }

    /// Largest deviation between the two formulas for ω on basis pairs.
    pub fn two_formula_residual(&self) -> f64 {
        (&self.omega_values - &self.omega_values_bar).camax()
    }

    /// Largest of `|ω(a⊗1) − μ(a)|` and `|ω(1⊗j(b)) − μ′(j(b))|` over the basis.
    pub fn marginal_residual(&self, sys: &WStarSystem) -> f64 {
        let alg = sys.algebra();
        let one = &self.identity_coords;
        let mut worst: f64 = (self.omega(&self.simple_tensor(one, one)) - linalg::ONE).norm();
        for (p, b) in alg.basis().iter().enumerate() {
            let mut cp = CVector::zeros(self.dim_a);
            cp[p] = linalg::ONE;
            let mu = sys.trace().value(b);
            worst = worst.max((self.omega(&self.simple_tensor(&cp, one)) - mu).norm());
            // μ′(j(b)) = ⟨Ω, j(b)Ω⟩ = ⟨Ω, bΩ⟩ = μ(b) for the tracial GNS.
            worst = worst.max((self.omega(&self.simple_tensor(one, &cp)) - mu).norm());
        }
        worst
    }

    /// Largest `|ω(τ(t)) − ω(t)|` over the tensor basis.
    pub fn invariance_residual(&self) -> f64 {
        let n = self.dim_a * self.dim_a;
        (0..n)
            .map(|i| {
                let mut t = CVector::zeros(n);
                t[i] = linalg::ONE;
                (self.omega(&(&self.tau * &t)) - self.omega(&t)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `‖R₀ k‖` over the kernel of the ω Gram matrix (well-definedness of R).
    pub fn kernel_residual(&self) -> f64 {
        if self.kernel.ncols() == 0 {
            return 0.0;
        }
        (&self.r0 * &self.kernel).norm()
    }

    /// `max(‖R*R − I‖, ‖RR* − I‖)`.
    pub fn isometry_residual(&self) -> f64 {
        let r = &self.r;
        let a = (r.adjoint() * r - CMatrix::identity(r.ncols(), r.ncols())).norm();
        let b = (r * r.adjoint() - CMatrix::identity(r.nrows(), r.nrows())).norm();
        a.max(b)
    }

    /// `‖RWR* − Ū‖`.
    pub fn intertwine_residual(&self, bc: &BasicConstruction) -> f64 {
        if self.r.nrows() != bc.u_bar().nrows() {
            return f64::INFINITY;
        }
        (&self.r * &self.w * self.r.adjoint() - bc.u_bar()).norm()
    }

    /// `‖W*W − I‖` and `‖WΩ_ω − Ω_ω‖`.
    pub fn w_residual(&self) -> f64 {
        let n = self.w.nrows();
        let unit = (self.w.adjoint() * &self.w - CMatrix::identity(n, n)).norm();
        let om = self.omega_vector();
        unit.max((&self.w * &om - om).norm())
    }

    /// Largest `|⟨γ_μ̄(R₀s), γ_μ̄(R₀t)⟩ − ⟨γ_ω s, γ_ω t⟩|` over random simple tensors.
    pub fn eq_r0_check<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let d = self.dim_a;
        let random = |rng: &mut R| {
            let a = CVector::from_fn(d, |_, _| linalg::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let b = CVector::from_fn(d, |_, _| linalg::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            self.simple_tensor(&a, &b)
        };
        (0..samples)
            .map(|_| {
                let s = random(rng);
                let t = random(rng);
                let lhs = (&self.r0 * &s).dotc(&(&self.r0 * &t));
                let rhs = s.dotc(&(&self.gram * &t));
                (lhs - rhs).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `ω(t*t)` violation below zero over random t, via the Gram matrix.
    pub fn positivity_check<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let n = self.dim_a * self.dim_a;
        (0..samples)
            .map(|_| {
                let t = CVector::from_fn(n, |_, _| linalg::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                (-t.dotc(&(&self.gram * &t)).re).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Images under R of `γ_ω(F⊗1)` and `γ_ω(1⊗j(F))`.
    pub fn h_lambda_images(&self, bc: &BasicConstruction) -> (Vec<CVector>, Vec<CVector>) {
        let alg = bc.subsystem().parent().algebra();
        let one = &self.identity_coords;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for f in bc.subsystem().algebra().basis() {
            let cf = alg.coords(f);
            left.push(&self.r * self.gamma_omega(&self.simple_tensor(&cf, one)));
            right.push(&self.r * self.gamma_omega(&self.simple_tensor(one, &cf)));
        }
        (left, right)
    }

    pub fn gamma_pinv(&self) -> &CMatrix {
        &self.gamma_pinv
    }
}

/// Outcome of testing `H̄^Ū ⊆ H̄_λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeErgodicity {
    pub ergodic: bool,
    pub fixed_dim: usize,
    pub h_lambda_dim: usize,
    pub inclusion_residual: f64,
    /// Subspace distance between `span γ_μ̄(ef)` and `span γ_μ̄(fe)`.
    pub h_lambda_discrepancy: f64,
    /// A unit Ū-fixed vector orthogonal to H̄_λ when not ergodic.
    pub witness: Option<CVector>,
}

fn span_projector(vectors: &[CVector], dim: usize, eps: f64) -> CMatrix {
    let mut ortho = Orthonormalizer::new(eps);
    for v in vectors {
        ortho.push(v);
    }
    linalg::projector(&linalg::columns_to_matrix(dim, ortho.vectors()))
}

pub fn relative_ergodicity_check(bc: &BasicConstruction, tol: &Tolerances) -> RelativeErgodicity {
    let n = bc.bar_gns().dim();
    let u_bar = bc.u_bar();
    let fixed = null_space(&(u_bar - CMatrix::identity(n, n)), tol.eigen_cluster);
    let e = bc.e();
    let (ef, fe): (Vec<CVector>, Vec<CVector>) = bc
        .subsystem()
        .algebra()
        .basis()
        .iter()
        .map(|f| {
            let lf = bc.left_rep(f);
            (bc.gamma(&(e * &lf)), bc.gamma(&(&lf * e)))
        })
        .unzip();
    let p_lambda = span_projector(&ef, n, tol.eps_rank);
    let p_alt = span_projector(&fe, n, tol.eps_rank);
    let h_lambda_discrepancy = (&p_lambda - &p_alt).norm();
    let p_fixed = linalg::projector(&fixed);
    let inclusion = inclusion_residual(&p_fixed, &p_lambda);
    let ergodic = inclusion < tol.eps_assert;
    let witness = if ergodic {
        None
    } else {
        let outside = (CMatrix::identity(n, n) - &p_lambda) * &fixed;
        (0..outside.ncols())
            .map(|j| outside.column(j).into_owned())
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .map(|v| v.unscale(v.norm()))
    };
    RelativeErgodicity {
        ergodic,
        fixed_dim: fixed.ncols(),
        h_lambda_dim: linalg::rank(&p_lambda, tol.eps_rank),
        inclusion_residual: inclusion,
        h_lambda_discrepancy,
        witness,
    }
}

/// Residuals of the joining identities with a fixed sampling seed.
#[derive(Debug, Clone, PartialEq)]
pub struct JoiningChecks {
    pub omega_marginals: f64,
    pub omega_two_formulas: f64,
    pub omega_invariance: f64,
    pub omega_positivity: f64,
    pub r_isometry: f64,
    pub r_intertwine: f64,
    pub r_kernel: f64,
    pub eq_r0: f64,
    pub w_unitary: f64,
    pub dim_h_omega: usize,
    pub dim_h_bar: usize,
}

impl JoiningData {
    pub fn checks(&self, bc: &BasicConstruction, seed: u64, samples: usize) -> JoiningChecks {
        let mut rng = seeded_rng(seed);
        JoiningChecks {
            omega_marginals: self.marginal_residual(bc.subsystem().parent()),
            omega_two_formulas: self.two_formula_residual(),
            omega_invariance: self.invariance_residual(),
            omega_positivity: self.positivity_check(&mut rng, samples),
            r_isometry: self.isometry_residual(),
            r_intertwine: self.intertwine_residual(bc),
            r_kernel: self.kernel_residual(),
            eq_r0: self.eq_r0_check(&mut rng, samples),
            w_unitary: self.w_residual(),
            dim_h_omega: self.dim_h_omega(),
            dim_h_bar: bc.bar_gns().dim(),
        }
    }
}
