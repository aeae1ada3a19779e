//! Runs every module on a built system and assembles the report.

use vnspec::algebra::{atoms, seeded_rng};
use vnspec::basic::BasicConstruction;
use vnspec::joining::JoiningData;
use vnspec::linalg::{CMatrix, Tolerances};
use vnspec::spectrum::{
    absolute_spectrum_check, admissible_elements, cesaro_sequence, classical_fiber_analysis, find_minimal_modules,
    module_checks, rds_verdict, rwm_verdict_exact, CESARO_EXIT_TOL,
};

use crate::description::{BuiltSystem, SystemDescription};
use crate::error::CliError;
use crate::report::*;

/// Random pairs per sampled identity.
pub const SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub samples: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            samples: SAMPLES,
        }
    }
}

fn tolerance_summary(t: &Tolerances) -> ToleranceSummary {
    ToleranceSummary {
        eps_rank: t.eps_rank,
        eps_assert: t.eps_assert,
        cesaro_n_max: t.cesaro_n_max,
        extension_residual: t.extension_residual,
        eigen_cluster: t.eigen_cluster,
    }
}

/// Name of the i-th default Cesàro test element.
pub fn admissible_name(i: usize) -> String {
    format!("admissible[{i}]")
}

/// All Cesàro test elements: the mixed ker D basis, then the named elements.
pub fn test_elements(bc: &BasicConstruction, built: &BuiltSystem) -> Vec<(String, CMatrix)> {
    let mut out: Vec<(String, CMatrix)> = admissible_elements(bc, &built.tolerances)
        .into_iter()
        .enumerate()
        .map(|(i, a)| (admissible_name(i), a))
        .collect();
    out.extend(built.elements.iter().cloned());
    out
}

pub fn cesaro_entry(
    bc: &BasicConstruction,
    name: &str,
    a: &CMatrix,
    n_max: usize,
    early_exit: bool,
    tol: &Tolerances,
) -> Result<CesaroEntry, CliError> {
    let seq = cesaro_sequence(bc, a, n_max, early_exit, tol).map_err(|e| match e {
        vnspec::Error::NotMeanZero { .. } => CliError::validation(format!("elements.{name}"), e.to_string()),
        other => CliError::from_core("cesaro", other),
    })?;
    Ok(CesaroEntry {
        element: name.to_string(),
        n: seq.values.len(),
        min: seq.min(),
        last: seq.last(),
        early_exit_at: seq.early_exit_at,
    })
}

pub fn analyze(desc: &SystemDescription, built: &BuiltSystem, opts: AnalysisOptions) -> Result<AnalysisReport, CliError> {
    let tol = &built.tolerances;
    let sub = &built.subsystem;
    let sys = sub.parent();
    let bc = BasicConstruction::build(sub, tol).map_err(|e| CliError::from_core("basic construction", e))?;
    let gns = bc.gns();
    let n = gns.dim();
    let mut rng = seeded_rng(opts.seed);

    let extension = bc.extension_check(&mut rng, opts.samples).max(bc.extension_residual());
    let tracial = bc.tracial_check(&mut rng, opts.samples);
    let alpha_bar = bc.alpha_bar_check();
    let isometry_route_residual = match &built.right_basis {
        Some(us) => {
            let vs = bc.partial_isometries_from_right_basis(us);
            let trace = bc
                .lifted_trace_via_isometries(&vs, tol)
                .map_err(|e| CliError::from_core("right basis", e))?;
            Some(bc.isometry_trace_residual(&trace))
        }
        None => None,
    };
    let complement = CMatrix::identity(n, n) - bc.e();

    let jd = JoiningData::build(&bc, tol).map_err(|e| CliError::from_core("joining", e))?;
    let jc = jd.checks(&bc, opts.seed, opts.samples);

    let hint_projections: Vec<CMatrix> = built.hints.iter().map(|(_, p)| p.clone()).collect();
    let modules = find_minimal_modules(&bc, &hint_projections, tol).map_err(|e| CliError::from_core("modules", e))?;
    let mc = module_checks(&bc, &modules);
    let rds = rds_verdict(&bc, &modules, tol);
    let rwm = rwm_verdict_exact(&bc, &modules, tol).map_err(|e| CliError::from_core("rwm", e))?;

    let f_alg = sub.algebra();
    let f_commutative = f_alg.is_commutative(tol);
    let f_atoms = if f_commutative {
        Some(atoms(f_alg, sys.trace(), tol).map_err(|e| CliError::from_core("fibers", e))?)
    } else {
        None
    };
    let mut fiber_residual: f64 = 0.0;
    let mut entries = Vec::with_capacity(modules.len());
    for (i, m) in modules.iter().enumerate() {
        let label = built
            .hints
            .iter()
            .find(|(_, p)| (p - &m.projection).norm() < tol.eps_assert)
            .map(|(l, _)| l.clone());
        let fibers = match &f_atoms {
            Some(_) => {
                let fa = classical_fiber_analysis(&bc, m, tol).map_err(|e| CliError::from_core("fibers", e))?;
                fiber_residual = fiber_residual.max((fa.weighted_sum - fa.mu_bar).abs());
                Some(FiberEntry {
                    weights: fa.fibers.iter().map(|&(w, _)| w).collect(),
                    dims: fa.fibers.iter().map(|&(_, d)| d).collect(),
                    sum_dims: fa.sum_dims,
                    weighted_sum: fa.weighted_sum,
                    matches_unweighted: fa.matches_unweighted,
                    matches_weighted: fa.matches_weighted,
                })
            }
            None => None,
        };
        entries.push(ModuleEntry {
            index: i,
            label,
            dim: m.dim,
            mu_bar: m.mu_bar,
            is_right_f_module: m.is_right_f_module,
            is_u_invariant: m.is_u_invariant,
            fibers,
        });
    }

    let cesaro = test_elements(&bc, built)
        .iter()
        .map(|(name, a)| cesaro_entry(&bc, name, a, tol.cesaro_n_max, true, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let best_min = cesaro.iter().map(|c| c.min).fold(0.0, f64::max);
    let worst_last = cesaro.iter().map(|c| c.last).fold(0.0, f64::max);

    let absolute_spectrum = (f_alg.dim() == 1).then(|| {
        absolute_spectrum_check(gns, tol)
            .eigenvalues
            .iter()
            .map(|z| [z.re, z.im])
            .collect()
    });

    let eps = tol.eps_assert;
    let dim_h_f = vnspec::linalg::rank(bc.e(), tol.eps_rank.max(1e-8));
    let h_is_h_f = dim_h_f == n;
    let mut checks = vec![
        Check::below("mu_bar_extension", extension, tol.extension_residual),
        Check::below("commutant_equality", bc.commutant_residual(), eps),
        Check::below("trace_tracial", tracial, eps),
        Check::below("alpha_bar_invariance", alpha_bar, eps),
        Check::below("R_isometry", jc.r_isometry, eps),
        Check::below("R_intertwine", jc.r_intertwine, eps),
        Check::below("omega_marginals", jc.omega_marginals, eps),
        Check::below("omega_two_formulas", jc.omega_two_formulas, eps),
        Check::below(
            "module_completeness",
            mc.completeness.max(mc.module_invariance).max(mc.witness),
            eps,
        ),
        Check::below("trace_additivity", mc.additivity, eps),
        Check::below("rds", rds.dim_complement.abs_diff(rds.dim_e) as f64, 0.5),
    ];
    if rwm.verdict != h_is_h_f {
        return Err(CliError::from_core(
            "rwm",
            vnspec::Error::VerdictMismatch {
                ergodic: rwm.verdict,
                dim_e: rwm.dim_e,
            },
        ));
    }
    // Residual counts disagreeing verdicts; any disagreement already returned.
    checks.push(Check::below("rwm_exact", 0.0, 0.5));
    checks.push(if rwm.verdict {
        Check::below("rwm_cesaro_consistency", worst_last, eps)
    } else {
        Check::above("rwm_cesaro_consistency", best_min, CESARO_EXIT_TOL)
    });
    checks.push(if f_commutative && !modules.is_empty() {
        Check::below("fiber_formula", fiber_residual, eps)
    } else {
        Check::not_applicable("fiber_formula", eps)
    });
    let finite_extension = built.finite_extension.as_ref().map(|fe| FiniteExtensionSummary {
        beta_residual: fe.beta,
        block_pattern_residual: fe.block_pattern,
        nonproduct_distance: fe.nonproduct_distance,
        nonproduct_expected: fe.nonproduct_expected,
    });
    match &built.finite_extension {
        Some(fe) => {
            checks.push(Check::below("finite_extension_beta", fe.beta.max(fe.block_pattern), eps));
            checks.push(if fe.nonproduct_expected {
                Check::above("finite_extension_nonproduct", fe.nonproduct_distance, eps)
            } else {
                Check::below("finite_extension_nonproduct", fe.nonproduct_distance, eps)
            });
        }
        None => {
            checks.push(Check::not_applicable("finite_extension_beta", eps));
            checks.push(Check::not_applicable("finite_extension_nonproduct", eps));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    let erg = &rwm.ergodicity;

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        name: desc.name.clone(),
        kind: desc.system.kind().to_string(),
        seed: opts.seed,
        tolerances: tolerance_summary(tol),
        system: SystemSummary {
            ambient_dim: sys.algebra().ambient_dim(),
            dim_a: sys.dim(),
            dim_f: sub.dim(),
            dim_h: n,
            dim_h_f,
            a_commutative: sys.algebra().is_commutative(tol),
            f_commutative,
            trace_values: sys
                .algebra()
                .basis()
                .iter()
                .map(|b| {
                    let z = sys.mu(b);
                    [z.re, z.im]
                })
                .collect(),
        },
        basic_construction: BasicSummary {
            dim_alg_bar: bc.alg_bar().dim(),
            dim_h_bar: bc.bar_gns().dim(),
            mu_bar_one: bc.mu_bar_value(&CMatrix::identity(n, n)).re,
            mu_bar_e: bc.mu_bar_value(bc.e()).re,
            mu_bar_complement: bc.mu_bar_value(&complement).re,
            extension_residual: extension,
            commutant_residual: bc.commutant_residual(),
            isometry_route_residual,
            tensor_factors: built.tensor_dims.map(|(a, b)| [a, b]),
        },
        joining: JoiningSummary {
            dim_h_omega: jc.dim_h_omega,
            min_gram_eigenvalue: jd.min_gram_eigenvalue(),
            r_isometry: jc.r_isometry,
            r_intertwine: jc.r_intertwine,
            r_kernel: jc.r_kernel,
            w_unitary: jc.w_unitary,
            omega_marginals: jc.omega_marginals,
            omega_two_formulas: jc.omega_two_formulas,
            omega_invariance: jc.omega_invariance,
            omega_positivity: jc.omega_positivity,
            eq_r0: jc.eq_r0,
        },
        spectrum: SpectrumReport {
            dim_complement: rds.dim_complement,
            dim_e: rds.dim_e,
            modules: entries,
            rds: rds.verdict,
            rwm: rwm.verdict,
            ergodicity: ErgodicitySummary {
                ergodic: erg.ergodic,
                fixed_dim: erg.fixed_dim,
                h_lambda_dim: erg.h_lambda_dim,
                inclusion_residual: erg.inclusion_residual,
                h_lambda_discrepancy: erg.h_lambda_discrepancy,
            },
            cesaro,
            absolute_spectrum,
        },
        finite_extension,
        checks,
        pass,
    })
}
