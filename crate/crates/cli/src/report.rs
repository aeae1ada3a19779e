//! Analysis reports and their JSON and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub tolerances: ToleranceSummary,
    pub system: SystemSummary,
    pub basic_construction: BasicSummary,
    pub joining: JoiningSummary,
    pub spectrum: SpectrumReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_extension: Option<FiniteExtensionSummary>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSummary {
    pub eps_rank: f64,
    pub eps_assert: f64,
    pub cesaro_n_max: usize,
    pub extension_residual: f64,
    pub eigen_cluster: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub ambient_dim: usize,
    pub dim_a: usize,
    pub dim_f: usize,
    pub dim_h: usize,
    pub dim_h_f: usize,
    pub a_commutative: bool,
    pub f_commutative: bool,
    /// μ on the algebra basis, as `[re, im]`.
    pub trace_values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicSummary {
    pub dim_alg_bar: usize,
    pub dim_h_bar: usize,
    pub mu_bar_one: f64,
    pub mu_bar_e: f64,
    pub mu_bar_complement: f64,
    pub extension_residual: f64,
    pub commutant_residual: f64,
    /// `‖μ̄ − Σ⟨ξ_i, · ξ_i⟩‖` on the ⟨A,e⟩ basis, when a right basis is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isometry_route_residual: Option<f64>,
    /// `(dim B, dim H_σ)` for tensor systems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensor_factors: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoiningSummary {
    pub dim_h_omega: usize,
    pub min_gram_eigenvalue: f64,
    pub r_isometry: f64,
    pub r_intertwine: f64,
    pub r_kernel: f64,
    pub w_unitary: f64,
    pub omega_marginals: f64,
    pub omega_two_formulas: f64,
    pub omega_invariance: f64,
    pub omega_positivity: f64,
    pub eq_r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleEntry {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub dim: usize,
    pub mu_bar: f64,
    pub is_right_f_module: bool,
    pub is_u_invariant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fibers: Option<FiberEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberEntry {
    pub weights: Vec<f64>,
    pub dims: Vec<usize>,
    pub sum_dims: f64,
    pub weighted_sum: f64,
    pub matches_unweighted: bool,
    pub matches_weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicitySummary {
    pub ergodic: bool,
    pub fixed_dim: usize,
    pub h_lambda_dim: usize,
    pub inclusion_residual: f64,
    pub h_lambda_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroEntry {
    pub element: String,
    pub n: usize,
    pub min: f64,
    pub last: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_exit_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dim_complement: usize,
    pub dim_e: usize,
    pub modules: Vec<ModuleEntry>,
    pub rds: bool,
    pub rwm: bool,
    pub ergodicity: ErgodicitySummary,
    pub cesaro: Vec<CesaroEntry>,
    /// Eigenvalues of U as `[re, im]`, over `F = C·1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absolute_spectrum: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteExtensionSummary {
    pub beta_residual: f64,
    pub block_pattern_residual: f64,
    pub nonproduct_distance: f64,
    pub nonproduct_expected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub applicable: bool,
    pub residual: f64,
    pub threshold: f64,
    pub expect: Expect,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            applicable: true,
            residual,
            threshold,
            expect: Expect::Below,
            pass: residual < threshold,
        }
    }

    pub fn above(name: &str, residual: f64, threshold: f64) -> Self {
        Self {
            pass: residual > threshold,
            expect: Expect::Above,
            ..Self::below(name, residual, threshold)
        }
    }

    pub fn not_applicable(name: &str, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            applicable: false,
            residual: 0.0,
            threshold,
            expect: Expect::Below,
            pass: true,
        }
    }
}

/// Ledger entries, in report order.
pub const CHECK_NAMES: [&str; 16] = [
    "mu_bar_extension",
    "commutant_equality",
    "trace_tracial",
    "alpha_bar_invariance",
    "R_isometry",
    "R_intertwine",
    "omega_marginals",
    "omega_two_formulas",
    "module_completeness",
    "trace_additivity",
    "rds",
    "rwm_exact",
    "rwm_cesaro_consistency",
    "fiber_formula",
    "finite_extension_beta",
    "finite_extension_nonproduct",
];

impl AnalysisReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.system;
        let b = &self.basic_construction;
        let j = &self.joining;
        let sp = &self.spectrum;
        let _ = writeln!(out, "system {} ({})", self.name, self.kind);
        let _ = writeln!(
            out,
            "  dim A = {}, dim F = {}, dim H = {}, dim H_F = {}, ambient {}",
            s.dim_a, s.dim_f, s.dim_h, s.dim_h_f, s.ambient_dim
        );
        let _ = writeln!(out, "basic construction");
        let _ = writeln!(out, "  dim <A,e> = {}, dim H_bar = {}", b.dim_alg_bar, b.dim_h_bar);
        let _ = writeln!(
            out,
            "  mu_bar(1) = {:.10}, mu_bar(e) = {:.10}, mu_bar(1-e) = {:.10}",
            b.mu_bar_one, b.mu_bar_e, b.mu_bar_complement
        );
        if let Some(r) = b.isometry_route_residual {
            let _ = writeln!(out, "  isometry route residual {r:.3e}");
        }
        let _ = writeln!(out, "joining");
        let _ = writeln!(
            out,
            "  dim H_omega = {}, |R*R - I| & |RR* - I| = {:.3e}, |RWR* - U_bar| = {:.3e}",
            j.dim_h_omega, j.r_isometry, j.r_intertwine
        );
        let _ = writeln!(out, "spectrum");
        let _ = writeln!(
            out,
            "  dim(H - H_F) = {}, dim E = {}, rds = {}, rwm = {}",
            sp.dim_complement, sp.dim_e, sp.rds, sp.rwm
        );
        if sp.modules.is_empty() {
            let _ = writeln!(out, "  no modules");
        }
        for m in &sp.modules {
            let label = m.label.as_deref().map(|l| format!(" [{l}]")).unwrap_or_default();
            let _ = writeln!(out, "  module {}{}: dim {}, mu_bar {:.10}", m.index, label, m.dim, m.mu_bar);
            if let Some(f) = &m.fibers {
                let _ = writeln!(
                    out,
                    "    fibers {:?}: sum {} (matches: {}), weighted {:.10} (matches: {})",
                    f.dims, f.sum_dims, f.matches_unweighted, f.weighted_sum, f.matches_weighted
                );
            }
        }
        if let Some(best) = sp.cesaro.iter().max_by(|a, b| a.min.total_cmp(&b.min)) {
            let _ = writeln!(
                out,
                "  cesaro: {} sequences, largest min c_N = {:.6e} ({})",
                sp.cesaro.len(),
                best.min,
                best.element
            );
        }
        if let Some(fe) = &self.finite_extension {
            let _ = writeln!(out, "finite extension");
            let _ = writeln!(
                out,
                "  beta {:.3e}, block pattern {:.3e}, distance from 1 x M_2 {:.6}",
                fe.beta_residual, fe.block_pattern_residual, fe.nonproduct_distance
            );
        }
        let _ = writeln!(out, "checks");
        for c in &self.checks {
            let status = match (c.applicable, c.pass) {
                (false, _) => "n/a ",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            let op = match c.expect {
                Expect::Below => "<",
                Expect::Above => ">",
            };
            let _ = writeln!(
                out,
                "  {status} {:<28} {:.3e} {op} {:.0e}",
                c.name, c.residual, c.threshold
            );
        }
        let _ = writeln!(out, "overall: {}", if self.pass { "pass" } else { "FAIL" });
        out
    }
}
