//! Example systems bundled with the binary, and the self-test over them.

use rayon::prelude::*;
use serde::Serialize;
use vnspec::linalg::Tolerances;

use crate::analysis::AnalysisOptions;
use crate::report::{AnalysisReport, SCHEMA_VERSION};

pub const SYSTEMS: [(&str, &str); 8] = [
    ("m2_flip", include_str!("../systems/m2_flip.json")),
    ("m2_over_itself", include_str!("../systems/m2_over_itself.json")),
    ("classical_cycle", include_str!("../systems/classical_cycle.json")),
    ("group_z4", include_str!("../systems/group_z4.json")),
    ("tensor", include_str!("../systems/tensor.json")),
    ("skew_product", include_str!("../systems/skew_product.json")),
    ("finite_extension", include_str!("../systems/finite_extension.json")),
    ("finite_extension_m2", include_str!("../systems/finite_extension_m2.json")),
];

pub fn system(name: &str) -> Option<&'static str> {
    SYSTEMS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestEntry {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<AnalysisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selftest {
    pub schema_version: u32,
    pub seed: u64,
    pub systems: Vec<SelftestEntry>,
    pub pass: bool,
}

impl Selftest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("selftest serializes");
        s.push('\n');
        s
    }

    /// Worst exit code over the systems.
    pub fn exit_code(&self) -> i32 {
        self.systems.iter().map(|e| e.exit_code).max().unwrap_or(0)
    }
}

/// Analyzes every shipped system in parallel; results keep the shipped order.
pub fn selftest(base: Tolerances, opts: AnalysisOptions) -> Selftest {
    let systems: Vec<SelftestEntry> = SYSTEMS
        .par_iter()
        .map(|(name, text)| match crate::analyze_text(text, base, opts) {
            Ok(report) => SelftestEntry {
                name: name.to_string(),
                exit_code: if report.pass { 0 } else { crate::error::EXIT_NUMERICAL },
                report: Some(report),
                error: None,
            },
            Err(e) => SelftestEntry {
                name: name.to_string(),
                report: None,
                exit_code: e.exit_code(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pass = systems.iter().all(|e| e.exit_code == 0);
    Selftest {
        schema_version: SCHEMA_VERSION,
        seed: opts.seed,
        systems,
        pass,
    }
}
