//! System descriptions, analysis reports and the `vnspec` command-line tool.

pub mod analysis;
pub mod description;
pub mod error;
pub mod report;
pub mod shipped;

pub use analysis::{analyze, AnalysisOptions};
pub use description::{build, parse, SystemDescription};
pub use error::CliError;
pub use report::AnalysisReport;

use vnspec::linalg::Tolerances;

/// Parses, builds and analyzes a description.
pub fn analyze_text(text: &str, base: Tolerances, opts: AnalysisOptions) -> Result<AnalysisReport, CliError> {
    let desc = parse(text)?;
    let built = build(&desc, base)?;
    analyze(&desc, &built, opts)
}
