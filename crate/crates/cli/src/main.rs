use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vnspec::basic::BasicConstruction;
use vnspec::linalg::Tolerances;
use vnspec_cli::analysis::{self, AnalysisOptions};
use vnspec_cli::description::{self, BuiltSystem, SystemDescription};
use vnspec_cli::error::{CliError, EXIT_NEGATIVE, EXIT_NUMERICAL, EXIT_OK};
use vnspec_cli::report::AnalysisReport;
use vnspec_cli::shipped;

#[derive(Parser)]
#[command(name = "vnspec", version, about = "Relative spectral analysis of finite W*-dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Singular-value cutoff for rank decisions.
    #[arg(long, global = true)]
    eps_rank: Option<f64>,
    /// Threshold for identity checks.
    #[arg(long, global = true)]
    eps_assert: Option<f64>,
    /// Seed for sampled checks.
    #[arg(long, global = true, env = "VNSPEC_SEED", default_value_t = analysis::DEFAULT_SEED)]
    seed: u64,
    /// Print only the verdict line.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check and print a summary with the check ledger.
    Analyze { file: PathBuf },
    /// Certify relative discrete spectrum (exit 1 if it fails).
    CertifyRds { file: PathBuf },
    /// Decide relative weak mixing (exit 1 if the system is not weakly mixing).
    Rwm {
        file: PathBuf,
        /// Named test element, or `admissible[i]`.
        #[arg(long)]
        element: Option<String>,
        /// Length of the Cesàro sequence; disables the early exit.
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Relatively independent joining and the isometry R.
    Joining { file: PathBuf },
    /// Full report.
    Report {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Analyze every bundled example system.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// A path, or `shipped:<name>` for a bundled system.
fn read_description(file: &PathBuf) -> Result<String, CliError> {
    let s = file.to_string_lossy();
    if let Some(name) = s.strip_prefix("shipped:") {
        return shipped::system(name)
            .map(str::to_string)
            .ok_or_else(|| CliError::validation("file", format!("no shipped system named {name}")));
    }
    std::fs::read_to_string(file).map_err(|source| CliError::Io {
        path: s.into_owned(),
        source,
    })
}

fn load(cli: &Cli, file: &PathBuf) -> Result<(SystemDescription, BuiltSystem), CliError> {
    let mut desc = description::parse(&read_description(file)?)?;
    if cli.eps_rank.is_some() {
        desc.tolerances.eps_rank = cli.eps_rank;
    }
    if cli.eps_assert.is_some() {
        desc.tolerances.eps_assert = cli.eps_assert;
    }
    let built = description::build(&desc, Tolerances::default())?;
    Ok((desc, built))
}

fn options(cli: &Cli) -> AnalysisOptions {
    AnalysisOptions {
        seed: cli.seed,
        ..AnalysisOptions::default()
    }
}

fn ledger_code(report: &AnalysisReport) -> i32 {
    if report.pass {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Analyze { file } => {
            let (desc, built) = load(cli, file)?;
            let report = analysis::analyze(&desc, &built, options(cli))?;
            if cli.quiet {
                println!("{}: {}", report.name, if report.pass { "pass" } else { "FAIL" });
            } else {
                print!("{}", report.to_text());
            }
            Ok(ledger_code(&report))
        }
        Command::Report { file, format } => {
            let (desc, built) = load(cli, file)?;
            let report = analysis::analyze(&desc, &built, options(cli))?;
            match format {
                Format::Json => print!("{}", report.to_json()),
                Format::Text => print!("{}", report.to_text()),
            }
            Ok(ledger_code(&report))
        }
        Command::CertifyRds { file } => {
            let (desc, built) = load(cli, file)?;
            let report = analysis::analyze(&desc, &built, options(cli))?;
            let sp = &report.spectrum;
            println!("rds: {}", sp.rds);
            if !cli.quiet {
                println!("dim(H - H_F) = {}, dim E = {}", sp.dim_complement, sp.dim_e);
                println!("mu_bar(1 - e) = {:.10}", report.basic_construction.mu_bar_complement);
                for m in &sp.modules {
                    println!("  module {}: dim {}, mu_bar {:.10}", m.index, m.dim, m.mu_bar);
                }
            }
            Ok(if !sp.rds { EXIT_NEGATIVE } else { ledger_code(&report) })
        }
        Command::Rwm { file, element, n } => {
            let (desc, built) = load(cli, file)?;
            let report = analysis::analyze(&desc, &built, options(cli))?;
            let sp = &report.spectrum;
            println!("rwm: {}", sp.rwm);
            if !cli.quiet {
                let e = &sp.ergodicity;
                println!(
                    "dim E = {}, fixed vectors of U_bar = {}, dim H_bar_lambda = {}, inclusion residual {:.3e}",
                    sp.dim_e, e.fixed_dim, e.h_lambda_dim, e.inclusion_residual
                );
                let bc = BasicConstruction::build(&built.subsystem, &built.tolerances)
                    .map_err(|e| CliError::from_core("basic construction", e))?;
                let n_max = n.unwrap_or(built.tolerances.cesaro_n_max);
                let elements = analysis::test_elements(&bc, &built);
                let selected: Vec<_> = match element {
                    Some(name) => {
                        let found = elements.iter().find(|(n, _)| n == name).cloned();
                        vec![found.ok_or_else(|| CliError::validation("--element", format!("unknown element {name}")))?]
                    }
                    None => elements,
                };
                for (name, a) in &selected {
                    let c = analysis::cesaro_entry(&bc, name, a, n_max, n.is_none(), &built.tolerances)?;
                    println!("  c_N for {}: min {:.10e}, last {:.10e} after N = {}", c.element, c.min, c.last, c.n);
                }
            }
            Ok(if !sp.rwm { EXIT_NEGATIVE } else { ledger_code(&report) })
        }
        Command::Joining { file } => {
            let (desc, built) = load(cli, file)?;
            let report = analysis::analyze(&desc, &built, options(cli))?;
            let j = &report.joining;
            let ok = ["R_isometry", "R_intertwine", "omega_marginals", "omega_two_formulas"]
                .iter()
                .all(|name| report.check(name).is_some_and(|c| c.pass));
            println!("joining: {}", if ok { "pass" } else { "FAIL" });
            if !cli.quiet {
                println!("dim H_omega = {}, dim H_bar = {}", j.dim_h_omega, report.basic_construction.dim_h_bar);
                println!("|R*R - I|, |RR* - I|   {:.3e}", j.r_isometry);
                println!("|RWR* - U_bar|         {:.3e}", j.r_intertwine);
                println!("|W*W - I|, W Omega     {:.3e}", j.w_unitary);
                println!("omega marginals        {:.3e}", j.omega_marginals);
                println!("omega two formulas     {:.3e}", j.omega_two_formulas);
                println!("omega invariance       {:.3e}", j.omega_invariance);
                println!("R_0 inner products     {:.3e}", j.eq_r0);
            }
            Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Selftest => {
            let base = Tolerances {
                eps_rank: cli.eps_rank.unwrap_or(Tolerances::default().eps_rank),
                eps_assert: cli.eps_assert.unwrap_or(Tolerances::default().eps_assert),
                ..Tolerances::default()
            };
            let result = shipped::selftest(base, options(cli));
            if cli.quiet {
                for e in &result.systems {
                    println!("{}: {}", e.name, if e.exit_code == 0 { "pass" } else { "FAIL" });
                }
            } else {
                print!("{}", result.to_json());
            }
            Ok(result.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
