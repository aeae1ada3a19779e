//! Acceptance criteria over the shipped systems. Prints one line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use vnspec::algebra::{commutant_of, seeded_rng, MatrixStarAlgebra};
use vnspec::basic::BasicConstruction;
use vnspec::gns::GnsSpace;
use vnspec::linalg::{kron, CMatrix, CVector};
use vnspec::spectrum::cesaro_sequence;
use vnspec_cli::description::{self, SystemDescription, SystemSpec};
use vnspec_cli::{analyze, AnalysisOptions, AnalysisReport};

const TOL: f64 = 1e-8;
const CESARO_TOL: f64 = 1e-9;
const CESARO_FLOOR: f64 = 1e-6;
const RUNTIME_LIMIT: Duration = Duration::from_secs(5);
const SKEW_RUNTIME_LIMIT: Duration = Duration::from_secs(10);
const MAX_AMBIENT: usize = 64;
/// λ(|D(E21 α^n(E12))|²) = |(-1)^n / 2|² for the flip on M_2.
const FLIP_CESARO: f64 = 0.25;
const FLIP_N: usize = 256;

struct Shipped {
    desc: SystemDescription,
    built: description::BuiltSystem,
    report: Result<AnalysisReport, String>,
    elapsed: Duration,
}

fn load_all() -> BTreeMap<&'static str, Shipped> {
    vnspec_cli::shipped::SYSTEMS
        .iter()
        .map(|&(name, text)| {
            let desc = description::parse(text).expect("shipped systems parse");
            let built = description::build(&desc, Default::default()).expect("shipped systems build");
            let start = Instant::now();
            let report = analyze(&desc, &built, AnalysisOptions::default()).map_err(|e| e.to_string());
            let elapsed = start.elapsed();
            (
                name,
                Shipped {
                    desc,
                    built,
                    report,
                    elapsed,
                },
            )
        })
        .collect()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn reports<'a>(all: &'a BTreeMap<&'static str, Shipped>) -> Result<Vec<(&'static str, &'a AnalysisReport)>, Outcome> {
    all.iter()
        .map(|(name, s)| match &s.report {
            Ok(r) => Ok((*name, r)),
            Err(e) => Err(outcome(false, format!("{name}: {e}"))),
        })
        .collect()
}

fn residual(r: &AnalysisReport, check: &str) -> f64 {
    r.check(check).map_or(f64::INFINITY, |c| c.residual)
}

fn lifted_trace(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let rs = match reports(all) {
        Ok(rs) => rs,
        Err(o) => return o,
    };
    let kinds: std::collections::BTreeSet<&str> = all.values().map(|s| s.desc.system.kind()).collect();
    let has_full = all.values().any(|s| s.built.subsystem.is_full());
    let needed = ["explicit", "classical", "tensor", "skew_product", "finite_extension"];
    let coverage = rs.len() >= 6 && has_full && needed.iter().all(|k| kinds.contains(k));
    let worst = rs.iter().map(|(_, r)| residual(r, "mu_bar_extension")).fold(0.0, f64::max);
    let slowest = all.values().map(|s| s.elapsed).max().unwrap_or_default();
    let ambient = all.values().map(|s| s.built.subsystem.parent().algebra().ambient_dim()).max().unwrap_or(0);
    outcome(
        coverage && worst < TOL && slowest < RUNTIME_LIMIT && ambient <= MAX_AMBIENT,
        format!(
            "{} systems, max residual {worst:.2e} < {TOL:.0e}, slowest {:.2} s < {} s, ambient <= {ambient}",
            rs.len(),
            slowest.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    )
}

fn commutant_equality(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut dims_ok = true;
    for s in all.values() {
        let tol = &s.built.tolerances;
        let bc = match BasicConstruction::build(&s.built.subsystem, tol) {
            Ok(bc) => bc,
            Err(e) => return outcome(false, e.to_string()),
        };
        // Independent route: the stacked linear system, not the algebra's own commutant.
        let n = bc.gns().dim();
        let direct = match commutant_of(bc.j_f(), n, tol) {
            Ok(a) => a,
            Err(e) => return outcome(false, e.to_string()),
        };
        dims_ok &= direct.dim() == bc.alg_bar().dim();
        worst = worst.max(bc.commutant_residual()).max(direct.span_residual(bc.alg_bar()));
    }
    outcome(
        dims_ok && worst < TOL,
        format!("dimensions equal: {dims_ok}, max inclusion residual {worst:.2e} < {TOL:.0e}"),
    )
}

fn tensor_oracle(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let s = &all["tensor"];
    let SystemSpec::Tensor { b, c } = &s.desc.system else {
        return outcome(false, "tensor system has the wrong kind");
    };
    let factor = |spec: &SystemSpec| {
        let desc = SystemDescription {
            format_version: description::FORMAT_VERSION,
            name: "factor".into(),
            description: None,
            system: spec.clone(),
            elements: BTreeMap::new(),
            tolerances: Default::default(),
        };
        description::build(&desc, Default::default()).map(|b| b.subsystem.parent().clone())
    };
    let (b_sys, c_sys) = match (factor(b), factor(c)) {
        (Ok(b), Ok(c)) => (b, c),
        _ => return outcome(false, "factors do not build"),
    };
    let tol = &s.built.tolerances;
    let bc = BasicConstruction::build(&s.built.subsystem, tol).expect("tensor builds");
    let c_gns = GnsSpace::build(&c_sys, tol).expect("factor GNS");
    let k = c_gns.dim();
    let expected_dim = b_sys.dim() * k * k;

    // μ⊗Tr via Σ_i ⟨Ω_B⊗h_i, T Ω_B⊗h_i⟩ for a seeded orthonormal basis h_i of H_σ.
    let q = MatrixStarAlgebra::full(k).random_element(&mut seeded_rng(0x7e45)).qr().q();
    let one_b = CMatrix::identity(b_sys.algebra().ambient_dim(), b_sys.algebra().ambient_dim());
    let xi: Vec<CVector> = (0..k)
        .map(|i| {
            let h = c_gns.element_of(&q.column(i).into_owned());
            bc.gns().vec_of(&kron(&one_b, &h))
        })
        .collect();
    let oracle = |t: &CMatrix| xi.iter().map(|v| v.dotc(&(t * v))).sum::<vnspec::linalg::C64>();
    let worst = bc
        .alg_bar()
        .basis()
        .iter()
        .map(|t| (bc.mu_bar_value(t) - oracle(t)).norm())
        .fold(0.0, f64::max);
    let route = s
        .report
        .as_ref()
        .ok()
        .and_then(|r| r.basic_construction.isometry_route_residual)
        .unwrap_or(f64::INFINITY);
    let dim = bc.alg_bar().dim();
    outcome(
        dim == expected_dim && worst < TOL && route < TOL,
        format!(
            "dim <A,e> = {dim} (expected {expected_dim}), |mu_bar - mu x Tr| {worst:.2e}, isometry route {route:.2e} < {TOL:.0e}"
        ),
    )
}

fn isometry_r(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let rs = match reports(all) {
        Ok(rs) => rs,
        Err(o) => return o,
    };
    let iso = rs.iter().map(|(_, r)| r.joining.r_isometry).fold(0.0, f64::max);
    let inter = rs.iter().map(|(_, r)| r.joining.r_intertwine).fold(0.0, f64::max);
    outcome(
        iso < TOL && inter < TOL,
        format!("max |R*R - I|, |RR* - I| {iso:.2e}, max |RWR* - U_bar| {inter:.2e} < {TOL:.0e}"),
    )
}

fn verdict_cross_check(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let rs = match reports(all) {
        Ok(rs) => rs,
        Err(o) => return o,
    };
    let bad: Vec<&str> = rs
        .iter()
        .filter(|(_, r)| {
            let by_modules = r.spectrum.dim_e == 0;
            let trivial = r.system.dim_h == r.system.dim_h_f;
            r.spectrum.rwm != by_modules || by_modules != trivial
        })
        .map(|(n, _)| *n)
        .collect();
    let weakly_mixing = rs.iter().filter(|(_, r)| r.spectrum.rwm).count();
    outcome(
        bad.is_empty(),
        format!("{} systems agree ({weakly_mixing} weakly mixing), disagreeing: {bad:?}", rs.len() - bad.len()),
    )
}

fn skew_traces(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let s = &all["skew_product"];
    let Ok(r) = &s.report else {
        return outcome(false, "skew product analysis failed");
    };
    let trace_of = |label: &str| {
        r.spectrum
            .modules
            .iter()
            .find(|m| m.label.as_deref() == Some(label))
            .map_or(f64::NAN, |m| m.mu_bar)
    };
    let (t13, t2) = (trace_of("orbit [1, 3]"), trace_of("orbit [2]"));
    let pass = (t13 - 2.0).abs() < TOL
        && (t2 - 1.0).abs() < TOL
        && r.spectrum.rds
        && r.system.dim_h == 12
        && s.elapsed < SKEW_RUNTIME_LIMIT;
    outcome(
        pass,
        format!(
            "orbit {{1,3}} trace {t13:.12}, orbit {{2}} trace {t2:.12}, rds {}, dim H {}, {:.2} s < {} s",
            r.spectrum.rds,
            r.system.dim_h,
            s.elapsed.as_secs_f64(),
            SKEW_RUNTIME_LIMIT.as_secs()
        ),
    )
}

fn finite_extension(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["finite_extension", "finite_extension_m2"] {
        let Ok(r) = &all[name].report else {
            return outcome(false, format!("{name} analysis failed"));
        };
        let Some(fe) = &r.finite_extension else {
            return outcome(false, format!("{name} has no finite extension summary"));
        };
        let complement = r.basic_construction.mu_bar_complement;
        let nonproduct = !fe.nonproduct_expected || fe.nonproduct_distance > TOL;
        pass &= fe.beta_residual < TOL
            && fe.block_pattern_residual < TOL
            && nonproduct
            && r.spectrum.rds
            && complement.is_finite();
        lines.push(format!(
            "{name}: beta {:.2e}, pattern {:.2e}, non-product distance {:.3} (expected {}), rds {}, mu_bar(1-e) {complement:.6}",
            fe.beta_residual, fe.block_pattern_residual, fe.nonproduct_distance, fe.nonproduct_expected, r.spectrum.rds
        ));
    }
    let fires = all["finite_extension_m2"]
        .report
        .as_ref()
        .is_ok_and(|r| r.finite_extension.as_ref().is_some_and(|fe| fe.nonproduct_expected));
    outcome(pass && fires, lines.join("; "))
}

fn cesaro(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let s = &all["m2_flip"];
    let tol = &s.built.tolerances;
    let bc = BasicConstruction::build(&s.built.subsystem, tol).expect("m2_flip builds");
    let Some((_, e12)) = s.built.elements.iter().find(|(n, _)| n == "E12") else {
        return outcome(false, "m2_flip has no element E12");
    };
    let flip_dev = match cesaro_sequence(&bc, e12, FLIP_N, false, tol) {
        Ok(seq) if seq.values.len() == FLIP_N => seq.values.iter().map(|c| (c - FLIP_CESARO).abs()).fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    let rs = match reports(all) {
        Ok(rs) => rs,
        Err(o) => return o,
    };
    let mut weakest = f64::INFINITY;
    let mut consistent = true;
    for (_, r) in rs.iter().filter(|(_, r)| r.system.dim_h != r.system.dim_h_f) {
        let best = r
            .spectrum
            .cesaro
            .iter()
            .filter(|c| c.element.starts_with("admissible["))
            .map(|c| c.min)
            .fold(0.0, f64::max);
        weakest = weakest.min(best);
        consistent &= best > CESARO_FLOOR && !r.spectrum.rwm;
    }
    outcome(
        flip_dev <= CESARO_TOL && consistent,
        format!(
            "flip |c_N - {FLIP_CESARO}| <= {flip_dev:.2e} for N <= {FLIP_N}; weakest best admissible min c_N {weakest:.3e} > {CESARO_FLOOR:.0e}"
        ),
    )
}

fn completeness(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let rs = match reports(all) {
        Ok(rs) => rs,
        Err(o) => return o,
    };
    let comp = rs.iter().map(|(_, r)| residual(r, "module_completeness")).fold(0.0, f64::max);
    let add = rs.iter().map(|(_, r)| residual(r, "trace_additivity")).fold(0.0, f64::max);
    outcome(
        comp < TOL && add < TOL,
        format!("max |sum P_V - (1 - e)| {comp:.2e}, max trace additivity {add:.2e} < {TOL:.0e}"),
    )
}

fn fibers(all: &BTreeMap<&'static str, Shipped>) -> Outcome {
    let Ok(r) = &all["skew_product"].report else {
        return outcome(false, "skew product analysis failed");
    };
    let Some(m) = r.spectrum.modules.iter().find(|m| m.label.as_deref() == Some("orbit [1, 3]")) else {
        return outcome(false, "no module for orbit {1,3}");
    };
    let Some(f) = &m.fibers else {
        return outcome(false, "no fiber analysis");
    };
    let dev = (f.weighted_sum - m.mu_bar).abs();
    outcome(
        !f.dims.is_empty() && f.dims.iter().all(|&d| d == 2) && f.matches_weighted && dev < TOL,
        format!(
            "fiber dims {:?}, weighted sum {:.12} vs mu_bar {:.12} ({dev:.2e} < {TOL:.0e})",
            f.dims, f.weighted_sum, m.mu_bar
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_vnspec"))
            .arg("selftest")
            .env_remove("VNSPEC_SEED")
            .output()
            .expect("vnspec runs")
    };
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(
        same && a.status.success() && b.status.success(),
        format!(
            "two selftest runs: {} bytes, identical {same}, exit codes {:?} {:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let all = load_all();
    let criteria: [(&str, Outcome); 11] = [
        ("lifted-trace identity", lifted_trace(&all)),
        ("basic-construction equality", commutant_equality(&all)),
        ("tensor trace", tensor_oracle(&all)),
        ("isometry R", isometry_r(&all)),
        ("weak mixing cross-check", verdict_cross_check(&all)),
        ("skew-product orbit traces", skew_traces(&all)),
        ("finite extension", finite_extension(&all)),
        ("Cesaro consistency", cesaro(&all)),
        ("module completeness", completeness(&all)),
        ("classical fibers", fibers(&all)),
        ("selftest determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
