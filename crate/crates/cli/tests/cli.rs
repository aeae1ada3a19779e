use std::process::Command;

use proptest::prelude::*;
use vnspec::linalg::Tolerances;
use vnspec_cli::description::*;
use vnspec_cli::report::CHECK_NAMES;
use vnspec_cli::{analyze_text, shipped, AnalysisOptions, CliError};

const GOLDEN_SKEW: &str = include_str!("golden/skew_product.json");
const SCHEMA: &str = include_str!("../schema/report.schema.json");

fn defaults() -> (Tolerances, AnalysisOptions) {
    (Tolerances::default(), AnalysisOptions::default())
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vnspec"))
        .args(args)
        .env_remove("VNSPEC_SEED")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const MINIMAL: &str = r#"{
  "format_version": 1,
  "name": "m2_diagonal",
  "system": {
    "kind": "explicit",
    "dim": 2,
    "algebra": {"type": "full"},
    "dynamics": {"type": "identity"},
    "subalgebra": {"type": "diagonal"}
  }
}"#;

#[test]
fn parses_minimal_explicit_document() {
    let desc = parse(MINIMAL).unwrap();
    assert_eq!(desc.name, "m2_diagonal");
    let built = build(&desc, Tolerances::default()).unwrap();
    assert_eq!(built.subsystem.dim(), 2);
}

#[test]
fn skew_product_document_round_trips_through_constructor() {
    let desc = parse(shipped::system("skew_product").unwrap()).unwrap();
    let again = parse(&emit(&desc)).unwrap();
    assert_eq!(desc, again);
    let built = build(&again, Tolerances::default()).unwrap();
    assert_eq!(built.subsystem.parent().dim(), 12);
    assert_eq!(built.hints.len(), 2);
}

#[test]
fn non_unitary_dynamics_names_the_field() {
    let text = MINIMAL.replace(
        r#"{"type": "identity"}"#,
        r#"{"type": "unitary", "matrix": [[[2, 0], [0, 0]], [[0, 0], [1, 0]]]}"#,
    );
    match build(&parse(&text).unwrap(), Tolerances::default()) {
        Err(CliError::Validation { path, .. }) => assert_eq!(path, "system.dynamics.matrix"),
        other => panic!("expected a validation error, got {other:?}"),
    }
    let fe = shipped::system("finite_extension").unwrap().replacen("[[1.0, 0.0]]", "[[2.0, 0.0]]", 1);
    match build(&parse(&fe).unwrap(), Tolerances::default()) {
        Err(CliError::Validation { path, .. }) => assert_eq!(path, "system.v1"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn parse_errors_carry_positions() {
    match parse("{\n  \"format_version\": 1,\n  \"name\": }") {
        Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        parse(&MINIMAL.replace("\"format_version\": 1", "\"format_version\": 9")),
        Err(CliError::Validation { .. })
    ));
}

#[test]
fn subalgebra_equal_to_algebra() {
    let (t, o) = defaults();
    let r = analyze_text(shipped::system("m2_over_itself").unwrap(), t, o).unwrap();
    assert_eq!(r.spectrum.dim_complement, 0);
    assert!(r.spectrum.rds && r.spectrum.rwm);
    assert!(r.spectrum.modules.is_empty());
    assert!(r.pass);
    let doc: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(doc["spectrum"]["modules"], serde_json::json!([]));
}

#[test]
fn m2_flip_report() {
    let (t, o) = defaults();
    let r = analyze_text(shipped::system("m2_flip").unwrap(), t, o).unwrap();
    assert!(r.spectrum.rds && !r.spectrum.rwm);
    let e12 = r.spectrum.cesaro.iter().find(|c| c.element == "E12").unwrap();
    assert!((e12.min - 0.25).abs() < 1e-12);
}

#[test]
fn skew_product_module_table() {
    let (t, o) = defaults();
    let r = analyze_text(shipped::system("skew_product").unwrap(), t, o).unwrap();
    let traces: Vec<f64> = r.spectrum.modules.iter().map(|m| m.mu_bar).collect();
    assert_eq!(traces.len(), 2);
    assert!((traces[0] - 2.0).abs() < 1e-8 && (traces[1] - 1.0).abs() < 1e-8);
    assert_eq!(r.spectrum.modules[0].label.as_deref(), Some("orbit [1, 3]"));
}

#[test]
fn every_ledger_entry_is_present_once() {
    let (t, o) = defaults();
    for (name, text) in shipped::SYSTEMS {
        let r = analyze_text(text, t, o).unwrap();
        let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, CHECK_NAMES.to_vec(), "{name}");
        assert!(r.checks.iter().all(|c| c.residual.is_finite()));
        assert_eq!(r.pass, r.checks.iter().all(|c| c.pass));
        assert!(r.pass, "{name}: {}", r.to_text());
    }
}

#[test]
fn reports_validate_against_schema() {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let (t, o) = defaults();
    for (name, text) in shipped::SYSTEMS {
        let doc: serde_json::Value = serde_json::from_str(&analyze_text(text, t, o).unwrap().to_json()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
}

#[test]
fn golden_skew_product_report() {
    let (t, o) = defaults();
    let r = analyze_text(shipped::system("skew_product").unwrap(), t, o).unwrap();
    assert_eq!(r.to_json(), GOLDEN_SKEW);
}

#[test]
fn text_report_lists_checks() {
    let (t, o) = defaults();
    let text = analyze_text(shipped::system("tensor").unwrap(), t, o).unwrap().to_text();
    for name in CHECK_NAMES {
        assert!(text.contains(name));
    }
    assert!(text.contains("overall: pass"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["analyze", "shipped:classical_cycle", "--quiet"]).0, 0);
    assert_eq!(run(&["certify-rds", "shipped:skew_product"]).0, 0);
    let (code, out, _) = run(&["rwm", "shipped:m2_flip", "--element", "E12", "--N", "256"]);
    assert_eq!(code, 1);
    assert!(out.contains("rwm: false"));
    assert!(out.contains("after N = 256"));
    assert_eq!(run(&["rwm", "shipped:m2_over_itself"]).0, 0);
    assert_eq!(run(&["joining", "shipped:tensor"]).0, 0);
    assert_eq!(run(&["analyze", "/nonexistent/system.json"]).0, 2);
    assert_eq!(run(&["analyze", "shipped:nope"]).0, 2);
    let (code, _, err) = run(&["rwm", "shipped:m2_flip", "--element", "missing"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn bad_document_exits_with_validation_code() {
    let dir = std::env::temp_dir().join(format!("vnspec-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, shipped::system("classical_cycle").unwrap().replace("[1, 2, 0]", "[1, 1, 0]")).unwrap();
    let (code, _, err) = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("system"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn numerical_breakdown_maps_to_exit_three() {
    let e = CliError::from_core(
        "rwm",
        vnspec::Error::VerdictMismatch {
            ergodic: true,
            dim_e: 3,
        },
    );
    assert_eq!(e.exit_code(), 3);
    let e = CliError::from_core("x", vnspec::Error::NotUnitary("W".into()));
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn seed_is_read_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_vnspec"))
        .args(["report", "shipped:m2_flip", "--format", "json"])
        .env("VNSPEC_SEED", "42")
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["seed"], 42);
}

fn matrix_strategy(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(proptest::collection::vec([-2.0f64..2.0, -2.0f64..2.0], n), n)
}

fn spec_strategy() -> impl Strategy<Value = SystemSpec> {
    prop_oneof![
        (proptest::collection::vec(0.01f64..1.0, 1..5), any::<u8>()).prop_map(|(w, r)| SystemSpec::Classical {
            permutation: (0..w.len()).map(|i| (i + r as usize) % w.len()).collect(),
            weights: w,
            subalgebra: AlgebraSpec::Scalars,
        }),
        (1usize..6).prop_map(|n| SystemSpec::GroupVn {
            group: GroupSpec::Cyclic(n),
            automorphism: (0..n).collect(),
            subalgebra: AlgebraSpec::Full,
        }),
        (1usize..4).prop_flat_map(|n| (matrix_strategy(n), matrix_strategy(n))).prop_map(|(g, u)| {
            SystemSpec::Explicit {
                dim: g.len(),
                algebra: AlgebraSpec::Generated { generators: vec![g] },
                density: None,
                dynamics: DynamicsSpec::Coordinates { matrix: u },
                subalgebra: AlgebraSpec::Center,
            }
        }),
    ]
}

proptest! {
    #[test]
    fn parse_emit_parse_is_idempotent(spec in spec_strategy(), name in "[a-z_]{1,12}", eps in proptest::option::of(1e-12f64..1e-6)) {
        let desc = SystemDescription {
            format_version: FORMAT_VERSION,
            name,
            description: None,
            system: spec,
            elements: Default::default(),
            tolerances: ToleranceOverrides { eps_assert: eps, ..Default::default() },
        };
        let once = parse(&emit(&desc)).unwrap();
        prop_assert_eq!(&once, &desc);
        prop_assert_eq!(emit(&once), emit(&parse(&emit(&once)).unwrap()));
    }
}
