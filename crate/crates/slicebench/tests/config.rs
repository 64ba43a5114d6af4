use std::path::PathBuf;

use slicebench::config::{load_scenario, parse_scenario, save_scenario, scenario_to_json, ConfigError};
use slicebench_core::scenario::{paper_default_scenario, IraMode, SliceKind};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn minimal(extra_radio: &str, timescales: &str) -> String {
    format!(
        r#"{{
  "radio": {{"area_side_m": 1000, "ru_positions": [[500, 500]], "antennas_per_ru": 2,
             "max_ru_power_w": 1, "noise_power_dbm": -110, "total_bandwidth_hz": 4e6{extra_radio}}},
  "timescales": {timescales},
  "utility": {{}},
  "slices": [{{"kind": "embb", "user_count": 2, "rate_req_bps": 1e6}}],
  "seed": 1
}}"#
    )
}

#[test]
fn shipped_document_is_the_default_scenario() {
    let sc = load_scenario(&shipped("paper.json")).unwrap();
    assert_eq!(sc, paper_default_scenario());
    assert_eq!(sc.total_bandwidth_hz, 4e6);
    assert_eq!(sc.max_ru_power_w, 1.0);
    assert_eq!(sc.antennas_per_ru, 2);
    assert_eq!(sc.noise_power_dbm, -110.0);
    let kinds: Vec<SliceKind> = sc.slices.iter().map(|s| s.kind()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Ti).count(), 2);
    assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Embb).count(), 3);
    assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Mmtc).count(), 3);
}

#[test]
fn omitted_block_width_gives_forty_blocks() {
    let sc = parse_scenario(&minimal("", r#"{"t_long_s": 600, "t_short_s": 10}"#), "doc").unwrap();
    assert_eq!(sc.block_width_hz, 100_000.0);
    assert_eq!(sc.block_count(), 40);
}

#[test]
fn non_integer_timescale_ratio_is_rejected() {
    let err = parse_scenario(&minimal("", r#"{"t_long_s": 5, "t_short_s": 10}"#), "doc").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { .. }));
    assert!(
        err.to_string().contains("t_long/t_short not a positive integer"),
        "{err}"
    );
}

#[test]
fn unknown_key_names_field_and_line() {
    let text = minimal(r#", "tx_power_dbm": 30"#, r#"{"t_long_s": 600, "t_short_s": 10}"#);
    let err = parse_scenario(&text, "doc.json").unwrap_err();
    let ConfigError::Parse {
        line, field, message, ..
    } = &err
    else {
        panic!("expected a parse error, got {err}");
    };
    assert_eq!(*line, 3);
    assert!(field.starts_with("radio"), "{field}");
    assert!(message.contains("tx_power_dbm"), "{message}");
    assert!(err.to_string().contains("doc.json"));
}

#[test]
fn unknown_slice_key_is_rejected() {
    let text = minimal("", r#"{"t_long_s": 600, "t_short_s": 10}"#)
        .replace("\"rate_req_bps\"", "\"rate\": 1, \"rate_req_bps\"");
    let err = parse_scenario(&text, "doc").unwrap_err();
    assert!(err.to_string().contains("rate"), "{err}");
    assert!(err.to_string().contains("slices"), "{err}");
}

#[test]
fn unknown_slice_kind_is_rejected() {
    let text = minimal("", r#"{"t_long_s": 600, "t_short_s": 10}"#).replace("\"embb\"", "\"urllc\"");
    assert!(matches!(parse_scenario(&text, "doc"), Err(ConfigError::Parse { .. })));
}

#[test]
fn missing_required_field_is_a_parse_error() {
    let text = minimal("", r#"{"t_short_s": 10}"#);
    let err = parse_scenario(&text, "doc").unwrap_err();
    assert!(err.to_string().contains("t_long_s"), "{err}");
}

#[test]
fn invariant_violations_name_the_slice() {
    let text = minimal("", r#"{"t_long_s": 600, "t_short_s": 10}"#).replace("\"user_count\": 2", "\"user_count\": 0");
    let err = parse_scenario(&text, "doc").unwrap_err();
    assert!(err.to_string().contains("slices[0]"), "{err}");
}

#[test]
fn save_and_reload_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let mut sc = paper_default_scenario();
    sc.seed = 9;
    sc.solver.ira_mode = IraMode::SampleAverage;
    sc.solver.admm.rho = 0.37;
    sc.noise_power_dbm = -109.123_456_789;
    save_scenario(&sc, &path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), sc);
    assert_eq!(scenario_to_json(&load_scenario(&path).unwrap()), scenario_to_json(&sc));
}

#[test]
fn missing_file_names_path() {
    let err = load_scenario(&PathBuf::from("/no/such/scenario.json")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
    assert!(err.to_string().contains("/no/such/scenario.json"));
}
