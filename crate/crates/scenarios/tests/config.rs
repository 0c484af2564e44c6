use continuum_scenarios::{bundled, ConfigError, ScenarioConfig};

const BASE: &str = r#"
name = "probe"
seed = 1

[grid]
extents = [[-10.0, 10.0]]
npoints = [128]

[state]
kind = "gaussian"
center = [0.0]
sigma = [1.0]

[run]
dt_step = 1e-3
n_steps = 100
frame_stride = 10
"#;

fn parse(extra: &str) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::from_toml_str(&format!("{BASE}{extra}"))
}

#[test]
fn every_bundled_scenario_validates() {
    for name in bundled::names() {
        let config = bundled::load(name).unwrap();
        assert_eq!(config.name, name);
        config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn empty_analysis_list_is_valid() {
    let config = parse("").unwrap();
    assert!(config.analysis.is_empty());
    config.validate().unwrap();
}

#[test]
fn non_positive_step_is_rejected() {
    let config = ScenarioConfig::from_toml_str(&BASE.replace("dt_step = 1e-3", "dt_step = 0.0")).unwrap();
    let err = config.validate().unwrap_err();
    assert!(err.to_string().contains("run.dt_step"), "{err}");
}

#[test]
fn unknown_analysis_suggests_the_nearest_kind() {
    let err = parse("\n[[analysis]]\nkind = \"bundel\"\n").unwrap_err();
    match &err {
        ConfigError::UnknownAnalysis { kind, hint, .. } => {
            assert_eq!(kind, "bundel");
            assert!(hint.contains("bundle"), "{hint}");
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn region_outside_the_grid_is_named() {
    let config = parse(
        r#"
[[analysis]]
kind = "measure"
regions = [{ name = "far", boxes = [{ lo = [30.0], hi = [40.0] }] }]
"#,
    )
    .unwrap();
    let err = config.validate().unwrap_err();
    assert!(err.to_string().contains("far"), "{err}");
}

#[test]
fn unknown_bundled_name_lists_alternatives() {
    let err = bundled::load("nope").unwrap_err();
    assert!(err.to_string().contains("free_gaussian"), "{err}");
}
