//! Scenario files shipped with the tool. They live in `scenarios/` at the
//! workspace root and are compiled in.

use crate::config::{ConfigError, ScenarioConfig};

pub const BUNDLED: &[(&str, &str)] = &[
    ("free_gaussian", include_str!("../../../scenarios/free_gaussian.toml")),
    ("harmonic_ground", include_str!("../../../scenarios/harmonic_ground.toml")),
    ("two_gaussian_interference", include_str!("../../../scenarios/two_gaussian_interference.toml")),
    ("miw_convergence", include_str!("../../../scenarios/miw_convergence.toml")),
    ("toy_model", include_str!("../../../scenarios/toy_model.toml")),
    ("vortex", include_str!("../../../scenarios/vortex.toml")),
    ("measurement_two_outcome", include_str!("../../../scenarios/measurement_two_outcome.toml")),
    ("measurement_three_outcome", include_str!("../../../scenarios/measurement_three_outcome.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = source(name).ok_or_else(|| ConfigError::Invalid {
        field: "scenario".into(),
        message: format!("no bundled scenario `{name}`; available: {}", names().collect::<Vec<_>>().join(", ")),
    })?;
    ScenarioConfig::from_toml_str(text)
}
