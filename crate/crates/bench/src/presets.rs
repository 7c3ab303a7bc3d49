//! Versioned desk-scale presets shipped with the harness (the full-scale
//! variants are marked long-running in their files).

use crate::config::ExperimentConfig;
use crate::BenchError;

pub const PRESETS: &[(&str, &str)] = &[
    ("quadratic", include_str!("../presets/quadratic.toml")),
    ("mdp", include_str!("../presets/mdp.toml")),
    ("mdp-entropy", include_str!("../presets/mdp-entropy.toml")),
    ("matrix-game", include_str!("../presets/matrix-game.toml")),
    (
        "matrix-game-speg",
        include_str!("../presets/matrix-game-speg.toml"),
    ),
    ("mdp-full", include_str!("../presets/mdp-full.toml")),
    (
        "matrix-game-full",
        include_str!("../presets/matrix-game-full.toml"),
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Loads a config from a filesystem path or, failing that, a preset name.
pub fn load(path_or_name: &str) -> Result<ExperimentConfig, BenchError> {
    let p = std::path::Path::new(path_or_name);
    if p.exists() {
        return ExperimentConfig::from_path(p);
    }
    match preset(path_or_name) {
        Some(text) => ExperimentConfig::from_toml(text),
        None => Err(BenchError::Config(format!(
            "'{path_or_name}' is neither a readable file nor a known preset \
             (known: {})",
            PRESETS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::from_toml(text)
                .unwrap_or_else(|e| panic!("preset {name} invalid: {e}"));
            assert_eq!(cfg.name, *name);
        }
    }

    #[test]
    fn full_scale_presets_are_marked_long_running() {
        for name in ["mdp-full", "matrix-game-full"] {
            let cfg = ExperimentConfig::from_toml(preset(name).unwrap()).unwrap();
            assert!(cfg.long_running, "{name} must be marked long-running");
        }
    }
}
