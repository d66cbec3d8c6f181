use std::fs;
use std::path::Path;

use glf_core::classify::EvalConfig;
use glf_core::data::SynthConfig;
use glf_core::pipeline::ExtractionConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings shared by every subcommand. A `--config` JSON file overrides
/// the defaults; command-line flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub extraction: ExtractionConfig,
    pub evaluation: EvalConfig,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.synth.seed = seed;
            self.evaluation.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"synth": {"subjects": 4}, "evaluation": {"folds": 4}}"#).unwrap();
        let cfg = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.synth.subjects, 4);
        assert_eq!(cfg.synth.levels, SynthConfig::default().levels);
        assert_eq!(cfg.evaluation.folds, 4);
        assert_eq!(cfg.extraction, ExtractionConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"synths": {}}"#).unwrap();
        assert!(matches!(RunConfig::load(Some(&path)), Err(CliError::Usage(_))));
    }

    #[test]
    fn seed_reaches_every_stage() {
        let mut cfg = RunConfig::default();
        cfg.apply_seed(Some(42));
        assert_eq!((cfg.synth.seed, cfg.evaluation.seed), (42, 42));
    }
}
