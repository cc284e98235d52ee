use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pantswalk::families::FamilySpec;
use pantswalk::solver::{ConvergenceVerdict, SolverOptions, DEFAULT_TOLERANCE};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: u64,
    pub seed: u64,
}

/// File names inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Outputs {
    pub csv: Option<String>,
    pub svg: Option<String>,
    pub json: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub sweep: Vec<u32>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloConfig>,
    /// Default for `certify --series`.
    #[serde(default)]
    pub series: Option<ConvergenceVerdict>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(w) = self.sweep.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CliError::Config(format!(
                "sweep radii must increase strictly: {} then {}",
                w[0], w[1]
            )));
        }
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance < 1.0) {
            return Err(CliError::Config(format!(
                "solver tolerance {} outside (0, 1)",
                self.solver.tolerance
            )));
        }
        if self.montecarlo.is_some_and(|m| m.trials == 0) {
            return Err(CliError::Config(
                "montecarlo.trials must be positive".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the family spec as compact JSON.
    pub fn spec_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.family).expect("spec serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn output_path(&self, out: &Path, name: &Option<String>, default: &str) -> PathBuf {
        out.join(name.as_deref().unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate().map(|_| c)
    }

    #[test]
    fn minimal_config() {
        let c = parse(r#"{"family": {"kind": "CantorTree", "profile": "n", "depth": 6}}"#).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert!(c.sweep.is_empty());
        assert_eq!(c.spec_hash().len(), 64);
    }

    #[test]
    fn radii_must_increase() {
        let text =
            r#"{"family": {"kind": "CantorTree", "profile": "n", "depth": 6}, "sweep": [2, 2]}"#;
        assert!(matches!(parse(text), Err(CliError::Config(_))));
    }

    #[test]
    fn bad_profile_is_a_config_error() {
        let text = r#"{"family": {"kind": "CantorTree", "profile": "n*", "depth": 6}}"#;
        assert!(parse(text).is_err());
    }

    #[test]
    fn hash_tracks_the_family() {
        let a = parse(r#"{"family": {"kind": "CantorTree", "profile": "n", "depth": 6}}"#).unwrap();
        let b = parse(r#"{"family": {"kind": "CantorTree", "profile": "n", "depth": 7}}"#).unwrap();
        assert_ne!(a.spec_hash(), b.spec_hash());
        let c = parse(
            r#"{"family": {"kind": "CantorTree", "profile": "n", "depth": 6}, "sweep": [3]}"#,
        )
        .unwrap();
        assert_eq!(a.spec_hash(), c.spec_hash());
    }
}
