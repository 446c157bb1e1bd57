//! Config files and their precedence: file < `CHS_SEED` < flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::PoolingPolicy;
use crate::select::Procedure;
use crate::simulate::{ExperimentConfig, ReplicationConfig};

/// Flat TOML document. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub procedure: Option<Procedure>,
    pub n_tune: Option<usize>,
    pub n_eval: Option<usize>,
    pub n_experiments: Option<usize>,
    pub subset_size: Option<usize>,
    pub master_seed: Option<u64>,
    pub pooling_policy: Option<PoolingPolicy>,
    pub confidence_level: Option<f64>,
    pub n_boot: Option<usize>,
    pub n_reps: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(self, other: FileConfig) -> FileConfig {
        FileConfig {
            procedure: other.procedure.or(self.procedure),
            n_tune: other.n_tune.or(self.n_tune),
            n_eval: other.n_eval.or(self.n_eval),
            n_experiments: other.n_experiments.or(self.n_experiments),
            subset_size: other.subset_size.or(self.subset_size),
            master_seed: other.master_seed.or(self.master_seed),
            pooling_policy: other.pooling_policy.or(self.pooling_policy),
            confidence_level: other.confidence_level.or(self.confidence_level),
            n_boot: other.n_boot.or(self.n_boot),
            n_reps: other.n_reps.or(self.n_reps),
        }
    }
}

/// Reads `CHS_SEED` through `lookup` so tests need not touch the process
/// environment.
pub fn seed_from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Option<u64>> {
    match lookup("CHS_SEED") {
        None => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| {
            Error::InvalidConfig(format!("CHS_SEED={v:?} is not an unsigned integer"))
        }),
    }
}

/// Merges the layers in precedence order.
pub fn layered(file: Option<FileConfig>, env_seed: Option<u64>, flags: FileConfig) -> FileConfig {
    let env = FileConfig {
        master_seed: env_seed,
        ..Default::default()
    };
    file.unwrap_or_default().merge(env).merge(flags)
}

impl FileConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        let d = ExperimentConfig::default();
        ExperimentConfig {
            procedure: self.procedure.unwrap_or(d.procedure),
            n_tune: self.n_tune.unwrap_or(d.n_tune),
            n_eval: self.n_eval.unwrap_or(d.n_eval),
            n_experiments: self.n_experiments.unwrap_or(d.n_experiments),
            subset_size: self.subset_size,
            master_seed: self.master_seed.unwrap_or(d.master_seed),
            pooling_policy: self.pooling_policy.unwrap_or(d.pooling_policy),
            confidence_level: self.confidence_level.unwrap_or(d.confidence_level),
            n_boot: self.n_boot.unwrap_or(d.n_boot),
        }
    }

    pub fn replication(&self, n_tune: usize) -> ReplicationConfig {
        let mut r = ReplicationConfig::new(
            n_tune,
            self.n_reps.unwrap_or(1000),
            self.master_seed.unwrap_or(0),
        );
        if let Some(p) = self.pooling_policy {
            r.pooling_policy = p;
        }
        if let Some(l) = self.confidence_level {
            r.confidence_level = l;
        }
        if let Some(b) = self.n_boot {
            r.n_boot = b;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file =
            FileConfig::parse("master_seed = 1\nn_tune = 5\nprocedure = \"per-env\"\n").unwrap();
        let flags = FileConfig {
            n_tune: Some(7),
            ..Default::default()
        };
        let c = layered(Some(file.clone()), Some(2), flags.clone()).experiment();
        assert_eq!(
            (c.master_seed, c.n_tune, c.procedure),
            (2, 7, Procedure::PerEnv)
        );
        let c = layered(Some(file), None, FileConfig::default()).experiment();
        assert_eq!((c.master_seed, c.n_tune), (1, 5));
        let flags = FileConfig {
            master_seed: Some(3),
            ..Default::default()
        };
        assert_eq!(layered(None, Some(2), flags).experiment().master_seed, 3);
    }

    #[test]
    fn unknown_keys_and_bad_values_report_location() {
        let e = FileConfig::parse("n_tune = 3\nseeds = 4\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(FileConfig::parse("procedure = \"best\"").is_err());
        assert!(FileConfig::parse("pooling_policy = \"full-dataset\"").is_ok());
    }

    #[test]
    fn env_seed_parsing() {
        assert_eq!(seed_from_env(|_| Some("42".into())).unwrap(), Some(42));
        assert_eq!(seed_from_env(|_| None).unwrap(), None);
        assert!(seed_from_env(|_| Some("x".into())).is_err());
    }
}
