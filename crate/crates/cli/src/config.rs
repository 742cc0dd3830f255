use std::fs;
use std::path::{Path, PathBuf};

use qclass::baselines::{ForestConfig, LogRegConfig, SvmConfig};
use qclass::drrnn::{HyperParams, SearchSpace};
use qclass::ensemble::C2Config;
use qclass::preprocess::RuleConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub wordvecs: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub split_seeds: Vec<u64>,
    pub folds: usize,
    pub hp: HyperParams,
    pub preprocess: RuleConfig,
    pub search: SearchSpace,
    pub search_budget: usize,
    pub tfidf_n_min: usize,
    pub tfidf_n_max: usize,
    pub svm: SvmConfig,
    pub logreg: LogRegConfig,
    pub forest: ForestConfig,
    pub c2: C2Config,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 0,
            split_seeds: vec![1, 2, 3, 4],
            folds: 5,
            hp: HyperParams::default(),
            preprocess: RuleConfig::default(),
            search: SearchSpace::default(),
            search_budget: 20,
            tfidf_n_min: 2,
            tfidf_n_max: 5,
            svm: SvmConfig::default(),
            logreg: LogRegConfig::default(),
            forest: ForestConfig::default(),
            c2: C2Config::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| qclass::Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The file at `path`, or the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
        value.as_deref().ok_or_else(|| CliError::Config(format!("missing path: {what}")))
    }

    /// Creates the output directory and writes this config into it.
    pub fn prepare_output(&self) -> Result<PathBuf, CliError> {
        let dir = self.require(&self.paths.output_dir, "output_dir")?.to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| qclass::Error::io(&dir, e))?;
        let path = dir.join("config.json");
        let text = serde_json::to_string_pretty(self).expect("config serializes") + "\n";
        fs::write(&path, text).map_err(|e| qclass::Error::io(&path, e))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let mut c = RunConfig::default();
        c.paths.train = Some("train.jsonl".into());
        c.hp.max_epochs = 12;
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults_and_unknown_keys_fail() {
        let c: RunConfig = serde_json::from_str(r#"{"hp": {"n_blocks": 3}, "seed": 9}"#).unwrap();
        assert_eq!(c.hp.n_blocks, 3);
        assert_eq!(c.hp.block_dim, 81);
        assert_eq!(c.seed, 9);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
    }
}
