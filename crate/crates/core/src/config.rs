//! Experiment configuration (TOML). Secrets never live here: only the name
//! of the environment variable holding the API key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::FrequencyTransform;
use crate::corpus::DatasetKind;
use crate::error::{Error, Result};
use crate::gateway::{FineTuneHyperparams, MockPersonality};
use crate::metrics::R2Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ZeroShot,
    FewShot,
    FineTune,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ZeroShot => "zero_shot",
            Regime::FewShot => "few_shot",
            Regime::FineTune => "fine_tune",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_shot" => Ok(Regime::ZeroShot),
            "few_shot" => Ok(Regime::FewShot),
            "fine_tune" => Ok(Regime::FineTune),
            _ => Err(Error::Config(format!(
                "regime: unknown value `{s}` (expected zero_shot, few_shot or fine_tune)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: PathBuf,
    pub embedding_path: Option<PathBuf>,
    pub surprisal_path: Option<PathBuf>,
    pub frequency_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub base_url: String,
    pub model: String,
    /// Empty for endpoints that need no key.
    pub auth_env_var: String,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub mock: Option<MockPersonality>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: String::new(),
            auth_env_var: "OPENAI_API_KEY".into(),
            max_in_flight: 8,
            max_retries: 5,
            mock: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub split_seed: u64,
    pub fewshot_seed: u64,
    pub baseline_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub finetune_train_fraction: f64,
    pub baseline_n: usize,
    pub baseline_train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            finetune_train_fraction: 0.25,
            baseline_n: 100,
            baseline_train_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FewShotConfig {
    pub k: usize,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        FewShotConfig { k: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FineTuneConfig {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate_multiplier: f64,
    pub poll_interval_secs: f64,
    pub timeout_secs: f64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        let hp = FineTuneHyperparams::default();
        FineTuneConfig {
            epochs: hp.epochs,
            batch_size: hp.batch_size,
            learning_rate_multiplier: hp.learning_rate_multiplier,
            poll_interval_secs: 30.0,
            timeout_secs: 24.0 * 3600.0,
        }
    }
}

impl FineTuneConfig {
    pub fn hyperparams(&self) -> FineTuneHyperparams {
        FineTuneHyperparams {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate_multiplier: self.learning_rate_multiplier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub r2_mode: R2Mode,
    pub include_clamped: bool,
    pub keep_substitutions: bool,
    pub min_position_n: usize,
    pub retry_failed_parse: bool,
    pub frequency_transform: FrequencyTransform,
    pub frequency_floor: f64,
    pub ridge: Option<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            r2_mode: R2Mode::SquaredPearson,
            include_clamped: true,
            keep_substitutions: true,
            min_position_n: 20,
            retry_failed_parse: false,
            frequency_transform: FrequencyTransform::Log10,
            frequency_floor: crate::baselines::features::DEFAULT_FREQUENCY_FLOOR,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub splits: SplitConfig,
    #[serde(default)]
    pub few_shot: FewShotConfig,
    #[serde(default)]
    pub fine_tune: FineTuneConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_regime() -> Regime {
    Regime::ZeroShot
}

fn fraction(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{key}: must lie strictly between 0 and 1, got {v}"
        )))
    }
}

fn positive(key: &str, ok: bool, shown: impl fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{key}: must be positive, got {shown}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.dataset.path);
        for p in [
            &mut self.dataset.embedding_path,
            &mut self.dataset.surprisal_path,
            &mut self.dataset.frequency_path,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        fraction("splits.finetune_train_fraction", self.splits.finetune_train_fraction)?;
        fraction("splits.baseline_train_fraction", self.splits.baseline_train_fraction)?;
        positive("splits.baseline_n", self.splits.baseline_n > 0, self.splits.baseline_n)?;
        positive(
            "backend.max_in_flight",
            self.backend.max_in_flight > 0,
            self.backend.max_in_flight,
        )?;
        positive("few_shot.k", self.few_shot.k > 0, self.few_shot.k)?;
        positive("fine_tune.epochs", self.fine_tune.epochs > 0, self.fine_tune.epochs)?;
        positive(
            "fine_tune.batch_size",
            self.fine_tune.batch_size > 0,
            self.fine_tune.batch_size,
        )?;
        positive(
            "fine_tune.learning_rate_multiplier",
            self.fine_tune.learning_rate_multiplier > 0.0,
            self.fine_tune.learning_rate_multiplier,
        )?;
        positive(
            "fine_tune.poll_interval_secs",
            self.fine_tune.poll_interval_secs > 0.0,
            self.fine_tune.poll_interval_secs,
        )?;
        positive(
            "fine_tune.timeout_secs",
            self.fine_tune.timeout_secs > 0.0,
            self.fine_tune.timeout_secs,
        )?;
        positive(
            "evaluation.frequency_floor",
            self.evaluation.frequency_floor > 0.0,
            self.evaluation.frequency_floor,
        )?;
        if let Some(r) = self.evaluation.ridge {
            positive("evaluation.ridge", r > 0.0, r)?;
        }
        if self.backend.model.trim().is_empty() {
            return Err(Error::Config("backend.model: must name a model".into()));
        }
        if self.backend.mock.is_none() && self.backend.base_url.trim().is_empty() {
            return Err(Error::Config(
                "backend.base_url: required unless backend.mock is set".into(),
            ));
        }
        if !self.dataset.kind.is_rt() && self.dataset.surprisal_path.is_some() {
            return Err(Error::Config(format!(
                "dataset.surprisal_path: only meaningful for reading-time datasets, not {}",
                self.dataset.kind
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"

[dataset]
kind = "word_mem"
path = "words.tsv"

[backend]
model = "gpt-3.5-turbo"
"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.regime, Regime::ZeroShot);
        assert_eq!(c.splits.finetune_train_fraction, 0.25);
        assert_eq!(c.splits.baseline_n, 100);
        assert_eq!(c.splits.baseline_train_fraction, 0.75);
        assert_eq!(c.few_shot.k, 3);
        assert_eq!(c.fine_tune.hyperparams(), FineTuneHyperparams::default());
        assert_eq!(c.backend.max_in_flight, 8);
        assert_eq!(c.evaluation.min_position_n, 20);
        assert!(!c.evaluation.retry_failed_parse);
    }

    #[test]
    fn errors_name_the_key() {
        let bad = format!("{MINIMAL}\n[splits]\nfinetune_train_fraction = 1.5\n");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("splits.finetune_train_fraction"), "{e}");

        let unknown = format!("{MINIMAL}\n[few_shot]\nkk = 3\n");
        let e = ExperimentConfig::from_toml(&unknown).unwrap_err().to_string();
        assert!(e.contains("kk"), "{e}");

        let regime = MINIMAL.replace("output_dir = \"out\"", "output_dir = \"out\"\nregime = \"two_shot\"");
        let e = ExperimentConfig::from_toml(&regime).unwrap_err().to_string();
        assert!(e.contains("regime"), "{e}");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/data/exp"));
        assert_eq!(c.dataset.path, Path::new("/data/exp/words.tsv"));
        assert_eq!(c.output_dir, Path::new("/data/exp/out"));
    }
}
