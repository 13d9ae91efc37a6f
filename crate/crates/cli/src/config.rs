use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sufficiency_core::classifier::VariantKind;
use sufficiency_core::generator::GenerationVariant;

use crate::UsageError;

pub const CONFIG_FILE: &str = "pipeline.toml";
pub const WORK_DIR_ENV: &str = "SUFFICIENCY_WORK_DIR";

/// Settings shared by every stage. Stages persist the resolved value next to their
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub essays: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub folds: usize,
    pub trials: usize,
    pub generator_variant: GenerationVariant,
    #[serde(with = "slugs")]
    pub variants: Vec<VariantKind>,
    pub desk_scale: bool,
    pub jobs: usize,
}

/// One configuration layer; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub essays: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub work_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub folds: Option<usize>,
    pub trials: Option<usize>,
    pub generator_variant: Option<GenerationVariant>,
    #[serde(default, with = "opt_slugs")]
    pub variants: Option<Vec<VariantKind>>,
    pub desk_scale: Option<bool>,
    pub jobs: Option<usize>,
}

impl ConfigLayer {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Fields set in `top` win.
    fn over(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            essays: top.essays.or(self.essays),
            labels: top.labels.or(self.labels),
            work_dir: top.work_dir.or(self.work_dir),
            seed: top.seed.or(self.seed),
            runs: top.runs.or(self.runs),
            folds: top.folds.or(self.folds),
            trials: top.trials.or(self.trials),
            generator_variant: top.generator_variant.or(self.generator_variant),
            variants: top.variants.or(self.variants),
            desk_scale: top.desk_scale.or(self.desk_scale),
            jobs: top.jobs.or(self.jobs),
        }
    }
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RUNS: usize = 20;
pub const DESK_RUNS: usize = 2;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_TRIALS: usize = 10;

impl PipelineConfig {
    /// Resolves flags over the config file over defaults. Desk scale lowers the default
    /// run count; an explicit run count still wins.
    pub fn resolve(file: Option<ConfigLayer>, flags: ConfigLayer) -> Result<Self> {
        let layer = file.unwrap_or_default().over(flags);
        let desk_scale = layer.desk_scale.unwrap_or(false);
        let config = PipelineConfig {
            essays: layer.essays,
            labels: layer.labels,
            work_dir: layer.work_dir.unwrap_or_else(|| PathBuf::from("work")),
            seed: layer.seed.unwrap_or(DEFAULT_SEED),
            runs: layer.runs.unwrap_or(if desk_scale { DESK_RUNS } else { DEFAULT_RUNS }),
            folds: layer.folds.unwrap_or(DEFAULT_FOLDS),
            trials: layer.trials.unwrap_or(DEFAULT_TRIALS),
            generator_variant: layer.generator_variant.unwrap_or(GenerationVariant::Supervised),
            variants: layer.variants.unwrap_or_else(|| VariantKind::ALL.to_vec()),
            desk_scale,
            jobs: layer.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| -> Result<()> { Err(UsageError(msg).into()) };
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let mut v = self.variants.clone();
        v.sort();
        v.dedup();
        if v.is_empty() || v.len() != self.variants.len() {
            return bad("variants must be a non-empty list without duplicates".into());
        }
        Ok(())
    }

    pub fn persist(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing pipeline config")?;
        fs::write(dir.join(CONFIG_FILE), text).with_context(|| format!("writing {}", dir.display()))
    }
}

mod slugs {
    use serde::{Deserialize, Deserializer, Serializer};
    use sufficiency_core::classifier::VariantKind;

    pub fn serialize<S: Serializer>(v: &[VariantKind], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|k| k.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<VariantKind>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

mod opt_slugs {
    use serde::Deserializer;
    use sufficiency_core::classifier::VariantKind;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<VariantKind>>, D::Error> {
        super::slugs::deserialize(d).map(Some)
    }
}
