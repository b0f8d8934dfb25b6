//! Config file + flag resolution: flags > file > defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use interview_core::pooling::PoolMethod;
use interview_core::{Error, Result, TrainConfig};
use serde::Serialize;

pub const OUTPUT_DIR_ENV: &str = "INTERVIEW_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "runs";

/// Every field of the training config as an optional flag.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// TOML config file; keys are the flag names with underscores.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Defaults to $INTERVIEW_OUTPUT_DIR, then ./runs.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    #[arg(long, visible_alias = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub target_train_mse: Option<f64>,
    #[arg(long, visible_alias = "k")]
    pub k_folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub head_count: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub basis_count: Option<usize>,
    #[arg(long)]
    pub shared_dim: Option<usize>,
    #[arg(long)]
    pub video_pool: Option<PoolMethod>,
    #[arg(long)]
    pub audio_pool: Option<PoolMethod>,
    #[arg(long)]
    pub dropout_temporal: Option<f64>,
    #[arg(long)]
    pub dropout_text: Option<f64>,
    #[arg(long)]
    pub dropout_adapter: Option<f64>,
    #[arg(long)]
    pub dropout_head: Option<f64>,
    #[arg(long)]
    pub clamp_at_inference: Option<bool>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

/// The fully resolved run configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Resolved {
    pub fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (--manifest or `manifest` in the config file)".into()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn read_file(path: &Path) -> Result<(Option<PathBuf>, Option<PathBuf>, TrainConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut take_path = |key: &str| -> Result<Option<PathBuf>> {
        match table.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(base.join(s))),
            Some(other) => Err(Error::Config(format!("{key} must be a string, got {other}"))),
        }
    };
    let manifest = take_path("manifest")?;
    let output_dir = take_path("output_dir")?;
    let train: TrainConfig = table
        .try_into()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((manifest, output_dir, train))
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<Resolved> {
        let (file_manifest, file_output, mut c) = match &self.config {
            Some(p) => read_file(p)?,
            None => (None, None, TrainConfig::default()),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        apply!(
            learning_rate,
            batch_size,
            max_epochs,
            early_stop_patience,
            k_folds,
            seed,
            head_count,
            hidden_dim,
            basis_count,
            shared_dim,
            video_pool,
            audio_pool,
            dropout_temporal,
            dropout_text,
            dropout_adapter,
            dropout_head,
            clamp_at_inference,
            beta1,
            beta2,
            eps,
            weight_decay
        );
        if self.target_train_mse.is_some() {
            c.target_train_mse = self.target_train_mse;
        }
        c.validate()?;
        let output_dir = self
            .output_dir
            .clone()
            .or(file_output)
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let absolute = |p: PathBuf| std::path::absolute(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())));
        Ok(Resolved {
            manifest: self.manifest.clone().or(file_manifest).map(absolute).transpose()?,
            output_dir: absolute(output_dir)?,
            train: c,
        })
    }
}
