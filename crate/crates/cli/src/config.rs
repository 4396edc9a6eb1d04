//! TOML pipeline configuration. Relative paths resolve against the config
//! file's directory; every section is optional and unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use miae_core::dataset::PartitionSpec;
use miae_core::downstream::{GridSearchSpec, SelectionMetric};
use miae_core::miae::MiaeConfig;
use miae_core::training::TrainHyper;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub partition: PartitionSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    pub normal_class: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            label_column: default_label_column(),
            normal_class: None,
        }
    }
}

fn default_label_column() -> String {
    "label".into()
}

/// Either explicit column counts per branch or a branch count for an equal split.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub widths: Option<Vec<usize>>,
    pub branches: Option<usize>,
}

impl PartitionSection {
    pub fn spec(&self) -> Result<PartitionSpec, CliError> {
        match (&self.widths, self.branches) {
            (Some(w), None) => Ok(PartitionSpec::Widths(w.clone())),
            (None, Some(n)) => Ok(PartitionSpec::Equal(n)),
            (Some(_), Some(_)) => Err(CliError::config(
                "partition: give either widths or branches, not both",
            )),
            (None, None) => Err(CliError::config(
                "partition: widths or branches is required",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Miae,
    Miaefs,
}

/// One hidden-width list shared by all branches, or one list per branch.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BranchHidden {
    Shared(Vec<usize>),
    PerBranch(Vec<Vec<usize>>),
}

impl Default for BranchHidden {
    fn default() -> Self {
        BranchHidden::Shared(vec![10, 7])
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(default)]
    pub branch_hidden: BranchHidden,
    #[serde(default = "default_z_per_branch")]
    pub z_per_branch: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Overrides the default `round(sqrt(d_x))` width of the selection layer.
    pub bottleneck: Option<usize>,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::default(),
            branch_hidden: BranchHidden::default(),
            z_per_branch: default_z_per_branch(),
            alpha: default_alpha(),
            bottleneck: None,
            betas: Vec::new(),
            seed: 0,
        }
    }
}

fn default_z_per_branch() -> usize {
    5
}

fn default_alpha() -> f64 {
    1.0
}

impl ModelSection {
    pub fn architecture(&self, branch_dims: Vec<usize>) -> Result<MiaeConfig, CliError> {
        let n = branch_dims.len();
        let branch_hidden = match &self.branch_hidden {
            BranchHidden::Shared(h) => vec![h.clone(); n],
            BranchHidden::PerBranch(hs) => {
                if hs.len() != n {
                    return Err(CliError::config(format!(
                        "model.branch_hidden lists {} branches, partition has {n}",
                        hs.len()
                    )));
                }
                hs.clone()
            }
        };
        let mut config = MiaeConfig {
            branch_dims,
            branch_hidden,
            z_per_branch: self.z_per_branch,
            decoder_hidden: Vec::new(),
            seed: self.seed,
        };
        config.decoder_hidden = config.mirrored_hidden().ok_or_else(|| {
            CliError::config(
                "model.branch_hidden: every branch needs the same number of hidden layers",
            )
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(CliError::config(format!(
                "model.alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        for &b in &self.betas {
            validate_beta(b)?;
        }
        Ok(())
    }
}

pub fn validate_beta(beta: f64) -> Result<(), CliError> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "beta must lie in (0, 1], got {beta}"
        )))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            batch_size: default_batch(),
            epochs: default_epochs(),
            lr: default_lr(),
            shuffle_seed: 0,
        }
    }
}

fn default_batch() -> usize {
    100
}

fn default_epochs() -> usize {
    3000
}

fn default_lr() -> f64 {
    1e-4
}

impl TrainingSection {
    pub fn hyper(&self) -> TrainHyper {
        TrainHyper {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr: self.lr,
            shuffle_seed: self.shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[default]
    Forest,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    #[default]
    Accuracy,
    Fscore,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    #[serde(default)]
    pub kind: ClassifierKind,
    #[serde(default = "default_estimators")]
    pub n_estimators: Vec<usize>,
    /// Depth limits to search; 0 means unlimited. Defaults to unlimited for
    /// forests and {5, 10, 20, 50, 100} for single trees.
    pub max_depth: Option<Vec<usize>>,
    #[serde(default)]
    pub metric: MetricName,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::default(),
            n_estimators: default_estimators(),
            max_depth: None,
            metric: MetricName::default(),
            validation_fraction: default_validation_fraction(),
            seed: 0,
        }
    }
}

fn default_estimators() -> Vec<usize> {
    vec![5, 10, 20, 50, 100, 150]
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl ClassifierSection {
    pub fn grid(&self) -> Result<GridSearchSpec, CliError> {
        let depths: Vec<Option<usize>> = match (&self.max_depth, self.kind) {
            (Some(d), _) => d.iter().map(|&d| (d > 0).then_some(d)).collect(),
            (None, ClassifierKind::Forest) => vec![None],
            (None, ClassifierKind::Tree) => vec![Some(5), Some(10), Some(20), Some(50), Some(100)],
        };
        let mut spec = match self.kind {
            ClassifierKind::Forest => {
                GridSearchSpec::forest(&self.n_estimators, &depths, self.seed)
            }
            ClassifierKind::Tree => GridSearchSpec::tree(&depths, self.seed),
        };
        spec.metric = match self.metric {
            MetricName::Accuracy => SelectionMetric::Accuracy,
            MetricName::Fscore => SelectionMetric::Fscore,
        };
        spec.validation_fraction = self.validation_fraction;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A parsed config together with the bytes it came from, for hashing.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub raw: Vec<u8>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let raw = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = String::from_utf8(raw.clone())
            .map_err(|_| CliError::config(format!("{} is not UTF-8", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(LoadedConfig { config, raw })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.train.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.test.as_mut() {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    /// Points every seed at one value: model init `n`, shuffling `n + 1`,
    /// classifier `n + 2`.
    pub fn override_seed(&mut self, n: u64) {
        self.model.seed = n;
        self.training.shuffle_seed = n.wrapping_add(1);
        self.classifier.seed = n.wrapping_add(2);
    }
}
