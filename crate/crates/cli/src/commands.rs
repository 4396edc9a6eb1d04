use std::path::{Path, PathBuf};
use std::time::Instant;

use miae_core::dataset::{apply_minmax, fit_minmax, BranchPartition, TabularDataset};
use miae_core::downstream::grid_search;
use miae_core::metrics::{confusion, quality, DetectionReport};
use miae_core::miae::MiaeModel;
use miae_core::miaefs::{selected_count, FeatureRanking, MiaefsModel};
use miae_core::model_io::{Model, ModelFile};
use miae_core::numerics::Matrix;

use crate::config::{validate_beta, ModelKind, PipelineConfig};
use crate::error::CliError;
use crate::manifest::{Recorder, RunManifest};

pub const MODEL_FILE: &str = "model.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const RANKING_FILE: &str = "ranking.csv";
pub const TRAIN_REPR_FILE: &str = "train_repr.csv";
pub const TEST_REPR_FILE: &str = "test_repr.csv";
pub const REPR_FILE: &str = "repr.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const QUALITY_FILE: &str = "quality.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";

/// Resolved settings for one invocation: the config plus command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PipelineConfig,
    /// Raw config bytes, hashed into the manifest.
    pub config_raw: Option<Vec<u8>>,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub train_repr: Option<PathBuf>,
    pub test_repr: Option<PathBuf>,
    pub beta: Option<f64>,
    pub ks: Option<Vec<usize>>,
    pub betas: Option<Vec<f64>>,
}

impl Invocation {
    fn out_dir(&self) -> &Path {
        &self.config.output.dir
    }

    fn recorder(&self, command: &str) -> Result<Recorder, CliError> {
        Recorder::new(command, self.out_dir(), self.config_raw.as_deref())
    }

    fn model_path(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.out_dir().join(MODEL_FILE))
    }

    fn label(&self) -> &str {
        &self.config.data.label_column
    }

    fn load(&self, path: &Path) -> Result<TabularDataset, CliError> {
        std::fs::metadata(path).map_err(|e| CliError::io(path, e))?;
        Ok(TabularDataset::load_csv(path, self.label())?)
    }

    fn train_path(&self) -> Result<&Path, CliError> {
        self.config
            .data
            .train
            .as_deref()
            .ok_or_else(|| CliError::config("data.train is required"))
    }

    fn test_path(&self) -> Result<&Path, CliError> {
        self.config
            .data
            .test
            .as_deref()
            .ok_or_else(|| CliError::config("data.test is required"))
    }
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ModelFile::from_text(&text)?)
}

fn require_fs<'a>(file: &'a ModelFile, command: &str) -> Result<&'a MiaefsModel, CliError> {
    match &file.model {
        Model::Miaefs(m) => Ok(m),
        Model::Miae(_) => Err(CliError::config(format!("{command} needs an miaefs model"))),
    }
}

/// Scales `ds` with the stored statistics after checking its width.
fn prepare(file: &ModelFile, ds: &TabularDataset) -> Result<TabularDataset, CliError> {
    let expected = file.model.config().input_dim();
    if ds.n_features() != expected {
        return Err(CliError::new(
            "invalid_dimension",
            format!(
                "dataset has {} feature columns, model expects {expected}",
                ds.n_features()
            ),
        ));
    }
    Ok(match &file.normalization {
        Some(stats) => apply_minmax(ds, stats)?,
        None => ds.clone(),
    })
}

fn z_names(indices: impl IntoIterator<Item = usize>) -> Vec<String> {
    indices.into_iter().map(|i| format!("z{i}")).collect()
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn train(inv: &Invocation) -> Result<RunManifest, CliError> {
    let cfg = &inv.config;
    let spec = cfg.partition.spec()?;
    cfg.model.validate()?;
    let hyper = cfg.training.hyper();
    hyper.validate()?;
    let train = inv.load(inv.train_path()?)?;
    let partition = BranchPartition::new(&spec, train.n_features())?;
    let arch = cfg.model.architecture(partition.widths())?;

    let stats = fit_minmax(&train)?;
    let scaled = apply_minmax(&train, &stats)?;
    let view = partition.split(&scaled.features)?;

    let mut rec = inv.recorder("train")?;
    rec.seed("model", cfg.model.seed);
    rec.seed("shuffle", cfg.training.shuffle_seed);

    let (model, history) = match cfg.model.kind {
        ModelKind::Miae => {
            let mut m = MiaeModel::build(arch)?;
            let h = rec.timed("train_seconds", || m.train(&view, &hyper))?;
            (Model::Miae(m), h)
        }
        ModelKind::Miaefs => {
            let mut m = match cfg.model.bottleneck {
                Some(d_h) => MiaefsModel::with_bottleneck(arch, cfg.model.alpha, d_h)?,
                None => MiaefsModel::build(arch, cfg.model.alpha)?,
            };
            let h = rec.timed("train_seconds", || m.train(&view, &hyper))?;
            (Model::Miaefs(m), h)
        }
    };

    let file = ModelFile::new(model, Some(stats));
    file.save(rec.path(MODEL_FILE))?;
    rec.artifact(MODEL_FILE)?;

    let rows: Vec<Vec<String>> = history
        .iter()
        .enumerate()
        .map(|(e, l)| vec![(e + 1).to_string(), l.to_string()])
        .collect();
    write_rows(&rec.path(LOSS_FILE), &["epoch", "loss"], &rows)?;
    rec.artifact(LOSS_FILE)?;

    if let Model::Miaefs(m) = &file.model {
        m.importance_scores().write_csv(rec.path(RANKING_FILE))?;
        rec.artifact(RANKING_FILE)?;
    }
    rec.finish()
}

/// z for every row of `ds`, restricted to the top features when `beta` is set.
fn representation(
    file: &ModelFile,
    ds: &TabularDataset,
    beta: Option<f64>,
) -> Result<TabularDataset, CliError> {
    let scaled = prepare(file, ds)?;
    let z = file.model.encode_concat(&scaled.features)?;
    let (z, names) = match beta {
        None => {
            let names = z_names(0..z.cols());
            (z, names)
        }
        Some(beta) => {
            validate_beta(beta)?;
            let m = require_fs(file, "encoding with beta")?;
            let ranking = m.importance_scores();
            let top = ranking.top(selected_count(z.cols(), beta)?).to_vec();
            (z.select_cols(&top), z_names(top))
        }
    };
    Ok(ds.with_features(z, names)?)
}

pub fn encode(inv: &Invocation) -> Result<RunManifest, CliError> {
    let file = load_model(&inv.model_path())?;
    let jobs: Vec<(PathBuf, &str)> = match &inv.data {
        Some(p) => vec![(p.clone(), REPR_FILE)],
        None => {
            let mut jobs = vec![(inv.train_path()?.to_path_buf(), TRAIN_REPR_FILE)];
            if let Some(t) = &inv.config.data.test {
                jobs.push((t.clone(), TEST_REPR_FILE));
            }
            jobs
        }
    };
    let datasets = jobs
        .iter()
        .map(|(p, _)| inv.load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rec = inv.recorder("encode")?;
    rec.seed("model", file.model.config().seed);
    let start = Instant::now();
    for ((_, name), ds) in jobs.iter().zip(&datasets) {
        let repr = representation(&file, ds, inv.beta)?;
        repr.write_csv(rec.path(name), inv.label())?;
        rec.artifact(name)?;
    }
    rec.timing("encode_seconds", start.elapsed().as_secs_f64());
    rec.finish()
}

struct Evaluation {
    report: DetectionReport,
    cm: miae_core::metrics::ConfusionMatrix,
    grid: Vec<(String, f64)>,
    inference_per_sample: f64,
}

fn normal_index(inv: &Invocation, classes: &[String]) -> Result<usize, CliError> {
    let name = inv.config.data.normal_class.as_deref().ok_or_else(|| {
        CliError::config("a normal class is required (data.normal_class or --normal-class)")
    })?;
    classes.iter().position(|c| c == name).ok_or_else(|| {
        CliError::config(format!("normal class '{name}' does not occur in the data"))
    })
}

/// Aligns class indices so both sets share the training order.
fn aligned(train: &TabularDataset, mut test: TabularDataset) -> TabularDataset {
    test.align_classes(&train.class_names);
    test
}

fn evaluate_split(
    inv: &Invocation,
    train_x: &Matrix,
    train: &TabularDataset,
    test_x: &Matrix,
    test: &TabularDataset,
) -> Result<Evaluation, CliError> {
    let normal = normal_index(inv, &test.class_names)?;
    let spec = inv.config.classifier.grid()?;
    let result = grid_search(&spec, train_x, &train.labels, train.class_names.len())?;
    let start = Instant::now();
    let predicted = result.model.predict(test_x)?;
    let inference_per_sample = start.elapsed().as_secs_f64() / test_x.rows().max(1) as f64;
    let cm = confusion(&test.labels, &predicted, test.class_names.len())?
        .with_class_names(test.class_names.clone())?;
    let report = DetectionReport::from_confusion(&cm, normal)?;
    Ok(Evaluation {
        report,
        cm,
        grid: result
            .scores
            .iter()
            .map(|(p, s)| (p.to_string(), *s))
            .collect(),
        inference_per_sample,
    })
}

pub fn evaluate(inv: &Invocation) -> Result<RunManifest, CliError> {
    let out = inv.out_dir();
    let train_path = inv
        .train_repr
        .clone()
        .unwrap_or_else(|| out.join(TRAIN_REPR_FILE));
    let test_path = inv
        .test_repr
        .clone()
        .unwrap_or_else(|| out.join(TEST_REPR_FILE));
    let train = inv.load(&train_path)?;
    let test = aligned(&train, inv.load(&test_path)?);
    if train.feature_names != test.feature_names {
        return Err(CliError::new(
            "invalid_dimension",
            format!(
                "train columns {:?} differ from test columns {:?}",
                train.feature_names, test.feature_names
            ),
        ));
    }
    normal_index(inv, &test.class_names)?;

    let mut rec = inv.recorder("evaluate")?;
    rec.seed("classifier", inv.config.classifier.seed);
    let eval = rec.timed("evaluate_seconds", || {
        evaluate_split(inv, &train.features, &train, &test.features, &test)
    })?;
    rec.timing("inference_seconds_per_sample", eval.inference_per_sample);

    eval.report.write_csv(rec.path(METRICS_FILE))?;
    rec.artifact(METRICS_FILE)?;
    eval.cm.write_csv(rec.path(CONFUSION_FILE))?;
    rec.artifact(CONFUSION_FILE)?;
    let rows: Vec<Vec<String>> = eval
        .grid
        .iter()
        .map(|(p, s)| vec![p.clone(), s.to_string()])
        .collect();
    write_rows(
        &rec.path(GRID_FILE),
        &["candidate", "validation_score"],
        &rows,
    )?;
    rec.artifact(GRID_FILE)?;
    rec.finish()
}

pub fn quality_cmd(inv: &Invocation) -> Result<RunManifest, CliError> {
    let path = inv
        .data
        .clone()
        .unwrap_or_else(|| inv.out_dir().join(TRAIN_REPR_FILE));
    let ds = inv.load(&path)?;
    let report = quality(&ds.features, &ds.labels)?;
    let mut rec = inv.recorder("quality")?;
    report.write_csv(rec.path(QUALITY_FILE))?;
    rec.artifact(QUALITY_FILE)?;
    rec.finish()
}

/// Feature counts to sweep, each with the fraction it corresponds to.
fn sweep_points(inv: &Invocation, d_z: usize) -> Result<Vec<(usize, f64)>, CliError> {
    if inv.ks.is_some() && inv.betas.is_some() {
        return Err(CliError::usage("give either --ks or --betas, not both"));
    }
    let from_betas = |betas: &[f64]| -> Result<Vec<(usize, f64)>, CliError> {
        betas
            .iter()
            .map(|&b| {
                validate_beta(b)?;
                Ok((selected_count(d_z, b)?, b))
            })
            .collect()
    };
    match (&inv.ks, &inv.betas) {
        (Some(ks), _) => ks
            .iter()
            .map(|&k| {
                if k == 0 || k > d_z {
                    Err(CliError::config(format!("k = {k} is outside 1..={d_z}")))
                } else {
                    Ok((k, k as f64 / d_z as f64))
                }
            })
            .collect(),
        (None, Some(b)) => from_betas(b),
        (None, None) if !inv.config.model.betas.is_empty() => from_betas(&inv.config.model.betas),
        (None, None) => Ok((1..=d_z).map(|k| (k, k as f64 / d_z as f64)).collect()),
    }
}

pub fn sweep(inv: &Invocation) -> Result<RunManifest, CliError> {
    let file = load_model(&inv.model_path())?;
    let model = require_fs(&file, "sweep")?;
    let train = inv.load(inv.train_path()?)?;
    let test = aligned(&train, inv.load(inv.test_path()?)?);
    normal_index(inv, &test.class_names)?;
    inv.config.classifier.grid()?;
    let points = sweep_points(inv, model.z_dim())?;

    let z_train = model.encode_concat(&prepare(&file, &train)?.features)?;
    let z_test = model.encode_concat(&prepare(&file, &test)?.features)?;
    let ranking: FeatureRanking = model.importance_scores();

    let mut rec = inv.recorder("sweep")?;
    rec.seed("classifier", inv.config.classifier.seed);
    let start = Instant::now();
    let mut rows = Vec::with_capacity(points.len());
    for &(k, beta) in &points {
        let top = ranking.top(k);
        let (xs, ys) = (z_train.select_cols(top), z_test.select_cols(top));
        let eval = evaluate_split(inv, &xs, &train, &ys, &test)?;
        let (d_bet, d_wit, q) = match quality(&xs, &train.labels) {
            Ok(r) => (r.d_bet, r.d_wit, r.data_quality),
            Err(miae_core::Error::UndefinedQuality { d_bet, d_wit }) => (d_bet, d_wit, f64::NAN),
            Err(e) => return Err(e.into()),
        };
        let r = &eval.report;
        rows.push(
            [
                k as f64, beta, r.accuracy, r.fscore, r.far, r.mdr, d_bet, d_wit, q,
            ]
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { k.to_string() } else { v.to_string() })
            .collect(),
        );
    }
    rec.timing("sweep_seconds", start.elapsed().as_secs_f64());
    write_rows(
        &rec.path(SWEEP_FILE),
        &[
            "k",
            "beta",
            "accuracy",
            "fscore",
            "far",
            "mdr",
            "d_bet",
            "d_wit",
            "data_quality",
        ],
        &rows,
    )?;
    rec.artifact(SWEEP_FILE)?;
    rec.finish()
}

pub fn reconstruct(inv: &Invocation) -> Result<RunManifest, CliError> {
    let file = load_model(&inv.model_path())?;
    let model = require_fs(&file, "reconstruct")?;
    let beta = inv
        .beta
        .or_else(|| inv.config.model.betas.first().copied())
        .ok_or_else(|| CliError::config("reconstruct needs --beta or model.betas"))?;
    validate_beta(beta)?;
    let path = match (&inv.data, &inv.config.data.test) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => inv.train_path()?.to_path_buf(),
    };
    let ds = inv.load(&path)?;
    let scaled = prepare(&file, &ds)?;

    let mut rec = inv.recorder("reconstruct")?;
    let x_hat = rec.timed("reconstruct_seconds", || -> Result<Matrix, CliError> {
        let z = model.encode_concat(&scaled.features)?;
        Ok(model.reconstruct_masked(&z, &model.importance_scores(), beta)?)
    })?;
    let out = ds.with_features(x_hat, ds.feature_names.clone())?;
    out.write_csv(rec.path(RECONSTRUCTION_FILE), inv.label())?;
    rec.artifact(RECONSTRUCTION_FILE)?;
    rec.finish()
}
