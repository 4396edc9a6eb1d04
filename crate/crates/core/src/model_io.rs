//! Line-oriented text format for trained models.
//!
//! ```text
//! miae-model 1
//! kind miaefs
//! seed 7
//! branch_dims 9 13 19
//! branch_hidden 10,7 10,7 10,7
//! z_per_branch 5
//! decoder_hidden 21 30
//! alpha 1.0000000000000000e0
//! bottleneck 6
//! normalization 41
//! min <41 values>
//! max <41 values>
//! param encoder.0.0.weight 9 10
//! <one line per matrix row>
//! ...
//! end
//! ```
//!
//! Every float is written with 17 significant digits, which round-trips `f64`
//! exactly. `alpha`, `bottleneck` and the normalization block are optional.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::NormalizationStats;
use crate::error::{Error, Result};
use crate::miae::{MiaeConfig, MiaeModel};
use crate::miaefs::MiaefsModel;
use crate::numerics::Matrix;

pub const FORMAT_TAG: &str = "miae-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Miae(MiaeModel),
    Miaefs(MiaefsModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Miae(_) => "miae",
            Model::Miaefs(_) => "miaefs",
        }
    }

    pub fn config(&self) -> &MiaeConfig {
        match self {
            Model::Miae(m) => m.config(),
            Model::Miaefs(m) => m.config(),
        }
    }

    pub fn z_dim(&self) -> usize {
        self.config().z_dim()
    }

    pub fn encode_concat(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Model::Miae(m) => m.encode_concat(x),
            Model::Miaefs(m) => m.encode_concat(x),
        }
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        match self {
            Model::Miae(m) => m.parameters(),
            Model::Miaefs(m) => m.parameters(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Model::Miae(m) => m.parameters_mut(),
            Model::Miaefs(m) => m.parameters_mut(),
        }
    }

    /// Names matching `parameters()` one to one.
    pub fn parameter_names(&self) -> Vec<String> {
        let cfg = self.config();
        let mut names = Vec::new();
        let mut layer_pair = |prefix: String, layers: usize| {
            for l in 0..layers {
                names.push(format!("{prefix}.{l}.weight"));
                names.push(format!("{prefix}.{l}.bias"));
            }
        };
        for j in 0..cfg.n_branches() {
            layer_pair(format!("encoder.{j}"), cfg.branch_hidden[j].len() + 1);
        }
        let decoder_layers = cfg.decoder_hidden.len() + 1;
        if let Model::Miaefs(_) = self {
            names.push("selection.weight".into());
            names.push("selection.bias".into());
            let mut rest = Vec::new();
            for l in 0..decoder_layers + 1 {
                rest.push(format!("decoder.{l}.weight"));
                rest.push(format!("decoder.{l}.bias"));
            }
            names.extend(rest);
        } else {
            for l in 0..decoder_layers {
                names.push(format!("decoder.{l}.weight"));
                names.push(format!("decoder.{l}.bias"));
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    /// Min-max statistics the model's training data was scaled with.
    pub normalization: Option<NormalizationStats>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

fn join_f64(items: &[f64]) -> String {
    items
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(" ")
}

impl ModelFile {
    pub fn new(model: Model, normalization: Option<NormalizationStats>) -> Self {
        Self {
            model,
            normalization,
        }
    }

    pub fn to_text(&self) -> String {
        let cfg = self.model.config();
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}");
        let _ = writeln!(out, "kind {}", self.model.kind());
        let _ = writeln!(out, "seed {}", cfg.seed);
        let _ = writeln!(out, "branch_dims {}", join(&cfg.branch_dims, " "));
        let hidden: Vec<String> = cfg
            .branch_hidden
            .iter()
            .map(|h| {
                if h.is_empty() {
                    "-".to_string()
                } else {
                    join(h, ",")
                }
            })
            .collect();
        let _ = writeln!(out, "branch_hidden {}", hidden.join(" "));
        let _ = writeln!(out, "z_per_branch {}", cfg.z_per_branch);
        let _ = writeln!(
            out,
            "decoder_hidden {}",
            join(&cfg.decoder_hidden, " ").trim_end()
        );
        if let Model::Miaefs(m) = &self.model {
            let _ = writeln!(out, "alpha {}", fmt_f64(m.alpha()));
            let _ = writeln!(out, "bottleneck {}", m.bottleneck());
        }
        if let Some(stats) = &self.normalization {
            let _ = writeln!(out, "normalization {}", stats.width());
            let _ = writeln!(out, "min {}", join_f64(&stats.min));
            let _ = writeln!(out, "max {}", join_f64(&stats.max));
        }
        for (name, p) in self
            .model
            .parameter_names()
            .iter()
            .zip(self.model.parameters())
        {
            let _ = writeln!(out, "param {name} {} {}", p.rows(), p.cols());
            for row in p.iter_rows() {
                let _ = writeln!(out, "{}", join_f64(row));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let err = |line: usize, message: String| Error::ModelFormat { line, message };

        let (ln, first) = lines.next().ok_or_else(|| err(1, "file is empty".into()))?;
        let expected = format!("{FORMAT_TAG} {FORMAT_VERSION}");
        if first != expected {
            return Err(err(
                ln,
                format!("expected header '{expected}', found '{first}'"),
            ));
        }

        let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut pending = None;
        for (ln, line) in lines.by_ref() {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            if key == "param" || key == "end" {
                pending = Some((ln, line));
                break;
            }
            const KEYS: [&str; 11] = [
                "kind",
                "seed",
                "branch_dims",
                "branch_hidden",
                "z_per_branch",
                "decoder_hidden",
                "alpha",
                "bottleneck",
                "normalization",
                "min",
                "max",
            ];
            if !KEYS.contains(&key) {
                return Err(err(ln, format!("unknown key '{key}'")));
            }
            if header.insert(key, (ln, rest)).is_some() {
                return Err(err(ln, format!("duplicate key '{key}'")));
            }
        }

        let get = |key: &str| {
            header
                .get(key)
                .copied()
                .ok_or_else(|| err(ln, format!("missing key '{key}'")))
        };
        let parse_usize = |ln: usize, s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| err(ln, format!("'{s}' is not a non-negative integer")))
        };
        let parse_f64 = |ln: usize, s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| err(ln, format!("'{s}' is not a number")))?;
            if !v.is_finite() {
                return Err(err(ln, format!("'{s}' is not finite")));
            }
            Ok(v)
        };
        let usize_list = |(ln, s): (usize, &str)| -> Result<Vec<usize>> {
            s.split_whitespace().map(|t| parse_usize(ln, t)).collect()
        };
        let f64_list = |(ln, s): (usize, &str)| -> Result<Vec<f64>> {
            s.split_whitespace().map(|t| parse_f64(ln, t)).collect()
        };

        let (kind_ln, kind) = get("kind")?;
        let (seed_ln, seed) = get("seed")?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| err(seed_ln, format!("bad seed '{seed}'")))?;
        let branch_dims = usize_list(get("branch_dims")?)?;
        let (bh_ln, bh) = get("branch_hidden")?;
        let branch_hidden = bh
            .split_whitespace()
            .map(|b| {
                if b == "-" {
                    Ok(Vec::new())
                } else {
                    b.split(',').map(|t| parse_usize(bh_ln, t)).collect()
                }
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        let (zl, z) = get("z_per_branch")?;
        let config = MiaeConfig {
            branch_dims,
            branch_hidden,
            z_per_branch: parse_usize(zl, z)?,
            decoder_hidden: usize_list(get("decoder_hidden")?)?,
            seed,
        };

        let mut model = match kind {
            "miae" => {
                if header.contains_key("alpha") || header.contains_key("bottleneck") {
                    return Err(err(
                        kind_ln,
                        "an miae model has no alpha or bottleneck".into(),
                    ));
                }
                Model::Miae(MiaeModel::build(config).map_err(|e| err(kind_ln, e.to_string()))?)
            }
            "miaefs" => {
                let (al, a) = get("alpha")?;
                let (bl, b) = get("bottleneck")?;
                Model::Miaefs(
                    MiaefsModel::with_bottleneck(config, parse_f64(al, a)?, parse_usize(bl, b)?)
                        .map_err(|e| err(kind_ln, e.to_string()))?,
                )
            }
            other => return Err(err(kind_ln, format!("unknown model kind '{other}'"))),
        };

        let normalization = match header.get("normalization") {
            None => {
                if header.contains_key("min") || header.contains_key("max") {
                    return Err(err(ln, "min/max given without a normalization line".into()));
                }
                None
            }
            Some(&(nl, w)) => {
                let width = parse_usize(nl, w)?;
                let min = f64_list(get("min")?)?;
                let max = f64_list(get("max")?)?;
                if min.len() != width || max.len() != width {
                    return Err(err(
                        nl,
                        format!("normalization width {width} does not match min/max lengths"),
                    ));
                }
                Some(NormalizationStats { min, max })
            }
        };

        let names = model.parameter_names();
        let mut params = model.parameters_mut().into_iter();
        let mut current = pending;
        for name in &names {
            let (pl, line) =
                current.ok_or_else(|| err(0, format!("missing parameter '{name}'")))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "param" || fields[1] != name {
                return Err(err(
                    pl,
                    format!("expected 'param {name} <rows> <cols>', found '{line}'"),
                ));
            }
            let (rows, cols) = (parse_usize(pl, fields[2])?, parse_usize(pl, fields[3])?);
            let target = params.next().expect("names match parameters");
            if (rows, cols) != target.shape() {
                return Err(err(
                    pl,
                    format!(
                        "parameter '{name}' is {rows}x{cols}, architecture needs {:?}",
                        target.shape()
                    ),
                ));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (rl, row) = lines
                    .next()
                    .ok_or_else(|| err(pl, "unexpected end of file".into()))?;
                let parsed = f64_list((rl, row))?;
                if parsed.len() != cols {
                    return Err(err(
                        rl,
                        format!("expected {cols} values, found {}", parsed.len()),
                    ));
                }
                values.extend(parsed);
            }
            *target = Matrix::from_vec(rows, cols, values)?;
            current = lines.next();
        }
        match current {
            Some((_, "end")) => {}
            Some((l, other)) => return Err(err(l, format!("expected 'end', found '{other}'"))),
            None => return Err(err(0, "missing 'end'".into())),
        }
        if let Some((l, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(err(l, format!("trailing content '{extra}'")));
        }
        Ok(Self {
            model,
            normalization,
        })
    }
}
