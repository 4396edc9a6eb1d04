//! Multiple-input autoencoder with a feature-selection layer after `z`.
//!
//! The layer `h = tanh(z·W_f + b_f)` is trained with an L2,1 penalty on `W_f`
//! so that rows belonging to uninformative coordinates of `z` shrink toward
//! zero. Squared row norms of `W_f` then rank the coordinates of `z`.

use std::path::Path;

use crate::dataset::BranchView;
use crate::error::{Error, Result};
use crate::layers::{flatten_grads, Dense, Stack};
use crate::miae::{check_nonempty, reconstruction_delta, BranchEncoders, MiaeConfig};
use crate::numerics::{mse, Activation, Matrix, Rng};
use crate::training::{fit, Reconstruction, TrainHyper};

/// Added under each row's square root so the penalty is differentiable at zero rows.
pub const L21_EPS: f64 = 1e-12;

/// `Σ_j sqrt(Σ_k W[j,k]² + L21_EPS)`.
pub fn l21_norm(w: &Matrix) -> f64 {
    w.iter_rows()
        .map(|row| (row.iter().map(|v| v * v).sum::<f64>() + L21_EPS).sqrt())
        .sum()
}

/// Gradient of [`l21_norm`]: each row divided by its stabilized norm.
pub fn l21_gradient(w: &Matrix) -> Matrix {
    let mut g = w.clone();
    for r in 0..g.rows() {
        let row = g.row_mut(r);
        let norm = (row.iter().map(|v| v * v).sum::<f64>() + L21_EPS).sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    g
}

/// Bottleneck width `round(sqrt(d_x))`, at least 1.
pub fn bottleneck_width(input_dim: usize) -> usize {
    ((input_dim as f64).sqrt().round() as usize).max(1)
}

/// Importance score per coordinate of `z` and the coordinates sorted by it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    /// Indices by descending score; equal scores keep ascending index order.
    pub order: Vec<usize>,
}

impl FeatureRanking {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Indices of the `k` highest-scoring coordinates, best first.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    /// 1-based rank of each coordinate.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &idx) in self.order.iter().enumerate() {
            ranks[idx] = pos + 1;
        }
        ranks
    }

    /// CSV with columns `feature_index,score,rank`, one row per coordinate.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["feature_index", "score", "rank"])?;
        for (i, (score, rank)) in self.scores.iter().zip(self.ranks()).enumerate() {
            w.write_record([i.to_string(), format!("{score:.17e}"), rank.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `max(1, round(beta · d_z))` with halves rounded up.
pub fn selected_count(d_z: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    Ok(((beta * d_z as f64 + 0.5).floor() as usize).clamp(1, d_z.max(1)))
}

fn check_ranking(z: &Matrix, ranking: &FeatureRanking) -> Result<()> {
    if z.cols() != ranking.len() {
        return Err(Error::dim(format!(
            "z has {} columns, ranking covers {}",
            z.cols(),
            ranking.len()
        )));
    }
    Ok(())
}

/// Keeps the top `k` coordinates of `z`, in ranked order.
pub fn select_features(z: &Matrix, ranking: &FeatureRanking, beta: f64) -> Result<Matrix> {
    check_ranking(z, ranking)?;
    let k = selected_count(z.cols(), beta)?;
    Ok(z.select_cols(ranking.top(k)))
}

/// Zeroes every coordinate of `z` outside the top `k`, keeping positions.
pub fn mask_features(z: &Matrix, ranking: &FeatureRanking, beta: f64) -> Result<Matrix> {
    check_ranking(z, ranking)?;
    let k = selected_count(z.cols(), beta)?;
    let mut keep = vec![false; z.cols()];
    for &i in ranking.top(k) {
        keep[i] = true;
    }
    let mut out = z.clone();
    for r in 0..out.rows() {
        for (v, &kept) in out.row_mut(r).iter_mut().zip(&keep) {
            if !kept {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiaefsModel {
    config: MiaeConfig,
    alpha: f64,
    pub(crate) encoders: BranchEncoders,
    pub(crate) selection: Dense,
    pub(crate) decoder: Stack,
}

impl MiaefsModel {
    /// Builds with the default bottleneck width `round(sqrt(d_x))`.
    pub fn build(config: MiaeConfig, alpha: f64) -> Result<Self> {
        let d_h = bottleneck_width(config.input_dim());
        Self::with_bottleneck(config, alpha, d_h)
    }

    /// Initialization order: sub-encoders, feature-selection layer, decoder.
    /// The decoder mirrors the encoder side: `d_h → d_z → decoder_hidden... → d_x`.
    pub fn with_bottleneck(config: MiaeConfig, alpha: f64, bottleneck: usize) -> Result<Self> {
        config.validate()?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        if bottleneck == 0 {
            return Err(Error::config("bottleneck width must be positive"));
        }
        let mut rng = Rng::new(config.seed);
        let encoders = BranchEncoders::build(&config, &mut rng)?;
        let selection = Dense::init(config.z_dim(), bottleneck, Activation::Tanh, &mut rng)?;
        let decoder = Stack::build(
            &Self::decoder_layout(&config, bottleneck),
            Activation::Relu,
            &mut rng,
        )?;
        Ok(Self {
            config,
            alpha,
            encoders,
            selection,
            decoder,
        })
    }

    fn decoder_layout(config: &MiaeConfig, bottleneck: usize) -> Vec<usize> {
        let mut w = vec![bottleneck];
        w.extend(config.decoder_widths());
        w
    }

    pub fn config(&self) -> &MiaeConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bottleneck(&self) -> usize {
        self.selection.fan_out()
    }

    pub fn z_dim(&self) -> usize {
        self.config.z_dim()
    }

    /// `W_f`, shape `d_z × d_h`.
    pub fn selection_weight(&self) -> &Matrix {
        &self.selection.weight
    }

    pub fn selection_bias(&self) -> &Matrix {
        &self.selection.bias
    }

    pub fn encoder_widths(&self, branch: usize) -> Vec<usize> {
        self.encoders.stacks[branch].widths()
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        self.decoder.widths()
    }

    pub fn encode(&self, view: &BranchView) -> Result<Matrix> {
        self.check_view(view)?;
        self.encode_concat(&view.concat()?)
    }

    pub fn encode_concat(&self, x: &Matrix) -> Result<Matrix> {
        self.encoders.encode(x)
    }

    /// `h = tanh(z·W_f + b_f)`.
    pub fn fs_forward(&self, z: &Matrix) -> Result<Matrix> {
        self.check_z(z)?;
        Ok(self.selection.forward(z))
    }

    /// Runs the feature-selection layer and the decoder on `z`.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.decoder.forward(&self.fs_forward(z)?))
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode_concat(x)?)
    }

    pub fn reconstruction_loss(&self, x: &Matrix) -> Result<f64> {
        check_nonempty(x)?;
        mse(x, &self.reconstruct(x)?)
    }

    /// Reconstruction error plus `alpha · ‖W_f‖₂,₁`.
    pub fn loss_fs(&self, view: &BranchView) -> Result<f64> {
        self.check_view(view)?;
        self.loss_concat(&view.concat()?)
    }

    pub fn loss_concat(&self, x: &Matrix) -> Result<f64> {
        Ok(self.reconstruction_loss(x)? + self.alpha * l21_norm(&self.selection.weight))
    }

    /// Encoders, then `W_f`, `b_f`, then decoder layers.
    pub fn parameters(&self) -> Vec<&Matrix> {
        let mut p = self.encoders.parameters();
        p.push(&self.selection.weight);
        p.push(&self.selection.bias);
        p.extend(self.decoder.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p = self.encoders.parameters_mut();
        p.push(&mut self.selection.weight);
        p.push(&mut self.selection.bias);
        p.extend(self.decoder.parameters_mut());
        p
    }

    /// Index of `W_f` within [`parameters`](Self::parameters).
    pub fn selection_weight_index(&self) -> usize {
        self.encoders.parameters().len()
    }

    /// Total loss and gradients in `parameters()` order.
    pub fn gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
        check_nonempty(x)?;
        let enc = self.encoders.encode_trace(x)?;
        let fs = Stack {
            layers: vec![self.selection.clone()],
        };
        let fs_trace = fs.forward_trace(&enc.z);
        let dec = self.decoder.forward_trace(fs_trace.output());
        let loss = mse(x, dec.output())? + self.alpha * l21_norm(&self.selection.weight);

        let (dec_grads, d_h) =
            self.decoder
                .backward(&dec, reconstruction_delta(dec.output(), x), true);
        let (mut fs_grads, d_z) = fs.backward(&fs_trace, d_h.expect("requested"), true);
        if self.alpha != 0.0 {
            let penalty = l21_gradient(&self.selection.weight).scale(self.alpha);
            fs_grads[0].weight.add_assign(&penalty);
        }

        let mut grads = Vec::new();
        self.encoders
            .backward(&enc, &d_z.expect("requested"), &mut grads);
        flatten_grads(fs_grads, &mut grads);
        flatten_grads(dec_grads, &mut grads);
        Ok((loss, grads))
    }

    pub fn train(&mut self, data: &BranchView, hyper: &TrainHyper) -> Result<Vec<f64>> {
        self.check_view(data)?;
        fit(self, &data.concat()?, hyper)
    }

    pub fn train_concat(&mut self, x: &Matrix, hyper: &TrainHyper) -> Result<Vec<f64>> {
        fit(self, x, hyper)
    }

    /// `w_j = Σ_k W_f[j,k]²` with the descending ranking.
    pub fn importance_scores(&self) -> FeatureRanking {
        let scores = self
            .selection
            .weight
            .iter_rows()
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect();
        FeatureRanking::from_scores(scores)
    }

    /// Zeroes the coordinates of `z` outside the top `beta` fraction, then decodes
    /// through the feature-selection layer and the decoder.
    pub fn reconstruct_masked(
        &self,
        z: &Matrix,
        ranking: &FeatureRanking,
        beta: f64,
    ) -> Result<Matrix> {
        self.check_z(z)?;
        self.decode(&mask_features(z, ranking, beta)?)
    }

    fn check_z(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.z_dim() {
            return Err(Error::dim(format!(
                "z has {} columns, model expects {}",
                z.cols(),
                self.z_dim()
            )));
        }
        Ok(())
    }

    fn check_view(&self, view: &BranchView) -> Result<()> {
        if view.widths() != self.config.branch_dims {
            return Err(Error::dim(format!(
                "branch widths {:?} do not match model {:?}",
                view.widths(),
                self.config.branch_dims
            )));
        }
        Ok(())
    }
}

impl Reconstruction for MiaefsModel {
    fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
        self.gradients(x)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        MiaefsModel::parameters_mut(self)
    }
}
