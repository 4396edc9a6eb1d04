//! Multiple-input autoencoder: one sub-encoder per input branch, latent
//! vectors concatenated into `z`, a single decoder reconstructing the
//! concatenated input.

use crate::dataset::BranchView;
use crate::error::{Error, Result};
use crate::layers::{flatten_grads, Stack, StackTrace};
use crate::numerics::{mse, Activation, Matrix, Rng};
use crate::training::{fit, Reconstruction, TrainHyper};

/// Architecture of a multiple-input autoencoder.
///
/// Branch `j` maps `branch_dims[j] → branch_hidden[j]... → z_per_branch`. The
/// decoder maps `z_dim → decoder_hidden... → input_dim`, where each decoder
/// hidden width is the sum of the mirrored sub-encoder hidden widths.
#[derive(Debug, Clone, PartialEq)]
pub struct MiaeConfig {
    pub branch_dims: Vec<usize>,
    pub branch_hidden: Vec<Vec<usize>>,
    pub z_per_branch: usize,
    pub decoder_hidden: Vec<usize>,
    pub seed: u64,
}

impl MiaeConfig {
    /// Every branch gets the same hidden widths; the decoder is derived by symmetry.
    pub fn symmetric(
        branch_dims: Vec<usize>,
        hidden: &[usize],
        z_per_branch: usize,
        seed: u64,
    ) -> Self {
        let branch_hidden = vec![hidden.to_vec(); branch_dims.len()];
        let mut cfg = Self {
            branch_dims,
            branch_hidden,
            z_per_branch,
            decoder_hidden: Vec::new(),
            seed,
        };
        cfg.decoder_hidden = cfg.mirrored_hidden().unwrap_or_default();
        cfg
    }

    pub fn n_branches(&self) -> usize {
        self.branch_dims.len()
    }

    pub fn input_dim(&self) -> usize {
        self.branch_dims.iter().sum()
    }

    pub fn z_dim(&self) -> usize {
        self.n_branches() * self.z_per_branch
    }

    /// Sums of sub-encoder hidden widths, deepest layer first.
    pub fn mirrored_hidden(&self) -> Option<Vec<usize>> {
        let depth = self.branch_hidden.first()?.len();
        if self.branch_hidden.iter().any(|h| h.len() != depth) {
            return None;
        }
        Some(
            (0..depth)
                .rev()
                .map(|l| self.branch_hidden.iter().map(|h| h[l]).sum())
                .collect(),
        )
    }

    pub fn encoder_widths(&self, branch: usize) -> Vec<usize> {
        let mut w = vec![self.branch_dims[branch]];
        w.extend(&self.branch_hidden[branch]);
        w.push(self.z_per_branch);
        w
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        let mut w = vec![self.z_dim()];
        w.extend(&self.decoder_hidden);
        w.push(self.input_dim());
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.branch_dims.is_empty() {
            return Err(Error::config("at least one branch is required"));
        }
        if self.branch_dims.contains(&0) {
            return Err(Error::config(format!(
                "branch widths must be positive: {:?}",
                self.branch_dims
            )));
        }
        if self.branch_hidden.len() != self.n_branches() {
            return Err(Error::config(format!(
                "{} hidden-width lists for {} branches",
                self.branch_hidden.len(),
                self.n_branches()
            )));
        }
        if self.branch_hidden.iter().flatten().any(|&w| w == 0) || self.z_per_branch == 0 {
            return Err(Error::config("layer widths must be positive"));
        }
        let mirrored = self
            .mirrored_hidden()
            .ok_or_else(|| Error::config("all sub-encoders must have the same depth"))?;
        if mirrored != self.decoder_hidden {
            return Err(Error::config(format!(
                "decoder hidden widths {:?} are not symmetric to the encoders (expected {:?})",
                self.decoder_hidden, mirrored
            )));
        }
        if self.decoder_hidden.contains(&0) {
            return Err(Error::config("decoder widths must be positive"));
        }
        Ok(())
    }
}

/// The parallel sub-encoders and the concatenation producing `z`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BranchEncoders {
    pub stacks: Vec<Stack>,
}

pub(crate) struct EncoderTrace {
    traces: Vec<StackTrace>,
    pub z: Matrix,
}

impl BranchEncoders {
    pub fn build(config: &MiaeConfig, rng: &mut Rng) -> Result<Self> {
        let stacks = (0..config.n_branches())
            .map(|j| Stack::build(&config.encoder_widths(j), Activation::Tanh, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { stacks })
    }

    pub fn input_dim(&self) -> usize {
        self.stacks.iter().map(Stack::input_dim).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has {} columns, encoders expect {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn blocks<'a>(&'a self, x: &'a Matrix) -> impl Iterator<Item = (&'a Stack, Matrix)> + 'a {
        let mut start = 0;
        self.stacks.iter().map(move |s| {
            let block = x.column_block(start, s.input_dim());
            start += s.input_dim();
            (s, block)
        })
    }

    /// `z = e⁽¹⁾ ⊕ … ⊕ e⁽ⁿ⁾` for each row of the concatenated input.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let parts: Vec<Matrix> = self.blocks(x).map(|(s, b)| s.forward(&b)).collect();
        Matrix::hconcat(&parts)
    }

    pub fn encode_trace(&self, x: &Matrix) -> Result<EncoderTrace> {
        self.check_input(x)?;
        let traces: Vec<StackTrace> = self.blocks(x).map(|(s, b)| s.forward_trace(&b)).collect();
        let outs: Vec<Matrix> = traces.iter().map(|t| t.output().clone()).collect();
        let z = Matrix::hconcat(&outs)?;
        Ok(EncoderTrace { traces, z })
    }

    /// Splits `d_z` back into per-branch blocks and backpropagates each.
    pub fn backward(&self, trace: &EncoderTrace, d_z: &Matrix, out: &mut Vec<Matrix>) {
        let mut start = 0;
        for (stack, t) in self.stacks.iter().zip(&trace.traces) {
            let width = stack.output_dim();
            let (grads, _) = stack.backward(t, d_z.column_block(start, width), false);
            flatten_grads(grads, out);
            start += width;
        }
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        self.stacks.iter().flat_map(Stack::parameters).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.stacks
            .iter_mut()
            .flat_map(Stack::parameters_mut)
            .collect()
    }
}

/// `d/dx̂ (1/m) Σ_i ‖x_i − x̂_i‖² = 2 (x̂ − x) / m`.
pub(crate) fn reconstruction_delta(x_hat: &Matrix, x: &Matrix) -> Matrix {
    let m = x.rows() as f64;
    let data = x_hat
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(h, t)| 2.0 * (h - t) / m)
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("shapes agree")
}

pub(crate) fn check_nonempty(x: &Matrix) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("batch has no rows".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiaeModel {
    config: MiaeConfig,
    pub(crate) encoders: BranchEncoders,
    pub(crate) decoder: Stack,
}

impl MiaeModel {
    /// Glorot weights and zero biases, initialized branch by branch, then the decoder.
    pub fn build(config: MiaeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let encoders = BranchEncoders::build(&config, &mut rng)?;
        let decoder = Stack::build(&config.decoder_widths(), Activation::Relu, &mut rng)?;
        Ok(Self {
            config,
            encoders,
            decoder,
        })
    }

    pub fn config(&self) -> &MiaeConfig {
        &self.config
    }

    /// Layer widths of branch `j`, input first.
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

    /// Encodes rows of the already concatenated input.
    pub fn encode_concat(&self, x: &Matrix) -> Result<Matrix> {
        self.encoders.encode(x)
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.config.z_dim() {
            return Err(Error::dim(format!(
                "z has {} columns, decoder expects {}",
                z.cols(),
                self.config.z_dim()
            )));
        }
        Ok(self.decoder.forward(z))
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode_concat(x)?)
    }

    /// Mean over rows of the squared reconstruction error of the concatenated input.
    pub fn loss(&self, view: &BranchView) -> Result<f64> {
        self.check_view(view)?;
        self.loss_concat(&view.concat()?)
    }

    pub fn loss_concat(&self, x: &Matrix) -> Result<f64> {
        check_nonempty(x)?;
        mse(x, &self.reconstruct(x)?)
    }

    /// Loss and gradients for every parameter, in `parameters()` order.
    pub fn gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
        check_nonempty(x)?;
        let enc = self.encoders.encode_trace(x)?;
        let dec = self.decoder.forward_trace(&enc.z);
        let loss = mse(x, dec.output())?;

        let (dec_grads, d_z) =
            self.decoder
                .backward(&dec, reconstruction_delta(dec.output(), x), true);
        let mut grads = Vec::new();
        self.encoders
            .backward(&enc, &d_z.expect("requested input gradient"), &mut grads);
        flatten_grads(dec_grads, &mut grads);
        Ok((loss, grads))
    }

    /// Encoder weights and biases branch by branch, then decoder layers.
    pub fn parameters(&self) -> Vec<&Matrix> {
        let mut p = self.encoders.parameters();
        p.extend(self.decoder.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p = self.encoders.parameters_mut();
        p.extend(self.decoder.parameters_mut());
        p
    }

    pub fn train(&mut self, data: &BranchView, hyper: &TrainHyper) -> Result<Vec<f64>> {
        self.check_view(data)?;
        fit(self, &data.concat()?, hyper)
    }

    pub fn train_concat(&mut self, x: &Matrix, hyper: &TrainHyper) -> Result<Vec<f64>> {
        fit(self, x, hyper)
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

impl Reconstruction for MiaeModel {
    fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
        self.gradients(x)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        MiaeModel::parameters_mut(self)
    }
}

/// A conventional single-input autoencoder: encoder stack, decoder stack,
/// trained on the same mean squared reconstruction error.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainAutoencoder {
    encoder: Stack,
    decoder: Stack,
}

impl PlainAutoencoder {
    /// `encoder_widths = [d, hidden..., z]`, `decoder_widths = [z, hidden..., d]`.
    pub fn build(encoder_widths: &[usize], decoder_widths: &[usize], seed: u64) -> Result<Self> {
        if encoder_widths.last() != decoder_widths.first()
            || encoder_widths.first() != decoder_widths.last()
        {
            return Err(Error::config("encoder and decoder widths do not chain"));
        }
        let mut rng = Rng::new(seed);
        let encoder = Stack::build(encoder_widths, Activation::Tanh, &mut rng)?;
        let decoder = Stack::build(decoder_widths, Activation::Relu, &mut rng)?;
        Ok(Self { encoder, decoder })
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.encoder.input_dim() {
            return Err(Error::dim("input width does not match the encoder"));
        }
        Ok(self.encoder.forward(x))
    }

    pub fn loss(&self, x: &Matrix) -> Result<f64> {
        check_nonempty(x)?;
        let z = self.encode(x)?;
        mse(x, &self.decoder.forward(&z))
    }

    pub fn train(&mut self, x: &Matrix, hyper: &TrainHyper) -> Result<Vec<f64>> {
        fit(self, x, hyper)
    }
}

impl Reconstruction for PlainAutoencoder {
    fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
        check_nonempty(x)?;
        let enc = self.encoder.forward_trace(x);
        let dec = self.decoder.forward_trace(enc.output());
        let loss = mse(x, dec.output())?;
        let (dec_grads, d_z) =
            self.decoder
                .backward(&dec, reconstruction_delta(dec.output(), x), true);
        let (enc_grads, _) = self.encoder.backward(&enc, d_z.expect("requested"), false);
        let mut grads = Vec::new();
        flatten_grads(enc_grads, &mut grads);
        flatten_grads(dec_grads, &mut grads);
        Ok((loss, grads))
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p = self.encoder.parameters_mut();
        p.extend(self.decoder.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BranchPartition, PartitionSpec};
    use crate::numerics::{finite_diff_grad, relative_error};

    fn toy_config(seed: u64) -> MiaeConfig {
        MiaeConfig::symmetric(vec![3, 4], &[4, 3], 2, seed)
    }

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.next_f64()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn nslkdd_topology() {
        let cfg = MiaeConfig::symmetric(vec![9, 13, 19], &[10, 7], 5, 0);
        assert_eq!(cfg.decoder_hidden, vec![21, 30]);
        assert_eq!(cfg.z_dim(), 15);
        let m = MiaeModel::build(cfg).unwrap();
        assert_eq!(m.encoder_widths(0), vec![9, 10, 7, 5]);
        assert_eq!(m.encoder_widths(2), vec![19, 10, 7, 5]);
        assert_eq!(m.decoder_widths(), vec![15, 21, 30, 41]);
    }

    #[test]
    fn ids2017_topology() {
        let cfg = MiaeConfig::symmetric(vec![25, 25, 30], &[20, 10], 5, 0);
        let m = MiaeModel::build(cfg).unwrap();
        assert_eq!(m.decoder_widths(), vec![15, 30, 60, 80]);
    }

    #[test]
    fn build_rejects_asymmetric_decoder() {
        let mut cfg = toy_config(1);
        cfg.decoder_hidden = vec![5, 8];
        assert!(matches!(
            MiaeModel::build(cfg),
            Err(Error::InvalidConfig(_))
        ));
        let mut cfg = toy_config(1);
        cfg.branch_hidden[1] = vec![4];
        assert!(MiaeModel::build(cfg).is_err());
        assert!(MiaeModel::build(MiaeConfig::symmetric(vec![], &[2], 1, 0)).is_err());
    }

    #[test]
    fn build_is_deterministic_with_zero_biases() {
        let a = MiaeModel::build(toy_config(5)).unwrap();
        let b = MiaeModel::build(toy_config(5)).unwrap();
        assert_eq!(a, b);
        let c = MiaeModel::build(toy_config(6)).unwrap();
        assert_ne!(a, c);
        for (i, p) in a.parameters().iter().enumerate() {
            if i % 2 == 1 {
                assert!(p.as_slice().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn z_is_branch_concatenation() {
        let m = MiaeModel::build(toy_config(2)).unwrap();
        let x = random_input(5, 7, 3);
        let z = m.encode_concat(&x).unwrap();
        assert_eq!(z.shape(), (5, 4));
        let e1 = m.encoders.stacks[0].forward(&x.column_block(0, 3));
        let e2 = m.encoders.stacks[1].forward(&x.column_block(3, 4));
        assert_eq!(z, Matrix::hconcat(&[e1, e2]).unwrap());
    }

    #[test]
    fn batch_encode_equals_row_by_row() {
        let m = MiaeModel::build(toy_config(4)).unwrap();
        let x = random_input(9, 7, 8);
        let z = m.encode_concat(&x).unwrap();
        for r in 0..9 {
            let zr = m.encode_concat(&x.select_rows(&[r])).unwrap();
            assert_eq!(zr.as_slice(), z.row(r));
        }
    }

    #[test]
    fn branch_permutation_permutes_z_blocks() {
        let cfg = MiaeConfig::symmetric(vec![3, 4], &[4], 2, 11);
        let m = MiaeModel::build(cfg).unwrap();
        let mut swapped = m.clone();
        swapped.encoders.stacks.swap(0, 1);
        swapped.config.branch_dims = vec![4, 3];

        let x = random_input(6, 7, 12);
        let x_swapped = Matrix::hconcat(&[x.column_block(3, 4), x.column_block(0, 3)]).unwrap();
        let z = m.encode_concat(&x).unwrap();
        let zs = swapped.encode_concat(&x_swapped).unwrap();
        assert_eq!(zs.column_block(0, 2), z.column_block(2, 2));
        assert_eq!(zs.column_block(2, 2), z.column_block(0, 2));
    }

    #[test]
    fn decode_shape_and_range() {
        let m = MiaeModel::build(MiaeConfig::symmetric(vec![9, 13, 19], &[10, 7], 5, 1)).unwrap();
        let mut rng = Rng::new(1);
        let z = Matrix::from_vec(4, 15, (0..60).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let x_hat = m.decode(&z).unwrap();
        assert_eq!(x_hat.shape(), (4, 41));
        assert!(x_hat.as_slice().iter().all(|&v| v >= 0.0));
        assert!(m.decode(&Matrix::zeros(1, 14)).is_err());
    }

    #[test]
    fn loss_is_mse_of_concatenation() {
        let m = MiaeModel::build(toy_config(3)).unwrap();
        let x = random_input(10, 7, 4);
        let view = BranchPartition::from_widths(&[3, 4]).split(&x).unwrap();
        let expected = mse(&x, &m.decode(&m.encode(&view).unwrap()).unwrap()).unwrap();
        assert_eq!(m.loss(&view).unwrap(), expected);
        assert!(m.loss_concat(&Matrix::zeros(0, 7)).is_err());
        let wrong = BranchPartition::new(&PartitionSpec::Widths(vec![4, 3]), 7)
            .unwrap()
            .split(&x)
            .unwrap();
        assert!(m.loss(&wrong).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let m = MiaeModel::build(toy_config(seed)).unwrap();
            let x = random_input(8, 7, 100 + seed);
            let (_, grads) = m.gradients(&x).unwrap();
            let params = m.parameters();
            assert_eq!(grads.len(), params.len());
            for (k, analytic) in grads.iter().enumerate() {
                let numeric = finite_diff_grad(
                    |p| {
                        let mut probe = m.clone();
                        *probe.parameters_mut()[k] = p.clone();
                        probe.loss_concat(&x).unwrap()
                    },
                    params[k],
                    1e-5,
                )
                .unwrap();
                let err = relative_error(analytic, &numeric);
                assert!(err < 1e-4, "seed {seed} param {k}: {err}");
            }
        }
    }

    #[test]
    fn overfits_a_single_repeated_sample() {
        let sample = [0.2, 0.7, 0.5, 0.9, 0.3];
        let x = Matrix::from_rows(&vec![sample; 10]).unwrap();
        let row = x.select_rows(&[0]);
        // A ReLU output that starts dead never recovers, so require live outputs.
        let mut m = (0..)
            .map(|seed| MiaeModel::build(MiaeConfig::symmetric(vec![2, 3], &[6], 3, seed)).unwrap())
            .find(|m| {
                m.reconstruct(&row)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .all(|&v| v > 0.0)
            })
            .unwrap();
        let hyper = TrainHyper {
            batch_size: 10,
            epochs: 1500,
            lr: 3e-3,
            shuffle_seed: 0,
        };
        m.train_concat(&x, &hyper).unwrap();
        let err = mse(&row, &m.reconstruct(&row).unwrap()).unwrap();
        assert!(err < 1e-3, "reconstruction error {err}");
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let x = crate::synth::low_rank_rows(200, &[3, 4], 2, 31);
        let hyper = TrainHyper {
            batch_size: 32,
            epochs: 500,
            lr: 3e-3,
            shuffle_seed: 9,
        };
        let mut a = MiaeModel::build(toy_config(7)).unwrap();
        let ha = a.train_concat(&x, &hyper).unwrap();
        assert_eq!(ha.len(), 500);
        assert!(ha[499] <= 0.5 * ha[0], "first {} last {}", ha[0], ha[499]);
        let mut b = MiaeModel::build(toy_config(7)).unwrap();
        let hb = b.train_concat(&x, &hyper).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut m = MiaeModel::build(toy_config(1)).unwrap();
        let x = random_input(4, 7, 1);
        let hyper = TrainHyper {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            m.train_concat(&x, &hyper),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn full_batch_history_ignores_shuffle_seed() {
        let x = random_input(20, 7, 2);
        let run = |shuffle_seed| {
            let mut m = MiaeModel::build(toy_config(3)).unwrap();
            let hyper = TrainHyper {
                batch_size: 64,
                epochs: 20,
                lr: 1e-2,
                shuffle_seed,
            };
            m.train_concat(&x, &hyper).unwrap()
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn single_branch_matches_plain_autoencoder() {
        let x = random_input(30, 5, 6);
        let hyper = TrainHyper {
            batch_size: 8,
            epochs: 10,
            lr: 1e-2,
            shuffle_seed: 4,
        };
        let mut miae = MiaeModel::build(MiaeConfig::symmetric(vec![5], &[4], 2, 13)).unwrap();
        let mut ae = PlainAutoencoder::build(&[5, 4, 2], &[2, 4, 5], 13).unwrap();
        assert_eq!(
            miae.loss_concat(&x).unwrap().to_bits(),
            ae.loss(&x).unwrap().to_bits()
        );
        let h1 = miae.train_concat(&x, &hyper).unwrap();
        let h2 = ae.train(&x, &hyper).unwrap();
        assert_eq!(h1, h2);
    }
}
