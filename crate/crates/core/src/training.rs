//! Minibatch Adam loop shared by every reconstruction model.

use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamState, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainHyper {
    /// Batch 100, 3000 epochs, learning rate 1e-4.
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 3000,
            lr: 1e-4,
            shuffle_seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// A model trained by minimizing a loss over rows of the concatenated input.
pub(crate) trait Reconstruction {
    fn input_dim(&self) -> usize;

    /// Batch loss and gradients, ordered like `parameters_mut`.
    fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)>;

    fn parameters_mut(&mut self) -> Vec<&mut Matrix>;
}

/// Runs minibatch Adam and returns the per-epoch loss.
///
/// Rows are reshuffled every epoch from a stream seeded by `shuffle_seed`; when
/// one batch covers the whole dataset the natural row order is used. The last
/// partial batch is kept. Each epoch's loss is the batch-size-weighted mean of
/// the batch losses, measured before the corresponding update.
pub(crate) fn fit<M: Reconstruction>(
    model: &mut M,
    x: &Matrix,
    hyper: &TrainHyper,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if x.rows() == 0 {
        return Err(Error::EmptyInput("training data has no rows".into()));
    }
    if x.cols() != model.input_dim() {
        return Err(Error::dim(format!(
            "training data has {} columns, model expects {}",
            x.cols(),
            model.input_dim()
        )));
    }

    let mut states: Vec<AdamState> = model
        .parameters_mut()
        .iter()
        .map(|p| AdamState::for_param(p, hyper.lr))
        .collect();
    let mut rng = Rng::new(hyper.shuffle_seed);
    let n = x.rows();
    let full_batch = hyper.batch_size >= n;
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        let order: Vec<usize> = if full_batch {
            (0..n).collect()
        } else {
            rng.permutation(n)
        };
        let mut total = 0.0;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let batch = if full_batch {
                x.clone()
            } else {
                x.select_rows(chunk)
            };
            let (loss, grads) = model.loss_and_gradients(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            for ((param, grad), state) in model
                .parameters_mut()
                .into_iter()
                .zip(&grads)
                .zip(&mut states)
            {
                adam_step(param, grad, state)?;
            }
            total += loss * chunk.len() as f64;
        }
        history.push(total / n as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        let bad = [
            TrainHyper {
                epochs: 0,
                ..Default::default()
            },
            TrainHyper {
                batch_size: 0,
                ..Default::default()
            },
            TrainHyper {
                lr: 0.0,
                ..Default::default()
            },
            TrainHyper {
                lr: f64::NAN,
                ..Default::default()
            },
        ];
        for h in bad {
            assert!(matches!(h.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    /// Least squares on a single weight vector: loss = mean ‖x·w − 1‖².
    struct Linear {
        w: Matrix,
    }

    impl Reconstruction for Linear {
        fn input_dim(&self) -> usize {
            self.w.rows()
        }

        fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Vec<Matrix>)> {
            let pred = x.matmul(&self.w)?;
            let m = x.rows() as f64;
            let resid = pred.map(|p| p - 1.0);
            let loss = resid.sum_of_squares() / m;
            let grad = x.t_matmul(&resid).scale(2.0 / m);
            Ok((loss, vec![grad]))
        }

        fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.w]
        }
    }

    #[test]
    fn fit_descends_and_reports_each_epoch() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let mut model = Linear {
            w: Matrix::zeros(2, 1),
        };
        let hyper = TrainHyper {
            batch_size: 2,
            epochs: 50,
            lr: 0.05,
            shuffle_seed: 3,
        };
        let h = fit(&mut model, &x, &hyper).unwrap();
        assert_eq!(h.len(), 50);
        assert!(h[49] < h[0]);
    }

    #[test]
    fn diverging_loss_is_reported() {
        struct Bad;
        impl Reconstruction for Bad {
            fn input_dim(&self) -> usize {
                1
            }
            fn loss_and_gradients(&self, _: &Matrix) -> Result<(f64, Vec<Matrix>)> {
                Ok((f64::INFINITY, vec![]))
            }
            fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
                vec![]
            }
        }
        let x = Matrix::zeros(3, 1);
        let err = fit(
            &mut Bad,
            &x,
            &TrainHyper {
                epochs: 1,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Diverged {
                epoch: 0,
                batch: 0,
                ..
            }
        ));
    }
}
