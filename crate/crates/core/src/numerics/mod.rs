//! Dense kernels shared by both autoencoders: matrices, activations, Glorot
//! initialization, Adam, and a central-difference gradient oracle.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `pre` and output `out`.
    #[inline]
    pub(crate) fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `fan_in × fan_out` matrix drawn uniformly from `[-L, L)`, `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::dim(format!(
            "glorot_init needs positive fans, got {fan_in}x{fan_out}"
        )));
    }
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data)
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `x · W + b` with `b` broadcast over rows.
pub fn affine_forward(x: &Matrix, weight: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if x.cols() != weight.rows() {
        return Err(Error::dim(format!(
            "input has {} columns but weight expects {}",
            x.cols(),
            weight.rows()
        )));
    }
    if bias.rows() != 1 || bias.cols() != weight.cols() {
        return Err(Error::dim(format!(
            "bias is {}x{}, expected 1x{}",
            bias.rows(),
            bias.cols(),
            weight.cols()
        )));
    }
    Ok(affine_unchecked(x, weight, bias))
}

pub(crate) fn affine_unchecked(x: &Matrix, weight: &Matrix, bias: &Matrix) -> Matrix {
    let mut out = x.matmul_unchecked(weight);
    let b = bias.as_slice();
    for r in 0..out.rows() {
        for (o, &bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    out
}

pub fn activate(x: &Matrix, kind: Activation) -> Matrix {
    x.map(|v| kind.apply(v))
}

/// Adam moments for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            lr,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
        }
    }

    pub fn for_param(param: &Matrix, lr: f64) -> Self {
        Self::new(param.rows(), param.cols(), lr)
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::dim(format!(
            "adam shapes differ: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let p = param.as_mut_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// `(1/m) Σ_i ‖a_i − b_i‖²`: per-row squared error summed over columns, averaged over rows.
pub fn mse(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "mse shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.rows() == 0 {
        return Err(Error::EmptyInput("mse over zero rows".into()));
    }
    let total: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(total / a.rows() as f64)
}

pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Central-difference gradient of `loss` at `param`.
pub fn finite_diff_grad<F>(mut loss: F, param: &Matrix, eps: f64) -> Result<Matrix>
where
    F: FnMut(&Matrix) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::config(format!(
            "finite-difference eps must be > 0, got {eps}"
        )));
    }
    let mut probe = param.clone();
    let mut grad = Matrix::zeros(param.rows(), param.cols());
    for i in 0..param.len() {
        let original = probe.as_slice()[i];
        probe.as_mut_slice()[i] = original + eps;
        let plus = loss(&probe);
        probe.as_mut_slice()[i] = original - eps;
        let minus = loss(&probe);
        probe.as_mut_slice()[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss is not finite when perturbing entry {i}"
            )));
        }
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// `‖a − b‖ / max(‖a‖ + ‖b‖, floor)` over all entries.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.sum_of_squares().sqrt() + b.sum_of_squares().sqrt();
    diff / scale.max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.uniform(-2.0, 2.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn glorot_bounds_unit_fans() {
        let mut rng = Rng::new(1);
        let w = glorot_init(1, 1, &mut rng).unwrap();
        let l = 3f64.sqrt();
        assert!(w.as_slice().iter().all(|v| v.abs() <= l));
        for _ in 0..1000 {
            let v = glorot_init(1, 1, &mut rng).unwrap().get(0, 0);
            assert!(v.abs() <= l);
        }
    }

    #[test]
    fn glorot_variance_matches_uniform_bound() {
        let mut rng = Rng::new(9);
        let w = glorot_init(100, 100, &mut rng).unwrap();
        let n = w.len() as f64;
        let mean = w.as_slice().iter().sum::<f64>() / n;
        let var = w.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        // Uniform on [-L, L] has variance L²/3 = 2 / (fan_in + fan_out).
        let expected = glorot_limit(100, 100).powi(2) / 3.0;
        assert!((expected - 0.01).abs() < 1e-15);
        assert!((var - expected).abs() < 0.1 * expected, "variance {var}");
    }

    #[test]
    fn glorot_is_deterministic_and_rejects_zero_fan() {
        let a = glorot_init(4, 3, &mut Rng::new(5)).unwrap();
        let b = glorot_init(4, 3, &mut Rng::new(5)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(matches!(
            glorot_init(0, 3, &mut Rng::new(5)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn affine_hand_cases() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let w = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = Matrix::row_vector(vec![0.0, 0.0]);
        assert_eq!(affine_forward(&x, &w, &b).unwrap().as_slice(), &[1.0, 2.0]);

        let x = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let w = Matrix::from_rows(&[[2.0], [3.0]]).unwrap();
        let b = Matrix::row_vector(vec![1.0]);
        assert_eq!(affine_forward(&x, &w, &b).unwrap().as_slice(), &[6.0]);
    }

    #[test]
    fn affine_matches_triple_loop() {
        let mut rng = Rng::new(3);
        let x = random_matrix(3, 4, &mut rng);
        let w = random_matrix(4, 5, &mut rng);
        let b = random_matrix(1, 5, &mut rng);
        let out = affine_forward(&x, &w, &b).unwrap();
        for i in 0..3 {
            for k in 0..5 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += x.get(i, j) * w.get(j, k);
                }
                acc += b.get(0, k);
                assert!((out.get(i, k) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_shape_mismatch() {
        let x = Matrix::zeros(2, 3);
        let w = Matrix::zeros(2, 2);
        let b = Matrix::zeros(1, 2);
        assert!(matches!(
            affine_forward(&x, &w, &b),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        let t = Activation::Tanh.apply(5.0);
        assert!(t < 1.0 && t > 0.99);
        assert!(Activation::Tanh.apply(-5.0) > -1.0);

        let mut rng = Rng::new(4);
        let x = random_matrix(5, 6, &mut rng);
        let th = activate(&x, Activation::Tanh);
        let re = activate(&x, Activation::Relu);
        for (i, &v) in x.as_slice().iter().enumerate() {
            assert_eq!(th.as_slice()[i], v.tanh());
            assert_eq!(re.as_slice()[i], if v > 0.0 { v } else { 0.0 });
        }
        assert_eq!(th.shape(), x.shape());
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = Matrix::from_rows(&[[1.5, -2.0]]).unwrap();
        let before = p.clone();
        let mut st = AdamState::for_param(&p, 0.1);
        adam_step(&mut p, &Matrix::zeros(1, 2), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        for &g in &[0.3, -4.0, 1e-3] {
            let lr = 0.05;
            let mut p = Matrix::row_vector(vec![1.0]);
            let mut st = AdamState::for_param(&p, lr);
            adam_step(&mut p, &Matrix::row_vector(vec![g]), &mut st).unwrap();
            // m̂ = g and v̂ = g² after one step.
            let expected = 1.0 - lr * g / ((g * g).sqrt() + AdamState::EPS);
            assert!((p.get(0, 0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut p = Matrix::row_vector(vec![1.0]);
        let mut st = AdamState::for_param(&p, 0.1);
        let mut trace = Vec::new();
        for _ in 0..100 {
            let g = Matrix::row_vector(vec![2.0 * p.get(0, 0)]);
            adam_step(&mut p, &g, &mut st).unwrap();
            trace.push(p.get(0, 0).abs());
        }
        assert!(trace[..10].windows(2).all(|w| w[1] < w[0]));
        assert!(*trace.last().unwrap() < 0.1, "final |p| = {}", trace[99]);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let mut st = AdamState::new(2, 2, 0.1);
        assert!(adam_step(&mut p, &Matrix::zeros(1, 2), &mut st).is_err());
    }

    #[test]
    fn mse_cases() {
        let a = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let b = Matrix::zeros(1, 2);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 2.0);
        assert!(mse(&a, &Matrix::zeros(2, 2)).is_err());

        let mut rng = Rng::new(8);
        let a = random_matrix(7, 3, &mut rng);
        let b = random_matrix(7, 3, &mut rng);
        let mut acc = 0.0;
        for i in 0..7 {
            let mut row = 0.0;
            for j in 0..3 {
                row += (a.get(i, j) - b.get(i, j)).powi(2);
            }
            acc += row;
        }
        assert!((mse(&a, &b).unwrap() - acc / 7.0).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_cases() {
        let p = Matrix::row_vector(vec![3.0]);
        let g = finite_diff_grad(|m| m.sum_of_squares(), &p, DEFAULT_FD_EPS).unwrap();
        assert!((g.get(0, 0) - 6.0).abs() < 1e-6);

        let p = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let g = finite_diff_grad(|_| 7.0, &p, DEFAULT_FD_EPS).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));

        assert!(finite_diff_grad(|_| f64::NAN, &p, 1e-5).is_err());
        assert!(finite_diff_grad(|_| 0.0, &p, 0.0).is_err());
    }

    #[test]
    fn matrix_products_agree() {
        let mut rng = Rng::new(12);
        let a = random_matrix(4, 3, &mut rng);
        let b = random_matrix(4, 5, &mut rng);
        let c = random_matrix(6, 3, &mut rng);
        let lhs = a.t_matmul(&b);
        let rhs = a.transpose().matmul(&b).unwrap();
        assert!(relative_error(&lhs, &rhs) < 1e-14);
        let lhs = a.matmul_t(&c);
        let rhs = a.matmul(&c.transpose()).unwrap();
        assert!(relative_error(&lhs, &rhs) < 1e-14);
    }
}
