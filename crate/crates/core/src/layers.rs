//! Fully connected layers with hand-written backpropagation.

use crate::error::{Error, Result};
use crate::numerics::{affine_unchecked, glorot_init, Activation, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`.
    pub weight: Matrix,
    /// `1 × fan_out`.
    pub bias: Matrix,
    pub activation: Activation,
}

/// Gradients of one dense layer.
#[derive(Debug, Clone)]
pub(crate) struct DenseGrad {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn init(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Self {
            weight: glorot_init(fan_in, fan_out, rng)?,
            bias: Matrix::zeros(1, fan_out),
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = affine_unchecked(x, &self.weight, &self.bias);
        let act = self.activation;
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = act.apply(*v));
        out
    }

    fn forward_cached(&self, x: &Matrix) -> (Matrix, Matrix) {
        let pre = affine_unchecked(x, &self.weight, &self.bias);
        let out = pre.map(|v| self.activation.apply(v));
        (pre, out)
    }

    /// Returns parameter gradients and, when requested, the gradient w.r.t. the input.
    fn backward(
        &self,
        input: &Matrix,
        pre: &Matrix,
        out: &Matrix,
        d_out: &Matrix,
        want_input_grad: bool,
    ) -> (DenseGrad, Option<Matrix>) {
        let mut d_pre = d_out.clone();
        for ((d, &p), &o) in d_pre
            .as_mut_slice()
            .iter_mut()
            .zip(pre.as_slice())
            .zip(out.as_slice())
        {
            *d *= self.activation.derivative(p, o);
        }
        let grad = DenseGrad {
            weight: input.t_matmul(&d_pre),
            bias: d_pre.column_sums(),
        };
        let d_in = want_input_grad.then(|| d_pre.matmul_t(&self.weight));
        (grad, d_in)
    }
}

/// A feed-forward stack: Tanh on every layer except the last, which uses `output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub layers: Vec<Dense>,
}

/// Intermediate values kept from a forward pass for backpropagation.
pub(crate) struct StackTrace {
    inputs: Vec<Matrix>,
    pres: Vec<Matrix>,
    outs: Vec<Matrix>,
}

impl StackTrace {
    pub fn output(&self) -> &Matrix {
        self.outs.last().expect("stack has at least one layer")
    }
}

impl Stack {
    /// `widths = [input, hidden..., output]`. Layers are initialized in order.
    pub fn build(widths: &[usize], output: Activation, rng: &mut Rng) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::config(
                "a layer stack needs at least input and output widths",
            ));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Tanh };
                Dense::init(w[0], w[1], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::fan_out)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(Dense::fan_out));
        w
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(&h);
        }
        h
    }

    pub(crate) fn forward_trace(&self, x: &Matrix) -> StackTrace {
        let n = self.layers.len();
        let mut trace = StackTrace {
            inputs: Vec::with_capacity(n),
            pres: Vec::with_capacity(n),
            outs: Vec::with_capacity(n),
        };
        let mut input = x.clone();
        for layer in &self.layers {
            let (pre, out) = layer.forward_cached(&input);
            trace.inputs.push(input);
            trace.pres.push(pre);
            input = out.clone();
            trace.outs.push(out);
        }
        trace
    }

    /// Backpropagates `d_out` through the stack. Gradients are returned in layer order.
    pub(crate) fn backward(
        &self,
        trace: &StackTrace,
        d_out: Matrix,
        want_input_grad: bool,
    ) -> (Vec<DenseGrad>, Option<Matrix>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        let mut d_input = None;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need = i > 0 || want_input_grad;
            let (g, d_in) = layer.backward(
                &trace.inputs[i],
                &trace.pres[i],
                &trace.outs[i],
                &delta,
                need,
            );
            grads.push(g);
            match d_in {
                Some(d) if i > 0 => delta = d,
                other => d_input = other,
            }
        }
        grads.reverse();
        (grads, d_input)
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

pub(crate) fn flatten_grads(grads: Vec<DenseGrad>, out: &mut Vec<Matrix>) {
    for g in grads {
        out.push(g.weight);
        out.push(g.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, relative_error};

    #[test]
    fn build_uses_tanh_then_output_activation() {
        let s = Stack::build(&[3, 4, 2], Activation::Relu, &mut Rng::new(1)).unwrap();
        assert_eq!(s.layers[0].activation, Activation::Tanh);
        assert_eq!(s.layers[1].activation, Activation::Relu);
        assert_eq!(s.widths(), vec![3, 4, 2]);
        assert!(s
            .layers
            .iter()
            .all(|l| l.bias.as_slice().iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn stack_backward_matches_finite_differences() {
        let mut rng = Rng::new(2);
        let stack = Stack::build(&[3, 5, 4], Activation::Tanh, &mut rng).unwrap();
        let x = Matrix::from_vec(6, 3, (0..18).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let target =
            Matrix::from_vec(6, 4, (0..24).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let loss_of = |s: &Stack| crate::numerics::mse(&s.forward(&x), &target).unwrap();

        let trace = stack.forward_trace(&x);
        let m = x.rows() as f64;
        let d_out = Matrix::from_vec(
            6,
            4,
            trace
                .output()
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(o, t)| 2.0 * (o - t) / m)
                .collect(),
        )
        .unwrap();
        let (grads, d_in) = stack.backward(&trace, d_out, true);
        let mut flat = Vec::new();
        flatten_grads(grads, &mut flat);

        for (k, analytic) in flat.iter().enumerate() {
            let numeric = finite_diff_grad(
                |p| {
                    let mut s = stack.clone();
                    *s.parameters_mut()[k] = p.clone();
                    loss_of(&s)
                },
                stack.parameters()[k],
                1e-5,
            )
            .unwrap();
            assert!(relative_error(analytic, &numeric) < 1e-6, "param {k}");
        }

        let numeric_in = finite_diff_grad(
            |xp| crate::numerics::mse(&stack.forward(xp), &target).unwrap(),
            &x,
            1e-5,
        )
        .unwrap();
        assert!(relative_error(&d_in.unwrap(), &numeric_in) < 1e-6);
    }
}
