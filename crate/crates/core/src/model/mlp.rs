//! Fully connected stacks with tanh hidden layers and a linear output layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`.
    pub weight: DenseMatrix<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in layer.weight.as_mut_slice() {
            *w = rng.uniform(-bound, bound);
        }
        layer
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs())
            .map(|o| dot(self.weight.row(o), x) + self.bias[o])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass; `acts[0]` is the input and
/// `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub acts: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace holds at least the input")
    }
}

impl Mlp {
    /// Layer widths `sizes[0] -> sizes[1] -> ... -> sizes[last]`.
    pub fn glorot(sizes: &[usize], rng: &mut RngStream) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense::glorot(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, Dense::inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs() {
            return Err(Error::Shape(format!(
                "expected {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len().saturating_sub(1);
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if l < last {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        h
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let last = self.layers.len().saturating_sub(1);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = layer.forward(acts.last().unwrap());
            if l < last {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(h);
        }
        MlpTrace { acts }
    }

    /// Accumulates parameter gradients into `grads` given the gradient of the
    /// loss with respect to the network output, and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, d_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let last = self.layers.len().saturating_sub(1);
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let layer = &self.layers[l];
            let input = &trace.acts[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                for (gw, &x) in g.weight.row_mut(o).iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            let mut d_in = vec![0.0; layer.inputs()];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (di, &w) in d_in.iter_mut().zip(layer.weight.row(o)) {
                    *di += d * w;
                }
            }
            delta = d_in;
        }
        delta
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.bias.len() * (l.inputs() + 1))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn flatten(m: &Mlp) -> Vec<f64> {
        m.layers
            .iter()
            .flat_map(|l| {
                l.weight
                    .as_slice()
                    .iter()
                    .chain(&l.bias)
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn unflatten(m: &mut Mlp, theta: &[f64]) {
        let mut k = 0;
        for l in &mut m.layers {
            for w in l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()) {
                *w = theta[k];
                k += 1;
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let net = Mlp::glorot(&[5, 7, 3], &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let target = [0.3, -0.2, 0.9];
        let loss = |m: &Mlp| {
            m.forward(&x)
                .iter()
                .zip(target)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>()
        };
        let trace = net.forward_trace(&x);
        let d_out: Vec<f64> = trace
            .output()
            .iter()
            .zip(target)
            .map(|(o, t)| 2.0 * (o - t))
            .collect();
        let mut grads = net.zeros_like();
        let d_in = net.backward(&trace, &d_out, &mut grads);

        let theta = flatten(&net);
        let err = grad_check(
            |th: &[f64]| {
                let mut m = net.clone();
                unflatten(&mut m, th);
                loss(&m)
            },
            &theta,
            &flatten(&grads),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "parameter gradient error {err}");

        let err_x = grad_check(
            |xx: &[f64]| {
                net.forward(xx)
                    .iter()
                    .zip(target)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>()
            },
            &x,
            &d_in,
            1e-6,
        )
        .unwrap();
        assert!(err_x < 1e-6, "input gradient error {err_x}");
    }

    #[test]
    fn zero_weights_emit_bias() {
        let mut net = Mlp::glorot(&[4, 3, 2], &mut RngStream::new(1)).zeros_like();
        net.layers[1].bias = vec![0.25, -1.0];
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]), vec![0.25, -1.0]);
    }
}
