//! Multilayer perceptrons over the tape: the substrate for generators,
//! auxiliary models, and translator trunks.

use crate::diffcore::array::{RealMatrix, RealVector};
use crate::diffcore::rng::RngStream;
use crate::diffcore::tape::{stable_softmax, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softmax,
    L2Normalize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: RealMatrix,
    pub bias: RealVector,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: RealMatrix, bias: RealVector, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch {
                op: "Layer::new",
                expected: format!("bias length {}", weight.rows()),
                got: format!("bias length {}", bias.len()),
            });
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }
}

/// An ordered stack of affine layers with per-layer activations.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput { op: "MlpParams::new" });
        }
        for pair in layers.windows(2) {
            if pair[1].weight.cols() != pair[0].weight.rows() {
                return Err(Error::ShapeMismatch {
                    op: "MlpParams::new",
                    expected: format!("layer input {}", pair[0].weight.rows()),
                    got: format!("layer input {}", pair[1].weight.cols()),
                });
            }
        }
        Ok(MlpParams { layers })
    }

    /// Random parameters with the default PyTorch linear initializer:
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    pub fn seeded(dims: &[usize], activations: &[Activation], rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "seeded mlp needs dims (got {}) and one activation per layer (got {})",
                dims.len(),
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let wdata: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform_in(-bound, bound))
                .collect();
            let bdata: Vec<f64> = (0..fan_out).map(|_| rng.uniform_in(-bound, bound)).collect();
            layers.push(Layer::new(
                RealMatrix::new(fan_out, fan_in, wdata)?,
                RealVector::new(bdata),
                act,
            )?);
        }
        MlpParams::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    /// Deterministic forward evaluation.
    pub fn forward(&self, input: &RealVector) -> Result<RealVector> {
        input.check_len("mlp_forward", self.input_dim())?;
        let mut h = input.as_slice().to_vec();
        for layer in &self.layers {
            let mut y = layer.weight.matvec(&h);
            for (v, b) in y.iter_mut().zip(layer.bias.iter()) {
                *v += b;
            }
            h = apply_activation(layer.activation, y)?;
        }
        Ok(RealVector::new(h))
    }

    /// Records the forward pass with parameters as constants; gradients flow
    /// to `input` only.
    pub fn build(&self, tape: &mut Tape, input: Var) -> Var {
        let mut h = input;
        for layer in &self.layers {
            let w = tape.leaf_matrix(&layer.weight, false);
            let b = tape.constant(layer.bias.as_slice());
            let affine = tape.matvec(w, h);
            let pre = tape.add(affine, b);
            h = build_activation(tape, layer.activation, pre);
        }
        h
    }

    /// Records this MLP's parameters as differentiable leaves, for training.
    pub fn build_vars(&self, tape: &mut Tape) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                (
                    tape.leaf_matrix(&l.weight, true),
                    tape.leaf_slice(l.bias.as_slice()),
                    l.activation,
                )
            })
            .collect();
        MlpVars { layers }
    }

    /// Appends all parameters (weights then bias, per layer) to `out`.
    pub fn append_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
    }

    /// Reads parameters back from a flat slice; returns the consumed length.
    pub fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut at = 0;
        for l in &mut self.layers {
            let wlen = l.weight.rows() * l.weight.cols();
            l.weight.as_mut_slice().copy_from_slice(&flat[at..at + wlen]);
            at += wlen;
            let blen = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&flat[at..at + blen]);
            at += blen;
        }
        at
    }
}

/// Tape handles for one MLP's trainable parameters.
pub struct MlpVars {
    layers: Vec<(Var, Var, Activation)>,
}

impl MlpVars {
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Var {
        let mut h = input;
        for &(w, b, act) in &self.layers {
            let affine = tape.matvec(w, h);
            let pre = tape.add(affine, b);
            h = build_activation(tape, act, pre);
        }
        h
    }

    /// Collects gradients in the same order as `MlpParams::append_flat`.
    pub fn collect_grads(
        &self,
        tape: &Tape,
        grads: &crate::diffcore::tape::Gradients,
        out: &mut Vec<f64>,
    ) {
        for &(w, b, _) in &self.layers {
            match grads.get(w) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(tape.shape(w).len())),
            }
            match grads.get(b) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(tape.shape(b).len())),
            }
        }
    }
}

fn apply_activation(act: Activation, y: Vec<f64>) -> Result<Vec<f64>> {
    match act {
        Activation::Identity => Ok(y),
        Activation::Relu => Ok(y.into_iter().map(|v| v.max(0.0)).collect()),
        Activation::Tanh => Ok(y.into_iter().map(|v| v.tanh()).collect()),
        Activation::Softmax => Ok(stable_softmax(&y)),
        Activation::L2Normalize => {
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::DegenerateInput {
                    op: "l2_normalize",
                    detail: "zero pre-normalization feature".into(),
                });
            }
            Ok(y.into_iter().map(|v| v / norm).collect())
        }
    }
}

pub(crate) fn build_activation(tape: &mut Tape, act: Activation, pre: Var) -> Var {
    match act {
        Activation::Identity => pre,
        Activation::Relu => tape.relu(pre),
        Activation::Tanh => tape.tanh(pre),
        Activation::Softmax => tape.softmax(pre),
        Activation::L2Normalize => tape.l2_normalize(pre),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::tape::grad_scalar;
    use crate::oracle::finite_diff_grad;

    fn identity_layer(n: usize, act: Activation) -> Layer {
        Layer::new(RealMatrix::identity(n), RealVector::zeros(n), act).unwrap()
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mlp = MlpParams::new(vec![identity_layer(2, Activation::Identity)]).unwrap();
        let out = mlp.forward(&RealVector::from_slice(&[1.0, 2.0])).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clamps_negatives() {
        let mlp = MlpParams::new(vec![identity_layer(2, Activation::Relu)]).unwrap();
        let out = mlp.forward(&RealVector::from_slice(&[-1.0, 3.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 3.0]);
    }

    #[test]
    fn seeded_net_matches_straight_line_recomputation() {
        let mut rng = RngStream::from_seed(42);
        let mlp = MlpParams::seeded(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let x = [0.5, -1.25, 2.0];
        let out = mlp.forward(&RealVector::from_slice(&x)).unwrap();

        // Independent straight-line evaluation of the same weights.
        let l0 = &mlp.layers()[0];
        let mut h = vec![0.0; 4];
        for r in 0..4 {
            let mut acc = 0.0;
            for c in 0..3 {
                acc += l0.weight.get(r, c) * x[c];
            }
            h[r] = (acc + l0.bias[r]).max(0.0);
        }
        let l1 = &mlp.layers()[1];
        let mut y = vec![0.0; 2];
        for r in 0..2 {
            let mut acc = 0.0;
            for c in 0..4 {
                acc += l1.weight.get(r, c) * h[c];
            }
            y[r] = acc + l1.bias[r];
        }
        assert_eq!(out.as_slice(), &y[..]);
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = RngStream::from_seed(9);
        let mlp = MlpParams::seeded(
            &[2, 8, 3],
            &[Activation::Tanh, Activation::Softmax],
            &mut rng,
        )
        .unwrap();
        let x = RealVector::from_slice(&[0.25, -0.5]);
        let a = mlp.forward(&x).unwrap();
        let b = mlp.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let mlp = MlpParams::new(vec![identity_layer(2, Activation::Identity)]).unwrap();
        assert!(matches!(
            mlp.forward(&RealVector::from_slice(&[1.0])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn random_scalar_head_matches_finite_differences() {
        let mut rng = RngStream::from_seed(5);
        let mlp = MlpParams::seeded(
            &[3, 16, 1],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let at = RealVector::from_slice(&[0.1, -0.7, 0.4]);
        let (value, grad) = grad_scalar(
            |t, z| {
                let out = mlp.build(t, z);
                t.sum(out)
            },
            &at,
        )
        .unwrap();
        assert!((value - mlp.forward(&at).unwrap()[0]).abs() < 1e-12);
        let fd = finite_diff_grad(
            |x| mlp.forward(&RealVector::from_slice(x)).unwrap()[0],
            at.as_slice(),
            1e-5,
        )
        .unwrap();
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn build_vars_flat_roundtrip_matches_append_order() {
        let mut rng = RngStream::from_seed(12);
        let mut mlp = MlpParams::seeded(
            &[2, 3, 2],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let mut flat = Vec::new();
        mlp.append_flat(&mut flat);
        assert_eq!(flat.len(), mlp.param_count());
        let mut bumped = flat.clone();
        for v in bumped.iter_mut() {
            *v += 1.0;
        }
        let consumed = mlp.read_flat(&bumped);
        assert_eq!(consumed, flat.len());
        let mut flat2 = Vec::new();
        mlp.append_flat(&mut flat2);
        assert_eq!(flat2, bumped);
    }
}
