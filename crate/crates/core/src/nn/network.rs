use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{matmul, matmul_slices, Matrix, Op, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Linear => T::one(),
        }
    }
}

/// Fully connected layer computing `act(x W + b)`; `weights` is
/// `in_dim x out_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::Shape(format!(
                "{in_dim}x{out_dim} layer got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Uniform initialization: He-style limit `sqrt(6 / fan_in)` for ReLU,
    /// Glorot-style `sqrt(6 / (fan_in + fan_out))` otherwise. Biases start at 0.
    pub fn init<R: RngCore>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        let limit = match activation {
            Activation::Relu => libm::sqrt(6.0 / in_dim as f64),
            Activation::Sigmoid | Activation::Linear => libm::sqrt(6.0 / (in_dim + out_dim) as f64),
        };
        let weights = (0..in_dim * out_dim)
            .map(|_| T::lit((rng.gen::<f64>() * 2.0 - 1.0) * limit))
            .collect();
        Self::new(in_dim, out_dim, weights, alloc::vec![T::zero(); out_dim], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward(&self, input: &Matrix<T>) -> Matrix<T> {
        let mut out = matmul_slices(
            input.data(),
            input.rows(),
            input.cols(),
            Op::N,
            &self.weights,
            self.in_dim,
            self.out_dim,
            Op::N,
        );
        let act = self.activation;
        for row in out.data.chunks_exact_mut(self.out_dim) {
            for (v, &b) in row.iter_mut().zip(&self.bias) {
                *v = act.apply(*v + b);
            }
        }
        out
    }

    pub fn convert<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: self.weights.iter().map(|v| U::lit(v.as_f64())).collect(),
            bias: self.bias.iter().map(|v| U::lit(v.as_f64())).collect(),
            activation: self.activation,
        }
    }
}

/// Ordered layer stack with dropout applied between consecutive layers
/// during training (never to the network input or output).
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub(crate) layers: Vec<DenseLayer<T>>,
    pub(crate) dropout: f64,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    signature: Vec<(usize, usize)>,
    /// Input seen by each layer (after dropout).
    inputs: Vec<Matrix<T>>,
    /// Activation output of each layer (before dropout).
    outputs: Vec<Matrix<T>>,
    /// Inverted-dropout multipliers applied to each layer's output.
    masks: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.outputs.last().expect("network has at least one layer")
    }

    /// Activation output of layer `i`, before dropout.
    pub fn layer_output(&self, i: usize) -> &Matrix<T> {
        &self.outputs[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradient<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(&g.bias).all(|v| v.is_finite()))
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<DenseLayer<T>>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Invalid(format!("dropout rate {dropout} outside [0, 1)")));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers, dropout })
    }

    /// Randomly initialized network from `dims[0] -> dims[1] -> ...`, one
    /// activation per layer.
    pub fn init<R: RngCore>(dims: &[usize], activations: &[Activation], dropout: f64, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::Shape(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| DenseLayer::init(d[0], d[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, dropout)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = alloc::vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim));
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn signature(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect()
    }

    fn check_input(&self, batch: &Matrix<T>) -> Result<()> {
        if batch.cols != self.in_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols,
                self.in_dim()
            )));
        }
        if !batch.is_finite() {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Forward pass. With `training` set and a non-zero rate, inverted
    /// dropout masks are drawn from `rng` for every hidden activation.
    pub fn forward<R: RngCore>(&self, batch: &Matrix<T>, training: bool, rng: &mut R) -> Result<ForwardTrace<T>> {
        self.check_input(batch)?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut outputs: Vec<Matrix<T>> = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let keep_scale = T::lit(1.0 / (1.0 - self.dropout));
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.forward(&current);
            inputs.push(current);
            let apply_dropout = training && self.dropout > 0.0 && i + 1 < n;
            if apply_dropout {
                let mask: Vec<T> = (0..out.data.len())
                    .map(|_| {
                        if rng.gen::<f64>() >= self.dropout {
                            keep_scale
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let dropped = Matrix {
                    rows: out.rows,
                    cols: out.cols,
                    data: out.data.iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
                };
                masks.push(Some(mask));
                current = dropped;
            } else {
                masks.push(None);
                current = out.clone();
            }
            outputs.push(out);
        }
        Ok(ForwardTrace {
            signature: self.signature(),
            inputs,
            outputs,
            masks,
        })
    }

    /// Inference pass (dropout is the identity).
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(batch)?;
        let mut current = self.layers[0].forward(batch);
        for layer in &self.layers[1..] {
            current = layer.forward(&current);
        }
        Ok(current)
    }

    /// Backpropagate `loss_grad` (dLoss/dOutput) through a trace produced by
    /// this network's forward pass.
    pub fn backward(&self, trace: &ForwardTrace<T>, loss_grad: &Matrix<T>) -> Result<Gradients<T>> {
        if trace.signature != self.signature() {
            return Err(Error::Shape("forward trace does not belong to this network".into()));
        }
        if loss_grad.shape() != trace.output().shape() {
            return Err(Error::Shape(format!(
                "loss gradient {:?} vs output {:?}",
                loss_grad.shape(),
                trace.output().shape()
            )));
        }
        let n = self.layers.len();
        let mut grads: Vec<LayerGradient<T>> = Vec::with_capacity(n);
        let mut upstream = loss_grad.clone();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            if let Some(mask) = &trace.masks[i] {
                for (g, &m) in upstream.data.iter_mut().zip(mask) {
                    *g = *g * m;
                }
            }
            let out = &trace.outputs[i];
            let act = layer.activation;
            for (g, &y) in upstream.data.iter_mut().zip(&out.data) {
                *g = *g * act.derivative_from_output(y);
            }
            let delta = upstream;
            let dw = matmul(&trace.inputs[i], Op::T, &delta, Op::N);
            let mut db = alloc::vec![T::zero(); layer.out_dim];
            for row in delta.data.chunks_exact(layer.out_dim) {
                for (acc, &d) in db.iter_mut().zip(row) {
                    *acc = *acc + d;
                }
            }
            upstream = if i > 0 {
                matmul_slices(
                    &delta.data,
                    delta.rows,
                    delta.cols,
                    Op::N,
                    &layer.weights,
                    layer.in_dim,
                    layer.out_dim,
                    Op::T,
                )
            } else {
                Matrix::zeros(0, 0)
            };
            grads.push(LayerGradient {
                weights: dw.data,
                bias: db,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Keep the first `count` layers.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.layers.len() {
            return Err(Error::Invalid(format!(
                "cannot keep {count} of {} layers",
                self.layers.len()
            )));
        }
        Self::new(self.layers[..count].to_vec(), self.dropout)
    }

    pub fn convert<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(DenseLayer::convert).collect(),
            dropout: self.dropout,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input() {
        let layer = DenseLayer::new(2, 2, vec![1.0f64, 0.0, 0.0, 1.0], vec![0.0; 2], Activation::Linear).unwrap();
        let net = Network::new(vec![layer], 0.0).unwrap();
        let x = Matrix::from_vec(1, 2, vec![3.0, -4.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn zero_sigmoid_is_half() {
        let layer = DenseLayer::new(3, 2, vec![0.0f32; 6], vec![0.0; 2], Activation::Sigmoid).unwrap();
        let net = Network::new(vec![layer], 0.0).unwrap();
        let x = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 5.0, 0.5]).unwrap();
        assert!(net.predict(&x).unwrap().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net: Network<f64> = Network::init(&[3, 2], &[Activation::Relu], 0.0, &mut rng).unwrap();
        let bad = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(net.predict(&bad), Err(Error::Shape(_))));
        let nan = Matrix::from_vec(1, 3, vec![1.0, f64::NAN, 2.0]).unwrap();
        assert!(matches!(net.predict(&nan), Err(Error::NonFinite(_))));
        assert!(Network::<f64>::init(&[3, 2, 4], &[Activation::Relu], 0.0, &mut rng).is_err());
        let a = DenseLayer::<f64>::init(3, 2, Activation::Relu, &mut rng).unwrap();
        let b = DenseLayer::<f64>::init(3, 2, Activation::Relu, &mut rng).unwrap();
        assert!(Network::new(vec![a, b], 0.0).is_err());
    }

    #[test]
    fn stale_trace_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Network<f64> = Network::init(&[3, 4, 2], &[Activation::Relu, Activation::Linear], 0.0, &mut rng).unwrap();
        let b: Network<f64> = Network::init(&[3, 5, 2], &[Activation::Relu, Activation::Linear], 0.0, &mut rng).unwrap();
        let x = Matrix::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let trace = a.forward(&x, false, &mut rng).unwrap();
        let g = Matrix::zeros(1, 2);
        assert!(b.backward(&trace, &g).is_err());
        assert!(a.backward(&trace, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn zero_rate_dropout_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Network<f64> =
            Network::init(&[4, 6, 3], &[Activation::Relu, Activation::Sigmoid], 0.0, &mut rng).unwrap();
        let x = Matrix::from_vec(2, 4, vec![0.1, 0.5, -0.3, 0.9, 1.0, 0.0, 0.2, -0.7]).unwrap();
        let trained = net.forward(&x, true, &mut rng).unwrap();
        assert_eq!(trained.output(), &net.predict(&x).unwrap());
    }
}
