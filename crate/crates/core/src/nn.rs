//! Small feedforward networks with exact reverse-mode gradients.
//!
//! A network is an ordered list of layers applied to a batch matrix whose
//! rows are samples. Parameters are enumerated layer by layer, and within an
//! affine layer the weight (row-major, `input × output`) precedes the bias.
//! Optimizer state, gradients and the model container all use this order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix};

/// Layer vocabulary. Only affine layers carry parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    /// `y = x·W + b`, `W` is `input × output`.
    Affine {
        weight: Matrix,
        bias: Vec<f64>,
    },
    Relu,
    Softplus,
    Tanh,
    Exp,
}

/// Parameter-free description of a layer, used by architecture templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Affine { input: usize, output: usize },
    Relu,
    Softplus,
    Tanh,
    Exp,
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Affine { weight, .. } => LayerKind::Affine { input: weight.rows(), output: weight.cols() },
            Layer::Relu => LayerKind::Relu,
            Layer::Softplus => LayerKind::Softplus,
            Layer::Tanh => LayerKind::Tanh,
            Layer::Exp => LayerKind::Exp,
        }
    }

    fn zeros(kind: LayerKind) -> Self {
        match kind {
            LayerKind::Affine { input, output } => {
                Layer::Affine { weight: Matrix::zeros(input, output), bias: vec![0.0; output] }
            }
            LayerKind::Relu => Layer::Relu,
            LayerKind::Softplus => Layer::Softplus,
            LayerKind::Tanh => Layer::Tanh,
            LayerKind::Exp => Layer::Exp,
        }
    }
}

/// `max(x, 0) + log1p(exp(−|x|))`
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Activations cached by [`Network::forward`]: the input followed by every
/// layer output.
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("tape always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

fn check_kinds(input_dim: usize, kinds: impl Iterator<Item = LayerKind>) -> Result<usize> {
    let mut width = input_dim;
    for (i, kind) in kinds.enumerate() {
        if let LayerKind::Affine { input, output } = kind {
            if input != width {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: affine expects {input} inputs but receives {width}"
                )));
            }
            width = output;
        }
    }
    Ok(width)
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if let Layer::Affine { weight, bias } = l {
                if bias.len() != weight.cols() {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {i}: bias length {} but {} outputs",
                        bias.len(),
                        weight.cols()
                    )));
                }
            }
        }
        check_kinds(input_dim, layers.iter().map(Layer::kind))?;
        Ok(Self { input_dim, layers })
    }

    /// The identity map on `dim` features.
    pub fn identity(dim: usize) -> Self {
        Self { input_dim: dim, layers: Vec::new() }
    }

    pub fn zeros(input_dim: usize, kinds: &[LayerKind]) -> Result<Self> {
        check_kinds(input_dim, kinds.iter().copied())?;
        Ok(Self { input_dim, layers: kinds.iter().map(|&k| Layer::zeros(k)).collect() })
    }

    /// Affine weights uniform in `±√(6/(in+out))`, biases zero.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, kinds: &[LayerKind], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(input_dim, kinds)?;
        for layer in &mut net.layers {
            if let Layer::Affine { weight, .. } = layer {
                let fan = (weight.rows() + weight.cols()).max(1) as f64;
                let bound = (6.0 / fan).sqrt();
                for w in weight.data_mut() {
                    *w = rng.random_range(-bound..=bound);
                }
            }
        }
        Ok(net)
    }

    pub fn zeros_like(&self) -> Self {
        Self { input_dim: self.input_dim, layers: self.layers.iter().map(|l| Layer::zeros(l.kind())).collect() }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.iter().fold(self.input_dim, |w, l| match l {
            Layer::Affine { weight, .. } => weight.cols(),
            _ => w,
        })
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter blocks in the documented order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Layer::Affine { weight, bias } = l {
                out.push(weight.data());
                out.push(bias.as_slice());
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Affine { weight, bias } = l {
                out.push(weight.data_mut());
                out.push(bias.as_mut_slice());
            }
        }
        out
    }

    /// Names matching [`Network::tensors`], prefixed by `prefix`.
    pub fn tensor_names(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if matches!(l, Layer::Affine { .. }) {
                out.push(format!("{prefix}.layers[{i}].weight"));
                out.push(format!("{prefix}.layers[{i}].bias"));
            }
        }
        out
    }

    /// `½ Σ θ²` over every affine parameter.
    pub fn param_l2(&self) -> f64 {
        0.5 * self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Tape)> {
        let tape = self.forward_tape(x)?;
        Ok((tape.output().clone(), tape))
    }

    pub fn forward_tape(&self, x: &Matrix) -> Result<Tape> {
        if x.cols() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} input columns, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let input = activations.last().unwrap();
            let out = match layer {
                Layer::Affine { weight, bias } => {
                    let mut y = Matrix::zeros(input.rows(), weight.cols());
                    for r in 0..y.rows() {
                        y.row_mut(r).copy_from_slice(bias);
                    }
                    gemm(1.0, input, false, weight, false, 1.0, &mut y);
                    y
                }
                Layer::Relu => input.map(|v| v.max(0.0)),
                Layer::Softplus => input.map(softplus),
                Layer::Tanh => input.map(f64::tanh),
                Layer::Exp => input.map(f64::exp),
            };
            activations.push(out);
        }
        Ok(Tape { activations })
    }

    /// Evaluate without keeping a tape.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_tape(x)?.activations.pop().unwrap())
    }

    pub fn backward(&self, tape: &Tape, dy: &Matrix) -> Result<(Matrix, Network)> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(tape, dy, &mut grads)?;
        Ok((dx, grads))
    }

    /// Reverse pass that adds parameter gradients into `grads` (which must be
    /// shaped like `self`) and returns the input gradient.
    pub fn backward_into(&self, tape: &Tape, dy: &Matrix, grads: &mut Network) -> Result<Matrix> {
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(Error::InvalidTape(format!(
                "tape has {} activations for a {}-layer network",
                tape.activations.len(),
                self.layers.len()
            )));
        }
        for (i, (layer, act)) in self.layers.iter().zip(&tape.activations[1..]).enumerate() {
            if let Layer::Affine { weight, .. } = layer {
                if act.cols() != weight.cols() {
                    return Err(Error::InvalidTape(format!("layer {i} output width does not match")));
                }
            }
        }
        if dy.shape() != tape.output().shape() {
            return Err(Error::InvalidTape(format!(
                "upstream gradient is {:?}, output is {:?}",
                dy.shape(),
                tape.output().shape()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("gradient network does not match".into()));
        }

        let mut delta = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let input = &tape.activations[i];
            let output = &tape.activations[i + 1];
            delta = match &self.layers[i] {
                Layer::Affine { weight, .. } => {
                    if let Layer::Affine { weight: gw, bias: gb } = &mut grads.layers[i] {
                        gemm(1.0, input, true, &delta, false, 1.0, gw);
                        for r in 0..delta.rows() {
                            for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                                *b += d;
                            }
                        }
                    } else {
                        return Err(Error::ShapeMismatch(format!("gradient layer {i} is not affine")));
                    }
                    delta.matmul_t(weight)
                }
                Layer::Relu => zip_map(&delta, input, |d, x| if x > 0.0 { d } else { 0.0 }),
                Layer::Softplus => zip_map(&delta, input, |d, x| d * sigmoid(x)),
                Layer::Tanh => zip_map(&delta, output, |d, y| d * (1.0 - y * y)),
                Layer::Exp => zip_map(&delta, output, |d, y| d * y),
            };
        }
        Ok(delta)
    }

    /// Element-wise `self += scale · other` over parameters.
    pub fn axpy(&mut self, scale: f64, other: &Network) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::new(a.rows(), a.cols(), data).expect("same shape")
}

pub fn forward(net: &Network, x: &Matrix) -> Result<(Matrix, Tape)> {
    net.forward(x)
}

pub fn backward(net: &Network, tape: &Tape, dy: &Matrix) -> Result<(Matrix, Network)> {
    net.backward(tape, dy)
}

pub fn param_l2(net: &Network) -> f64 {
    net.param_l2()
}
