//! Dense autoencoder over adjacency-matrix rows.
//!
//! The network maps each node's binary adjacency row through a mirrored stack
//! of fully connected layers, `k -> hidden -> bottleneck -> hidden -> k`, with
//! `tanh` on every hidden layer and a `sigmoid` output. Training is full-batch
//! gradient descent on the mean squared reconstruction error, and a node's
//! anomaly signal is its own reconstruction error.
//!
//! # Checkpoint layout
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! b"MGAE"                 magic
//! u32                     format version (1)
//! u32                     number of layer dims L
//! u32 x L                 layer dims
//! f64 x ...               for each layer: weights (rows = outputs), then biases
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MGAE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// One fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, &b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let mut z = b;
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            out.push(self.activation.apply(z));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    layers: Vec<Layer>,
}

impl AutoencoderModel {
    /// Assembles a model from explicit parameters.
    ///
    /// `weights[l]` must hold `dims[l+1] * dims[l]` values and `biases[l]`
    /// `dims[l+1]`. Hidden layers get `tanh`, the last layer `sigmoid`.
    pub fn from_parameters(
        layer_dims: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(layer_dims)?;
        let n = layer_dims.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: weights.len().min(biases.len()),
            });
        }
        let mut layers = Vec::with_capacity(n);
        for (l, (w, b)) in weights.into_iter().zip(biases).enumerate() {
            let (inputs, outputs) = (layer_dims[l], layer_dims[l + 1]);
            if w.len() != inputs * outputs {
                return Err(Error::Shape {
                    expected: inputs * outputs,
                    actual: w.len(),
                });
            }
            if b.len() != outputs {
                return Err(Error::Shape {
                    expected: outputs,
                    actual: b.len(),
                });
            }
            if w.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("non-finite parameter in layer {l}")));
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights: w,
                biases: b,
                activation: if l + 1 == n {
                    Activation::Sigmoid
                } else {
                    Activation::Tanh
                },
            });
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    /// Input (and output) width `k`.
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Overwrites all parameters in [`parameters`](Self::parameters) order.
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::Shape {
                expected: self.parameter_count(),
                actual: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Writes the binary checkpoint described in the module docs.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        let dims = self.layer_dims();
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(dims.len() as u32).to_le_bytes())
            .map_err(io)?;
        for d in dims {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        for p in self.parameters() {
            w.write_all(&p.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<checkpoint>", e))?;
        let mut cur = ByteReader(bytes.as_slice());
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_dims = cur.u32()? as usize;
        let dims = (0..n_dims)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        check_dims(&dims).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            weights.push(cur.f64s(pair[0] * pair[1])?);
            biases.push(cur.f64s(pair[1])?);
        }
        if !cur.0.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Self::from_parameters(&dims, weights, biases)
    }
}

struct ByteReader<'a>(&'a [u8]);

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 || dims.contains(&0) {
        return Err(Error::Config(format!("invalid layer dims {dims:?}")));
    }
    if dims.iter().ne(dims.iter().rev()) {
        return Err(Error::Config(format!(
            "layer dims {dims:?} are not mirrored around the bottleneck"
        )));
    }
    Ok(())
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub bottleneck_dim: usize,
    pub hidden_dim: usize,
}

impl TrainConfig {
    pub const DEFAULT_EPOCHS: usize = 500;
    pub const DEFAULT_LEARNING_RATE: f64 = 1.0;

    /// Default architecture for `k` nodes: `(k, 128, 32, 128, k)` from 256
    /// nodes up, `(k, ceil(k/4), ceil(k/16), ..)` below, squeezed so that
    /// `bottleneck < hidden < k` still holds for small graphs.
    pub fn for_nodes(k: usize, seed: u64) -> Self {
        let (hidden, bottleneck) = default_widths(k);
        Self {
            epochs: Self::DEFAULT_EPOCHS,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            seed,
            bottleneck_dim: bottleneck,
            hidden_dim: hidden,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be a non-negative finite number, got {}",
                self.learning_rate
            )));
        }
        if !(0 < self.bottleneck_dim
            && self.bottleneck_dim < self.hidden_dim
            && self.hidden_dim < k)
        {
            return Err(Error::Config(format!(
                "need 0 < bottleneck ({}) < hidden ({}) < k ({k})",
                self.bottleneck_dim, self.hidden_dim
            )));
        }
        Ok(())
    }

    pub fn layer_dims(&self, k: usize) -> [usize; 5] {
        [k, self.hidden_dim, self.bottleneck_dim, self.hidden_dim, k]
    }
}

fn default_widths(k: usize) -> (usize, usize) {
    if k >= 256 {
        return (128, 32);
    }
    let hidden = k.div_ceil(4).max(2).min(k.saturating_sub(1));
    let bottleneck = k.div_ceil(16).min(hidden.saturating_sub(1));
    (hidden, bottleneck)
}

/// Glorot-uniform weights from a ChaCha8 stream seeded with `cfg.seed`,
/// zero biases.
pub fn init_model(k: usize, cfg: &TrainConfig) -> Result<AutoencoderModel> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 nodes, got {k}")));
    }
    cfg.validate(k)?;
    let dims = cfg.layer_dims(k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..=bound))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    AutoencoderModel::from_parameters(&dims, weights, biases)
}

/// Bottleneck code and reconstruction of one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub latent: Vec<f64>,
    pub output: Vec<f64>,
}

/// Activations of every layer, input first.
fn activations(model: &AutoencoderModel, x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    acts.push(x.to_vec());
    for layer in &model.layers {
        let mut out = Vec::with_capacity(layer.outputs);
        layer.forward_into(acts.last().unwrap(), &mut out);
        acts.push(out);
    }
    acts
}

fn check_input(model: &AutoencoderModel, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::Shape {
            expected: model.input_dim(),
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite autoencoder input".into()));
    }
    Ok(())
}

pub fn forward(model: &AutoencoderModel, x: &[f64]) -> Result<Forward> {
    check_input(model, x)?;
    let mut acts = activations(model, x);
    let output = acts.pop().unwrap();
    let latent = acts.swap_remove(model.layers.len() / 2);
    Ok(Forward { latent, output })
}

/// `(1/k) * sum (x_j - y_j)^2`.
pub fn mse_loss(x: &[f64], reconstruction: &[f64]) -> Result<f64> {
    if x.len() != reconstruction.len() {
        return Err(Error::Shape {
            expected: x.len(),
            actual: reconstruction.len(),
        });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = x
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// Mean MSE over `rows` and its exact gradient, flattened in
/// [`AutoencoderModel::parameters`] order.
///
/// Rows are accumulated in order, so the result is reproducible bit for bit.
pub fn loss_and_gradient(model: &AutoencoderModel, rows: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let n_rows = rows.len() as f64;
    let k = model.input_dim() as f64;
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
        .collect();
    let mut loss = 0.0;

    for x in rows {
        check_input(model, x)?;
        let acts = activations(model, x);
        let out = acts.last().unwrap();
        loss += mse_loss(x, out)?;

        let last = model.layers.last().unwrap();
        let mut delta: Vec<f64> = out
            .iter()
            .zip(x)
            .map(|(&y, &t)| 2.0 * (y - t) / (k * n_rows) * last.activation.derivative(y))
            .collect();

        for (l, layer) in model.layers.iter().enumerate().rev() {
            let input = &acts[l];
            let (gw, gb) = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let below = model.layers[l - 1].activation;
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, &d)| d * layer.weights[o * layer.inputs + i])
                            .sum();
                        back * below.derivative(input[i])
                    })
                    .collect();
            }
        }
    }

    let flat = grads
        .into_iter()
        .flat_map(|(w, b)| w.into_iter().chain(b))
        .collect();
    Ok((loss / n_rows, flat))
}

/// Per-epoch training loss, measured before each update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
}

impl TrainTrace {
    pub fn initial(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// `epoch,loss` CSV, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, l);
        }
        out
    }
}

/// Full-batch gradient descent for `cfg.epochs` epochs.
pub fn train(
    model: &AutoencoderModel,
    rows: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, TrainTrace)> {
    cfg.validate(model.input_dim())?;
    let mut model = model.clone();
    let mut params = model.parameters();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = loss_and_gradient(&model, rows)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss,
            });
        }
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss,
            });
        }
        model.set_parameters(&params)?;
    }
    Ok((model, TrainTrace { losses }))
}

/// Reconstruction error of every row (one per node).
pub fn reconstruction_errors(model: &AutoencoderModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|x| mse_loss(x, &forward(model, x)?.output))
        .collect()
}
