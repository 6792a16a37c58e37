//! Per-arm reward model: typed linear embeddings, concatenation, two ReLU
//! hidden layers and a sigmoid output, trained with summed binary
//! cross-entropy and plain SGD.
//!
//! Parameters live in one flat `Vec<f64>` so gradients, SGD and checkpoints
//! all share a single layout:
//!
//! ```text
//! [ embedding w|b for each FeatureKind ] [ W1 | b1 ] [ W2 | b2 ] [ Wout | bout ]
//! ```
//!
//! Dense weights are row-major (`out x in`).

use std::io::{self, Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::fnv1a;

/// Predictions are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` inside the loss.
pub const BCE_EPSILON: f64 = 1e-7;

const MAGIC: &[u8; 4] = b"URNN";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("expected {expected} input features, got {actual}")]
    InputShape { expected: usize, actual: usize },
    #[error("gradient has {actual} entries, network has {expected} parameters")]
    GradientShape { expected: usize, actual: usize },
    #[error("checkpoint is not a network checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint shape does not match: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn read_err(e: io::Error) -> NnError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        NnError::Truncated
    } else {
        NnError::Io(e)
    }
}

/// Feature types; each owns one embedding shared by every position of that type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Sinr,
    PacketSize,
    ArrivalRate,
    DelayBound,
    Utilization,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Sinr,
        FeatureKind::PacketSize,
        FeatureKind::ArrivalRate,
        FeatureKind::DelayBound,
        FeatureKind::Utilization,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_kinds: Vec<FeatureKind>,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
}

impl NetworkSpec {
    pub fn new(input_kinds: Vec<FeatureKind>, embedding_dim: usize, hidden: Vec<usize>) -> Self {
        Self { input_kinds, embedding_dim, hidden }
    }

    pub fn input_len(&self) -> usize {
        self.input_kinds.len()
    }

    pub fn concat_width(&self) -> usize {
        self.embedding_dim * self.input_len()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend(self.input_kinds.iter().map(|k| k.index() as u8));
        bytes.extend((self.embedding_dim as u64).to_le_bytes());
        for h in &self.hidden {
            bytes.extend((*h as u64).to_le_bytes());
        }
        fnv1a(&bytes)
    }

    fn layout(&self) -> Layout {
        let d = self.embedding_dim;
        let mut offset = FeatureKind::ALL.len() * 2 * d;
        let mut dense = Vec::new();
        let mut inputs = self.concat_width();
        for &outputs in self.hidden.iter().chain(std::iter::once(&1)) {
            let weights = offset;
            let bias = weights + outputs * inputs;
            dense.push(Dense { weights, bias, inputs, outputs });
            offset = bias + outputs;
            inputs = outputs;
        }
        Layout { dense, len: offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    weights: usize,
    bias: usize,
    inputs: usize,
    outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    dense: Vec<Dense>,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, batch_size: 30 }
    }
}

/// Flat gradient aligned with [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    params: Vec<f64>,
}

struct Trace {
    /// Input to each dense layer; `inputs[0]` is the concatenated embedding.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each dense layer.
    pre: Vec<Vec<f64>>,
    output: f64,
}

fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(spec: NetworkSpec) -> Self {
        let layout = spec.layout();
        let params = vec![0.0; layout.len];
        Self { spec, layout, params }
    }

    /// Xavier-uniform embeddings, He-uniform hidden layers, zero biases and a
    /// zero output layer. An untrained network therefore predicts exactly 0.5
    /// for every context instead of a sign fixed by the draw.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut net = Self::zeros(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = net.spec.embedding_dim;
        let emb_bound = (6.0 / (1.0 + d as f64)).sqrt();
        for k in 0..FeatureKind::ALL.len() {
            let w = k * 2 * d;
            for p in &mut net.params[w..w + d] {
                *p = rng.random_range(-emb_bound..emb_bound);
            }
        }
        let last = net.layout.dense.len() - 1;
        for layer in net.layout.dense[..last].to_vec() {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for p in &mut net.params[layer.weights..layer.bias] {
                *p = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Named parameter ranges: `embedding`, `hidden1`, `hidden2`, ..., `output`.
    pub fn parameter_blocks(&self) -> Vec<(String, Range<usize>)> {
        let first = self.layout.dense[0].weights;
        let last = self.layout.dense.len() - 1;
        let mut blocks = vec![("embedding".to_string(), 0..first)];
        for (i, layer) in self.layout.dense.iter().enumerate() {
            let name = if i == last { "output".to_string() } else { format!("hidden{}", i + 1) };
            blocks.push((name, layer.weights..layer.bias + layer.outputs));
        }
        blocks
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.spec.input_len() {
            return Err(NnError::InputShape { expected: self.spec.input_len(), actual: x.len() });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let d = self.spec.embedding_dim;
        let mut z0 = Vec::with_capacity(self.spec.concat_width());
        for (&value, kind) in x.iter().zip(&self.spec.input_kinds) {
            let w = kind.index() * 2 * d;
            let (weights, bias) = (&self.params[w..w + d], &self.params[w + d..w + 2 * d]);
            z0.extend(weights.iter().zip(bias).map(|(a, b)| a * value + b));
        }
        let last = self.layout.dense.len() - 1;
        let mut inputs = vec![z0];
        let mut pre = Vec::with_capacity(self.layout.dense.len());
        for (i, layer) in self.layout.dense.iter().enumerate() {
            let input = &inputs[i];
            let w = &self.params[layer.weights..layer.bias];
            let b = &self.params[layer.bias..layer.bias + layer.outputs];
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                    b[o] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>()
                })
                .collect();
            if i < last {
                inputs.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        let output = sigmoid(pre[last][0]);
        Trace { inputs, pre, output }
    }

    /// Predicted probability in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<f64, NnError> {
        self.check_input(x)?;
        Ok(self.trace(x).output)
    }

    /// Summed BCE over the batch and its exact gradient.
    pub fn backward(&self, batch: &[(&[f64], f64)]) -> Result<(f64, Gradients), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let d = self.spec.embedding_dim;
        for &(x, y) in batch {
            self.check_input(x)?;
            let t = self.trace(x);
            loss += bce_loss(&[t.output], &[y]);
            // Inside the clamp the logit derivative is g - y; outside the
            // clamped loss is flat.
            let g = t.output;
            let mut delta = if g > BCE_EPSILON && g < 1.0 - BCE_EPSILON { vec![g - y] } else { vec![0.0] };
            for (i, layer) in self.layout.dense.iter().enumerate().rev() {
                let input = &t.inputs[i];
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let row = layer.weights + o * layer.inputs;
                    for (gw, v) in grad[row..row + layer.inputs].iter_mut().zip(input) {
                        *gw += dz * v;
                    }
                    grad[layer.bias + o] += dz;
                }
                let w = &self.params[layer.weights..layer.bias];
                let mut upstream = vec![0.0; layer.inputs];
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                    for (u, a) in upstream.iter_mut().zip(row) {
                        *u += dz * a;
                    }
                }
                if i > 0 {
                    for (u, z) in upstream.iter_mut().zip(&t.pre[i - 1]) {
                        if *z <= 0.0 {
                            *u = 0.0;
                        }
                    }
                }
                delta = upstream;
            }
            // `delta` is now dL/dz0, the concatenated embedding.
            for (pos, (&value, kind)) in x.iter().zip(&self.spec.input_kinds).enumerate() {
                let w = kind.index() * 2 * d;
                let dz = &delta[pos * d..(pos + 1) * d];
                for j in 0..d {
                    grad[w + j] += dz[j] * value;
                    grad[w + d + j] += dz[j];
                }
            }
        }
        Ok((loss, Gradients(grad)))
    }

    pub fn sgd_step(&mut self, grad: &Gradients, learning_rate: f64) -> Result<(), NnError> {
        if grad.0.len() != self.params.len() {
            return Err(NnError::GradientShape { expected: self.params.len(), actual: grad.0.len() });
        }
        for (p, g) in self.params.iter_mut().zip(&grad.0) {
            *p -= learning_rate * g;
        }
        Ok(())
    }

    /// Versioned header, layer shapes, then little-endian f64 parameters.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.spec.fingerprint().to_le_bytes())?;
        w.write_all(&(self.spec.input_kinds.len() as u32).to_le_bytes())?;
        for k in &self.spec.input_kinds {
            w.write_all(&[k.index() as u8])?;
        }
        w.write_all(&(self.spec.embedding_dim as u32).to_le_bytes())?;
        w.write_all(&(self.spec.hidden.len() as u32).to_le_bytes())?;
        for h in &self.spec.hidden {
            w.write_all(&(*h as u32).to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, NnError> {
        fn u32_of<R: Read>(r: &mut R) -> Result<u32, NnError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(read_err)?;
            Ok(u32::from_le_bytes(b))
        }
        fn u64_of<R: Read>(r: &mut R) -> Result<u64, NnError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(read_err)?;
            Ok(u64::from_le_bytes(b))
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(read_err)?;
        if &magic != MAGIC {
            return Err(NnError::BadMagic);
        }
        let version = u32_of(&mut r)?;
        if version != VERSION {
            return Err(NnError::Version(version));
        }
        let fingerprint = u64_of(&mut r)?;
        let n_inputs = u32_of(&mut r)? as usize;
        let mut kinds = Vec::with_capacity(n_inputs.min(1 << 16));
        for _ in 0..n_inputs {
            let mut b = [0u8; 1];
            r.read_exact(&mut b).map_err(read_err)?;
            let kind = FeatureKind::from_index(b[0] as usize)
                .ok_or_else(|| NnError::ShapeMismatch(format!("unknown feature kind {}", b[0])))?;
            kinds.push(kind);
        }
        let embedding_dim = u32_of(&mut r)? as usize;
        let n_hidden = u32_of(&mut r)? as usize;
        let mut hidden = Vec::with_capacity(n_hidden.min(64));
        for _ in 0..n_hidden {
            hidden.push(u32_of(&mut r)? as usize);
        }
        let spec = NetworkSpec::new(kinds, embedding_dim, hidden);
        if spec.fingerprint() != fingerprint {
            return Err(NnError::ShapeMismatch("header fingerprint differs from shapes".into()));
        }
        let count = u64_of(&mut r)? as usize;
        let mut net = Self::zeros(spec);
        if count != net.params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{count} parameters stored, layout needs {}",
                net.params.len()
            )));
        }
        let mut buf = [0u8; 8];
        for p in net.params.iter_mut() {
            r.read_exact(&mut buf).map_err(read_err)?;
            *p = f64::from_le_bytes(buf);
        }
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.save(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// Summed binary cross-entropy with predictions clamped away from 0 and 1.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(labels)
        .map(|(&g, &y)| {
            let g = g.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(y * g.ln() + (1.0 - y) * (1.0 - g).ln())
        })
        .sum()
}

/// Hard decision from a probability; 0.5 rounds up.
pub fn round_prediction(p: f64) -> bool {
    p >= 0.5
}
