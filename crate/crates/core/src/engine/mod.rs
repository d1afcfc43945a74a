//! Graph-convolution inference over an [`OnScreenMesh`].
//!
//! Each layer gathers a node's own features and those of its six neighbours
//! into one row of `7 × width` values, applies a dense transform and an
//! activation. The last layer is followed by a softmax over classes.
//! Off-screen neighbours read the all-zero sentinel row.

pub mod io;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::OnScreenMesh;

/// Rows gathered per node: the node itself plus its six neighbours.
pub const GATHER_SIZE: usize = 7;

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("node {node} references neighbour {neighbor} beyond the sentinel {sentinel}; the mesh is corrupt")]
    CorruptIndex { node: usize, neighbor: usize, sentinel: usize },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("layer {layer} contains a non-finite weight or bias")]
    NonFinite { layer: usize },
    #[error("not a network file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported network file version {0}")]
    UnsupportedVersion(u32),
    #[error("network file is truncated")]
    Truncated,
    #[error("unknown activation code {0}")]
    UnknownActivation(u8),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for EngineError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            EngineError::Truncated
        } else {
            EngineError::Io(e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Selu,
    Elu,
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Selu => 0,
            Activation::Elu => 1,
            Activation::Relu => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, EngineError> {
        match code {
            0 => Ok(Activation::Selu),
            1 => Ok(Activation::Elu),
            2 => Ok(Activation::Relu),
            other => Err(EngineError::UnknownActivation(other)),
        }
    }

    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA as f32 * x
                } else {
                    (SELU_LAMBDA * SELU_ALPHA) as f32 * x.exp_m1()
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Per-node features plus a trailing all-zero sentinel row.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    nodes: usize,
    width: usize,
    data: Vec<f32>,
}

impl NodeFeatures {
    pub fn zeros(nodes: usize, width: usize) -> Self {
        NodeFeatures { nodes, width, data: vec![0.0; (nodes + 1) * width] }
    }

    /// Wraps `nodes × width` values and appends the sentinel row.
    pub fn from_rows(width: usize, mut data: Vec<f32>) -> Result<Self, EngineError> {
        if width == 0 || data.len() % width != 0 {
            return Err(EngineError::Shape(format!("{} values do not form rows of width {width}", data.len())));
        }
        let nodes = data.len() / width;
        data.resize(data.len() + width, 0.0);
        Ok(NodeFeatures { nodes, width, data })
    }

    fn from_matrix(mut m: Matrix) -> Self {
        let (nodes, width) = (m.rows, m.cols);
        m.data.resize((nodes + 1) * width, 0.0);
        NodeFeatures { nodes, width, data: m.data }
    }

    /// Visible nodes, excluding the sentinel.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        assert!(i < self.nodes, "the sentinel row is read-only");
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    /// All rows including the sentinel.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub in_width: usize,
    pub out_width: usize,
    /// `(7 · in_width) × out_width`, row-major. Input rows are ordered
    /// self, left, right, below ×2, above ×2.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerWeights {
    pub fn zeros(in_width: usize, out_width: usize) -> Self {
        LayerWeights {
            in_width,
            out_width,
            weights: vec![0.0; GATHER_SIZE * in_width * out_width],
            bias: vec![0.0; out_width],
        }
    }

    pub fn gathered_width(&self) -> usize {
        GATHER_SIZE * self.in_width
    }

    pub fn weight(&self, input: usize, output: usize) -> f32 {
        self.weights[input * self.out_width + output]
    }

    fn check(&self, layer: usize) -> Result<(), EngineError> {
        if self.in_width == 0 || self.out_width == 0 {
            return Err(EngineError::InvalidNetwork(format!("layer {layer} has a zero width")));
        }
        if self.weights.len() != self.gathered_width() * self.out_width || self.bias.len() != self.out_width {
            return Err(EngineError::InvalidNetwork(format!(
                "layer {layer} holds {} weights and {} biases for {}→{}",
                self.weights.len(),
                self.bias.len(),
                self.in_width,
                self.out_width
            )));
        }
        if !self.weights.iter().chain(&self.bias).all(|v| v.is_finite()) {
            return Err(EngineError::NonFinite { layer });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerWeights>,
    #[serde(default)]
    pub hidden_activation: Activation,
    pub output_classes: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.layers.is_empty() {
            return Err(EngineError::InvalidNetwork("no layers".into()));
        }
        if self.output_classes < 2 {
            return Err(EngineError::InvalidNetwork(format!("{} output classes", self.output_classes)));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check(i)?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_width != pair[1].in_width {
                return Err(EngineError::InvalidNetwork(format!(
                    "layer {i} outputs {} features but layer {} takes {}",
                    pair[0].out_width,
                    i + 1,
                    pair[1].in_width
                )));
            }
        }
        let last = self.layers.last().unwrap().out_width;
        if last != self.output_classes {
            return Err(EngineError::InvalidNetwork(format!(
                "last layer outputs {last} values for {} classes",
                self.output_classes
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_width)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths `[input, hidden.., classes]` for `depth` layers.
    pub fn widths(input: usize, hidden: usize, depth: usize, classes: usize) -> Vec<usize> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat(hidden).take(depth.saturating_sub(1)));
        widths.push(classes);
        widths
    }

    /// All-zero network: every node gets a uniform class distribution.
    pub fn zeros(widths: &[usize], hidden_activation: Activation) -> Self {
        let layers = widths.windows(2).map(|w| LayerWeights::zeros(w[0], w[1])).collect();
        NetworkSpec { layers, hidden_activation, output_classes: *widths.last().unwrap_or(&0) }
    }

    /// Random network with LeCun-normal weights (variance `1 / fan_in`) and
    /// small random biases.
    pub fn random(widths: &[usize], hidden_activation: Activation, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let fan_in = GATHER_SIZE * w[0];
                let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).unwrap();
                let weights = (0..fan_in * w[1]).map(|_| normal.sample(&mut rng) as f32).collect();
                let bias_dist = Normal::new(0.0, 0.1).unwrap();
                let bias = (0..w[1]).map(|_| bias_dist.sample(&mut rng) as f32).collect();
                LayerWeights { in_width: w[0], out_width: w[1], weights, bias }
            })
            .collect();
        NetworkSpec { layers, hidden_activation, output_classes: *widths.last().unwrap_or(&0) }
    }

    /// Default architecture: depth 9, width 4, SELU, ball / not-ball.
    pub fn default_architecture(input_width: usize, seed: u64) -> Self {
        NetworkSpec::random(&NetworkSpec::widths(input_width, 4, 9, 2), Activation::Selu, seed)
    }
}

/// Concatenates each node's features with those of its six neighbours.
pub fn gather(features: &NodeFeatures, onscreen: &OnScreenMesh) -> Result<Matrix, EngineError> {
    let nodes = onscreen.len();
    if features.nodes() != nodes {
        return Err(EngineError::Shape(format!(
            "{} feature rows (+ sentinel) for {nodes} visible nodes",
            features.nodes()
        )));
    }
    let width = features.width();
    let sentinel = onscreen.sentinel();
    let mut out = Matrix::zeros(nodes, GATHER_SIZE * width);
    for (i, (row, neighbors)) in out.data.chunks_exact_mut(GATHER_SIZE * width).zip(&onscreen.neighbors).enumerate() {
        row[..width].copy_from_slice(features.row(i));
        for (slot, &n) in neighbors.iter().enumerate() {
            if n > sentinel {
                return Err(EngineError::CorruptIndex { node: i, neighbor: n, sentinel });
            }
            let start = (slot + 1) * width;
            row[start..start + width].copy_from_slice(features.row(n));
        }
    }
    Ok(out)
}

fn affine(input: &Matrix, layer: &LayerWeights) -> Result<Matrix, EngineError> {
    if input.cols != layer.gathered_width() {
        return Err(EngineError::Shape(format!(
            "input has {} columns, layer expects {}",
            input.cols,
            layer.gathered_width()
        )));
    }
    let out_width = layer.out_width;
    let mut out = Matrix::zeros(input.rows, out_width);
    // Sums run in f64; storage stays f32.
    let mut acc = vec![0.0f64; out_width];
    for (x, y) in input.data.chunks_exact(input.cols).zip(out.data.chunks_exact_mut(out_width)) {
        for (a, &b) in acc.iter_mut().zip(&layer.bias) {
            *a = f64::from(b);
        }
        for (&v, w) in x.iter().zip(layer.weights.chunks_exact(out_width)) {
            let v = f64::from(v);
            for (a, &wv) in acc.iter_mut().zip(w) {
                *a += v * f64::from(wv);
            }
        }
        for (o, &a) in y.iter_mut().zip(&acc) {
            *o = a as f32;
        }
    }
    Ok(out)
}

fn check_indices(onscreen: &OnScreenMesh) -> Result<(), EngineError> {
    let sentinel = onscreen.sentinel();
    for (node, neighbors) in onscreen.neighbors.iter().enumerate() {
        if let Some(&neighbor) = neighbors.iter().find(|&&n| n > sentinel) {
            return Err(EngineError::CorruptIndex { node, neighbor, sentinel });
        }
    }
    Ok(())
}

/// [`gather`] followed by [`dense_activate`] without building the gathered
/// matrix. Same arithmetic in the same order as the two-step path.
/// Indices must already be checked and widths must match.
fn gather_affine(
    features: &NodeFeatures,
    onscreen: &OnScreenMesh,
    layer: &LayerWeights,
    activation: Option<Activation>,
) -> Matrix {
    // Fixed output widths keep the accumulators in registers.
    match layer.out_width {
        1 => gather_affine_fixed::<1>(features, onscreen, layer, activation),
        2 => gather_affine_fixed::<2>(features, onscreen, layer, activation),
        3 => gather_affine_fixed::<3>(features, onscreen, layer, activation),
        4 => gather_affine_fixed::<4>(features, onscreen, layer, activation),
        8 => gather_affine_fixed::<8>(features, onscreen, layer, activation),
        _ => gather_affine_any(features, onscreen, layer, activation),
    }
}

fn finish(a: f64, activation: Option<Activation>) -> f32 {
    match activation {
        Some(act) => act.apply(a as f32),
        None => a as f32,
    }
}

fn gather_affine_fixed<const N: usize>(
    features: &NodeFeatures,
    onscreen: &OnScreenMesh,
    layer: &LayerWeights,
    activation: Option<Activation>,
) -> Matrix {
    let width = features.width();
    let mut out = Matrix::zeros(onscreen.len(), N);
    let bias: [f64; N] = std::array::from_fn(|o| f64::from(layer.bias[o]));
    for (i, (y, neighbors)) in out.data.chunks_exact_mut(N).zip(&onscreen.neighbors).enumerate() {
        let mut acc = bias;
        let sources = std::iter::once(i).chain(neighbors.iter().copied());
        for (source, weights) in sources.zip(layer.weights.chunks_exact(width * N)) {
            for (&v, w) in features.row(source).iter().zip(weights.chunks_exact(N)) {
                let v = f64::from(v);
                for o in 0..N {
                    acc[o] += v * f64::from(w[o]);
                }
            }
        }
        for o in 0..N {
            y[o] = finish(acc[o], activation);
        }
    }
    out
}

fn gather_affine_any(
    features: &NodeFeatures,
    onscreen: &OnScreenMesh,
    layer: &LayerWeights,
    activation: Option<Activation>,
) -> Matrix {
    let width = features.width();
    let out_width = layer.out_width;
    let mut out = Matrix::zeros(onscreen.len(), out_width);
    let mut acc = vec![0.0f64; out_width];
    for (i, (y, neighbors)) in out.data.chunks_exact_mut(out_width).zip(&onscreen.neighbors).enumerate() {
        for (a, &b) in acc.iter_mut().zip(&layer.bias) {
            *a = f64::from(b);
        }
        let sources = std::iter::once(i).chain(neighbors.iter().copied());
        for (source, weights) in sources.zip(layer.weights.chunks_exact(width * out_width)) {
            for (&v, w) in features.row(source).iter().zip(weights.chunks_exact(out_width)) {
                let v = f64::from(v);
                for (a, &wv) in acc.iter_mut().zip(w) {
                    *a += v * f64::from(wv);
                }
            }
        }
        for (o, &a) in y.iter_mut().zip(&acc) {
            *o = finish(a, activation);
        }
    }
    out
}

/// `activation(input · weights + bias)`.
pub fn dense_activate(input: &Matrix, layer: &LayerWeights, activation: Activation) -> Result<Matrix, EngineError> {
    let mut out = affine(input, layer)?;
    for v in &mut out.data {
        *v = activation.apply(*v);
    }
    Ok(out)
}

/// Class probabilities, one row per visible node.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub classes: usize,
    pub data: Vec<f64>,
}

impl Probabilities {
    pub fn len(&self) -> usize {
        self.data.len() / self.classes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }
}

fn softmax_rows(logits: &Matrix) -> Probabilities {
    let mut data = Vec::with_capacity(logits.data.len());
    for row in logits.data.chunks_exact(logits.cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
        let start = data.len();
        data.extend(row.iter().map(|&v| (f64::from(v) - max).exp()));
        let sum: f64 = data[start..].iter().sum();
        for p in &mut data[start..] {
            *p /= sum;
        }
    }
    Probabilities { classes: logits.cols, data }
}

/// Runs every layer over the visible mesh.
pub fn forward(network: &NetworkSpec, onscreen: &OnScreenMesh, input: &NodeFeatures) -> Result<Probabilities, EngineError> {
    network.validate()?;
    if input.width() != network.input_width() {
        return Err(EngineError::Shape(format!(
            "input width {} but the network takes {}",
            input.width(),
            network.input_width()
        )));
    }
    if input.nodes() != onscreen.len() {
        return Err(EngineError::Shape(format!(
            "{} feature rows (+ sentinel) for {} visible nodes",
            input.nodes(),
            onscreen.len()
        )));
    }
    if onscreen.is_empty() {
        return Ok(Probabilities { classes: network.output_classes, data: Vec::new() });
    }

    check_indices(onscreen)?;
    let (last, hidden) = network.layers.split_last().unwrap();
    let mut features = None;
    for layer in hidden {
        let out = gather_affine(features.as_ref().unwrap_or(input), onscreen, layer, Some(network.hidden_activation));
        features = Some(NodeFeatures::from_matrix(out));
    }
    Ok(softmax_rows(&gather_affine(features.as_ref().unwrap_or(input), onscreen, last, None)))
}
