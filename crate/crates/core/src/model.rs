//! End-to-end model assembly: encoder → L message-passing layers →
//! permutation-invariant readout → two-layer MLP decoder.
//!
//! [`ModelConfig`] is the single source of truth for shapes; every
//! parameter block is derived from it, drawn from one seeded stream in
//! declaration order, and walked in that same order by `visit`,
//! `visit_mut`, and the checkpoint writer. Regression heads emit raw
//! reals, multilabel heads emit logits — the task only fixes the output
//! width, activations live in the losses.
//!
//! Checkpoints are a pair of files: a JSON manifest (config plus the
//! named block shapes) and a flat little-endian `f64` array holding
//! every block's entries back to back.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::{
    self, embed_dim, EncoderError, EncoderKind, EncoderParams, EncoderVars, JointEncoder,
    JointVars,
};
use crate::encoding::EncodingMatrix;
use crate::graph::Graph;
use crate::linalg::DMat;
use crate::mpnn::{
    self, uniform_mat, LayerKind, LayerParams, LayerVars, MpnnError, ProjectionVars, Regime,
};
use crate::tensor::{Tape, TensorError, Var};

/// Prediction target family; the dimension is the decoder output width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression { dim: usize },
    Multilabel { dim: usize },
}

impl Task {
    pub fn dim(&self) -> usize {
        match *self {
            Task::Regression { dim } | Task::Multilabel { dim } => dim,
        }
    }
}

/// Graph-level pooling over final node states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Sum,
    Mean,
    Max,
}

impl std::fmt::Display for Readout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Readout::Sum => "sum",
            Readout::Mean => "mean",
            Readout::Max => "max",
        })
    }
}

impl std::str::FromStr for Readout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sum" => Ok(Readout::Sum),
            "mean" => Ok(Readout::Mean),
            "max" => Ok(Readout::Max),
            other => Err(format!("unknown readout '{other}' (sum | mean | max)")),
        }
    }
}

/// Everything needed to rebuild a model's shapes and initial weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    /// Joint projection after fusion; depth 1 is linear, 2 a relu MLP.
    pub joint: bool,
    #[serde(default = "default_mlp_depth")]
    pub mlp_depth: usize,
    pub d_in: usize,
    /// Structural-encoding width consumed by the encoder.
    pub k: usize,
    pub d_hidden: usize,
    pub layer: LayerKind,
    pub regime: Regime,
    /// Number of message-passing layers; 0 exactly when regime is none.
    pub layers: usize,
    #[serde(default)]
    pub epsilon: f64,
    pub decoder_hidden: usize,
    #[serde(default)]
    pub readout: Readout,
    pub task: Task,
    pub seed: u64,
}

fn default_mlp_depth() -> usize {
    1
}

/// Why a configuration or a forward input was rejected.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Mpnn(#[from] MpnnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{0} must be positive")]
    ZeroDim(&'static str),
    #[error("regime none requires layers == 0, got {0}")]
    LayersUnderNone(usize),
    #[error("regime {0} requires layers >= 1")]
    LayerlessStack(Regime),
    #[error("joint mlp_depth must be 1 or 2, got {0}")]
    BadJointDepth(usize),
    #[error("model needs at least one node, got an empty graph")]
    EmptyGraph,
    #[error("encoding has {got} rows but the graph has {want} nodes")]
    EncodingRows { got: usize, want: usize },
    #[error("encoding width {got} does not match configured k = {want}")]
    EncodingWidth { got: usize, want: usize },
    #[error("feature width {got} does not match configured d_in = {want}")]
    FeatureWidth { got: usize, want: usize },
}

impl ModelConfig {
    pub fn out_dim(&self) -> usize {
        self.task.dim()
    }

    /// Checks dimension admissibility and the layer/regime contract.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("d_in", self.d_in),
            ("k", self.k),
            ("d_hidden", self.d_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("task dim", self.task.dim()),
        ] {
            if v == 0 {
                return Err(ModelError::ZeroDim(name));
            }
        }
        embed_dim(self.encoder, self.d_hidden)?;
        if self.joint && !(self.mlp_depth == 1 || self.mlp_depth == 2) {
            return Err(ModelError::BadJointDepth(self.mlp_depth));
        }
        match self.regime {
            Regime::None => {
                if self.layers != 0 {
                    return Err(ModelError::LayersUnderNone(self.layers));
                }
            }
            Regime::Full | Regime::Sparse { .. } => {
                if self.layers == 0 {
                    return Err(ModelError::LayerlessStack(self.regime));
                }
                if let Regime::Sparse { k } = self.regime {
                    if k == 0 {
                        return Err(MpnnError::ZeroFactors.into());
                    }
                    if crate::tensor::perfect_sqrt(self.d_hidden).is_none() {
                        return Err(MpnnError::NotSquareHidden(self.d_hidden).into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Two-layer MLP head: `out = W₂·relu(W₁·pooled + b₁) + b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub w1: DMat,
    pub b1: DMat,
    pub w2: DMat,
    pub b2: DMat,
}

/// Tape handles for [`DecoderParams`].
pub struct DecoderVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// All trainable state plus the config that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub layers: Vec<LayerParams>,
    pub decoder: DecoderParams,
}

/// Tape handles for one forward pass over [`ModelParams`].
pub struct ModelVars {
    pub encoder: EncoderVars,
    pub layers: Vec<LayerVars>,
    pub decoder: DecoderVars,
}

/// Draws fresh parameters for a valid config. Weights are
/// `uniform(±1/√fan_in)` — except sparse factors, which use their own
/// per-factor bound — drawn from one stream in declaration order;
/// biases start at zero and consume no draws.
pub fn init_model(cfg: &ModelConfig) -> Result<ModelParams, ModelError> {
    cfg.validate()?;
    let mut rng = crate::rng::stream(cfg.seed, "model-init");
    let emb = embed_dim(cfg.encoder, cfg.d_hidden)?;

    let w_h = uniform_mat(&mut rng, emb, cfg.d_in, 1.0 / (cfg.d_in as f64).sqrt());
    let w_p = uniform_mat(&mut rng, emb, cfg.k, 1.0 / (cfg.k as f64).sqrt());
    let hidden_bound = 1.0 / (cfg.d_hidden as f64).sqrt();
    let joint = if !cfg.joint {
        JointEncoder::Disabled
    } else if cfg.mlp_depth == 1 {
        JointEncoder::Linear {
            w: uniform_mat(&mut rng, cfg.d_hidden, cfg.d_hidden, hidden_bound),
        }
    } else {
        JointEncoder::Mlp {
            w1: uniform_mat(&mut rng, cfg.d_hidden, cfg.d_hidden, hidden_bound),
            w2: uniform_mat(&mut rng, cfg.d_hidden, cfg.d_hidden, hidden_bound),
        }
    };
    let encoder = EncoderParams { kind: cfg.encoder, w_h, w_p, joint };

    let layers = (0..cfg.layers)
        .map(|_| LayerParams::init(cfg.layer, cfg.regime, cfg.d_hidden, cfg.epsilon, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;

    let out = cfg.out_dim();
    let decoder = DecoderParams {
        w1: uniform_mat(&mut rng, cfg.decoder_hidden, cfg.d_hidden, hidden_bound),
        b1: DMat::zeros(1, cfg.decoder_hidden),
        w2: uniform_mat(&mut rng, out, cfg.decoder_hidden, 1.0 / (cfg.decoder_hidden as f64).sqrt()),
        b2: DMat::zeros(1, out),
    };

    Ok(ModelParams { config: cfg.clone(), encoder, layers, decoder })
}

impl ModelParams {
    /// Registers every block on the tape, in `visit` order.
    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoder: self.encoder.bind(tape),
            layers: self.layers.iter().map(|l| l.bind(tape)).collect(),
            decoder: DecoderVars {
                w1: tape.leaf(self.decoder.w1.clone()),
                b1: tape.leaf(self.decoder.b1.clone()),
                w2: tape.leaf(self.decoder.w2.clone()),
                b2: tape.leaf(self.decoder.b2.clone()),
            },
        }
    }

    /// Walks every block in the fixed declaration order: encoder,
    /// layers 0..L, decoder.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a DMat)) {
        self.encoder.visit(&mut |name, m| f(name.to_string(), m));
        for (i, layer) in self.layers.iter().enumerate() {
            layer.visit(&format!("layer{i}"), f);
        }
        f("decoder.w1".to_string(), &self.decoder.w1);
        f("decoder.b1".to_string(), &self.decoder.b1);
        f("decoder.w2".to_string(), &self.decoder.w2);
        f("decoder.b2".to_string(), &self.decoder.b2);
    }

    /// Mutable twin of [`ModelParams::visit`], same order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut DMat)) {
        self.encoder.visit_mut(&mut |name, m| f(name.to_string(), m));
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&format!("layer{i}"), f);
        }
        f("decoder.w1".to_string(), &mut self.decoder.w1);
        f("decoder.b1".to_string(), &mut self.decoder.b1);
        f("decoder.w2".to_string(), &mut self.decoder.w2);
        f("decoder.b2".to_string(), &mut self.decoder.b2);
    }

    /// Total scalar parameters.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, m| n += m.numel());
        n
    }

    /// Checks one graph + encoding pair against the configured widths.
    pub fn check_inputs(&self, g: &Graph, enc: &EncodingMatrix) -> Result<(), ModelError> {
        if g.num_nodes == 0 {
            return Err(ModelError::EmptyGraph);
        }
        if g.feature_dim() != self.config.d_in {
            return Err(ModelError::FeatureWidth {
                got: g.feature_dim(),
                want: self.config.d_in,
            });
        }
        if enc.rows.rows() != g.num_nodes {
            return Err(ModelError::EncodingRows { got: enc.rows.rows(), want: g.num_nodes });
        }
        if enc.rows.cols() != self.config.k {
            return Err(ModelError::EncodingWidth { got: enc.rows.cols(), want: self.config.k });
        }
        Ok(())
    }
}

impl ModelVars {
    /// Trainable blocks in `visit` order, for pairing gradients with
    /// parameters by index.
    pub fn param_vars(&self) -> Vec<Var> {
        fn push_projection(out: &mut Vec<Var>, p: &ProjectionVars) {
            match p {
                ProjectionVars::Full(w) => out.push(*w),
                ProjectionVars::Sparse { ws, qs } => {
                    for (w, q) in ws.iter().zip(qs) {
                        out.push(*w);
                        out.push(*q);
                    }
                }
            }
        }

        let mut out = vec![self.encoder.w_h, self.encoder.w_p];
        match &self.encoder.joint {
            JointVars::Disabled => {}
            JointVars::Linear(w) => out.push(*w),
            JointVars::Mlp(w1, w2) => out.extend([*w1, *w2]),
        }
        for layer in &self.layers {
            push_projection(&mut out, &layer.proj);
            if let Some(p) = &layer.neighbor_proj {
                push_projection(&mut out, p);
            }
        }
        out.extend([self.decoder.w1, self.decoder.b1, self.decoder.w2, self.decoder.b2]);
        out
    }
}

/// Runs the full pipeline on an existing tape and returns the `1 × out`
/// prediction node. Readout sums (or averages / maxes) node states in
/// node-index order.
pub fn forward_on_tape(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &ModelVars,
    g: &Graph,
    enc: &EncodingMatrix,
) -> Result<Var, ModelError> {
    params.check_inputs(g, enc)?;
    let features = tape.leaf(g.feature_matrix());
    let encv = tape.leaf(enc.rows.clone());
    let mut h = encoder::encode(tape, &vars.encoder, features, encv)?;
    let adj = g.adjacency();
    for layer in &vars.layers {
        h = mpnn::layer_forward(tape, layer, h, &adj)?;
    }
    let pooled = match params.config.readout {
        Readout::Sum => tape.sum_rows(h),
        Readout::Mean => tape.mean_rows(h)?,
        Readout::Max => tape.max_rows(h)?,
    };
    let h1 = tape.matmul_nt(pooled, vars.decoder.w1)?;
    let h1 = tape.add_row_bias(h1, vars.decoder.b1)?;
    let h1 = tape.relu(h1);
    let out = tape.matmul_nt(h1, vars.decoder.w2)?;
    Ok(tape.add_row_bias(out, vars.decoder.b2)?)
}

/// Evaluates the model on one graph, returning the `1 × out` prediction.
pub fn forward(params: &ModelParams, g: &Graph, enc: &EncodingMatrix) -> Result<DMat, ModelError> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let out = forward_on_tape(&mut tape, params, &vars, g, enc)?;
    Ok(tape.value(out).clone())
}

/// Exact scalar-parameter count from the config alone; always agrees
/// with `init_model(cfg).param_count()`.
pub fn model_param_count(cfg: &ModelConfig) -> Result<usize, ModelError> {
    cfg.validate()?;
    let emb = embed_dim(cfg.encoder, cfg.d_hidden)?;
    let joint = if !cfg.joint { 0 } else { cfg.mlp_depth * cfg.d_hidden * cfg.d_hidden };
    let encoder = emb * cfg.d_in + emb * cfg.k + joint;

    let projection = match cfg.regime {
        Regime::Full => cfg.d_hidden * cfg.d_hidden,
        Regime::Sparse { k } => 2 * k * cfg.d_hidden,
        Regime::None => 0,
    };
    let per_layer = match cfg.layer {
        LayerKind::Sage => 2 * projection,
        LayerKind::Gcn | LayerKind::Gin => projection,
    };

    let out = cfg.out_dim();
    let decoder = cfg.decoder_hidden * cfg.d_hidden
        + cfg.decoder_hidden
        + out * cfg.decoder_hidden
        + out;

    Ok(encoder + cfg.layers * per_layer + decoder)
}

/// Why a checkpoint failed to read or write.
#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("manifest block {index} is {found}, parameters expect {expected}")]
    BlockMismatch { index: usize, expected: String, found: String },
    #[error("manifest lists {found} blocks, parameters have {expected}")]
    BlockCount { expected: usize, found: usize },
    #[error("binary payload holds {found} floats, parameters need {expected}")]
    PayloadSize { expected: usize, found: usize },
    #[error("binary payload length {0} is not a multiple of 8")]
    RaggedPayload(usize),
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    blocks: Vec<BlockShape>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct BlockShape {
    name: String,
    rows: usize,
    cols: usize,
}

fn block_shapes(params: &ModelParams) -> Vec<BlockShape> {
    let mut blocks = Vec::new();
    params.visit(&mut |name, m| {
        blocks.push(BlockShape { name, rows: m.rows(), cols: m.cols() });
    });
    blocks
}

fn checkpoint_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (prefix.with_extension("json"), prefix.with_extension("bin"))
}

/// Writes `<prefix>.json` (manifest) and `<prefix>.bin` (flat
/// little-endian `f64` array, blocks in declaration order).
pub fn save_checkpoint(params: &ModelParams, prefix: &Path) -> Result<(), CheckpointError> {
    let (json_path, bin_path) = checkpoint_paths(prefix);
    let manifest = Manifest { config: params.config.clone(), blocks: block_shapes(params) };
    std::fs::write(&json_path, serde_json::to_vec_pretty(&manifest)?)?;

    let mut bin = std::io::BufWriter::new(std::fs::File::create(&bin_path)?);
    let mut write_err = None;
    params.visit(&mut |_, m| {
        if write_err.is_some() {
            return;
        }
        for &x in m.data() {
            if let Err(e) = bin.write_all(&x.to_le_bytes()) {
                write_err = Some(e);
                return;
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    bin.flush()?;
    Ok(())
}

/// Reads the manifest + binary pair back into [`ModelParams`],
/// verifying the block list and payload size against the config.
pub fn load_checkpoint(prefix: &Path) -> Result<ModelParams, CheckpointError> {
    let (json_path, bin_path) = checkpoint_paths(prefix);
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&json_path)?)?;
    let mut params = init_model(&manifest.config)?;

    let expected = block_shapes(&params);
    if manifest.blocks.len() != expected.len() {
        return Err(CheckpointError::BlockCount {
            expected: expected.len(),
            found: manifest.blocks.len(),
        });
    }
    for (index, (want, got)) in expected.iter().zip(&manifest.blocks).enumerate() {
        if want != got {
            return Err(CheckpointError::BlockMismatch {
                index,
                expected: format!("{} ({} × {})", want.name, want.rows, want.cols),
                found: format!("{} ({} × {})", got.name, got.rows, got.cols),
            });
        }
    }

    let bytes = std::fs::read(&bin_path)?;
    if bytes.len() % 8 != 0 {
        return Err(CheckpointError::RaggedPayload(bytes.len()));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let total = params.param_count();
    if floats.len() != total {
        return Err(CheckpointError::PayloadSize { expected: total, found: floats.len() });
    }

    let mut offset = 0;
    params.visit_mut(&mut |_, m| {
        let n = m.numel();
        m.data_mut().copy_from_slice(&floats[offset..offset + n]);
        offset += n;
    });
    Ok(params)
}
