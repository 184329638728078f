//! Full-batch Adam training with plateau learning-rate halving, tape
//! losses, and run reporting.
//!
//! One epoch builds a private tape per training graph — in parallel
//! when enabled — then folds the per-graph gradients in index order and
//! applies one blockwise Adam step, so trajectories are bit-identical
//! across execution modes and thread counts. The scheduler halves the
//! learning rate after `patience` epochs without strict improvement of
//! the monitored metric and stops the run once the rate falls below the
//! floor.
//!
//! Losses are mean absolute error for regression and per-label binary
//! cross-entropy on logits for multilabel; the reported metrics are MAE
//! (lower is better) and average precision (higher is better).

use std::ops::Range;
use std::time::Instant;

use crate::dataset::Splits;
use crate::encoder::EncoderKind;
use crate::encoding::EncodingMatrix;
use crate::graph::Graph;
use crate::linalg::DMat;
use crate::metrics::{self, MetricError};
use crate::model::{
    self, forward_on_tape, init_model, ModelConfig, ModelError, ModelParams, Task,
};
use crate::mpnn::{LayerKind, Regime};
use crate::parallel::{map_collect, ExecMode};
use crate::tensor::{Tape, TensorError, Var};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_PATIENCE: usize = 25;
pub const DEFAULT_FACTOR: f64 = 0.5;
pub const DEFAULT_LR_FLOOR: f64 = 1e-5;

/// Why a training run failed.
#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("gradient for block {block} is not finite")]
    NonFiniteGradient { block: String },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("{graphs} graphs but {encodings} encodings")]
    LengthMismatch { graphs: usize, encodings: usize },
    #[error("split end {end} exceeds dataset size {len}")]
    SplitOutOfRange { end: usize, len: usize },
    #[error("graph {index} has a {got}-entry target, task expects {want}")]
    TargetWidth { index: usize, got: usize, want: usize },
}

/// Which split the scheduler watches for improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Monitor {
    #[default]
    Validation,
    Train,
}

impl std::fmt::Display for Monitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Monitor::Validation => "validation",
            Monitor::Train => "train",
        })
    }
}

impl std::str::FromStr for Monitor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "validation" => Ok(Monitor::Validation),
            "train" => Ok(Monitor::Train),
            other => Err(format!("unknown monitor '{other}' (validation | train)")),
        }
    }
}

/// Whether smaller or larger metric values count as improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    /// MAE falls, AP rises.
    pub fn for_task(task: Task) -> Direction {
        match task {
            Task::Regression { .. } => Direction::Down,
            Task::Multilabel { .. } => Direction::Up,
        }
    }
}

/// Knobs for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub floor: f64,
    pub max_epochs: usize,
    pub monitor: Monitor,
    pub exec: ExecMode,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lr: DEFAULT_LR,
            patience: DEFAULT_PATIENCE,
            factor: DEFAULT_FACTOR,
            floor: DEFAULT_LR_FLOOR,
            max_epochs: 1000,
            monitor: Monitor::default(),
            exec: ExecMode::default(),
        }
    }
}

/// Optimizer and scheduler state carried across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Adam steps taken so far.
    pub step: usize,
    pub lr: f64,
    /// First-moment estimates, one per parameter block in visit order.
    pub m: Vec<DMat>,
    /// Second-moment estimates, aligned with `m`.
    pub v: Vec<DMat>,
    /// Best monitored metric seen; `None` before the first epoch.
    pub best_metric: Option<f64>,
    pub epochs_since_improve: usize,
    /// Per-epoch `(train metric, monitored metric)`.
    pub history: Vec<(f64, f64)>,
}

impl TrainState {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        let mut m = Vec::new();
        params.visit(&mut |_, b| m.push(DMat::zeros(b.rows(), b.cols())));
        TrainState {
            step: 0,
            lr,
            v: m.clone(),
            m,
            best_metric: None,
            epochs_since_improve: 0,
            history: Vec::new(),
        }
    }
}

/// One Adam update of a single block with bias correction.
pub fn adam_update(theta: &mut DMat, m: &mut DMat, v: &mut DMat, g: &DMat, lr: f64, step: usize) {
    let bc1 = 1.0 - BETA1.powi(step as i32);
    let bc2 = 1.0 - BETA2.powi(step as i32);
    let it = theta.data_mut().iter_mut().zip(m.data_mut()).zip(v.data_mut()).zip(g.data());
    for (((t, m), v), &g) in it {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *t -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
}

/// One optimizer step over every block, gradients in visit order.
pub fn adam_step(
    params: &mut ModelParams,
    state: &mut TrainState,
    grads: &[DMat],
) -> Result<(), TrainError> {
    assert_eq!(grads.len(), state.m.len(), "gradient blocks out of step with optimizer state");
    let mut bad = None;
    let mut idx = 0;
    params.visit(&mut |name, _| {
        if bad.is_none() && grads[idx].data().iter().any(|x| !x.is_finite()) {
            bad = Some(name);
        }
        idx += 1;
    });
    if let Some(block) = bad {
        return Err(TrainError::NonFiniteGradient { block });
    }

    state.step += 1;
    let (step, lr) = (state.step, state.lr);
    let (ms, vs) = (&mut state.m, &mut state.v);
    let mut idx = 0;
    params.visit_mut(&mut |_, theta| {
        adam_update(theta, &mut ms[idx], &mut vs[idx], &grads[idx], lr, step);
        idx += 1;
    });
    Ok(())
}

/// Plateau rule: strict improvement resets the counter; `patience`
/// non-improving epochs halve the rate; returns the stop flag once the
/// rate falls below `floor`.
pub fn plateau_scheduler(
    state: &mut TrainState,
    metric: f64,
    direction: Direction,
    patience: usize,
    factor: f64,
    floor: f64,
) -> bool {
    let improved = match state.best_metric {
        None => true,
        Some(best) => match direction {
            Direction::Down => metric < best,
            Direction::Up => metric > best,
        },
    };
    if improved {
        state.best_metric = Some(metric);
        state.epochs_since_improve = 0;
        return false;
    }
    state.epochs_since_improve += 1;
    if state.epochs_since_improve >= patience {
        state.lr *= factor;
        state.epochs_since_improve = 0;
        if state.lr < floor {
            return true;
        }
    }
    false
}

/// Builds the task loss on the tape: mean over the label dimension of
/// `|ŷ − y|` (regression) or `softplus(ŷ) − y·ŷ` (multilabel logits).
pub fn tape_loss(
    tape: &mut Tape,
    pred: Var,
    target: Var,
    task: Task,
) -> Result<Var, TensorError> {
    let total = match task {
        Task::Regression { .. } => {
            let diff = tape.sub(pred, target)?;
            let abs = tape.abs(diff);
            tape.sum_all(abs)
        }
        Task::Multilabel { .. } => {
            let sp = tape.softplus(pred);
            let tx = tape.mul(target, pred)?;
            let diff = tape.sub(sp, tx)?;
            tape.sum_all(diff)
        }
    };
    Ok(tape.scale(total, 1.0 / pred.cols() as f64))
}

/// A dataset with its aligned encodings and split boundaries.
#[derive(Debug, Clone)]
pub struct TrainData<'a> {
    pub graphs: &'a [Graph],
    pub encodings: &'a [EncodingMatrix],
    pub splits: Splits,
}

impl TrainData<'_> {
    fn check(&self) -> Result<(), TrainError> {
        if self.graphs.len() != self.encodings.len() {
            return Err(TrainError::LengthMismatch {
                graphs: self.graphs.len(),
                encodings: self.encodings.len(),
            });
        }
        let len = self.graphs.len();
        for r in [&self.splits.train, &self.splits.val, &self.splits.test] {
            if r.end > len {
                return Err(TrainError::SplitOutOfRange { end: r.end, len });
            }
        }
        if self.splits.train.is_empty() {
            return Err(TrainError::EmptySplit("train"));
        }
        Ok(())
    }
}

fn target_row(g: &Graph, index: usize, want: usize) -> Result<DMat, TrainError> {
    if g.target.len() != want {
        return Err(TrainError::TargetWidth { index, got: g.target.len(), want });
    }
    Ok(DMat::from_vec(1, want, g.target.clone()))
}

/// Mean loss and its gradient over a split: one tape per graph, grads
/// folded in index order, both scaled by `1 / batch`.
pub fn batch_gradient(
    params: &ModelParams,
    data: &TrainData,
    range: &Range<usize>,
    exec: ExecMode,
) -> Result<(f64, Vec<DMat>), TrainError> {
    let indices: Vec<usize> = range.clone().collect();
    let task = params.config.task;
    let out_dim = params.config.out_dim();
    let per_graph = map_collect(exec, &indices, |&i| -> Result<(f64, Vec<DMat>), TrainError> {
        let g = &data.graphs[i];
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let pred = forward_on_tape(&mut tape, params, &vars, g, &data.encodings[i])?;
        let target = target_row(g, i, out_dim)?;
        let target = tape.leaf(target);
        let loss = tape_loss(&mut tape, pred, target, task)?;
        tape.backward(loss)?;
        let value = tape.value(loss)[(0, 0)];
        let grads = vars.param_vars().iter().map(|v| tape.grad(*v).clone()).collect();
        Ok((value, grads))
    });

    let scale = 1.0 / indices.len() as f64;
    let mut total = 0.0;
    let mut summed: Option<Vec<DMat>> = None;
    for result in per_graph {
        let (value, grads) = result?;
        total += value;
        match &mut summed {
            None => summed = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g);
                }
            }
        }
    }
    let mut grads = summed.expect("nonempty batch");
    for g in &mut grads {
        for x in g.data_mut() {
            *x *= scale;
        }
    }
    Ok((total * scale, grads))
}

/// Stacked predictions and targets for a split, both `batch × out`.
pub fn split_outputs(
    params: &ModelParams,
    data: &TrainData,
    range: &Range<usize>,
    exec: ExecMode,
) -> Result<(DMat, DMat), TrainError> {
    let indices: Vec<usize> = range.clone().collect();
    let out_dim = params.config.out_dim();
    let rows = map_collect(exec, &indices, |&i| -> Result<(DMat, DMat), TrainError> {
        let pred = model::forward(params, &data.graphs[i], &data.encodings[i])?;
        Ok((pred, target_row(&data.graphs[i], i, out_dim)?))
    });
    let mut preds = DMat::zeros(indices.len(), out_dim);
    let mut targets = DMat::zeros(indices.len(), out_dim);
    for (row, result) in rows.into_iter().enumerate() {
        let (p, t) = result?;
        preds.row_mut(row).copy_from_slice(p.row(0));
        targets.row_mut(row).copy_from_slice(t.row(0));
    }
    Ok((preds, targets))
}

/// Task metric on one split: MAE for regression, mean AP for
/// multilabel.
pub fn split_metric(
    params: &ModelParams,
    data: &TrainData,
    range: &Range<usize>,
    exec: ExecMode,
) -> Result<f64, TrainError> {
    let (preds, targets) = split_outputs(params, data, range, exec)?;
    match params.config.task {
        Task::Regression { .. } => Ok(metrics::mae(&preds, &targets)?),
        Task::Multilabel { .. } => Ok(metrics::metric_ap(&preds, &targets)?.mean),
    }
}

/// A finished run: trained weights, optimizer state, and headline
/// metrics.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub state: TrainState,
    pub train_metric: f64,
    /// `None` when the test split is empty.
    pub test_metric: Option<f64>,
    pub epochs: usize,
    pub wall_time_s: f64,
}

/// Trains from the given starting parameters until the scheduler stops
/// the run or `max_epochs` is reached.
pub fn train_from(
    mut params: ModelParams,
    data: &TrainData,
    opts: &TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    let started = Instant::now();
    data.check()?;
    if opts.monitor == Monitor::Validation && data.splits.val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let direction = Direction::for_task(params.config.task);
    let mut state = TrainState::new(&params, opts.lr);

    let mut epochs = 0;
    for epoch in 1..=opts.max_epochs {
        let (loss, grads) = batch_gradient(&params, data, &data.splits.train, opts.exec)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        adam_step(&mut params, &mut state, &grads)?;

        let train_metric = split_metric(&params, data, &data.splits.train, opts.exec)?;
        let monitor_metric = match opts.monitor {
            Monitor::Train => train_metric,
            Monitor::Validation => {
                split_metric(&params, data, &data.splits.val, opts.exec)?
            }
        };
        state.history.push((train_metric, monitor_metric));
        epochs = epoch;
        let stop = plateau_scheduler(
            &mut state,
            monitor_metric,
            direction,
            opts.patience,
            opts.factor,
            opts.floor,
        );
        if stop {
            break;
        }
    }

    let train_metric = state.history.last().map_or(f64::NAN, |h| h.0);
    let test_metric = if data.splits.test.is_empty() {
        None
    } else {
        Some(split_metric(&params, data, &data.splits.test, opts.exec)?)
    };
    Ok(TrainOutcome {
        params,
        state,
        train_metric,
        test_metric,
        epochs,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Initializes from the config's seed and trains.
pub fn train(
    cfg: &ModelConfig,
    data: &TrainData,
    opts: &TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    train_from(init_model(cfg)?, data, opts)
}

/// Header for [`ReportRow::csv_line`].
pub const CSV_HEADER: &str =
    "dataset,encoder,layer,regime,K,L,d_hidden,params,seed,train_metric,test_metric,epochs,wall_time_s";

/// One run's CSV row. Every column except `wall_time_s` is
/// bit-deterministic given (config, seed, dataset file).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub encoder: EncoderKind,
    pub layer: LayerKind,
    pub regime: Regime,
    pub layers: usize,
    pub d_hidden: usize,
    pub params: usize,
    pub seed: u64,
    pub train_metric: f64,
    pub test_metric: f64,
    pub epochs: usize,
    pub wall_time_s: f64,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        let k = match self.regime {
            Regime::Sparse { k } => k,
            Regime::Full | Regime::None => 0,
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.dataset,
            self.encoder,
            self.layer,
            self.regime,
            k,
            self.layers,
            self.d_hidden,
            self.params,
            self.seed,
            self.train_metric,
            self.test_metric,
            self.epochs,
            self.wall_time_s,
        )
    }
}

/// Mean and population standard deviation of a metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    Aggregate { mean, std: var.sqrt(), n }
}

/// Tensor-over-concat gain, oriented so values above 1 always mean the
/// tensor encoder did better: losses divide concat by tensor, AP the
/// other way around.
pub fn gain(direction: Direction, concat: f64, tensor: f64) -> f64 {
    match direction {
        Direction::Down => concat / tensor,
        Direction::Up => tensor / concat,
    }
}
