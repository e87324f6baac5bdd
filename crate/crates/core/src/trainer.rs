//! SGD training loop with an optional stable-rank warm-start phase and
//! validation-based early stopping.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{InteractionDataset, Sampler, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, full_table_srank, MetricReport};
use crate::losses::{loss_grad, Batch, Gradients, LossSpec, LossValue, DEFAULT_GAMMA_SR};
use crate::model::{init_model, EmbeddingModel};

/// Cutoff used for every validation metric the trainer logs.
pub const VAL_K: usize = 20;
pub const DEFAULT_PATIENCE: usize = 20;
pub const DEFAULT_MAX_EPOCHS: usize = 400;
pub const DEFAULT_PAIRWISE_BATCH: usize = 16384;
pub const DEFAULT_DIRECTAU_BATCH: usize = 4096;

/// Mixed into the run seed so batch sampling and initialization draw from
/// different streams.
const SAMPLER_STREAM: u64 = 0x5a3d_1e55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain SGD with L2 weight decay on touched rows.
    Sgd,
}

/// Objective used during the warm-start phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmObjective {
    /// Alignment with the stable-rank regularizer.
    StableRank,
    /// Alignment alone (ablation).
    AlignOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_spec: LossSpec,
    pub warm_start: bool,
    pub warm_objective: WarmObjective,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Optimizer steps per epoch; `None` means one pass over the training
    /// pairs in expectation.
    pub steps_per_epoch: Option<usize>,
    /// Shared budget across both phases.
    pub max_epochs: usize,
    /// Final early-stopping patience, in evaluations.
    pub patience: usize,
    /// Patience that ends the warm-start phase, in evaluations.
    pub warm_patience: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub gamma_sr: f64,
    pub dim: usize,
    pub optimizer: Optimizer,
    /// Record per-epoch wall time; when off, `wall_seconds` is null and runs
    /// are byte-reproducible.
    pub record_timing: bool,
}

/// Per-loss starting point chosen by validation NDCG@20 on the bundled
/// synthetic data at `d = 64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub lr: f64,
    pub weight_decay: f64,
    pub gamma_sr: f64,
    pub warm_patience: usize,
}

pub fn tuned(loss_spec: &LossSpec) -> Tuned {
    let base = Tuned {
        lr: 1.0,
        weight_decay: 0.0,
        gamma_sr: DEFAULT_GAMMA_SR,
        warm_patience: DEFAULT_PATIENCE,
    };
    match loss_spec {
        LossSpec::Bpr => Tuned { lr: 1000.0, weight_decay: 2e-4, gamma_sr: 0.2, warm_patience: 5 },
        LossSpec::DirectAu { .. } => Tuned { lr: 1e4, gamma_sr: 2.0, ..base },
        _ => base,
    }
}

impl TrainConfig {
    /// Defaults for `loss_spec`, with the batch size of its loss family.
    pub fn new(loss_spec: LossSpec) -> Self {
        let batch_size = if loss_spec.needs_negatives() {
            DEFAULT_PAIRWISE_BATCH
        } else {
            DEFAULT_DIRECTAU_BATCH
        };
        let t = tuned(&loss_spec);
        Self {
            loss_spec,
            warm_start: false,
            warm_objective: WarmObjective::StableRank,
            lr: t.lr,
            weight_decay: t.weight_decay,
            batch_size,
            steps_per_epoch: None,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            warm_patience: t.warm_patience,
            eval_every: 1,
            seed: 0,
            gamma_sr: t.gamma_sr,
            dim: 64,
            optimizer: Optimizer::Sgd,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_spec.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_every == 0 || self.dim == 0 {
            return bad("batch size, epochs, eval interval and dimension must be positive".into());
        }
        if self.steps_per_epoch == Some(0) {
            return bad("steps per epoch must be positive".into());
        }
        if self.patience == 0 || self.warm_patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.warm_start && !(self.gamma_sr > 0.0 && self.gamma_sr.is_finite()) {
            return bad(format!("gamma_sr must be > 0, got {}", self.gamma_sr));
        }
        Ok(())
    }

    fn warm_spec(&self) -> LossSpec {
        match self.warm_objective {
            WarmObjective::StableRank => LossSpec::WarmStart { gamma_sr: self.gamma_sr },
            WarmObjective::AlignOnly => LossSpec::AlignOnly,
        }
    }
}

/// `row ← row − lr·(grad + weight_decay·row)` for every touched row.
pub fn optimizer_step(model: &mut EmbeddingModel, grads: &Gradients, lr: f64, weight_decay: f64) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric {
            epoch: 0,
            detail: "non-finite gradient".into(),
        });
    }
    for (table, g) in [(&mut model.users, &grads.users), (&mut model.items, &grads.items)] {
        for (r, gr) in g.iter() {
            for (x, gk) in table.row_mut(r).iter_mut().zip(gr) {
                *x -= lr * (gk + weight_decay * *x);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WarmStart,
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Continue,
    /// Warm-start patience ran out; training moves to the main objective.
    Switch,
    /// Final patience ran out.
    Stop,
}

/// Patience bookkeeping for the warm-start switch and final early stopping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseController {
    pub phase: Phase,
    pub best_val: f64,
    pub epochs_since_improve: usize,
    pub switch_epoch: Option<usize>,
    pub warm_patience: usize,
    pub patience: usize,
}

impl PhaseController {
    pub fn new(warm_start: bool, warm_patience: usize, patience: usize) -> Self {
        Self {
            phase: if warm_start { Phase::WarmStart } else { Phase::Main },
            best_val: f64::NEG_INFINITY,
            epochs_since_improve: 0,
            switch_epoch: None,
            warm_patience,
            patience,
        }
    }

    /// Feeds one validation value observed after `epoch`. A strict
    /// improvement resets the counter; anything else increments it. When it
    /// reaches the current phase's patience the warm phase switches (with a
    /// fresh counter and best value) or the main phase stops.
    pub fn phase_signal(&mut self, epoch: usize, val: f64) -> Result<Signal> {
        if !val.is_finite() {
            return Err(Error::Numeric {
                epoch,
                detail: format!("validation metric {val}"),
            });
        }
        if val > self.best_val {
            self.best_val = val;
            self.epochs_since_improve = 0;
        } else {
            self.epochs_since_improve += 1;
        }
        match self.phase {
            Phase::WarmStart if self.epochs_since_improve >= self.warm_patience => {
                self.phase = Phase::Main;
                self.switch_epoch = Some(epoch);
                self.best_val = f64::NEG_INFINITY;
                self.epochs_since_improve = 0;
                Ok(Signal::Switch)
            }
            Phase::Main if self.epochs_since_improve >= self.patience => Ok(Signal::Stop),
            _ => Ok(Signal::Continue),
        }
    }
}

/// Produces the validation metrics the trainer steers by.
pub trait ValidationSource {
    fn validate(&mut self, model: &EmbeddingModel, epoch: usize) -> Result<MetricReport>;
}

/// Recall@20 and NDCG@20 on the dataset's validation split.
pub struct SplitValidation<'a> {
    pub ds: &'a InteractionDataset,
}

impl ValidationSource for SplitValidation<'_> {
    fn validate(&mut self, model: &EmbeddingModel, _epoch: usize) -> Result<MetricReport> {
        evaluate(model, self.ds, Split::Val, VAL_K)
    }
}

/// Replays a fixed NDCG sequence, one value per evaluation; the last value
/// repeats once the sequence runs out.
pub struct ScriptedValidation {
    values: Vec<f64>,
    next: usize,
}

impl ScriptedValidation {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, next: 0 }
    }
}

impl ValidationSource for ScriptedValidation {
    fn validate(&mut self, _model: &EmbeddingModel, _epoch: usize) -> Result<MetricReport> {
        let v = *self
            .values
            .get(self.next)
            .or(self.values.last())
            .ok_or_else(|| Error::Eval("empty validation script".into()))?;
        self.next += 1;
        Ok(MetricReport {
            recall_at_k: v,
            ndcg_at_k: v,
            k: VAL_K,
            users_evaluated: 0,
        })
    }
}

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: Phase,
    pub loss_total: f64,
    pub loss_align: Option<f64>,
    pub loss_uniform: Option<f64>,
    pub loss_srank: Option<f64>,
    pub val_recall20: Option<f64>,
    pub val_ndcg20: Option<f64>,
    pub srank_user: f64,
    pub srank_item: f64,
    /// Time spent in forward, backward and update steps only.
    pub wall_seconds: Option<f64>,
}

pub fn write_jsonl(mut w: impl Write, metrics: &[EpochMetrics]) -> Result<()> {
    for m in metrics {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n").map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn save_jsonl(path: impl AsRef<Path>, metrics: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(std::io::BufWriter::new(f), metrics)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation evaluation over the whole run.
    pub best_model: EmbeddingModel,
    pub best_epoch: usize,
    pub best_val_ndcg: f64,
    pub final_model: EmbeddingModel,
    pub metrics: Vec<EpochMetrics>,
    /// Controller state after every evaluation.
    pub history: Vec<PhaseController>,
    pub switch_epoch: Option<usize>,
    /// Stopped by patience rather than by the epoch budget.
    pub stopped_early: bool,
    /// Forward, backward and update time summed over the run.
    pub train_seconds: f64,
}

impl TrainOutcome {
    /// Main-phase epochs run up to and including the best epoch.
    pub fn main_epochs_to_best(&self) -> usize {
        match self.switch_epoch {
            Some(s) => self.best_epoch.saturating_sub(s),
            None if self.metrics.first().is_some_and(|m| m.phase == Phase::WarmStart) => 0,
            None => self.best_epoch,
        }
    }

    /// Main-phase epochs run in total.
    pub fn main_epochs(&self) -> usize {
        self.metrics.iter().filter(|m| m.phase == Phase::Main).count()
    }
}

/// Trains a freshly initialized model on the dataset's training split,
/// validating on its validation split.
pub fn run_training(ds: &InteractionDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let model = init_model(ds.n_users(), ds.n_items(), config.dim, config.seed)?;
    run_training_with(ds, config, model, &mut SplitValidation { ds })
}

#[derive(Default)]
struct Accum {
    steps: usize,
    total: f64,
    align: Option<f64>,
    uniform: Option<f64>,
    srank: Option<f64>,
}

fn add_opt(slot: &mut Option<f64>, v: Option<f64>) {
    if let Some(v) = v {
        *slot = Some(slot.unwrap_or(0.0) + v);
    }
}

fn sum_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (None, None) => None,
        _ => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
    }
}

impl Accum {
    fn add(&mut self, v: &LossValue) {
        let c = &v.components;
        self.steps += 1;
        self.total += v.total;
        add_opt(&mut self.align, c.align);
        add_opt(&mut self.uniform, sum_opt(c.uniform_user, c.uniform_item));
        add_opt(&mut self.srank, sum_opt(c.srank_user, c.srank_item));
    }

    fn mean(&self, x: Option<f64>) -> Option<f64> {
        x.map(|v| v / self.steps as f64)
    }
}

/// Training from `model` with validation supplied by `val`.
pub fn run_training_with(
    ds: &InteractionDataset,
    config: &TrainConfig,
    mut model: EmbeddingModel,
    val: &mut dyn ValidationSource,
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.n_users() != ds.n_users() || model.n_items() != ds.n_items() {
        return Err(Error::ShapeMismatch {
            expected: (ds.n_users(), ds.n_items()),
            got: (model.n_users(), model.n_items()),
        });
    }
    let mut sampler = Sampler::new(ds, config.seed ^ SAMPLER_STREAM)?;
    let steps = config
        .steps_per_epoch
        .unwrap_or_else(|| ds.train_pairs().len().div_ceil(config.batch_size));

    let mut controller = PhaseController::new(config.warm_start, config.warm_patience, config.patience);
    let mut history = Vec::new();
    let mut metrics = Vec::new();
    let mut best: Option<(usize, f64, EmbeddingModel)> = None;
    let mut stopped_early = false;
    let mut train_seconds = 0.0;

    for epoch in 1..=config.max_epochs {
        let phase = controller.phase;
        let spec = match phase {
            Phase::WarmStart => config.warm_spec(),
            Phase::Main => config.loss_spec,
        };

        let mut acc = Accum::default();
        let start = Instant::now();
        for _ in 0..steps {
            let batch = match spec {
                LossSpec::Bpr => Batch::Triplets(sampler.triplets(config.batch_size)),
                LossSpec::Ssm { k } => Batch::Sets(sampler.sets(config.batch_size, k)),
                _ => Batch::Pairs(sampler.pairs(config.batch_size)),
            };
            let (value, grads) = loss_grad(&spec, &model, &batch)?;
            optimizer_step(&mut model, &grads, config.lr, config.weight_decay).map_err(|e| match e {
                Error::Numeric { detail, .. } => Error::Numeric { epoch, detail },
                other => other,
            })?;
            acc.add(&value);
        }
        let elapsed = start.elapsed().as_secs_f64();
        train_seconds += elapsed;
        if !model.is_finite() || !acc.total.is_finite() {
            return Err(Error::Numeric {
                epoch,
                detail: format!("loss {} after {} steps", acc.total, acc.steps),
            });
        }

        let (srank_user, srank_item) = full_table_srank(&model)?;
        let mut record = EpochMetrics {
            epoch,
            phase,
            loss_total: acc.total / acc.steps as f64,
            loss_align: acc.mean(acc.align),
            loss_uniform: acc.mean(acc.uniform),
            loss_srank: acc.mean(acc.srank),
            val_recall20: None,
            val_ndcg20: None,
            srank_user,
            srank_item,
            wall_seconds: config.record_timing.then_some(elapsed),
        };

        let mut signal = Signal::Continue;
        if epoch % config.eval_every == 0 || epoch == config.max_epochs {
            let report = val.validate(&model, epoch)?;
            record.val_recall20 = Some(report.recall_at_k);
            record.val_ndcg20 = Some(report.ndcg_at_k);
            if best.as_ref().is_none_or(|(_, b, _)| report.ndcg_at_k > *b) {
                best = Some((epoch, report.ndcg_at_k, model.clone()));
            }
            signal = controller.phase_signal(epoch, report.ndcg_at_k)?;
            history.push(controller.clone());
        }
        metrics.push(record);
        if signal == Signal::Stop {
            stopped_early = true;
            break;
        }
    }

    let (best_epoch, best_val_ndcg, best_model) = best.expect("the last epoch is always evaluated");
    Ok(TrainOutcome {
        best_model,
        best_epoch,
        best_val_ndcg,
        final_model: model,
        metrics,
        history,
        switch_epoch: controller.switch_epoch,
        stopped_early,
        train_seconds,
    })
}
