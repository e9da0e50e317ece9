//! Mini-batch training: MSE loss, Adam with a one-cycle schedule, best
//! checkpoint selected by validation MAE.
//!
//! Graphs are built and featurized once up front. Each epoch shuffles the
//! training set with an RNG derived from `(seed, epoch)`, so a resumed run
//! sees the same batch order as an uninterrupted one.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::FeaturizedGraph;
use crate::math::abs;
use crate::model::{GraphBatch, ModelConfig, ModelState};
use crate::nn::{adam_step, AdamConfig, OneCycle};
use crate::tensor::{ParamStore, Tape};
use crate::{Error, PropertyRecord, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Total epoch count; a resumed run continues up to this number.
    pub epochs: usize,
    pub peak_factor: f64,
    pub warmup_fraction: f64,
    pub final_factor: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Share of the training set held out when no validation set is given.
    pub valid_fraction: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 500,
            peak_factor: 10.0,
            warmup_fraction: 0.3,
            final_factor: 0.01,
            adam: AdamConfig::default(),
            seed: 0,
            valid_fraction: 0.1,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if !(self.peak_factor >= 1.0 && self.final_factor > 0.0 && self.final_factor <= 1.0) {
            return bad("need peak_factor ≥ 1 and 0 < final_factor ≤ 1");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return bad("valid_fraction must lie in [0, 1)");
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps > 0");
        }
        Ok(())
    }
}

/// Wall-clock source; the core crate has no access to a system clock.
pub trait Clock {
    fn seconds(&mut self) -> f64;
}

/// Reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_mse: f64,
    pub train_mae: f64,
    pub valid_mse: Option<f64>,
    pub valid_mae: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    pub best_valid_mae: Option<f64>,
    pub test_mae: Option<f64>,
    pub num_parameters: usize,
    pub num_train: usize,
    pub num_valid: usize,
}

impl TrainReport {
    pub fn final_train_mae(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_mae)
    }

    /// Bitwise equality of every field except wall-clock durations.
    pub fn same_metrics(&self, other: &TrainReport) -> bool {
        let bits = |x: f64| x.to_bits();
        let obits = |x: Option<f64>| x.map(f64::to_bits);
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && bits(a.learning_rate) == bits(b.learning_rate)
                    && bits(a.train_mse) == bits(b.train_mse)
                    && bits(a.train_mae) == bits(b.train_mae)
                    && obits(a.valid_mse) == obits(b.valid_mse)
                    && obits(a.valid_mae) == obits(b.valid_mae)
            })
            && self.best_epoch == other.best_epoch
            && obits(self.best_valid_mae) == obits(other.best_valid_mae)
            && obits(self.test_mae) == obits(other.test_mae)
            && self.num_parameters == other.num_parameters
            && (self.num_train, self.num_valid) == (other.num_train, other.num_valid)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainData<'a> {
    pub train: &'a [PropertyRecord],
    pub valid: Option<&'a [PropertyRecord]>,
    pub test: Option<&'a [PropertyRecord]>,
}

struct Prepared {
    graphs: Vec<FeaturizedGraph>,
    targets: Vec<f64>,
}

impl Prepared {
    fn new(model: &ModelState, records: &[&PropertyRecord]) -> Result<Self> {
        let graphs = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                model.prepare(&r.crystal).map_err(|e| {
                    let id = r.crystal.id().unwrap_or("");
                    Error::Data(format!("record {i} {id}: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { graphs, targets: records.iter().map(|r| r.target).collect() })
    }

    fn len(&self) -> usize {
        self.targets.len()
    }

    fn batch(&self, idx: &[usize]) -> Result<(GraphBatch, Vec<f64>)> {
        let gs: Vec<&FeaturizedGraph> = idx.iter().map(|&i| &self.graphs[i]).collect();
        Ok((GraphBatch::new(&gs)?, idx.iter().map(|&i| self.targets[i]).collect()))
    }
}

/// (MSE, MAE) of `model` over a prepared set.
fn evaluate(model: &ModelState, set: &Prepared, batch_size: usize) -> Result<(f64, f64)> {
    let (mut se, mut ae) = (0.0, 0.0);
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(batch_size) {
        let (batch, targets) = set.batch(chunk)?;
        let pred = model.predict_batch(&batch)?;
        for (p, y) in pred.iter().zip(&targets) {
            se += (p - y) * (p - y);
            ae += abs(p - y);
        }
    }
    let n = set.len() as f64;
    Ok((se / n, ae / n))
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Parameters at the epoch with the lowest validation MAE (values only;
/// moments are zero and the step count is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BestSnapshot {
    pub valid_mae: f64,
    pub epoch: usize,
    pub params: ParamStore,
}

pub struct Trainer {
    state: ModelState,
    optim: OptimConfig,
    epochs_completed: usize,
    best: Option<BestSnapshot>,
}

impl Trainer {
    pub fn new(model: ModelConfig, optim: OptimConfig) -> Result<Self> {
        optim.validate()?;
        Ok(Self { state: ModelState::new(model)?, optim, epochs_completed: 0, best: None })
    }

    /// Continue from a saved state (latest parameters and Adam moments).
    pub fn resume(
        state: ModelState,
        optim: OptimConfig,
        epochs_completed: usize,
        best: Option<BestSnapshot>,
    ) -> Result<Self> {
        optim.validate()?;
        if let Some(b) = &best {
            let mut probe = state.clone();
            probe.load_values_from(&b.params)?;
        }
        Ok(Self { state, optim, epochs_completed, best })
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn best_valid_mae(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.valid_mae)
    }

    pub fn best(&self) -> Option<&BestSnapshot> {
        self.best.as_ref()
    }

    /// Latest state with the best parameter values swapped in, if any.
    pub fn best_state(&self) -> ModelState {
        let mut state = self.state.clone();
        if let Some(b) = &self.best {
            state.load_values_from(&b.params).expect("same layout");
        }
        state
    }

    /// State with the best validation parameters (or the latest ones when
    /// there is no validation set). Adam moments always come from the latest step.
    pub fn into_best_state(self) -> ModelState {
        let mut state = self.state;
        if let Some(b) = self.best {
            state.load_values_from(&b.params).expect("same layout");
        }
        state
    }

    pub fn run(
        &mut self,
        data: TrainData<'_>,
        clock: &mut dyn Clock,
        on_epoch: &mut dyn FnMut(&EpochMetrics),
    ) -> Result<TrainReport> {
        if data.train.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        if self.epochs_completed >= self.optim.epochs {
            return Err(Error::InvalidConfig(format!(
                "already trained {} of {} epochs",
                self.epochs_completed, self.optim.epochs
            )));
        }
        let (train_refs, valid_refs) = self.split(data);
        let train = Prepared::new(&self.state, &train_refs)?;
        let valid = Prepared::new(&self.state, &valid_refs)?;
        let batch_size = self.optim.batch_size;
        let batches_per_epoch = train.len().div_ceil(batch_size);
        let schedule = OneCycle {
            base_lr: self.optim.learning_rate,
            peak_factor: self.optim.peak_factor,
            warmup_fraction: self.optim.warmup_fraction,
            final_factor: self.optim.final_factor,
            total_steps: self.optim.epochs * batches_per_epoch,
        };

        let mut report = TrainReport {
            epochs: Vec::new(),
            best_epoch: self.best.as_ref().map(|b| b.epoch),
            best_valid_mae: self.best_valid_mae(),
            test_mae: None,
            num_parameters: self.state.num_parameters(),
            num_train: train.len(),
            num_valid: valid.len(),
        };
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in (self.epochs_completed + 1)..=self.optim.epochs {
            let start = clock.seconds();
            order.sort_unstable();
            order.shuffle(&mut epoch_rng(self.optim.seed, epoch));
            let mut lr = schedule.lr_at(self.state.store().step as usize);
            for chunk in order.chunks(batch_size) {
                let (batch, targets) = train.batch(chunk)?;
                let mut tape = Tape::new();
                let pred = self.state.forward(&mut tape, &batch)?;
                let loss = tape.mse(pred, &targets)?;
                let loss_value = tape.value(loss).data()[0];
                if tape.check_finite().is_err() || !loss_value.is_finite() {
                    return Err(Error::Diverged { epoch, loss: loss_value });
                }
                let grads = tape.backward(loss, self.state.store())?;
                lr = schedule.lr_at(self.state.store().step as usize);
                adam_step(self.state.store_mut(), &grads, &self.optim.adam, lr);
            }
            let (train_mse, train_mae) = evaluate(&self.state, &train, batch_size).map_err(|e| diverged(e, epoch))?;
            let (valid_mse, valid_mae) = if valid.len() > 0 {
                let (mse, mae) = evaluate(&self.state, &valid, batch_size).map_err(|e| diverged(e, epoch))?;
                (Some(mse), Some(mae))
            } else {
                (None, None)
            };
            if let Some(mae) = valid_mae {
                if self.best.as_ref().is_none_or(|b| mae < b.valid_mae) {
                    self.best = Some(BestSnapshot { valid_mae: mae, epoch, params: self.state.store().values_only() });
                    report.best_epoch = Some(epoch);
                    report.best_valid_mae = Some(mae);
                }
            }
            let metrics = EpochMetrics {
                epoch,
                learning_rate: lr,
                train_mse,
                train_mae,
                valid_mse,
                valid_mae,
                seconds: clock.seconds() - start,
            };
            on_epoch(&metrics);
            report.epochs.push(metrics);
            self.epochs_completed = epoch;
        }

        if let Some(test) = data.test.filter(|t| !t.is_empty()) {
            let refs: Vec<&PropertyRecord> = test.iter().collect();
            let best = self.best_state();
            let prepared = Prepared::new(&best, &refs)?;
            report.test_mae = Some(evaluate(&best, &prepared, batch_size)?.1);
        }
        Ok(report)
    }

    fn split<'a>(&self, data: TrainData<'a>) -> (Vec<&'a PropertyRecord>, Vec<&'a PropertyRecord>) {
        if let Some(valid) = data.valid {
            return (data.train.iter().collect(), valid.iter().collect());
        }
        let n = data.train.len();
        let n_valid = libm::round(self.optim.valid_fraction * n as f64) as usize;
        if n_valid == 0 || n_valid >= n {
            return (data.train.iter().collect(), Vec::new());
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.optim.seed));
        let (v, t) = idx.split_at(n_valid);
        let mut t = t.to_vec();
        let mut v = v.to_vec();
        t.sort_unstable();
        v.sort_unstable();
        (t.into_iter().map(|i| &data.train[i]).collect(), v.into_iter().map(|i| &data.train[i]).collect())
    }
}

fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
        other => other,
    }
}

/// Train from scratch and return the best state with its report.
pub fn train(data: TrainData<'_>, model: ModelConfig, optim: OptimConfig) -> Result<(ModelState, TrainReport)> {
    let mut trainer = Trainer::new(model, optim)?;
    let report = trainer.run(data, &mut NoClock, &mut |_| {})?;
    Ok((trainer.into_best_state(), report))
}
