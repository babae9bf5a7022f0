//! Minibatch Adam training with plateau learning-rate decay and early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::config::tolerances;
use crate::data::Dataset;
use crate::metrics::{auc_from_outputs, confusion_matrix, AucReport};
use crate::model::{bias_isometry_defect, gradient, loss, predict, ModelState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            lr_decay_factor: 0.1,
            lr_patience: 3,
            early_stop_patience: 20,
            max_epochs: 300,
            batch_size: 128,
            n_runs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 0.0) {
            return bad("lr_decay_factor must be positive");
        }
        if self.lr_patience == 0 || self.early_stop_patience == 0 || self.max_epochs == 0 {
            return bad("patience values and max_epochs must be positive");
        }
        if self.batch_size == 0 || self.n_runs == 0 {
            return bad("batch_size and n_runs must be positive");
        }
        if self.lr_patience >= self.max_epochs || self.early_stop_patience >= self.max_epochs {
            log::warn!(
                "patience ({}/{}) not below max_epochs ({}); the schedule cannot trigger",
                self.lr_patience,
                self.early_stop_patience,
                self.max_epochs
            );
        }
        Ok(())
    }

    /// Seed for run `k`; weights and batch order derive from it.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Tracks the best validation loss; a value counts as an improvement only if
/// it beats the best by more than `min_delta`.
#[derive(Debug, Clone)]
struct PlateauCounter {
    best: f64,
    bad_epochs: usize,
    min_delta: f64,
}

impl PlateauCounter {
    fn new(min_delta: f64) -> Self {
        Self {
            best: f64::INFINITY,
            bad_epochs: 0,
            min_delta,
        }
    }

    fn observe(&mut self, value: f64) -> bool {
        if value < self.best - self.min_delta || self.best.is_infinite() {
            self.best = value;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }
}

/// Multiplies the learning rate by `factor` once the validation loss has
/// failed to improve for more than `patience` epochs, then resets its counter.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    factor: f64,
    patience: usize,
    counter: PlateauCounter,
    pub n_decays: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, min_delta: f64) -> Self {
        Self {
            factor,
            patience,
            counter: PlateauCounter::new(min_delta),
            n_decays: 0,
        }
    }

    /// Returns true when the learning rate was decayed.
    pub fn step(&mut self, val_loss: f64, lr: &mut f64) -> bool {
        self.counter.observe(val_loss);
        if self.counter.bad_epochs > self.patience {
            *lr *= self.factor;
            self.counter.bad_epochs = 0;
            self.n_decays += 1;
            true
        } else {
            false
        }
    }
}

/// Signals a stop once `patience` consecutive epochs brought no improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    counter: PlateauCounter,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            counter: PlateauCounter::new(min_delta),
        }
    }

    /// Returns `(improved, stop)`.
    pub fn step(&mut self, val_loss: f64) -> (bool, bool) {
        let improved = self.counter.observe(val_loss);
        (improved, self.counter.bad_epochs >= self.patience)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub roc_auc: AucReport,
    pub confusion: Vec<Vec<f64>>,
}

pub fn evaluate(model: &ModelState, data: &Dataset) -> Result<Evaluation> {
    let outputs = predict(model, &data.features)?;
    let task = model.task();
    Ok(Evaluation {
        loss: loss(&outputs, &data.labels, task)?,
        roc_auc: auc_from_outputs(&outputs, &data.labels, task)?,
        confusion: confusion_matrix(&outputs, &data.labels, task)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub n_lr_decays: usize,
    /// Evaluation of the returned (best) weights on the validation split.
    pub validation: Evaluation,
    pub wall_clock_seconds: f64,
}

fn check_shapes(model: &ModelState, data: &Dataset, name: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config(format!("{name} split is empty")));
    }
    if data.d_inp() != model.spec().d_inp {
        return Err(Error::DimensionMismatch {
            expected: model.spec().d_inp,
            found: data.d_inp(),
        });
    }
    Ok(())
}

/// Trains `model` in place and returns the weights from the epoch with the
/// lowest validation loss. Batch order comes from `seed`, so the whole run is
/// reproducible bit for bit.
pub fn train(mut model: ModelState, train: &Dataset, val: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<(ModelState, Metrics)> {
    cfg.validate()?;
    check_shapes(&model, train, "training")?;
    check_shapes(&model, val, "validation")?;
    let start = Instant::now();
    let min_delta = tolerances().improvement;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut params = model.params();
    let mut lr = cfg.lr;
    let mut adam = Adam::new(params.len(), lr);
    let mut scheduler = PlateauScheduler::new(cfg.lr_decay_factor, cfg.lr_patience, min_delta);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience, min_delta);
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        if cfg!(debug_assertions) && train.len() >= 2 {
            let defect = bias_isometry_defect(&model, &train.features[0], &train.features[1], &[model.circuit_weights.clone()])?;
            debug_assert!(defect <= 1e-10, "bias block changed a fidelity by {defect:e}");
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<Vec<f64>> = idx.iter().map(|&i| train.features[i].clone()).collect();
            let ys: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let (batch_loss, grad) = gradient(&model, &xs, &ys)?;
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    what: "training loss",
                    epoch,
                    batch,
                });
            }
            epoch_loss += batch_loss * idx.len() as f64;
            adam.lr = lr;
            adam.step(&mut params, &grad);
            model.set_params(&params)?;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = loss(&predict(&model, &val.features)?, &val.labels, model.task())?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                what: "validation loss",
                epoch,
                batch: 0,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr:e}");

        let (improved, stop) = stopper.step(val_loss);
        if improved {
            best_val = val_loss;
            best_epoch = epoch;
            best_params.clone_from(&params);
        }
        scheduler.step(val_loss, &mut lr);
        if stop {
            stopped_early = true;
            break;
        }
    }

    model.set_params(&best_params)?;
    let validation = evaluate(&model, val)?;
    let metrics = Metrics {
        history,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
        n_lr_decays: scheduler.n_decays,
        validation,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, metrics))
}

/// Outcome of one seeded run: fresh initialization, training, test evaluation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub model: ModelState,
    pub metrics: Metrics,
    pub test: Evaluation,
}

pub fn run_once(spec: &AnsatzSpec, psi0_seed: u64, splits: [&Dataset; 3], cfg: &TrainConfig, run: usize) -> Result<RunOutcome> {
    let seed = cfg.run_seed(run);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ModelState::init_random(spec.clone(), psi0_seed, &mut rng)?;
    let (model, metrics) = train(model, splits[0], splits[1], cfg, seed)?;
    let test = evaluate(&model, splits[2])?;
    Ok(RunOutcome {
        run,
        seed,
        model,
        metrics,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub test_loss: f64,
    pub test_auc: AucReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: String,
    pub n_qubits: usize,
    pub d_inp: usize,
    pub n_layers: usize,
    pub total_weights: usize,
    pub runs: Vec<RunSummary>,
    pub mean_auc: f64,
    /// Population standard deviation over runs.
    pub std_auc: f64,
    pub best_auc: f64,
    pub best_run: usize,
}

impl ExperimentSummary {
    pub fn from_runs(spec: &AnsatzSpec, outcomes: &[RunOutcome]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Config("no runs to summarize".into()));
        }
        let runs: Vec<RunSummary> = outcomes
            .iter()
            .map(|o| RunSummary {
                run: o.run,
                seed: o.seed,
                best_epoch: o.metrics.best_epoch,
                epochs_run: o.metrics.history.len(),
                best_val_loss: o.metrics.best_val_loss,
                test_loss: o.test.loss,
                test_auc: o.test.roc_auc.clone(),
            })
            .collect();
        let aucs: Vec<f64> = runs.iter().map(|r| r.test_auc.mean()).collect();
        let n = aucs.len() as f64;
        let mean = aucs.iter().sum::<f64>() / n;
        let std = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        let (best_idx, best) = aucs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &a)| if a > acc.1 { (i, a) } else { acc });
        Ok(Self {
            model: format!("{:?}", spec.kind).to_lowercase(),
            n_qubits: spec.n_qubits,
            d_inp: spec.d_inp,
            n_layers: spec.n_layers,
            total_weights: spec.counts().total_weights(),
            runs,
            mean_auc: mean,
            std_auc: std,
            best_auc: best,
            best_run: outcomes[best_idx].run,
        })
    }

    /// One line in the layout `model n L weights mean±std`.
    pub fn table_row(&self) -> String {
        format!(
            "{:<5} n={:<2} L={} weights={:<4} AUC {:.3}±{:.3} (best {:.3})",
            self.model, self.n_qubits, self.n_layers, self.total_weights, self.mean_auc, self.std_auc, self.best_auc
        )
    }
}

/// Random perturbation helper used by diagnostics: uniform values in `[-π, π)`.
pub fn random_weights<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::ModelKind;
    use crate::data::Split;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(2, 0.01);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn four_flat_epochs_decay_once() {
        let mut s = PlateauScheduler::new(0.1, 3, 1e-12);
        let mut lr = 0.001;
        assert!(!s.step(1.0, &mut lr));
        let decays: Vec<bool> = (0..4).map(|_| s.step(1.0, &mut lr)).collect();
        assert_eq!(decays, vec![false, false, false, true]);
        assert_eq!(s.n_decays, 1);
        assert!((lr - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn constant_loss_stops_after_patience_plus_one() {
        let mut e = EarlyStopping::new(20, 1e-12);
        let mut epoch = 0;
        loop {
            epoch += 1;
            if e.step(0.5).1 {
                break;
            }
        }
        assert_eq!(epoch, 21);
    }

    #[test]
    fn tiny_improvement_is_not_improvement() {
        let mut e = EarlyStopping::new(5, 1e-12);
        assert!(e.step(1.0).0);
        assert!(!e.step(1.0 - 1e-13).0);
        assert!(e.step(1.0 - 1e-9).0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let one = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        assert!(one.validate().is_ok());
    }

    fn toy_split(n: usize, seed: u64, split: Split) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = xs.iter().map(|&x| usize::from(x > 0.2)).collect();
        Dataset::new(xs.into_iter().map(|x| vec![x]).collect(), labels, 2, split).unwrap()
    }

    #[test]
    fn one_qubit_toy_separates() {
        let spec = AnsatzSpec::new(ModelKind::Pdr, 1, 1, 1, 1).unwrap();
        let tr = toy_split(256, 1, Split::Train);
        let va = toy_split(128, 2, Split::Val);
        let cfg = TrainConfig {
            lr: 0.05,
            max_epochs: 50,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = run_once(&spec, 3, [&tr, &va, &tr], &cfg, 0).unwrap();
        assert!(out.metrics.history.len() <= 50);
        assert!(out.test.roc_auc.mean() > 0.999, "train AUC {}", out.test.roc_auc.mean());
    }

    #[test]
    fn training_is_deterministic_and_respects_max_epochs() {
        let spec = AnsatzSpec::new(ModelKind::Acls, 2, 1, 1, 1).unwrap();
        let tr = toy_split(64, 4, Split::Train);
        let va = toy_split(32, 5, Split::Val);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let a = run_once(&spec, 9, [&tr, &va, &va], &cfg, 0).unwrap();
        let b = run_once(&spec, 9, [&tr, &va, &va], &cfg, 0).unwrap();
        assert_eq!(a.metrics.history.len(), 1);
        assert_eq!(a.metrics.history, b.metrics.history);
        assert_eq!(a.model.params(), b.model.params());
    }
}
