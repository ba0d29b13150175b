//! Mini-batch training loop: minimize `J = 1/(2N) Σ ‖Θ − f(Ω)‖²` for at
//! most `max_iterations` adaptive-moment updates.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::network::{accumulate_gradient, clrnet_forward};
use super::{cast, to_f64, ClrnetArch, ClrnetParams, Normalization, OptimizerState, Real};
use crate::dataset::TrainingExample;
use crate::error::{check_len, Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of examples (taken from the end) held out for validation.
    pub validation_fraction: f64,
    /// Iterations between validation passes.
    pub eval_every: usize,
    /// Stop after this many validation passes without improvement.
    pub early_stop_patience: Option<usize>,
    /// Return the parameters with the lowest validation loss instead of the last ones.
    pub restore_best: bool,
    /// Standardize inputs and labels with training-set statistics.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 4000,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_fraction: 0.1,
            eval_every: 50,
            early_stop_patience: None,
            restore_best: true,
            standardize: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::InvalidArgument("batch size and eval interval must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation fraction must be in [0, 1)"));
        }
        let rates = [self.learning_rate, self.epsilon];
        if rates.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("learning rate and epsilon must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::InvalidArgument("moment decay rates must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ClrnetParams<f64>,
    /// Mini-batch loss of every update, in order.
    pub loss_trace: Vec<f64>,
    /// `(iteration, validation loss)` at every validation pass.
    pub validation_trace: Vec<(usize, f64)>,
    pub iterations: usize,
    /// Iteration whose parameters were returned.
    pub best_iteration: usize,
    /// Full training-split loss before the first and after the last update.
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub train_examples: usize,
    pub validation_examples: usize,
}

struct Prepared<'a, T> {
    example: &'a TrainingExample,
    label: Vec<T>,
}

fn prepare<T: Real>(set: &[TrainingExample]) -> Vec<Prepared<'_, T>> {
    set.iter()
        .map(|e| Prepared {
            example: e,
            label: e.label.iter().map(|x| cast(*x)).collect(),
        })
        .collect()
}

fn normalization_for(examples: &[TrainingExample]) -> Normalization {
    fn mean_std<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> (f64, f64) {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        (mean, if std > 1e-12 { std } else { 1.0 })
    }
    let (input_mean, input_scale) = mean_std(examples.iter().flat_map(|e| e.input.values.iter()));
    let (output_mean, output_scale) = mean_std(examples.iter().flat_map(|e| e.label.iter()));
    Normalization {
        input_mean,
        input_scale,
        output_mean,
        output_scale,
    }
}

fn dataset_loss<T: Real>(set: &[Prepared<'_, T>], params: &ClrnetParams<T>, arch: &ClrnetArch) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in set {
        let tape = clrnet_forward(&p.example.input, params, arch)?;
        total += tape
            .output
            .iter()
            .zip(&p.label)
            .map(|(a, b)| to_f64((*a - *b) * (*a - *b)))
            .sum::<f64>();
    }
    Ok(total / (2.0 * set.len() as f64))
}

/// Trains a freshly initialized network in precision `T`.
pub fn train<T: Real>(arch: &ClrnetArch, examples: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    arch.validate()?;
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one example"));
    }
    for e in examples {
        check_len("label", arch.fc_out(), e.label.len())?;
        check_len("input vehicles", arch.num_vehicles, e.input.num_vehicles)?;
        check_len("input window", arch.window, e.input.window)?;
    }
    let mut n_val = (examples.len() as f64 * cfg.validation_fraction) as usize;
    if n_val >= examples.len() {
        n_val = 0;
    }
    let (train_set, val_set) = examples.split_at(examples.len() - n_val);
    let train_set = prepare::<T>(train_set);
    let val_set = prepare::<T>(val_set);

    let mut params = ClrnetParams::<T>::init(arch, &mut stream(cfg.seed, Purpose::Init, 0));
    if cfg.standardize {
        params.norm = normalization_for(&examples[..train_set.len()]);
    }
    let mut opt = OptimizerState::new(&params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut shuffle_rng = stream(cfg.seed, Purpose::Shuffle, 0);

    let initial_train_loss = dataset_loss(&train_set, &params, arch)?;
    let mut loss_trace = Vec::with_capacity(cfg.max_iterations);
    let mut validation_trace = Vec::new();
    let mut best = (params.clone(), f64::INFINITY, 0usize);
    let mut stale = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();
    let mut grads = params.zeros_like();
    let mut iteration = 0;
    while iteration < cfg.max_iterations {
        grads.iter_mut().for_each(|g| *g = T::zero());
        let batch = cfg.batch_size.min(train_set.len());
        let mut batch_loss = T::zero();
        for _ in 0..batch {
            if cursor == order.len() {
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let p = &train_set[order[cursor]];
            cursor += 1;
            let tape = clrnet_forward(&p.example.input, &params, arch)?;
            batch_loss += accumulate_gradient(&tape, &p.label, &params, &mut grads);
        }
        let inv: T = cast(1.0 / batch as f64);
        grads.iter_mut().for_each(|g| *g *= inv);
        let batch_loss = to_f64(batch_loss) / batch as f64;
        if !batch_loss.is_finite() {
            loss_trace.push(batch_loss);
            return Err(Error::TrainingDiverged {
                iteration,
                trace: loss_trace,
            });
        }
        loss_trace.push(batch_loss);
        if let Err(Error::TrainingDiverged { .. }) = super::optimizer_step(&mut params, &grads, &mut opt) {
            return Err(Error::TrainingDiverged {
                iteration,
                trace: loss_trace,
            });
        }
        iteration += 1;

        if !val_set.is_empty() && (iteration % cfg.eval_every == 0 || iteration == cfg.max_iterations) {
            let v = dataset_loss(&val_set, &params, arch)?;
            validation_trace.push((iteration, v));
            if v < best.1 {
                best = (params.clone(), v, iteration);
                stale = 0;
            } else {
                stale += 1;
                if cfg.early_stop_patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }

    let best_iteration = if cfg.restore_best && !val_set.is_empty() && best.1.is_finite() {
        params = best.0;
        best.2
    } else {
        iteration
    };
    let final_train_loss = dataset_loss(&train_set, &params, arch)?;
    Ok(TrainOutcome {
        params: params.cast(),
        loss_trace,
        validation_trace,
        iterations: iteration,
        best_iteration,
        initial_train_loss,
        final_train_loss,
        train_examples: train_set.len(),
        validation_examples: val_set.len(),
    })
}
