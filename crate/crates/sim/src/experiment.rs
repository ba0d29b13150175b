//! Dataset generation, training and Monte-Carlo evaluation.

use isac_core::channel::sum_rate;
use isac_core::dataset::{calibrated_noise, simulate_episode, Split, TrainingExample};
use isac_core::nn::{train, Clrnet, TrainOutcome};
use isac_core::predictors::{predict, Method, ModelAux, PredictionInput};
use isac_core::sensing::NoiseModel;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Precision, TrainingMode};
use crate::results::SweepResult;

/// Sensing noise for `nmse`, calibrated on the configured training corpus.
pub fn noise_for(cfg: &ExperimentConfig, nmse: f64) -> isac_core::Result<NoiseModel> {
    Ok(calibrated_noise(&cfg.scenario(), nmse, cfg.train_set_size, cfg.seed)?.with_mode(cfg.sensing_error_mode))
}

/// Training examples for `nmses`; example `i` uses `nmses[i % nmses.len()]`.
pub fn generate_examples(cfg: &ExperimentConfig, nmses: &[f64]) -> isac_core::Result<Vec<TrainingExample>> {
    let scenario = cfg.scenario();
    let noises = nmses.iter().map(|r| noise_for(cfg, *r)).collect::<isac_core::Result<Vec<_>>>()?;
    (0..cfg.train_set_size)
        .into_par_iter()
        .map(|i| {
            let e = simulate_episode(&scenario, &noises[i % noises.len()], cfg.seed, Split::Train, i as u64)?;
            Ok(TrainingExample {
                label: e.target_angles(),
                input: e.history,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Clrnet,
    /// NMSE values the training set was drawn at.
    pub nmses: Vec<f64>,
    pub outcome: TrainOutcome,
}

/// Trains one CLRNet on examples drawn at `nmses`.
pub fn train_model(cfg: &ExperimentConfig, nmses: &[f64]) -> isac_core::Result<TrainedModel> {
    let examples = generate_examples(cfg, nmses)?;
    let arch = cfg.arch();
    let tc = cfg.train_config();
    let outcome = match cfg.precision {
        Precision::F64 => train::<f64>(&arch, &examples, &tc)?,
        Precision::F32 => train::<f32>(&arch, &examples, &tc)?,
    };
    Ok(TrainedModel {
        model: Clrnet {
            arch,
            params: outcome.params.clone(),
        },
        nmses: nmses.to_vec(),
        outcome,
    })
}

/// Per-realization predictions at one NMSE, reusable across transmit powers.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub nmse: f64,
    pub methods: Vec<Method>,
    truth: Vec<Vec<f64>>,
    dists: Vec<Vec<f64>>,
    /// `preds[r][m]` for realization `r`, method `methods[m]`.
    preds: Vec<Vec<Vec<f64>>>,
}

impl PredictionSet {
    pub fn build(
        cfg: &ExperimentConfig,
        nmse: f64,
        methods: &[Method],
        model: Option<&Clrnet>,
    ) -> isac_core::Result<Self> {
        let scenario = cfg.scenario();
        let noise = noise_for(cfg, nmse)?;
        let target = scenario.target_slot();
        let rows = (0..cfg.realizations)
            .into_par_iter()
            .map(|r| {
                let e = simulate_episode(&scenario, &noise, cfg.seed, Split::Eval, r as u64)?;
                let truth = e.target_angles();
                let dists = e.trajectory.dists_at(target);
                let input = PredictionInput {
                    aux: Some(ModelAux {
                        velocities: e.trajectory.velocities_at(target - 1),
                        distances: e.trajectory.dists_at(target - 1),
                    }),
                    truth: Some(truth.clone()),
                    history: e.history,
                };
                let preds = methods
                    .iter()
                    .map(|m| Ok(predict(*m, &input, cfg.slot_duration, model)?.values))
                    .collect::<isac_core::Result<Vec<_>>>()?;
                Ok((truth, dists, preds))
            })
            .collect::<isac_core::Result<Vec<_>>>()?;
        let mut set = Self {
            nmse,
            methods: methods.to_vec(),
            truth: Vec::with_capacity(rows.len()),
            dists: Vec::with_capacity(rows.len()),
            preds: Vec::with_capacity(rows.len()),
        };
        for (t, d, p) in rows {
            set.truth.push(t);
            set.dists.push(d);
            set.preds.push(p);
        }
        Ok(set)
    }

    pub fn realizations(&self) -> usize {
        self.truth.len()
    }

    fn method_index(&self, method: Method) -> isac_core::Result<usize> {
        self.methods
            .iter()
            .position(|m| *m == method)
            .ok_or(isac_core::Error::InvalidArgument("method was not evaluated"))
    }

    /// Sum rate of every realization for `method` at `power_dbm`.
    pub fn rates(&self, method: Method, cfg: &ExperimentConfig, power_dbm: f64) -> isac_core::Result<Vec<f64>> {
        let m = self.method_index(method)?;
        let params = cfg.channel(power_dbm);
        let powers = params.equal_power_split(cfg.num_vehicles);
        (0..self.realizations())
            .map(|r| sum_rate(&self.truth[r], &self.preds[r][m], &self.dists[r], &powers, &params))
            .collect()
    }

    pub fn mean_rate(&self, method: Method, cfg: &ExperimentConfig, power_dbm: f64) -> isac_core::Result<f64> {
        Ok(mean_std(&self.rates(method, cfg, power_dbm)?).0)
    }

    /// Root-mean-square angle error of `method` over all vehicles and realizations.
    pub fn rmse(&self, method: Method) -> isac_core::Result<f64> {
        let m = self.method_index(method)?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.realizations() {
            for (p, t) in self.preds[r][m].iter().zip(&self.truth[r]) {
                sum += (p - t) * (p - t);
                n += 1;
            }
        }
        Ok((sum / n as f64).sqrt())
    }

    pub fn summarize(&self, cfg: &ExperimentConfig, power_dbm: f64) -> isac_core::Result<Vec<SweepResult>> {
        self.methods
            .iter()
            .map(|m| {
                let (mean, std) = mean_std(&self.rates(*m, cfg, power_dbm)?);
                Ok(SweepResult {
                    nmse: self.nmse,
                    power_dbm,
                    method: *m,
                    mean_sum_rate: mean,
                    std_sum_rate: std,
                    realizations: self.realizations(),
                    seed: cfg.seed,
                })
            })
            .collect()
    }

    /// Total power in dBm at which the mean sum rate of `method` reaches
    /// `target`, found by bisection on `[lo_dbm, hi_dbm]`. `None` when the
    /// target lies outside the bracket.
    pub fn power_for_rate(
        &self,
        method: Method,
        cfg: &ExperimentConfig,
        target: f64,
        lo_dbm: f64,
        hi_dbm: f64,
    ) -> isac_core::Result<Option<f64>> {
        let (mut lo, mut hi) = (lo_dbm, hi_dbm);
        if self.mean_rate(method, cfg, lo)? >= target || self.mean_rate(method, cfg, hi)? < target {
            return Ok(None);
        }
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.mean_rate(method, cfg, mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

/// Mean and sample standard deviation, accumulated in index order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluates `methods` at one NMSE and one total power.
pub fn evaluate(
    cfg: &ExperimentConfig,
    nmse: f64,
    power_dbm: f64,
    methods: &[Method],
    model: Option<&Clrnet>,
) -> isac_core::Result<Vec<SweepResult>> {
    PredictionSet::build(cfg, nmse, methods, model)?.summarize(cfg, power_dbm)
}

/// Evaluates `methods` at one NMSE over several total powers.
pub fn evaluate_grid(
    cfg: &ExperimentConfig,
    nmse: f64,
    powers_dbm: &[f64],
    methods: &[Method],
    model: Option<&Clrnet>,
) -> isac_core::Result<Vec<SweepResult>> {
    let set = PredictionSet::build(cfg, nmse, methods, model)?;
    let mut out = Vec::new();
    for p in powers_dbm {
        out.extend(set.summarize(cfg, *p)?);
    }
    Ok(out)
}

/// Output of a sweep: summary rows, the prediction sets behind them and the
/// networks that were trained.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub results: Vec<SweepResult>,
    pub sets: Vec<PredictionSet>,
    pub models: Vec<TrainedModel>,
}

/// Sum rate against NMSE at `cfg.power_dbm`, training as `cfg.training_mode` says.
pub fn sweep_nmse(cfg: &ExperimentConfig) -> isac_core::Result<SweepOutput> {
    let mut out = SweepOutput {
        results: Vec::new(),
        sets: Vec::new(),
        models: Vec::new(),
    };
    out.models = match cfg.training_mode {
        TrainingMode::Mixed => vec![train_model(cfg, &cfg.nmse_grid)?],
        TrainingMode::Matched => cfg
            .nmse_grid
            .iter()
            .map(|r| train_model(cfg, &[*r]))
            .collect::<isac_core::Result<Vec<_>>>()?,
    };
    for (i, &nmse) in cfg.nmse_grid.iter().enumerate() {
        let model = &out.models[i.min(out.models.len() - 1)].model;
        let set = PredictionSet::build(cfg, nmse, &Method::ALL, Some(model))?;
        out.results.extend(set.summarize(cfg, cfg.power_dbm)?);
        out.sets.push(set);
    }
    Ok(out)
}

/// Sum rate against total power at `cfg.power_sweep_nmse`. Trains a network
/// unless `model` is given.
pub fn sweep_power(cfg: &ExperimentConfig, model: Option<&Clrnet>) -> isac_core::Result<SweepOutput> {
    let mut models = Vec::new();
    let net = match model {
        Some(m) => m.clone(),
        None => {
            let nmses = match cfg.training_mode {
                TrainingMode::Matched => vec![cfg.power_sweep_nmse],
                TrainingMode::Mixed => cfg.nmse_grid.clone(),
            };
            let t = train_model(cfg, &nmses)?;
            let m = t.model.clone();
            models.push(t);
            m
        }
    };
    let set = PredictionSet::build(cfg, cfg.power_sweep_nmse, &Method::ALL, Some(&net))?;
    let mut results = Vec::new();
    for p in &cfg.power_grid_dbm {
        results.extend(set.summarize(cfg, *p)?);
    }
    Ok(SweepOutput {
        results,
        sets: vec![set],
        models,
    })
}
