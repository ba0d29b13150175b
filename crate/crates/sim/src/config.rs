//! `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key must be known;
//! lists are comma separated. [`ExperimentConfig::to_text`] writes the
//! fully resolved configuration in the same format.

use std::fmt::Write as _;
use std::path::Path;

use isac_core::channel::{db_to_linear, dbm_to_watts, ChannelParams};
use isac_core::dataset::Scenario;
use isac_core::mobility::{MobilityConfig, RsuLocation};
use isac_core::nn::{ClrnetArch, TrainConfig};
use isac_core::sensing::ErrorMode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] isac_core::Error),
    #[error("{0}")]
    Constraint(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

/// How CLRNets are trained across an NMSE sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// One network per NMSE value, trained at that NMSE.
    Matched,
    /// One network trained on examples cycling through the whole NMSE grid.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_vehicles: usize,
    pub window: usize,

    pub num_tx_antennas: usize,
    pub num_rx_antennas: usize,
    pub ref_path_loss_db: f64,
    pub ref_distance: f64,
    pub path_loss_exp: f64,
    pub noise_power_dbm: f64,

    pub slot_duration: f64,
    pub process_noise_std: f64,
    pub init_mean_x: f64,
    pub init_mean_y: f64,
    pub init_std: f64,
    pub velocity_min: f64,
    pub velocity_max: f64,
    pub resample_velocity: bool,
    pub rsu_x: f64,
    pub rsu_y: f64,

    pub sensing_error_mode: ErrorMode,

    pub conv_filters: usize,
    pub lstm_hidden: usize,

    pub train_set_size: usize,
    pub max_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
    pub eval_every: usize,
    pub early_stop_patience: Option<usize>,
    pub restore_best: bool,
    pub standardize: bool,
    pub precision: Precision,
    pub training_mode: TrainingMode,

    /// NMSE used by the single-point `train` and `eval` commands.
    pub nmse: f64,
    /// Total power used by `eval` and the NMSE sweep.
    pub power_dbm: f64,
    pub realizations: usize,
    pub nmse_grid: Vec<f64>,
    pub power_grid_dbm: Vec<f64>,
    /// NMSE of the power sweep.
    pub power_sweep_nmse: f64,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_vehicles: 8,
            window: 6,
            num_tx_antennas: 32,
            num_rx_antennas: 32,
            ref_path_loss_db: -65.0,
            ref_distance: 1.0,
            path_loss_exp: 3.0,
            noise_power_dbm: -80.0,
            slot_duration: 0.02,
            process_noise_std: 0.02,
            init_mean_x: 25.0,
            init_mean_y: 10.0,
            init_std: 1.0,
            velocity_min: 8.0,
            velocity_max: 8.25,
            resample_velocity: true,
            rsu_x: 0.0,
            rsu_y: 0.0,
            sensing_error_mode: ErrorMode::PerObservation,
            conv_filters: 4,
            lstm_hidden: 8,
            train_set_size: 2000,
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
            standardize: true,
            precision: Precision::F64,
            training_mode: TrainingMode::Matched,
            nmse: 0.7,
            power_dbm: 20.0,
            realizations: 200,
            nmse_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            power_grid_dbm: (0..=5).map(|i| 5.0 * i as f64).collect(),
            power_sweep_nmse: 0.7,
            seed: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: reason.to_owned(),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Realizations and training-set size at the full published scale.
    pub fn paper_scale(mut self) -> Self {
        self.realizations = 2000;
        self.train_set_size = 10_000;
        self
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "num_vehicles" => self.num_vehicles = parse_num(key, v)?,
            "window" => self.window = parse_num(key, v)?,
            "num_tx_antennas" => self.num_tx_antennas = parse_num(key, v)?,
            "num_rx_antennas" => self.num_rx_antennas = parse_num(key, v)?,
            "ref_path_loss_db" => self.ref_path_loss_db = parse_num(key, v)?,
            "ref_distance" => self.ref_distance = parse_num(key, v)?,
            "path_loss_exp" => self.path_loss_exp = parse_num(key, v)?,
            "noise_power_dbm" => self.noise_power_dbm = parse_num(key, v)?,
            "slot_duration" => self.slot_duration = parse_num(key, v)?,
            "process_noise_std" => self.process_noise_std = parse_num(key, v)?,
            "init_mean_x" => self.init_mean_x = parse_num(key, v)?,
            "init_mean_y" => self.init_mean_y = parse_num(key, v)?,
            "init_std" => self.init_std = parse_num(key, v)?,
            "velocity_min" => self.velocity_min = parse_num(key, v)?,
            "velocity_max" => self.velocity_max = parse_num(key, v)?,
            "resample_velocity" => self.resample_velocity = parse_num(key, v)?,
            "rsu_x" => self.rsu_x = parse_num(key, v)?,
            "rsu_y" => self.rsu_y = parse_num(key, v)?,
            "sensing_error_mode" => {
                self.sensing_error_mode = match v {
                    "per_observation" => ErrorMode::PerObservation,
                    "per_vehicle_bias" => ErrorMode::PerVehicleBias,
                    _ => return Err(bad(key, v, "expected per_observation or per_vehicle_bias")),
                }
            }
            "conv_filters" => self.conv_filters = parse_num(key, v)?,
            "lstm_hidden" => self.lstm_hidden = parse_num(key, v)?,
            "train_set_size" => self.train_set_size = parse_num(key, v)?,
            "max_iterations" => self.max_iterations = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "beta1" => self.beta1 = parse_num(key, v)?,
            "beta2" => self.beta2 = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_num(key, v)?,
            "validation_fraction" => self.validation_fraction = parse_num(key, v)?,
            "eval_every" => self.eval_every = parse_num(key, v)?,
            "early_stop_patience" => {
                self.early_stop_patience = if v == "none" { None } else { Some(parse_num(key, v)?) }
            }
            "restore_best" => self.restore_best = parse_num(key, v)?,
            "standardize" => self.standardize = parse_num(key, v)?,
            "precision" => {
                self.precision = match v {
                    "f64" => Precision::F64,
                    "f32" => Precision::F32,
                    _ => return Err(bad(key, v, "expected f64 or f32")),
                }
            }
            "training_mode" => {
                self.training_mode = match v {
                    "matched" => TrainingMode::Matched,
                    "mixed" => TrainingMode::Mixed,
                    _ => return Err(bad(key, v, "expected matched or mixed")),
                }
            }
            "nmse" => self.nmse = parse_num(key, v)?,
            "power_dbm" => self.power_dbm = parse_num(key, v)?,
            "realizations" => self.realizations = parse_num(key, v)?,
            "nmse_grid" => self.nmse_grid = parse_list(key, v)?,
            "power_grid_dbm" => self.power_grid_dbm = parse_list(key, v)?,
            "power_sweep_nmse" => self.power_sweep_nmse = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mode = match self.sensing_error_mode {
            ErrorMode::PerObservation => "per_observation",
            ErrorMode::PerVehicleBias => "per_vehicle_bias",
        };
        vec![
            ("num_vehicles", self.num_vehicles.to_string()),
            ("window", self.window.to_string()),
            ("num_tx_antennas", self.num_tx_antennas.to_string()),
            ("num_rx_antennas", self.num_rx_antennas.to_string()),
            ("ref_path_loss_db", self.ref_path_loss_db.to_string()),
            ("ref_distance", self.ref_distance.to_string()),
            ("path_loss_exp", self.path_loss_exp.to_string()),
            ("noise_power_dbm", self.noise_power_dbm.to_string()),
            ("slot_duration", self.slot_duration.to_string()),
            ("process_noise_std", self.process_noise_std.to_string()),
            ("init_mean_x", self.init_mean_x.to_string()),
            ("init_mean_y", self.init_mean_y.to_string()),
            ("init_std", self.init_std.to_string()),
            ("velocity_min", self.velocity_min.to_string()),
            ("velocity_max", self.velocity_max.to_string()),
            ("resample_velocity", self.resample_velocity.to_string()),
            ("rsu_x", self.rsu_x.to_string()),
            ("rsu_y", self.rsu_y.to_string()),
            ("sensing_error_mode", mode.to_owned()),
            ("conv_filters", self.conv_filters.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("train_set_size", self.train_set_size.to_string()),
            ("max_iterations", self.max_iterations.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("validation_fraction", self.validation_fraction.to_string()),
            ("eval_every", self.eval_every.to_string()),
            (
                "early_stop_patience",
                self.early_stop_patience.map_or("none".to_owned(), |p| p.to_string()),
            ),
            ("restore_best", self.restore_best.to_string()),
            ("standardize", self.standardize.to_string()),
            (
                "precision",
                match self.precision {
                    Precision::F64 => "f64",
                    Precision::F32 => "f32",
                }
                .to_owned(),
            ),
            (
                "training_mode",
                match self.training_mode {
                    TrainingMode::Matched => "matched",
                    TrainingMode::Mixed => "mixed",
                }
                .to_owned(),
            ),
            ("nmse", self.nmse.to_string()),
            ("power_dbm", self.power_dbm.to_string()),
            ("realizations", self.realizations.to_string()),
            ("nmse_grid", join(&self.nmse_grid)),
            ("power_grid_dbm", join(&self.power_grid_dbm)),
            ("power_sweep_nmse", self.power_sweep_nmse.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario().validate()?;
        self.channel(self.power_dbm).validate()?;
        self.arch().validate()?;
        self.train_config().validate()?;
        if self.nmse_grid.is_empty() || self.power_grid_dbm.is_empty() {
            return Err(ConfigError::Constraint("NMSE and power grids must be non-empty"));
        }
        if self.realizations == 0 || self.train_set_size == 0 {
            return Err(ConfigError::Constraint("realizations and train_set_size must be positive"));
        }
        let nmses = self.nmse_grid.iter().chain([&self.nmse, &self.power_sweep_nmse]);
        if nmses.clone().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(ConfigError::Constraint("NMSE values must be non-negative"));
        }
        if self.power_grid_dbm.iter().any(|p| !p.is_finite()) {
            return Err(ConfigError::Constraint("power grid values must be finite"));
        }
        Ok(())
    }

    pub fn mobility(&self) -> MobilityConfig {
        MobilityConfig {
            slot_duration: self.slot_duration,
            process_noise_std: self.process_noise_std,
            init_mean: (self.init_mean_x, self.init_mean_y),
            init_std: self.init_std,
            velocity_range: (self.velocity_min, self.velocity_max),
            resample_velocity: self.resample_velocity,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            num_vehicles: self.num_vehicles,
            window: self.window,
            mobility: self.mobility(),
            rsu: RsuLocation {
                x: self.rsu_x,
                y: self.rsu_y,
            },
        }
    }

    pub fn channel(&self, total_power_dbm: f64) -> ChannelParams {
        ChannelParams {
            num_tx_antennas: self.num_tx_antennas,
            num_rx_antennas: self.num_rx_antennas,
            ref_path_loss: db_to_linear(self.ref_path_loss_db),
            ref_distance: self.ref_distance,
            path_loss_exp: self.path_loss_exp,
            noise_power: dbm_to_watts(self.noise_power_dbm),
            total_power: dbm_to_watts(total_power_dbm),
        }
    }

    pub fn arch(&self) -> ClrnetArch {
        ClrnetArch {
            num_vehicles: self.num_vehicles,
            window: self.window,
            conv_filters: self.conv_filters,
            lstm_hidden: self.lstm_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_iterations: self.max_iterations,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            validation_fraction: self.validation_fraction,
            eval_every: self.eval_every,
            early_stop_patience: self.early_stop_patience,
            restore_best: self.restore_best,
            standardize: self.standardize,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.nmse_grid.len(), 10);
        assert_eq!(cfg.power_grid_dbm, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]);
        let full = cfg.paper_scale();
        assert_eq!((full.realizations, full.train_set_size), (2000, 10_000));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("seed = 9\nnmse_grid = 0.1, 0.5\n# note\nprecision = f32 # inline\nearly_stop_patience = 4\n")
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.nmse_grid, vec![0.1, 0.5]);
        assert_eq!(cfg.precision, Precision::F32);
        let again = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(matches!(
            ExperimentConfig::from_text("sead = 3"),
            Err(ConfigError::UnknownKey(k)) if k == "sead"
        ));
        assert!(matches!(ExperimentConfig::from_text("seed 3"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            ExperimentConfig::from_text("window = six"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(ExperimentConfig::from_text("window = 0").is_err());
        assert!(ExperimentConfig::from_text("nmse_grid = ").is_err());
        assert!(ExperimentConfig::from_text("velocity_min = 9\nvelocity_max = 8").is_err());
    }
}
