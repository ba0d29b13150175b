//! Abstracted radar sensing: true angles plus Gaussian estimation error
//! whose variance is set from a target NMSE, and the sliding window of
//! estimates that feeds the predictors.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// How estimation errors are drawn over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// Fresh error for every vehicle at every slot.
    #[default]
    PerObservation,
    /// One error per vehicle, held for the whole episode.
    PerVehicleBias,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub nmse: f64,
    pub sigma_e: f64,
    /// `E[θ²]` over the calibration population (rad²).
    pub angle_second_moment: f64,
    pub mode: ErrorMode,
}

impl NoiseModel {
    /// Noise-free sensing.
    pub fn identity() -> Self {
        Self {
            nmse: 0.0,
            sigma_e: 0.0,
            angle_second_moment: 0.0,
            mode: ErrorMode::PerObservation,
        }
    }

    /// Builds the model from an already known second moment.
    pub fn from_second_moment(nmse: f64, angle_second_moment: f64) -> Result<Self> {
        if !(nmse.is_finite() && nmse >= 0.0) {
            return Err(Error::InvalidArgument("NMSE must be non-negative"));
        }
        if !(angle_second_moment.is_finite() && angle_second_moment >= 0.0) {
            return Err(Error::InvalidArgument("angle second moment must be non-negative"));
        }
        Ok(Self {
            nmse,
            sigma_e: libm::sqrt(nmse * angle_second_moment),
            angle_second_moment,
            mode: ErrorMode::PerObservation,
        })
    }

    pub fn with_mode(self, mode: ErrorMode) -> Self {
        Self { mode, ..self }
    }
}

/// `σ_E² = ρ · mean(θ²)` over `angle_samples`.
pub fn calibrate_noise(nmse: f64, angle_samples: &[f64]) -> Result<NoiseModel> {
    if angle_samples.is_empty() {
        return Err(Error::InvalidArgument("calibration needs at least one angle sample"));
    }
    let m2 = angle_samples.iter().map(|t| t * t).sum::<f64>() / angle_samples.len() as f64;
    NoiseModel::from_second_moment(nmse, m2)
}

/// One slot of estimates: `θ_E = θ + Δθ`, `Δθ ~ N(0, σ_E²)` i.i.d. over
/// vehicles. Estimates are not clamped to `[0, π]`.
pub fn estimate_angles<R: Rng + ?Sized>(true_angles: &[f64], noise: &NoiseModel, rng: &mut R) -> Vec<f64> {
    true_angles
        .iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            t + noise.sigma_e * z
        })
        .collect()
}

/// Estimates for a run of consecutive slots, honoring `noise.mode`.
pub fn estimate_episode<R: Rng + ?Sized>(
    true_by_slot: &[Vec<f64>],
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    match noise.mode {
        ErrorMode::PerObservation => true_by_slot
            .iter()
            .map(|slot| estimate_angles(slot, noise, rng))
            .collect(),
        ErrorMode::PerVehicleBias => {
            let k = true_by_slot.first().map_or(0, Vec::len);
            let bias = estimate_angles(&alloc::vec![0.0; k], noise, rng);
            true_by_slot
                .iter()
                .map(|slot| slot.iter().zip(&bias).map(|(t, b)| t + b).collect())
                .collect()
        }
    }
}

/// The K×τ input window. Column `j` holds the estimates from slot
/// `slot_index − 1 − j`, so column 0 is the most recent.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleHistory {
    /// Row-major, `values[k * window + j]`.
    pub values: Vec<f64>,
    pub num_vehicles: usize,
    pub window: usize,
    pub slot_index: usize,
}

impl AngleHistory {
    /// Builds a window directly from its columns, most recent first.
    pub fn from_columns(columns: &[Vec<f64>], slot_index: usize) -> Result<Self> {
        let window = columns.len();
        if window == 0 {
            return Err(Error::InvalidArgument("window must be at least one slot"));
        }
        let k = columns[0].len();
        let mut values = alloc::vec![0.0; k * window];
        for (j, col) in columns.iter().enumerate() {
            check_len("history column", k, col.len())?;
            for (v, x) in col.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidArgument("history entries must be finite"));
                }
                values[v * window + j] = *x;
            }
        }
        Ok(Self {
            values,
            num_vehicles: k,
            window,
            slot_index,
        })
    }

    pub fn get(&self, vehicle: usize, column: usize) -> f64 {
        self.values[vehicle * self.window + column]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.num_vehicles).map(|k| self.get(k, j)).collect()
    }

    /// The most recent estimates, `Θ_E` at slot `n − 1`.
    pub fn latest(&self) -> Vec<f64> {
        self.column(0)
    }
}

/// Re-indexes per-slot estimates into the window ending just before slot `n`.
pub fn assemble_history(estimates_by_slot: &[Vec<f64>], n: usize, tau: usize) -> Result<AngleHistory> {
    if tau == 0 {
        return Err(Error::InvalidArgument("window must be at least one slot"));
    }
    let available = estimates_by_slot.len().min(n);
    if n < tau || estimates_by_slot.len() < n {
        return Err(Error::NotEnoughHistory {
            needed: tau,
            available,
            slot: n,
        });
    }
    let columns: Vec<Vec<f64>> = (0..tau).map(|j| estimates_by_slot[n - 1 - j].clone()).collect();
    AngleHistory::from_columns(&columns, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use alloc::vec;

    #[test]
    fn calibration() {
        let m = calibrate_noise(0.0, &[0.3, 0.5]).unwrap();
        assert_eq!(m.sigma_e, 0.0);
        let m = calibrate_noise(0.25, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.sigma_e, 0.5);
        assert!(calibrate_noise(0.3, &[]).is_err());
        assert!(calibrate_noise(-0.1, &[1.0]).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = stream(1, Purpose::TrainSensing, 0);
        let truth = [0.1, 0.2, 3.0];
        assert_eq!(estimate_angles(&truth, &NoiseModel::identity(), &mut rng), truth.to_vec());
        let biased = NoiseModel::identity().with_mode(ErrorMode::PerVehicleBias);
        let slots = vec![truth.to_vec(), truth.to_vec()];
        assert_eq!(estimate_episode(&slots, &biased, &mut rng), slots);
    }

    #[test]
    fn bias_mode_holds_error_across_slots() {
        let mut rng = stream(2, Purpose::TrainSensing, 0);
        let noise = NoiseModel::from_second_moment(0.5, 0.2).unwrap().with_mode(ErrorMode::PerVehicleBias);
        let slots = vec![vec![0.1, 0.2], vec![0.1, 0.2], vec![0.1, 0.2]];
        let est = estimate_episode(&slots, &noise, &mut rng);
        assert_eq!(est[0], est[1]);
        assert_eq!(est[1], est[2]);
        assert_ne!(est[0], slots[0]);
    }

    #[test]
    fn history_ordering() {
        let slots: Vec<Vec<f64>> = (0..6).map(|s| vec![s as f64, 10.0 + s as f64]).collect();
        let h = assemble_history(&slots, 5, 3).unwrap();
        assert_eq!(h.column(0), vec![4.0, 14.0]);
        assert_eq!(h.column(1), vec![3.0, 13.0]);
        assert_eq!(h.column(2), vec![2.0, 12.0]);
        assert_eq!(h.latest(), slots[4]);

        let one = assemble_history(&slots, 6, 1).unwrap();
        assert_eq!(one.column(0), slots[5]);

        let flat = vec![vec![0.4, 0.5]; 4];
        let h = assemble_history(&flat, 4, 4).unwrap();
        assert!((0..4).all(|j| h.column(j) == flat[0]));
    }

    #[test]
    fn history_errors() {
        let slots = vec![vec![0.0]; 3];
        assert!(matches!(assemble_history(&slots, 2, 3), Err(Error::NotEnoughHistory { .. })));
        assert!(matches!(assemble_history(&slots, 4, 2), Err(Error::NotEnoughHistory { .. })));
        assert!(assemble_history(&slots, 3, 0).is_err());
        let ragged = vec![vec![0.0], vec![0.0, 1.0]];
        assert!(assemble_history(&ragged, 2, 2).is_err());
        assert!(assemble_history(&[vec![f64::NAN]], 1, 1).is_err());
    }
}
