//! Episodes, training examples and the sensing-noise calibration corpus.
//!
//! An episode runs `window + 1` slots. Slots `0..window` are observed
//! through the noisy sensing channel and form the input window; slot
//! `window` is the one to predict.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mobility::{simulate_trajectories, MobilityConfig, RsuLocation, TrajectoryHistory};
use crate::rng::{stream, Purpose};
use crate::sensing::{assemble_history, estimate_episode, AngleHistory, NoiseModel};

/// Vehicles closer than this to the RSU cause the episode to be redrawn.
pub const MIN_SAFE_DISTANCE: f64 = 0.5;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub num_vehicles: usize,
    pub window: usize,
    pub mobility: MobilityConfig,
    pub rsu: RsuLocation,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            num_vehicles: 8,
            window: 6,
            mobility: MobilityConfig::default(),
            rsu: RsuLocation::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.num_vehicles == 0 || self.window == 0 {
            return Err(Error::InvalidArgument("need at least one vehicle and a window of one slot"));
        }
        self.mobility.validate()
    }

    pub fn episode_slots(&self) -> usize {
        self.window + 1
    }

    /// Index of the predicted slot.
    pub fn target_slot(&self) -> usize {
        self.window
    }
}

/// Which pair of stream families an episode draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    fn purposes(self) -> (Purpose, Purpose) {
        match self {
            Split::Train => (Purpose::TrainTrajectory, Purpose::TrainSensing),
            Split::Eval => (Purpose::EvalTrajectory, Purpose::EvalSensing),
        }
    }
}

/// Trajectory of episode `index`. Depends only on `(scenario, seed, split, index)`,
/// never on the sensing noise level.
pub fn episode_trajectory(scenario: &Scenario, seed: u64, split: Split, index: u64) -> Result<TrajectoryHistory> {
    scenario.validate()?;
    let mut rng = stream(seed, split.purposes().0, index);
    for _ in 0..MAX_REDRAWS {
        let t = simulate_trajectories(
            scenario.num_vehicles,
            scenario.episode_slots(),
            &scenario.mobility,
            &scenario.rsu,
            &mut rng,
        )?;
        if t.min_distance() >= MIN_SAFE_DISTANCE {
            return Ok(t);
        }
    }
    Err(Error::DegenerateGeometry("vehicles keep passing through the RSU"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: TrajectoryHistory,
    /// Noisy estimates for the observed slots `0..window`.
    pub estimates: Vec<Vec<f64>>,
    pub history: AngleHistory,
}

impl Episode {
    pub fn target_angles(&self) -> Vec<f64> {
        self.trajectory.angles_at(self.trajectory.num_slots - 1)
    }
}

pub fn simulate_episode(
    scenario: &Scenario,
    noise: &NoiseModel,
    seed: u64,
    split: Split,
    index: u64,
) -> Result<Episode> {
    let trajectory = episode_trajectory(scenario, seed, split, index)?;
    let observed: Vec<Vec<f64>> = (0..scenario.window).map(|n| trajectory.angles_at(n)).collect();
    let mut rng = stream(seed, split.purposes().1, index);
    let estimates = estimate_episode(&observed, noise, &mut rng);
    let history = assemble_history(&estimates, scenario.target_slot(), scenario.window)?;
    Ok(Episode {
        trajectory,
        estimates,
        history,
    })
}

/// `(Ω, Θ)`: the noisy window and the true angles of the following slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: AngleHistory,
    pub label: Vec<f64>,
}

/// `count` examples, one independent episode each.
pub fn generate_dataset(scenario: &Scenario, noise: &NoiseModel, count: usize, seed: u64) -> Result<Vec<TrainingExample>> {
    (0..count as u64)
        .map(|i| {
            let e = simulate_episode(scenario, noise, seed, Split::Train, i)?;
            Ok(TrainingExample {
                label: e.target_angles(),
                input: e.history,
            })
        })
        .collect()
}

/// `mean(θ²)` over every true angle of the training trajectory corpus.
pub fn corpus_second_moment(scenario: &Scenario, count: usize, seed: u64) -> Result<f64> {
    if count == 0 {
        return Err(Error::InvalidArgument("calibration corpus must be non-empty"));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..count as u64 {
        let t = episode_trajectory(scenario, seed, Split::Train, i)?;
        sum += t.true_angles.iter().map(|a| a * a).sum::<f64>();
        n += t.true_angles.len();
    }
    Ok(sum / n as f64)
}

/// Calibrates the sensing noise for `nmse` against the training corpus.
pub fn calibrated_noise(scenario: &Scenario, nmse: f64, count: usize, seed: u64) -> Result<NoiseModel> {
    NoiseModel::from_second_moment(nmse, corpus_second_moment(scenario, count, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_inputs_are_true_angles() {
        let sc = Scenario::default();
        let data = generate_dataset(&sc, &NoiseModel::identity(), 5, 3).unwrap();
        for (i, ex) in data.iter().enumerate() {
            let t = episode_trajectory(&sc, 3, Split::Train, i as u64).unwrap();
            for j in 0..sc.window {
                assert_eq!(ex.input.column(j), t.angles_at(sc.window - 1 - j));
            }
            assert_eq!(ex.label, t.angles_at(sc.window));
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let sc = Scenario::default();
        let noise = calibrated_noise(&sc, 0.4, 20, 9).unwrap();
        let a = generate_dataset(&sc, &noise, 20, 9).unwrap();
        let b = generate_dataset(&sc, &noise, 20, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&sc, &noise, 20, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trajectory_independent_of_noise_level() {
        let sc = Scenario::default();
        let lo = NoiseModel::from_second_moment(0.1, 0.15).unwrap();
        let hi = NoiseModel::from_second_moment(0.9, 0.15).unwrap();
        let a = simulate_episode(&sc, &lo, 4, Split::Eval, 2).unwrap();
        let b = simulate_episode(&sc, &hi, 4, Split::Eval, 2).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        // Same standard-normal draws, scaled by σ_E.
        let ratio = (b.estimates[0][0] - a.trajectory.angle(0, 0)) / (a.estimates[0][0] - a.trajectory.angle(0, 0));
        assert!((ratio - 3.0).abs() < 1e-9);
    }

    #[test]
    fn second_moment_brute_force() {
        let sc = Scenario::default();
        let m2 = corpus_second_moment(&sc, 30, 5).unwrap();
        let mut all = Vec::new();
        for i in 0..30 {
            all.extend(episode_trajectory(&sc, 5, Split::Train, i).unwrap().true_angles);
        }
        let direct = all.iter().map(|a| a * a).sum::<f64>() / all.len() as f64;
        assert!((m2 - direct).abs() < 1e-15);
        let noise = calibrated_noise(&sc, 0.7, 30, 5).unwrap();
        assert!((noise.sigma_e - (0.7 * direct).sqrt()).abs() < 1e-12);
        let via_samples = crate::sensing::calibrate_noise(0.7, &all).unwrap();
        assert!((noise.sigma_e - via_samples.sigma_e).abs() < 1e-12);
    }
}
