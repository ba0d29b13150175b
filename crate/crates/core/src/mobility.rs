//! Vehicle kinematics along a straight road and geometry relative to the RSU.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RsuLocation {
    pub x: f64,
    pub y: f64,
}

/// Position (m) and along-road velocity (m/s) of one vehicle at one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityConfig {
    /// Slot length in seconds.
    pub slot_duration: f64,
    /// Per-axis standard deviation of the position uncertainty added each slot (m).
    pub process_noise_std: f64,
    pub init_mean: (f64, f64),
    /// Per-axis standard deviation of the initial position offset (m).
    pub init_std: f64,
    /// Inclusive range of the uniform along-road velocity (m/s).
    pub velocity_range: (f64, f64),
    /// Draw a fresh velocity every slot. When false a vehicle keeps its
    /// initial velocity for the whole episode.
    pub resample_velocity: bool,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            slot_duration: 0.02,
            process_noise_std: 0.02,
            init_mean: (25.0, 10.0),
            init_std: 1.0,
            velocity_range: (8.0, 8.25),
            resample_velocity: true,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.slot_duration,
            self.process_noise_std,
            self.init_mean.0,
            self.init_mean.1,
            self.init_std,
            self.velocity_range.0,
            self.velocity_range.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mobility parameters must be finite"));
        }
        if self.slot_duration <= 0.0 {
            return Err(Error::InvalidArgument("slot duration must be positive"));
        }
        if self.process_noise_std < 0.0 || self.init_std < 0.0 {
            return Err(Error::InvalidArgument("standard deviations must be non-negative"));
        }
        if self.velocity_range.0 > self.velocity_range.1 {
            return Err(Error::InvalidArgument("velocity range is inverted"));
        }
        Ok(())
    }

    fn velocity_dist(&self) -> Uniform<f64> {
        // Bounds are checked in validate().
        Uniform::new_inclusive(self.velocity_range.0, self.velocity_range.1)
            .expect("validated velocity range")
    }
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("validated standard deviation")
}

/// Draws a starting position around `init_mean` and a starting velocity.
pub fn sample_initial_state<R: Rng + ?Sized>(cfg: &MobilityConfig, rng: &mut R) -> VehicleState {
    let offset = normal(cfg.init_std);
    let dx = offset.sample(rng);
    let dy = offset.sample(rng);
    VehicleState {
        x: cfg.init_mean.0 + dx,
        y: cfg.init_mean.1 + dy,
        vx: cfg.velocity_dist().sample(rng),
    }
}

/// Advances one slot: `L ← L + [v_x, 0] ΔT + g`, `g ~ N(0, σ_g² I)`.
pub fn step<R: Rng + ?Sized>(state: &VehicleState, cfg: &MobilityConfig, rng: &mut R) -> VehicleState {
    let jitter = normal(cfg.process_noise_std);
    let gx = jitter.sample(rng);
    let gy = jitter.sample(rng);
    let vx = if cfg.resample_velocity {
        cfg.velocity_dist().sample(rng)
    } else {
        state.vx
    };
    VehicleState {
        x: state.x + state.vx * cfg.slot_duration + gx,
        y: state.y + gy,
        vx,
    }
}

pub fn distance_of(state: &VehicleState, rsu: &RsuLocation) -> f64 {
    libm::hypot(state.x - rsu.x, state.y - rsu.y)
}

/// `arccos((x − x_R) / ‖L − L_R‖)`, in `[0, π]`.
pub fn angle_of(state: &VehicleState, rsu: &RsuLocation) -> Result<f64> {
    let d = distance_of(state, rsu);
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::DegenerateGeometry("vehicle coincides with the RSU"));
    }
    let c = ((state.x - rsu.x) / d).clamp(-1.0, 1.0);
    Ok(libm::acos(c))
}

/// K vehicles × N slots, stored vehicle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHistory {
    pub num_vehicles: usize,
    pub num_slots: usize,
    pub states: Vec<VehicleState>,
    pub true_angles: Vec<f64>,
    pub true_dists: Vec<f64>,
}

impl TrajectoryHistory {
    #[inline]
    fn idx(&self, vehicle: usize, slot: usize) -> usize {
        vehicle * self.num_slots + slot
    }

    pub fn state(&self, vehicle: usize, slot: usize) -> &VehicleState {
        &self.states[self.idx(vehicle, slot)]
    }

    pub fn angle(&self, vehicle: usize, slot: usize) -> f64 {
        self.true_angles[self.idx(vehicle, slot)]
    }

    pub fn dist(&self, vehicle: usize, slot: usize) -> f64 {
        self.true_dists[self.idx(vehicle, slot)]
    }

    /// True angles of all vehicles at `slot`.
    pub fn angles_at(&self, slot: usize) -> Vec<f64> {
        (0..self.num_vehicles).map(|k| self.angle(k, slot)).collect()
    }

    pub fn dists_at(&self, slot: usize) -> Vec<f64> {
        (0..self.num_vehicles).map(|k| self.dist(k, slot)).collect()
    }

    pub fn velocities_at(&self, slot: usize) -> Vec<f64> {
        (0..self.num_vehicles).map(|k| self.state(k, slot).vx).collect()
    }

    pub fn min_distance(&self) -> f64 {
        self.true_dists.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs K independent vehicle chains for `n_slots` slots.
pub fn simulate_trajectories<R: Rng + ?Sized>(
    num_vehicles: usize,
    n_slots: usize,
    cfg: &MobilityConfig,
    rsu: &RsuLocation,
    rng: &mut R,
) -> Result<TrajectoryHistory> {
    if num_vehicles == 0 || n_slots == 0 {
        return Err(Error::InvalidArgument("need at least one vehicle and one slot"));
    }
    cfg.validate()?;
    let total = num_vehicles * n_slots;
    let mut states = Vec::with_capacity(total);
    let mut true_angles = Vec::with_capacity(total);
    let mut true_dists = Vec::with_capacity(total);
    for _ in 0..num_vehicles {
        let mut s = sample_initial_state(cfg, rng);
        for n in 0..n_slots {
            if n > 0 {
                s = step(&s, cfg, rng);
            }
            true_angles.push(angle_of(&s, rsu)?);
            true_dists.push(distance_of(&s, rsu));
            states.push(s);
        }
    }
    Ok(TrajectoryHistory {
        num_vehicles,
        num_slots: n_slots,
        states,
        true_angles,
        true_dists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use core::f64::consts::PI;

    fn still() -> MobilityConfig {
        MobilityConfig {
            process_noise_std: 0.0,
            init_std: 0.0,
            velocity_range: (8.0, 8.0),
            ..MobilityConfig::default()
        }
    }

    #[test]
    fn degenerate_initial_state() {
        let mut rng = stream(1, Purpose::Init, 0);
        let s = sample_initial_state(&still(), &mut rng);
        assert_eq!(s, VehicleState { x: 25.0, y: 10.0, vx: 8.0 });
    }

    #[test]
    fn initial_velocity_in_range() {
        let cfg = MobilityConfig::default();
        let mut rng = stream(2, Purpose::Init, 0);
        for _ in 0..10_000 {
            let s = sample_initial_state(&cfg, &mut rng);
            assert!((8.0..=8.25).contains(&s.vx));
        }
    }

    #[test]
    fn initial_position_mean() {
        let cfg = MobilityConfig::default();
        let mut rng = stream(3, Purpose::Init, 0);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let s = sample_initial_state(&cfg, &mut rng);
            sx += s.x;
            sy += s.y;
        }
        let band = 3.0 * cfg.init_std / libm::sqrt(n as f64);
        assert!(libm::fabs(sx / n as f64 - 25.0) < band);
        assert!(libm::fabs(sy / n as f64 - 10.0) < band);
    }

    #[test]
    fn step_kinematics() {
        let mut rng = stream(4, Purpose::Init, 0);
        let parked = MobilityConfig {
            velocity_range: (0.0, 0.0),
            ..still()
        };
        let s = VehicleState { x: 3.0, y: 4.0, vx: 0.0 };
        assert_eq!(step(&s, &parked, &mut rng), s);

        let s = VehicleState { x: 25.0, y: 10.0, vx: 8.0 };
        let next = step(&s, &still(), &mut rng);
        assert!(libm::fabs(next.x - 25.16) < 1e-12);
        assert_eq!(next.y, 10.0);
    }

    #[test]
    fn step_noise_variance() {
        let cfg = MobilityConfig {
            process_noise_std: 0.3,
            velocity_range: (0.0, 0.0),
            ..MobilityConfig::default()
        };
        let mut rng = stream(5, Purpose::Init, 0);
        let s = VehicleState { x: 0.0, y: 5.0, vx: 0.0 };
        let n = 100_000;
        let (mut vx, mut vy) = (0.0, 0.0);
        for _ in 0..n {
            let t = step(&s, &cfg, &mut rng);
            vx += t.x * t.x;
            vy += (t.y - 5.0) * (t.y - 5.0);
        }
        let target = 0.09;
        assert!(libm::fabs(vx / n as f64 / target - 1.0) < 0.05);
        assert!(libm::fabs(vy / n as f64 / target - 1.0) < 0.05);
    }

    #[test]
    fn geometry() {
        let rsu = RsuLocation { x: 2.0, y: -1.0 };
        let s = |x, y| VehicleState { x, y, vx: 0.0 };
        assert_eq!(angle_of(&s(7.0, -1.0), &rsu).unwrap(), 0.0);
        assert!(libm::fabs(angle_of(&s(2.0, 4.0), &rsu).unwrap() - PI / 2.0) < 1e-15);
        assert_eq!(distance_of(&s(2.0, 2.0), &rsu), 3.0);
        assert!(matches!(angle_of(&s(2.0, -1.0), &rsu), Err(Error::DegenerateGeometry(_))));

        let origin = RsuLocation::default();
        let a = angle_of(&s(25.0, 10.0), &origin).unwrap();
        assert!(libm::fabs(a - libm::acos(25.0 / libm::sqrt(725.0))) < 1e-15);
        assert!(libm::fabs(a - 0.38051) < 1e-5);
        assert!(libm::fabs(distance_of(&s(25.0, 10.0), &origin) - 26.9258) < 1e-4);
    }

    #[test]
    fn deterministic_trajectory_without_noise() {
        let cfg = still();
        let rsu = RsuLocation::default();
        let mut rng = stream(6, Purpose::TrainTrajectory, 0);
        let t = simulate_trajectories(3, 10, &cfg, &rsu, &mut rng).unwrap();
        for k in 0..3 {
            for n in 0..10 {
                let s = t.state(k, n);
                assert!(libm::fabs(s.x - (25.0 + 0.16 * n as f64)) < 1e-12);
                assert_eq!(s.y, 10.0);
                if n > 0 {
                    assert!(t.angle(k, n) <= t.angle(k, n - 1));
                }
            }
        }
    }

    #[test]
    fn kinematic_consistency_with_random_velocity() {
        let cfg = MobilityConfig {
            process_noise_std: 0.0,
            ..MobilityConfig::default()
        };
        let rsu = RsuLocation::default();
        let mut rng = stream(7, Purpose::TrainTrajectory, 0);
        let t = simulate_trajectories(4, 20, &cfg, &rsu, &mut rng).unwrap();
        for k in 0..4 {
            for n in 1..20 {
                let (a, b) = (t.state(k, n - 1), t.state(k, n));
                assert_eq!(b.x, a.x + a.vx * cfg.slot_duration);
                assert_eq!(b.y, a.y);
            }
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let bad = MobilityConfig {
            velocity_range: (9.0, 8.0),
            ..MobilityConfig::default()
        };
        let mut rng = stream(8, Purpose::Init, 0);
        assert!(simulate_trajectories(1, 2, &bad, &RsuLocation::default(), &mut rng).is_err());
        assert!(simulate_trajectories(0, 2, &MobilityConfig::default(), &RsuLocation::default(), &mut rng).is_err());
    }
}
