//! ULA steering vectors, path loss and downlink sum-rate.
//!
//! Angles are radians and powers are linear watts throughout. The `dbm`
//! helpers exist for configuration boundaries only.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    libm::pow(10.0, (dbm - 30.0) / 10.0)
}

/// Converts a power ratio in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * libm::log10(watts) + 30.0
}

/// Link budget and array constants for the RSU downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub num_tx_antennas: usize,
    pub num_rx_antennas: usize,
    /// Reference path loss at `ref_distance`, linear.
    pub ref_path_loss: f64,
    /// Meters.
    pub ref_distance: f64,
    pub path_loss_exp: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Total transmit power budget in watts, shared by all users.
    pub total_power: f64,
}

impl ChannelParams {
    /// 32×32 ULA, −65 dB at 1 m, exponent 3, −80 dBm noise and the given
    /// total power.
    pub fn with_total_power_dbm(total_power_dbm: f64) -> Self {
        Self {
            num_tx_antennas: 32,
            num_rx_antennas: 32,
            ref_path_loss: db_to_linear(-65.0),
            ref_distance: 1.0,
            path_loss_exp: 3.0,
            noise_power: dbm_to_watts(-80.0),
            total_power: dbm_to_watts(total_power_dbm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx_antennas == 0 || self.num_rx_antennas == 0 {
            return Err(Error::InvalidArgument("antenna counts must be positive"));
        }
        let positive = [
            self.ref_path_loss,
            self.ref_distance,
            self.path_loss_exp,
            self.noise_power,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(
                "path loss, reference distance, exponent and noise power must be positive",
            ));
        }
        if !(self.total_power.is_finite() && self.total_power >= 0.0) {
            return Err(Error::InvalidArgument("total power must be non-negative"));
        }
        Ok(())
    }

    /// Transmit antenna gain, `sqrt(N_t)`.
    pub fn tx_gain(&self) -> f64 {
        libm::sqrt(self.num_tx_antennas as f64)
    }

    /// Squared transmit gain. Kept separate so it is exactly `N_t`.
    pub fn tx_gain_sq(&self) -> f64 {
        self.num_tx_antennas as f64
    }

    /// Total monostatic array gain `sqrt(N_t N_r)`.
    pub fn array_gain(&self) -> f64 {
        libm::sqrt((self.num_tx_antennas * self.num_rx_antennas) as f64)
    }

    /// Equal split `P / K`.
    pub fn equal_power_split(&self, num_users: usize) -> Vec<f64> {
        alloc::vec![self.total_power / num_users as f64; num_users]
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::with_total_power_dbm(20.0)
    }
}

/// Unit-norm ULA response with half-wavelength spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: Vec<Complex64>,
    pub angle: f64,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|z| z.norm_sqr()).sum())
    }

    /// `selfᴴ · other`.
    pub fn inner(&self, other: &[Complex64]) -> Result<Complex64> {
        check_len("steering inner product", self.entries.len(), other.len())?;
        Ok(self
            .entries
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// A per-user transmit beamformer `sqrt(p) a(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub entries: Vec<Complex64>,
    pub power: f64,
}

impl BeamVector {
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("angle must be finite"))
    }
}

#[inline]
fn steering_entry(m: usize, cos_theta: f64, scale: f64) -> Complex64 {
    let phase = -PI * m as f64 * cos_theta;
    Complex64::new(scale * libm::cos(phase), scale * libm::sin(phase))
}

fn steering(theta: f64, n_antennas: usize) -> Result<SteeringVector> {
    check_angle(theta)?;
    if n_antennas == 0 {
        return Err(Error::InvalidArgument("antenna count must be positive"));
    }
    let scale = 1.0 / libm::sqrt(n_antennas as f64);
    let c = libm::cos(theta);
    Ok(SteeringVector {
        entries: (0..n_antennas).map(|m| steering_entry(m, c, scale)).collect(),
        angle: theta,
    })
}

/// Transmit steering vector `a(θ)`: entry `m` is `e^{-jπ m cos θ} / sqrt(N)`.
pub fn tx_steering(theta: f64, n_antennas: usize) -> Result<SteeringVector> {
    steering(theta, n_antennas)
}

/// Receive steering vector `b(θ)`. Same response as the transmit side.
pub fn rx_steering(theta: f64, n_antennas: usize) -> Result<SteeringVector> {
    steering(theta, n_antennas)
}

/// `|a(θ)ᴴ a(θ_p)|²`, evaluated as an explicit inner product.
pub fn beam_alignment_gain(theta_true: f64, theta_point: f64, n_antennas: usize) -> Result<f64> {
    check_angle(theta_true)?;
    check_angle(theta_point)?;
    if n_antennas == 0 {
        return Err(Error::InvalidArgument("antenna count must be positive"));
    }
    let scale = 1.0 / libm::sqrt(n_antennas as f64);
    let (ct, cp) = (libm::cos(theta_true), libm::cos(theta_point));
    let inner: Complex64 = (0..n_antennas)
        .map(|m| steering_entry(m, ct, scale).conj() * steering_entry(m, cp, scale))
        .sum();
    Ok(inner.norm_sqr())
}

/// Closed-form array factor `(sin(Nπψ/2) / (N sin(πψ/2)))²` with
/// `ψ = cos θ − cos θ_p`.
///
/// Near the removable singularities (`ψ ∈ 2ℤ`) the second-order series
/// `1 − (N²−1)δ²/3` is used, `δ` being the offset from the nearest pole.
pub fn dirichlet_gain(psi: f64, n_antennas: usize) -> f64 {
    let n = n_antennas as f64;
    let x = PI * psi / 2.0;
    let s = libm::sin(x);
    if libm::fabs(s) < 1e-8 {
        let delta = x - libm::round(x / PI) * PI;
        return 1.0 - (n * n - 1.0) * delta * delta / 3.0;
    }
    let r = libm::sin(n * x) / (n * s);
    r * r
}

/// `α₀ (d / d₀)^{-ζ}`.
pub fn path_loss(d: f64, params: &ChannelParams) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidArgument("distance must be positive"));
    }
    Ok(params.ref_path_loss * libm::pow(d / params.ref_distance, -params.path_loss_exp))
}

fn check_power(p: f64) -> Result<()> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("power must be non-negative"))
    }
}

/// Interference-free SNR of one user served by a beam pointed at `theta_point`.
pub fn user_snr(
    theta_true: f64,
    theta_point: f64,
    d: f64,
    p: f64,
    params: &ChannelParams,
) -> Result<f64> {
    check_power(p)?;
    let alpha = path_loss(d, params)?;
    let gain = beam_alignment_gain(theta_true, theta_point, params.num_tx_antennas)?;
    Ok(p * params.tx_gain_sq() * alpha * gain / params.noise_power)
}

/// Full SINR of user `user_index` including inter-user leakage through
/// the other users' beams.
pub fn user_sinr(
    user_index: usize,
    thetas_true: &[f64],
    beams: &[BeamVector],
    dists: &[f64],
    params: &ChannelParams,
) -> Result<f64> {
    let k = thetas_true.len();
    if k == 0 {
        return Err(Error::InvalidArgument("at least one user required"));
    }
    check_len("beams", k, beams.len())?;
    check_len("distances", k, dists.len())?;
    if user_index >= k {
        return Err(Error::IndexOutOfRange { index: user_index, len: k });
    }
    let a = tx_steering(thetas_true[user_index], params.num_tx_antennas)?;
    let coupling = params.tx_gain_sq() * path_loss(dists[user_index], params)?;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, beam) in beams.iter().enumerate() {
        let received = coupling * a.inner(&beam.entries)?.norm_sqr();
        if j == user_index {
            signal = received;
        } else {
            interference += received;
        }
    }
    Ok(signal / (interference + params.noise_power))
}

/// `Σ_k log2(1 + SNR_k)` under the orthogonal-beam approximation.
pub fn sum_rate(
    thetas_true: &[f64],
    thetas_point: &[f64],
    dists: &[f64],
    powers: &[f64],
    params: &ChannelParams,
) -> Result<f64> {
    let k = thetas_true.len();
    check_len("pointing angles", k, thetas_point.len())?;
    check_len("distances", k, dists.len())?;
    check_len("powers", k, powers.len())?;
    let mut total = 0.0;
    for i in 0..k {
        let snr = user_snr(thetas_true[i], thetas_point[i], dists[i], powers[i], params)?;
        total += libm::log2(1.0 + snr);
    }
    Ok(total)
}

/// Sum-rate with every user's full SINR. Diagnostic counterpart of [`sum_rate`].
pub fn sum_rate_with_interference(
    thetas_true: &[f64],
    beams: &[BeamVector],
    dists: &[f64],
    params: &ChannelParams,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..thetas_true.len() {
        total += libm::log2(1.0 + user_sinr(k, thetas_true, beams, dists, params)?);
    }
    Ok(total)
}

/// `sqrt(p) a(θ_p)` over the transmit array.
pub fn beamformer_from_angle(theta_point: f64, p: f64, params: &ChannelParams) -> Result<BeamVector> {
    check_power(p)?;
    let a = tx_steering(theta_point, params.num_tx_antennas)?;
    let amp = libm::sqrt(p);
    Ok(BeamVector {
        entries: a.entries.into_iter().map(|z| z * amp).collect(),
        power: p,
    })
}
