//! Convolutional LSTM angle predictor (CLRNet), written out by hand.
//!
//! Per time step the K angle estimates are laid out as a `(K/2)×2` map,
//! convolved with `F` 2×2 filters (valid, stride 1, ReLU) and flattened.
//! The features drive one LSTM cell whose last hidden state goes through
//! a linear layer to produce the K predicted angles.
//!
//! All layers are generic over [`Real`] so training can run in `f64` or `f32`.

use alloc::vec::Vec;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

pub mod adam;
pub mod conv;
pub mod loss;
pub mod lstm;
pub mod network;
pub mod train;

pub use adam::{optimizer_step, OptimizerState};
pub use conv::conv_forward;
pub use loss::mse_loss;
pub use lstm::{lstm_step, LstmState};
pub use network::{backward, clrnet_forward, Clrnet, ForwardTape};
pub use train::{train, TrainConfig, TrainOutcome};

/// Floating-point scalar the network can be trained in.
pub trait Real:
    Float + FromPrimitive + Sum + AddAssign + SubAssign + MulAssign + Debug + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 converts to every Real")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("Real converts to f64")
}

/// Layer sizes. `lstm_hidden` is 8 and the kernel is 2×2 by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClrnetArch {
    pub num_vehicles: usize,
    pub window: usize,
    pub conv_filters: usize,
    pub lstm_hidden: usize,
}

pub const KERNEL_ROWS: usize = 2;
pub const KERNEL_COLS: usize = 2;
pub const KERNEL_LEN: usize = KERNEL_ROWS * KERNEL_COLS;

impl ClrnetArch {
    pub fn new(num_vehicles: usize, window: usize) -> Self {
        Self {
            num_vehicles,
            window,
            conv_filters: 4,
            lstm_hidden: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vehicles == 0 || self.window == 0 || self.conv_filters == 0 || self.lstm_hidden == 0 {
            return Err(Error::InvalidArgument("architecture sizes must be positive"));
        }
        Ok(())
    }

    /// Rows of the per-slot input map. Odd K is zero-padded; at least two
    /// rows so the 2×2 kernel has one valid position.
    pub fn map_rows(&self) -> usize {
        self.num_vehicles.div_ceil(KERNEL_COLS).max(KERNEL_ROWS)
    }

    /// Valid positions of the kernel along the map.
    pub fn conv_positions(&self) -> usize {
        self.map_rows() - KERNEL_ROWS + 1
    }

    /// Flattened conv output, the LSTM input width.
    pub fn feature_len(&self) -> usize {
        self.conv_filters * self.conv_positions()
    }

    pub fn fc_out(&self) -> usize {
        self.num_vehicles
    }

    pub fn gate_rows(&self) -> usize {
        4 * self.lstm_hidden
    }
}

/// Affine standardization folded around the network. Identity by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub input_mean: f64,
    pub input_scale: f64,
    pub output_mean: f64,
    pub output_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            input_mean: 0.0,
            input_scale: 1.0,
            output_mean: 0.0,
            output_scale: 1.0,
        }
    }
}

impl Normalization {
    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.input_mean, self.input_scale, self.output_mean, self.output_scale]
            .iter()
            .all(|v| v.is_finite())
            && self.input_scale > 0.0
            && self.output_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("normalization constants must be finite with positive scales"))
        }
    }
}

pub const TENSOR_NAMES: [&str; 7] = ["conv_w", "conv_b", "lstm_wx", "lstm_wh", "lstm_b", "fc_w", "fc_b"];

/// Every trainable weight. Matrices are row-major:
/// `conv_w[f][r][c]`, `lstm_wx[gate·H + h][d]`, `lstm_wh[gate·H + h][h']`,
/// `fc_w[k][h]`, with gates ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrnetParams<T> {
    pub conv_w: Vec<T>,
    pub conv_b: Vec<T>,
    pub lstm_wx: Vec<T>,
    pub lstm_wh: Vec<T>,
    pub lstm_b: Vec<T>,
    pub fc_w: Vec<T>,
    pub fc_b: Vec<T>,
    pub norm: Normalization,
}

impl<T: Real> ClrnetParams<T> {
    /// `(rows, cols)` of each tensor, in [`TENSOR_NAMES`] order.
    pub fn shapes(arch: &ClrnetArch) -> [(usize, usize); 7] {
        let f = arch.conv_filters;
        let g = arch.gate_rows();
        [
            (f, KERNEL_LEN),
            (f, 1),
            (g, arch.feature_len()),
            (g, arch.lstm_hidden),
            (g, 1),
            (arch.fc_out(), arch.lstm_hidden),
            (arch.fc_out(), 1),
        ]
    }

    pub fn zeros(arch: &ClrnetArch) -> Self {
        let s = Self::shapes(arch);
        let z = |i: usize| alloc::vec![T::zero(); s[i].0 * s[i].1];
        Self {
            conv_w: z(0),
            conv_b: z(1),
            lstm_wx: z(2),
            lstm_wh: z(3),
            lstm_b: z(4),
            fc_w: z(5),
            fc_b: z(6),
            norm: Normalization::default(),
        }
    }

    /// Weights `U(−1/√fan_in, 1/√fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: &ClrnetArch, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        let mut fill = |w: &mut Vec<T>, fan_in: usize| {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for x in w.iter_mut() {
                *x = cast(dist.sample(rng));
            }
        };
        fill(&mut p.conv_w, KERNEL_LEN);
        fill(&mut p.lstm_wx, arch.feature_len());
        fill(&mut p.lstm_wh, arch.lstm_hidden);
        fill(&mut p.fc_w, arch.lstm_hidden);
        p
    }

    pub fn tensors(&self) -> [&Vec<T>; 7] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.lstm_wx,
            &self.lstm_wh,
            &self.lstm_b,
            &self.fc_w,
            &self.fc_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 7] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.lstm_wx,
            &mut self.lstm_wh,
            &mut self.lstm_b,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.tensors().into_iter().flat_map(|t| t.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.tensors_mut().into_iter().flat_map(|t| t.iter_mut())
    }

    /// Checks every tensor against `arch` and that all values are finite.
    pub fn check(&self, arch: &ClrnetArch) -> Result<()> {
        arch.validate()?;
        self.norm.validate()?;
        for ((t, (r, c)), name) in self.tensors().iter().zip(Self::shapes(arch)).zip(TENSOR_NAMES) {
            if t.len() != r * c {
                return Err(Error::ShapeMismatch {
                    what: name,
                    expected: r * c,
                    got: t.len(),
                });
            }
        }
        if self.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite"));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ClrnetParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| cast::<U>(to_f64(*x))).collect();
        ClrnetParams {
            conv_w: conv(&self.conv_w),
            conv_b: conv(&self.conv_b),
            lstm_wx: conv(&self.lstm_wx),
            lstm_wh: conv(&self.lstm_wh),
            lstm_b: conv(&self.lstm_b),
            fc_w: conv(&self.fc_w),
            fc_b: conv(&self.fc_b),
            norm: self.norm,
        }
    }

    /// Zero tensors shaped like `self`, carrying the same normalization.
    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<T>| alloc::vec![T::zero(); v.len()];
        Self {
            conv_w: z(&self.conv_w),
            conv_b: z(&self.conv_b),
            lstm_wx: z(&self.lstm_wx),
            lstm_wh: z(&self.lstm_wh),
            lstm_b: z(&self.lstm_b),
            fc_w: z(&self.fc_w),
            fc_b: z(&self.fc_b),
            norm: self.norm,
        }
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += scale * *b;
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn default_geometry() {
        let a = ClrnetArch::new(8, 6);
        assert_eq!(a.map_rows(), 4);
        assert_eq!(a.conv_positions(), 3);
        assert_eq!(a.feature_len(), 12);
        let odd = ClrnetArch::new(7, 6);
        assert_eq!(odd.map_rows(), 4);
        let tiny = ClrnetArch::new(1, 1);
        assert_eq!(tiny.map_rows(), 2);
        assert_eq!(tiny.conv_positions(), 1);
    }

    #[test]
    fn init_shapes_and_bounds() {
        let arch = ClrnetArch::new(8, 6);
        let mut rng = stream(1, Purpose::Init, 0);
        let p = ClrnetParams::<f64>::init(&arch, &mut rng);
        p.check(&arch).unwrap();
        assert_eq!(p.num_params(), 16 + 4 + 32 * 12 + 32 * 8 + 32 + 64 + 8);
        assert!(p.conv_b.iter().chain(&p.lstm_b).chain(&p.fc_b).all(|b| *b == 0.0));
        assert!(p.lstm_wx.iter().all(|w| w.abs() <= 1.0 / 12f64.sqrt()));
        let mut bad = p.clone();
        bad.fc_b.pop();
        assert!(matches!(bad.check(&arch), Err(Error::ShapeMismatch { what: "fc_b", .. })));
    }
}
