//! Adaptive-moment parameter updates with bias correction.

use super::{cast, ClrnetParams, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub first_moment: ClrnetParams<T>,
    pub second_moment: ClrnetParams<T>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &ClrnetParams<T>, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Learning rate 1e-3, decays 0.9 / 0.999, epsilon 1e-8.
    pub fn with_defaults(params: &ClrnetParams<T>) -> Self {
        Self::new(params, 1e-3, 0.9, 0.999, 1e-8)
    }
}

/// One update in place. Non-finite gradients leave everything untouched
/// and report divergence.
pub fn optimizer_step<T: Real>(
    params: &mut ClrnetParams<T>,
    grads: &ClrnetParams<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if params.num_params() != grads.num_params() || params.num_params() != state.first_moment.num_params() {
        return Err(Error::ShapeMismatch {
            what: "optimizer tensors",
            expected: params.num_params(),
            got: grads.num_params(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged {
            iteration: state.step as usize,
            trace: alloc::vec::Vec::new(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let b1: T = cast(state.beta1);
    let b2: T = cast(state.beta2);
    let one = T::one();
    let correction1: T = cast(1.0 - libm::pow(state.beta1, t as f64));
    let correction2: T = cast(1.0 - libm::pow(state.beta2, t as f64));
    let lr: T = cast(state.learning_rate);
    let eps: T = cast(state.epsilon);
    let moments = state.first_moment.iter_mut().zip(state.second_moment.iter_mut());
    for ((p, g), (m, v)) in params.iter_mut().zip(grads.iter()).zip(moments) {
        *m = b1 * *m + (one - b1) * *g;
        *v = b2 * *v + (one - b2) * *g * *g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
