//! Full CLRNet: conv → LSTM unrolled over the window → linear head.

use alloc::vec::Vec;

use super::conv::{conv_backward, conv_pre, input_map, relu};
use super::lstm::{step_backward, step_cached, GateCache, LstmState};
use super::{cast, ClrnetArch, ClrnetParams, Real};
use crate::error::{check_len, Result};
use crate::sensing::AngleHistory;

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTape<T> {
    pub arch: ClrnetArch,
    /// Per time step, oldest slot first.
    pub(crate) maps: Vec<Vec<T>>,
    pub(crate) conv_pre: Vec<Vec<T>>,
    pub(crate) features: Vec<Vec<T>>,
    /// `states[0]` is the zero initial state, `states[λ + 1]` follows step λ.
    pub(crate) states: Vec<LstmState<T>>,
    pub(crate) gates: Vec<GateCache<T>>,
    /// Predicted angles in radians.
    pub output: Vec<T>,
}

impl<T: Real> ForwardTape<T> {
    /// Hidden state after the last time step.
    pub fn final_hidden(&self) -> &[T] {
        &self.states[self.states.len() - 1].hidden
    }

    /// Re-applies the linear head to the cached final hidden state.
    pub fn replay(&self, params: &ClrnetParams<T>) -> Vec<T> {
        head(self.final_hidden(), params, &self.arch)
    }
}

fn head<T: Real>(hidden: &[T], params: &ClrnetParams<T>, arch: &ClrnetArch) -> Vec<T> {
    let h = arch.lstm_hidden;
    let scale: T = cast(params.norm.output_scale);
    let mean: T = cast(params.norm.output_mean);
    (0..arch.fc_out())
        .map(|k| {
            let mut acc = params.fc_b[k];
            for (w, x) in params.fc_w[k * h..(k + 1) * h].iter().zip(hidden) {
                acc += *w * *x;
            }
            mean + scale * acc
        })
        .collect()
}

fn check_history(history: &AngleHistory, arch: &ClrnetArch) -> Result<()> {
    check_len("history vehicles", arch.num_vehicles, history.num_vehicles)?;
    check_len("history window", arch.window, history.window)?;
    check_len("history values", arch.num_vehicles * arch.window, history.values.len())
}

/// `Θ_P = f(Ω)`. Slots are fed oldest first; the last hidden state feeds
/// the linear head.
pub fn clrnet_forward<T: Real>(
    history: &AngleHistory,
    params: &ClrnetParams<T>,
    arch: &ClrnetArch,
) -> Result<ForwardTape<T>> {
    params.check(arch)?;
    check_history(history, arch)?;
    let tau = arch.window;
    let mut tape = ForwardTape {
        arch: *arch,
        maps: Vec::with_capacity(tau),
        conv_pre: Vec::with_capacity(tau),
        features: Vec::with_capacity(tau),
        states: Vec::with_capacity(tau + 1),
        gates: Vec::with_capacity(tau),
        output: Vec::new(),
    };
    tape.states.push(LstmState::zeros(arch.lstm_hidden));
    for step in 0..tau {
        let column = history.column(tau - 1 - step);
        let map = input_map::<T>(&column, arch, &params.norm);
        let pre = conv_pre(&map, params, arch);
        let features: Vec<T> = pre.iter().map(|v| relu(*v)).collect();
        let (next, gates) = step_cached(&features, &tape.states[step], params, arch);
        tape.maps.push(map);
        tape.conv_pre.push(pre);
        tape.features.push(features);
        tape.states.push(next);
        tape.gates.push(gates);
    }
    tape.output = head(tape.final_hidden(), params, arch);
    Ok(tape)
}

/// Adds the gradient of `½‖output − label‖²` to `grads` and returns that loss.
pub(crate) fn accumulate_gradient<T: Real>(
    tape: &ForwardTape<T>,
    label: &[T],
    params: &ClrnetParams<T>,
    grads: &mut ClrnetParams<T>,
) -> T {
    let arch = &tape.arch;
    let h = arch.lstm_hidden;
    let scale: T = cast(params.norm.output_scale);
    let half: T = cast(0.5);

    let mut loss = T::zero();
    let mut d_hidden = alloc::vec![T::zero(); h];
    let hidden = tape.final_hidden();
    for k in 0..arch.fc_out() {
        let err = tape.output[k] - label[k];
        loss += half * err * err;
        let d_pre = err * scale;
        grads.fc_b[k] += d_pre;
        for j in 0..h {
            grads.fc_w[k * h + j] += d_pre * hidden[j];
            d_hidden[j] += d_pre * params.fc_w[k * h + j];
        }
    }

    let mut d_cell = alloc::vec![T::zero(); h];
    for step in (0..arch.window).rev() {
        let (d_features, dh, dc) = step_backward(
            &tape.features[step],
            &tape.states[step],
            &tape.gates[step],
            &d_hidden,
            &d_cell,
            params,
            arch,
            grads,
        );
        conv_backward(&tape.maps[step], &tape.conv_pre[step], &d_features, arch, grads);
        d_hidden = dh;
        d_cell = dc;
    }
    loss
}

/// Exact gradient of the per-example loss `½‖Θ − f(Ω)‖²` with respect to
/// every parameter, by backpropagation through time.
pub fn backward<T: Real>(
    tape: &ForwardTape<T>,
    label: &[f64],
    params: &ClrnetParams<T>,
    arch: &ClrnetArch,
) -> Result<ClrnetParams<T>> {
    params.check(arch)?;
    if tape.arch != *arch {
        return Err(crate::Error::ShapeMismatch {
            what: "tape architecture",
            expected: arch.num_vehicles * arch.window,
            got: tape.arch.num_vehicles * tape.arch.window,
        });
    }
    check_len("tape steps", arch.window, tape.features.len())?;
    check_len("label", arch.fc_out(), label.len())?;
    let label: Vec<T> = label.iter().map(|x| cast(*x)).collect();
    let mut grads = params.zeros_like();
    accumulate_gradient(tape, &label, params, &mut grads);
    Ok(grads)
}

/// A frozen network ready for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Clrnet {
    pub arch: ClrnetArch,
    pub params: ClrnetParams<f64>,
}

impl Clrnet {
    pub fn new(arch: ClrnetArch, params: ClrnetParams<f64>) -> Result<Self> {
        params.check(&arch)?;
        Ok(Self { arch, params })
    }

    pub fn predict(&self, history: &AngleHistory) -> Result<Vec<f64>> {
        Ok(clrnet_forward(history, &self.params, &self.arch)?.output)
    }
}
