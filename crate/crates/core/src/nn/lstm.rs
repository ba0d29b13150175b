//! One LSTM cell with input, forget, candidate and output gates.

use alloc::vec::Vec;

use super::{sigmoid, ClrnetArch, ClrnetParams, Real};
use crate::error::{check_len, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub hidden: Vec<T>,
    pub cell: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden: alloc::vec![T::zero(); hidden],
            cell: alloc::vec![T::zero(); hidden],
        }
    }
}

/// Gate activations cached for backpropagation. Each vector has length H.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GateCache<T> {
    pub input: Vec<T>,
    pub forget: Vec<T>,
    pub candidate: Vec<T>,
    pub output: Vec<T>,
    pub cell_tanh: Vec<T>,
}

pub(crate) fn step_cached<T: Real>(
    features: &[T],
    prev: &LstmState<T>,
    params: &ClrnetParams<T>,
    arch: &ClrnetArch,
) -> (LstmState<T>, GateCache<T>) {
    let h = arch.lstm_hidden;
    let d = features.len();
    let mut z = params.lstm_b.clone();
    for (row, zr) in z.iter_mut().enumerate() {
        let wx = &params.lstm_wx[row * d..(row + 1) * d];
        let wh = &params.lstm_wh[row * h..(row + 1) * h];
        let mut acc = T::zero();
        for (w, x) in wx.iter().zip(features) {
            acc += *w * *x;
        }
        for (w, x) in wh.iter().zip(&prev.hidden) {
            acc += *w * *x;
        }
        *zr += acc;
    }
    let input: Vec<T> = z[..h].iter().map(|v| sigmoid(*v)).collect();
    let forget: Vec<T> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
    let candidate: Vec<T> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
    let output: Vec<T> = z[3 * h..].iter().map(|v| sigmoid(*v)).collect();
    let cell: Vec<T> = (0..h)
        .map(|j| forget[j] * prev.cell[j] + input[j] * candidate[j])
        .collect();
    let cell_tanh: Vec<T> = cell.iter().map(|c| c.tanh()).collect();
    let hidden = (0..h).map(|j| output[j] * cell_tanh[j]).collect();
    (
        LstmState { hidden, cell },
        GateCache {
            input,
            forget,
            candidate,
            output,
            cell_tanh,
        },
    )
}

/// `c = f⊙c₋ + i⊙g`, `h = o⊙tanh(c)` with sigmoid gates and tanh candidate.
pub fn lstm_step<T: Real>(
    features: &[T],
    prev: &LstmState<T>,
    params: &ClrnetParams<T>,
    arch: &ClrnetArch,
) -> Result<LstmState<T>> {
    check_len("lstm features", arch.feature_len(), features.len())?;
    check_len("lstm hidden", arch.lstm_hidden, prev.hidden.len())?;
    check_len("lstm cell", arch.lstm_hidden, prev.cell.len())?;
    check_len("lstm_wx", arch.gate_rows() * arch.feature_len(), params.lstm_wx.len())?;
    check_len("lstm_wh", arch.gate_rows() * arch.lstm_hidden, params.lstm_wh.len())?;
    check_len("lstm_b", arch.gate_rows(), params.lstm_b.len())?;
    Ok(step_cached(features, prev, params, arch).0)
}

/// Backpropagates one cell. Takes `dL/dh` and `dL/dc` at the cell output,
/// accumulates weight gradients and returns `(dL/dfeatures, dL/dh₋, dL/dc₋)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_backward<T: Real>(
    features: &[T],
    prev: &LstmState<T>,
    cache: &GateCache<T>,
    d_hidden: &[T],
    d_cell: &[T],
    params: &ClrnetParams<T>,
    arch: &ClrnetArch,
    grads: &mut ClrnetParams<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let h = arch.lstm_hidden;
    let d = features.len();
    let one = T::one();
    let mut dz = alloc::vec![T::zero(); 4 * h];
    let mut d_cell_prev = alloc::vec![T::zero(); h];
    for j in 0..h {
        let (i, f, g, o, tc) = (
            cache.input[j],
            cache.forget[j],
            cache.candidate[j],
            cache.output[j],
            cache.cell_tanh[j],
        );
        let d_o = d_hidden[j] * tc;
        let dc = d_cell[j] + d_hidden[j] * o * (one - tc * tc);
        dz[j] = dc * g * i * (one - i);
        dz[h + j] = dc * prev.cell[j] * f * (one - f);
        dz[2 * h + j] = dc * i * (one - g * g);
        dz[3 * h + j] = d_o * o * (one - o);
        d_cell_prev[j] = dc * f;
    }
    let mut d_features = alloc::vec![T::zero(); d];
    let mut d_hidden_prev = alloc::vec![T::zero(); h];
    for (row, &g) in dz.iter().enumerate() {
        grads.lstm_b[row] += g;
        let wx = &params.lstm_wx[row * d..(row + 1) * d];
        let gwx = &mut grads.lstm_wx[row * d..(row + 1) * d];
        for c in 0..d {
            gwx[c] += g * features[c];
            d_features[c] += g * wx[c];
        }
        let wh = &params.lstm_wh[row * h..(row + 1) * h];
        let gwh = &mut grads.lstm_wh[row * h..(row + 1) * h];
        for c in 0..h {
            gwh[c] += g * prev.hidden[c];
            d_hidden_prev[c] += g * wh[c];
        }
    }
    (d_features, d_hidden_prev, d_cell_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn small_arch() -> ClrnetArch {
        ClrnetArch {
            num_vehicles: 4,
            window: 2,
            conv_filters: 2,
            lstm_hidden: 8,
        }
    }

    #[test]
    fn zero_params_zero_state() {
        let arch = small_arch();
        let p = ClrnetParams::<f64>::zeros(&arch);
        let (s, cache) = step_cached(&[0.7, -0.2], &LstmState::zeros(8), &p, &arch);
        assert!(s.hidden.iter().chain(&s.cell).all(|v| *v == 0.0));
        assert!(cache.input.iter().all(|v| *v == 0.5));
        assert!(cache.candidate.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let arch = small_arch();
        let mut p = ClrnetParams::<f64>::zeros(&arch);
        for b in &mut p.lstm_b[8..16] {
            *b = 50.0;
        }
        let prev = LstmState {
            hidden: alloc::vec![0.0; 8],
            cell: (0..8).map(|j| j as f64 * 0.1 - 0.3).collect(),
        };
        let s = lstm_step(&[0.4, 0.9], &prev, &p, &arch).unwrap();
        for (a, b) in s.cell.iter().zip(&prev.cell) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_transcribed_equations() {
        let arch = small_arch();
        let mut rng = stream(21, Purpose::Init, 0);
        let mut p = ClrnetParams::<f64>::init(&arch, &mut rng);
        for b in p.lstm_b.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
        let x = [0.3, -0.8];
        let prev = LstmState {
            hidden: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            cell: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let got = lstm_step(&x, &prev, &p, &arch).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |gate: usize, j: usize| {
            let row = gate * 8 + j;
            let mut s = p.lstm_b[row];
            for c in 0..2 {
                s += p.lstm_wx[row * 2 + c] * x[c];
            }
            for c in 0..8 {
                s += p.lstm_wh[row * 8 + c] * prev.hidden[c];
            }
            s
        };
        for j in 0..8 {
            let i = sig(pre(0, j));
            let f = sig(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sig(pre(3, j));
            let c = f * prev.cell[j] + i * g;
            let h = o * c.tanh();
            assert!((got.cell[j] - c).abs() < 1e-12);
            assert!((got.hidden[j] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let arch = small_arch();
        let p = ClrnetParams::<f64>::zeros(&arch);
        assert!(lstm_step(&[0.0; 3], &LstmState::zeros(8), &p, &arch).is_err());
        assert!(lstm_step(&[0.0; 2], &LstmState::zeros(7), &p, &arch).is_err());
    }
}
