//! Finite-difference check of the analytic CLRNet gradient.

use isac_core::nn::{backward, clrnet_forward, ClrnetArch, ClrnetParams, Normalization};
use isac_core::rng::{stream, Purpose};
use isac_core::sensing::AngleHistory;
use rand::Rng;

pub const FD_STEP: f64 = 1e-6;
/// Floor on the denominator of the relative error, so parameters with a
/// vanishing gradient are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub trial: u64,
    pub params_checked: usize,
    pub max_rel_error: f64,
}

fn loss(history: &AngleHistory, label: &[f64], params: &ClrnetParams<f64>, arch: &ClrnetArch) -> f64 {
    let out = clrnet_forward(history, params, arch).expect("shapes checked").output;
    0.5 * out.iter().zip(label).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Draws a random network, input and label from `seed` and compares every
/// parameter's central difference with the backpropagated gradient.
pub fn check_one(arch: &ClrnetArch, seed: u64) -> isac_core::Result<GradCheck> {
    arch.validate()?;
    let mut rng = stream(seed, Purpose::Init, 1);
    let mut params = ClrnetParams::<f64>::init(arch, &mut rng);
    for b in params.conv_b.iter_mut().chain(&mut params.lstm_b).chain(&mut params.fc_b) {
        *b = rng.random_range(-0.5..0.5);
    }
    if seed % 2 == 1 {
        params.norm = Normalization {
            input_mean: 0.4,
            input_scale: 0.05,
            output_mean: 0.4,
            output_scale: 0.05,
        };
    }
    let k = arch.num_vehicles;
    let values: Vec<f64> = (0..k * arch.window).map(|_| rng.random_range(0.2..0.6)).collect();
    let columns: Vec<Vec<f64>> = (0..arch.window)
        .map(|j| (0..k).map(|v| values[v * arch.window + j]).collect())
        .collect();
    let history = AngleHistory::from_columns(&columns, arch.window)?;
    let label: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..0.6)).collect();

    let tape = clrnet_forward(&history, &params, arch)?;
    let grads = backward(&tape, &label, &params, arch)?;
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut max_rel = 0.0f64;
    for (i, g) in analytic.iter().enumerate() {
        let original = *params.iter().nth(i).expect("index in range");
        let mut probe = params.clone();
        *probe.iter_mut().nth(i).expect("index in range") = original + FD_STEP;
        let up = loss(&history, &label, &probe, arch);
        *probe.iter_mut().nth(i).expect("index in range") = original - FD_STEP;
        let down = loss(&history, &label, &probe, arch);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (numeric - g).abs() / numeric.abs().max(g.abs()).max(REL_FLOOR);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheck {
        trial: seed,
        params_checked: analytic.len(),
        max_rel_error: max_rel,
    })
}

pub fn check_many(arch: &ClrnetArch, trials: u64, base_seed: u64) -> isac_core::Result<Vec<GradCheck>> {
    (0..trials).map(|t| check_one(arch, base_seed.wrapping_add(t))).collect()
}
