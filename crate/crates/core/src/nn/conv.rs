//! 2×2 valid convolution over the per-slot `(K/2)×2` angle map, with ReLU.

use alloc::vec::Vec;

use super::{cast, ClrnetArch, ClrnetParams, Normalization, Real, KERNEL_COLS, KERNEL_LEN, KERNEL_ROWS};
use crate::error::{check_len, Result};

/// Normalized, zero-padded input map, row-major with `KERNEL_COLS` columns.
/// Vehicle `k` lands at row `k / 2`, column `k % 2`.
pub(crate) fn input_map<T: Real>(slot: &[f64], arch: &ClrnetArch, norm: &Normalization) -> Vec<T> {
    let mut map = alloc::vec![T::zero(); arch.map_rows() * KERNEL_COLS];
    for (dst, x) in map.iter_mut().zip(slot) {
        *dst = cast((x - norm.input_mean) / norm.input_scale);
    }
    map
}

/// Pre-activation outputs, filter-major: `out[f * positions + i]`.
pub(crate) fn conv_pre<T: Real>(map: &[T], params: &ClrnetParams<T>, arch: &ClrnetArch) -> Vec<T> {
    let positions = arch.conv_positions();
    let mut out = Vec::with_capacity(arch.feature_len());
    for f in 0..arch.conv_filters {
        let w = &params.conv_w[f * KERNEL_LEN..(f + 1) * KERNEL_LEN];
        for i in 0..positions {
            let mut acc = params.conv_b[f];
            for r in 0..KERNEL_ROWS {
                for c in 0..KERNEL_COLS {
                    acc += w[r * KERNEL_COLS + c] * map[(i + r) * KERNEL_COLS + c];
                }
            }
            out.push(acc);
        }
    }
    out
}

#[inline]
pub(crate) fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Conv layer on one slot of K angles: reshape, filter, ReLU, flatten.
pub fn conv_forward<T: Real>(slot_input: &[f64], params: &ClrnetParams<T>, arch: &ClrnetArch) -> Result<Vec<T>> {
    check_len("conv input", arch.num_vehicles, slot_input.len())?;
    check_len("conv_w", arch.conv_filters * KERNEL_LEN, params.conv_w.len())?;
    check_len("conv_b", arch.conv_filters, params.conv_b.len())?;
    let map = input_map(slot_input, arch, &params.norm);
    Ok(conv_pre(&map, params, arch).into_iter().map(relu).collect())
}

/// Accumulates kernel and bias gradients given `d loss / d features`.
pub(crate) fn conv_backward<T: Real>(
    map: &[T],
    pre: &[T],
    d_features: &[T],
    arch: &ClrnetArch,
    grads: &mut ClrnetParams<T>,
) {
    let positions = arch.conv_positions();
    for f in 0..arch.conv_filters {
        for i in 0..positions {
            let idx = f * positions + i;
            if pre[idx] <= T::zero() {
                continue;
            }
            let d = d_features[idx];
            grads.conv_b[f] += d;
            for r in 0..KERNEL_ROWS {
                for c in 0..KERNEL_COLS {
                    grads.conv_w[f * KERNEL_LEN + r * KERNEL_COLS + c] += d * map[(i + r) * KERNEL_COLS + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn zero_weights_give_zero_features() {
        let arch = ClrnetArch::new(8, 1);
        let p = ClrnetParams::<f64>::zeros(&arch);
        let out = conv_forward(&[0.3; 8], &p, &arch).unwrap();
        assert_eq!(out, alloc::vec![0.0; 12]);
    }

    #[test]
    fn identity_tap_reads_top_left() {
        let mut arch = ClrnetArch::new(8, 1);
        arch.conv_filters = 1;
        let mut p = ClrnetParams::<f64>::zeros(&arch);
        p.conv_w.copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let input = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        // Top-left of window i is map[i][0] = input[2i].
        assert_eq!(conv_forward(&input, &p, &arch).unwrap(), alloc::vec![0.1, 0.3, 0.5]);
    }

    #[test]
    fn odd_vehicle_count_is_zero_padded() {
        let mut arch = ClrnetArch::new(5, 1);
        arch.conv_filters = 1;
        let mut p = ClrnetParams::<f64>::zeros(&arch);
        p.conv_w.copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
        let out = conv_forward(&[1.0, 2.0, 3.0, 4.0, 5.0], &p, &arch).unwrap();
        assert_eq!(out, alloc::vec![4.0, 0.0]);
    }

    #[test]
    fn matches_direct_summation() {
        let arch = ClrnetArch::new(8, 1);
        let mut rng = stream(11, Purpose::Init, 0);
        for _ in 0..20 {
            let mut p = ClrnetParams::<f64>::init(&arch, &mut rng);
            for b in p.conv_b.iter_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
            let x: alloc::vec::Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = conv_forward(&x, &p, &arch).unwrap();
            // Direct 2-D indexing: grid[row][col] = x[2 row + col].
            let grid = |r: usize, c: usize| x[2 * r + c];
            for f in 0..4 {
                for i in 0..3 {
                    let mut s = p.conv_b[f];
                    s += p.conv_w[f * 4] * grid(i, 0);
                    s += p.conv_w[f * 4 + 1] * grid(i, 1);
                    s += p.conv_w[f * 4 + 2] * grid(i + 1, 0);
                    s += p.conv_w[f * 4 + 3] * grid(i + 1, 1);
                    let expected = if s > 0.0 { s } else { 0.0 };
                    assert!((got[f * 3 + i] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_input_length() {
        let arch = ClrnetArch::new(8, 1);
        let p = ClrnetParams::<f64>::zeros(&arch);
        assert!(conv_forward(&[0.0; 7], &p, &arch).is_err());
    }
}
