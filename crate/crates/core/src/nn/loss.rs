use super::{cast, Real};
use crate::error::{check_len, Error, Result};
use alloc::vec::Vec;

/// `1/(2N) Σᵢ ‖Θᵢ − Θ̂ᵢ‖²` over a batch of N examples.
pub fn mse_loss<T: Real>(predictions: &[Vec<T>], labels: &[Vec<T>]) -> Result<T> {
    check_len("loss batch", labels.len(), predictions.len())?;
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("loss needs a non-empty batch"));
    }
    let mut total = T::zero();
    for (p, l) in predictions.iter().zip(labels) {
        check_len("loss example", l.len(), p.len())?;
        total += p.iter().zip(l).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>();
    }
    Ok(total / (cast::<T>(2.0) * cast::<T>(predictions.len() as f64)))
}
