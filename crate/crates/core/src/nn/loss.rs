//! Loss reductions accumulate in `f64` regardless of the scalar type.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Mean of squared element differences.
pub fn mse<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x.f64() - y.f64()).powi(2)).sum();
    Ok(sum / a.len() as f64)
}

/// Gradient of `scale * mse(a, b)` with respect to `a`, added into `out`.
pub fn mse_grad_into<S: Scalar>(a: &[S], b: &[S], scale: f64, out: &mut [S]) {
    let k = S::of(2.0 * scale / a.len() as f64);
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += k * (*x - *y);
    }
}

/// `-ln p[label]`, with the probability floored at the smallest positive normal.
pub fn cross_entropy<S: Scalar>(probs: &[S], label: usize) -> f64 {
    -probs[label].f64().max(f64::MIN_POSITIVE).ln()
}

/// Gradient of cross-entropy with respect to the logits that produced `probs` through softmax.
pub fn softmax_cross_entropy_grad<S: Scalar>(probs: &[S], label: usize, scale: S) -> Vec<S> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| scale * if i == label { p - S::one() } else { p })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let x = [0.3f64, -1.0, 2.0];
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(mse(&[0.0f64, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert!(mse(&[0.0f32], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_cross_entropy_is_ln4() {
        let p = [0.25f64; 4];
        for label in 0..4 {
            assert!((cross_entropy(&p, label) - 4f64.ln()).abs() < 1e-12);
        }
        assert!((4f64.ln() - 1.3863).abs() < 1e-4);
    }
}
