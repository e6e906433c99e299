//! Mean binary cross-entropy and mean squared error with their gradients.

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch(format!(
            "{} targets vs {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::LengthMismatch("empty loss input".into()));
    }
    Ok(())
}

pub fn bce(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let sum: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(&t, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / y.len() as f64)
}

/// `d bce / d y_hat`. Zero where the clamp is active, matching the clamped loss.
pub fn bce_grad(y: &[f64], y_hat: &[f64]) -> Result<Vec<f64>> {
    check(y, y_hat)?;
    let n = y.len() as f64;
    Ok(y.iter()
        .zip(y_hat)
        .map(|(&t, &p)| {
            if p.is_nan() || (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                (-t / p + (1.0 - t) / (1.0 - p)) / n
            } else {
                0.0
            }
        })
        .collect())
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let sum: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sum / y.len() as f64)
}

pub fn mse_grad(y: &[f64], y_hat: &[f64]) -> Result<Vec<f64>> {
    check(y, y_hat)?;
    let n = y.len() as f64;
    Ok(y.iter().zip(y_hat).map(|(a, b)| 2.0 * (b - a) / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_reference_values() {
        assert!((bce(&[0.0], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let v = bce(&[1.0], &[1.0 - 1e-7]).unwrap();
        assert!((v - 1e-7).abs() < 1e-12, "{v}");
    }

    #[test]
    fn mse_of_identical_is_zero() {
        let y = [0.0, 1.0, 2.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn bce_gradient_vanishes_at_clamped_exact_match() {
        let y = [0.0, 1.0, 1.0, 0.0];
        let g = bce_grad(&y, &y).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let y = [0.0, 1.0, 0.3];
        let p = [0.2, 0.7, 0.55];
        let eps = 1e-6;
        let g = bce_grad(&y, &p).unwrap();
        let gm = mse_grad(&y, &p).unwrap();
        for i in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += eps;
            lo[i] -= eps;
            let fd = (bce(&y, &hi).unwrap() - bce(&y, &lo).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-7);
            let fd = (mse(&y, &hi).unwrap() - mse(&y, &lo).unwrap()) / (2.0 * eps);
            assert!((fd - gm[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(bce(&[0.0], &[0.5, 0.5]).is_err());
        assert!(mse(&[], &[]).is_err());
    }
}
