use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_THETA: f64 = 0.9;
pub const DEFAULT_TAPS: usize = 21;
pub const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TobEstimate {
    pub found: bool,
    /// Seconds; `Some` exactly when `found`.
    pub t_hat: Option<f64>,
    /// The value the threshold was compared against.
    pub peak: f64,
    pub threshold: f64,
}

impl TobEstimate {
    pub fn not_found(peak: f64, threshold: f64) -> Self {
        Self {
            found: false,
            t_hat: None,
            peak,
            threshold,
        }
    }
}

fn check_axis(values: &[f64], times: &[f64]) -> Result<()> {
    if values.len() != times.len() {
        return Err(Error::LengthMismatch(format!(
            "{} values on a {}-point axis",
            values.len(),
            times.len()
        )));
    }
    Ok(())
}

/// Time of the maximum of `joint` (earliest on ties) if it reaches `gamma`.
pub fn estimate_tob(joint: &[f64], times: &[f64], gamma: f64) -> Result<TobEstimate> {
    check_axis(joint, times)?;
    let Some(&first) = joint.first() else {
        return Ok(TobEstimate::not_found(f64::NEG_INFINITY, gamma));
    };
    let (mut best, mut peak) = (0, first);
    for (i, &v) in joint.iter().enumerate().skip(1) {
        if v > peak {
            best = i;
            peak = v;
        }
    }
    Ok(if peak >= gamma {
        TobEstimate {
            found: true,
            t_hat: Some(times[best]),
            peak,
            threshold: gamma,
        }
    } else {
        TobEstimate::not_found(peak, gamma)
    })
}

/// Centered moving average over `taps` samples with edge replication.
pub fn fir_filter(values: &[f64], taps: usize) -> Result<Vec<f64>> {
    if taps == 0 || taps.is_multiple_of(2) {
        return Err(Error::config("taps", format!("must be odd, got {taps}")));
    }
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = taps / 2;
    let at = |i: isize| values[i.clamp(0, n as isize - 1) as usize];
    Ok((0..n as isize)
        .map(|i| {
            (i - half as isize..=i + half as isize)
                .map(at)
                .sum::<f64>()
                / taps as f64
        })
        .collect())
}

/// First time `values` reaches `threshold`; `peak` is the series maximum.
fn first_crossing(values: &[f64], times: &[f64], threshold: f64) -> Result<TobEstimate> {
    check_axis(values, times)?;
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(match values.iter().position(|&v| v >= threshold) {
        Some(i) => TobEstimate {
            found: true,
            t_hat: Some(times[i]),
            peak,
            threshold,
        },
        None => TobEstimate::not_found(peak, threshold),
    })
}

/// High-confidence threshold: earliest time the filtered score reaches `theta`.
pub fn hct_detect(filtered: &[f64], times: &[f64], theta: f64) -> Result<TobEstimate> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::config("theta", format!("must lie in (0, 1), got {theta}")));
    }
    first_crossing(filtered, times, theta)
}

/// Earliest time `p_fusion` reaches 0.5.
pub fn threshold_first(p_fusion: &[f64], times: &[f64]) -> Result<TobEstimate> {
    first_crossing(p_fusion, times, BINARY_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn estimate_cases() {
        let t = axis(100);
        assert!(!estimate_tob(&[0.0; 100], &t, DEFAULT_GAMMA).unwrap().found);
        let mut j = vec![0.2; 100];
        j[50] = 1.9;
        let e = estimate_tob(&j, &t, DEFAULT_GAMMA).unwrap();
        assert_eq!((e.found, e.t_hat, e.peak), (true, Some(50.0), 1.9));
        j[50] = 0.90;
        assert!(!estimate_tob(&j, &t, DEFAULT_GAMMA).unwrap().found);
        let e = estimate_tob(&[1.0, 1.5, 1.5], &axis(3), DEFAULT_GAMMA).unwrap();
        assert_eq!(e.t_hat, Some(1.0));
    }

    #[test]
    fn fir_cases() {
        let x = [0.3, 0.9, 0.1];
        assert_eq!(fir_filter(&x, 1).unwrap(), x.to_vec());
        assert!(fir_filter(&x, 4).is_err());
        let mut impulse = vec![0.0; 11];
        impulse[5] = 1.0;
        let y = fir_filter(&impulse, 5).unwrap();
        for (i, v) in y.iter().enumerate() {
            let want = if (3..=7).contains(&i) { 0.2 } else { 0.0 };
            assert!((v - want).abs() < 1e-15, "{i}: {v}");
        }
    }

    #[test]
    fn crossing_rules() {
        let t = axis(100);
        let mut p = vec![0.49; 100];
        assert!(!threshold_first(&p, &t).unwrap().found);
        p[40] = 0.5;
        p[90] = 0.8;
        assert_eq!(threshold_first(&p, &t).unwrap().t_hat, Some(40.0));
        assert!(hct_detect(&p, &t, 1.0).is_err());
        let mut q = vec![0.0; 100];
        q[42] = 0.95;
        assert_eq!(hct_detect(&q, &t, 0.9).unwrap().t_hat, Some(42.0));
    }
}
