use crate::error::{Error, Result};

/// Per-second targets on a score series' time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionSignals {
    /// 1 at the birth second only.
    pub y_evt: Vec<f64>,
    /// 0 before the birth second, 1 from it on.
    pub y_tr: Vec<f64>,
    /// `y_evt + y_tr`.
    pub y_joint: Vec<f64>,
    pub event_index: usize,
}

impl SupervisionSignals {
    pub fn len(&self) -> usize {
        self.y_evt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_evt.is_empty()
    }

    pub fn slice(&self, start: usize, len: usize) -> (&[f64], &[f64], &[f64]) {
        let r = start..start + len;
        (&self.y_evt[r.clone()], &self.y_tr[r.clone()], &self.y_joint[r])
    }
}

/// Targets for a birth at `tob_s` seconds. The event sits at the axis point
/// closest to `tob_s` rounded half to even; births outside the axis are
/// moved to the nearest end with a warning.
pub fn build_labels(tob_s: f64, times: &[f64]) -> Result<SupervisionSignals> {
    if times.is_empty() {
        return Err(Error::InsufficientData("empty time axis".into()));
    }
    if !tob_s.is_finite() {
        return Err(Error::config("tob_s", "must be finite"));
    }
    let target = tob_s.round_ties_even();
    let (first, last) = (times[0], times[times.len() - 1]);
    if target < first || target > last {
        log::warn!("birth at {tob_s} s lies outside the axis {first}..{last}; clamping");
    }
    let mut event_index = 0;
    for (i, &t) in times.iter().enumerate() {
        if (t - target).abs() < (times[event_index] - target).abs() {
            event_index = i;
        }
    }
    let n = times.len();
    let y_evt: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i == event_index))).collect();
    let y_tr: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i >= event_index))).collect();
    let y_joint = y_evt.iter().zip(&y_tr).map(|(a, b)| a + b).collect();
    Ok(SupervisionSignals {
        y_evt,
        y_tr,
        y_joint,
        event_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis() -> Vec<f64> {
        (3..=119).map(f64::from).collect()
    }

    #[test]
    fn birth_at_fifty() {
        let s = build_labels(50.0, &axis()).unwrap();
        let at = |t: usize| t - 3;
        assert_eq!(s.y_evt.iter().sum::<f64>(), 1.0);
        assert_eq!(s.y_evt[at(50)], 1.0);
        assert_eq!(s.y_tr[at(49)], 0.0);
        assert_eq!(s.y_tr[at(50)], 1.0);
        assert_eq!((s.y_joint[at(50)], s.y_joint[at(49)], s.y_joint[at(51)]), (2.0, 0.0, 1.0));
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(build_labels(50.4, &axis()).unwrap().event_index, 47);
        assert_eq!(build_labels(50.5, &axis()).unwrap().event_index, 47);
        assert_eq!(build_labels(51.5, &axis()).unwrap().event_index, 49);
    }

    #[test]
    fn births_off_the_axis_clamp() {
        assert_eq!(build_labels(1.0, &axis()).unwrap().event_index, 0);
        assert_eq!(build_labels(500.0, &axis()).unwrap().event_index, 116);
        assert!(build_labels(5.0, &[]).is_err());
    }
}
