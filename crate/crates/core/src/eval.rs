//! Classification metrics, birth-time error statistics and the CSV report.

use std::fmt::Write as _;
use std::path::Path;

use crate::aggregation::TobEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// A ratio that is 0 and flagged undefined when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    fn of(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Self {
                value: 0.0,
                defined: false,
            }
        } else {
            Self {
                value: num / den,
                defined: true,
            }
        }
    }
}

/// Predictions at or above `threshold` count as positive.
pub fn confusion(probs: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn precision(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn recall(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp as f64, (c.tp + c.fn_) as f64)
}

pub fn mcc(c: &ConfusionCounts) -> Ratio {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    Ratio::of(tp * tn - fp * fn_, den)
}

/// Signed error in seconds, positive when late; `None` when nothing was found.
pub fn tob_error(estimate: &TobEstimate, tob_s: f64) -> Option<f64> {
    estimate.t_hat.filter(|_| estimate.found).map(|t| t - tob_s)
}

/// Linear interpolation between order statistics ("type 7").
pub fn quantile_type7(sorted: &[f64], p: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    /// Quartiles of `|err|` over found estimates; `None` when none were found.
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub mean_abs: Option<f64>,
    pub count_pct: f64,
    pub errors: Vec<Option<f64>>,
}

pub fn error_stats(errors: &[Option<f64>]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::InsufficientData("no videos to summarize".into()));
    }
    let mut abs: Vec<f64> = errors.iter().flatten().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mean_abs = (!abs.is_empty()).then(|| abs.iter().sum::<f64>() / abs.len() as f64);
    Ok(ErrorStats {
        q1: quantile_type7(&abs, 0.25),
        q2: quantile_type7(&abs, 0.5),
        q3: quantile_type7(&abs, 0.75),
        mean_abs,
        count_pct: abs.len() as f64 / errors.len() as f64 * 100.0,
        errors: errors.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRow {
    pub method: String,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TobRow {
    pub method: String,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub classification: Vec<ClassificationRow>,
    pub tob: Vec<TobRow>,
}

fn fmt_ratio(r: Ratio) -> String {
    if r.defined {
        format!("{:.6}", r.value)
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl Report {
    pub fn tob_row(&self, method: &str) -> Option<&TobRow> {
        self.tob.iter().find(|r| r.method == method)
    }

    /// Two CSV blocks separated by a blank line. Undefined values are empty.
    pub fn render(&self) -> String {
        let mut out = String::from("method,precision,recall,mcc,tp,fp,tn,fn\n");
        for row in &self.classification {
            let c = &row.counts;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.method,
                fmt_ratio(precision(c)),
                fmt_ratio(recall(c)),
                fmt_ratio(mcc(c)),
                c.tp,
                c.fp,
                c.tn,
                c.fn_
            );
        }
        out.push('\n');
        out.push_str("method,q1,q2,q3,mean_abs,count_pct,videos\n");
        for row in &self.tob {
            let s = &row.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.2},{}",
                row.method,
                fmt_opt(s.q1),
                fmt_opt(s.q2),
                fmt_opt(s.q3),
                fmt_opt(s.mean_abs),
                s.count_pct,
                s.errors.len()
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
