use super::model::{AuxModel, AuxOutput};
use crate::error::{Error, Result};
use crate::fusion::ScoreSeries;

/// `w` consecutive rows of the `T x 2` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub start_t: f64,
    /// Row-major `[p_fusion, p_vnb]` rows.
    pub rows: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Start indices of length-`w` windows with the given stride. A final window
/// flush with the end is added when the stride does not land on it.
pub fn segment_starts(len: usize, w: usize, stride: usize) -> Result<Vec<usize>> {
    if w == 0 {
        return Err(Error::config("window", "must be at least 1"));
    }
    if stride == 0 {
        return Err(Error::config("stride", "must be at least 1"));
    }
    if len < w {
        return Err(Error::InsufficientData(format!(
            "series of {len} steps is shorter than the {w}-step window"
        )));
    }
    let mut starts: Vec<usize> = (0..=len - w).step_by(stride).collect();
    if starts.last() != Some(&(len - w)) {
        starts.push(len - w);
    }
    Ok(starts)
}

pub fn window_segments(scores: &ScoreSeries, w: usize, stride: usize) -> Result<Vec<Segment>> {
    let matrix = scores.matrix();
    Ok(segment_starts(scores.len(), w, stride)?
        .into_iter()
        .map(|s| Segment {
            start: s,
            start_t: scores.times[s],
            rows: matrix[s..s + w].iter().flatten().copied().collect(),
        })
        .collect())
}

/// Averages overlapping segment outputs per timestep. Steps no segment covers
/// are 0.
pub fn assemble_predictions(outputs: &[(usize, AuxOutput)], len: usize) -> AuxOutput {
    assemble_where(outputs, len, |_, _| true)
}

/// Real-time view at step `now`: only segments that end at or before `now`
/// contribute, and the result covers steps `0..=now`.
pub fn assemble_streaming(outputs: &[(usize, AuxOutput)], now: usize) -> AuxOutput {
    assemble_where(outputs, now + 1, |start, out| start + out.len() <= now + 1)
}

fn assemble_where(
    outputs: &[(usize, AuxOutput)],
    len: usize,
    keep: impl Fn(usize, &AuxOutput) -> bool,
) -> AuxOutput {
    let mut evt = vec![0.0; len];
    let mut tr = vec![0.0; len];
    let mut count = vec![0usize; len];
    for (start, out) in outputs.iter().filter(|(s, o)| keep(*s, o)) {
        for k in 0..out.len() {
            let t = start + k;
            if t < len {
                evt[t] += out.evt[k];
                tr[t] += out.tr[k];
                count[t] += 1;
            }
        }
    }
    for t in 0..len {
        if count[t] > 0 {
            evt[t] /= count[t] as f64;
            tr[t] /= count[t] as f64;
        }
    }
    AuxOutput::from_parts(evt, tr)
}

/// Runs the model over every window of a series and assembles the outputs.
pub fn predict_series(
    model: &AuxModel,
    scores: &ScoreSeries,
    w: usize,
    stride: usize,
) -> Result<AuxOutput> {
    let outputs = window_segments(scores, w, stride)?
        .into_iter()
        .map(|seg| Ok((seg.start, model.forward(&seg.rows)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_predictions(&outputs, scores.len()))
}
