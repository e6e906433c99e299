//! Fixed-length clips ending at sampled timestamps.
//!
//! A clip ending at frame `n` holds frames `n - F + 1 ..= n`. Frames are
//! stored oldest first, so `clip.frame(F - 1)` is the frame at `n`. Clips are
//! sampled at `t = t0, t0 + tau, ..., T` with end frame `floor(f_r * t)`,
//! `t0 = floor(F / f_r)` and `T = floor(N / f_r)`.

use crate::error::{Error, Result};
use crate::thermal_io::NormalizedVideo;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip<'a> {
    frames: &'a [f32],
    len: usize,
    height: usize,
    width: usize,
    pub end_frame: usize,
    /// Seconds; the sampling time for sampled clips, `end_frame / f_r` otherwise.
    pub timestamp: f64,
}

impl<'a> Clip<'a> {
    /// Builds a clip over `len` contiguous frames of `height * width` values.
    pub fn from_frames(
        frames: &'a [f32],
        len: usize,
        height: usize,
        width: usize,
        end_frame: usize,
        timestamp: f64,
    ) -> Result<Self> {
        if len == 0 || frames.len() != len * height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form {len} frames of {height}x{width}",
                frames.len()
            )));
        }
        Ok(Self {
            frames,
            len,
            height,
            width,
            end_frame,
            timestamp,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The `k`-th frame, oldest first.
    pub fn frame(&self, k: usize) -> &'a [f32] {
        let n = self.height * self.width;
        &self.frames[k * n..(k + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &'a [f32]> + 'a {
        self.frames.chunks_exact(self.height * self.width)
    }
}

/// Clip of `len` frames ending at frame `n`.
pub fn clip_at(video: &NormalizedVideo, n: usize, len: usize) -> Result<Clip<'_>> {
    if len == 0 {
        return Err(Error::config("clip_len", "must be at least 1"));
    }
    let v = video.video();
    if n + 1 < len || n >= v.n_frames() {
        return Err(Error::ClipBoundary { end: n, len });
    }
    Clip::from_frames(
        v.frames(n + 1 - len, n + 1),
        len,
        v.height(),
        v.width(),
        n,
        n as f64 / v.frame_rate(),
    )
}

/// Sampling grid of a video, independent of its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSchedule {
    pub clip_len: usize,
    pub tau: f64,
    pub t0: f64,
    pub t_end: f64,
    /// `(t, end_frame)` for every emitted clip.
    pub entries: Vec<(f64, usize)>,
}

impl ClipSchedule {
    pub fn new(n_frames: usize, frame_rate: f64, clip_len: usize, tau: f64) -> Result<Self> {
        if clip_len == 0 {
            return Err(Error::config("clip_len", "must be at least 1"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::config("tau", "must be positive"));
        }
        if n_frames < clip_len {
            return Err(Error::VideoTooShort {
                frames: n_frames,
                needed: clip_len,
            });
        }
        let t0 = (clip_len as f64 / frame_rate).floor();
        let mut t_end = (n_frames as f64 / frame_rate).floor();
        if (frame_rate * t_end).floor() as usize > n_frames - 1 {
            t_end -= 1.0;
        }
        let mut entries = Vec::new();
        let mut k = 0u64;
        loop {
            let t = t0 + k as f64 * tau;
            if t > t_end {
                break;
            }
            let n = (frame_rate * t).floor() as usize;
            // floor(F / f_r) can undershoot the first complete window
            if n + 1 >= clip_len && n < n_frames {
                entries.push((t, n));
            }
            k += 1;
        }
        if entries.is_empty() {
            return Err(Error::VideoTooShort {
                frames: n_frames,
                needed: clip_len,
            });
        }
        Ok(Self {
            clip_len,
            tau,
            t0,
            t_end,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipSeries<'a> {
    pub schedule: ClipSchedule,
    pub clips: Vec<Clip<'a>>,
}

impl ClipSeries<'_> {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

pub fn sample_clips(video: &NormalizedVideo, clip_len: usize, tau: f64) -> Result<ClipSeries<'_>> {
    let v = video.video();
    let schedule = ClipSchedule::new(v.n_frames(), v.frame_rate(), clip_len, tau)?;
    let clips = schedule
        .entries
        .iter()
        .map(|&(t, n)| {
            let mut clip = clip_at(video, n, clip_len)?;
            clip.timestamp = t;
            Ok(clip)
        })
        .collect::<Result<_>>()?;
    Ok(ClipSeries { schedule, clips })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal_io::ThermalVideo;

    fn indexed_video(n: usize, rate: f64) -> NormalizedVideo {
        // every pixel of frame i holds i / n
        let data = (0..n).flat_map(|i| [i as f32 / n as f32; 4]).collect();
        NormalizedVideo::new(ThermalVideo::new("v", rate, 2, 2, data).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn first_full_clip() {
        let v = indexed_video(100, 8.33);
        let c = clip_at(&v, 24, 25).unwrap();
        assert_eq!(c.len(), 25);
        assert_eq!(c.frame(0)[0], 0.0);
        assert_eq!(c.frame(24)[0], 24.0 / 100.0);
        assert!(matches!(
            clip_at(&v, 23, 25),
            Err(Error::ClipBoundary { end: 23, len: 25 })
        ));
        assert!(clip_at(&v, 100, 25).is_err());
    }

    #[test]
    fn single_frame_clip_is_the_frame() {
        let v = indexed_video(10, 8.33);
        let c = clip_at(&v, 7, 1).unwrap();
        assert_eq!(c.frame(0), v.video().frame(7));
    }

    #[test]
    fn paper_rate_grid() {
        let s = ClipSchedule::new(999, 8.33, 25, 1.0).unwrap();
        assert_eq!(s.t0, 3.0);
        assert_eq!(s.t_end, 119.0);
        assert_eq!(s.entries[0], (3.0, 24));
        assert_eq!(s.len(), 117);
        assert_eq!(s.entries.last().unwrap(), &(119.0, 991));
    }

    #[test]
    fn sampled_clips_match_clip_at() {
        let v = indexed_video(120, 8.33);
        let series = sample_clips(&v, 25, 1.0).unwrap();
        assert_eq!(series.len(), series.schedule.len());
        for (clip, &(t, n)) in series.clips.iter().zip(&series.schedule.entries) {
            assert_eq!(clip.timestamp, t);
            let direct = clip_at(&v, n, 25).unwrap();
            assert_eq!(clip.frame(0), direct.frame(0));
            assert_eq!(clip.frame(24), v.video().frame(n));
        }
    }

    #[test]
    fn too_short_video() {
        let v = indexed_video(20, 8.33);
        assert!(matches!(
            sample_clips(&v, 25, 1.0),
            Err(Error::VideoTooShort { frames: 20, needed: 25 })
        ));
    }

    #[test]
    fn leading_times_without_a_full_window_are_skipped() {
        // floor(30 / 8.33) = 3 but floor(8.33 * 3) = 24 < 29
        let s = ClipSchedule::new(200, 8.33, 30, 1.0).unwrap();
        assert_eq!(s.t0, 3.0);
        assert_eq!(s.entries[0].0, 4.0);
        assert!(s.entries.iter().all(|&(_, n)| n >= 29));
    }
}
