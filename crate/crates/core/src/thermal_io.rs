//! Thermal video data model and its on-disk formats.
//!
//! Videos are stored as little-endian binary:
//!
//! ```text
//! "TOBV" | version: u16 | N: u32 | H: u32 | W: u32 | frame_rate: f64 | N*H*W f32
//! ```
//!
//! Intensities are row-major within a frame and frame-major across the file.
//! Ground truth and other per-video metadata live in sibling text files made of
//! `key: value` lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TOBV";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 3 + 8;

/// Single-channel video in raw sensor units.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalVideo {
    pub id: String,
    frame_rate: f64,
    n_frames: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ThermalVideo {
    pub fn new(
        id: impl Into<String>,
        frame_rate: f64,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::config("frame_rate", "must be finite and positive"));
        }
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "frame size {height}x{width} is empty"
            )));
        }
        let frame_len = height * width;
        if data.is_empty() || !data.len().is_multiple_of(frame_len) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form whole {height}x{width} frames",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(format!(
                "non-finite intensity at flat index {i}"
            )));
        }
        Ok(Self {
            id: id.into(),
            frame_rate,
            n_frames: data.len() / frame_len,
            height,
            width,
            data,
        })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn frame(&self, n: usize) -> &[f32] {
        let len = self.frame_len();
        &self.data[n * len..(n + 1) * len]
    }

    /// Contiguous frames `start..end`.
    pub fn frames(&self, start: usize, end: usize) -> &[f32] {
        let len = self.frame_len();
        &self.data[start * len..end * len]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Adds `offset` to every intensity.
    pub fn shifted(&self, offset: f64) -> ThermalVideo {
        let data = self
            .data
            .iter()
            .map(|&v| (f64::from(v) + offset) as f32)
            .collect();
        Self {
            data,
            ..self.clone()
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.frame_rate
    }
}

/// A video rescaled to `[0, 1]` around the skin mode `mu_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVideo {
    video: ThermalVideo,
    mu_hat: f64,
}

impl NormalizedVideo {
    /// Wraps already-normalized intensities, rejecting values outside `[0, 1]`.
    pub fn new(video: ThermalVideo, mu_hat: f64) -> Result<Self> {
        if let Some(i) = video.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::DimensionMismatch(format!(
                "normalized intensity {} at flat index {i} is outside [0, 1]",
                video.data[i]
            )));
        }
        Ok(Self { video, mu_hat })
    }

    pub fn video(&self) -> &ThermalVideo {
        &self.video
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn into_video(self) -> ThermalVideo {
        self.video
    }
}

pub fn encode_video(video: &ThermalVideo) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + video.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for dim in [video.n_frames, video.height, video.width] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&video.frame_rate.to_le_bytes());
    for v in &video.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_video(id: impl Into<String>, bytes: &[u8]) -> Result<ThermalVideo> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MalformedHeader("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported format version {version}"
        )));
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (n, h, w) = (read_u32(6), read_u32(10), read_u32(14));
    let frame_rate = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(Error::MalformedHeader(format!(
            "frame rate {frame_rate} is not positive"
        )));
    }
    if n == 0 || h == 0 || w == 0 {
        return Err(Error::DimensionMismatch(format!(
            "header declares an empty video ({n}x{h}x{w})"
        )));
    }
    let expected = n
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::DimensionMismatch(format!("{n}x{h}x{w} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "header declares {expected} payload bytes but {} follow",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ThermalVideo::new(id, frame_rate, h, w, data)
}

pub fn save_video(video: &ThermalVideo, path: &Path) -> Result<()> {
    fs::write(path, encode_video(video)).map_err(|e| Error::io(path, e))
}

/// Loads a video; its id is the file stem.
pub fn load_video(path: &Path) -> Result<ThermalVideo> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_video(id, &bytes)
}

/// Ground-truth annotation of a synthetic episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Birth time in seconds.
    pub tob_s: f64,
    /// Visible-newborn flag for each whole second of the episode.
    pub vnb_mask: Vec<bool>,
}

impl GroundTruth {
    pub fn vnb_at(&self, t: f64) -> bool {
        if t < 0.0 {
            return false;
        }
        self.vnb_mask.get(t.floor() as usize).copied().unwrap_or(false)
    }

    pub fn to_metadata(&self) -> Metadata {
        let mask = self
            .vnb_mask
            .iter()
            .map(|&v| if v { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",");
        let mut meta = Metadata::default();
        meta.set("tob_s", self.tob_s);
        meta.set("vnb_mask", mask);
        meta
    }

    pub fn from_metadata(meta: &Metadata) -> Result<Self> {
        let tob_s = meta.parse::<f64>("tob_s")?;
        let mask = meta.require("vnb_mask")?;
        let vnb_mask = if mask.is_empty() {
            Vec::new()
        } else {
            mask.split(',')
                .map(|v| match v.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Metadata(format!("vnb_mask entry `{other}`"))),
                })
                .collect::<Result<_>>()?
        };
        Ok(Self { tob_s, vnb_mask })
    }
}

/// Ordered `key: value` metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Metadata(format!("missing key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Metadata(format!("cannot parse `{key}: {raw}`")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut meta = Metadata::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| {
                Error::Metadata(format!("line {}: expected `key: value`", lineno + 1))
            })?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}
