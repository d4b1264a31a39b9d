use std::ops::Range;

use indexmap::IndexMap;

use super::MoviePack;
use crate::error::{Error, Result};
use crate::numcore::Tensor2;

pub const CLIP_SECONDS: usize = 10;

/// One fixed-length clip of a movie.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSample {
    pub movie_id: String,
    pub clip_index: usize,
    /// `clip_seconds × dim` slice per modality.
    pub features: IndexMap<String, Tensor2>,
    pub valence: f64,
    pub arousal: f64,
}

impl ClipSample {
    pub fn seconds(&self) -> Range<usize> {
        let len = self.features.values().next().map_or(0, Tensor2::rows);
        self.clip_index * len..(self.clip_index + 1) * len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub clips: Vec<ClipSample>,
    /// Set when the movie is shorter than one clip.
    pub too_short: bool,
}

/// Splits a movie into non-overlapping clips aligned to second 0; the
/// trailing `seconds mod clip_seconds` seconds are dropped.
pub fn segment_clips(pack: &MoviePack, clip_seconds: usize) -> Result<Segmented> {
    if clip_seconds == 0 {
        return Err(Error::Config("clip length must be positive".into()));
    }
    let n = pack.seconds / clip_seconds;
    if n == 0 {
        log::warn!(
            "{}: {} s is shorter than one {clip_seconds} s clip",
            pack.movie_id,
            pack.seconds
        );
    }
    let mut clips = Vec::with_capacity(n);
    for k in 0..n {
        let start = k * clip_seconds;
        let features = pack
            .features
            .iter()
            .map(|(name, t)| Ok((name.clone(), t.slice_rows(start, clip_seconds)?)))
            .collect::<Result<IndexMap<_, _>>>()?;
        let (mut v, mut a) = (0.0, 0.0);
        for s in start..start + clip_seconds {
            v += pack.labels.get(s, 0);
            a += pack.labels.get(s, 1);
        }
        clips.push(ClipSample {
            movie_id: pack.movie_id.clone(),
            clip_index: k,
            features,
            valence: v / clip_seconds as f64,
            arousal: a / clip_seconds as f64,
        });
    }
    Ok(Segmented {
        clips,
        too_short: n == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Every stride-1 window.
    Train,
    /// Stride-L windows covering each clip once.
    Infer,
}

/// `len` consecutive clips starting at `start`; in inference only the
/// positions from `skip` onward produce output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextWindow {
    pub start: usize,
    pub len: usize,
    pub skip: usize,
}

impl ContextWindow {
    pub fn clips(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    /// Clip indices whose predictions are consumed.
    pub fn consumed(&self) -> Range<usize> {
        self.start + self.skip..self.start + self.len
    }
}

/// Context windows over `n_clips` consecutive clips of one movie.
///
/// When fewer than `len` clips exist, a single shorter window over all of
/// them is returned in both modes.
pub fn make_windows(n_clips: usize, len: usize, mode: WindowMode) -> Result<Vec<ContextWindow>> {
    if len == 0 {
        return Err(Error::Config("context window length must be at least 1".into()));
    }
    if n_clips == 0 {
        return Ok(Vec::new());
    }
    if n_clips < len {
        return Ok(vec![ContextWindow {
            start: 0,
            len: n_clips,
            skip: 0,
        }]);
    }
    let windows = match mode {
        WindowMode::Train => (0..=n_clips - len)
            .map(|start| ContextWindow { start, len, skip: 0 })
            .collect(),
        WindowMode::Infer => {
            let mut out: Vec<ContextWindow> = (0..n_clips / len)
                .map(|k| ContextWindow {
                    start: k * len,
                    len,
                    skip: 0,
                })
                .collect();
            let r = n_clips % len;
            if r > 0 {
                out.push(ContextWindow {
                    start: n_clips - len,
                    len,
                    skip: len - r,
                });
            }
            out
        }
    };
    Ok(windows)
}
