//! Energy and zero-crossing voice activity detection with run-length smoothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, FrameView, frame_clip};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum VadError {
    #[error("signal shorter than one analysis frame ({needed} samples needed, {got} given)")]
    EmptySignal { needed: usize, got: usize },
    #[error("invalid VAD parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Multiplier over the median frame energy.
    pub energy_factor: f64,
    /// Fraction of the loudest frame energy that always counts as active,
    /// so steady signals (energy == median) are not rejected.
    pub peak_ratio: f64,
    /// Voiced frames must cross zero on less than this fraction of samples.
    pub zcr_max: f64,
    pub min_segment_ms: f64,
}

impl Default for VadParams {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            energy_factor: 2.0,
            peak_ratio: 0.1,
            zcr_max: 0.25,
            min_segment_ms: 30.0,
        }
    }
}

impl VadParams {
    pub fn validate(&self) -> Result<(), VadError> {
        let positive = [
            ("frame_ms", self.frame_ms),
            ("hop_ms", self.hop_ms),
            ("energy_factor", self.energy_factor),
            ("peak_ratio", self.peak_ratio),
            ("min_segment_ms", self.min_segment_ms),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(VadError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.zcr_max > 0.0 && self.zcr_max < 1.0) {
            return Err(VadError::InvalidParams(format!(
                "zcr_max must lie in (0, 1), got {}",
                self.zcr_max
            )));
        }
        if self.peak_ratio > 1.0 {
            return Err(VadError::InvalidParams("peak_ratio must not exceed 1".into()));
        }
        Ok(())
    }

    /// Analysis frames for `clip` under these parameters.
    pub fn frames(&self, clip: &AudioClip) -> Vec<FrameView> {
        let (len, hop) = self.frame_geometry(clip);
        frame_clip(clip, len, hop)
    }

    /// (frame length, hop) in samples, each at least one sample.
    pub fn frame_geometry(&self, clip: &AudioClip) -> (usize, usize) {
        (
            clip.ms_to_samples(self.frame_ms).max(1),
            clip.ms_to_samples(self.hop_ms).max(1),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Voiced,
    Unvoiced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Segment {
    pub fn is_voiced(&self) -> bool {
        self.kind == SegmentKind::Voiced
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

/// Fraction of adjacent sample pairs whose signs differ.
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / (frame.len() - 1) as f64
}

/// Labels each analysis frame voiced or unvoiced.
///
/// A frame is voiced when its mean-square energy exceeds
/// `min(energy_factor * median, peak_ratio * max)` over all frames and its
/// zero-crossing rate is below `zcr_max`. Both thresholds are relative, so
/// the labeling does not depend on the signal gain.
pub fn classify_frames(clip: &AudioClip, params: &VadParams) -> Result<Vec<bool>, VadError> {
    params.validate()?;
    let frames = params.frames(clip);
    if frames.is_empty() {
        return Err(VadError::EmptySignal {
            needed: params.frame_geometry(clip).0,
            got: clip.len(),
        });
    }
    let samples = clip.samples();
    let energies: Vec<f64> = frames.iter().map(|f| stats::mean_square(f.slice(samples))).collect();
    let median = stats::median(&energies);
    let peak = energies.iter().copied().fold(0.0, f64::max);
    let threshold = (params.energy_factor * median).min(params.peak_ratio * peak);

    Ok(frames
        .iter()
        .zip(&energies)
        .map(|(f, &e)| e > threshold && zero_crossing_rate(f.slice(samples)) < params.zcr_max)
        .collect())
}

/// Turns per-frame flags into alternating segments. Each flag covers `hop_ms`.
///
/// Runs shorter than `min_segment_ms` are absorbed by their neighbours,
/// shortest first (leftmost on ties), until every run meets the floor or a
/// single run remains.
pub fn segments_from_flags(flags: &[bool], hop_ms: f64, min_segment_ms: f64) -> Vec<Segment> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &f in flags {
        match runs.last_mut() {
            Some((kind, len)) if *kind == f => *len += 1,
            _ => runs.push((f, 1)),
        }
    }

    let too_short = |len: usize| (len as f64) * hop_ms < min_segment_ms;
    while runs.len() > 1 {
        let Some((idx, _)) = runs
            .iter()
            .enumerate()
            .filter(|(_, (_, len))| too_short(*len))
            .min_by_key(|(i, (_, len))| (*len, *i))
        else {
            break;
        };
        absorb_run(&mut runs, idx);
    }

    let hop_s = hop_ms / 1000.0;
    let mut start = 0usize;
    runs.into_iter()
        .map(|(voiced, len)| {
            let seg = Segment {
                kind: if voiced { SegmentKind::Voiced } else { SegmentKind::Unvoiced },
                start_s: start as f64 * hop_s,
                duration_s: len as f64 * hop_s,
            };
            start += len;
            seg
        })
        .collect()
}

// The neighbours of a run always share the opposite kind, so flipping the run
// fuses it with both. Picking the longer neighbour (preceding on ties) only
// matters at the edges, where there is a single neighbour anyway.
fn absorb_run(runs: &mut Vec<(bool, usize)>, idx: usize) {
    let len = runs[idx].1;
    let prev = idx.checked_sub(1);
    let next = (idx + 1 < runs.len()).then_some(idx + 1);
    let target = match (prev, next) {
        (Some(p), Some(n)) => {
            if runs[n].1 > runs[p].1 {
                n
            } else {
                p
            }
        }
        (Some(p), None) => p,
        (None, Some(n)) => n,
        (None, None) => return,
    };
    runs[target].1 += len;
    runs.remove(idx);
    // Coalesce the now-adjacent equal runs.
    let mut merged: Vec<(bool, usize)> = Vec::with_capacity(runs.len());
    for r in runs.drain(..) {
        match merged.last_mut() {
            Some(last) if last.0 == r.0 => last.1 += r.1,
            _ => merged.push(r),
        }
    }
    *runs = merged;
}

/// Re-expands segments into per-frame flags at `hop_ms` resolution.
pub fn flags_from_segments(segments: &[Segment], hop_ms: f64) -> Vec<bool> {
    let hop_s = hop_ms / 1000.0;
    segments
        .iter()
        .flat_map(|s| {
            let n = (s.duration_s / hop_s).round() as usize;
            std::iter::repeat_n(s.is_voiced(), n)
        })
        .collect()
}

/// Runs the detector and smoothing on a clip.
pub fn segment_clip(clip: &AudioClip, params: &VadParams) -> Result<(Vec<bool>, Vec<Segment>), VadError> {
    let flags = classify_frames(clip, params)?;
    let segments = segments_from_flags(&flags, params.hop_ms, params.min_segment_ms);
    Ok((flags, segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn parse(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == 'V').collect()
    }

    fn sine(freq: f64, fs: u32, n: usize, amp: f64) -> AudioClip {
        let s = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs as f64).sin())
            .collect();
        AudioClip::new(s, fs, "sine").unwrap()
    }

    #[test]
    fn silence_is_unvoiced() {
        let clip = AudioClip::new(vec![0.0; 16000], 16000, "z").unwrap();
        let flags = classify_frames(&clip, &VadParams::default()).unwrap();
        assert!(!flags.is_empty());
        assert!(flags.iter().all(|v| !v));
    }

    #[test]
    fn steady_sine_is_voiced() {
        let clip = sine(200.0, 16000, 16000, 1.0);
        let flags = classify_frames(&clip, &VadParams::default()).unwrap();
        assert!(flags.iter().all(|&v| v));
    }

    #[test]
    fn too_short_clip() {
        let clip = AudioClip::new(vec![0.1; 100], 16000, "s").unwrap();
        assert!(matches!(
            classify_frames(&clip, &VadParams::default()),
            Err(VadError::EmptySignal { needed: 400, got: 100 })
        ));
    }

    #[test]
    fn zcr_of_sine() {
        let clip = sine(200.0, 16000, 1600, 1.0);
        let z = zero_crossing_rate(clip.samples());
        assert!((z - 0.025).abs() < 1e-3, "{z}");
    }

    #[test]
    fn two_runs() {
        let segs = segments_from_flags(&parse("VVVUUU"), 10.0, 30.0);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].kind, SegmentKind::Voiced);
        assert!((segs[0].duration_s - 0.03).abs() < 1e-12);
        assert_eq!(segs[1].kind, SegmentKind::Unvoiced);
        assert!((segs[1].start_s - 0.03).abs() < 1e-12);
        assert!((segs[1].duration_s - 0.03).abs() < 1e-12);
    }

    #[test]
    fn short_gap_is_smoothed() {
        let segs = segments_from_flags(&parse("VUVVVV"), 10.0, 30.0);
        assert_eq!(segs.len(), 1);
        assert!(segs[0].is_voiced());
        assert!((segs[0].duration_s - 0.06).abs() < 1e-12);
    }

    #[test]
    fn all_voiced_single_segment() {
        let segs = segments_from_flags(&[true; 50], 10.0, 30.0);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].duration_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_run_merges_into_only_neighbour() {
        let segs = segments_from_flags(&parse("UVVVVUUUU"), 10.0, 30.0);
        assert_eq!(segs.len(), 2);
        assert!(segs[0].is_voiced());
        assert!((segs[0].duration_s - 0.05).abs() < 1e-12);
    }

    #[test]
    fn bad_params() {
        let p = VadParams { zcr_max: 1.5, ..VadParams::default() };
        assert!(p.validate().is_err());
        let p = VadParams { hop_ms: 0.0, ..VadParams::default() };
        assert!(p.validate().is_err());
    }
}
