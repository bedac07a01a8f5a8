//! Duration, time-domain, spectral, prosodic and voice-quality features.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner, num_complex::Complex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::stats;
use crate::vad::{Segment, VadParams};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty frame")]
    EmptyFrame,
    #[error("invalid feature configuration: {0}")]
    Config(String),
    #[error("{flags} voicing flags for {frames} analysis frames")]
    Misaligned { flags: usize, frames: usize },
}

/// Histogram bins of segment durations: ten 0.2 s bins over [0, 2) s and one overflow bin.
pub const DURATION_BINS: usize = 10;
pub const DURATION_BIN_WIDTH_S: f64 = 0.2;
pub const HIST_LEN: usize = DURATION_BINS + 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DurationStats {
    pub voiced_hist: [u32; HIST_LEN],
    pub unvoiced_hist: [u32; HIST_LEN],
    pub mean_voiced_s: f64,
    pub mean_unvoiced_s: f64,
    pub var_voiced_s2: f64,
    pub var_unvoiced_s2: f64,
}

fn duration_bin(duration_s: f64) -> usize {
    if duration_s >= DURATION_BINS as f64 * DURATION_BIN_WIDTH_S {
        DURATION_BINS
    } else {
        // Guard against 0.2 * 5 style rounding putting an exact edge one bin low.
        ((duration_s / DURATION_BIN_WIDTH_S + 1e-9).floor() as usize).min(DURATION_BINS - 1)
    }
}

pub fn duration_features(segments: &[Segment]) -> DurationStats {
    let mut out = DurationStats::default();
    let (voiced, unvoiced): (Vec<&Segment>, Vec<&Segment>) =
        segments.iter().partition(|s| s.is_voiced());
    for (group, hist, mean, var) in [
        (&voiced, &mut out.voiced_hist, &mut out.mean_voiced_s, &mut out.var_voiced_s2),
        (&unvoiced, &mut out.unvoiced_hist, &mut out.mean_unvoiced_s, &mut out.var_unvoiced_s2),
    ] {
        let durations: Vec<f64> = group.iter().map(|s| s.duration_s).collect();
        for &d in &durations {
            hist[duration_bin(d)] += 1;
        }
        *mean = stats::mean(&durations);
        *var = stats::variance(&durations);
    }
    out
}

pub fn short_time_energy(frame: &[f64]) -> Result<f64, FeatureError> {
    if frame.is_empty() {
        return Err(FeatureError::EmptyFrame);
    }
    Ok(stats::mean_square(frame))
}

/// Magnitude-spectrum centroid with a cached FFT plan per frame length.
pub struct SpectrumAnalyzer {
    planner: FftPlanner<f64>,
    plan: Option<(usize, Arc<dyn Fft<f64>>)>,
    buffer: Vec<Complex<f64>>,
}

impl Default for SpectrumAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl SpectrumAnalyzer {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plan: None,
            buffer: Vec::new(),
        }
    }

    /// Centroid in Hz over bins `0..=L/2` of a rectangular-window DFT.
    /// A frame with zero spectrum returns 0.
    pub fn centroid(&mut self, frame: &[f64], sample_rate_hz: u32) -> f64 {
        let n = frame.len();
        if n == 0 {
            return 0.0;
        }
        let fft = match &self.plan {
            Some((len, fft)) if *len == n => Arc::clone(fft),
            _ => {
                let fft = self.planner.plan_fft_forward(n);
                self.plan = Some((n, Arc::clone(&fft)));
                fft
            }
        };
        self.buffer.clear();
        self.buffer.extend(frame.iter().map(|&x| Complex::new(x, 0.0)));
        fft.process(&mut self.buffer);

        let bin_hz = sample_rate_hz as f64 / n as f64;
        let (weighted, total) = self.buffer[..=n / 2]
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(w, t), (i, c)| {
                let mag = c.norm();
                (w + i as f64 * bin_hz * mag, t + mag)
            });
        if total <= 0.0 {
            0.0
        } else {
            (weighted / total).clamp(0.0, sample_rate_hz as f64 / 2.0)
        }
    }
}

pub fn spectral_centroid(frame: &[f64], sample_rate_hz: u32) -> f64 {
    SpectrumAnalyzer::new().centroid(frame, sample_rate_hz)
}

/// Frame-level energy and centroid aggregates over the analysis frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralStats {
    pub ste_mean: f64,
    pub ste_std: f64,
    pub centroid_mean_hz: f64,
    pub centroid_std_hz: f64,
}

pub fn spectral_stats(clip: &AudioClip, vad: &VadParams) -> SpectralStats {
    let frames = vad.frames(clip);
    let mut analyzer = SpectrumAnalyzer::new();
    let mut energies = Vec::with_capacity(frames.len());
    let mut centroids = Vec::with_capacity(frames.len());
    for f in &frames {
        let x = f.slice(clip.samples());
        energies.push(stats::mean_square(x));
        centroids.push(analyzer.centroid(x, clip.sample_rate_hz()));
    }
    SpectralStats {
        ste_mean: stats::mean(&energies),
        ste_std: stats::std_dev(&energies),
        centroid_mean_hz: stats::mean(&centroids),
        centroid_std_hz: stats::std_dev(&centroids),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchParams {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a frame to keep its pitch.
    pub voicing_threshold: f64,
    /// Lags whose correlation is within this distance of the best one are
    /// considered equivalent; the shortest wins, which avoids octave-down picks.
    pub octave_tolerance: f64,
}

impl Default for PitchParams {
    fn default() -> Self {
        Self {
            f_min_hz: 75.0,
            f_max_hz: 500.0,
            voicing_threshold: 0.45,
            octave_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Per-frame fundamental frequency; 0 marks a voiceless frame.
    pub f0_hz: Vec<f64>,
    pub best_autocorr: Vec<f64>,
    pub hop_ms: f64,
    pub frame_len: usize,
    pub hop_len: usize,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.f0_hz.iter().filter(|&&f| f > 0.0).count()
    }

    /// Per-frame periods in seconds, `None` for voiceless frames.
    pub fn periods(&self) -> Vec<Option<f64>> {
        self.f0_hz.iter().map(|&f| (f > 0.0).then(|| 1.0 / f)).collect()
    }
}

/// Normalized autocorrelation of `frame` at `lag`.
pub fn normalized_autocorr(frame: &[f64], lag: usize) -> f64 {
    if lag >= frame.len() {
        return 0.0;
    }
    let (head, tail) = (&frame[..frame.len() - lag], &frame[lag..]);
    let mut cross = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for (a, b) in head.iter().zip(tail) {
        cross += a * b;
        e0 += a * a;
        e1 += b * b;
    }
    let denom = (e0 * e1).sqrt();
    if denom > 0.0 { cross / denom } else { 0.0 }
}

/// Best (lag, correlation) over `[lag_min, lag_max]`.
fn best_lag(frame: &[f64], lag_min: usize, lag_max: usize, tolerance: f64) -> Option<(usize, f64)> {
    let lag_max = lag_max.min(frame.len().saturating_sub(2));
    if lag_min > lag_max {
        return None;
    }
    let r: Vec<f64> = (lag_min..=lag_max).map(|l| normalized_autocorr(frame, l)).collect();
    let r_max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let is_peak = |i: usize| {
        (i == 0 || r[i] >= r[i - 1]) && (i + 1 == r.len() || r[i] >= r[i + 1])
    };
    (0..r.len())
        .find(|&i| is_peak(i) && r[i] >= r_max - tolerance)
        .map(|i| (lag_min + i, r[i]))
}

pub fn pitch_track(
    clip: &AudioClip,
    voiced_flags: &[bool],
    vad: &VadParams,
    params: &PitchParams,
) -> Result<PitchTrack, FeatureError> {
    if !(params.f_min_hz > 0.0 && params.f_min_hz < params.f_max_hz) {
        return Err(FeatureError::Config(format!(
            "pitch range [{}, {}] Hz is empty",
            params.f_min_hz, params.f_max_hz
        )));
    }
    let frames = vad.frames(clip);
    if frames.len() != voiced_flags.len() {
        return Err(FeatureError::Misaligned {
            flags: voiced_flags.len(),
            frames: frames.len(),
        });
    }
    let fs = clip.sample_rate_hz() as f64;
    let lag_min = (fs / params.f_max_hz).ceil() as usize;
    let lag_max = (fs / params.f_min_hz).floor() as usize;
    let (frame_len, hop_len) = vad.frame_geometry(clip);

    let mut f0_hz = Vec::with_capacity(frames.len());
    let mut best_autocorr = Vec::with_capacity(frames.len());
    for (frame, &voiced) in frames.iter().zip(voiced_flags) {
        if !voiced {
            f0_hz.push(0.0);
            best_autocorr.push(0.0);
            continue;
        }
        match best_lag(frame.slice(clip.samples()), lag_min.max(1), lag_max, params.octave_tolerance) {
            Some((lag, r)) => {
                let r = r.clamp(0.0, 1.0);
                best_autocorr.push(r);
                f0_hz.push(if r >= params.voicing_threshold { fs / lag as f64 } else { 0.0 });
            }
            None => {
                best_autocorr.push(0.0);
                f0_hz.push(0.0);
            }
        }
    }
    Ok(PitchTrack {
        f0_hz,
        best_autocorr,
        hop_ms: vad.hop_ms,
        frame_len,
        hop_len,
    })
}

/// Floor added to frame energy before conversion to dB.
pub const INTENSITY_FLOOR: f64 = 1e-10;

pub fn energy_db(energy: f64) -> f64 {
    10.0 * (energy + INTENSITY_FLOOR).log10()
}

/// Per-frame intensity in dB on the track's framing.
pub fn intensity_track(clip: &AudioClip, track: &PitchTrack) -> Vec<f64> {
    crate::audio::frame_clip(clip, track.frame_len, track.hop_len)
        .iter()
        .map(|f| energy_db(stats::mean_square(f.slice(clip.samples()))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcousticStats {
    pub pitch_mean_hz: f64,
    pub pitch_std_hz: f64,
    pub pitch_max_hz: f64,
    pub pitch_min_hz: f64,
    pub intensity_mean_db: f64,
    pub intensity_std_db: f64,
    pub intensity_max_db: f64,
    pub intensity_min_db: f64,
    pub period_mean_s: f64,
    pub period_std_s: f64,
    pub rms_amplitude: f64,
    /// No frame carried a pitch; pitch and period fields are zero.
    pub pitch_degenerate: bool,
}

pub fn acoustic_features(clip: &AudioClip, track: &PitchTrack) -> AcousticStats {
    let pitches: Vec<f64> = track.f0_hz.iter().copied().filter(|&f| f > 0.0).collect();
    let periods: Vec<f64> = pitches.iter().map(|f| 1.0 / f).collect();
    let intensity = intensity_track(clip, track);
    let (i_min, i_max) = stats::min_max(&intensity).unwrap_or((0.0, 0.0));
    let (p_min, p_max) = stats::min_max(&pitches).unwrap_or((0.0, 0.0));
    AcousticStats {
        pitch_mean_hz: stats::mean(&pitches),
        pitch_std_hz: stats::std_dev(&pitches),
        pitch_max_hz: p_max,
        pitch_min_hz: p_min,
        intensity_mean_db: stats::mean(&intensity),
        intensity_std_db: stats::std_dev(&intensity),
        intensity_max_db: i_max,
        intensity_min_db: i_min,
        period_mean_s: stats::mean(&periods),
        period_std_s: stats::std_dev(&periods),
        rms_amplitude: stats::mean_square(clip.samples()).sqrt(),
        pitch_degenerate: pitches.is_empty(),
    }
}

/// Autocorrelation bounds used for HNR/NHR so both stay finite.
pub const AUTOCORR_FLOOR: f64 = 1e-3;
pub const AUTOCORR_CEIL: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityStats {
    pub jitter_local_pct: f64,
    pub shimmer_local_pct: f64,
    pub nhr: f64,
    pub hnr_db: f64,
    pub mean_autocorr: f64,
    /// Fewer than two adjacent voiced frames; jitter and shimmer are zero.
    pub degenerate: bool,
}

/// `100 * mean |v_i - v_{i-1}| / mean(v)` over adjacent present values.
///
/// Returns `None` when no adjacent pair exists.
pub fn relative_perturbation_pct(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let diffs: Vec<f64> = values
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a).abs()),
            _ => None,
        })
        .collect();
    if diffs.is_empty() {
        return None;
    }
    let m = stats::mean(&present);
    if m <= 0.0 {
        return None;
    }
    Some(100.0 * stats::mean(&diffs) / m)
}

/// HNR in dB and NHR from one autocorrelation peak, clamped to stay finite.
pub fn harmonicity(r: f64) -> (f64, f64) {
    let r = r.clamp(AUTOCORR_FLOOR, AUTOCORR_CEIL);
    let ratio = r / (1.0 - r);
    (10.0 * ratio.log10(), 1.0 / ratio)
}

pub fn quality_features(track: &PitchTrack, clip: &AudioClip) -> QualityStats {
    let frames = crate::audio::frame_clip(clip, track.frame_len, track.hop_len);
    let amplitudes: Vec<Option<f64>> = frames
        .iter()
        .zip(&track.f0_hz)
        .map(|(f, &f0)| {
            (f0 > 0.0).then(|| f.slice(clip.samples()).iter().fold(0.0, |m, x| f64::max(m, x.abs())))
        })
        .collect();
    let jitter = relative_perturbation_pct(&track.periods());
    let shimmer = relative_perturbation_pct(&amplitudes);

    let voiced_r: Vec<f64> = track
        .f0_hz
        .iter()
        .zip(&track.best_autocorr)
        .filter(|(f, _)| **f > 0.0)
        .map(|(_, r)| *r)
        .collect();
    let mean_autocorr = stats::mean(&voiced_r).clamp(0.0, 1.0);
    let (hnr_db, nhr) = harmonicity(mean_autocorr);
    QualityStats {
        jitter_local_pct: jitter.unwrap_or(0.0),
        shimmer_local_pct: shimmer.unwrap_or(0.0),
        nhr,
        hnr_db,
        mean_autocorr,
        degenerate: jitter.is_none() || shimmer.is_none(),
    }
}

/// Interior unvoiced gaps at least this long count as voice breaks.
pub const VOICE_BREAK_MIN_S: f64 = 0.09;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BreakStats {
    pub frac_voiceless_frames: f64,
    pub degree_voice_breaks_pct: f64,
}

pub fn break_features(track: &PitchTrack, segments: &[Segment]) -> BreakStats {
    let frac_voiceless_frames = if track.is_empty() {
        0.0
    } else {
        (track.len() - track.voiced_count()) as f64 / track.len() as f64
    };
    let total: f64 = segments.iter().map(|s| s.duration_s).sum();
    let gaps: f64 = segments
        .windows(3)
        .filter(|w| {
            w[0].is_voiced()
                && !w[1].is_voiced()
                && w[2].is_voiced()
                && w[1].duration_s >= VOICE_BREAK_MIN_S - 1e-12
        })
        .map(|w| w[1].duration_s)
        .sum();
    BreakStats {
        frac_voiceless_frames,
        degree_voice_breaks_pct: if total > 0.0 { 100.0 * gaps / total } else { 0.0 },
    }
}
