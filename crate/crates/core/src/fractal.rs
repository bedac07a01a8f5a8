//! Higuchi fractal dimension over sliding windows.
//!
//! For a series `x(1..N)`, scale `k` and offset `m`, the normalized curve
//! length is
//!
//! ```text
//! L_m(k) = (N - 1) / (P k) * sum_{i=1..P} |x(m + ik) - x(m + (i-1)k)|,   P = floor((N - m) / k)
//! ```
//!
//! and `L(k)` is its mean over `m = 1..k`. Higuchi's estimator divides each
//! offset length once more by `k`; that factor is applied when fitting, so the
//! dimension is the least-squares slope of `ln(L(k) / k)` against `ln(1/k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, frame_signal};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum FractalError {
    #[error("scale k={k}, offset m={m} undefined for a series of {n} points")]
    UndefinedScale { n: usize, m: usize, k: usize },
    #[error("fewer than two scales with non-zero curve length")]
    Degenerate,
    #[error("series of {n} points too short for k_max={k_max}")]
    TooShort { n: usize, k_max: usize },
    #[error("signal of {n} samples shorter than one {window}-point window")]
    EmptySeries { n: usize, window: usize },
    #[error("invalid HFD parameters: {0}")]
    InvalidParams(String),
    #[error("cannot summarize an empty HFD series")]
    EmptySummary,
}

/// `L_m(k)` with a 1-based offset `m`.
pub fn curve_length_mk(x: &[f64], m: usize, k: usize) -> Result<f64, FractalError> {
    let n = x.len();
    let undefined = FractalError::UndefinedScale { n, m, k };
    if k == 0 || m == 0 || m > n {
        return Err(undefined);
    }
    let p = (n - m) / k;
    if p == 0 {
        return Err(undefined);
    }
    let base = m - 1;
    let sum: f64 = (1..=p)
        .map(|i| (x[base + i * k] - x[base + (i - 1) * k]).abs())
        .sum();
    Ok(sum * (n - 1) as f64 / (p * k) as f64)
}

/// Mean of `L_m(k)` over offsets `m = 1..=k`.
pub fn curve_length(x: &[f64], k: usize) -> Result<f64, FractalError> {
    if k == 0 {
        return Err(FractalError::UndefinedScale { n: x.len(), m: 0, k });
    }
    let mut total = 0.0;
    for m in 1..=k {
        total += curve_length_mk(x, m, k)?;
    }
    Ok(total / k as f64)
}

/// One point of the log-log regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub k: usize,
    pub ln_inv_k: f64,
    pub ln_length: f64,
}

/// Regression points `(ln(1/k), ln(L(k)/k))` for `k = 1..=k_max`, skipping
/// scales whose curve length is zero.
pub fn scale_points(x: &[f64], k_max: usize) -> Result<Vec<ScalePoint>, FractalError> {
    if k_max < 1 || x.len() <= 2 * k_max {
        return Err(FractalError::TooShort { n: x.len(), k_max });
    }
    let mut points = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let l = curve_length(x, k)?;
        if l > 0.0 && l.is_finite() {
            let kf = k as f64;
            points.push(ScalePoint {
                k,
                ln_inv_k: -kf.ln(),
                ln_length: (l / kf).ln(),
            });
        }
    }
    Ok(points)
}

pub fn higuchi_fd(x: &[f64], k_max: usize) -> Result<f64, FractalError> {
    let points = scale_points(x, k_max)?;
    if points.len() < 2 {
        return Err(FractalError::Degenerate);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.ln_inv_k).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ln_length).collect();
    Ok(stats::ols_slope(&xs, &ys))
}

/// Window lengths supported by the windowed estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum WindowSize {
    W160,
    #[default]
    W320,
    W1280,
}

impl WindowSize {
    pub const ALL: [WindowSize; 3] = [WindowSize::W160, WindowSize::W320, WindowSize::W1280];

    pub fn points(self) -> usize {
        match self {
            WindowSize::W160 => 160,
            WindowSize::W320 => 320,
            WindowSize::W1280 => 1280,
        }
    }

    pub fn from_points(points: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.points() == points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfdParams {
    pub k_max: usize,
    pub window: WindowSize,
    pub hop_points: usize,
}

impl Default for HfdParams {
    fn default() -> Self {
        Self::for_window(WindowSize::default())
    }
}

impl HfdParams {
    /// Default `k_max` of 10 and half-window hop.
    pub fn for_window(window: WindowSize) -> Self {
        Self {
            k_max: 10,
            window,
            hop_points: window.points() / 2,
        }
    }

    pub fn validate(&self) -> Result<(), FractalError> {
        let w = self.window.points();
        if self.k_max < 2 || 2 * self.k_max >= w {
            return Err(FractalError::InvalidParams(format!(
                "k_max={} must satisfy 2 <= k_max < {}",
                self.k_max,
                w / 2
            )));
        }
        if self.hop_points == 0 {
            return Err(FractalError::InvalidParams("hop_points must be positive".into()));
        }
        Ok(())
    }
}

/// HFD per window. Constant windows are recorded as 1.0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HfdSeries {
    pub values: Vec<f64>,
    pub start_s: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl HfdSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Windowed HFD over raw samples.
pub fn windowed_hfd_samples(
    samples: &[f64],
    sample_rate_hz: u32,
    params: &HfdParams,
) -> Result<HfdSeries, FractalError> {
    params.validate()?;
    let window = params.window.points();
    let frames = frame_signal(samples.len(), window, params.hop_points);
    if frames.is_empty() {
        return Err(FractalError::EmptySeries { n: samples.len(), window });
    }
    let mut series = HfdSeries {
        values: Vec::with_capacity(frames.len()),
        start_s: Vec::with_capacity(frames.len()),
        degenerate: Vec::with_capacity(frames.len()),
    };
    for f in frames {
        let (value, degenerate) = match higuchi_fd(f.slice(samples), params.k_max) {
            Ok(v) => (v, false),
            Err(FractalError::Degenerate) => (1.0, true),
            Err(e) => return Err(e),
        };
        series.values.push(value);
        series.start_s.push(f.start_index as f64 / sample_rate_hz as f64);
        series.degenerate.push(degenerate);
    }
    Ok(series)
}

pub fn windowed_hfd(clip: &AudioClip, params: &HfdParams) -> Result<HfdSeries, FractalError> {
    windowed_hfd_samples(clip.samples(), clip.sample_rate_hz(), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VhfdSummary {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub variance: f64,
    pub std: f64,
}

pub fn vhfd_summary(series: &HfdSeries) -> Result<VhfdSummary, FractalError> {
    let (min, max) = stats::min_max(&series.values).ok_or(FractalError::EmptySummary)?;
    let variance = stats::variance(&series.values);
    Ok(VhfdSummary {
        mean: stats::mean(&series.values),
        max,
        min,
        variance,
        std: variance.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAMP: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

    #[test]
    fn ramp_offsets() {
        assert_eq!(curve_length_mk(&RAMP, 1, 1).unwrap(), 4.0);
        assert_eq!(curve_length_mk(&RAMP, 1, 2).unwrap(), 4.0);
        assert_eq!(curve_length(&RAMP, 1).unwrap(), 4.0);
        assert_eq!(curve_length(&RAMP, 2).unwrap(), 4.0);
    }

    #[test]
    fn constant_is_zero() {
        let x = [3.0; 12];
        for k in 1..=4 {
            for m in 1..=k {
                assert_eq!(curve_length_mk(&x, m, k).unwrap(), 0.0);
            }
            assert_eq!(curve_length(&x, k).unwrap(), 0.0);
        }
        assert_eq!(higuchi_fd(&x, 4), Err(FractalError::Degenerate));
    }

    #[test]
    fn period_two_alternation() {
        let x = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(curve_length(&x, 2).unwrap(), 0.0);
    }

    #[test]
    fn undefined_scale() {
        assert!(matches!(curve_length_mk(&RAMP, 1, 5), Err(FractalError::UndefinedScale { .. })));
        assert!(matches!(curve_length_mk(&RAMP, 0, 1), Err(FractalError::UndefinedScale { .. })));
        assert!(matches!(higuchi_fd(&RAMP, 3), Err(FractalError::TooShort { .. })));
    }

    #[test]
    fn summary_values() {
        let s = HfdSeries {
            values: vec![1.0, 1.5, 2.0],
            start_s: vec![0.0; 3],
            degenerate: vec![false; 3],
        };
        let v = vhfd_summary(&s).unwrap();
        assert_eq!((v.mean, v.max, v.min), (1.5, 2.0, 1.0));
        assert!((v.variance - 1.0 / 6.0).abs() < 1e-15);
        assert!((v.std - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);

        let single = HfdSeries { values: vec![1.3], start_s: vec![0.0], degenerate: vec![false] };
        let v = vhfd_summary(&single).unwrap();
        assert_eq!((v.mean, v.max, v.min, v.variance), (1.3, 1.3, 1.3, 0.0));

        let empty = HfdSeries { values: vec![], start_s: vec![], degenerate: vec![] };
        assert_eq!(vhfd_summary(&empty), Err(FractalError::EmptySummary));
    }

    #[test]
    fn window_count_and_silence() {
        let params = HfdParams::default();
        assert_eq!(params.window.points(), 320);
        assert_eq!(params.hop_points, 160);
        let s = windowed_hfd_samples(&vec![0.0; 2560], 16000, &params).unwrap();
        assert_eq!(s.len(), 15);
        assert!(s.values.iter().all(|&v| v == 1.0));
        assert!(s.degenerate.iter().all(|&d| d));
        assert!(matches!(
            windowed_hfd_samples(&[0.1; 100], 16000, &params),
            Err(FractalError::EmptySeries { n: 100, window: 320 })
        ));
    }

    #[test]
    fn param_validation() {
        let mut p = HfdParams::for_window(WindowSize::W160);
        p.k_max = 80;
        assert!(p.validate().is_err());
        p.k_max = 1;
        assert!(p.validate().is_err());
        assert!(HfdParams::for_window(WindowSize::W160).validate().is_ok());
    }
}
