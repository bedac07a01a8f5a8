//! Deterministic synthetic signals for fixtures, demos and desk-scale corpora.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn sine(freq_hz: f64, sample_rate_hz: u32, n: usize, amplitude: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sample_rate_hz as f64).sin())
        .collect()
}

/// Standard Gaussian white noise.
pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Uniform noise on [-amplitude, amplitude].
pub fn uniform_noise(n: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-amplitude..=amplitude)).collect()
}

/// Samples `W(t) = sum_j a^j cos(2 pi b^j t)` at `t = i / n` with `b = 1.5`
/// and `a = b^(D - 2)`, whose graph has box dimension `D` for `1 < D < 2`.
/// Terms are kept while `b^j <= 16 n`.
pub fn weierstrass(dimension: f64, n: usize) -> Vec<f64> {
    const B: f64 = 1.5;
    let a = B.powf(dimension - 2.0);
    let mut terms = Vec::new();
    let mut j = 0;
    while B.powi(j) <= 16.0 * n as f64 {
        terms.push((a.powi(j), 2.0 * PI * B.powi(j)));
        j += 1;
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            terms.iter().map(|(amp, w)| amp * (w * t).cos()).sum()
        })
        .collect()
}

/// Rescales to a peak absolute value of `peak` (no-op for all-zero input).
pub fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

/// Knobs for [`speech_like`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeechStyle {
    pub f0_hz: f64,
    /// Relative cycle-to-cycle pitch wobble (standard deviation).
    pub jitter: f64,
    /// Relative per-utterance amplitude wobble.
    pub shimmer: f64,
    /// Mean pause between utterances in seconds.
    pub pause_s: f64,
    /// Additive noise level relative to the voiced peak.
    pub noise: f64,
}

impl SpeechStyle {
    pub fn fluent() -> Self {
        Self { f0_hz: 180.0, jitter: 0.005, shimmer: 0.05, pause_s: 0.15, noise: 0.01 }
    }

    pub fn hesitant() -> Self {
        Self { f0_hz: 140.0, jitter: 0.02, shimmer: 0.15, pause_s: 0.6, noise: 0.03 }
    }
}

/// A crude voiced/pause alternation with harmonic excitation, used to drive
/// the extraction pipeline end to end without real recordings.
pub fn speech_like(style: SpeechStyle, duration_s: f64, sample_rate_hz: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate_hz as f64;
    let n = (duration_s * fs) as usize;
    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    while out.len() < n {
        let utter = (0.3 + 0.5 * rng.gen_range(0.0..1.0)) * fs;
        let amp = 0.5 * (1.0 + style.shimmer * rng.sample::<f64, _>(StandardNormal));
        let base = style.f0_hz * (1.0 + 0.1 * (rng.gen_range(0.0..1.0) - 0.5));
        let mut f0 = base;
        for i in 0..utter as usize {
            if i % 64 == 0 {
                f0 = base * (1.0 + style.jitter * rng.sample::<f64, _>(StandardNormal));
            }
            phase += 2.0 * PI * f0 / fs;
            let env = (PI * i as f64 / utter).sin();
            let v = (phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin()) / 1.75;
            out.push(amp * env * v + style.noise * rng.gen_range(-1.0..1.0));
        }
        let pause = (style.pause_s * (0.5 + rng.gen_range(0.0..1.0))) * fs;
        for _ in 0..pause as usize {
            out.push(style.noise * rng.gen_range(-1.0..1.0));
        }
    }
    out.truncate(n);
    for v in &mut out {
        *v = v.clamp(-1.0, 1.0);
    }
    out
}
