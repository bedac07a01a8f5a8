//! Emotional temperature surrogate: a logistic score of how much pitch and
//! energy move between adjacent voiced frames, relative to a reference corpus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::PitchTrack;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum EtError {
    #[error("no recording has two adjacent voiced frames")]
    NoVoicedContent,
    #[error("pitch track has {pitch} frames but energy track has {energy}")]
    Misaligned { pitch: usize, energy: usize },
}

/// Smallest reference spread; smaller fitted values are raised to it.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtParams {
    pub ref_mean_pitch_slope: f64,
    pub ref_std_pitch_slope: f64,
    pub ref_mean_energy_slope: f64,
    pub ref_std_energy_slope: f64,
    pub pitch_weight: f64,
    pub energy_weight: f64,
    /// A fitted spread was below [`STD_FLOOR`].
    pub std_floored: bool,
}

/// Mean absolute frame-to-frame change of pitch (Hz/frame) and energy
/// (dB/frame) over pairs of adjacent voiced frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodicSlopes {
    pub pitch: f64,
    pub energy: f64,
}

pub fn prosodic_slopes(track: &PitchTrack, energy_db: &[f64]) -> Result<Option<ProsodicSlopes>, EtError> {
    if track.len() != energy_db.len() {
        return Err(EtError::Misaligned { pitch: track.len(), energy: energy_db.len() });
    }
    let mut dp = Vec::new();
    let mut de = Vec::new();
    for i in 1..track.len() {
        if track.f0_hz[i - 1] > 0.0 && track.f0_hz[i] > 0.0 {
            dp.push((track.f0_hz[i] - track.f0_hz[i - 1]).abs());
            de.push((energy_db[i] - energy_db[i - 1]).abs());
        }
    }
    if dp.is_empty() {
        return Ok(None);
    }
    Ok(Some(ProsodicSlopes { pitch: stats::mean(&dp), energy: stats::mean(&de) }))
}

/// Fits reference statistics over recordings' slopes; recordings without
/// voiced pairs (`None`) are skipped.
pub fn fit_et_reference(slopes: &[Option<ProsodicSlopes>]) -> Result<EtParams, EtError> {
    let usable: Vec<ProsodicSlopes> = slopes.iter().flatten().copied().collect();
    if usable.is_empty() {
        return Err(EtError::NoVoicedContent);
    }
    let pitch: Vec<f64> = usable.iter().map(|s| s.pitch).collect();
    let energy: Vec<f64> = usable.iter().map(|s| s.energy).collect();
    let (sp, se) = (stats::std_dev(&pitch), stats::std_dev(&energy));
    Ok(EtParams {
        ref_mean_pitch_slope: stats::mean(&pitch),
        ref_std_pitch_slope: sp.max(STD_FLOOR),
        ref_mean_energy_slope: stats::mean(&energy),
        ref_std_energy_slope: se.max(STD_FLOOR),
        pitch_weight: 1.0,
        energy_weight: 1.0,
        std_floored: sp < STD_FLOOR || se < STD_FLOOR,
    })
}

/// Convenience form of [`fit_et_reference`] over raw tracks.
pub fn fit_et_from_tracks(tracks: &[(&PitchTrack, &[f64])]) -> Result<EtParams, EtError> {
    let slopes = tracks
        .iter()
        .map(|(t, e)| prosodic_slopes(t, e))
        .collect::<Result<Vec<_>, _>>()?;
    fit_et_reference(&slopes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtScore {
    /// In [0, 100].
    pub value: f64,
    /// No voiced pairs; value forced to 0.
    pub degenerate: bool,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn score_slopes(slopes: Option<ProsodicSlopes>, params: &EtParams) -> EtScore {
    let Some(s) = slopes else {
        return EtScore { value: 0.0, degenerate: true };
    };
    let zp = (s.pitch - params.ref_mean_pitch_slope) / params.ref_std_pitch_slope;
    let ze = (s.energy - params.ref_mean_energy_slope) / params.ref_std_energy_slope;
    let value = 100.0 * logistic(params.pitch_weight * zp + params.energy_weight * ze);
    EtScore { value: value.clamp(0.0, 100.0), degenerate: false }
}

pub fn emotional_temperature(track: &PitchTrack, energy_db: &[f64], params: &EtParams) -> Result<EtScore, EtError> {
    Ok(score_slopes(prosodic_slopes(track, energy_db)?, params))
}
