//! WAV decoding and frame slicing.

use std::io::Cursor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV data: {0}")]
    Decode(String),
    #[error("unsupported WAV format: {field} = {value}")]
    UnsupportedFormat { field: &'static str, value: String },
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("WAV encoding failed: {0}")]
    Encode(String),
}

/// Mono sample buffer with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: u32,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::InvalidClip("no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Number of samples covering `ms` milliseconds, rounded to nearest.
    pub fn ms_to_samples(&self, ms: f64) -> usize {
        (ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }
}

/// Decodes a 16-bit PCM RIFF/WAVE buffer. Stereo is averaged to mono.
pub fn decode_wav(bytes: &[u8], source_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::UnsupportedFormat {
            field: "sample_format",
            value: "float".into(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat {
            field: "bits_per_sample",
            value: spec.bits_per_sample.to_string(),
        });
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(AudioError::UnsupportedFormat {
            field: "channels",
            value: spec.channels.to_string(),
        });
    }

    let raw = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    let channels = spec.channels as usize;
    if raw.len() % channels != 0 {
        return Err(AudioError::Decode("truncated final frame".into()));
    }
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| s as f64 / 32768.0).sum();
            sum / channels as f64
        })
        .collect();
    if samples.is_empty() {
        return Err(AudioError::Decode("data chunk holds no samples".into()));
    }
    AudioClip::new(samples, spec.sample_rate, source_id)
}

/// Encodes a clip as mono 16-bit PCM. Amplitudes are rounded to the nearest
/// code and clamped to the i16 range, so 1.0 maps to 32767.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, AudioError> {
    encode_pcm16(&[clip.samples()], clip.sample_rate_hz())
}

/// Interleaves equally long channel buffers into a 16-bit PCM WAV.
pub fn encode_pcm16(channels: &[&[f64]], sample_rate_hz: u32) -> Result<Vec<u8>, AudioError> {
    let n = channels.first().map_or(0, |c| c.len());
    if channels.is_empty() || channels.iter().any(|c| c.len() != n) {
        return Err(AudioError::Encode("channel buffers must be non-empty and equal length".into()));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer =
            hound::WavWriter::new(&mut cursor, spec).map_err(|e| AudioError::Encode(e.to_string()))?;
        for i in 0..n {
            for ch in channels {
                let code = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer
                    .write_sample(code)
                    .map_err(|e| AudioError::Encode(e.to_string()))?;
            }
        }
        writer
            .finalize()
            .map_err(|e| AudioError::Encode(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported => AudioError::UnsupportedFormat {
            field: "format_tag",
            value: "non-PCM".into(),
        },
        other => AudioError::Decode(other.to_string()),
    }
}

/// A window into a sample buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameView {
    pub start_index: usize,
    pub length: usize,
    pub hop: usize,
}

impl FrameView {
    pub fn slice<'a>(&self, samples: &'a [f64]) -> &'a [f64] {
        &samples[self.start_index..self.start_index + self.length]
    }
}

/// Splits `n_samples` into frames of `win_len` every `hop` samples, without
/// tail padding. Yields `floor((n - win) / hop) + 1` frames when `n >= win`.
///
/// Panics if `win_len` or `hop` is zero.
pub fn frame_signal(n_samples: usize, win_len: usize, hop: usize) -> Vec<FrameView> {
    assert!(win_len > 0 && hop > 0, "frame length and hop must be positive");
    if n_samples < win_len {
        return Vec::new();
    }
    let count = (n_samples - win_len) / hop + 1;
    (0..count)
        .map(|i| FrameView {
            start_index: i * hop,
            length: win_len,
            hop,
        })
        .collect()
}

/// Convenience wrapper over [`frame_signal`] for a clip.
pub fn frame_clip(clip: &AudioClip, win_len: usize, hop: usize) -> Vec<FrameView> {
    frame_signal(clip.len(), win_len, hop)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_from_codes(codes: &[i16], channels: u16, bits: u16) -> Vec<u8> {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
        for &c in codes {
            if bits == 16 {
                w.write_sample(c).unwrap();
            } else {
                w.write_sample(c as i32).unwrap();
            }
        }
        w.finalize().unwrap();
        cursor.into_inner()
    }

    #[test]
    fn mono_scaling() {
        let clip = decode_wav(&wav_from_codes(&[0, 16384, -16384], 1, 16), "a").unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -0.5]);
        assert_eq!(clip.sample_rate_hz(), 16000);
        assert_eq!(clip.source_id(), "a");
    }

    #[test]
    fn stereo_is_averaged() {
        let clip = decode_wav(&wav_from_codes(&[16384, -16384], 2, 16), "s").unwrap();
        assert_eq!(clip.samples(), &[0.0]);
    }

    #[test]
    fn rejects_24_bit() {
        let err = decode_wav(&wav_from_codes(&[1, 2, 3], 1, 24), "x").unwrap_err();
        match err {
            AudioError::UnsupportedFormat { field, value } => {
                assert_eq!(field, "bits_per_sample");
                assert_eq!(value, "24");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            decode_wav(b"RIFF\x00\x00not a wave file", "g"),
            Err(AudioError::Decode(_))
        ));
        assert!(matches!(decode_wav(&[], "g"), Err(AudioError::Decode(_))));
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![], 16000, "e").is_err());
        assert!(AudioClip::new(vec![0.0], 0, "e").is_err());
        assert!(AudioClip::new(vec![1.5], 16000, "e").is_err());
    }

    #[test]
    fn frame_counts() {
        let starts: Vec<_> = frame_signal(100, 40, 20).iter().map(|f| f.start_index).collect();
        assert_eq!(starts, vec![0, 20, 40, 60]);
        assert!(frame_signal(39, 40, 20).is_empty());
        let frames = frame_signal(120, 40, 40);
        assert_eq!(frames.len(), 3);
        assert!(frames.windows(2).all(|w| w[0].start_index + w[0].length <= w[1].start_index));
    }
}
