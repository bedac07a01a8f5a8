//! Speech biomarker extraction (fluency, prosody, voice quality, Higuchi
//! fractal dimension) and multi-class versus one-class evaluation under
//! class imbalance.

pub mod audio;
pub mod dataset;
pub mod emotion;
pub mod eval;
pub mod fractal;
pub mod linear;
pub mod model;
pub mod pipeline;
pub mod signals;
pub mod stats;
pub mod vad;

/// Independent per-stream seed from a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
