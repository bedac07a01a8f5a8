//! Browser bindings for three interactive views: the Higuchi log-log fit on
//! a Weierstrass curve, a windowed HFD track, and a one-class decision map.
//! Everything crosses the boundary as flat `f64` arrays.

use fractvox::fractal::{HfdParams, WindowSize, higuchi_fd, scale_points, windowed_hfd_samples};
use fractvox::model::{BaseKind, OneClassModel, OneClassParams, train_one_class};
use fractvox::signals::{sine, weierstrass, white_noise};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Samples of a Weierstrass-type curve with box dimension `dimension`.
#[wasm_bindgen]
pub fn weierstrass_curve(dimension: f64, n: usize) -> Vec<f64> {
    weierstrass(dimension, n)
}

/// `[hfd, x_1, y_1, x_2, y_2, ...]` with `x = ln(1/k)`, `y = ln(L(k)/k)`.
#[wasm_bindgen]
pub fn hfd_loglog(dimension: f64, n: usize, k_max: usize) -> Result<Vec<f64>, JsError> {
    let x = weierstrass(dimension, n);
    let d = higuchi_fd(&x, k_max).map_err(js_err)?;
    let mut out = vec![d];
    for p in scale_points(&x, k_max).map_err(js_err)? {
        out.extend([p.ln_inv_k, p.ln_length]);
    }
    Ok(out)
}

pub const TRACK_RATE_HZ: u32 = 8_000;

/// One second of a 10 Hz sine followed by one second of white noise.
#[wasm_bindgen]
pub fn tone_then_noise(seed: u32) -> Vec<f64> {
    let n = TRACK_RATE_HZ as usize;
    let mut x = sine(10.0, TRACK_RATE_HZ, n, 0.5);
    x.extend(white_noise(n, u64::from(seed)).into_iter().map(|v| 0.15 * v));
    x
}

/// `[t_1, hfd_1, t_2, hfd_2, ...]` over [`tone_then_noise`] at a 160, 320 or
/// 1280 point window.
#[wasm_bindgen]
pub fn hfd_track(window_points: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    let window = WindowSize::from_points(window_points)
        .ok_or_else(|| JsError::new("window must be 160, 320 or 1280 points"))?;
    let series = windowed_hfd_samples(&tone_then_noise(seed), TRACK_RATE_HZ, &HfdParams::for_window(window))
        .map_err(js_err)?;
    Ok(series.start_s.iter().zip(&series.values).flat_map(|(&t, &v)| [t, v]).collect())
}

/// One-class model trained on a 2-D Gaussian cluster, sampled on a grid.
#[wasm_bindgen]
pub struct DecisionMap {
    model: OneClassModel,
    targets: Vec<f64>,
}

#[wasm_bindgen]
impl DecisionMap {
    /// `base` is `"mlp"` or `"bagging"`; targets are `n` points around the origin.
    #[wasm_bindgen(constructor)]
    pub fn new(base: &str, n: usize, spread: f64, seed: u32) -> Result<DecisionMap, JsError> {
        let base = match base {
            "mlp" => BaseKind::Mlp,
            "bagging" => BaseKind::Bagging,
            other => return Err(JsError::new(&format!("unknown base '{other}'"))),
        };
        if n < 2 || !(spread > 0.0) {
            return Err(JsError::new("need at least two targets and a positive spread"));
        }
        let noise = white_noise(2 * n, u64::from(seed));
        let rows: Vec<Vec<f64>> = noise.chunks(2).map(|c| vec![spread * c[0], spread * c[1]]).collect();
        let model = train_one_class(&rows, "CR", &OneClassParams::new(base), u64::from(seed)).map_err(js_err)?;
        Ok(DecisionMap { model, targets: rows.concat() })
    }

    pub fn threshold(&self) -> f64 {
        self.model.threshold
    }

    /// Flattened `[x_1, y_1, ...]` training targets.
    pub fn targets(&self) -> Vec<f64> {
        self.targets.clone()
    }

    /// Row-major `resolution x resolution` target scores over `[-extent, extent]^2`,
    /// first row at `y = extent`.
    pub fn scores(&self, extent: f64, resolution: usize) -> Result<Vec<f64>, JsError> {
        let step = if resolution > 1 { 2.0 * extent / (resolution - 1) as f64 } else { 0.0 };
        let mut out = Vec::with_capacity(resolution * resolution);
        for r in 0..resolution {
            let y = extent - r as f64 * step;
            for c in 0..resolution {
                let x = -extent + c as f64 * step;
                out.push(self.model.score(&[x, y]).map_err(js_err)?);
            }
        }
        Ok(out)
    }

    pub fn accepts(&self, x: f64, y: f64) -> Result<bool, JsError> {
        Ok(self.model.accepts_score(self.model.score(&[x, y]).map_err(js_err)?))
    }
}
