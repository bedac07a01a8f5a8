//! Reference values computed by straightforward re-derivations that share no
//! code with the library: a 1-based transcription of the Higuchi curve
//! length, a naive DFT, finite-difference gradients, and a Monte-Carlo check
//! of indistinguishable classes.

use std::f64::consts::PI;

use fractvox::dataset::FeatureSetId;
use fractvox::eval::{ExperimentCell, ModelSettings, Scheme, run_cell, synth_corpus};
use fractvox::fractal::{curve_length, higuchi_fd};
use fractvox::linear::spectral_centroid;
use fractvox::model::Network;
use fractvox::signals::{sine, weierstrass, white_noise};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x` is read as `x(1), ..., x(N)`.
fn oracle_curve_length(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let at = |i: usize| x[i - 1];
    let mut total = 0.0;
    for m in 1..=k {
        let p = (n - m) / k;
        let mut s = 0.0;
        let mut i = 1;
        while i <= p {
            s += (at(m + i * k) - at(m + (i - 1) * k)).abs();
            i += 1;
        }
        total += s * (n as f64 - 1.0) / (p as f64 * k as f64);
    }
    total / k as f64
}

fn oracle_hfd(x: &[f64], k_max: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (1..=k_max)
        .map(|k| {
            let kf = k as f64;
            ((1.0 / kf).ln(), (oracle_curve_length(x, k) / kf).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn curve_length_hand_values() {
    assert_eq!(oracle_curve_length(&[0.0, 1.0, 2.0, 3.0, 4.0], 1), 4.0);
    assert_eq!(curve_length(&[0.0, 1.0, 2.0, 3.0, 4.0], 1).unwrap(), 4.0);
    let alt = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    assert_eq!(oracle_curve_length(&alt, 2), 0.0);
    assert_eq!(curve_length(&alt, 2).unwrap(), 0.0);
}

#[test]
fn curve_length_matches_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for k in 1..=6 {
            let (a, b) = (curve_length(&x, k).unwrap(), oracle_curve_length(&x, k));
            assert!((a - b).abs() <= 1e-12, "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn hfd_matches_oracle_fit() {
    let cases = [
        weierstrass(1.2, 1280),
        weierstrass(1.5, 1280),
        weierstrass(1.8, 1280),
        white_noise(1280, 3),
        sine(10.0, 1000, 1280, 1.0),
    ];
    for x in cases {
        let (a, b) = (higuchi_fd(&x, 10).unwrap(), oracle_hfd(&x, 10));
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn oracle_recovers_known_dimensions() {
    for d in [1.2, 1.5, 1.8] {
        let est = oracle_hfd(&weierstrass(d, 1280), 10);
        assert!((est - d).abs() <= 0.1, "D={d}: {est}");
    }
    let noise = oracle_hfd(&white_noise(1280, 5), 10);
    assert!((1.9..=2.05).contains(&noise), "{noise}");
    let tone = oracle_hfd(&sine(10.0, 1000, 1280, 1.0), 10);
    assert!((1.0..=1.1).contains(&tone), "{tone}");
}

fn naive_centroid(x: &[f64], fs: f64) -> f64 {
    let n = x.len();
    let (mut w, mut t) = (0.0, 0.0);
    for bin in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            let a = -2.0 * PI * (bin * i) as f64 / n as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let mag = re.hypot(im);
        w += bin as f64 * fs / n as f64 * mag;
        t += mag;
    }
    if t > 0.0 { w / t } else { 0.0 }
}

#[test]
fn centroid_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for len in [64, 100, 400, 401] {
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (spectral_centroid(&x, 16_000), naive_centroid(&x, 16_000.0));
        assert!((a - b).abs() < 1e-6 * b.max(1.0), "len {len}: {a} vs {b}");
    }
    let tone = sine(440.0, 16_000, 400, 1.0);
    assert!((naive_centroid(&tone, 16_000.0) - 440.0).abs() < 10.0);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    for trial in 0..20 {
        let net = Network::random(3, 5, 2, 1.0, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = trial % 2;
        let (_, grad) = net.loss_and_gradient(&x, y);
        let analytic: Vec<f64> = grad.params().copied().collect();
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            *minus.params_mut().nth(i).unwrap() -= h;
            let loss = |n: &Network| -n.probabilities(&x)[y].ln();
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4 || (g - numeric).abs() < 1e-9, "param {i}: {g} vs {numeric}");
        }
    }
}

#[test]
fn indistinguishable_classes_hover_at_chance() {
    let settings = ModelSettings::default();
    let seeds = 20;
    let mean: f64 = (0..seeds)
        .map(|seed| {
            let table = synth_corpus(30, 30, 4, 0.0, seed);
            let cell = ExperimentCell {
                scheme: Scheme::MulticlassMlp,
                feature_set: FeatureSetId::SsfEfEtVhfd,
                outliers_in_training: true,
                folds: 5,
                seed,
            };
            run_cell(&cell, &table, &settings).unwrap().global_cer_pct
        })
        .sum::<f64>()
        / seeds as f64;
    assert!((mean - 50.0).abs() <= 10.0, "{mean}");
}
