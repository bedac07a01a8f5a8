use std::collections::BTreeSet;

use fractvox::audio::{AudioClip, frame_signal};
use fractvox::eval::{ConfusionMatrix, EvalReport, full_grid, stratified_folds};
use fractvox::fractal::{curve_length, higuchi_fd};
use fractvox::model::{
    BaseKind, Classifier, MinMaxScaler, MlpModel, MlpParams, Network, OneClassParams, calibrate_threshold,
    train_mlp, train_one_class,
};
use fractvox::vad::{VadParams, classify_frames, flags_from_segments, segments_from_flags};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_stay_in_bounds(n in 0usize..5000, win in 1usize..600, hop in 1usize..300) {
        let frames = frame_signal(n, win, hop);
        let expected = if n >= win { (n - win) / hop + 1 } else { 0 };
        prop_assert_eq!(frames.len(), expected);
        for (i, f) in frames.iter().enumerate() {
            prop_assert_eq!(f.start_index, i * hop);
            prop_assert_eq!(f.length, win);
            prop_assert!(f.start_index + f.length <= n);
        }
    }

    #[test]
    fn vad_ignores_gain(amps in prop::collection::vec(0.0f64..1.0, 2..12), noise in series(4800..4801), shift in -3i32..4) {
        // Bursts of a 100 Hz tone at random levels over a noise floor, peak <= 1/8.
        let x: Vec<f64> = (0..amps.len() * 400)
            .map(|i| {
                let tone = (2.0 * std::f64::consts::PI * 100.0 * i as f64 / 8000.0).sin();
                0.1 * amps[i / 400] * tone + 0.02 * noise[i % noise.len()]
            })
            .collect();
        let gain = 2f64.powi(shift);
        let a = AudioClip::new(x.clone(), 8000, "a").unwrap();
        let b = AudioClip::new(x.iter().map(|v| v * gain).collect(), 8000, "b").unwrap();
        let p = VadParams::default();
        prop_assert_eq!(classify_frames(&a, &p).unwrap(), classify_frames(&b, &p).unwrap());
    }

    #[test]
    fn smoothing_is_idempotent(flags in prop::collection::vec(any::<bool>(), 1..300)) {
        let once = segments_from_flags(&flags, 10.0, 30.0);
        let twice = segments_from_flags(&flags_from_segments(&once, 10.0), 10.0, 30.0);
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.iter().zip(&twice) {
            prop_assert_eq!(a.kind, b.kind);
            prop_assert!((a.start_s - b.start_s).abs() < 1e-9);
            prop_assert!((a.duration_s - b.duration_s).abs() < 1e-9);
        }
        let total: f64 = once.iter().map(|s| s.duration_s).sum();
        prop_assert!((total - flags.len() as f64 * 0.01).abs() < 1e-9);
    }

    #[test]
    fn hfd_ignores_affine_maps(x in series(64..400), a in 0.1f64..10.0, neg in any::<bool>(), b in -5.0f64..5.0) {
        let a = if neg { -a } else { a };
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (dx, dy) = (higuchi_fd(&x, 6).unwrap(), higuchi_fd(&y, 6).unwrap());
        prop_assert!((dx - dy).abs() < 1e-9, "{} vs {}", dx, dy);
    }

    #[test]
    fn curve_length_scales_linearly(x in series(40..200), a in 0.01f64..100.0, k in 1usize..6) {
        let y: Vec<f64> = x.iter().map(|v| a * v).collect();
        let (lx, ly) = (curve_length(&x, k).unwrap(), curve_length(&y, k).unwrap());
        prop_assert!((ly - a * lx).abs() <= 1e-9 * ly.abs().max(1.0));
    }

    #[test]
    fn softmax_is_a_distribution(seed in any::<u64>(), x in prop::collection::vec(-50.0f64..50.0, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::random(3, 5, 4, 10.0, &mut rng);
        let p = net.probabilities(&x);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cer_and_acc_sum_to_100(a in 0usize..50, b in 0usize..50, c in 0usize..50, d in 0usize..50) {
        prop_assume!(a + b + c + d > 0);
        let mut m = ConfusionMatrix::binary();
        m.counts = vec![vec![a, b], vec![c, d]];
        let r = EvalReport::from_confusion(full_grid(10, 0)[0], m, BTreeSet::new());
        prop_assert_eq!(r.global_cer_pct + r.global_acc_pct, 100.0);
        prop_assert!(r.per_class_cer_pct.iter().all(|v| (0.0..=100.0).contains(v)));
    }

    #[test]
    fn folds_partition_and_balance(labels in prop::collection::vec(0u8..3, 10..120), k in 2usize..11, seed in any::<u64>()) {
        let f = stratified_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(f.fold_of.len(), labels.len());
        let mut seen = vec![0usize; labels.len()];
        for fold in 0..k {
            for i in f.test_indices(fold) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for class in 0u8..3 {
            let sizes: Vec<usize> = (0..k)
                .map(|fold| f.test_indices(fold).iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {}: {:?}", class, sizes);
        }
    }

    #[test]
    fn calibration_meets_budget(scores in prop::collection::vec(0.0f64..1.0, 1..200), budget in 0.0f64..0.5) {
        let t = calibrate_threshold(&scores, budget);
        let accepted = scores.iter().filter(|&&s| s >= t).count() as f64;
        prop_assert!(accepted / scores.len() as f64 >= 1.0 - budget - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_is_internal(seed in any::<u64>(), x in prop::collection::vec(-20.0f64..20.0, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| Network::random(3, 1, 1, 10.0, &mut rng).w1).collect();
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let m = train_mlp(&rows, &labels, &names, &MlpParams::default(), seed).unwrap();
        let prescaled = MlpModel { scaler: MinMaxScaler::identity(3), ..m.clone() };
        let (p, q) = (m.predict_proba(&x).unwrap(), prescaled.predict_proba(&m.scaler.transform(&x)).unwrap());
        prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn training_is_a_pure_function(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<Vec<f64>> = (0..15).map(|_| Network::random(2, 1, 1, 1.0, &mut rng).w1).collect();
        for base in [BaseKind::Mlp, BaseKind::Bagging] {
            let p = OneClassParams::new(base);
            let a = train_one_class(&targets, "CR", &p, seed).unwrap();
            let b = train_one_class(&targets, "CR", &p, seed).unwrap();
            prop_assert_eq!(&a, &b);
            let accepted = targets.iter().filter(|t| a.accepts_score(a.score(t).unwrap())).count();
            prop_assert!(accepted as f64 >= 0.9 * targets.len() as f64);
        }
    }
}
