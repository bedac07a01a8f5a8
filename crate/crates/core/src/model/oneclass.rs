use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaggingModel, BaggingParams, Classifier, MlpModel, MlpParams, ModelError, train_bagging, train_mlp};

pub const TARGET: &str = "TARGET";
pub const ARTIFICIAL: &str = "ARTIFICIAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Mlp,
    Bagging,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneClassParams {
    pub base: BaseKind,
    /// Artificial instances per target instance.
    pub artificial_ratio: f64,
    /// Sampling box expansion as a fraction of each feature's range.
    pub margin: f64,
    /// Fraction of training targets the threshold may reject.
    pub rejection_budget: f64,
    pub mlp: MlpParams,
    pub bagging: BaggingParams,
}

impl OneClassParams {
    pub fn new(base: BaseKind) -> Self {
        Self {
            base,
            artificial_ratio: 1.0,
            margin: 0.1,
            rejection_budget: 0.10,
            mlp: MlpParams::default(),
            bagging: BaggingParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    Calibrated,
    /// Adjusted with labelled outliers; the rejection budget may no longer hold.
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum OneClassBase {
    Mlp(MlpModel),
    Bagging(BaggingModel),
}

impl OneClassBase {
    fn classifier(&self) -> &dyn Classifier {
        match self {
            OneClassBase::Mlp(m) => m,
            OneClassBase::Bagging(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassModel {
    pub target_class: String,
    pub base: OneClassBase,
    pub threshold: f64,
    pub calibrated_threshold: f64,
    pub threshold_source: ThresholdSource,
    pub params: OneClassParams,
}

impl OneClassModel {
    /// `P(TARGET | x)` from the base classifier.
    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.base.classifier().predict_proba(x)?[0])
    }

    pub fn n_attributes(&self) -> usize {
        self.base.classifier().n_attributes()
    }

    pub fn accepts_score(&self, score: f64) -> bool {
        score >= self.threshold
    }
}

/// Uniform samples from the target bounding box widened by `margin` times
/// each feature's range. Constant features use `margin * max(|v|, 1)`.
pub fn generate_artificial_outliers(targets: &[Vec<f64>], ratio: f64, margin: f64, seed: u64) -> Vec<Vec<f64>> {
    let Some(first) = targets.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let (lo, hi) = targets
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
            let range = hi - lo;
            if range > 0.0 {
                (lo - margin * range, hi + margin * range)
            } else {
                let w = margin * lo.abs().max(1.0);
                (lo - w, lo + w)
            }
        })
        .collect();
    let n = (ratio * targets.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect()
}

/// Largest threshold that accepts at least `1 - budget` of `scores`.
pub fn calibrate_threshold(scores: &[f64], budget: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let allowed_rejects = ((budget * n as f64) + 1e-9).floor() as usize;
    let accept = (n - allowed_rejects.min(n - 1)).max(1);
    sorted[accept - 1]
}

/// Threshold maximizing balanced accuracy on labelled target / outlier
/// scores. Candidates are midpoints between consecutive distinct scores plus
/// both extremes; ties keep the candidate closest to `current`.
pub fn refine_threshold(target_scores: &[f64], outlier_scores: &[f64], current: f64) -> f64 {
    if target_scores.is_empty() || outlier_scores.is_empty() {
        return current;
    }
    let mut all: Vec<f64> = target_scores.iter().chain(outlier_scores).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut candidates = vec![all[0]];
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(all[all.len() - 1] + 1e-12);

    let balanced = |t: f64| {
        let tpr = target_scores.iter().filter(|&&s| s >= t).count() as f64 / target_scores.len() as f64;
        let tnr = outlier_scores.iter().filter(|&&s| s < t).count() as f64 / outlier_scores.len() as f64;
        0.5 * (tpr + tnr)
    };
    let mut best = (f64::NEG_INFINITY, current);
    for t in candidates {
        let ba = balanced(t);
        let closer = (t - current).abs() < (best.1 - current).abs();
        if ba > best.0 + 1e-12 || ((ba - best.0).abs() <= 1e-12 && closer) {
            best = (ba, t);
        }
    }
    best.1
}

/// Trains the base classifier on targets versus generated artificial
/// outliers and calibrates the acceptance threshold on the targets.
pub fn train_one_class(
    targets: &[Vec<f64>],
    target_class: &str,
    params: &OneClassParams,
    seed: u64,
) -> Result<OneClassModel, ModelError> {
    if targets.is_empty() {
        return Err(ModelError::Empty);
    }
    if !(0.0..1.0).contains(&params.rejection_budget) || params.artificial_ratio <= 0.0 || params.margin < 0.0 {
        return Err(ModelError::Params("rejection budget, ratio or margin out of range".into()));
    }
    let artificial = generate_artificial_outliers(targets, params.artificial_ratio, params.margin, seed);
    let mut rows = targets.to_vec();
    rows.extend(artificial.iter().cloned());
    let labels: Vec<usize> = (0..rows.len()).map(|i| usize::from(i >= targets.len())).collect();
    let names = vec![TARGET.to_string(), ARTIFICIAL.to_string()];
    let base_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);

    let base = match params.base {
        BaseKind::Mlp => OneClassBase::Mlp(train_mlp(&rows, &labels, &names, &params.mlp, base_seed)?),
        BaseKind::Bagging => OneClassBase::Bagging(train_bagging(&rows, &labels, &names, &params.bagging, base_seed)?),
    };
    let mut model = OneClassModel {
        target_class: target_class.to_string(),
        base,
        threshold: 0.0,
        calibrated_threshold: 0.0,
        threshold_source: ThresholdSource::Calibrated,
        params: *params,
    };
    let scores = targets.iter().map(|t| model.score(t)).collect::<Result<Vec<_>, _>>()?;
    model.threshold = calibrate_threshold(&scores, params.rejection_budget);
    model.calibrated_threshold = model.threshold;
    Ok(model)
}

/// `(accept, score)` where accept means `score >= threshold`.
pub fn one_class_predict(model: &OneClassModel, x: &[f64]) -> Result<(bool, f64), ModelError> {
    let s = model.score(x)?;
    Ok((model.accepts_score(s), s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artificial_counts_and_bounds() {
        let targets: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, 3.0]).collect();
        let art = generate_artificial_outliers(&targets, 1.0, 0.1, 1);
        assert_eq!(art.len(), 20);
        assert!(art.iter().all(|r| (-0.1..=1.1).contains(&r[0])));
        assert!(art.iter().all(|r| (2.7..=3.3).contains(&r[1])));
        assert_eq!(art, generate_artificial_outliers(&targets, 1.0, 0.1, 1));
        assert_eq!(generate_artificial_outliers(&targets, 0.5, 0.1, 1).len(), 10);
    }

    #[test]
    fn calibration_budget() {
        let scores: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let t = calibrate_threshold(&scores, 0.1);
        assert_eq!(t, 0.1);
        let accepted = scores.iter().filter(|&&s| s >= t).count();
        assert_eq!(accepted, 18);
        assert_eq!(calibrate_threshold(&[0.7], 0.1), 0.7);
    }

    #[test]
    fn refinement_separates() {
        let t = refine_threshold(&[0.9, 0.8, 0.7], &[0.1, 0.2, 0.75], 0.5);
        assert!(t > 0.2 && t <= 0.7, "{t}");
        assert_eq!(refine_threshold(&[0.9], &[], 0.4), 0.4);
    }

    #[test]
    fn empty_targets() {
        assert!(matches!(
            train_one_class(&[], "CR", &OneClassParams::new(BaseKind::Mlp), 0),
            Err(ModelError::Empty)
        ));
    }
}
