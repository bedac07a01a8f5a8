use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError, validate_training};

/// Hidden layer width: attributes plus classes.
pub fn hidden_units(n_attributes: usize, n_classes: usize) -> usize {
    n_attributes + n_classes
}

/// Training epochs: ten per hidden unit.
pub fn training_steps(hidden: usize) -> usize {
    10 * hidden
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Overrides [`hidden_units`].
    pub hidden: Option<usize>,
    /// Overrides [`training_steps`].
    pub epochs: Option<usize>,
    /// Initial weights are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { learning_rate: 0.3, momentum: 0.2, hidden: None, epochs: None, init_scale: 0.05 }
    }
}

/// Per-feature affine map of the training range onto [-1, 1]. Constant
/// features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    /// Ranges that leave data already in [-1, 1] untouched.
    pub fn identity(dim: usize) -> Self {
        Self { min: vec![-1.0; dim], max: vec![1.0; dim] }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 { 2.0 * (v - lo) / range - 1.0 } else { 0.0 }
            })
            .collect()
    }
}

/// Weights of a single-hidden-layer network: logistic hidden units, softmax
/// output. Matrices are row-major, one row per receiving unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub(crate) struct Activations {
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Network {
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
            w1: vec![0.0; n_hidden * n_in],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; n_out * n_hidden],
            b2: vec![0.0; n_out],
        }
    }

    pub fn random(n_in: usize, n_hidden: usize, n_out: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(n_in, n_hidden, n_out);
        for p in net.params_mut() {
            *p = rng.gen_range(-scale..=scale);
        }
        net
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Activations {
        let hidden: Vec<f64> = (0..self.n_hidden)
            .map(|h| {
                let row = &self.w1[h * self.n_in..(h + 1) * self.n_in];
                sigmoid(self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect();
        let logits: Vec<f64> = (0..self.n_out)
            .map(|o| {
                let row = &self.w2[o * self.n_hidden..(o + 1) * self.n_hidden];
                self.b2[o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        Activations { hidden, probs: softmax(&logits) }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).probs
    }

    /// Cross-entropy loss for target class `y` and its gradient with respect
    /// to every weight, laid out like `self`.
    pub fn loss_and_gradient(&self, x: &[f64], y: usize) -> (f64, Network) {
        let act = self.forward(x);
        let mut grad = Network::zeros(self.n_in, self.n_hidden, self.n_out);
        let loss = -act.probs[y].max(f64::MIN_POSITIVE).ln();

        let dz: Vec<f64> = act
            .probs
            .iter()
            .enumerate()
            .map(|(o, &p)| p - if o == y { 1.0 } else { 0.0 })
            .collect();
        let mut dh = vec![0.0; self.n_hidden];
        for o in 0..self.n_out {
            grad.b2[o] = dz[o];
            for h in 0..self.n_hidden {
                grad.w2[o * self.n_hidden + h] = dz[o] * act.hidden[h];
                dh[h] += self.w2[o * self.n_hidden + h] * dz[o];
            }
        }
        for h in 0..self.n_hidden {
            let da = dh[h] * act.hidden[h] * (1.0 - act.hidden[h]);
            grad.b1[h] = da;
            for i in 0..self.n_in {
                grad.w1[h * self.n_in + i] = da * x[i];
            }
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub scaler: MinMaxScaler,
    pub class_names: Vec<String>,
    pub epochs: usize,
    pub seed: u64,
}

impl MlpModel {
    pub fn hidden(&self) -> usize {
        self.network.n_hidden
    }

    /// Untrained all-zero model; predicts the uniform distribution.
    pub fn zeroed(n_attributes: usize, class_names: Vec<String>) -> Self {
        let n_classes = class_names.len();
        Self {
            network: Network::zeros(n_attributes, hidden_units(n_attributes, n_classes), n_classes),
            scaler: MinMaxScaler::identity(n_attributes),
            class_names,
            epochs: 0,
            seed: 0,
        }
    }
}

impl Classifier for MlpModel {
    fn n_attributes(&self) -> usize {
        self.network.n_in
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        Ok(self.network.probabilities(&self.scaler.transform(x)))
    }
}

/// Online gradient descent with momentum on min-max scaled inputs.
/// Deterministic for a given `(rows, labels, params, seed)`.
pub fn train_mlp(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_names: &[String],
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel, ModelError> {
    let dim = validate_training(rows, labels, class_names.len())?;
    if !(params.learning_rate > 0.0 && (0.0..1.0).contains(&params.momentum)) {
        return Err(ModelError::Params(format!(
            "learning rate {} / momentum {} out of range",
            params.learning_rate, params.momentum
        )));
    }
    let n_classes = class_names.len();
    let hidden = params.hidden.unwrap_or_else(|| hidden_units(dim, n_classes));
    let epochs = params.epochs.unwrap_or_else(|| training_steps(hidden));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaler = MinMaxScaler::fit(rows);
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r)).collect();
    let mut net = Network::random(dim, hidden, n_classes, params.init_scale, &mut rng);
    let mut velocity = vec![0.0; net.n_params()];
    let mut order: Vec<usize> = (0..rows.len()).collect();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grad) = net.loss_and_gradient(&scaled[i], labels[i]);
            for ((w, v), g) in net.params_mut().zip(velocity.iter_mut()).zip(grad.params()) {
                *v = params.momentum * *v - params.learning_rate * g;
                *w += *v;
            }
        }
    }

    Ok(MlpModel { network: net, scaler, class_names: class_names.to_vec(), epochs, seed })
}

pub fn predict_mlp(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    model.predict_proba(x)
}
