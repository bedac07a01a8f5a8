use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError, validate_training};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 5, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { probs: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART tree with Gini splits. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.params.max_depth || idx.len() < self.params.min_samples_split {
            None
        } else {
            self.best_split(&idx, &counts)
        };
        let Some((feature, threshold)) = split else {
            let n = idx.len().max(1) as f64;
            self.nodes.push(Node::Leaf { probs: counts.iter().map(|&c| c as f64 / n).collect() });
            return self.nodes.len() - 1;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Lowest weighted child impurity, strictly below the parent's. Ties keep
    /// the first candidate in (feature, threshold) order.
    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = gini(counts, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let dim = self.rows[idx[0]].len();
        let mut sorted = idx.to_vec();
        for f in 0..dim {
            sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.to_vec();
            for pos in 0..n - 1 {
                let i = sorted[pos];
                left[self.labels[i]] += 1;
                right[self.labels[i]] -= 1;
                let (v, next) = (self.rows[i][f], self.rows[sorted[pos + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = pos + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if score < parent - 1e-12 && best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, 0.5 * (v + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, params: TreeParams) -> Self {
        let mut b = Builder { rows, labels, n_classes, params, nodes: Vec::new() };
        b.build((0..rows.len()).collect(), 0);
        Self { nodes: b.nodes, n_classes }
    }

    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { probs } => return probs,
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(self.leaf_probs(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaggingParams {
    pub n_bags: usize,
    pub tree: TreeParams,
}

impl Default for BaggingParams {
    fn default() -> Self {
        Self { n_bags: 10, tree: TreeParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggingModel {
    pub members: Vec<DecisionTree>,
    pub class_names: Vec<String>,
    pub n_attributes: usize,
    pub seed: u64,
}

/// `n_bags` bootstrap resamples of `0..n`, each of `n` draws with replacement.
pub fn bootstrap_indices(n: usize, n_bags: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_bags).map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect()).collect()
}

/// Majority vote over member predictions; ties go to the earlier class.
pub(crate) fn majority(votes: impl IntoIterator<Item = usize>, n_classes: usize) -> usize {
    let mut tally = vec![0usize; n_classes];
    for v in votes {
        tally[v] += 1;
    }
    let tally: Vec<f64> = tally.into_iter().map(|c| c as f64).collect();
    super::argmax(&tally)
}

impl BaggingModel {
    pub fn vote(&self, x: &[f64]) -> Result<usize, ModelError> {
        self.check_dim(x)?;
        Ok(majority(self.members.iter().map(|t| t.predict(x)), self.class_names.len()))
    }
}

impl Classifier for BaggingModel {
    fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Mean of the members' leaf class frequencies.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        let mut p = vec![0.0; self.class_names.len()];
        for t in &self.members {
            for (acc, v) in p.iter_mut().zip(t.leaf_probs(x)) {
                *acc += v;
            }
        }
        let n = self.members.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        Ok(p)
    }

    fn predict(&self, x: &[f64]) -> Result<usize, ModelError> {
        self.vote(x)
    }
}

pub fn train_bagging(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_names: &[String],
    params: &BaggingParams,
    seed: u64,
) -> Result<BaggingModel, ModelError> {
    let dim = validate_training(rows, labels, class_names.len())?;
    if params.n_bags == 0 {
        return Err(ModelError::Params("n_bags must be positive".into()));
    }
    let members = bootstrap_indices(rows.len(), params.n_bags, seed)
        .into_iter()
        .map(|idx| {
            let r: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            DecisionTree::fit(&r, &l, class_names.len(), params.tree)
        })
        .collect();
    Ok(BaggingModel { members, class_names: class_names.to_vec(), n_attributes: dim, seed })
}
