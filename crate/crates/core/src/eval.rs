//! Stratified cross-validation over the scheme x feature-set x outlier-mode
//! grid, CER/accuracy bookkeeping, the synthetic corpus, and grid reports.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BinaryLabel, FeatureSetId, FeatureTable, LabeledInstance, Stage, placeholder_columns};
use crate::derive_seed;
use crate::model::{
    BaseKind, Classifier, ConstantModel, MlpParams, ModelError, OneClassParams, SavedModel, one_class_predict,
    refine_threshold, train_mlp, train_one_class,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("internal evaluation error: {0}")]
    Internal(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    MulticlassMlp,
    OneclassMlp,
    OneclassBagging,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::MulticlassMlp, Scheme::OneclassMlp, Scheme::OneclassBagging];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::MulticlassMlp => "multiclass_mlp",
            Scheme::OneclassMlp => "oneclass_mlp",
            Scheme::OneclassBagging => "oneclass_bagging",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| EvalError::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub scheme: Scheme,
    pub feature_set: FeatureSetId,
    pub outliers_in_training: bool,
    pub folds: usize,
    pub seed: u64,
}

impl ExperimentCell {
    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        format!(
            "{}__{}__{}",
            self.scheme,
            self.feature_set,
            if self.outliers_in_training { "with_outliers" } else { "no_outliers" }
        )
    }
}

/// Every scheme x feature set x outlier mode, in report order.
pub fn full_grid(folds: usize, seed: u64) -> Vec<ExperimentCell> {
    let mut cells = Vec::with_capacity(18);
    for scheme in Scheme::ALL {
        for feature_set in FeatureSetId::ALL {
            for outliers_in_training in [false, true] {
                cells.push(ExperimentCell { scheme, feature_set, outliers_in_training, folds, seed });
            }
        }
    }
    cells
}

/// Hyperparameters shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub mlp: MlpParams,
    pub oneclass_mlp: OneClassParams,
    pub oneclass_bagging: OneClassParams,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            mlp: MlpParams::default(),
            oneclass_mlp: OneClassParams::new(BaseKind::Mlp),
            oneclass_bagging: OneClassParams::new(BaseKind::Bagging),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self { classes, counts: vec![vec![0; n]; n] }
    }

    pub fn binary() -> Self {
        Self::new(BinaryLabel::ALL.iter().map(|l| l.as_str().to_string()).collect())
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    /// `100 * errors / total`; 0 for an empty matrix.
    pub fn cer_pct(&self) -> f64 {
        let total = self.total();
        if total == 0 { 0.0 } else { 100.0 * (total - self.correct()) as f64 / total as f64 }
    }

    /// Error rate within one true class; 0 when the class never occurs.
    pub fn class_cer_pct(&self, class: usize) -> f64 {
        let row = self.row_total(class);
        if row == 0 { 0.0 } else { 100.0 * (row - self.counts[class][class]) as f64 / row as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cell: ExperimentCell,
    pub confusion: ConfusionMatrix,
    pub global_cer_pct: f64,
    pub global_acc_pct: f64,
    pub per_class_cer_pct: Vec<f64>,
    pub flags: BTreeSet<String>,
}

impl EvalReport {
    pub fn from_confusion(cell: ExperimentCell, confusion: ConfusionMatrix, flags: BTreeSet<String>) -> Self {
        let cer = confusion.cer_pct();
        let per_class_cer_pct = (0..confusion.classes.len()).map(|c| confusion.class_cer_pct(c)).collect();
        Self { cell, global_cer_pct: cer, global_acc_pct: 100.0 - cer, per_class_cer_pct, confusion, flags }
    }

    pub fn cer_for(&self, label: BinaryLabel) -> f64 {
        self.per_class_cer_pct[label.index()]
    }
}

/// Fold index per instance, plus notes about classes too small to reach every fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub flags: BTreeSet<String>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Shuffles each class with one seeded stream, then deals its members
/// round-robin over the folds. The dealing position carries over from one
/// class to the next so small classes land in the emptier folds.
pub fn stratified_folds<L: Ord + Copy>(labels: &[L], k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::Config(format!("k = {k} folds; need at least 2")));
    }
    if k > labels.len() {
        return Err(EvalError::Config(format!("k = {k} folds exceeds {} instances", labels.len())));
    }
    let classes: BTreeSet<L> = labels.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut flags = BTreeSet::new();
    let mut next = 0usize;
    for (ci, class) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == *class).collect();
        members.shuffle(&mut rng);
        if members.len() < k {
            flags.insert(format!("class{ci}_in_{}_of_{k}_folds", members.len()));
        }
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k, flags })
}

enum FoldModel {
    Multi(Box<dyn Classifier + Send + Sync>),
    OneClass(crate::model::OneClassModel),
}

impl FoldModel {
    fn predict(&self, x: &[f64]) -> Result<BinaryLabel, EvalError> {
        Ok(match self {
            FoldModel::Multi(m) => BinaryLabel::ALL[m.predict(x)?],
            FoldModel::OneClass(m) => {
                if one_class_predict(m, x)?.0 {
                    BinaryLabel::CR
                } else {
                    BinaryLabel::AD
                }
            }
        })
    }
}

fn binary_names() -> Vec<String> {
    BinaryLabel::ALL.iter().map(|l| l.as_str().to_string()).collect()
}

fn train_fold_model(
    cell: &ExperimentCell,
    settings: &ModelSettings,
    table: &FeatureTable,
    train: &[usize],
    seed: u64,
    flags: &mut BTreeSet<String>,
) -> Result<FoldModel, EvalError> {
    let labels = table.binary_labels();
    let row = |i: usize| table.instances[i].values.clone();
    match cell.scheme {
        Scheme::MulticlassMlp => {
            // A two-class model cannot leave the second class out; the
            // outlier-free variant only differs by its flag.
            let used = train;
            let rows: Vec<Vec<f64>> = used.iter().map(|&i| row(i)).collect();
            let y: Vec<usize> = used.iter().map(|&i| labels[i].index()).collect();
            match train_mlp(&rows, &y, &binary_names(), &settings.mlp, seed) {
                Ok(m) => Ok(FoldModel::Multi(Box::new(m))),
                Err(ModelError::SingleClass(_)) => {
                    flags.insert("single_class_training".into());
                    let class = y.first().copied().unwrap_or(BinaryLabel::CR.index());
                    Ok(FoldModel::Multi(Box::new(ConstantModel {
                        class,
                        class_names: binary_names(),
                        n_attributes: table.n_attributes(),
                    })))
                }
                Err(e) => Err(e.into()),
            }
        }
        Scheme::OneclassMlp | Scheme::OneclassBagging => {
            let params = if cell.scheme == Scheme::OneclassMlp { settings.oneclass_mlp } else { settings.oneclass_bagging };
            let targets: Vec<Vec<f64>> =
                train.iter().filter(|&&i| labels[i] == BinaryLabel::CR).map(|&i| row(i)).collect();
            let mut model = train_one_class(&targets, BinaryLabel::CR.as_str(), &params, seed)?;
            if cell.outliers_in_training {
                let outliers: Vec<usize> = train.iter().copied().filter(|&i| labels[i] == BinaryLabel::AD).collect();
                if outliers.is_empty() {
                    flags.insert("no_outliers_for_refinement".into());
                } else {
                    let t_scores = targets.iter().map(|x| model.score(x)).collect::<Result<Vec<_>, _>>()?;
                    let o_scores = outliers.iter().map(|&i| model.score(&table.instances[i].values)).collect::<Result<Vec<_>, _>>()?;
                    model.threshold = refine_threshold(&t_scores, &o_scores, model.threshold);
                    model.threshold_source = crate::model::ThresholdSource::Refined;
                }
            }
            Ok(FoldModel::OneClass(model))
        }
    }
}

/// Cross-validates one cell. Instances are restricted to the cell's feature
/// set and evaluated on their binary (CR vs AD) labels.
pub fn run_cell(cell: &ExperimentCell, table: &FeatureTable, settings: &ModelSettings) -> Result<EvalReport, EvalError> {
    let table = table.select(cell.feature_set);
    if table.n_attributes() == 0 {
        return Err(EvalError::Config(format!("feature set {} selects no columns", cell.feature_set)));
    }
    let labels = table.binary_labels();
    let folds = stratified_folds(&labels, cell.folds, cell.seed)?;
    let mut flags = folds.flags.clone();
    if cell.scheme == Scheme::MulticlassMlp && !cell.outliers_in_training {
        flags.insert("multiclass_without_outliers".into());
    }
    let mut confusion = ConfusionMatrix::binary();
    for fold in 0..folds.k {
        let test = folds.test_indices(fold);
        if test.is_empty() {
            return Err(EvalError::Internal(format!("fold {fold} has no test instances")));
        }
        let train = folds.train_indices(fold);
        let seed = derive_seed(cell.seed, fold as u64 + 1);
        let model = train_fold_model(cell, settings, &table, &train, seed, &mut flags)?;
        for i in test {
            let predicted = model.predict(&table.instances[i].values)?;
            confusion.record(labels[i].index(), predicted.index());
        }
    }
    Ok(EvalReport::from_confusion(*cell, confusion, flags))
}

/// Runs cells in parallel; results keep the order of `cells`.
pub fn run_grid(
    cells: &[ExperimentCell],
    table: &FeatureTable,
    settings: &ModelSettings,
) -> Vec<Result<EvalReport, EvalError>> {
    cells.par_iter().map(|c| run_cell(c, table, settings)).collect()
}

/// Fits the cell's scheme on every instance, for persisting alongside the grid.
pub fn train_cell_model(cell: &ExperimentCell, table: &FeatureTable, settings: &ModelSettings) -> Result<SavedModel, EvalError> {
    let table = table.select(cell.feature_set);
    let all: Vec<usize> = (0..table.len()).collect();
    let mut flags = BTreeSet::new();
    let seed = derive_seed(cell.seed, 0);
    let labels = table.binary_labels();
    Ok(match cell.scheme {
        Scheme::MulticlassMlp => {
            let used = all;
            let rows: Vec<Vec<f64>> = used.iter().map(|&i| table.instances[i].values.clone()).collect();
            let y: Vec<usize> = used.iter().map(|&i| labels[i].index()).collect();
            match train_mlp(&rows, &y, &binary_names(), &settings.mlp, seed) {
                Ok(m) => SavedModel::Mlp(m),
                Err(ModelError::SingleClass(_)) => SavedModel::Constant(ConstantModel {
                    class: y.first().copied().unwrap_or(0),
                    class_names: binary_names(),
                    n_attributes: table.n_attributes(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
        _ => match train_fold_model(cell, settings, &table, &all, seed, &mut flags)? {
            FoldModel::OneClass(m) => SavedModel::OneClass(m),
            FoldModel::Multi(_) => unreachable!("one-class schemes build one-class models"),
        },
    })
}

/// Controls from N(0, I); AD from N(separation * 1, I) labelled ES, IS, AS
/// in turn. Columns are placeholders.
pub fn synth_corpus(n_target: usize, n_outlier: usize, dims: usize, separation: f64, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = FeatureTable::new(placeholder_columns(dims));
    let ad_stages = [Stage::ES, Stage::IS, Stage::AS];
    for i in 0..n_target + n_outlier {
        let (stage, shift) = if i < n_target { (Stage::CR, 0.0) } else { (ad_stages[(i - n_target) % 3], separation) };
        let values: Vec<f64> = (0..dims).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); shift + z }).collect();
        table.instances.push(LabeledInstance { source_id: format!("syn{i:04}"), values, stage });
    }
    table
}

pub const GRID_HEADER: &str = "scheme,feature_set,outliers_in_training,global_cer,acc,cer_CR,cer_AD,flags";

/// One CSV row per report, in the given order. Percentages use 4 decimals;
/// flags are `;`-joined.
pub fn grid_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.cell.scheme,
            r.cell.feature_set,
            r.cell.outliers_in_training,
            r.global_cer_pct,
            r.global_acc_pct,
            r.cer_for(BinaryLabel::CR),
            r.cer_for(BinaryLabel::AD),
            r.flags.iter().cloned().collect::<Vec<_>>().join(";"),
        ));
    }
    out
}

pub fn emit_reports(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Config("no reports to write".into()));
    }
    let io = |e: std::io::Error| EvalError::Io { path: path.display().to_string(), msg: e.to_string() };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(grid_csv(reports).as_bytes()).map_err(io)?;
    Ok(())
}

/// A parsed grid CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub scheme: String,
    pub feature_set: String,
    pub outliers_in_training: bool,
    pub global_cer: f64,
    pub acc: f64,
    pub cer_cr: f64,
    pub cer_ad: f64,
    pub flags: String,
}

pub fn parse_grid_csv(text: &str) -> Result<Vec<GridRow>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(GRID_HEADER) {
        return Err(EvalError::Config(format!("grid header must be '{GRID_HEADER}'")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || EvalError::Config(format!("grid row {}: malformed '{line}'", i + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(GridRow {
                scheme: f[0].to_string(),
                feature_set: f[1].to_string(),
                outliers_in_training: f[2].parse().map_err(|_| bad())?,
                global_cer: num(f[3])?,
                acc: num(f[4])?,
                cer_cr: num(f[5])?,
                cer_ad: num(f[6])?,
                flags: f[7].to_string(),
            })
        })
        .collect()
}

/// Plain-text table of a grid, best (lowest global CER) cell marked.
pub fn render_summary(rows: &[GridRow]) -> String {
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.global_cer.total_cmp(&b.1.global_cer))
        .map(|(i, _)| i);
    let mut out = format!(
        "{:<18} {:<16} {:<9} {:>8} {:>8} {:>8} {:>8}\n",
        "scheme", "feature_set", "outliers", "CER%", "Acc%", "CER_CR%", "CER_AD%"
    );
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{:<18} {:<16} {:<9} {:>8.2} {:>8.2} {:>8.2} {:>8.2}{}\n",
            r.scheme,
            r.feature_set,
            if r.outliers_in_training { "with" } else { "without" },
            r.global_cer,
            r.acc,
            r.cer_cr,
            r.cer_ad,
            if Some(i) == best { "  *" } else { "" }
        ));
    }
    out
}
