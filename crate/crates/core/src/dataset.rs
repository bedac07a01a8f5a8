//! Feature vectors, feature-set selection, and the manifest / feature CSV formats.
//!
//! Column order is frozen in [`canonical_columns`] (schema
//! [`FEATURE_SCHEMA_VERSION`]); feature CSVs, models and the experiment grid
//! all rely on it.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::EtScore;
use crate::fractal::VhfdSummary;
use crate::linear::{AcousticStats, BreakStats, DurationStats, HIST_LEN, QualityStats, SpectralStats};

pub const FEATURE_SCHEMA_VERSION: &str = "fractvox-features-v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("feature family {0} missing from recording features")]
    MissingFamily(Family),
    #[error("unknown feature set '{0}' (expected ssf_ef, ssf_ef_et or ssf_ef_et_vhfd)")]
    UnknownFeatureSet(String),
    #[error("unknown stage label '{0}' (expected CR, ES, IS or AS)")]
    UnknownLabel(String),
    #[error("manifest row {row}: {msg}")]
    Manifest { row: usize, msg: String },
    #[error("feature schema mismatch: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Ssf,
    Ef,
    Et,
    Vhfd,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ssf, Family::Ef, Family::Et, Family::Vhfd];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Ssf => "SSF",
            Family::Ef => "EF",
            Family::Et => "ET",
            Family::Vhfd => "VHFD",
        }
    }

    fn placeholder_prefix(self) -> &'static str {
        match self {
            Family::Ssf => "ssf",
            Family::Ef => "ef",
            Family::Et => "et",
            Family::Vhfd => "vhfd",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub family: Family,
}

impl FeatureColumn {
    fn new(name: impl Into<String>, family: Family) -> Self {
        Self { name: name.into(), family }
    }
}

/// The 54 canonical columns: SSF 30, EF 18, ET 1, VHFD 5.
pub fn canonical_columns() -> &'static [FeatureColumn] {
    static COLUMNS: OnceLock<Vec<FeatureColumn>> = OnceLock::new();
    COLUMNS.get_or_init(|| {
        let mut cols = Vec::new();
        for kind in ["voiced", "unvoiced"] {
            for b in 0..HIST_LEN - 1 {
                cols.push(FeatureColumn::new(format!("{kind}_hist_{b}"), Family::Ssf));
            }
            cols.push(FeatureColumn::new(format!("{kind}_hist_over"), Family::Ssf));
        }
        for name in [
            "mean_voiced_s",
            "mean_unvoiced_s",
            "var_voiced_s2",
            "var_unvoiced_s2",
            "ste_mean",
            "ste_std",
            "centroid_mean_hz",
            "centroid_std_hz",
        ] {
            cols.push(FeatureColumn::new(name, Family::Ssf));
        }
        for name in [
            "pitch_mean_hz",
            "pitch_std_hz",
            "pitch_max_hz",
            "pitch_min_hz",
            "intensity_mean_db",
            "intensity_std_db",
            "intensity_max_db",
            "intensity_min_db",
            "period_mean_s",
            "period_std_s",
            "rms_amplitude",
            "jitter_local_pct",
            "shimmer_local_pct",
            "nhr",
            "hnr_db",
            "mean_autocorr",
            "frac_voiceless_frames",
            "degree_voice_breaks_pct",
        ] {
            cols.push(FeatureColumn::new(name, Family::Ef));
        }
        cols.push(FeatureColumn::new("emotional_temperature", Family::Et));
        for name in ["hfd_mean", "hfd_max", "hfd_min", "hfd_var", "hfd_std"] {
            cols.push(FeatureColumn::new(name, Family::Vhfd));
        }
        cols
    })
}

/// Placeholder columns for synthetic tables: families are assigned
/// round-robin (SSF, EF, ET, VHFD) and names are `<family>_<index>`.
pub fn placeholder_columns(dims: usize) -> Vec<FeatureColumn> {
    (0..dims)
        .map(|i| {
            let family = Family::ALL[i % Family::ALL.len()];
            FeatureColumn::new(format!("{}_{i}", family.placeholder_prefix()), family)
        })
        .collect()
}

fn parse_placeholder(name: &str, position: usize) -> Option<Family> {
    let (prefix, idx) = name.rsplit_once('_')?;
    let family = Family::ALL.into_iter().find(|f| f.placeholder_prefix() == prefix)?;
    (idx.parse::<usize>().ok()? == position && family == Family::ALL[position % 4]).then_some(family)
}

/// Per-recording outputs of every extractor; `None` marks a family that
/// could not be computed.
#[derive(Debug, Clone, Default)]
pub struct RecordingFeatures {
    pub source_id: String,
    pub duration: Option<DurationStats>,
    pub spectral: Option<SpectralStats>,
    pub acoustic: Option<AcousticStats>,
    pub quality: Option<QualityStats>,
    pub breaks: Option<BreakStats>,
    pub et: Option<EtScore>,
    pub vhfd: Option<VhfdSummary>,
    pub hfd_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub source_id: String,
    /// In [`canonical_columns`] order.
    pub values: Vec<f64>,
    pub degenerate_flags: BTreeSet<String>,
}

impl FeatureVector {
    pub fn iter(&self) -> impl Iterator<Item = (&'static FeatureColumn, f64)> + '_ {
        canonical_columns().iter().zip(self.values.iter().copied())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.iter().find(|(c, _)| c.name == name).map(|(_, v)| v)
    }
}

pub fn build_vector(parts: &RecordingFeatures) -> Result<FeatureVector, DatasetError> {
    let duration = parts.duration.as_ref().ok_or(DatasetError::MissingFamily(Family::Ssf))?;
    let spectral = parts.spectral.ok_or(DatasetError::MissingFamily(Family::Ssf))?;
    let acoustic = parts.acoustic.ok_or(DatasetError::MissingFamily(Family::Ef))?;
    let quality = parts.quality.ok_or(DatasetError::MissingFamily(Family::Ef))?;
    let breaks = parts.breaks.ok_or(DatasetError::MissingFamily(Family::Ef))?;
    let et = parts.et.ok_or(DatasetError::MissingFamily(Family::Et))?;
    let vhfd = parts.vhfd.ok_or(DatasetError::MissingFamily(Family::Vhfd))?;

    let mut values = Vec::with_capacity(canonical_columns().len());
    values.extend(duration.voiced_hist.iter().map(|&c| c as f64));
    values.extend(duration.unvoiced_hist.iter().map(|&c| c as f64));
    values.extend([
        duration.mean_voiced_s,
        duration.mean_unvoiced_s,
        duration.var_voiced_s2,
        duration.var_unvoiced_s2,
        spectral.ste_mean,
        spectral.ste_std,
        spectral.centroid_mean_hz,
        spectral.centroid_std_hz,
        acoustic.pitch_mean_hz,
        acoustic.pitch_std_hz,
        acoustic.pitch_max_hz,
        acoustic.pitch_min_hz,
        acoustic.intensity_mean_db,
        acoustic.intensity_std_db,
        acoustic.intensity_max_db,
        acoustic.intensity_min_db,
        acoustic.period_mean_s,
        acoustic.period_std_s,
        acoustic.rms_amplitude,
        quality.jitter_local_pct,
        quality.shimmer_local_pct,
        quality.nhr,
        quality.hnr_db,
        quality.mean_autocorr,
        breaks.frac_voiceless_frames,
        breaks.degree_voice_breaks_pct,
        et.value,
        vhfd.mean,
        vhfd.max,
        vhfd.min,
        vhfd.variance,
        vhfd.std,
    ]);
    debug_assert_eq!(values.len(), canonical_columns().len());
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DatasetError::Schema(format!(
            "non-finite value for {}",
            canonical_columns()[i].name
        )));
    }

    let mut flags = BTreeSet::new();
    let mut flag = |names: &[&str]| flags.extend(names.iter().map(|s| s.to_string()));
    if acoustic.pitch_degenerate {
        flag(&["pitch_mean_hz", "pitch_std_hz", "pitch_max_hz", "pitch_min_hz", "period_mean_s", "period_std_s"]);
    }
    if quality.degenerate {
        flag(&["jitter_local_pct", "shimmer_local_pct"]);
    }
    if quality.mean_autocorr <= 0.0 {
        flag(&["nhr", "hnr_db", "mean_autocorr"]);
    }
    if et.degenerate {
        flag(&["emotional_temperature"]);
    }
    if parts.hfd_degenerate {
        flag(&["hfd_mean", "hfd_max", "hfd_min", "hfd_var", "hfd_std"]);
    }
    Ok(FeatureVector { source_id: parts.source_id.clone(), values, degenerate_flags: flags })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    CR,
    ES,
    IS,
    AS,
}

impl Stage {
    pub fn binary(self) -> BinaryLabel {
        match self {
            Stage::CR => BinaryLabel::CR,
            Stage::ES | Stage::IS | Stage::AS => BinaryLabel::AD,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::CR => "CR",
            Stage::ES => "ES",
            Stage::IS => "IS",
            Stage::AS => "AS",
        }
    }
}

impl FromStr for Stage {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CR" => Ok(Stage::CR),
            "ES" => Ok(Stage::ES),
            "IS" => Ok(Stage::IS),
            "AS" => Ok(Stage::AS),
            other => Err(DatasetError::UnknownLabel(other.to_string())),
        }
    }
}

/// Control (target) versus any AD stage (outlier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    CR,
    AD,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::CR, BinaryLabel::AD];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::CR => "CR",
            BinaryLabel::AD => "AD",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub source_id: String,
    pub values: Vec<f64>,
    pub stage: Stage,
}

impl LabeledInstance {
    pub fn binary(&self) -> BinaryLabel {
        self.stage.binary()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSetId {
    SsfEf,
    SsfEfEt,
    SsfEfEtVhfd,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 3] = [FeatureSetId::SsfEf, FeatureSetId::SsfEfEt, FeatureSetId::SsfEfEtVhfd];

    pub fn families(self) -> &'static [Family] {
        match self {
            FeatureSetId::SsfEf => &[Family::Ssf, Family::Ef],
            FeatureSetId::SsfEfEt => &[Family::Ssf, Family::Ef, Family::Et],
            FeatureSetId::SsfEfEtVhfd => &Family::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetId::SsfEf => "ssf_ef",
            FeatureSetId::SsfEfEt => "ssf_ef_et",
            FeatureSetId::SsfEfEtVhfd => "ssf_ef_et_vhfd",
        }
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetId {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| DatasetError::UnknownFeatureSet(s.to_string()))
    }
}

/// Labeled instances sharing one column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<FeatureColumn>,
    pub instances: Vec<LabeledInstance>,
}

impl FeatureTable {
    pub fn new(columns: Vec<FeatureColumn>) -> Self {
        Self { columns, instances: Vec::new() }
    }

    pub fn canonical() -> Self {
        Self::new(canonical_columns().to_vec())
    }

    pub fn push(&mut self, instance: LabeledInstance) -> Result<(), DatasetError> {
        if instance.values.len() != self.columns.len() {
            return Err(DatasetError::Schema(format!(
                "instance {} has {} values for {} columns",
                instance.source_id,
                instance.values.len(),
                self.columns.len()
            )));
        }
        self.instances.push(instance);
        Ok(())
    }

    pub fn n_attributes(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn binary_labels(&self) -> Vec<BinaryLabel> {
        self.instances.iter().map(LabeledInstance::binary).collect()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.instances.iter().map(|i| i.values.as_slice()).collect()
    }

    /// Keeps the columns whose family belongs to `id`, preserving order.
    pub fn select(&self, id: FeatureSetId) -> FeatureTable {
        let keep: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| id.families().contains(&c.family))
            .map(|(i, _)| i)
            .collect();
        FeatureTable {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            instances: self
                .instances
                .iter()
                .map(|inst| LabeledInstance {
                    source_id: inst.source_id.clone(),
                    values: keep.iter().map(|&i| inst.values[i]).collect(),
                    stage: inst.stage,
                })
                .collect(),
        }
    }
}

pub fn select_features(table: &FeatureTable, id: FeatureSetId) -> FeatureTable {
    table.select(id)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub speaker: String,
    pub stage: Stage,
}

/// Reads a `path,speaker,label` manifest. Row numbers in errors are 1-based
/// file lines (the header is line 1). Files are not checked for existence.
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    parse_manifest_reader(file)
}

pub fn parse_manifest_reader(reader: impl Read) -> Result<Vec<ManifestEntry>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "speaker", "label"] {
        return Err(DatasetError::Manifest {
            row: 1,
            msg: format!("header must be 'path,speaker,label', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| DatasetError::Manifest { row, msg: e.to_string() })?;
        let (path, speaker, label) = (&record[0], &record[1], &record[2]);
        if path.is_empty() {
            return Err(DatasetError::Manifest { row, msg: "empty path".into() });
        }
        let stage = label
            .parse::<Stage>()
            .map_err(|e| DatasetError::Manifest { row, msg: e.to_string() })?;
        if !seen.insert(path.to_string()) {
            return Err(DatasetError::Manifest { row, msg: format!("duplicate path '{path}'") });
        }
        entries.push(ManifestEntry { path: PathBuf::from(path), speaker: speaker.to_string(), stage });
    }
    Ok(entries)
}

pub const LABEL_COLUMN: &str = "stage_label";

/// Writes `feature names..., stage_label` rows. Values use Rust's shortest
/// round-trip decimal form.
pub fn write_features_to(writer: impl Write, table: &FeatureTable) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    for inst in &table.instances {
        let mut row: Vec<String> = inst.values.iter().map(|v| v.to_string()).collect();
        row.push(inst.stage.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    write_features_to(std::io::BufWriter::new(file), table)
}

/// Reads a feature CSV. The header must be either the canonical column list
/// or placeholder columns, in order, followed by `stage_label`.
pub fn read_features_from(reader: impl Read) -> Result<FeatureTable, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let Some((last, names)) = header.split_last() else {
        return Err(DatasetError::Schema("empty header".into()));
    };
    if last != LABEL_COLUMN {
        return Err(DatasetError::Schema(format!("last column must be '{LABEL_COLUMN}', found '{last}'")));
    }
    let columns = columns_for_header(names)?;
    let mut table = FeatureTable::new(columns);
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(DatasetError::Schema(format!("row {row}: {} fields, expected {}", record.len(), header.len())));
        }
        let values = record
            .iter()
            .take(names.len())
            .zip(names)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::Schema(format!("row {row}: column {name} has invalid value '{field}'")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let stage = record[names.len()]
            .parse::<Stage>()
            .map_err(|e| DatasetError::Schema(format!("row {row}: {e}")))?;
        table.push(LabeledInstance { source_id: format!("row{:04}", row - 1), values, stage })?;
    }
    Ok(table)
}

fn columns_for_header(names: &[String]) -> Result<Vec<FeatureColumn>, DatasetError> {
    let canonical = canonical_columns();
    if names.len() == canonical.len() && names.iter().zip(canonical).all(|(n, c)| *n == c.name) {
        return Ok(canonical.to_vec());
    }
    let placeholders: Option<Vec<FeatureColumn>> = names
        .iter()
        .enumerate()
        .map(|(i, n)| parse_placeholder(n, i).map(|family| FeatureColumn::new(n.clone(), family)))
        .collect();
    match placeholders {
        Some(cols) if !cols.is_empty() => Ok(cols),
        _ => {
            let mismatched: Vec<String> = names
                .iter()
                .enumerate()
                .filter(|(i, n)| canonical.get(*i).is_none_or(|c| c.name != **n))
                .map(|(i, n)| format!("{n}@{i}"))
                .take(5)
                .collect();
            Err(DatasetError::Schema(format!(
                "header is neither the {FEATURE_SCHEMA_VERSION} column list nor placeholder columns (first mismatches: {})",
                mismatched.join(", ")
            )))
        }
    }
}

pub fn read_features(path: &Path) -> Result<FeatureTable, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    read_features_from(std::io::BufReader::new(file))
}
