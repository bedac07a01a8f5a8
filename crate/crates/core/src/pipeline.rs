//! Batch plumbing behind the command line: key=value configuration,
//! manifest-driven extraction, and grid experiments written to disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{AudioClip, decode_wav};
use crate::dataset::{
    DatasetError, FeatureSetId, FeatureTable, LabeledInstance, ManifestEntry, RecordingFeatures, build_vector,
};
use crate::emotion::{EtParams, ProsodicSlopes, fit_et_reference, prosodic_slopes, score_slopes};
use crate::eval::{EvalError, EvalReport, ExperimentCell, ModelSettings, Scheme, full_grid, grid_csv, run_grid, train_cell_model};
use crate::fractal::{HfdParams, WindowSize, vhfd_summary, windowed_hfd};
use crate::linear::{
    PitchParams, acoustic_features, break_features, duration_features, intensity_track, pitch_track,
    quality_features, spectral_stats,
};
use crate::model::ModelFile;
use crate::vad::{VadParams, segment_clip};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("emotional temperature reference: {0}")]
    Reference(String),
}

impl PipelineError {
    /// Bad input from the user rather than a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Dataset(DatasetError::UnknownFeatureSet(_))
                | PipelineError::Eval(EvalError::Config(_))
        )
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

/// How the emotional temperature reference is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtMode {
    /// Fitted over every recording of the extraction run.
    Fit,
    Load(EtParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: WindowSize,
    /// Defaults to half the window.
    pub hop_points: Option<usize>,
    pub k_max: usize,
    pub vad: VadParams,
    pub pitch: PitchParams,
    pub et_mode: EtMode,
    pub feature_set: Option<FeatureSetId>,
    pub scheme: Option<Scheme>,
    pub with_outliers: Option<bool>,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowSize::W320,
            hop_points: None,
            k_max: 10,
            vad: VadParams::default(),
            pitch: PitchParams::default(),
            et_mode: EtMode::Fit,
            feature_set: None,
            scheme: None,
            with_outliers: None,
            folds: 10,
            seed: 0,
            out_dir: None,
        }
    }
}

const ET_KEYS: [&str; 6] = [
    "et_ref_mean_pitch_slope",
    "et_ref_std_pitch_slope",
    "et_ref_mean_energy_slope",
    "et_ref_std_energy_slope",
    "et_pitch_weight",
    "et_energy_weight",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value.parse().map_err(|_| PipelineError::Config(format!("{key}: cannot parse '{value}'")))
}

impl PipelineConfig {
    pub fn hfd_params(&self) -> HfdParams {
        let mut p = HfdParams::for_window(self.window);
        p.k_max = self.k_max;
        if let Some(h) = self.hop_points {
            p.hop_points = h;
        }
        p
    }

    /// Parses `key = value` lines; `#` starts a comment. Later keys win.
    pub fn from_kv_str(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = Self::default();
        let mut et = BTreeMap::new();
        let mut et_load = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "et_mode" => {
                    et_load = match v {
                        "fit" => false,
                        "load" => true,
                        _ => return Err(PipelineError::Config(format!("et_mode must be fit or load, got '{v}'"))),
                    }
                }
                k if ET_KEYS.contains(&k) => {
                    et.insert(k.to_string(), parse::<f64>(k, v)?);
                }
                _ => cfg.set(k, v)?,
            }
        }
        if et_load {
            let get = |k: &str| {
                et.get(k).copied().ok_or_else(|| PipelineError::Config(format!("et_mode = load needs {k}")))
            };
            let params = EtParams {
                ref_mean_pitch_slope: get(ET_KEYS[0])?,
                ref_std_pitch_slope: get(ET_KEYS[1])?,
                ref_mean_energy_slope: get(ET_KEYS[2])?,
                ref_std_energy_slope: get(ET_KEYS[3])?,
                pitch_weight: et.get(ET_KEYS[4]).copied().unwrap_or(1.0),
                energy_weight: et.get(ET_KEYS[5]).copied().unwrap_or(1.0),
                std_floored: false,
            };
            if !(params.ref_std_pitch_slope > 0.0 && params.ref_std_energy_slope > 0.0) {
                return Err(PipelineError::Config("reference spreads must be positive".into()));
            }
            cfg.et_mode = EtMode::Load(params);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_kv_str(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Sets one scalar key; the same names are accepted in config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        match key {
            "window_points" => {
                let points: usize = parse(key, value)?;
                self.window = WindowSize::from_points(points).ok_or_else(|| {
                    PipelineError::Config(format!("window_points must be 160, 320 or 1280, got {points}"))
                })?;
            }
            "hop_points" => self.hop_points = Some(parse(key, value)?),
            "k_max" => self.k_max = parse(key, value)?,
            "vad_frame_ms" => self.vad.frame_ms = parse(key, value)?,
            "vad_hop_ms" => self.vad.hop_ms = parse(key, value)?,
            "vad_energy_factor" => self.vad.energy_factor = parse(key, value)?,
            "vad_peak_ratio" => self.vad.peak_ratio = parse(key, value)?,
            "vad_zcr_max" => self.vad.zcr_max = parse(key, value)?,
            "vad_min_segment_ms" => self.vad.min_segment_ms = parse(key, value)?,
            "pitch_min_hz" => self.pitch.f_min_hz = parse(key, value)?,
            "pitch_max_hz" => self.pitch.f_max_hz = parse(key, value)?,
            "pitch_voicing_threshold" => self.pitch.voicing_threshold = parse(key, value)?,
            "feature_set" => self.feature_set = Some(value.parse().map_err(PipelineError::Dataset)?),
            "scheme" => self.scheme = Some(value.parse().map_err(PipelineError::Eval)?),
            "with_outliers" => self.with_outliers = Some(parse(key, value)?),
            "folds" => self.folds = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(PipelineError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.vad.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.hfd_params().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.folds < 2 {
            return Err(PipelineError::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }

    /// Round-trips through [`PipelineConfig::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "window_points = {}", self.window.points());
        if let Some(h) = self.hop_points {
            let _ = writeln!(s, "hop_points = {h}");
        }
        let _ = writeln!(s, "k_max = {}", self.k_max);
        let _ = writeln!(s, "vad_frame_ms = {}", self.vad.frame_ms);
        let _ = writeln!(s, "vad_hop_ms = {}", self.vad.hop_ms);
        let _ = writeln!(s, "vad_energy_factor = {}", self.vad.energy_factor);
        let _ = writeln!(s, "vad_peak_ratio = {}", self.vad.peak_ratio);
        let _ = writeln!(s, "vad_zcr_max = {}", self.vad.zcr_max);
        let _ = writeln!(s, "vad_min_segment_ms = {}", self.vad.min_segment_ms);
        let _ = writeln!(s, "pitch_min_hz = {}", self.pitch.f_min_hz);
        let _ = writeln!(s, "pitch_max_hz = {}", self.pitch.f_max_hz);
        let _ = writeln!(s, "pitch_voicing_threshold = {}", self.pitch.voicing_threshold);
        match self.et_mode {
            EtMode::Fit => s.push_str("et_mode = fit\n"),
            EtMode::Load(p) => s.push_str(&et_params_kv(&p)),
        }
        if let Some(f) = self.feature_set {
            let _ = writeln!(s, "feature_set = {f}");
        }
        if let Some(x) = self.scheme {
            let _ = writeln!(s, "scheme = {x}");
        }
        if let Some(o) = self.with_outliers {
            let _ = writeln!(s, "with_outliers = {o}");
        }
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(d) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {}", d.display());
        }
        s
    }

    /// Grid cells left after the scheme / feature set / outlier filters.
    pub fn cells(&self) -> Vec<ExperimentCell> {
        full_grid(self.folds, self.seed)
            .into_iter()
            .filter(|c| self.scheme.is_none_or(|s| s == c.scheme))
            .filter(|c| self.feature_set.is_none_or(|f| f == c.feature_set))
            .filter(|c| self.with_outliers.is_none_or(|o| o == c.outliers_in_training))
            .collect()
    }
}

/// Config lines that reload a fitted reference with `et_mode = load`.
pub fn et_params_kv(p: &EtParams) -> String {
    let vals = [
        p.ref_mean_pitch_slope,
        p.ref_std_pitch_slope,
        p.ref_mean_energy_slope,
        p.ref_std_energy_slope,
        p.pitch_weight,
        p.energy_weight,
    ];
    let mut s = String::from("et_mode = load\n");
    for (k, v) in ET_KEYS.iter().zip(vals) {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    s
}

/// Every family except emotional temperature, plus the slopes it needs.
pub struct Analysis {
    pub features: RecordingFeatures,
    pub slopes: Option<ProsodicSlopes>,
}

pub fn analyze_clip(clip: &AudioClip, cfg: &PipelineConfig) -> Result<Analysis, String> {
    let (flags, segments) = segment_clip(clip, &cfg.vad).map_err(|e| e.to_string())?;
    let track = pitch_track(clip, &flags, &cfg.vad, &cfg.pitch).map_err(|e| e.to_string())?;
    let energy = intensity_track(clip, &track);
    let slopes = prosodic_slopes(&track, &energy).map_err(|e| e.to_string())?;
    let series = windowed_hfd(clip, &cfg.hfd_params()).map_err(|e| e.to_string())?;
    let vhfd = vhfd_summary(&series).map_err(|e| e.to_string())?;
    let features = RecordingFeatures {
        source_id: clip.source_id().to_string(),
        duration: Some(duration_features(&segments)),
        spectral: Some(spectral_stats(clip, &cfg.vad)),
        acoustic: Some(acoustic_features(clip, &track)),
        quality: Some(quality_features(&track, clip)),
        breaks: Some(break_features(&track, &segments)),
        et: None,
        vhfd: Some(vhfd),
        hfd_degenerate: series.any_degenerate(),
    };
    Ok(Analysis { features, slopes })
}

#[derive(Debug)]
pub struct ExtractOutcome {
    pub table: FeatureTable,
    pub et_params: EtParams,
    /// `(path, cause)` per recording that produced no row.
    pub failures: Vec<(PathBuf, String)>,
}

/// Relative manifest paths resolve against `base_dir`. Recordings that fail
/// are collected; the rest still produce rows in manifest order.
pub fn extract(entries: &[ManifestEntry], base_dir: &Path, cfg: &PipelineConfig) -> Result<ExtractOutcome, PipelineError> {
    cfg.validate()?;
    let analyses: Vec<Result<Analysis, String>> = entries
        .par_iter()
        .map(|e| {
            let path = base_dir.join(&e.path);
            let bytes = std::fs::read(&path).map_err(|err| err.to_string())?;
            let clip = decode_wav(&bytes, e.path.display().to_string()).map_err(|err| err.to_string())?;
            analyze_clip(&clip, cfg)
        })
        .collect();

    let et_params = match cfg.et_mode {
        EtMode::Load(p) => p,
        EtMode::Fit => {
            let slopes: Vec<Option<ProsodicSlopes>> = analyses.iter().flatten().map(|a| a.slopes).collect();
            fit_et_reference(&slopes).map_err(|e| PipelineError::Reference(e.to_string()))?
        }
    };

    let mut table = FeatureTable::canonical();
    let mut failures = Vec::new();
    for (entry, analysis) in entries.iter().zip(analyses) {
        let built = analysis.and_then(|mut a| {
            a.features.et = Some(score_slopes(a.slopes, &et_params));
            build_vector(&a.features).map_err(|e| e.to_string())
        });
        match built {
            Ok(v) => table.push(LabeledInstance { source_id: v.source_id, values: v.values, stage: entry.stage })?,
            Err(msg) => failures.push((entry.path.clone(), msg)),
        }
    }
    Ok(ExtractOutcome { table, et_params, failures })
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub reports: Vec<EvalReport>,
    pub failures: Vec<(ExperimentCell, String)>,
}

/// Runs the configured cells and writes `grid.csv`, `models/<cell>.json`
/// and `config.txt` under `out_dir`.
pub fn experiment(table: &FeatureTable, cfg: &PipelineConfig, out_dir: &Path) -> Result<ExperimentOutcome, PipelineError> {
    cfg.validate()?;
    let cells = cfg.cells();
    if cells.is_empty() {
        return Err(PipelineError::Config("filters leave no experiment cells".into()));
    }
    let settings = ModelSettings::default();
    let models_dir = out_dir.join("models");
    std::fs::create_dir_all(&models_dir).map_err(io_err(&models_dir))?;

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in cells.iter().zip(run_grid(&cells, table, &settings)) {
        match result {
            Ok(r) => reports.push(r),
            Err(e @ EvalError::Config(_)) => return Err(e.into()),
            Err(e) => failures.push((*cell, e.to_string())),
        }
    }
    let models: Vec<Result<(), PipelineError>> = reports
        .par_iter()
        .map(|r| {
            let model = train_cell_model(&r.cell, table, &settings)?;
            let names = table.select(r.cell.feature_set).columns.into_iter().map(|c| c.name).collect();
            let path = models_dir.join(format!("{}.json", r.cell.slug()));
            ModelFile::new(names, model)
                .save(&path)
                .map_err(|e| PipelineError::Io { path, msg: e.to_string() })
        })
        .collect();
    for m in models {
        m?;
    }

    let grid = out_dir.join("grid.csv");
    std::fs::write(&grid, grid_csv(&reports)).map_err(io_err(&grid))?;
    let config = out_dir.join("config.txt");
    std::fs::write(&config, cfg.to_kv_string()).map_err(io_err(&config))?;
    Ok(ExperimentOutcome { reports, failures })
}
