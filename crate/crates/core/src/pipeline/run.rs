use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use super::corpus::{ingest, load_image, CorpusManifest};
use super::model::ModelDocument;
use crate::bovw::{classify_features, image_features, train_health_gate, HealthGate, ImageFeatures};
use crate::classify::{cross_validate, ovo_train, stratified_folds, SvmLearner};
use crate::glcm::{extract_feature_vector, feature_names};
use crate::imaging::{to_grayscale, RgbImage};
use crate::metrics::{csv_field, ConfusionMatrix};
use crate::prep::{
    apply_standardizer, fit_standardizer, format_f64, forward_select, relieff_rank, CvAccuracy,
    Dataset,
};
use crate::segmentation::{diseased_region_mask, leaf_mask, BinaryMask};
use crate::{Error, Result};

pub const FEATURES_CSV: &str = "features.csv";
pub const SELECTED_TXT: &str = "selected.txt";
pub const GATE_JSON: &str = "gate.json";
pub const MODEL_JSON: &str = "model.json";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const RUN_JSON: &str = "run.json";

/// Label every healthy class collapses to in two-stage results.
pub const HEALTHY: &str = "healthy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Segment,
    Extract,
    Select,
    TrainGate,
    TrainDisease,
    Crossval,
    Predict,
    Report,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Self::Segment,
        Self::Extract,
        Self::Select,
        Self::TrainGate,
        Self::TrainDisease,
        Self::Crossval,
        Self::Predict,
        Self::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Segment => "segment",
            Self::Extract => "extract",
            Self::Select => "select",
            Self::TrainGate => "train-gate",
            Self::TrainDisease => "train-disease",
            Self::Crossval => "crossval",
            Self::Predict => "predict",
            Self::Report => "report",
        }
    }

    fn needs_root(self) -> bool {
        matches!(self, Self::Segment | Self::Extract | Self::TrainGate | Self::Predict)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::param("subcommand", format!("unknown subcommand `{s}`")))
    }
}

/// Inputs of one subcommand run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub root: Option<PathBuf>,
    pub out: PathBuf,
    pub config: PipelineConfig,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Reproducibility record of one subcommand run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: Subcommand,
    pub tool_version: String,
    pub seed: u64,
    pub root: Option<String>,
    pub jobs: Option<usize>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Ctx<'a> {
    opts: &'a RunOptions,
    cfg: &'a PipelineConfig,
    inputs: Vec<FileHash>,
    artifacts: Vec<FileHash>,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.opts.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.push(FileHash {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn read(&mut self, rel: &str, producer: &'static str) -> Result<Vec<u8>> {
        let path = self.opts.out.join(rel);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact {
                path: path.display().to_string(),
                producer,
            },
            _ => Error::Io(e),
        })?;
        self.inputs.push(FileHash {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn read_optional(&mut self, rel: &str) -> Result<Option<Vec<u8>>> {
        if self.opts.out.join(rel).exists() {
            self.read(rel, "").map(Some)
        } else {
            Ok(None)
        }
    }

    fn root(&self) -> Result<&Path> {
        self.opts
            .root
            .as_deref()
            .ok_or_else(|| Error::param("root", "this subcommand needs --root"))
    }

    fn manifest(&mut self) -> Result<CorpusManifest> {
        let m = ingest(self.root()?)?;
        self.warnings.extend(m.warnings.iter().cloned());
        Ok(m)
    }

    /// Feature table with the selected subset applied when one exists.
    fn training_table(&mut self) -> Result<Dataset> {
        let bytes = self.read(FEATURES_CSV, "extract")?;
        let data = Dataset::read_csv(bytes.as_slice())?;
        match self.read_optional(SELECTED_TXT)? {
            Some(sel) => {
                let names: Vec<String> = String::from_utf8_lossy(&sel)
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect();
                if names.is_empty() {
                    self.warnings
                        .push(format!("{SELECTED_TXT} is empty; using every feature"));
                    Ok(data)
                } else {
                    data.select_feature_names(&names)
                }
            }
            None => Ok(data),
        }
    }
}

/// Leaf and lesion masks of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub leaf: BinaryMask,
    pub lesion: BinaryMask,
}

pub fn segment_image(img: &RgbImage, cfg: &PipelineConfig) -> Result<Segmented> {
    let leaf = leaf_mask(img, &cfg.segmentation_params())?;
    let lesion = diseased_region_mask(&to_grayscale(img), &leaf, cfg.lesion)?;
    Ok(Segmented { leaf, lesion })
}

/// Masks plus the feature row of one image.
pub fn extract_image(img: &RgbImage, cfg: &PipelineConfig) -> Result<(Segmented, Vec<f64>)> {
    let seg = segment_image(img, cfg)?;
    let fv = extract_feature_vector(img, &seg.leaf, &seg.lesion, &cfg.feature_config()?)?;
    Ok((seg, fv.values().to_vec()))
}

/// Keypoint descriptors of the leaf region.
pub fn gate_features(img: &RgbImage, cfg: &PipelineConfig) -> Result<ImageFeatures> {
    let leaf = leaf_mask(img, &cfg.segmentation_params())?;
    image_features(&to_grayscale(img), Some(&leaf), &cfg.gate_config().detector)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Runs `f` on every manifest image in parallel and returns the results in
/// manifest order; failures become warnings.
fn per_image<T: Send>(
    ctx: &mut Ctx,
    manifest: &CorpusManifest,
    filter: impl Fn(usize) -> bool + Sync,
    f: impl Fn(&RgbImage) -> Result<T> + Sync,
) -> Vec<(usize, PathBuf, T)> {
    let jobs: Vec<(usize, &Path)> = manifest
        .images()
        .into_iter()
        .filter(|(c, _)| filter(*c))
        .collect();
    let results: Vec<Result<T>> = jobs
        .par_iter()
        .map(|(_, p)| load_image(p).and_then(|img| f(&img)))
        .collect();
    let mut out = Vec::new();
    for ((c, p), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(v) => out.push((c, p.to_path_buf(), v)),
            Err(e) => ctx
                .warnings
                .push(format!("{}: {e}", manifest.relative(p))),
        }
    }
    out
}

fn run_segment(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.manifest()?;
    let cfg = ctx.cfg.clone();
    let done = per_image(ctx, &m, |_| true, |img| segment_image(img, &cfg));
    let mut summary = String::from("image,class,leaf_px,lesion_px\n");
    for (c, path, seg) in done {
        let class = &m.classes[c].dir;
        let name = stem(&path);
        ctx.write(&format!("masks/{class}/{name}.leaf.pbm"), &seg.leaf.encode_pbm())?;
        ctx.write(&format!("masks/{class}/{name}.lesion.pbm"), &seg.lesion.encode_pbm())?;
        summary.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&m.relative(&path)),
            csv_field(class),
            seg.leaf.count(),
            seg.lesion.count()
        ));
    }
    ctx.write("segment.csv", summary.as_bytes())
}

fn run_extract(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.manifest()?;
    let cfg = ctx.cfg.clone();
    let done = per_image(ctx, &m, |c| !m.classes[c].healthy, |img| {
        extract_image(img, &cfg).map(|(_, v)| v)
    });
    if done.is_empty() {
        return Err(Error::Dataset("no diseased image produced features".into()));
    }
    let labels: Vec<&str> = done.iter().map(|(c, _, _)| m.classes[*c].label.as_str()).collect();
    let rows = done.iter().map(|(_, _, v)| v.clone()).collect();
    let names = feature_names().iter().map(|s| s.to_string()).collect();
    let data = Dataset::new(names, rows, &labels)?;
    ctx.write(FEATURES_CSV, data.to_csv_string().as_bytes())
}

fn learner(cfg: &PipelineConfig) -> SvmLearner {
    SvmLearner {
        kernel: cfg.kernel,
        params: cfg.smo_params(),
    }
}

fn run_select(ctx: &mut Ctx) -> Result<()> {
    let bytes = ctx.read(FEATURES_CSV, "extract")?;
    let data = Dataset::read_csv(bytes.as_slice())?;
    let cfg = ctx.cfg;
    let smallest = data.class_counts().into_iter().filter(|&n| n > 0).min().unwrap_or(0);
    let k = cfg.relieff_k.min(smallest.saturating_sub(1)).max(1);
    if k < cfg.relieff_k {
        ctx.warnings.push(format!(
            "relieff_k lowered from {} to {k} to fit the smallest class ({smallest} rows)",
            cfg.relieff_k
        ));
    }
    let weights = relieff_rank(&data, k, cfg.relieff_samples(), cfg.seed)?;
    let learner = learner(cfg);
    let eval = CvAccuracy {
        learner: &learner,
        folds: cfg.cv_folds,
        seed: cfg.seed,
        standardize: cfg.standardize,
    };
    let trace = forward_select(&data, &eval, cfg.ffs_epsilon)?;
    ctx.write("weights.csv", weights.to_csv(data.feature_names()).as_bytes())?;
    ctx.write("trace.csv", trace.to_csv().as_bytes())?;
    let mut sel = trace.names().join("\n");
    sel.push('\n');
    ctx.write(SELECTED_TXT, sel.as_bytes())
}

fn run_train_gate(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.manifest()?;
    let cfg = ctx.cfg.clone();
    let done = per_image(ctx, &m, |_| true, |img| gate_features(img, &cfg));
    let healthy: Vec<bool> = done.iter().map(|(c, _, _)| m.classes[*c].healthy).collect();
    let feats: Vec<ImageFeatures> = done.into_iter().map(|(_, _, f)| f).collect();
    let gate = train_health_gate(&feats, &healthy, &cfg.gate_config())?;
    let mut json = serde_json::to_string_pretty(&gate)?;
    json.push('\n');
    ctx.write(GATE_JSON, json.as_bytes())
}

fn run_train_disease(ctx: &mut Ctx) -> Result<()> {
    let data = ctx.training_table()?;
    let cfg = ctx.cfg;
    let params = fit_standardizer(&data)?;
    let z = apply_standardizer(&data, &params)?;
    let svm = ovo_train(&z, cfg.kernel, &cfg.smo_params())?;
    let gate = match ctx.read_optional(GATE_JSON)? {
        Some(bytes) => Some(serde_json::from_slice::<HealthGate>(&bytes)?),
        None => {
            ctx.warnings
                .push(format!("{GATE_JSON} not found; model has no gate (run train-gate first)"));
            None
        }
    };
    let doc = ModelDocument::new(&svm, params, data.feature_names().to_vec(), gate);
    ctx.write(MODEL_JSON, doc.to_json().as_bytes())
}

fn run_crossval(ctx: &mut Ctx) -> Result<()> {
    let data = ctx.training_table()?;
    let cfg = ctx.cfg;
    let plan = stratified_folds(&data, cfg.cv_folds, cfg.seed)?;
    ctx.warnings.extend(plan.warnings.iter().cloned());
    let report = cross_validate(&data, &learner(cfg), &plan, cfg.standardize)?;
    let pooled = report.pooled.report()?;
    ctx.write("crossval_folds.csv", report.to_csv().as_bytes())?;
    ctx.write("crossval_report.csv", pooled.to_csv().as_bytes())?;
    ctx.write("crossval_confusion.csv", confusion_csv(&report.pooled).as_bytes())?;
    let text = format!("{}\npooled\n{}", report.render_text(), pooled.render_text());
    ctx.write("crossval_report.txt", text.as_bytes())
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut s = String::from("actual");
    for c in cm.classes() {
        s.push(',');
        s.push_str(&csv_field(c));
    }
    s.push('\n');
    for (a, name) in cm.classes().iter().enumerate() {
        s.push_str(&csv_field(name));
        for p in 0..cm.n_classes() {
            s.push_str(&format!(",{}", cm.get(a, p)));
        }
        s.push('\n');
    }
    s
}

/// Outcome of the two-stage classifier on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub healthy: bool,
    pub gate_score: f64,
    pub low_confidence: bool,
    pub label: String,
    /// Lesion mask, present only for images routed to stage two.
    #[serde(skip)]
    pub lesion: Option<BinaryMask>,
}

/// Gate first; only diseased-gate images are segmented for lesions and
/// classified by the disease model.
pub fn predict_image(
    img: &RgbImage,
    doc: &ModelDocument,
    cfg: &PipelineConfig,
) -> Result<Prediction> {
    let gate = doc.gate.as_ref().ok_or(Error::MissingArtifact {
        path: GATE_JSON.into(),
        producer: "train-gate",
    })?;
    let disease = doc.disease_model()?;
    let leaf = leaf_mask(img, &cfg.segmentation_params())?;
    let feats = image_features(&to_grayscale(img), Some(&leaf), &gate.detector_params)?;
    let decision = classify_features(gate, &feats)?;
    if decision.healthy {
        return Ok(Prediction {
            healthy: true,
            gate_score: decision.score,
            low_confidence: decision.low_confidence,
            label: HEALTHY.into(),
            lesion: None,
        });
    }
    let lesion = diseased_region_mask(&to_grayscale(img), &leaf, cfg.lesion)?;
    let fv = extract_feature_vector(img, &leaf, &lesion, &cfg.feature_config()?)?;
    let p = disease.predict(&feature_names(), fv.values())?;
    Ok(Prediction {
        healthy: false,
        gate_score: decision.score,
        low_confidence: decision.low_confidence,
        label: doc.classes[p.label].clone(),
        lesion: Some(lesion),
    })
}

fn run_predict(ctx: &mut Ctx) -> Result<()> {
    let bytes = ctx.read(MODEL_JSON, "train-disease")?;
    let doc = ModelDocument::from_json(&String::from_utf8_lossy(&bytes))?;
    if doc.gate.is_none() {
        return Err(Error::MissingArtifact {
            path: ctx.opts.out.join(GATE_JSON).display().to_string(),
            producer: "train-gate",
        });
    }
    let root = ctx.root()?.to_path_buf();
    let cfg = ctx.cfg.clone();
    let mut rows: Vec<(String, String, Prediction)> = Vec::new();
    if root.is_file() {
        // single-image mode: every stage error is fatal
        let p = predict_image(&load_image(&root)?, &doc, &cfg)?;
        rows.push((stem(&root), String::new(), p));
    } else {
        let m = ctx.manifest()?;
        let done = per_image(ctx, &m, |_| true, |img| predict_image(img, &doc, &cfg));
        for (c, path, p) in done {
            let class = &m.classes[c];
            let truth = if class.healthy { HEALTHY } else { class.label.as_str() };
            rows.push((m.relative(&path), truth.to_string(), p));
        }
    }
    let mut csv = String::from("image,true_label,gate,gate_score,low_confidence,label\n");
    for (image, truth, p) in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(image),
            csv_field(truth),
            if p.healthy { "healthy" } else { "diseased" },
            format_f64(p.gate_score),
            p.low_confidence,
            csv_field(&p.label)
        ));
        if let Some(lesion) = &p.lesion {
            let name = image.trim_end_matches(|c| c != '.').trim_end_matches('.');
            let name = if name.is_empty() { image.as_str() } else { name };
            ctx.write(&format!("lesions/{name}.lesion.pbm"), &lesion.encode_pbm())?;
        }
    }
    ctx.write(PREDICTIONS_CSV, csv.as_bytes())
}

fn run_report(ctx: &mut Ctx) -> Result<()> {
    let bytes = ctx.read(PREDICTIONS_CSV, "predict")?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Dataset(format!("{PREDICTIONS_CSV}: {e}")))?;
        let (truth, label) = (rec.get(1).unwrap_or(""), rec.get(5).unwrap_or(""));
        if !truth.is_empty() {
            pairs.push((truth.to_string(), label.to_string()));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Dataset(format!(
            "{PREDICTIONS_CSV} has no rows with a known true label"
        )));
    }
    let mut classes: Vec<String> = pairs
        .iter()
        .flat_map(|(t, p)| [t.clone(), p.clone()])
        .collect();
    classes.sort();
    classes.dedup();
    let mut cm = ConfusionMatrix::new(classes);
    for (t, p) in &pairs {
        cm.accumulate(t, p)?;
    }
    let report = cm.report()?;
    ctx.write("report.txt", report.render_text().as_bytes())?;
    ctx.write("report.csv", report.to_csv().as_bytes())?;
    ctx.write("confusion.csv", confusion_csv(&cm).as_bytes())
}

/// Runs one subcommand, writing its artifacts under `opts.out` and its
/// record into `run.json` (keyed by subcommand).
pub fn run(cmd: Subcommand, opts: &RunOptions) -> Result<RunRecord> {
    opts.config.validate()?;
    fs::create_dir_all(&opts.out)?;
    let mut ctx = Ctx {
        opts,
        cfg: &opts.config,
        inputs: Vec::new(),
        artifacts: Vec::new(),
        warnings: Vec::new(),
    };
    if cmd.needs_root() {
        ctx.root()?;
    }
    match cmd {
        Subcommand::Segment => run_segment(&mut ctx)?,
        Subcommand::Extract => run_extract(&mut ctx)?,
        Subcommand::Select => run_select(&mut ctx)?,
        Subcommand::TrainGate => run_train_gate(&mut ctx)?,
        Subcommand::TrainDisease => run_train_disease(&mut ctx)?,
        Subcommand::Crossval => run_crossval(&mut ctx)?,
        Subcommand::Predict => run_predict(&mut ctx)?,
        Subcommand::Report => run_report(&mut ctx)?,
    }
    let record = RunRecord {
        subcommand: cmd,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.config.seed,
        root: opts.root.as_ref().map(|p| p.display().to_string()),
        jobs: opts.jobs,
        config: opts
            .config
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        inputs: ctx.inputs,
        artifacts: ctx.artifacts,
        warnings: ctx.warnings,
    };
    let path = opts.out.join(RUN_JSON);
    let mut runs: BTreeMap<String, RunRecord> = match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    runs.insert(cmd.name().to_string(), record.clone());
    let mut json = serde_json::to_string_pretty(&runs)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(record)
}
