//! Python bindings for the leaf disease pipeline.

use std::fs;
use std::path::PathBuf;

use leafsight_core::classify::{cross_validate as cv, ovo_train, stratified_folds, SvmLearner};
use leafsight_core::glcm::feature_names as glcm_feature_names;
use leafsight_core::imaging::{encode_ppm, RgbImage};
use leafsight_core::metrics::ConfusionMatrix;
use leafsight_core::pipeline::{self, ModelDocument, PipelineConfig, RunOptions, Subcommand};
use leafsight_core::prep::{
    apply_standardizer, fit_standardizer, forward_select as ffs, relieff_rank, CvAccuracy, Dataset as CoreDataset,
};
use leafsight_core::segmentation::BinaryMask;
use leafsight_core::synth;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use pyo3::IntoPyObjectExt;

create_exception!(leafsight, LeafsightError, PyException);

fn err(e: leafsight_core::Error) -> PyErr {
    LeafsightError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_py_any(py)?,
            None => n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?,
        },
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_py_any(py)?
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_py_any(py)?
        }
    })
}

fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| LeafsightError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn cfg_or_default(config: Option<PyRef<'_, Config>>) -> PipelineConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// RGB image with 8-bit channels.
#[pyclass(module = "leafsight", frozen)]
struct Image {
    inner: RgbImage,
}

#[pymethods]
impl Image {
    /// Builds an image from interleaved RGB bytes in row-major order.
    #[new]
    fn new(width: usize, height: usize, data: &[u8]) -> PyResult<Self> {
        if data.len() != width * height * 3 {
            return Err(LeafsightError::new_err(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        let px = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        RgbImage::new(width, height, px).map(|inner| Self { inner }).map_err(err)
    }

    /// Reads PPM, PGM, PNG or JPEG.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pipeline::load_image(&path).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(u8, u8, u8)> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(LeafsightError::new_err(format!("pixel ({x}, {y}) out of bounds")));
        }
        let [r, g, b] = self.inner.get(x, y);
        Ok((r, g, b))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels().as_flattened())
    }

    fn to_ppm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &encode_ppm(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Binary mask.
#[pyclass(module = "leafsight", frozen)]
struct Mask {
    inner: BinaryMask,
}

#[pymethods]
impl Mask {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    /// Number of set pixels.
    fn count(&self) -> usize {
        self.inner.count()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<bool> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(LeafsightError::new_err(format!("pixel ({x}, {y}) out of bounds")));
        }
        Ok(self.inner.get(x, y))
    }

    fn to_pbm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.encode_pbm())
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask({}x{}, {} set)",
            self.inner.width(),
            self.inner.height(),
            self.inner.count()
        )
    }
}

/// Pipeline configuration in flat `key = value` form.
#[pyclass(module = "leafsight")]
struct Config {
    inner: PipelineConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (text=None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(t) => PipelineConfig::parse(t).map_err(err)?,
            None => PipelineConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = fs::read_to_string(&path).map_err(|e| err(e.into()))?;
        Self::new(Some(&text))
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(err)?;
        self.inner.validate().map_err(err)
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .entries()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| LeafsightError::new_err(format!("unknown configuration key `{key}`")))
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        self.inner.entries()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Config(seed={}, kernel={})", self.inner.seed, self.get("kernel").unwrap_or_default())
    }
}

/// Feature table with one class label per row.
#[pyclass(module = "leafsight", frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<String>) -> PyResult<Self> {
        CoreDataset::new(feature_names, rows, &labels)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let bytes = fs::read(&path).map_err(|e| err(e.into()))?;
        CoreDataset::read_csv(bytes.as_slice())
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        fs::write(&path, self.inner.to_csv_string()).map_err(|e| err(e.into()))
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        let classes = self.inner.classes();
        self.inner.labels().iter().map(|&l| classes[l].clone()).collect()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    /// Keeps only the named columns, in the given order.
    fn select(&self, names: Vec<String>) -> PyResult<Self> {
        self.inner
            .select_feature_names(&names)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} rows, {} features, {} classes)",
            self.inner.n_rows(),
            self.inner.n_features(),
            self.inner.classes().len()
        )
    }
}

/// Trained two-stage model (gate optional).
#[pyclass(module = "leafsight", frozen)]
struct Model {
    doc: ModelDocument,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = fs::read_to_string(&path).map_err(|e| err(e.into()))?;
        Self::from_json(&text)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = ModelDocument::from_json(text).map_err(err)?;
        doc.disease_model().map_err(err)?;
        Ok(Self { doc })
    }

    fn to_json(&self) -> String {
        self.doc.to_json()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.doc.classes.clone()
    }

    #[getter]
    fn selected_features(&self) -> Vec<String> {
        self.doc.selected_features.clone()
    }

    #[getter]
    fn has_gate(&self) -> bool {
        self.doc.gate.is_some()
    }

    /// Disease label for a feature row; `names` defaults to the full
    /// extractor column order.
    #[pyo3(signature = (values, names=None))]
    fn predict_features(&self, values: Vec<f64>, names: Option<Vec<String>>) -> PyResult<String> {
        let names = names.unwrap_or_else(|| glcm_feature_names().iter().map(|s| s.to_string()).collect());
        if names.len() != values.len() {
            return Err(LeafsightError::new_err(format!(
                "{} values for {} names",
                values.len(),
                names.len()
            )));
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let model = self.doc.disease_model().map_err(err)?;
        let p = model.predict(&refs, &values).map_err(err)?;
        Ok(self.doc.classes[p.label].clone())
    }

    /// Gate, then disease classification for diseased leaves.
    #[pyo3(signature = (image, config=None))]
    fn predict(&self, py: Python<'_>, image: &Image, config: Option<PyRef<'_, Config>>) -> PyResult<Py<PyAny>> {
        let cfg = cfg_or_default(config);
        let p = py
            .detach(|| pipeline::predict_image(&image.inner, &self.doc, &cfg))
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("healthy", p.healthy)?;
        d.set_item("gate_score", p.gate_score)?;
        d.set_item("low_confidence", p.low_confidence)?;
        d.set_item("label", p.label)?;
        d.set_item("lesion", p.lesion.map(|inner| Mask { inner }))?;
        d.into_py_any(py)
    }
}

/// Leaf and lesion masks of one image.
#[pyfunction]
#[pyo3(signature = (image, config=None))]
fn segment(py: Python<'_>, image: &Image, config: Option<PyRef<'_, Config>>) -> PyResult<(Mask, Mask)> {
    let cfg = cfg_or_default(config);
    let s = py.detach(|| pipeline::segment_image(&image.inner, &cfg)).map_err(err)?;
    Ok((Mask { inner: s.leaf }, Mask { inner: s.lesion }))
}

/// Color-moment and texture feature row in `feature_names()` order.
#[pyfunction]
#[pyo3(signature = (image, config=None))]
fn extract_features(py: Python<'_>, image: &Image, config: Option<PyRef<'_, Config>>) -> PyResult<Vec<f64>> {
    let cfg = cfg_or_default(config);
    py.detach(|| pipeline::extract_image(&image.inner, &cfg))
        .map(|(_, v)| v)
        .map_err(err)
}

#[pyfunction]
fn feature_names() -> Vec<&'static str> {
    glcm_feature_names()
}

/// ReliefF weights as `(feature, weight, rank)` with rank 1 the strongest.
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn relieff(py: Python<'_>, dataset: &Dataset, config: Option<PyRef<'_, Config>>) -> PyResult<Vec<(String, f64, usize)>> {
    let cfg = cfg_or_default(config);
    let w = py
        .detach(|| relieff_rank(&dataset.inner, cfg.relieff_k, cfg.relieff_samples(), cfg.seed))
        .map_err(err)?;
    let mut rank = vec![0; w.weights.len()];
    for (r, &f) in w.rank.iter().enumerate() {
        rank[f] = r + 1;
    }
    Ok(dataset
        .inner
        .feature_names()
        .iter()
        .zip(&w.weights)
        .zip(rank)
        .map(|((n, &wt), r)| (n.clone(), wt, r))
        .collect())
}

fn learner(cfg: &PipelineConfig) -> SvmLearner {
    SvmLearner {
        kernel: cfg.kernel,
        params: cfg.smo_params(),
    }
}

/// Forward selection trace as `(feature, cv_accuracy)` per step.
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn forward_select(py: Python<'_>, dataset: &Dataset, config: Option<PyRef<'_, Config>>) -> PyResult<Vec<(String, f64)>> {
    let cfg = cfg_or_default(config);
    let trace = py
        .detach(|| {
            let l = learner(&cfg);
            let eval = CvAccuracy {
                learner: &l,
                folds: cfg.cv_folds,
                seed: cfg.seed,
                standardize: cfg.standardize,
            };
            ffs(&dataset.inner, &eval, cfg.ffs_epsilon)
        })
        .map_err(err)?;
    Ok(trace.steps.into_iter().map(|s| (s.name, s.cv_accuracy)).collect())
}

/// Stratified k-fold cross-validation of the OvO SVM.
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn cross_validate(py: Python<'_>, dataset: &Dataset, config: Option<PyRef<'_, Config>>) -> PyResult<Py<PyAny>> {
    let cfg = cfg_or_default(config);
    let report = py
        .detach(|| {
            let plan = stratified_folds(&dataset.inner, cfg.cv_folds, cfg.seed)?;
            cv(&dataset.inner, &learner(&cfg), &plan, cfg.standardize)
        })
        .map_err(err)?;
    to_py(py, &report)
}

/// Disease classifier on all rows of `dataset` (no gate).
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn train(py: Python<'_>, dataset: &Dataset, config: Option<PyRef<'_, Config>>) -> PyResult<Model> {
    let cfg = cfg_or_default(config);
    let doc = py
        .detach(|| {
            let params = fit_standardizer(&dataset.inner)?;
            let z = apply_standardizer(&dataset.inner, &params)?;
            let svm = ovo_train(&z, cfg.kernel, &cfg.smo_params())?;
            Ok::<_, leafsight_core::Error>(ModelDocument::new(
                &svm,
                params,
                dataset.inner.feature_names().to_vec(),
                None,
            ))
        })
        .map_err(err)?;
    Ok(Model { doc })
}

/// Per-class precision, recall, F1 and support plus macro means.
#[pyfunction]
fn classification_report(py: Python<'_>, actual: Vec<String>, predicted: Vec<String>) -> PyResult<Py<PyAny>> {
    if actual.len() != predicted.len() {
        return Err(LeafsightError::new_err("actual and predicted differ in length"));
    }
    let mut classes: Vec<String> = actual.iter().chain(&predicted).cloned().collect();
    classes.sort();
    classes.dedup();
    let mut cm = ConfusionMatrix::new(classes);
    for (a, p) in actual.iter().zip(&predicted) {
        cm.accumulate(a, p).map_err(err)?;
    }
    to_py(py, &cm.report().map_err(err)?)
}

/// Runs one pipeline subcommand and returns its run record.
#[pyfunction]
#[pyo3(signature = (subcommand, out, root=None, config=None))]
fn run(
    py: Python<'_>,
    subcommand: &str,
    out: PathBuf,
    root: Option<PathBuf>,
    config: Option<PyRef<'_, Config>>,
) -> PyResult<Py<PyAny>> {
    let cmd: Subcommand = subcommand.parse().map_err(err)?;
    let opts = RunOptions {
        root,
        out,
        config: cfg_or_default(config),
        jobs: None,
    };
    let record = py.detach(|| pipeline::run(cmd, &opts)).map_err(err)?;
    to_py(py, &record)
}

/// Seeded synthetic leaf: `"healthy"`, `"checkered"` or one of
/// `synthetic_classes()`.
#[pyfunction]
#[pyo3(signature = (kind, size=96, seed=0))]
fn synthetic_leaf(kind: &str, size: usize, seed: u64) -> PyResult<Image> {
    let inner = match kind {
        "healthy" => synth::healthy_leaf(size, seed),
        "checkered" => synth::checkered_leaf(size, seed),
        name => {
            let class = synth::disease_classes()
                .into_iter()
                .find(|c| c.name == name)
                .ok_or_else(|| LeafsightError::new_err(format!("unknown synthetic class `{name}`")))?;
            synth::diseased_leaf(&class, size, seed)
        }
    };
    Ok(Image { inner })
}

#[pyfunction]
fn synthetic_classes() -> Vec<String> {
    synth::disease_classes().into_iter().map(|c| c.name).collect()
}

#[pymodule]
fn leafsight(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LeafsightError", m.py().get_type::<LeafsightError>())?;
    m.add_class::<Image>()?;
    m.add_class::<Mask>()?;
    m.add_class::<Config>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(relieff, m)?)?;
    m.add_function(wrap_pyfunction!(forward_select, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_leaf, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_classes, m)?)?;
    Ok(())
}
