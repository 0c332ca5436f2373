//! Feature tables, standardization, ReliefF ranking and greedy forward
//! feature selection.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{cross_validate, stratified_folds, Learner, StandardizeMode};
use crate::util::rng;
use crate::{Error, Result};

/// Rows of named real features with class labels.
///
/// `classes` holds the distinct labels in lexicographic order; `labels`
/// index into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    classes: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new<S: AsRef<str>>(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: &[S],
    ) -> Result<Self> {
        let mut classes: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        let idx = labels
            .iter()
            .map(|s| classes.binary_search_by(|c| c.as_str().cmp(s.as_ref())).unwrap())
            .collect();
        Self::with_classes(feature_names, classes, rows, idx)
    }

    /// Builds a dataset over an explicit class list. Classes without rows
    /// are permitted here (fold subsets keep the full list).
    pub fn with_classes(
        feature_names: Vec<String>,
        classes: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Mismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let width = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Mismatch {
                expected: width,
                actual: bad.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Dataset(format!("label index {l} out of range")));
        }
        Ok(Self {
            feature_names,
            classes,
            rows,
            labels,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[f]).collect()
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Dataset> {
        if let Some(&f) = features.iter().find(|&&f| f >= self.n_features()) {
            return Err(Error::Dataset(format!("feature index {f} out of range")));
        }
        Ok(Dataset {
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            classes: self.classes.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| features.iter().map(|&f| r[f]).collect())
                .collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn select_feature_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n.as_ref())
                    .ok_or_else(|| Error::Dataset(format!("unknown feature `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        self.select_features(&idx)
    }

    /// Row subset; the class list is kept intact.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            classes: self.classes.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps the rows whose class satisfies `keep`, dropping the other
    /// classes from the class list.
    pub fn filter_classes(&self, keep: impl Fn(&str) -> bool) -> Result<Dataset> {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&i| keep(&self.classes[self.labels[i]]))
            .collect();
        let labels: Vec<&str> = idx
            .iter()
            .map(|&i| self.classes[self.labels[i]].as_str())
            .collect();
        Dataset::new(
            self.feature_names.clone(),
            idx.iter().map(|&i| self.rows[i].clone()).collect(),
            &labels,
        )
    }

    /// CSV with a header of feature names plus `label`. Values are written
    /// in shortest round-trip form, so reading back is lossless.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        wr.write_record(&header).map_err(csv_err)?;
        for (r, &l) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = r.iter().map(|v| format_f64(*v)).collect();
            rec.push(self.classes[l].clone());
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        let n = header.len();
        if n < 1 || &header[n - 1] != "label" {
            return Err(Error::Dataset("last CSV column must be `label`".into()));
        }
        let names: Vec<String> = header.iter().take(n - 1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != n {
                return Err(Error::Dataset(format!(
                    "row {} has {} columns, expected {n}",
                    line + 2,
                    rec.len()
                )));
            }
            let row = rec
                .iter()
                .take(n - 1)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::Dataset(format!("row {}: `{v}` is not a number", line + 2))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
            labels.push(rec[n - 1].to_string());
        }
        Dataset::new(names, rows, &labels)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Dataset(e.to_string())
}

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
}

pub fn fit_standardizer(data: &Dataset) -> Result<StandardizationParams> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Dataset("standardization needs at least 2 rows".into()));
    }
    let d = data.n_features();
    let mut means = vec![0.0; d];
    for r in &data.rows {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut sigmas = vec![0.0; d];
    for r in &data.rows {
        for ((s, v), m) in sigmas.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut sigmas {
        *s = (*s / n as f64).sqrt();
    }
    Ok(StandardizationParams { means, sigmas })
}

impl StandardizationParams {
    /// `(x - mean) / sigma`; zero-sigma features map to 0.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.means.len() {
            return Err(Error::Mismatch {
                expected: self.means.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.sigmas))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect())
    }
}

pub fn apply_standardizer(data: &Dataset, p: &StandardizationParams) -> Result<Dataset> {
    let rows = data
        .rows
        .iter()
        .map(|r| p.transform(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        rows,
        ..data.clone()
    })
}

// ---------------------------------------------------------------------------
// ReliefF

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliefFWeights {
    pub weights: Vec<f64>,
    /// Feature indices by descending weight (ties by index).
    pub rank: Vec<usize>,
}

impl ReliefFWeights {
    fn from_weights(weights: Vec<f64>) -> Self {
        let mut rank: Vec<usize> = (0..weights.len()).collect();
        rank.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Self { weights, rank }
    }

    /// `feature,weight,rank` CSV (rank is 1-based), rows in rank order.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("feature,weight,rank\n");
        for (pos, &f) in self.rank.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{}\n",
                crate::metrics::csv_field(&names[f]),
                format_f64(self.weights[f]),
                pos + 1
            ));
        }
        s
    }
}

/// Multi-class ReliefF.
///
/// For each sampled instance the `k` nearest hits and, for every other class,
/// the `k` nearest misses are found by Euclidean distance over range-scaled
/// features. Weights move by `-diff(hit)/(m k)` and by
/// `P(c)/(1-P(class)) * diff(miss)/(m k)`. `n_samples = None` (or at least
/// the row count) visits every row in order; otherwise rows are drawn
/// without replacement from a seeded shuffle.
pub fn relieff_rank(
    data: &Dataset,
    k_neighbors: usize,
    n_samples: Option<usize>,
    rng_seed: u64,
) -> Result<ReliefFWeights> {
    if k_neighbors == 0 {
        return Err(Error::param("k_neighbors", "must be >= 1"));
    }
    let n = data.n_rows();
    let d = data.n_features();
    let counts = data.class_counts();
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 && cnt < k_neighbors + 1 {
            return Err(Error::param(
                "k_neighbors",
                format!(
                    "class `{}` has {cnt} rows, needs at least {}",
                    data.classes[c],
                    k_neighbors + 1
                ),
            ));
        }
    }
    if n == 0 {
        return Err(Error::Dataset("empty dataset".into()));
    }

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in &data.rows {
        for f in 0..d {
            lo[f] = lo[f].min(r[f]);
            hi[f] = hi[f].max(r[f]);
        }
    }
    let range: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    let scaled: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| {
            (0..d)
                .map(|f| if range[f] > 0.0 { (r[f] - lo[f]) / range[f] } else { 0.0 })
                .collect()
        })
        .collect();
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let samples: Vec<usize> = match n_samples {
        Some(m) if m < n => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng(rng_seed));
            idx.truncate(m.max(1));
            idx
        }
        _ => (0..n).collect(),
    };
    let m = samples.len() as f64;
    let kf = k_neighbors as f64;

    let contributions: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&s| {
            let cs = data.labels[s];
            let mut by_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); data.classes.len()];
            for j in 0..n {
                if j == s {
                    continue;
                }
                let dist = crate::util::sq_dist(&scaled[s], &scaled[j]);
                by_class[data.labels[j]].push((dist, j));
            }
            let mut delta = vec![0.0; d];
            for (c, cand) in by_class.iter_mut().enumerate() {
                if cand.is_empty() {
                    continue;
                }
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let weight = if c == cs {
                    -1.0
                } else {
                    priors[c] / (1.0 - priors[cs])
                };
                for &(_, j) in cand.iter().take(k_neighbors) {
                    for f in 0..d {
                        delta[f] += weight * (scaled[s][f] - scaled[j][f]).abs() / (m * kf);
                    }
                }
            }
            delta
        })
        .collect();

    let mut weights = vec![0.0; d];
    for delta in &contributions {
        for (w, v) in weights.iter_mut().zip(delta) {
            *w += v;
        }
    }
    Ok(ReliefFWeights::from_weights(weights))
}

/// Features with strictly positive weight, in index order.
pub fn select_positive(weights: &ReliefFWeights) -> Vec<usize> {
    (0..weights.weights.len())
        .filter(|&f| weights.weights[f] > 0.0)
        .collect()
}

// ---------------------------------------------------------------------------
// Forward selection

/// Scores a candidate feature subset (higher is better).
pub trait SubsetEvaluator: Sync {
    fn evaluate(&self, data: &Dataset, features: &[usize]) -> Result<f64>;
}

impl<F> SubsetEvaluator for F
where
    F: Fn(&Dataset, &[usize]) -> Result<f64> + Sync,
{
    fn evaluate(&self, data: &Dataset, features: &[usize]) -> Result<f64> {
        self(data, features)
    }
}

/// Mean stratified k-fold accuracy of a learner on the candidate columns.
pub struct CvAccuracy<'a> {
    pub learner: &'a dyn Learner,
    pub folds: usize,
    pub seed: u64,
    pub standardize: StandardizeMode,
}

impl SubsetEvaluator for CvAccuracy<'_> {
    fn evaluate(&self, data: &Dataset, features: &[usize]) -> Result<f64> {
        let sub = data.select_features(features)?;
        let plan = stratified_folds(&sub, self.folds, self.seed)?;
        Ok(cross_validate(&sub, self.learner, &plan, self.standardize)?.accuracy_mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature: usize,
    pub name: String,
    pub cv_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn features(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.name.clone()).collect()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.steps.last().map(|s| s.cv_accuracy)
    }

    /// `step,feature,cv_accuracy` CSV, steps numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,feature,cv_accuracy\n");
        for (i, st) in self.steps.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{}\n",
                i + 1,
                crate::metrics::csv_field(&st.name),
                format_f64(st.cv_accuracy)
            ));
        }
        s
    }
}

/// Greedy forward selection: each round scores every unselected feature
/// appended to the current set and accepts the best one if it beats the
/// incumbent score by more than `tie_epsilon`. Candidates are scored in
/// parallel and reduced in feature-index order (lowest index wins ties).
pub fn forward_select(
    data: &Dataset,
    evaluator: &dyn SubsetEvaluator,
    tie_epsilon: f64,
) -> Result<SelectionTrace> {
    let d = data.n_features();
    if d == 0 {
        return Err(Error::Dataset("no features to select from".into()));
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut incumbent = f64::NEG_INFINITY;
    loop {
        let candidates: Vec<usize> = (0..d).filter(|f| !selected.contains(f)).collect();
        if candidates.is_empty() {
            break;
        }
        let scores = candidates
            .par_iter()
            .map(|&f| {
                let mut set = selected.clone();
                set.push(f);
                evaluator.evaluate(data, &set).map_err(|e| Error::Evaluation {
                    features: set.iter().map(|&i| data.feature_names[i].clone()).collect(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        if !(scores[best] > incumbent + tie_epsilon) {
            break;
        }
        incumbent = scores[best];
        let f = candidates[best];
        selected.push(f);
        steps.push(SelectionStep {
            feature: f,
            name: data.feature_names[f].clone(),
            cv_accuracy: incumbent,
        });
    }
    Ok(SelectionTrace { steps })
}
