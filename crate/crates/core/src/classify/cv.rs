use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Learner;
use crate::metrics::{ConfusionMatrix, MetricReport};
use crate::prep::{apply_standardizer, fit_standardizer, format_f64, Dataset};
use crate::util::rng;
use crate::{Error, Result};

/// Assignment of dataset rows to `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Test-row indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Classes with fewer than `k` rows.
    pub warnings: Vec<String>,
}

impl FoldPlan {
    /// Every row index not in fold `f`, ascending.
    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }

    pub fn n_rows(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }
}

/// Shuffles each class's rows with a seeded generator and deals them
/// round-robin into `k` folds. The dealing position carries over from one
/// class to the next so fold sizes also stay within one of each other.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::param("folds", "must be at least 2"));
    }
    if data.n_rows() < k {
        return Err(Error::param(
            "folds",
            format!("{k} folds need at least {k} rows, found {}", data.n_rows()),
        ));
    }
    let mut by_class = vec![Vec::new(); data.classes().len()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut r = rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut warnings = Vec::new();
    let mut next = 0;
    for (c, rows) in by_class.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < k {
            warnings.push(format!(
                "class {} has {} rows, fewer than {k} folds",
                data.classes()[c],
                rows.len()
            ));
        }
        rows.shuffle(&mut r);
        for &i in rows.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, folds, warnings })
}

/// Where the standardizer is fit during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizeMode {
    /// On each training fold only; test folds reuse those parameters.
    #[default]
    PerFold,
    /// Once on the whole dataset before splitting.
    Global,
    /// Features are used as given.
    None,
}

impl std::str::FromStr for StandardizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "per-fold" | "perfold" | "fold" => Ok(Self::PerFold),
            "global" => Ok(Self::Global),
            "none" => Ok(Self::None),
            _ => Err(Error::param("standardize", format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<ConfusionMatrix>,
    pub reports: Vec<MetricReport>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub macro_precision_mean: f64,
    pub macro_precision_std: f64,
    pub macro_recall_mean: f64,
    pub macro_recall_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    /// Cell-wise sum of the fold matrices.
    pub pooled: ConfusionMatrix,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<usize>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

impl CvReport {
    /// `fold,accuracy,macro_precision,macro_recall,macro_f1` with folds
    /// numbered from 1, followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,accuracy,macro_precision,macro_recall,macro_f1\n");
        let row = |s: &mut String, name: &str, v: [f64; 4]| {
            s.push_str(name);
            for x in v {
                s.push(',');
                s.push_str(&format_f64(x));
            }
            s.push('\n');
        };
        for (i, r) in self.reports.iter().enumerate() {
            let v = [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1];
            row(&mut s, &(i + 1).to_string(), v);
        }
        row(
            &mut s,
            "mean",
            [
                self.accuracy_mean,
                self.macro_precision_mean,
                self.macro_recall_mean,
                self.macro_f1_mean,
            ],
        );
        row(
            &mut s,
            "std",
            [
                self.accuracy_std,
                self.macro_precision_std,
                self.macro_recall_std,
                self.macro_f1_std,
            ],
        );
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:>6} {:>9} {:>9} {:>9} {:>9}\n",
            "fold", "accuracy", "precision", "recall", "f1"
        );
        for (i, r) in self.reports.iter().enumerate() {
            s.push_str(&format!(
                "{:>6} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}%\n",
                i + 1,
                100.0 * r.accuracy,
                100.0 * r.macro_precision,
                100.0 * r.macro_recall,
                100.0 * r.macro_f1
            ));
        }
        s.push_str(&format!(
            "accuracy {:.2}% +/- {:.2}\nmacro precision {:.2}% +/- {:.2}\nmacro recall {:.2}% +/- {:.2}\nmacro f1 {:.2}% +/- {:.2}\n",
            100.0 * self.accuracy_mean,
            100.0 * self.accuracy_std,
            100.0 * self.macro_precision_mean,
            100.0 * self.macro_precision_std,
            100.0 * self.macro_recall_mean,
            100.0 * self.macro_recall_std,
            100.0 * self.macro_f1_mean,
            100.0 * self.macro_f1_std,
        ));
        s
    }
}

/// Trains on each plan's training rows, predicts its test rows, and
/// summarizes per-fold metrics as mean and population standard deviation.
/// Folds run in parallel; results are assembled in fold order.
pub fn cross_validate(
    data: &Dataset,
    learner: &dyn Learner,
    plan: &FoldPlan,
    mode: StandardizeMode,
) -> Result<CvReport> {
    let n = data.n_rows();
    let mut seen = vec![false; n];
    for &i in plan.folds.iter().flatten() {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Dataset(format!(
                "fold plan does not partition the {n} dataset rows"
            )));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Dataset(format!(
            "fold plan does not cover the {n} dataset rows"
        )));
    }
    let global;
    let data = if mode == StandardizeMode::Global {
        global = apply_standardizer(data, &fit_standardizer(data)?)?;
        &global
    } else {
        data
    };
    let results = (0..plan.folds.len())
        .into_par_iter()
        .map(|f| run_fold(data, learner, plan, f, mode).map_err(|e| Error::Fold { fold: f + 1, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = ConfusionMatrix::new(data.classes().to_vec());
    let mut predictions = vec![0; n];
    let mut folds = Vec::new();
    let mut reports = Vec::new();
    for (f, (cm, preds)) in results.into_iter().enumerate() {
        pooled.merge(&cm)?;
        for (&i, p) in plan.folds[f].iter().zip(preds) {
            predictions[i] = p;
        }
        reports.push(cm.report()?);
        folds.push(cm);
    }
    let stat = |g: fn(&MetricReport) -> f64| mean_std(&reports.iter().map(g).collect::<Vec<_>>());
    let (accuracy_mean, accuracy_std) = stat(|r| r.accuracy);
    let (macro_precision_mean, macro_precision_std) = stat(|r| r.macro_precision);
    let (macro_recall_mean, macro_recall_std) = stat(|r| r.macro_recall);
    let (macro_f1_mean, macro_f1_std) = stat(|r| r.macro_f1);
    Ok(CvReport {
        folds,
        reports,
        accuracy_mean,
        accuracy_std,
        macro_precision_mean,
        macro_precision_std,
        macro_recall_mean,
        macro_recall_std,
        macro_f1_mean,
        macro_f1_std,
        pooled,
        predictions,
    })
}

fn run_fold(
    data: &Dataset,
    learner: &dyn Learner,
    plan: &FoldPlan,
    f: usize,
    mode: StandardizeMode,
) -> Result<(ConfusionMatrix, Vec<usize>)> {
    let test_rows = &plan.folds[f];
    if test_rows.is_empty() {
        return Err(Error::Dataset("empty test fold".into()));
    }
    let mut train = data.subset(&plan.train_rows(f));
    let mut test = data.subset(test_rows);
    if mode == StandardizeMode::PerFold {
        let p = fit_standardizer(&train)?;
        train = apply_standardizer(&train, &p)?;
        test = apply_standardizer(&test, &p)?;
    }
    let model = learner.fit(&train)?;
    let mut cm = ConfusionMatrix::new(data.classes().to_vec());
    let mut preds = Vec::with_capacity(test.n_rows());
    for i in 0..test.n_rows() {
        let p = model.predict(test.row(i))?;
        cm.add(test.label(i), p)?;
        preds.push(p);
    }
    Ok((cm, preds))
}
