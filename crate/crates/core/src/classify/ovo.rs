use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelKind, KernelSpec};
use super::svm::{smo_train, BinarySvmModel, SmoParams};
use crate::prep::Dataset;
use crate::{Error, Result};

/// Binary machine separating class `a` (+1) from class `b` (-1), `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub a: usize,
    pub b: usize,
    #[serde(flatten)]
    pub model: BinarySvmModel,
}

/// One-vs-one multi-class SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoSvmModel {
    pub classes: Vec<String>,
    pub kernel: KernelSpec,
    #[serde(rename = "C")]
    pub c: f64,
    pub pairs: Vec<PairModel>,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvoPrediction {
    pub label: usize,
    pub votes: Vec<usize>,
    /// Sum of |decision| over the pairs each class won.
    pub scores: Vec<f64>,
}

/// Trains one binary SVM per unordered pair of classes that have rows.
/// Pairs are trained in parallel; the model list is ordered by `(a, b)`.
pub fn ovo_train(data: &Dataset, kernel: KernelKind, params: &SmoParams) -> Result<OvoSvmModel> {
    let counts = data.class_counts();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Dataset("one-vs-one needs at least two classes".into()));
    }
    let spec = kernel.resolve(data.rows(), params.seed);
    spec.validate()?;
    let mut pairs_idx = Vec::new();
    for (n, &a) in present.iter().enumerate() {
        for &b in &present[n + 1..] {
            pairs_idx.push((a, b));
        }
    }
    let pairs = pairs_idx
        .par_iter()
        .map(|&(a, b)| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for i in 0..data.n_rows() {
                let l = data.label(i);
                if l == a || l == b {
                    x.push(data.row(i).to_vec());
                    y.push(if l == a { 1.0 } else { -1.0 });
                }
            }
            smo_train(&x, &y, &spec, params)
                .map(|mut model| {
                    model.support_indices.clear();
                    PairModel { a, b, model }
                })
                .map_err(|e| Error::PairTraining {
                    a: data.classes()[a].clone(),
                    b: data.classes()[b].clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvoSvmModel {
        classes: data.classes().to_vec(),
        kernel: spec,
        c: params.c,
        pairs,
        width: data.n_features(),
    })
}

/// Majority vote over the pair machines (`f >= 0` votes for `a`). Ties go
/// to the larger summed |decision| over won pairs, then to the lower class
/// index.
pub fn ovo_predict(model: &OvoSvmModel, x: &[f64]) -> Result<OvoPrediction> {
    if x.len() != model.width {
        return Err(Error::Mismatch {
            expected: model.width,
            actual: x.len(),
        });
    }
    let decisions: Vec<f64> = model
        .pairs
        .iter()
        .map(|p| p.model.decision_unchecked(x))
        .collect();
    Ok(vote(model.classes.len(), &model.pairs, &decisions))
}

pub(crate) fn vote(n_classes: usize, pairs: &[PairModel], decisions: &[f64]) -> OvoPrediction {
    let mut votes = vec![0usize; n_classes];
    let mut scores = vec![0.0f64; n_classes];
    for (p, &f) in pairs.iter().zip(decisions) {
        let winner = if f >= 0.0 { p.a } else { p.b };
        votes[winner] += 1;
        scores[winner] += f.abs();
    }
    let mut label = 0;
    for c in 1..n_classes {
        if votes[c] > votes[label] || (votes[c] == votes[label] && scores[c] > scores[label]) {
            label = c;
        }
    }
    OvoPrediction {
        label,
        votes,
        scores,
    }
}
