//! Kernel SVM (SMO-trained, one-vs-one multi-class), K-NN and Gaussian
//! Naive Bayes classifiers, and stratified cross-validation.

mod cv;
mod gnb;
mod kernel;
mod knn;
mod ovo;
mod svm;

pub use cv::{cross_validate, stratified_folds, CvReport, FoldPlan, StandardizeMode};
pub use gnb::{gnb_predict, gnb_train, GnbModel};
pub use kernel::{kernel_eval, median_pairwise_distance, KernelKind, KernelSpec};
pub use knn::{knn_predict, KnnModel};
pub use ovo::{ovo_predict, ovo_train, OvoPrediction, OvoSvmModel, PairModel};
pub use svm::{kkt_residuals, smo_train, svm_decision, BinarySvmModel, SmoParams};

use crate::prep::Dataset;
use crate::Result;

/// A trained model that maps a feature row to a class index of the
/// dataset it was trained on.
pub trait Classifier: Send + Sync {
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

/// Trains a [`Classifier`] on a dataset.
pub trait Learner: Sync {
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>>;
}

/// One-vs-one SVM learner.
#[derive(Debug, Clone)]
pub struct SvmLearner {
    pub kernel: KernelKind,
    pub params: SmoParams,
}

impl Learner for SvmLearner {
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(ovo_train(data, self.kernel, &self.params)?))
    }
}

impl Classifier for OvoSvmModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(ovo_predict(self, x)?.label)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KnnLearner {
    pub k: usize,
}

impl Learner for KnnLearner {
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(KnnModel::new(data.clone(), self.k)?))
    }
}

impl Classifier for KnnModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        knn_predict(self.train(), x, self.k())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GnbLearner;

impl Learner for GnbLearner {
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(gnb_train(data)?))
    }
}

impl Classifier for GnbModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(gnb_predict(self, x)?.0)
    }
}
