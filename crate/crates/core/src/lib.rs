//! Two-stage leaf disease identification.
//!
//! Stage one gates each leaf image as healthy or diseased with a
//! bag-of-visual-words encoding and a linear SVM. Stage two segments the
//! lesion, extracts color moments and GLCM texture statistics, and
//! classifies the disease with a one-vs-one kernel SVM.
//!
//! Every numeric routine (watershed, Otsu, GLCM statistics, SMO, k-means,
//! Hessian blob detection) is implemented in this crate.

// `!(x > 0.0)` rejects NaN on purpose; numeric kernels index several arrays at once
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bovw;
pub mod classify;
pub mod error;
pub mod glcm;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod prep;
pub mod segmentation;
pub mod synth;

pub(crate) mod util;

pub use error::{Error, Result};
