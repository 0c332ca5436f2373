//! Corpus-level pipeline behind the command-line subcommands.

pub mod config;
pub mod corpus;
pub mod model;
pub mod run;

pub use config::PipelineConfig;
pub use corpus::{ingest, is_healthy_name, load_image, ClassEntry, CorpusManifest};
pub use model::{DiseaseModel, KernelDoc, ModelDocument, PairDoc, MODEL_VERSION};
pub use run::{
    extract_image, gate_features, predict_image, run, segment_image, sha256_hex, FileHash,
    Prediction, RunOptions, RunRecord, Segmented, Subcommand, HEALTHY,
};
