use serde::{Deserialize, Serialize};

use crate::bovw::HealthGate;
use crate::classify::{ovo_predict, BinarySvmModel, KernelSpec, OvoPrediction, OvoSvmModel, PairModel};
use crate::prep::StandardizationParams;
use crate::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Kernel in the model document: `kind` plus the parameter it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDoc {
    pub kind: String,
    pub degree: Option<u32>,
    pub sigma: Option<f64>,
}

impl From<KernelSpec> for KernelDoc {
    fn from(k: KernelSpec) -> Self {
        match k {
            KernelSpec::Linear => Self {
                kind: "linear".into(),
                degree: None,
                sigma: None,
            },
            KernelSpec::Polynomial { degree } => Self {
                kind: "polynomial".into(),
                degree: Some(degree),
                sigma: None,
            },
            KernelSpec::Gaussian { sigma } => Self {
                kind: "gaussian".into(),
                degree: None,
                sigma: Some(sigma),
            },
        }
    }
}

impl TryFrom<&KernelDoc> for KernelSpec {
    type Error = Error;

    fn try_from(d: &KernelDoc) -> Result<Self> {
        let spec = match (d.kind.as_str(), d.degree, d.sigma) {
            ("linear", _, _) => KernelSpec::Linear,
            ("polynomial", Some(degree), _) => KernelSpec::Polynomial { degree },
            ("gaussian", _, Some(sigma)) => KernelSpec::Gaussian { sigma },
            _ => return Err(Error::Format {
                field: "kernel",
                reason: format!("unsupported kernel {d:?}"),
            }),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub a: usize,
    pub b: usize,
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

/// Serialized two-stage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub kind: String,
    pub classes: Vec<String>,
    pub kernel: KernelDoc,
    #[serde(rename = "C")]
    pub c: f64,
    pub pairs: Vec<PairDoc>,
    pub standardizer: StandardizationParams,
    pub selected_features: Vec<String>,
    pub gate: Option<HealthGate>,
}

impl ModelDocument {
    pub fn new(
        svm: &OvoSvmModel,
        standardizer: StandardizationParams,
        selected_features: Vec<String>,
        gate: Option<HealthGate>,
    ) -> Self {
        Self {
            version: MODEL_VERSION,
            kind: "ovo-svm".into(),
            classes: svm.classes.clone(),
            kernel: svm.kernel.into(),
            c: svm.c,
            pairs: svm
                .pairs
                .iter()
                .map(|p| PairDoc {
                    a: p.a,
                    b: p.b,
                    support_vectors: p.model.support_vectors.clone(),
                    dual_coefs: p.model.dual_coefs.clone(),
                    bias: p.model.bias,
                })
                .collect(),
            standardizer,
            selected_features,
            gate,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.version != MODEL_VERSION {
            return Err(Error::Format {
                field: "version",
                reason: format!("unsupported model version {}", doc.version),
            });
        }
        Ok(doc)
    }

    /// Rebuilds the classifier and checks the document's shapes.
    pub fn disease_model(&self) -> Result<DiseaseModel> {
        let width = self.selected_features.len();
        for (name, v) in [("means", &self.standardizer.means), ("sigmas", &self.standardizer.sigmas)] {
            if v.len() != width {
                return Err(Error::Format {
                    field: "standardizer",
                    reason: format!("{name} has {} entries for {width} features", v.len()),
                });
            }
        }
        let kernel = KernelSpec::try_from(&self.kernel)?;
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            if p.a >= self.classes.len() || p.b >= self.classes.len() || p.a == p.b {
                return Err(Error::Format {
                    field: "pairs",
                    reason: format!("pair ({}, {}) outside {} classes", p.a, p.b, self.classes.len()),
                });
            }
            if p.support_vectors.len() != p.dual_coefs.len()
                || p.support_vectors.iter().any(|sv| sv.len() != width)
            {
                return Err(Error::Format {
                    field: "pairs",
                    reason: format!("pair ({}, {}) has malformed support vectors", p.a, p.b),
                });
            }
            pairs.push(PairModel {
                a: p.a,
                b: p.b,
                model: BinarySvmModel {
                    support_vectors: p.support_vectors.clone(),
                    dual_coefs: p.dual_coefs.clone(),
                    bias: p.bias,
                    kernel,
                    c: self.c,
                    support_indices: Vec::new(),
                },
            });
        }
        Ok(DiseaseModel {
            svm: OvoSvmModel {
                classes: self.classes.clone(),
                kernel,
                c: self.c,
                pairs,
                width,
            },
            standardizer: self.standardizer.clone(),
            selected_features: self.selected_features.clone(),
        })
    }
}

/// Stage-two classifier: column selection, standardization, OvO SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseModel {
    pub svm: OvoSvmModel,
    pub standardizer: StandardizationParams,
    pub selected_features: Vec<String>,
}

impl DiseaseModel {
    /// Classifies a full feature row given its column names.
    pub fn predict(&self, names: &[&str], values: &[f64]) -> Result<OvoPrediction> {
        let row: Vec<f64> = self
            .selected_features
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .map(|i| values[i])
                    .ok_or_else(|| Error::param("selected_features", format!("no column {f}")))
            })
            .collect::<Result<_>>()?;
        ovo_predict(&self.svm, &self.standardizer.transform(&row)?)
    }
}
