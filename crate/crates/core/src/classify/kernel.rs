use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::util::{dot, rng, sq_dist};
use crate::{Error, Result};

/// Kernel function with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `<x, y>`
    Linear,
    /// `(1 + <x, y>)^degree`
    Polynomial { degree: u32 },
    /// `exp(-|x - y|^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree } if degree < 1 => {
                Err(Error::param("degree", "must be >= 1"))
            }
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0) || !sigma.is_finite() => {
                Err(Error::param("sigma", "must be finite and > 0"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree } => (1.0 + dot(x, y)).powi(degree as i32),
            KernelSpec::Gaussian { sigma } => (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp(),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Mismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(spec.eval(x, y))
}

/// Kernel choice before data-dependent parameters are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Quadratic,
    Cubic,
    /// Bandwidth from the median pairwise distance unless given.
    Gaussian(Option<f64>),
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "cubic" => Ok(Self::Cubic),
            "gaussian" => Ok(Self::Gaussian(None)),
            _ => Err(Error::param(
                "kernel",
                format!("expected linear|quadratic|cubic|gaussian, got `{s}`"),
            )),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
            Self::Cubic => "cubic",
            Self::Gaussian(_) => "gaussian",
        })
    }
}

impl KernelKind {
    pub fn resolve(&self, rows: &[Vec<f64>], seed: u64) -> KernelSpec {
        match *self {
            Self::Linear => KernelSpec::Linear,
            Self::Quadratic => KernelSpec::Polynomial { degree: 2 },
            Self::Cubic => KernelSpec::Polynomial { degree: 3 },
            Self::Gaussian(Some(sigma)) => KernelSpec::Gaussian { sigma },
            Self::Gaussian(None) => KernelSpec::Gaussian {
                sigma: median_pairwise_distance(rows, 500, seed),
            },
        }
    }
}

/// Median Euclidean distance over all pairs of a seeded subsample of at most
/// `max_rows` rows. Falls back to 1 when every distance is zero.
pub fn median_pairwise_distance(rows: &[Vec<f64>], max_rows: usize, seed: u64) -> f64 {
    let idx: Vec<usize> = if rows.len() > max_rows {
        let mut v = sample(&mut rng(seed), rows.len(), max_rows).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..rows.len()).collect()
    };
    let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(sq_dist(&rows[i], &rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}
