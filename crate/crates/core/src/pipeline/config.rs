use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bovw::{DetectorParams, GateConfig};
use crate::classify::{KernelKind, SmoParams, StandardizeMode};
use crate::glcm::{FeatureConfig, GlcmOffset};
use crate::segmentation::{LesionPolarity, SegmentationParams};
use crate::{Error, Result};

/// Every tunable of the pipeline. The text form is flat `key = value`
/// lines whose keys are the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub gray_levels: usize,
    /// `dx,dy` pairs separated by spaces.
    pub glcm_offsets: Vec<(i32, i32)>,
    pub glcm_symmetric: bool,
    pub spatial_sigma: f64,
    pub range_sigma: f64,
    pub bilateral_radius: usize,
    pub min_component_px: usize,
    pub border_fraction: f64,
    pub lesion: LesionPolarity,
    pub bovw_k: usize,
    pub detector_threshold: f64,
    pub strongest_fraction: f64,
    pub vocab_image_fraction: f64,
    pub kmeans_max_iters: usize,
    pub gate_c: f64,
    pub kernel: KernelKind,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub relieff_k: usize,
    /// ReliefF sample count; 0 visits every row.
    pub relieff_m: usize,
    pub ffs_epsilon: f64,
    pub cv_folds: usize,
    pub standardize: StandardizeMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gray_levels: 8,
            glcm_offsets: GlcmOffset::standard().iter().map(|o| (o.dx(), o.dy())).collect(),
            glcm_symmetric: true,
            spatial_sigma: 3.0,
            range_sigma: 25.0,
            bilateral_radius: 5,
            min_component_px: 16,
            border_fraction: 0.25,
            lesion: LesionPolarity::Dark,
            bovw_k: 200,
            detector_threshold: 0.001,
            strongest_fraction: 0.7,
            vocab_image_fraction: 0.5,
            kmeans_max_iters: 100,
            gate_c: 10.0,
            kernel: KernelKind::Cubic,
            svm_c: 1.0,
            svm_tol: 1e-3,
            svm_max_passes: 10,
            relieff_k: 10,
            relieff_m: 0,
            ffs_epsilon: 1e-6,
            cv_folds: 10,
            standardize: StandardizeMode::PerFold,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("invalid value `{value}` for {key}"),
    })
}

fn kernel_text(k: KernelKind) -> String {
    match k {
        KernelKind::Gaussian(Some(s)) => format!("gaussian:{s:?}"),
        other => other.to_string(),
    }
}

fn parse_kernel(s: &str) -> Result<KernelKind> {
    if let Some(sigma) = s.strip_prefix("gaussian:") {
        let sigma: f64 = sigma
            .parse()
            .map_err(|_| Error::param("kernel", format!("bad gaussian sigma `{sigma}`")))?;
        return Ok(KernelKind::Gaussian(Some(sigma)));
    }
    s.parse()
}

fn standardize_text(m: StandardizeMode) -> &'static str {
    match m {
        StandardizeMode::PerFold => "per-fold",
        StandardizeMode::Global => "global",
        StandardizeMode::None => "none",
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(Error::Config {
                    line,
                    reason: format!("{key} already set on line {first}"),
                });
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Config { reason, .. } => Error::Config { line, reason },
                other => Error::Config {
                    line,
                    reason: other.to_string(),
                },
            })?;
            if let Err(e) = cfg.validate() {
                return Err(Error::Config {
                    line,
                    reason: e.to_string(),
                });
            }
        }
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let line = 0;
        match key {
            "gray_levels" => self.gray_levels = parse(key, value, line)?,
            "glcm_offsets" => {
                let mut offs = Vec::new();
                for pair in value.split_whitespace() {
                    let (dx, dy) = pair.split_once(',').ok_or_else(|| {
                        Error::param("glcm_offsets", format!("expected dx,dy, got `{pair}`"))
                    })?;
                    offs.push((parse(key, dx.trim(), line)?, parse(key, dy.trim(), line)?));
                }
                self.glcm_offsets = offs;
            }
            "glcm_symmetric" => self.glcm_symmetric = parse(key, value, line)?,
            "spatial_sigma" => self.spatial_sigma = parse(key, value, line)?,
            "range_sigma" => self.range_sigma = parse(key, value, line)?,
            "bilateral_radius" => self.bilateral_radius = parse(key, value, line)?,
            "min_component_px" => self.min_component_px = parse(key, value, line)?,
            "border_fraction" => self.border_fraction = parse(key, value, line)?,
            "lesion" => self.lesion = value.parse()?,
            "bovw_k" => self.bovw_k = parse(key, value, line)?,
            "detector_threshold" => self.detector_threshold = parse(key, value, line)?,
            "strongest_fraction" => self.strongest_fraction = parse(key, value, line)?,
            "vocab_image_fraction" => self.vocab_image_fraction = parse(key, value, line)?,
            "kmeans_max_iters" => self.kmeans_max_iters = parse(key, value, line)?,
            "gate_c" => self.gate_c = parse(key, value, line)?,
            "kernel" => self.kernel = parse_kernel(value)?,
            "svm_c" => self.svm_c = parse(key, value, line)?,
            "svm_tol" => self.svm_tol = parse(key, value, line)?,
            "svm_max_passes" => self.svm_max_passes = parse(key, value, line)?,
            "relieff_k" => self.relieff_k = parse(key, value, line)?,
            "relieff_m" => self.relieff_m = parse(key, value, line)?,
            "ffs_epsilon" => self.ffs_epsilon = parse(key, value, line)?,
            "cv_folds" => self.cv_folds = parse(key, value, line)?,
            "standardize" => self.standardize = value.parse()?,
            "seed" => self.seed = parse(key, value, line)?,
            _ => return Err(Error::param(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Canonical `key = value` text, one line per field in declaration order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let offsets: Vec<String> = self
            .glcm_offsets
            .iter()
            .map(|(dx, dy)| format!("{dx},{dy}"))
            .collect();
        vec![
            ("gray_levels", self.gray_levels.to_string()),
            ("glcm_offsets", offsets.join(" ")),
            ("glcm_symmetric", self.glcm_symmetric.to_string()),
            ("spatial_sigma", format!("{:?}", self.spatial_sigma)),
            ("range_sigma", format!("{:?}", self.range_sigma)),
            ("bilateral_radius", self.bilateral_radius.to_string()),
            ("min_component_px", self.min_component_px.to_string()),
            ("border_fraction", format!("{:?}", self.border_fraction)),
            (
                "lesion",
                match self.lesion {
                    LesionPolarity::Dark => "dark".into(),
                    LesionPolarity::Bright => "bright".into(),
                },
            ),
            ("bovw_k", self.bovw_k.to_string()),
            ("detector_threshold", format!("{:?}", self.detector_threshold)),
            ("strongest_fraction", format!("{:?}", self.strongest_fraction)),
            ("vocab_image_fraction", format!("{:?}", self.vocab_image_fraction)),
            ("kmeans_max_iters", self.kmeans_max_iters.to_string()),
            ("gate_c", format!("{:?}", self.gate_c)),
            ("kernel", kernel_text(self.kernel)),
            ("svm_c", format!("{:?}", self.svm_c)),
            ("svm_tol", format!("{:?}", self.svm_tol)),
            ("svm_max_passes", self.svm_max_passes.to_string()),
            ("relieff_k", self.relieff_k.to_string()),
            ("relieff_m", self.relieff_m.to_string()),
            ("ffs_epsilon", format!("{:?}", self.ffs_epsilon)),
            ("cv_folds", self.cv_folds.to_string()),
            ("standardize", standardize_text(self.standardize).into()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.gray_levels) {
            return Err(Error::param("gray_levels", "must be in 2..=256"));
        }
        self.feature_config()?;
        let positive = [
            ("spatial_sigma", self.spatial_sigma),
            ("range_sigma", self.range_sigma),
            ("svm_c", self.svm_c),
            ("svm_tol", self.svm_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        if !(self.border_fraction > 0.0 && self.border_fraction <= 1.0) {
            return Err(Error::param("border_fraction", "must be in (0, 1]"));
        }
        if !(self.ffs_epsilon >= 0.0) {
            return Err(Error::param("ffs_epsilon", "must be >= 0"));
        }
        if self.svm_max_passes == 0 {
            return Err(Error::param("svm_max_passes", "must be at least 1"));
        }
        if self.relieff_k == 0 {
            return Err(Error::param("relieff_k", "must be at least 1"));
        }
        if self.cv_folds < 2 {
            return Err(Error::param("cv_folds", "must be at least 2"));
        }
        if let KernelKind::Gaussian(Some(s)) = self.kernel {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("kernel", "gaussian sigma must be positive"));
            }
        }
        self.gate_config().validate()
    }

    pub fn segmentation_params(&self) -> SegmentationParams {
        SegmentationParams {
            spatial_sigma: self.spatial_sigma,
            range_sigma: self.range_sigma,
            radius: self.bilateral_radius,
            min_component_px: self.min_component_px,
            border_fraction: self.border_fraction,
        }
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        if self.glcm_offsets.is_empty() {
            return Err(Error::param("glcm_offsets", "need at least one offset"));
        }
        Ok(FeatureConfig {
            gray_levels: self.gray_levels,
            offsets: self
                .glcm_offsets
                .iter()
                .map(|&(dx, dy)| GlcmOffset::new(dx, dy))
                .collect::<Result<_>>()?,
            symmetric: self.glcm_symmetric,
        })
    }

    pub fn smo_params(&self) -> SmoParams {
        SmoParams {
            c: self.svm_c,
            tol: self.svm_tol,
            max_passes: self.svm_max_passes,
            seed: self.seed,
            ..SmoParams::default()
        }
    }

    pub fn gate_config(&self) -> GateConfig {
        GateConfig {
            vocab_size: self.bovw_k,
            detector: DetectorParams {
                threshold_fraction: self.detector_threshold,
                ..DetectorParams::default()
            },
            strongest_fraction: self.strongest_fraction,
            vocab_image_fraction: self.vocab_image_fraction,
            kmeans_max_iters: self.kmeans_max_iters,
            svm: SmoParams {
                c: self.gate_c,
                tol: self.svm_tol,
                max_passes: self.svm_max_passes,
                seed: self.seed,
                ..SmoParams::default()
            },
            seed: self.seed,
        }
    }

    pub fn relieff_samples(&self) -> Option<usize> {
        (self.relieff_m > 0).then_some(self.relieff_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = PipelineConfig {
            kernel: KernelKind::Gaussian(Some(0.75)),
            glcm_offsets: vec![(2, 0), (0, 2)],
            lesion: LesionPolarity::Bright,
            seed: 42,
            ..PipelineConfig::default()
        };
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn comments_and_overrides() {
        let cfg = PipelineConfig::parse("# tuned\n\nkernel = linear  # fast\n  cv_folds=5  \n").unwrap();
        assert_eq!(cfg.kernel, KernelKind::Linear);
        assert_eq!(cfg.cv_folds, 5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = |text: &str, want: usize| match PipelineConfig::parse(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, want, "{text}"),
            other => panic!("{text}: {other:?}"),
        };
        bad("seed = 1\nfoo = 2", 2);
        bad("gray_levels = 1", 1);
        bad("\ncv_folds = x", 2);
        bad("seed = 1\nseed = 2", 2);
        bad("kernel = quartic", 1);
        bad("glcm_offsets = 0,0", 1);
        bad("just words", 1);
        bad("bovw_k = 1", 1);
    }
}
