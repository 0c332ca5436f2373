//! Healthy/diseased gate: Hessian blob detection on box filters, upright
//! SURF-style descriptors, a k-means visual vocabulary, bag-of-words
//! histograms and a linear SVM.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{smo_train, svm_decision, BinarySvmModel, KernelSpec, SmoParams};
use crate::imaging::{to_grayscale, GrayImage, RgbImage};
use crate::segmentation::BinaryMask;
use crate::util::{rng, round_half_up, sq_dist};
use crate::{Error, Result};

pub const DESCRIPTOR_LEN: usize = 64;

/// Supremum of the area-normalized determinant response for intensities in
/// `[0, 1]`: `(4/9)^2`.
pub const MAX_RESPONSE: f64 = 16.0 / 81.0;

/// Summed-area table with a zero first row and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<u64>,
}

impl IntegralImage {
    pub fn new(gray: &GrayImage) -> Self {
        let (w, h) = (gray.width(), gray.height());
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += u64::from(gray.get(x, y));
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self {
            width: w,
            height: h,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum over `[0, x) x [0, y)`.
    pub fn at(&self, x: usize, y: usize) -> u64 {
        self.sums[y * (self.width + 1) + x]
    }

    /// Sum of the `w x h` box with top-left `(x, y)`, clipped to the image.
    pub fn box_sum(&self, x: i64, y: i64, w: i64, h: i64) -> i64 {
        let x0 = x.clamp(0, self.width as i64) as usize;
        let y0 = y.clamp(0, self.height as i64) as usize;
        let x1 = (x + w).clamp(0, self.width as i64) as usize;
        let y1 = (y + h).clamp(0, self.height as i64) as usize;
        if x1 <= x0 || y1 <= y0 {
            return 0;
        }
        (self.at(x1, y1) + self.at(x0, y0)) as i64 - (self.at(x1, y0) + self.at(x0, y1)) as i64
    }
}

pub fn integral_image(gray: &GrayImage) -> IntegralImage {
    IntegralImage::new(gray)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Detection threshold as a fraction of [`MAX_RESPONSE`].
    pub threshold_fraction: f64,
    /// Box filter sizes, each an odd multiple of 3, ascending.
    pub filter_sizes: Vec<u32>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.001,
            filter_sizes: vec![9, 15, 21, 27],
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_fraction >= 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::param("threshold_fraction", "must be in [0, 1)"));
        }
        if self.filter_sizes.is_empty() {
            return Err(Error::param("filter_sizes", "need at least one size"));
        }
        for (i, &l) in self.filter_sizes.iter().enumerate() {
            if l < 9 || l % 3 != 0 || (l / 3) % 2 == 0 {
                return Err(Error::param("filter_sizes", format!("{l} is not 3 times an odd number >= 3")));
            }
            if i > 0 && l <= self.filter_sizes[i - 1] {
                return Err(Error::param("filter_sizes", "must be strictly ascending"));
            }
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.threshold_fraction * MAX_RESPONSE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian-equivalent scale, `1.2 * size / 9`.
    pub scale: f64,
    pub response: f64,
    /// Filter size of the layer the maximum was found on.
    pub size: u32,
}

/// Determinant-of-Hessian response map for one filter size. Pixels where the
/// filter does not fit inside the image are 0.
pub fn hessian_response(ii: &IntegralImage, size: u32) -> Vec<f64> {
    let (w, h) = (ii.width(), ii.height());
    let big = size as i64;
    let l = big / 3;
    let b = (big - 1) / 2;
    let norm = 1.0 / (big * big) as f64 / 255.0;
    let mut out = vec![0.0; w * h];
    if (w as i64) < big || (h as i64) < big {
        return out;
    }
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y = y as i64;
        if y < b || y + b >= h as i64 {
            return;
        }
        for x in b..w as i64 - b {
            let dxx = ii.box_sum(x - b, y - l + 1, big, 2 * l - 1)
                - 3 * ii.box_sum(x - l / 2, y - l + 1, l, 2 * l - 1);
            let dyy = ii.box_sum(x - l + 1, y - b, 2 * l - 1, big)
                - 3 * ii.box_sum(x - l + 1, y - l / 2, 2 * l - 1, l);
            let dxy = ii.box_sum(x + 1, y - l, l, l) + ii.box_sum(x - l, y + 1, l, l)
                - ii.box_sum(x - l, y - l, l, l)
                - ii.box_sum(x + 1, y + 1, l, l);
            let (dxx, dyy, dxy) = (dxx as f64 * norm, dyy as f64 * norm, dxy as f64 * norm);
            row[x as usize] = dxx * dyy - 0.81 * dxy * dxy;
        }
    });
    out
}

fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let den = left - 2.0 * mid + right;
    if den < 0.0 {
        (0.5 * (left - right) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Local maxima of the determinant response over a 3x3 neighbourhood in
/// space and the adjacent filter sizes (only the existing neighbour at the
/// smallest and largest size), above the threshold. Sorted by descending
/// response, then by position.
pub fn detect_keypoints(ii: &IntegralImage, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    params.validate()?;
    let (w, h) = (ii.width(), ii.height());
    let layers: Vec<Vec<f64>> = params
        .filter_sizes
        .iter()
        .map(|&s| hessian_response(ii, s))
        .collect();
    let thr = params.threshold();
    let mut kps = Vec::new();
    for (m, layer) in layers.iter().enumerate() {
        let lo = m.saturating_sub(1);
        let hi = (m + 1).min(layers.len() - 1);
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let r = layer[y * w + x];
                if r <= thr {
                    continue;
                }
                let is_max = (lo..=hi).all(|n| {
                    (y - 1..=y + 1).all(|yy| {
                        (x - 1..=x + 1).all(|xx| {
                            (n == m && xx == x && yy == y) || layers[n][yy * w + xx] < r
                        })
                    })
                });
                if !is_max {
                    continue;
                }
                let dx = parabolic_offset(layer[y * w + x - 1], r, layer[y * w + x + 1]);
                let dy = parabolic_offset(layer[(y - 1) * w + x], r, layer[(y + 1) * w + x]);
                let size = params.filter_sizes[m];
                let mut size_f = f64::from(size);
                if lo < m && hi > m {
                    let ds = parabolic_offset(layers[lo][y * w + x], r, layers[hi][y * w + x]);
                    let step = if ds < 0.0 {
                        f64::from(size - params.filter_sizes[lo])
                    } else {
                        f64::from(params.filter_sizes[hi] - size)
                    };
                    size_f += ds * step;
                }
                kps.push(Keypoint {
                    x: x as f64 + dx,
                    y: y as f64 + dy,
                    scale: 1.2 * size_f / 9.0,
                    response: r,
                    size,
                });
            }
        }
    }
    kps.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    Ok(kps)
}

/// Unit-length 64-dimensional descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor(Vec<f64>);

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != DESCRIPTOR_LEN {
            return Err(Error::Mismatch {
                expected: DESCRIPTOR_LEN,
                actual: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Upright descriptor over a `20 s` window: 4x4 cells of 5x5 samples at
/// spacing `s`, each cell accumulating Gaussian-weighted (σ = 3.3 s) Haar
/// responses as `(Σdx, Σdy, Σ|dx|, Σ|dy|)`. The Haar wavelets are
/// `2 round(s) + 1` pixels wide, centred on the sample pixel, with box sums
/// clipped at the image border. `None` when every response is zero.
pub fn describe(ii: &IntegralImage, kp: &Keypoint) -> Option<Descriptor> {
    let s = kp.scale;
    let half = round_half_up(s).max(1.0) as i64;
    let side = 2 * half + 1;
    let two_sigma2 = 2.0 * (3.3 * s) * (3.3 * s);
    let mut d = vec![0.0; DESCRIPTOR_LEN];
    for j in -10i64..10 {
        let oy = (j as f64 + 0.5) * s;
        let py = round_half_up(kp.y + oy) as i64;
        let cy = ((j + 10) / 5) as usize;
        for i in -10i64..10 {
            let ox = (i as f64 + 0.5) * s;
            let px = round_half_up(kp.x + ox) as i64;
            let cx = ((i + 10) / 5) as usize;
            let g = (-(ox * ox + oy * oy) / two_sigma2).exp();
            let dx = (ii.box_sum(px + 1, py - half, half, side)
                - ii.box_sum(px - half, py - half, half, side)) as f64;
            let dy = (ii.box_sum(px - half, py + 1, side, half)
                - ii.box_sum(px - half, py - half, side, half)) as f64;
            let (dx, dy) = (g * dx / 255.0, g * dy / 255.0);
            let cell = &mut d[(cy * 4 + cx) * 4..(cy * 4 + cx) * 4 + 4];
            cell[0] += dx;
            cell[1] += dy;
            cell[2] += dx.abs();
            cell[3] += dy.abs();
        }
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= norm);
    Some(Descriptor(d))
}

/// Keypoint responses and descriptors of one image, in detector order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageFeatures {
    pub responses: Vec<f64>,
    pub descriptors: Vec<Descriptor>,
}

impl ImageFeatures {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

/// Detects and describes keypoints on a grayscale image. Pixels outside
/// `mask` are set to 0 first.
pub fn image_features(
    gray: &GrayImage,
    mask: Option<&BinaryMask>,
    params: &DetectorParams,
) -> Result<ImageFeatures> {
    let masked;
    let gray = match mask {
        Some(m) => {
            if (m.width(), m.height()) != (gray.width(), gray.height()) {
                return Err(Error::Dimensions {
                    width: m.width(),
                    height: m.height(),
                });
            }
            masked = GrayImage::from_fn(gray.width(), gray.height(), |x, y| {
                if m.get(x, y) {
                    gray.get(x, y)
                } else {
                    0
                }
            })?;
            &masked
        }
        None => gray,
    };
    let ii = IntegralImage::new(gray);
    let mut out = ImageFeatures::default();
    for kp in detect_keypoints(&ii, params)? {
        if let Some(d) = describe(&ii, &kp) {
            out.responses.push(kp.response);
            out.descriptors.push(d);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Vocabulary

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Total squared distance after every assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(m, p);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or `max_iters` updates have run. Points are sorted
/// lexicographically first so the result does not depend on input order.
/// Empty clusters keep their previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::param(
            "k",
            format!("{k} clusters need at least {k} points, found {}", points.len()),
        ));
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::Mismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let mut pts: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut r = rng(seed);
    let mut chosen = vec![r.gen_range(0..pts.len())];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, pts[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = r.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > u {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..pts.len()).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, pts[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| pts[i].to_vec()).collect();

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let a: Vec<(usize, f64)> = pts.par_iter().map(|p| nearest(centroids, p)).collect();
        let dist = a.iter().map(|x| x.1).sum();
        (a.into_iter().map(|x| x.0).collect(), dist)
    };
    let (mut labels, d0) = assign(&centroids);
    let mut distortion = vec![d0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        iterations += 1;
        let (next, d) = assign(&centroids);
        distortion.push(d);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        centroids,
        distortion,
        iterations,
        converged,
    })
}

/// Visual vocabulary: `k >= 2` centroids in descriptor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub centroids: Vec<Vec<f64>>,
}

impl Vocabulary {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::param("k", "a vocabulary needs at least 2 words"));
        }
        let dim = centroids[0].len();
        for c in &centroids {
            if c.len() != dim {
                return Err(Error::Mismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("centroids", "must be finite"));
            }
        }
        Ok(Self { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest word; ties go to the lower index.
    pub fn nearest(&self, d: &[f64]) -> usize {
        nearest(&self.centroids, d).0
    }
}

pub fn kmeans_vocabulary(
    descriptors: &[Descriptor],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vocabulary> {
    if k < 2 {
        return Err(Error::param("k", "a vocabulary needs at least 2 words"));
    }
    let points: Vec<Vec<f64>> = descriptors.iter().map(|d| d.0.clone()).collect();
    Vocabulary::new(kmeans(&points, k, seed, max_iters)?.centroids)
}

/// L1-normalized word counts; all zero when no descriptors were encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowHistogram {
    pub bins: Vec<f64>,
    pub descriptors: usize,
}

impl BowHistogram {
    pub fn is_empty(&self) -> bool {
        self.descriptors == 0
    }
}

pub fn encode(descriptors: &[Descriptor], vocab: &Vocabulary) -> BowHistogram {
    let mut bins = vec![0.0; vocab.k()];
    for d in descriptors {
        bins[vocab.nearest(&d.0)] += 1.0;
    }
    let n = descriptors.len();
    if n > 0 {
        bins.iter_mut().for_each(|b| *b /= n as f64);
    }
    BowHistogram {
        bins,
        descriptors: n,
    }
}

// ---------------------------------------------------------------------------
// Gate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub vocab_size: usize,
    pub detector: DetectorParams,
    /// Fraction of each class's keypoints, strongest first, used for the
    /// vocabulary.
    pub strongest_fraction: f64,
    /// Fraction of each class's images sampled for the vocabulary.
    pub vocab_image_fraction: f64,
    pub kmeans_max_iters: usize,
    pub svm: SmoParams,
    pub seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            vocab_size: 200,
            detector: DetectorParams::default(),
            strongest_fraction: 0.7,
            vocab_image_fraction: 0.5,
            kmeans_max_iters: 100,
            svm: SmoParams {
                c: 10.0,
                ..SmoParams::default()
            },
            seed: 0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.vocab_size < 2 {
            return Err(Error::param("bovw_k", "must be at least 2"));
        }
        for (name, v) in [
            ("strongest_fraction", self.strongest_fraction),
            ("vocab_image_fraction", self.vocab_image_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, "must be in (0, 1]"));
            }
        }
        if !(self.svm.c > 0.0) {
            return Err(Error::param("gate_c", "must be positive"));
        }
        Ok(())
    }
}

/// Trained gate; the SVM scores healthy images positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthGate {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub svm: BinarySvmModel,
    pub detector_params: DetectorParams,
    pub strongest_fraction: f64,
    pub vocab_image_fraction: f64,
    /// Descriptors the vocabulary was clustered from.
    pub vocab_descriptors: usize,
}

impl HealthGate {
    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::new(self.centroids.clone())
    }
}

/// Builds the vocabulary from a seeded per-class image sample, keeping the
/// strongest keypoints of each class, then trains a linear SVM on the
/// histograms of every training image that produced descriptors. The
/// vocabulary size is capped by the number of sampled descriptors.
pub fn train_health_gate(
    images: &[ImageFeatures],
    healthy: &[bool],
    cfg: &GateConfig,
) -> Result<HealthGate> {
    cfg.validate()?;
    if images.len() != healthy.len() {
        return Err(Error::Mismatch {
            expected: images.len(),
            actual: healthy.len(),
        });
    }
    if !healthy.iter().any(|&h| h) || !healthy.iter().any(|&h| !h) {
        return Err(Error::Dataset("the gate needs healthy and diseased images".into()));
    }
    let mut r = rng(cfg.seed);
    let mut pool = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..images.len()).filter(|&i| healthy[i] == class).collect();
        idx.shuffle(&mut r);
        let take = ((idx.len() as f64 * cfg.vocab_image_fraction).ceil() as usize).max(1);
        idx.truncate(take);
        idx.sort_unstable();
        let mut kps: Vec<(f64, usize, usize)> = idx
            .iter()
            .flat_map(|&i| images[i].responses.iter().enumerate().map(move |(j, &s)| (s, i, j)))
            .collect();
        kps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let keep = (kps.len() as f64 * cfg.strongest_fraction).ceil() as usize;
        pool.extend(kps[..keep].iter().map(|&(_, i, j)| images[i].descriptors[j].clone()));
    }
    let k = cfg.vocab_size.min(pool.len());
    if k < 2 {
        return Err(Error::Dataset(format!(
            "only {} descriptors available for the vocabulary",
            pool.len()
        )));
    }
    let vocab = kmeans_vocabulary(&pool, k, cfg.seed, cfg.kmeans_max_iters)?;

    let hists: Vec<BowHistogram> = images
        .par_iter()
        .map(|f| encode(&f.descriptors, &vocab))
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (h, &lab) in hists.into_iter().zip(healthy) {
        if !h.is_empty() {
            x.push(h.bins);
            y.push(if lab { 1.0 } else { -1.0 });
        }
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Dataset(
            "both gate classes need images with descriptors".into(),
        ));
    }
    let mut svm = smo_train(&x, &y, &KernelSpec::Linear, &cfg.svm)?;
    svm.support_indices.clear();
    Ok(HealthGate {
        k,
        centroids: vocab.centroids,
        svm,
        detector_params: cfg.detector.clone(),
        strongest_fraction: cfg.strongest_fraction,
        vocab_image_fraction: cfg.vocab_image_fraction,
        vocab_descriptors: pool.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthDecision {
    pub healthy: bool,
    /// Linear SVM decision value (positive means healthy).
    pub score: f64,
    /// Set when the image produced no descriptors and was routed to the
    /// diseased branch by default.
    pub low_confidence: bool,
    pub descriptors: usize,
}

pub fn classify_features(gate: &HealthGate, features: &ImageFeatures) -> Result<HealthDecision> {
    if features.is_empty() {
        return Ok(HealthDecision {
            healthy: false,
            score: 0.0,
            low_confidence: true,
            descriptors: 0,
        });
    }
    let h = encode(&features.descriptors, &gate.vocabulary()?);
    let score = svm_decision(&gate.svm, &h.bins)?;
    Ok(HealthDecision {
        healthy: score >= 0.0,
        score,
        low_confidence: false,
        descriptors: h.descriptors,
    })
}

/// Grayscale, keypoints, descriptors, histogram, then the SVM sign.
pub fn classify_health(
    gate: &HealthGate,
    img: &RgbImage,
    mask: Option<&BinaryMask>,
) -> Result<HealthDecision> {
    let f = image_features(&to_grayscale(img), mask, &gate.detector_params)?;
    classify_features(gate, &f)
}
