//! Gray-level co-occurrence statistics and the color/texture feature vector.
//!
//! Gray levels are indexed `0..Ng` throughout. Entropies use the natural
//! logarithm with `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::imaging::{to_grayscale, GrayImage, RgbImage};
use crate::segmentation::BinaryMask;
use crate::util::xlnx;
use crate::{Error, Result};

/// Pixel displacement `(dx, dy)` between the two members of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlcmOffset {
    dx: i32,
    dy: i32,
}

impl GlcmOffset {
    pub fn new(dx: i32, dy: i32) -> Result<Self> {
        if dx == 0 && dy == 0 {
            return Err(Error::param("offset", "(0, 0) is not a displacement"));
        }
        Ok(Self { dx, dy })
    }

    pub fn dx(&self) -> i32 {
        self.dx
    }

    pub fn dy(&self) -> i32 {
        self.dy
    }

    /// The four distance-1 orientations: 0, 45, 90 and 135 degrees.
    pub fn standard() -> Vec<GlcmOffset> {
        vec![
            GlcmOffset { dx: 1, dy: 0 },
            GlcmOffset { dx: 1, dy: 1 },
            GlcmOffset { dx: 0, dy: 1 },
            GlcmOffset { dx: -1, dy: 1 },
        ]
    }
}

/// Gray image re-binned to `levels` equal-width levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    data: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, data: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&levels) {
            return Err(Error::param("levels", "must lie in 2..=256"));
        }
        if data.len() != width * height {
            return Err(Error::Mismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if data.iter().any(|&v| v as usize >= levels) {
            return Err(Error::param("data", "level out of range"));
        }
        Ok(Self {
            width,
            height,
            levels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Equal-width binning of `0..=255` into `levels` bins. Pixels outside the
/// mask are set to level 0 and never read by [`build_glcm`].
pub fn quantize(gray: &GrayImage, mask: &BinaryMask, levels: usize) -> Result<QuantizedImage> {
    if !(2..=256).contains(&levels) {
        return Err(Error::param("levels", "must lie in 2..=256"));
    }
    if (gray.width(), gray.height()) != (mask.width(), mask.height()) {
        return Err(Error::Mismatch {
            expected: gray.width() * gray.height(),
            actual: mask.width() * mask.height(),
        });
    }
    let data = gray
        .pixels()
        .iter()
        .zip(mask.bits())
        .map(|(&g, &m)| {
            if m {
                ((g as usize * levels) / 256).min(levels - 1) as u8
            } else {
                0
            }
        })
        .collect();
    QuantizedImage::new(gray.width(), gray.height(), levels, data)
}

/// Co-occurrence counts and their normalized probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

impl Glcm {
    /// Wraps an already-normalized probability matrix (row-major,
    /// `levels x levels`). Counts are left at zero.
    pub fn from_probs(levels: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != levels * levels {
            return Err(Error::Mismatch {
                expected: levels * levels,
                actual: probs.len(),
            });
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::param("probs", "entries must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("probs", format!("sum {total} is not 1")));
        }
        Ok(Self {
            levels,
            counts: vec![0; levels * levels],
            probs,
        })
    }

    pub fn from_counts(levels: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != levels * levels {
            return Err(Error::Mismatch {
                expected: levels * levels,
                actual: counts.len(),
            });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyGlcm);
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            levels,
            counts,
            probs,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }
}

/// Accumulates pairs `(I(x,y), I(x+dx, y+dy))` over every offset, counting
/// only pairs with both pixels inside the mask. Symmetric mode also counts
/// each pair reversed.
pub fn build_glcm(
    q: &QuantizedImage,
    mask: &BinaryMask,
    offsets: &[GlcmOffset],
    symmetric: bool,
) -> Result<Glcm> {
    if offsets.is_empty() {
        return Err(Error::param("offsets", "at least one offset is required"));
    }
    if (q.width, q.height) != (mask.width(), mask.height()) {
        return Err(Error::Mismatch {
            expected: q.width * q.height,
            actual: mask.width() * mask.height(),
        });
    }
    let ng = q.levels;
    let (w, h) = (q.width as i64, q.height as i64);
    let bits = mask.bits();
    let mut counts = vec![0u64; ng * ng];
    for off in offsets {
        let (dx, dy) = (off.dx as i64, off.dy as i64);
        for y in 0..h {
            let y2 = y + dy;
            if y2 < 0 || y2 >= h {
                continue;
            }
            for x in 0..w {
                let x2 = x + dx;
                if x2 < 0 || x2 >= w {
                    continue;
                }
                let a = (y * w + x) as usize;
                let b = (y2 * w + x2) as usize;
                if !bits[a] || !bits[b] {
                    continue;
                }
                let (i, j) = (q.data[a] as usize, q.data[b] as usize);
                counts[i * ng + j] += 1;
                if symmetric {
                    counts[j * ng + i] += 1;
                }
            }
        }
    }
    Glcm::from_counts(ng, counts)
}

/// Marginal distributions and entropies derived from a normalized GLCM.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStats {
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Distribution of `i + j`, indices `0..=2(Ng-1)`.
    pub p_sum: Vec<f64>,
    /// Distribution of `|i - j|`, indices `0..Ng`.
    pub p_diff: Vec<f64>,
    pub hx: f64,
    pub hy: f64,
    pub hxy: f64,
    pub hxy1: f64,
    pub hxy2: f64,
}

pub fn marginal_stats(g: &Glcm) -> MarginalStats {
    let ng = g.levels;
    let mut px = vec![0.0; ng];
    let mut py = vec![0.0; ng];
    let mut p_sum = vec![0.0; 2 * ng - 1];
    let mut p_diff = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            let p = g.p(i, j);
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            p_diff[i.abs_diff(j)] += p;
        }
    }
    let mean = |d: &[f64]| d.iter().enumerate().map(|(i, p)| i as f64 * p).sum::<f64>();
    let mu_x = mean(&px);
    let mu_y = mean(&py);
    let sd = |d: &[f64], mu: f64| {
        d.iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - mu).powi(2) * p)
            .sum::<f64>()
            .sqrt()
    };
    let entropy = |d: &[f64]| -d.iter().map(|&p| xlnx(p)).sum::<f64>();
    let hx = entropy(&px);
    let hy = entropy(&py);
    let hxy = entropy(&g.probs);
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            let prod = px[i] * py[j];
            if prod > 0.0 {
                hxy1 -= g.p(i, j) * prod.ln();
                hxy2 -= prod * prod.ln();
            }
        }
    }
    MarginalStats {
        sigma_x: sd(&px, mu_x),
        sigma_y: sd(&py, mu_y),
        px,
        py,
        mu_x,
        mu_y,
        p_sum,
        p_diff,
        hx,
        hy,
        hxy,
        hxy1,
        hxy2,
    }
}

/// The 22 GLCM texture statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureFeatures {
    pub uniformity: f64,
    pub entropy: f64,
    pub contrast: f64,
    pub dissimilarity: f64,
    pub homogeneity: f64,
    pub inverse_difference: f64,
    pub correlation: f64,
    pub autocorrelation: f64,
    pub cluster_shade: f64,
    pub cluster_prominence: f64,
    pub max_probability: f64,
    pub sum_of_squares: f64,
    pub sum_average: f64,
    pub sum_variance: f64,
    pub sum_entropy: f64,
    pub difference_variance: f64,
    pub difference_entropy: f64,
    pub imc1: f64,
    pub imc2: f64,
    pub mcc: f64,
    pub idn: f64,
    pub idmn: f64,
}

impl TextureFeatures {
    pub const NAMES: [&'static str; 22] = [
        "uniformity",
        "entropy",
        "contrast",
        "dissimilarity",
        "homogeneity",
        "inverse_difference",
        "correlation",
        "autocorrelation",
        "cluster_shade",
        "cluster_prominence",
        "max_probability",
        "sum_of_squares",
        "sum_average",
        "sum_variance",
        "sum_entropy",
        "difference_variance",
        "difference_entropy",
        "imc1",
        "imc2",
        "mcc",
        "idn",
        "idmn",
    ];

    pub fn to_array(&self) -> [f64; 22] {
        [
            self.uniformity,
            self.entropy,
            self.contrast,
            self.dissimilarity,
            self.homogeneity,
            self.inverse_difference,
            self.correlation,
            self.autocorrelation,
            self.cluster_shade,
            self.cluster_prominence,
            self.max_probability,
            self.sum_of_squares,
            self.sum_average,
            self.sum_variance,
            self.sum_entropy,
            self.difference_variance,
            self.difference_entropy,
            self.imc1,
            self.imc2,
            self.mcc,
            self.idn,
            self.idmn,
        ]
    }
}

/// Computes all 22 statistics. `m` must come from `g`.
///
/// Where the classical printed formulas are ambiguous the standard
/// definitions are used:
/// - autocorrelation: `sum i*j*p(i,j)`
/// - cluster shade / prominence: `sum (i+j-mu_x-mu_y)^{3,4} p(i,j)`
/// - sum of squares: `sum (i-mu_x)^2 p(i,j)`
/// - sum variance: `sum (k-SA)^2 p_sum(k)`; difference variance is the
///   variance of `p_diff`
/// - IDN: `sum p/(1+|i-j|/Ng)`, IDMN: `sum p/(1+(i-j)^2/Ng^2)`
/// - correlation is 0 when either marginal has zero spread
pub fn texture_features(g: &Glcm, m: &MarginalStats) -> TextureFeatures {
    let ng = g.levels;
    let ngf = ng as f64;
    let mut t = TextureFeatures {
        uniformity: 0.0,
        entropy: m.hxy,
        contrast: 0.0,
        dissimilarity: 0.0,
        homogeneity: 0.0,
        inverse_difference: 0.0,
        correlation: 0.0,
        autocorrelation: 0.0,
        cluster_shade: 0.0,
        cluster_prominence: 0.0,
        max_probability: 0.0,
        sum_of_squares: 0.0,
        sum_average: 0.0,
        sum_variance: 0.0,
        sum_entropy: 0.0,
        difference_variance: 0.0,
        difference_entropy: 0.0,
        imc1: 0.0,
        imc2: 0.0,
        mcc: 0.0,
        idn: 0.0,
        idmn: 0.0,
    };
    for i in 0..ng {
        for j in 0..ng {
            let p = g.p(i, j);
            let (fi, fj) = (i as f64, j as f64);
            let d = fi - fj;
            let ad = d.abs();
            t.uniformity += p * p;
            t.contrast += d * d * p;
            t.dissimilarity += ad * p;
            t.homogeneity += p / (1.0 + d * d);
            t.inverse_difference += p / (1.0 + ad);
            t.autocorrelation += fi * fj * p;
            let c = fi + fj - m.mu_x - m.mu_y;
            t.cluster_shade += c * c * c * p;
            t.cluster_prominence += c * c * c * c * p;
            t.max_probability = t.max_probability.max(p);
            t.sum_of_squares += (fi - m.mu_x).powi(2) * p;
            t.idn += p / (1.0 + ad / ngf);
            t.idmn += p / (1.0 + d * d / (ngf * ngf));
        }
    }
    let spread = m.sigma_x * m.sigma_y;
    t.correlation = if spread > 0.0 {
        (t.autocorrelation - m.mu_x * m.mu_y) / spread
    } else {
        0.0
    };

    t.sum_average = m.p_sum.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    t.sum_variance = m
        .p_sum
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - t.sum_average).powi(2) * p)
        .sum();
    t.sum_entropy = -m.p_sum.iter().map(|&p| xlnx(p)).sum::<f64>();
    let diff_mean: f64 = m.p_diff.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    t.difference_variance = m
        .p_diff
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - diff_mean).powi(2) * p)
        .sum();
    t.difference_entropy = -m.p_diff.iter().map(|&p| xlnx(p)).sum::<f64>();

    let hmax = m.hx.max(m.hy);
    t.imc1 = if hmax > 0.0 {
        (m.hxy - m.hxy1) / hmax
    } else {
        0.0
    };
    t.imc2 = (1.0 - (-2.0 * (m.hxy2 - m.hxy).max(0.0)).exp())
        .clamp(0.0, 1.0)
        .sqrt();
    t.mcc = maximal_correlation(g, m);
    t
}

/// Square root of the second-largest eigenvalue of
/// `Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k))`, rows/columns with zero
/// marginal mass removed. Clamped to `[0, 1]`.
pub fn maximal_correlation(g: &Glcm, m: &MarginalStats) -> f64 {
    let rows: Vec<usize> = (0..g.levels).filter(|&i| m.px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..g.levels).filter(|&k| m.py[k] > 0.0).collect();
    let n = rows.len();
    if n < 2 {
        return 0.0;
    }
    let mut q = vec![vec![0.0; n]; n];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in rows.iter().enumerate() {
            q[a][b] = cols
                .iter()
                .map(|&k| g.p(i, k) * g.p(j, k) / (m.px[i] * m.py[k]))
                .sum();
        }
    }
    let mut eig = eigenvalues(q);
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[1].clamp(0.0, 1.0).sqrt()
}

/// Real parts of the eigenvalues of a small dense matrix, via Householder
/// reduction to Hessenberg form and Wilkinson-shifted QR iteration
/// (tolerance 1e-10, at most 500 iterations per eigenvalue).
pub fn eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    hessenberg(&mut a);
    let mut out = Vec::with_capacity(n);
    let mut hi = n;
    let mut iters = 0;
    while hi > 0 {
        if hi == 1 {
            out.push(a[0][0]);
            break;
        }
        let k = hi - 1;
        let scale = a[k][k].abs() + a[k - 1][k - 1].abs();
        if a[k][k - 1].abs() <= 1e-10 * scale.max(1e-300) || iters >= 500 {
            if iters >= 500 {
                // give up on this block: take the trailing 2x2 as converged
                let (l1, l2) = eig2(a[k - 1][k - 1], a[k - 1][k], a[k][k - 1], a[k][k]);
                out.push(l1);
                out.push(l2);
                hi -= 2;
            } else {
                out.push(a[k][k]);
                hi -= 1;
            }
            iters = 0;
            continue;
        }
        // find start of the unreduced block
        let mut lo = k - 1;
        while lo > 0 {
            let s = a[lo][lo].abs() + a[lo - 1][lo - 1].abs();
            if a[lo][lo - 1].abs() <= 1e-10 * s.max(1e-300) {
                break;
            }
            lo -= 1;
        }
        let shift = wilkinson(a[k - 1][k - 1], a[k - 1][k], a[k][k - 1], a[k][k]);
        qr_step(&mut a, lo, hi, shift);
        iters += 1;
    }
    out
}

fn eig2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (tr / 2.0 + r, tr / 2.0 - r)
    } else {
        (tr / 2.0, tr / 2.0)
    }
}

fn wilkinson(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (l1, l2) = eig2(a, b, c, d);
    if (l1 - d).abs() < (l2 - d).abs() {
        l1
    } else {
        l2
    }
}

fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if a[k + 1][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = vec![0.0; n];
        v[k + 1] = a[k + 1][k] + sign * alpha;
        for i in k + 2..n {
            v[i] = a[i][k];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- H A H with H = I - 2 v v^T / |v|^2
        for j in 0..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * a[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k + 1..n {
                a[i][j] -= s * v[i];
            }
        }
        for row in a.iter_mut() {
            let s: f64 = (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>() * 2.0 / vnorm2;
            for j in k + 1..n {
                row[j] -= s * v[j];
            }
        }
    }
}

/// One shifted QR step on the Hessenberg block `lo..hi` using Givens rotations.
fn qr_step(a: &mut [Vec<f64>], lo: usize, hi: usize, shift: f64) {
    let n = a.len();
    for i in lo..hi {
        a[i][i] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi - 1 {
        let (x, y) = (a[k][k], a[k + 1][k]);
        let r = x.hypot(y);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (x / r, y / r) };
        for j in k..n {
            let (u, v) = (a[k][j], a[k + 1][j]);
            a[k][j] = c * u + s * v;
            a[k + 1][j] = -s * u + c * v;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        for row in a.iter_mut().take((k + 2).min(hi)) {
            let (u, v) = (row[k], row[k + 1]);
            row[k] = c * u + s * v;
            row[k + 1] = -s * u + c * v;
        }
    }
    for i in lo..hi {
        a[i][i] += shift;
    }
}

/// Per-channel population mean and standard deviation over a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMoments {
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    pub std_r: f64,
    pub std_g: f64,
    pub std_b: f64,
}

impl ColorMoments {
    pub const NAMES: [&'static str; 6] = ["mean_r", "mean_g", "mean_b", "std_r", "std_g", "std_b"];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mean_r,
            self.mean_g,
            self.mean_b,
            self.std_r,
            self.std_g,
            self.std_b,
        ]
    }
}

pub fn color_moments(img: &RgbImage, mask: &BinaryMask) -> Result<ColorMoments> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::Mismatch {
            expected: img.width() * img.height(),
            actual: mask.width() * mask.height(),
        });
    }
    let mut n = 0usize;
    let mut sum = [0.0f64; 3];
    for (p, _) in img.pixels().iter().zip(mask.bits()).filter(|(_, &m)| m) {
        n += 1;
        for c in 0..3 {
            sum[c] += p[c] as f64;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mean = sum.map(|s| s / n as f64);
    let mut var = [0.0f64; 3];
    for (p, _) in img.pixels().iter().zip(mask.bits()).filter(|(_, &m)| m) {
        for c in 0..3 {
            var[c] += (p[c] as f64 - mean[c]).powi(2);
        }
    }
    let sd = var.map(|v| (v / n as f64).sqrt());
    Ok(ColorMoments {
        mean_r: mean[0],
        mean_g: mean[1],
        mean_b: mean[2],
        std_r: sd[0],
        std_g: sd[1],
        std_b: sd[2],
    })
}

/// Number of numeric features: 6 color moments followed by 22 texture statistics.
pub const NUM_FEATURES: usize = 28;

/// Feature names in vector order.
pub fn feature_names() -> Vec<&'static str> {
    ColorMoments::NAMES
        .iter()
        .chain(TextureFeatures::NAMES.iter())
        .copied()
        .collect()
}

/// CSV columns: every feature name, then `label`.
pub fn column_names() -> Vec<&'static str> {
    let mut v = feature_names();
    v.push("label");
    v
}

/// Color and texture description of one lesion, with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    label: Option<String>,
}

impl FeatureVector {
    pub fn new(color: &ColorMoments, texture: &TextureFeatures) -> Self {
        let mut values = Vec::with_capacity(NUM_FEATURES);
        values.extend_from_slice(&color.to_array());
        values.extend_from_slice(&texture.to_array());
        Self {
            values,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names()
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    /// Column count including the label slot.
    pub fn len(&self) -> usize {
        self.values.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub gray_levels: usize,
    pub offsets: Vec<GlcmOffset>,
    pub symmetric: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            gray_levels: 8,
            offsets: GlcmOffset::standard(),
            symmetric: true,
        }
    }
}

/// Color moments of the lesion pixels plus texture statistics of the
/// quantized grayscale lesion.
pub fn extract_feature_vector(
    img: &RgbImage,
    leaf: &BinaryMask,
    lesion: &BinaryMask,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let region = lesion.intersect(leaf)?;
    if region.is_empty() {
        return Err(Error::EmptyMask);
    }
    let color = color_moments(img, &region)?;
    let q = quantize(&to_grayscale(img), &region, cfg.gray_levels)?;
    let g = build_glcm(&q, &region, &cfg.offsets, cfg.symmetric)?;
    let m = marginal_stats(&g);
    Ok(FeatureVector::new(&color, &texture_features(&g, &m)))
}
