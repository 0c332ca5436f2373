//! Background removal (watershed over the smoothed hue channel followed by
//! morphological cleanup) and lesion extraction by Otsu thresholding.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::imaging::{
    bilateral_filter, gray_world_normalize, read_pbm_header, rgb_to_hsv, GrayImage, RgbImage,
};
use crate::{Error, Result};

const N8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const CROSS: [(isize, isize); 5] = [(0, 0), (0, -1), (-1, 0), (1, 0), (0, 1)];

fn neighbors(
    width: usize,
    height: usize,
    idx: usize,
    offsets: &'static [(isize, isize)],
) -> impl Iterator<Item = usize> {
    let x = (idx % width) as isize;
    let y = (idx / width) as isize;
    offsets.iter().filter_map(move |&(dx, dy)| {
        let nx = x + dx;
        let ny = y + dy;
        if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
            None
        } else {
            Some(ny as usize * width + nx as usize)
        }
    })
}

/// Per-pixel foreground flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(Error::Mismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn same_shape(&self, other: &BinaryMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::Mismatch {
                expected: self.width * self.height,
                actual: other.width * other.height,
            });
        }
        Ok(())
    }

    pub fn intersect(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.same_shape(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        BinaryMask::new(self.width, self.height, bits)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other).is_ok() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Binary PBM (P4), foreground encoded as 1 (black).
    pub fn encode_pbm(&self) -> Vec<u8> {
        let mut out = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        let row_bytes = self.width.div_ceil(8);
        for y in 0..self.height {
            let mut row = vec![0u8; row_bytes];
            for x in 0..self.width {
                if self.get(x, y) {
                    row[x / 8] |= 0x80 >> (x % 8);
                }
            }
            out.extend_from_slice(&row);
        }
        out
    }

    pub fn decode_pbm(bytes: &[u8]) -> Result<Self> {
        let (width, height, start) = read_pbm_header(bytes)?;
        let row_bytes = width.div_ceil(8);
        let body = &bytes[start..];
        if body.len() < row_bytes * height {
            return Err(Error::Format {
                field: "pixels",
                reason: format!(
                    "truncated: expected {} bytes, found {}",
                    row_bytes * height,
                    body.len()
                ),
            });
        }
        BinaryMask::from_fn(width, height, |x, y| {
            body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0
        })
    }
}

/// Watershed region labels; 0 marks ridge pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    regions: u32,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Number of basins; labels run `1..=regions`.
    pub fn regions(&self) -> u32 {
        self.regions
    }
}

/// Gray-level histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
}

impl Default for Histogram256 {
    fn default() -> Self {
        Self { counts: [0; 256] }
    }
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self { counts }
    }

    pub fn from_gray(gray: &GrayImage, mask: Option<&BinaryMask>) -> Self {
        let mut h = Self::default();
        for (i, &v) in gray.pixels().iter().enumerate() {
            if mask.is_none_or(|m| m.bits[i]) {
                h.counts[v as usize] += 1;
            }
        }
        h
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn add(&mut self, level: u8) {
        self.counts[level as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Lesion polarity: which side of the Otsu threshold is diseased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LesionPolarity {
    #[default]
    Dark,
    Bright,
}

impl std::str::FromStr for LesionPolarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dark" => Ok(Self::Dark),
            "bright" => Ok(Self::Bright),
            _ => Err(Error::param("lesion", format!("expected dark|bright, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub spatial_sigma: f64,
    pub range_sigma: f64,
    pub radius: usize,
    pub min_component_px: usize,
    /// Basins covering at least this fraction of the image border are background.
    pub border_fraction: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            spatial_sigma: 3.0,
            range_sigma: 25.0,
            radius: 5,
            min_component_px: 16,
            border_fraction: 0.25,
        }
    }
}

// ---------------------------------------------------------------------------
// Watershed

/// Labels regional minima: 8-connected plateaus with no strictly lower
/// neighbor. Labels are assigned in raster order of each plateau's first pixel.
fn regional_minima(elev: &GrayImage) -> (Vec<u32>, u32) {
    let (w, h) = (elev.width(), elev.height());
    let px = elev.pixels();
    let mut seen = vec![false; px.len()];
    let mut labels = vec![0u32; px.len()];
    let mut next = 0u32;
    let mut plateau = Vec::new();
    let mut stack = Vec::new();
    for start in 0..px.len() {
        if seen[start] {
            continue;
        }
        let level = px[start];
        let mut is_min = true;
        plateau.clear();
        stack.push(start);
        seen[start] = true;
        while let Some(p) = stack.pop() {
            plateau.push(p);
            for q in neighbors(w, h, p, &N8) {
                if px[q] < level {
                    is_min = false;
                } else if px[q] == level && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if is_min {
            next += 1;
            for &p in &plateau {
                labels[p] = next;
            }
        }
    }
    (labels, next)
}

/// Priority-flood watershed seeded from regional minima (8-connectivity).
///
/// Pixels are flooded in order of elevation; equal elevations are served
/// first-in first-out. A flooded pixel whose already-labeled neighbors carry
/// more than one basin label (or none) becomes a ridge pixel with label 0.
pub fn watershed_segment(elevation: &GrayImage) -> LabelMap {
    let (w, h) = (elevation.width(), elevation.height());
    let px = elevation.pixels();
    let (mut labels, regions) = regional_minima(elevation);
    let mut done: Vec<bool> = labels.iter().map(|&l| l > 0).collect();
    let mut queued = done.clone();
    let mut heap = BinaryHeap::new();
    let mut counter = 0u64;

    for p in 0..px.len() {
        if labels[p] == 0 {
            continue;
        }
        for q in neighbors(w, h, p, &N8) {
            if !queued[q] {
                queued[q] = true;
                heap.push(Reverse((px[q], counter, q)));
                counter += 1;
            }
        }
    }

    while let Some(Reverse((_, _, p))) = heap.pop() {
        let mut owner = 0u32;
        let mut conflict = false;
        for q in neighbors(w, h, p, &N8) {
            if done[q] && labels[q] > 0 {
                if owner == 0 {
                    owner = labels[q];
                } else if owner != labels[q] {
                    conflict = true;
                }
            }
        }
        labels[p] = if conflict { 0 } else { owner };
        done[p] = true;
        for q in neighbors(w, h, p, &N8) {
            if !queued[q] {
                queued[q] = true;
                heap.push(Reverse((px[q], counter, q)));
                counter += 1;
            }
        }
    }

    LabelMap {
        width: w,
        height: h,
        labels,
        regions,
    }
}

// ---------------------------------------------------------------------------
// Morphology and connected components

pub fn erode(mask: &BinaryMask) -> BinaryMask {
    let bits = (0..mask.bits.len())
        .map(|p| neighbors(mask.width, mask.height, p, &CROSS).all(|q| mask.bits[q]))
        .collect();
    BinaryMask {
        bits,
        ..mask.clone()
    }
}

pub fn dilate(mask: &BinaryMask) -> BinaryMask {
    let bits = (0..mask.bits.len())
        .map(|p| neighbors(mask.width, mask.height, p, &CROSS).any(|q| mask.bits[q]))
        .collect();
    BinaryMask {
        bits,
        ..mask.clone()
    }
}

/// Opening then closing with the 3x3 cross.
pub fn open_close(mask: &BinaryMask) -> BinaryMask {
    let opened = dilate(&erode(mask));
    erode(&dilate(&opened))
}

/// 8-connected component labels (0 = background) and their sizes,
/// indexed by label - 1.
pub fn connected_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; mask.bits.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            for q in neighbors(mask.width, mask.height, p, &N8) {
                if mask.bits[q] && labels[q] == 0 {
                    labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub fn remove_small_components(mask: &BinaryMask, min_px: usize) -> BinaryMask {
    let (labels, sizes) = connected_components(mask);
    let bits = labels
        .iter()
        .map(|&l| l > 0 && sizes[l as usize - 1] >= min_px)
        .collect();
    BinaryMask {
        bits,
        ..mask.clone()
    }
}

// ---------------------------------------------------------------------------
// Leaf mask

fn hue_distance(a: u8, b: u8) -> u8 {
    let d = (a as i32 - b as i32).unsigned_abs();
    d.min(256 - d).min(255) as u8
}

/// Elevation for the watershed: largest circular hue step to any 8-neighbor.
pub fn hue_gradient(hue: &GrayImage) -> GrayImage {
    let (w, h) = (hue.width(), hue.height());
    let px = hue.pixels();
    let out = (0..px.len())
        .map(|p| {
            neighbors(w, h, p, &N8)
                .map(|q| hue_distance(px[p], px[q]))
                .max()
                .unwrap_or(0)
        })
        .collect();
    GrayImage::new(w, h, out).expect("same dimensions")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Circular mean of hue levels in `0..256`.
fn mean_hue(sum_cos: f64, sum_sin: f64) -> f64 {
    let a = sum_sin.atan2(sum_cos);
    (a / std::f64::consts::TAU * 256.0).rem_euclid(256.0)
}

fn circ_dist_f(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(256.0 - d)
}

/// Background removal. Returns the cleaned leaf mask.
pub fn leaf_mask(img: &RgbImage, params: &SegmentationParams) -> Result<BinaryMask> {
    let (w, h) = (img.width(), img.height());
    let hsv = rgb_to_hsv(&gray_world_normalize(img));
    let hue = bilateral_filter(
        &hsv.hue_as_gray(),
        params.spatial_sigma,
        params.range_sigma,
        params.radius,
    )?;
    let labels = watershed_segment(&hue_gradient(&hue));
    let regions = labels.regions() as usize;

    let sat = hsv.saturation();
    let med = median(&mut sat.clone());

    let mut sat_sum = vec![0.0; regions + 1];
    let mut count = vec![0usize; regions + 1];
    let mut border = vec![0usize; regions + 1];
    let mut trig = vec![(0.0f64, 0.0f64); regions + 1];
    for (p, &l) in labels.labels().iter().enumerate() {
        let l = l as usize;
        sat_sum[l] += sat[p];
        count[l] += 1;
        let ang = hue.pixels()[p] as f64 / 256.0 * std::f64::consts::TAU;
        trig[l].0 += ang.cos();
        trig[l].1 += ang.sin();
        let (x, y) = (p % w, p / w);
        if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
            border[l] += 1;
        }
    }
    let border_total = if w == 1 || h == 1 { w * h } else { 2 * (w + h) - 4 };
    let keep: Vec<bool> = (0..=regions)
        .map(|l| {
            l > 0
                && count[l] > 0
                && sat_sum[l] / count[l] as f64 > med
                && (border[l] as f64) < params.border_fraction * border_total as f64
        })
        .collect();
    let basin_hue: Vec<f64> = trig.iter().map(|&(c, s)| mean_hue(c, s)).collect();

    // Ridge pixels join the adjacent basin whose mean hue is closest.
    let mut bits = vec![false; w * h];
    for (p, &l) in labels.labels().iter().enumerate() {
        bits[p] = if l > 0 {
            keep[l as usize]
        } else {
            let v = hue.pixels()[p] as f64;
            neighbors(w, h, p, &N8)
                .map(|q| labels.labels()[q] as usize)
                .filter(|&q| q > 0)
                .min_by(|&a, &b| {
                    circ_dist_f(v, basin_hue[a])
                        .total_cmp(&circ_dist_f(v, basin_hue[b]))
                        .then(a.cmp(&b))
                })
                .is_some_and(|best| keep[best])
        };
    }
    let mask = BinaryMask::new(w, h, bits)?;
    let cleaned = remove_small_components(&open_close(&mask), params.min_component_px);
    if cleaned.is_empty() {
        return Err(Error::NoLeafFound { labels: regions });
    }
    Ok(cleaned)
}

// ---------------------------------------------------------------------------
// Otsu

/// Otsu threshold: the level `t` maximizing between-class variance, where
/// class 0 holds levels `<= t`. Ties resolve to the floor of the mean of all
/// maximizing levels.
///
/// The comparison is exact: `sigma_B^2(t)` is proportional to
/// `(N*S0 - n0*S)^2 / (n0*n1)`, compared by big-integer cross multiplication.
pub fn otsu_threshold(hist: &Histogram256) -> Result<u8> {
    let counts = hist.counts();
    let total: u64 = counts.iter().sum();
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if total < 2 || occupied < 2 {
        return Err(Error::DegenerateHistogram(format!(
            "{total} pixels over {occupied} occupied levels"
        )));
    }
    let weighted: u128 = counts
        .iter()
        .enumerate()
        .map(|(l, &c)| l as u128 * c as u128)
        .sum();
    let n = total as u128;

    // best score as a fraction num/den
    let mut best: Option<(BigUint, BigUint)> = None;
    let mut ties: Vec<u64> = Vec::new();
    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    for t in 0..255usize {
        n0 += counts[t] as u128;
        s0 += t as u128 * counts[t] as u128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let a = n * s0;
        let b = n0 * weighted;
        let diff = BigUint::from(a.abs_diff(b));
        let num = &diff * &diff;
        let den = BigUint::from(n0) * BigUint::from(n1);
        match &best {
            None => {
                best = Some((num, den));
                ties = vec![t as u64];
            }
            Some((bn, bd)) => {
                let lhs = &num * bd;
                let rhs = bn * &den;
                if lhs > rhs {
                    best = Some((num, den));
                    ties = vec![t as u64];
                } else if lhs == rhs {
                    ties.push(t as u64);
                }
            }
        }
    }
    let sum: u64 = ties.iter().sum();
    Ok((sum / ties.len() as u64) as u8)
}

/// Lesion mask: Otsu over the leaf pixels, keeping the side selected by
/// `polarity`, intersected with the leaf.
pub fn diseased_region_mask(
    gray: &GrayImage,
    leaf: &BinaryMask,
    polarity: LesionPolarity,
) -> Result<BinaryMask> {
    if (gray.width(), gray.height()) != (leaf.width, leaf.height) {
        return Err(Error::Mismatch {
            expected: gray.width() * gray.height(),
            actual: leaf.width * leaf.height,
        });
    }
    if leaf.is_empty() {
        return Err(Error::EmptyMask);
    }
    let t = otsu_threshold(&Histogram256::from_gray(gray, Some(leaf)))?;
    let bits = gray
        .pixels()
        .iter()
        .zip(&leaf.bits)
        .map(|(&v, &inside)| {
            inside
                && match polarity {
                    LesionPolarity::Dark => v <= t,
                    LesionPolarity::Bright => v > t,
                }
        })
        .collect();
    BinaryMask::new(leaf.width, leaf.height, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn row(vals: &[u8]) -> GrayImage {
        GrayImage::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn watershed_constant_is_single_basin() {
        let img = GrayImage::filled(6, 4, 17).unwrap();
        let lm = watershed_segment(&img);
        assert_eq!(lm.regions(), 1);
        assert!(lm.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn watershed_two_valleys_in_a_row() {
        // minima at both ends, flooded FIFO: columns 1 and 3 join their
        // neighbors, the peak sees both basins and becomes a ridge
        let lm = watershed_segment(&row(&[0, 1, 9, 1, 0]));
        assert_eq!(lm.regions(), 2);
        assert_eq!(lm.labels(), &[1, 1, 0, 2, 2]);
    }

    #[test]
    fn watershed_wall_separates_two_minima() {
        let img = GrayImage::from_fn(7, 7, |x, y| {
            if x == 3 {
                250
            } else if (x, y) == (1, 3) || (x, y) == (5, 3) {
                0
            } else {
                120
            }
        })
        .unwrap();
        let lm = watershed_segment(&img);
        assert_eq!(lm.regions(), 2);
        for y in 0..7 {
            for x in 0..3 {
                assert_eq!(lm.get(x, y), 1);
                assert_eq!(lm.get(x + 4, y), 2);
            }
        }
    }

    #[test]
    fn pbm_round_trip_and_padding() {
        let m = BinaryMask::from_fn(11, 3, |x, y| (x + y) % 3 == 0).unwrap();
        let bytes = m.encode_pbm();
        assert!(bytes.starts_with(b"P4\n11 3\n"));
        assert_eq!(bytes.len(), b"P4\n11 3\n".len() + 2 * 3);
        assert_eq!(BinaryMask::decode_pbm(&bytes).unwrap(), m);
    }

    #[test]
    fn otsu_two_extreme_spikes() {
        let mut c = [0u64; 256];
        c[0] = 10;
        c[255] = 10;
        assert_eq!(otsu_threshold(&Histogram256::from_counts(c)).unwrap(), 127);
    }

    #[test]
    fn otsu_weighted_spikes_closed_form() {
        let mut c = [0u64; 256];
        c[10] = 90;
        c[200] = 10;
        let t = otsu_threshold(&Histogram256::from_counts(c)).unwrap();
        // any t in 10..=199 separates the spikes; all tie, mean of ties = 104.5
        assert_eq!(t, 104);
        let (w0, w1) = (0.9f64, 0.1f64);
        let closed = w0 * w1 * (10.0f64 - 200.0).powi(2);
        assert!((closed - 3249.0).abs() < 1e-9);
    }

    #[test]
    fn otsu_degenerate() {
        let mut c = [0u64; 256];
        c[40] = 100;
        assert!(matches!(
            otsu_threshold(&Histogram256::from_counts(c)),
            Err(Error::DegenerateHistogram(_))
        ));
        assert!(otsu_threshold(&Histogram256::default()).is_err());
    }

    fn blotch_fixture(leaf: u8, blotch: u8) -> (GrayImage, BinaryMask, BinaryMask) {
        let gray = GrayImage::from_fn(20, 20, |x, y| {
            if (6..10).contains(&x) && (8..13).contains(&y) {
                blotch
            } else if (2..18).contains(&x) && (2..18).contains(&y) {
                leaf
            } else {
                0
            }
        })
        .unwrap();
        let leafm = BinaryMask::from_fn(20, 20, |x, y| (2..18).contains(&x) && (2..18).contains(&y))
            .unwrap();
        let blot = BinaryMask::from_fn(20, 20, |x, y| (6..10).contains(&x) && (8..13).contains(&y))
            .unwrap();
        (gray, leafm, blot)
    }

    #[test]
    fn dark_blotch_is_lesion() {
        let (gray, leaf, blot) = blotch_fixture(180, 40);
        let m = diseased_region_mask(&gray, &leaf, LesionPolarity::Dark).unwrap();
        assert_eq!(m, blot);
    }

    #[test]
    fn bright_blotch_with_override() {
        let (gray, leaf, blot) = blotch_fixture(60, 220);
        let m = diseased_region_mask(&gray, &leaf, LesionPolarity::Bright).unwrap();
        assert_eq!(m, blot);
    }

    #[test]
    fn uniform_leaf_is_degenerate() {
        let (gray, leaf, _) = blotch_fixture(120, 120);
        assert!(matches!(
            diseased_region_mask(&gray, &leaf, LesionPolarity::Dark),
            Err(Error::DegenerateHistogram(_))
        ));
    }

    fn disk_image(w: usize, cx: f64, cy: f64, r: f64) -> (RgbImage, BinaryMask) {
        let inside = |x: usize, y: usize| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            dx * dx + dy * dy <= r * r
        };
        let img = RgbImage::from_fn(w, w, |x, y| {
            if inside(x, y) {
                [40, 160, 40]
            } else {
                [128, 128, 128]
            }
        })
        .unwrap();
        (img, BinaryMask::from_fn(w, w, inside).unwrap())
    }

    #[test]
    fn leaf_mask_recovers_disk() {
        let (img, truth) = disk_image(64, 31.5, 30.0, 18.0);
        let m = leaf_mask(&img, &SegmentationParams::default()).unwrap();
        assert!(m.iou(&truth) >= 0.95, "iou {}", m.iou(&truth));
    }

    #[test]
    fn leaf_mask_drops_speckles() {
        let (mut img, truth) = disk_image(64, 31.5, 30.0, 18.0);
        for &(x, y) in &[(3usize, 3usize), (58, 6), (6, 58)] {
            img.set(x, y, [40, 160, 40]);
            img.set(x + 1, y, [40, 160, 40]);
        }
        let m = leaf_mask(&img, &SegmentationParams::default()).unwrap();
        for &(x, y) in &[(3usize, 3usize), (58, 6), (6, 58)] {
            assert!(!m.get(x, y) && !m.get(x + 1, y));
        }
        assert!(m.iou(&truth) >= 0.95);
    }

    #[test]
    fn leaf_mask_uniform_image_fails() {
        let img = RgbImage::filled(32, 32, [90, 120, 60]).unwrap();
        assert!(matches!(
            leaf_mask(&img, &SegmentationParams::default()),
            Err(Error::NoLeafFound { .. })
        ));
    }

    fn exhaustive_otsu(c: &[u64; 256]) -> Option<u8> {
        let total: f64 = c.iter().map(|&v| v as f64).sum();
        let mu_t: f64 = c.iter().enumerate().map(|(l, &v)| l as f64 * v as f64).sum::<f64>() / total;
        let mut scores = Vec::new();
        for t in 0..256usize {
            let w0: f64 = c[..=t].iter().map(|&v| v as f64).sum::<f64>() / total;
            let w1 = 1.0 - w0;
            if w0 <= 0.0 || w1 <= 1e-15 {
                scores.push(f64::NEG_INFINITY);
                continue;
            }
            let m0 = c[..=t].iter().enumerate().map(|(l, &v)| l as f64 * v as f64).sum::<f64>()
                / (w0 * total);
            let m1 = (mu_t - w0 * m0) / w1;
            scores.push(w0 * w1 * (m0 - m1) * (m0 - m1));
        }
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return None;
        }
        let ties: Vec<usize> = (0..256)
            .filter(|&t| (scores[t] - best).abs() <= 1e-9 * best.abs().max(1.0))
            .collect();
        Some((ties.iter().sum::<usize>() / ties.len()) as u8)
    }

    #[test]
    fn otsu_matches_exhaustive_scan_on_small_random_histograms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut c = [0u64; 256];
            for _ in 0..64 {
                c[rng.gen_range(0..256)] += 1;
            }
            assert_eq!(otsu_threshold(&Histogram256::from_counts(c)).ok(), exhaustive_otsu(&c));
        }
    }

    fn small_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<bool>(), w * h)
                .prop_map(move |b| BinaryMask::new(w, h, b).unwrap())
        })
    }

    proptest! {
        #[test]
        fn open_close_is_idempotent(m in small_mask()) {
            let once = open_close(&m);
            prop_assert_eq!(open_close(&once), once);
        }

        #[test]
        fn watershed_regions_are_connected_partitions(
            (w, h, px) in (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), prop::collection::vec(0u8..6, w * h))
            })
        ) {
            let img = GrayImage::new(w, h, px).unwrap();
            let lm = watershed_segment(&img);
            prop_assert!(lm.regions() >= 1);
            for label in 1..=lm.regions() {
                let m = BinaryMask::new(w, h, lm.labels().iter().map(|&l| l == label).collect()).unwrap();
                let (_, sizes) = connected_components(&m);
                prop_assert_eq!(sizes.len(), 1, "label {} split", label);
            }
            prop_assert!(lm.labels().iter().all(|&l| l <= lm.regions()));
        }
    }
}
