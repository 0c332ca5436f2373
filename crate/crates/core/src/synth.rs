//! Seeded synthetic leaf images for tests, demos and fixture corpora.
//!
//! A leaf is a green ellipse on a light gray background. Diseased leaves
//! carry one to three lesion patches whose color and texture depend on the
//! class; healthy leaves carry only soft shading spots.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::imaging::{encode_ppm, RgbImage};
use crate::util::{clamp_u8, rng};
use crate::Result;

pub const BACKGROUND: [u8; 3] = [200, 200, 200];
pub const LEAF: [u8; 3] = [70, 150, 55];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texture {
    Smooth,
    Checker { period: u32 },
    Stripes { period: f64, angle: f64 },
    Blocks { size: u32 },
    Rings { period: f64 },
}

impl Texture {
    /// Pattern value in `[-1, 1]`; `phase` shifts the pattern per image.
    fn value(&self, x: f64, y: f64, phase: f64, cells: &[f64]) -> f64 {
        match *self {
            Texture::Smooth => 0.0,
            Texture::Checker { period } => {
                let p = f64::from(period);
                let cx = ((x + phase) / p).floor() as i64;
                let cy = ((y + phase) / p).floor() as i64;
                if (cx + cy).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Texture::Stripes { period, angle } => {
                let t = x * angle.cos() + y * angle.sin();
                (2.0 * PI * (t + phase) / period).sin()
            }
            Texture::Blocks { size } => {
                let s = f64::from(size);
                let bx = (x / s).floor() as i64;
                let by = (y / s).floor() as i64;
                cells[((bx * 7919 + by * 104_729).rem_euclid(cells.len() as i64)) as usize]
            }
            Texture::Rings { period } => ((x * x + y * y).sqrt() * 2.0 * PI / period + phase).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionClass {
    pub name: String,
    pub color: [u8; 3],
    pub texture: Texture,
    /// Texture amplitude ranges; each image draws one range uniformly, then
    /// an amplitude inside it.
    pub amplitudes: Vec<(f64, f64)>,
}

/// Five lesion classes sharing color and texture family. Each class mixes
/// two amplitude bands placed symmetrically around the middle of the
/// amplitude axis, so the classes are nested rather than ordered along it.
pub fn disease_classes() -> Vec<LesionClass> {
    let band = |i: usize| {
        let c = 3.0 + 4.0 * i as f64;
        (c - 0.5, c + 0.5)
    };
    ["blight", "mold", "rust", "scab", "spot"]
        .iter()
        .enumerate()
        .map(|(k, name)| LesionClass {
            name: format!("Leaf___{name}"),
            color: [60, 45, 25],
            texture: Texture::Blocks { size: 2 },
            amplitudes: vec![band(k), band(9 - k)],
        })
        .collect()
}

struct Canvas {
    img: RgbImage,
    r: ChaCha8Rng,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Canvas {
    fn new(size: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let s = size as f64;
        let cx = s / 2.0 + r.gen_range(-0.04..0.04) * s;
        let cy = s / 2.0 + r.gen_range(-0.04..0.04) * s;
        let rx = s * r.gen_range(0.29..0.33);
        let ry = s * r.gen_range(0.26..0.31);
        let tint: [f64; 3] = [r.gen_range(-8.0..8.0), r.gen_range(-8.0..8.0), r.gen_range(-6.0..6.0)];
        let mut img = RgbImage::filled(size, size, BACKGROUND).unwrap();
        for y in 0..size {
            for x in 0..size {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                if dx * dx + dy * dy <= 1.0 {
                    let n = r.gen_range(-6.0..6.0);
                    let px = [0, 1, 2].map(|c| clamp_u8((f64::from(LEAF[c]) + tint[c] + n).round()));
                    img.set(x, y, px);
                }
            }
        }
        Self { img, r, cx, cy, rx, ry }
    }

    fn inside(&self, x: f64, y: f64, margin: f64) -> bool {
        let (dx, dy) = ((x - self.cx) / (self.rx - margin), (y - self.cy) / (self.ry - margin));
        dx * dx + dy * dy <= 1.0
    }

    /// Darkens the leaf with Gaussian spots of the given width.
    fn shade(&mut self, spots: usize, sigma: (f64, f64), depth: (f64, f64)) {
        let (w, h) = (self.img.width(), self.img.height());
        for _ in 0..spots {
            let (sx, sy) = self.point_inside(8.0);
            let s = self.r.gen_range(sigma.0..sigma.1);
            let d = self.r.gen_range(depth.0..depth.1);
            for y in 0..h {
                for x in 0..w {
                    if !self.inside(x as f64, y as f64, 0.0) {
                        continue;
                    }
                    let r2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                    let k = 1.0 - d * (-r2 / (2.0 * s * s)).exp();
                    let p = self.img.get(x, y);
                    self.img.set(x, y, p.map(|v| clamp_u8((f64::from(v) * k).round())));
                }
            }
        }
    }

    fn point_inside(&mut self, margin: f64) -> (f64, f64) {
        loop {
            let x = self.cx + self.r.gen_range(-1.0..1.0) * self.rx;
            let y = self.cy + self.r.gen_range(-1.0..1.0) * self.ry;
            if self.inside(x, y, margin) {
                return (x, y);
            }
        }
    }

    /// Paints `texture` over the leaf wherever `select` holds.
    fn paint(&mut self, base: [f64; 3], texture: Texture, amplitude: f64, noise: f64, select: impl Fn(f64, f64) -> bool) {
        let phase = self.r.gen_range(0.0..8.0);
        let cells: Vec<f64> = (0..4096).map(|_| self.r.gen_range(-1.0..1.0)).collect();
        let (w, h) = (self.img.width(), self.img.height());
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (x as f64, y as f64);
                if !self.inside(fx, fy, 0.0) || !select(fx, fy) {
                    continue;
                }
                let t = amplitude * texture.value(fx, fy, phase, &cells);
                let n = self.r.gen_range(-noise..=noise);
                self.img.set(x, y, [0, 1, 2].map(|c| clamp_u8((base[c] + t + n).round())));
            }
        }
    }
}

/// Leaf with one to three lesion patches of the given class.
pub fn diseased_leaf(class: &LesionClass, size: usize, seed: u64) -> RgbImage {
    let mut c = Canvas::new(size, seed);
    c.shade(2, (3.0, 5.0), (0.05, 0.12));
    let s = size as f64;
    let n = c.r.gen_range(1..=3);
    let mut patches = Vec::new();
    for _ in 0..n {
        let rad = s * c.r.gen_range(0.08..0.13);
        let (px, py) = c.point_inside(rad + 2.0);
        patches.push((px, py, rad));
    }
    let base = class.color.map(|v| f64::from(v) + c.r.gen_range(-6.0..6.0));
    let (lo, hi) = class.amplitudes[c.r.gen_range(0..class.amplitudes.len())];
    let amplitude = c.r.gen_range(lo..=hi);
    c.paint(base, class.texture, amplitude, 2.0, |x, y| {
        patches
            .iter()
            .any(|&(px, py, rad)| (x - px).powi(2) + (y - py).powi(2) <= rad * rad)
    });
    c.img
}

/// Healthy leaf: plain green with a few soft shading spots.
pub fn healthy_leaf(size: usize, seed: u64) -> RgbImage {
    let mut c = Canvas::new(size, seed);
    let spots = c.r.gen_range(3..=5);
    c.shade(spots, (3.0, 5.5), (0.2, 0.35));
    c.img
}

/// Leaf covered by a fine checkerboard of alternating green tones.
pub fn checkered_leaf(size: usize, seed: u64) -> RgbImage {
    let mut c = Canvas::new(size, seed);
    let period = c.r.gen_range(4..=6);
    let base = LEAF.map(f64::from);
    c.paint(base, Texture::Checker { period }, 40.0, 4.0, |_, _| true);
    c.img
}

/// Writes `<root>/<class>/<class>_<i>.ppm` for every image.
pub fn write_corpus(root: &Path, classes: &[(String, Vec<RgbImage>)]) -> Result<()> {
    for (name, imgs) in classes {
        let dir = root.join(name);
        fs::create_dir_all(&dir)?;
        for (i, img) in imgs.iter().enumerate() {
            fs::write(dir.join(format!("{name}_{i:03}.ppm")), encode_ppm(img))?;
        }
    }
    Ok(())
}

/// A corpus of `per_class` diseased leaves for each of the first
/// `n_classes` lesion classes, plus `healthy` healthy leaves in
/// `Leaf___healthy` when non-zero.
pub fn fixture_corpus(
    n_classes: usize,
    per_class: usize,
    healthy: usize,
    size: usize,
    seed: u64,
) -> Vec<(String, Vec<RgbImage>)> {
    let mut out: Vec<(String, Vec<RgbImage>)> = disease_classes()
        .into_iter()
        .take(n_classes)
        .enumerate()
        .map(|(c, class)| {
            let imgs = (0..per_class)
                .map(|i| diseased_leaf(&class, size, seed ^ ((c as u64 + 1) << 32) ^ i as u64))
                .collect();
            (class.name, imgs)
        })
        .collect();
    if healthy > 0 {
        let imgs = (0..healthy)
            .map(|i| healthy_leaf(size, seed ^ (99 << 32) ^ i as u64))
            .collect();
        out.push(("Leaf___healthy".to_string(), imgs));
    }
    out
}
