//! Raster containers, lossless PPM I/O, color conversion and the
//! preprocessing filters applied before segmentation.

use crate::util::{clamp_u8, round_half_up};
use crate::{Error, Result};

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

/// 8-bit single channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

/// HSV raster with hue in `[0, 1)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimensions { width, height });
    }
    if width * height != len {
        return Err(Error::Mismatch {
            expected: width * height,
            actual: len,
        });
    }
    Ok(())
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

impl HsvImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `[h, s, v]` triples.
    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    /// Hue mapped onto `0..=255` (rounded half up, 1.0 wraps to 0).
    pub fn hue_as_gray(&self) -> GrayImage {
        let pixels = self
            .pixels
            .iter()
            .map(|p| {
                let v = round_half_up(p[0] * 255.0);
                if v >= 255.0 && p[0] >= 1.0 {
                    0
                } else {
                    clamp_u8(v)
                }
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn saturation(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p[1]).collect()
    }
}

// ---------------------------------------------------------------------------
// PPM (P6) I/O

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn token(&mut self, field: &'static str) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || *b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format {
                field,
                reason: "missing".into(),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Format {
            field,
            reason: "not ASCII".into(),
        })
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        let tok = self.token(field)?;
        tok.parse().map_err(|_| Error::Format {
            field,
            reason: format!("`{tok}` is not a non-negative integer"),
        })
    }

    /// Consumes the single whitespace byte separating the header from the raster.
    fn end_of_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::Format {
                field: "maxval",
                reason: "expected a single whitespace byte before pixel data".into(),
            }),
        }
    }
}

struct NetpbmHeader {
    width: usize,
    height: usize,
    data_start: usize,
}

fn read_header(bytes: &[u8], magic: &str, with_maxval: bool) -> Result<NetpbmHeader> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let m = r.token("magic")?;
    if m != magic {
        return Err(Error::Format {
            field: "magic",
            reason: format!("expected {magic}, found `{m}`"),
        });
    }
    let width = r.number("width")?;
    let height = r.number("height")?;
    if width == 0 || height == 0 {
        return Err(Error::Format {
            field: if width == 0 { "width" } else { "height" },
            reason: "must be at least 1".into(),
        });
    }
    if with_maxval {
        let maxval = r.number("maxval")?;
        if maxval != 255 {
            return Err(Error::Format {
                field: "maxval",
                reason: format!("only 255 is supported, found {maxval}"),
            });
        }
    }
    let data_start = if with_maxval {
        r.end_of_header()?
    } else {
        match bytes.get(r.pos) {
            Some(b) if b.is_ascii_whitespace() => r.pos + 1,
            _ => {
                return Err(Error::Format {
                    field: "height",
                    reason: "expected a single whitespace byte before pixel data".into(),
                })
            }
        }
    };
    Ok(NetpbmHeader {
        width,
        height,
        data_start,
    })
}

/// Decodes a binary P6 PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let h = read_header(bytes, "P6", true)?;
    let need = h.width * h.height * 3;
    let body = &bytes[h.data_start..];
    if body.len() < need {
        return Err(Error::Format {
            field: "pixels",
            reason: format!("truncated: expected {need} bytes, found {}", body.len()),
        });
    }
    let pixels = body[..need]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RgbImage::new(h.width, h.height, pixels)
}

/// Encodes as canonical P6: `P6\n<w> <h>\n255\n` followed by raw triples.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 3);
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Decodes a binary P5 PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let h = read_header(bytes, "P5", true)?;
    let need = h.width * h.height;
    let body = &bytes[h.data_start..];
    if body.len() < need {
        return Err(Error::Format {
            field: "pixels",
            reason: format!("truncated: expected {need} bytes, found {}", body.len()),
        });
    }
    GrayImage::new(h.width, h.height, body[..need].to_vec())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub(crate) fn read_pbm_header(bytes: &[u8]) -> Result<(usize, usize, usize)> {
    let h = read_header(bytes, "P4", false)?;
    Ok((h.width, h.height, h.data_start))
}

// ---------------------------------------------------------------------------
// Color operations

/// Rescales each channel so that its mean equals the mean over all three
/// channels. A channel whose mean is zero passes through unchanged.
pub fn gray_world_normalize(img: &RgbImage) -> RgbImage {
    let n = img.pixels.len() as f64;
    let mut sums = [0.0f64; 3];
    for p in &img.pixels {
        for c in 0..3 {
            sums[c] += p[c] as f64;
        }
    }
    let means = sums.map(|s| s / n);
    let target = (means[0] + means[1] + means[2]) / 3.0;
    let scales = means.map(|m| if m > 0.0 { target / m } else { 1.0 });
    let pixels = img
        .pixels
        .iter()
        .map(|p| {
            let mut q = *p;
            for c in 0..3 {
                if means[c] > 0.0 {
                    q[c] = clamp_u8(round_half_up(p[c] as f64 * scales[c]));
                }
            }
            q
        })
        .collect();
    RgbImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Hexcone RGB to HSV for a single pixel. Achromatic pixels get hue 0.
pub fn rgb_pixel_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        let h = sector / 6.0;
        if h >= 1.0 {
            h - 1.0
        } else {
            h
        }
    };
    [h, s, v]
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    HsvImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| rgb_pixel_to_hsv(p)).collect(),
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B`, rounded half up. Evaluated in exact
/// integer arithmetic.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let acc = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((acc + 500) / 1000) as u8
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

/// Edge-preserving smoothing: each output pixel is the mean of its
/// `(2r+1)^2` window weighted by a spatial Gaussian times a range Gaussian
/// on intensity difference. Windows are clipped at the border.
pub fn bilateral_filter(
    img: &GrayImage,
    spatial_sigma: f64,
    range_sigma: f64,
    radius: usize,
) -> Result<GrayImage> {
    if !(spatial_sigma > 0.0) {
        return Err(Error::param("spatial_sigma", "must be > 0"));
    }
    if !(range_sigma > 0.0) {
        return Err(Error::param("range_sigma", "must be > 0"));
    }
    if radius < 1 {
        return Err(Error::param("radius", "must be >= 1"));
    }
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mut spatial = vec![0.0; side * side];
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            spatial[((dy + r) as usize) * side + (dx + r) as usize] =
                (-d2 / (2.0 * spatial_sigma * spatial_sigma)).exp();
        }
    }
    let range: Vec<f64> = (0..256)
        .map(|d| {
            let d = d as f64;
            (-d * d / (2.0 * range_sigma * range_sigma)).exp()
        })
        .collect();

    let (w, h) = (img.width as isize, img.height as isize);
    let mut out = vec![0u8; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let center = img.pixels[(y * w + x) as usize];
            let mut num = 0.0;
            let mut den = 0.0;
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    let v = img.pixels[(yy * w + xx) as usize];
                    let wgt = spatial[((dy + r) as usize) * side + (dx + r) as usize]
                        * range[(v as i32 - center as i32).unsigned_abs() as usize];
                    num += wgt * v as f64;
                    den += wgt;
                }
            }
            out[(y * w + x) as usize] = clamp_u8(round_half_up(num / den));
        }
    }
    GrayImage::new(img.width, img.height, out)
}
