//! Latent-to-RGB decoding, opaque foreground compositing, PPM output, and a
//! ring-based WCAG contrast proxy.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SscError};
use crate::latent::LatentState;
use crate::layout::{LayoutBox, LayoutPage, Role};
use crate::rng;

pub type Rgb = [f64; 3];

/// WCAG 2.x AA threshold for body text.
pub const WCAG_AA: f64 = 4.5;

/// Fixed linear map `clamp(W x + bias)` from a token to a color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDecoder {
    pub w: [Vec<f64>; 3],
    pub bias: Rgb,
}

impl ToyDecoder {
    pub fn new(w: [Vec<f64>; 3], bias: Rgb) -> Result<Self> {
        check_dim("decoder rows", w[0].len(), w[1].len())?;
        check_dim("decoder rows", w[0].len(), w[2].len())?;
        Ok(ToyDecoder { w, bias })
    }

    /// Gaussian weights with standard deviation `scale / sqrt(d)`.
    pub fn seeded(d: usize, seed: u64, scale: f64, bias: Rgb) -> Self {
        let key = rng::label_key("toy-decoder", seed);
        let sd = scale / (d as f64).sqrt();
        let w = std::array::from_fn(|c| {
            let mut row = vec![0.0; d];
            rng::fill_normal(key, c as u64, &mut row);
            row.iter_mut().for_each(|v| *v *= sd);
            row
        });
        ToyDecoder { w, bias }
    }

    pub fn dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn color(&self, token: &[f64]) -> Rgb {
        std::array::from_fn(|c| {
            let lin: f64 = self.w[c].iter().zip(token).map(|(a, b)| a * b).sum();
            (lin + self.bias[c]).clamp(0.0, 1.0)
        })
    }
}

/// Row-major RGB image in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PageImage {
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub pixels: Vec<Rgb>,
    pub page_id: u64,
    pub config_hash: String,
}

impl PageImage {
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }
}

/// Paints each token as a `patch x patch` block.
pub fn decode(state: &LatentState, dec: &ToyDecoder, patch: usize) -> Result<PageImage> {
    if patch == 0 {
        return Err(SscError::InvalidConfig("patch size must be >= 1".into()));
    }
    check_dim("decoder dimension", state.dim(), dec.dim())?;
    let (gw, gh) = (state.grid.w, state.grid.h);
    let (width, height) = (gw * patch, gh * patch);
    let colors: Vec<Rgb> = state.tokens.iter_rows().map(|t| dec.color(t)).collect();
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            pixels.push(colors[(y / patch) * gw + x / patch]);
        }
    }
    Ok(PageImage {
        width,
        height,
        patch,
        pixels,
        page_id: state.page_id,
        config_hash: String::new(),
    })
}

/// Half-open pixel span `[lo, hi)` whose pixel centers fall inside
/// `[start, end)` on an axis of `n` pixels.
fn pixel_span(start: f64, end: f64, n: usize) -> (usize, usize) {
    let conv = |v: f64| ((v * n as f64 - 0.5).ceil().max(0.0) as usize).min(n);
    (conv(start), conv(end))
}

fn box_pixels(b: &LayoutBox, width: usize, height: usize) -> ((usize, usize), (usize, usize)) {
    (pixel_span(b.x, b.right(), width), pixel_span(b.y, b.bottom(), height))
}

/// Overwrites box interiors with their fill colors.
pub fn composite(bg: &PageImage, page: &LayoutPage) -> PageImage {
    let mut out = bg.clone();
    for b in &page.boxes {
        let ((x0, x1), (y0, y1)) = box_pixels(b, out.width, out.height);
        for y in y0..y1 {
            out.pixels[y * out.width + x0..y * out.width + x1].fill(b.fill);
        }
    }
    out
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// WCAG relative luminance of an sRGB color.
pub fn relative_luminance(c: Rgb) -> f64 {
    0.2126 * srgb_to_linear(c[0]) + 0.7152 * srgb_to_linear(c[1]) + 0.0722 * srgb_to_linear(c[2])
}

/// `(L_light + 0.05) / (L_dark + 0.05)` from two luminances.
pub fn contrast_from_luminance(l1: f64, l2: f64) -> f64 {
    let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
    (hi + 0.05) / (lo + 0.05)
}

pub fn contrast_ratio(c1: Rgb, c2: Rgb) -> f64 {
    contrast_from_luminance(relative_luminance(c1), relative_luminance(c2))
}

/// Contrast measurement for one text box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxContrast {
    pub box_index: usize,
    pub ring_mean: Rgb,
    pub ring_pixels: usize,
    pub ratio: f64,
    pub passes: bool,
}

/// Per-text-box contrast of the fill against the mean color of background
/// pixels in a ring one patch wide around the box. Boxes whose ring holds no
/// background pixels are left out.
pub fn text_box_contrasts(img: &PageImage, page: &LayoutPage, threshold: f64) -> Vec<BoxContrast> {
    let (w, h) = (img.width, img.height);
    let mut covered = vec![false; w * h];
    for b in &page.boxes {
        let ((x0, x1), (y0, y1)) = box_pixels(b, w, h);
        for y in y0..y1 {
            covered[y * w + x0..y * w + x1].fill(true);
        }
    }
    let p = img.patch;
    let mut out = Vec::new();
    for (i, b) in page.boxes.iter().enumerate().filter(|(_, b)| b.role == Role::Text) {
        let ((x0, x1), (y0, y1)) = box_pixels(b, w, h);
        let (rx0, rx1) = (x0.saturating_sub(p), (x1 + p).min(w));
        let (ry0, ry1) = (y0.saturating_sub(p), (y1 + p).min(h));
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for y in ry0..ry1 {
            for x in rx0..rx1 {
                if covered[y * w + x] {
                    continue;
                }
                let c = img.pixels[y * w + x];
                for j in 0..3 {
                    sum[j] += c[j];
                }
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let ring_mean = sum.map(|s| s / count as f64);
        let ratio = contrast_ratio(b.fill, ring_mean);
        out.push(BoxContrast {
            box_index: i,
            ring_mean,
            ring_pixels: count,
            ratio,
            passes: ratio >= threshold,
        });
    }
    out
}

/// Fraction of measurable text boxes meeting `threshold`.
pub fn wcag_coverage(img: &PageImage, page: &LayoutPage, threshold: f64) -> Result<f64> {
    if !(threshold >= 1.0) {
        return Err(SscError::InvalidConfig(format!(
            "contrast threshold must be >= 1, got {threshold}"
        )));
    }
    let boxes = text_box_contrasts(img, page, threshold);
    if boxes.is_empty() {
        return Err(SscError::UndefinedCoverage);
    }
    Ok(boxes.iter().filter(|b| b.passes).count() as f64 / boxes.len() as f64)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Binary P6 PPM, 8 bits per channel. A non-empty config hash goes into a
/// header comment.
pub fn write_ppm<W: Write>(img: &PageImage, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "P6")?;
    if !img.config_hash.is_empty() {
        writeln!(out, "# config {}", img.config_hash)?;
    }
    write!(out, "{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img.pixels.iter().flat_map(|c| c.map(to_byte)).collect();
    out.write_all(&bytes)
}
