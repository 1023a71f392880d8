//! Standard synthetic scene: page layouts, a palette-anchored mixture field,
//! and a toy decoder, all derived from seeds.
//!
//! Background modes decode to a palette of deep colors while the backing
//! latent (zero) decodes to a light paper tone, so a page's text contrast
//! depends on whether the tokens around text settle at the backing latent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::VelocityField;
use crate::latent::Grid;
use crate::layout::{LayoutBox, LayoutDocument, LayoutPage, Role};
use crate::render::{Rgb, ToyDecoder};
use crate::rng;

pub const PAPER: Rgb = [0.94, 0.93, 0.89];
pub const A4: [f64; 2] = [210.0, 297.0];

/// Deep background colors the mixture modes decode to.
pub const PALETTE: [Rgb; 5] = [
    [0.12, 0.16, 0.36],
    [0.14, 0.32, 0.20],
    [0.42, 0.12, 0.15],
    [0.24, 0.27, 0.33],
    [0.44, 0.32, 0.10],
];

const DECODER_SCALE: f64 = 0.6;
const MODE_VARIANCE: f64 = 0.3;
const MODE_SPREAD: f64 = 1.0;

/// Desk-scale defaults shared by the CLI and the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardSetup {
    pub grid: Grid,
    pub d: usize,
    pub steps: usize,
    pub lambda_s: f64,
    pub style_cap: f64,
    pub boundary_weight: f64,
    pub patch: usize,
    pub seed: u64,
    pub scene_seed: u64,
}

impl Default for StandardSetup {
    fn default() -> Self {
        StandardSetup {
            grid: Grid { h: 32, w: 24 },
            d: 16,
            steps: 100,
            lambda_s: 0.8,
            style_cap: 1.0,
            boundary_weight: 0.5,
            patch: 8,
            seed: 1,
            scene_seed: 2024,
        }
    }
}

/// Decoder plus background drift for one latent dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub decoder: ToyDecoder,
    pub field: VelocityField,
}

/// Builds the decoder and a mixture whose modes decode to [`PALETTE`].
pub fn standard_scene(d: usize, scene_seed: u64) -> Result<Scene> {
    let decoder = ToyDecoder::seeded(d, scene_seed, DECODER_SCALE, PAPER);
    let w = DMatrix::from_fn(3, d, |r, c| decoder.w[r][c]);
    let gram_inv = (&w * w.transpose())
        .try_inverse()
        .expect("random 3xd decoder has full row rank");
    let pinv = w.transpose() * gram_inv;
    // projector onto the null space of W, for mode-specific offsets that do
    // not change the decoded color
    let null = DMatrix::identity(d, d) - &pinv * &w;

    let key = rng::label_key("scene-modes", scene_seed);
    let means = PALETTE
        .iter()
        .enumerate()
        .map(|(i, color)| {
            let target = DVector::from_fn(3, |c, _| color[c] - PAPER[c]);
            let mut noise = vec![0.0; d];
            rng::fill_normal(key, i as u64, &mut noise);
            let offset = &null * DVector::from_vec(noise);
            let offset = if offset.norm() > 0.0 {
                offset.normalize() * MODE_SPREAD
            } else {
                offset
            };
            (&pinv * target + offset).iter().copied().collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    let weights = vec![1.0 / PALETTE.len() as f64; PALETTE.len()];
    let field = VelocityField::mixture(weights, means, MODE_VARIANCE, false)?;
    Ok(Scene { decoder, field })
}

/// Linear drift used by the convergence and time-scale checks: unit decay
/// with a mild rotation in each coordinate pair.
pub fn standard_linear_field(d: usize) -> Result<VelocityField> {
    let a = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| match (i, j) {
                    _ if i == j => 1.0,
                    _ if i % 2 == 0 && j == i + 1 => 0.5,
                    _ if i % 2 == 1 && j + 1 == i => -0.5,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    VelocityField::linear(a, vec![0.0; d])
}

/// Seeded constant drift with unit norm.
pub fn standard_constant_field(d: usize, seed: u64) -> Result<VelocityField> {
    let mut c = vec![0.0; d];
    rng::fill_normal(rng::label_key("constant-field", seed), 0, &mut c);
    let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    VelocityField::constant(c.into_iter().map(|x| x / n).collect())
}

/// Normalized coordinate of a box edge that falls mid-cell.
fn mid_cell(cell: usize, frac: f64, cells: usize) -> f64 {
    (cell as f64 + frac) / cells as f64
}

/// A synthetic A4 page: title, stacked paragraphs, and sometimes a figure.
/// Box edges fall near the middle of token cells.
pub fn synthetic_page(grid: Grid, seed: u64, page_id: u64) -> LayoutPage {
    let mut r = rng::stream(rng::page_key(seed, page_id), u64::MAX);
    let (gh, gw) = (grid.h, grid.w);
    let mut jitter = || r.random_range(0.35..0.65);
    let text_fill = |r: &mut rand_chacha::ChaCha8Rng| -> Rgb {
        let v = r.random_range(0.02..0.08);
        [v, v, v + 0.02]
    };
    let mut boxes = Vec::new();
    let cell_x = |c: usize, f: f64| mid_cell(c, f, gw);
    let cell_y = |c: usize, f: f64| mid_cell(c, f, gh);

    // scale layout positions from a 32x24 reference grid
    let sy = |row: usize| row * gh / 32;
    let sx = |col: usize| col * gw / 24;

    let left = sx(2);
    let right = sx(21).max(left + 1);
    let (fx0, fx1, fy0, fy1) = (jitter(), jitter(), jitter(), jitter());
    boxes.push((Role::Text, cell_x(left, fx0), cell_y(sy(2), fy0), cell_x(right, fx1), cell_y(sy(4), fy1)));

    let mut row = sy(7);
    let with_figure = page_id % 2 == 1;
    let paragraphs = if with_figure { 2 } else { 3 };
    for p in 0..paragraphs {
        let height = sy(4) + (p % 2);
        let end = (row + height).min(gh.saturating_sub(2));
        if end <= row {
            break;
        }
        let (a, b, c, d) = (jitter(), jitter(), jitter(), jitter());
        boxes.push((Role::Text, cell_x(left, a), cell_y(row, b), cell_x(right, c), cell_y(end, d)));
        row = end + sy(3).max(2);
        if with_figure && p == 0 && row + sy(6) < gh {
            let (a, b, c, d) = (jitter(), jitter(), jitter(), jitter());
            boxes.push((Role::Figure, cell_x(sx(5), a), cell_y(row, b), cell_x(sx(18), c), cell_y(row + sy(5), d)));
            row += sy(5) + sy(3).max(2);
        }
    }

    let boxes = boxes
        .into_iter()
        .map(|(role, x0, y0, x1, y1)| {
            let fill = match role {
                Role::Text => text_fill(&mut r),
                Role::Figure => [0.30, 0.48, 0.72],
            };
            LayoutBox {
                role,
                x: x0,
                y: y0,
                w: x1 - x0,
                h: y1 - y0,
                fill,
            }
        })
        .filter(|b| b.w > 0.0 && b.h > 0.0 && b.right() <= 1.0 && b.bottom() <= 1.0)
        .collect();
    LayoutPage { aspect: A4, boxes }
}

/// The standard multi-page synthetic document.
pub fn synthetic_document(pages: usize, grid: Grid, seed: u64) -> LayoutDocument {
    LayoutDocument {
        title: format!("synthetic suite (seed {seed})"),
        pages: (0..pages as u64).map(|p| synthetic_page(grid, seed, p)).collect(),
    }
}
