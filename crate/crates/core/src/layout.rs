//! Multi-page layout documents and their rasterization onto the token grid.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SscError};
use crate::latent::{ForegroundMask, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Text,
    Figure,
}

/// Axis-aligned box in normalized page coordinates, top-left origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBox {
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub fill: [f64; 3],
}

impl LayoutBox {
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPage {
    /// Page aspect `[width, height]`; only the ratio matters.
    pub aspect: [f64; 2],
    #[serde(default)]
    pub boxes: Vec<LayoutBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    #[serde(default)]
    pub title: String,
    pub pages: Vec<LayoutPage>,
}

impl LayoutDocument {
    pub fn validate(&self) -> Result<()> {
        if self.pages.is_empty() {
            return Err(SscError::Validation("document has no pages".into()));
        }
        for (p, page) in self.pages.iter().enumerate() {
            let [aw, ah] = page.aspect;
            if !(aw > 0.0 && ah > 0.0 && aw.is_finite() && ah.is_finite()) {
                return Err(SscError::Validation(format!(
                    "page {p}: aspect must be positive, got [{aw}, {ah}]"
                )));
            }
            for (i, b) in page.boxes.iter().enumerate() {
                let name = format!("page {p} box {i}");
                let coords = [b.x, b.y, b.w, b.h];
                if coords.iter().any(|v| !v.is_finite()) {
                    return Err(SscError::Validation(format!("{name}: non-finite coordinate")));
                }
                if !(b.w > 0.0 && b.h > 0.0) {
                    return Err(SscError::Validation(format!(
                        "{name}: width and height must be > 0 (w = {}, h = {})",
                        b.w, b.h
                    )));
                }
                if b.x < 0.0 || b.y < 0.0 || b.right() > 1.0 || b.bottom() > 1.0 {
                    return Err(SscError::Validation(format!(
                        "{name}: extends outside the unit page (x = {}, y = {}, x+w = {}, y+h = {})",
                        b.x,
                        b.y,
                        b.right(),
                        b.bottom()
                    )));
                }
                if b.fill.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(SscError::Validation(format!(
                        "{name}: fill components must lie in [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a layout file.
pub fn parse_layout(bytes: &[u8]) -> Result<LayoutDocument> {
    let doc: LayoutDocument = serde_json::from_slice(bytes).map_err(SscError::parse)?;
    doc.validate()?;
    Ok(doc)
}

/// Which box roles count as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleFilter {
    pub text: bool,
    pub figure: bool,
}

impl Default for RoleFilter {
    fn default() -> Self {
        RoleFilter {
            text: true,
            figure: true,
        }
    }
}

impl RoleFilter {
    pub fn accepts(&self, role: Role) -> bool {
        match role {
            Role::Text => self.text,
            Role::Figure => self.figure,
        }
    }
}

/// Edge coordinate of cell boundary `i` on an axis with `n` cells.
#[inline]
pub(crate) fn edge(i: usize, n: usize) -> f64 {
    i as f64 / n as f64
}

/// Rasterizes text and figure boxes onto the grid.
pub fn rasterize_mask(page: &LayoutPage, grid: Grid, boundary_weight: f64) -> Result<ForegroundMask> {
    rasterize_mask_with(page, grid, boundary_weight, RoleFilter::default())
}

/// A cell is foreground when it shares nonzero area with any accepted box.
/// Cells lying entirely inside one box get weight 1, other foreground cells
/// get `boundary_weight`.
pub fn rasterize_mask_with(
    page: &LayoutPage,
    grid: Grid,
    boundary_weight: f64,
    roles: RoleFilter,
) -> Result<ForegroundMask> {
    if !(boundary_weight > 0.0 && boundary_weight <= 1.0) {
        return Err(SscError::InvalidConfig(format!(
            "boundary weight must lie in (0, 1], got {boundary_weight}"
        )));
    }
    let n = grid.len();
    let mut m = vec![false; n];
    let mut weight = vec![0.0; n];
    for b in page.boxes.iter().filter(|b| roles.accepts(b.role)) {
        // candidate cell span, widened by one to absorb rounding
        let c0 = ((b.x * grid.w as f64).floor() as usize).saturating_sub(1);
        let c1 = (((b.right() * grid.w as f64).ceil() as usize) + 1).min(grid.w);
        let r0 = ((b.y * grid.h as f64).floor() as usize).saturating_sub(1);
        let r1 = (((b.bottom() * grid.h as f64).ceil() as usize) + 1).min(grid.h);
        for r in r0..r1 {
            let (top, bot) = (edge(r, grid.h), edge(r + 1, grid.h));
            let oy = bot.min(b.bottom()) - top.max(b.y);
            if oy <= 0.0 {
                continue;
            }
            for c in c0..c1 {
                let (left, right) = (edge(c, grid.w), edge(c + 1, grid.w));
                let ox = right.min(b.right()) - left.max(b.x);
                if ox <= 0.0 {
                    continue;
                }
                let k = r * grid.w + c;
                m[k] = true;
                let inside = b.x <= left && right <= b.right() && b.y <= top && bot <= b.bottom();
                let w = if inside { 1.0 } else { boundary_weight };
                if w > weight[k] {
                    weight[k] = w;
                }
            }
        }
    }
    ForegroundMask::new(m, weight)
}
