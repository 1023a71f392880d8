//! Latent token state, the backing latent, foreground masks, and the
//! squared-distance potentials measured against the backing latent.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SscError};
use crate::rng;

/// Token grid of a page: `h` rows by `w` columns, row-major token order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub h: usize,
    pub w: usize,
}

impl Grid {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(SscError::InvalidConfig(format!(
                "token grid must be at least 1x1, got {h}x{w}"
            )));
        }
        Ok(Grid { h, w })
    }

    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense row-major `rows x cols` matrix of token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TokenMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("token matrix data", rows * cols, data.len())?;
        Ok(TokenMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("token row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(TokenMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// The system state: `N x d` tokens at diffusion time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub tokens: TokenMatrix,
    /// 1 at the start of denoising, 0 at the end.
    pub t: f64,
    pub page_id: u64,
    pub seed: u64,
    pub grid: Grid,
}

impl LatentState {
    pub fn new(tokens: TokenMatrix, grid: Grid, t: f64) -> Result<Self> {
        check_dim("token count", grid.len(), tokens.rows())?;
        if !(0.0..=1.0).contains(&t) {
            return Err(SscError::TimeOutOfRange(t));
        }
        Ok(LatentState {
            tokens,
            t,
            page_id: 0,
            seed: 0,
            grid,
        })
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }

    pub fn len(&self) -> usize {
        self.tokens.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Neutral reference point for foreground relaxation; zero by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackingLatent(pub Vec<f64>);

impl BackingLatent {
    pub fn zeros(d: usize) -> Self {
        BackingLatent(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Binary foreground indicator with per-token interior confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForegroundMask {
    m: Vec<bool>,
    interior_weight: Vec<f64>,
}

impl ForegroundMask {
    /// Builds a mask, checking that weights are zero off the mask and in
    /// `(0, 1]` on it.
    pub fn new(m: Vec<bool>, interior_weight: Vec<f64>) -> Result<Self> {
        check_dim("mask weights", m.len(), interior_weight.len())?;
        for (k, (&on, &w)) in m.iter().zip(&interior_weight).enumerate() {
            let ok = if on { w > 0.0 && w <= 1.0 } else { w == 0.0 };
            if !ok {
                return Err(SscError::Validation(format!(
                    "mask token {k}: weight {w} inconsistent with m = {on}"
                )));
            }
        }
        Ok(ForegroundMask { m, interior_weight })
    }

    /// Mask with unit weight on every flagged token.
    pub fn from_bits(m: Vec<bool>) -> Self {
        let interior_weight = m.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect();
        ForegroundMask { m, interior_weight }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_bits(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn is_fg(&self, k: usize) -> bool {
        self.m[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.interior_weight[k]
    }

    pub fn bits(&self) -> &[bool] {
        &self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.interior_weight
    }

    pub fn count(&self) -> usize {
        self.m.iter().filter(|&&on| on).count()
    }

    /// Indices of foreground tokens in ascending order.
    pub fn fg_indices(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&k| self.m[k]).collect()
    }

    /// Same mask with every weight on the mask forced to 1.
    pub fn with_unit_weights(&self) -> Self {
        Self::from_bits(self.m.clone())
    }
}

/// Draws the initial state at `t = 1`.
///
/// Background tokens are standard normal. Foreground tokens blend the same
/// per-token draw toward `b`: `(1 - lambda_s) * noise + lambda_s * b`.
pub fn init_state(
    grid: Grid,
    d: usize,
    seed: u64,
    page_id: u64,
    mask: &ForegroundMask,
    b: &BackingLatent,
    lambda_s: f64,
) -> Result<LatentState> {
    if grid.is_empty() || d == 0 {
        return Err(SscError::InvalidConfig(format!(
            "state dims must be positive, got {}x{} tokens with d = {d}",
            grid.h, grid.w
        )));
    }
    if !(0.0..=1.0).contains(&lambda_s) {
        return Err(SscError::InvalidConfig(format!(
            "lambda_s must lie in [0, 1], got {lambda_s}"
        )));
    }
    check_dim("mask length", grid.len(), mask.len())?;
    check_dim("backing latent", d, b.dim())?;

    let key = rng::page_key(seed, page_id);
    let mut tokens = TokenMatrix::zeros(grid.len(), d);
    for k in 0..grid.len() {
        let row = tokens.row_mut(k);
        rng::fill_normal(key, k as u64, row);
        if mask.is_fg(k) {
            for (x, &bj) in row.iter_mut().zip(b.as_slice()) {
                *x = (1.0 - lambda_s) * *x + lambda_s * bj;
            }
        }
    }
    Ok(LatentState {
        tokens,
        t: 1.0,
        page_id,
        seed,
        grid,
    })
}

/// `V(x) = ||x - b||^2` for a single token.
pub fn lyapunov(token: &[f64], b: &BackingLatent) -> Result<f64> {
    check_dim("lyapunov token", b.dim(), token.len())?;
    Ok(sq_dist(token, b.as_slice()))
}

/// Sum of squared distances to `b` over masked tokens.
pub fn foreground_energy(
    state: &LatentState,
    mask: &ForegroundMask,
    b: &BackingLatent,
) -> Result<f64> {
    check_dim("mask length", state.len(), mask.len())?;
    check_dim("backing latent", state.dim(), b.dim())?;
    Ok((0..state.len())
        .filter(|&k| mask.is_fg(k))
        .map(|k| sq_dist(state.tokens.row(k), b.as_slice()))
        .sum())
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
