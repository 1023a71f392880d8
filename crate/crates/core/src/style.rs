//! Cached style directions: construction, lookup, persistence, and the two
//! ways a direction enters the dynamics (state displacement and a gated
//! velocity term).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SscError};
use crate::latent::{norm, LatentState};
use crate::rng;

/// The seven background categories used by the default bank.
pub const DEFAULT_LABELS: [&str; 7] = [
    "geometric",
    "shapes",
    "textures",
    "colorful",
    "muted",
    "professional",
    "real-and-natural",
];

/// Seed vectors aggregated per label when building a bank from labels.
pub const SEED_VECTORS_PER_LABEL: usize = 4;

const UNIT_TOL: f64 = 1e-9;

/// A fixed unit direction in latent space with its strength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleDirection {
    label: String,
    lambda_s: f64,
    s: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDirection {
    label: String,
    lambda_s: f64,
    s: Vec<f64>,
}

impl StyleDirection {
    /// Wraps an already-normalized vector, checking the unit norm.
    pub fn new(label: impl Into<String>, s: Vec<f64>, lambda_s: f64) -> Result<Self> {
        let label = label.into();
        let n = norm(&s);
        if s.is_empty() || (n - 1.0).abs() > UNIT_TOL {
            return Err(SscError::NonUnit { label, norm: n });
        }
        if !(lambda_s >= 0.0) || !lambda_s.is_finite() {
            return Err(SscError::InvalidConfig(format!(
                "style strength must be >= 0, got {lambda_s}"
            )));
        }
        Ok(StyleDirection { label, lambda_s, s })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn direction(&self) -> &[f64] {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// Same direction with a different strength.
    pub fn with_strength(&self, lambda_s: f64) -> Result<Self> {
        StyleDirection::new(self.label.clone(), self.s.clone(), lambda_s)
    }
}

/// Normalized mean of the seed vectors.
pub fn build_direction(label: &str, seed_vectors: &[Vec<f64>]) -> Result<StyleDirection> {
    let first = seed_vectors.first().ok_or_else(|| {
        SscError::InvalidConfig(format!("direction {label:?} needs at least one seed vector"))
    })?;
    let d = first.len();
    let mut mean = vec![0.0; d];
    for v in seed_vectors {
        check_dim("seed vector", d, v.len())?;
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let count = seed_vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    let n = norm(&mean);
    if !(n > 1e-12) || !n.is_finite() {
        return Err(SscError::DegenerateDirection(label.to_string()));
    }
    let s = mean.into_iter().map(|m| m / n).collect();
    StyleDirection::new(label, s, 0.0)
}

/// Deterministic seed vectors for a label.
pub fn label_seed_vectors(label: &str, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let key = rng::label_key(label, seed);
    (0..SEED_VECTORS_PER_LABEL)
        .map(|i| {
            let mut v = vec![0.0; d];
            rng::fill_normal(key, i as u64, &mut v);
            v
        })
        .collect()
}

/// Ordered set of directions sharing one dimensionality, unique by label.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleBank {
    entries: Vec<StyleDirection>,
    d: usize,
}

impl StyleBank {
    pub fn new(entries: Vec<StyleDirection>) -> Result<Self> {
        let d = entries.first().map_or(0, StyleDirection::dim);
        for (i, e) in entries.iter().enumerate() {
            check_dim("style bank entry", d, e.dim())?;
            if entries[..i].iter().any(|o| o.label == e.label) {
                return Err(SscError::Validation(format!(
                    "duplicate style label {:?}",
                    e.label
                )));
            }
        }
        Ok(StyleBank { entries, d })
    }

    /// Builds one direction per label from deterministic seed vectors.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], d: usize, seed: u64, lambda_s: f64) -> Result<Self> {
        if d == 0 {
            return Err(SscError::InvalidConfig("style bank needs d >= 1".into()));
        }
        let entries = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                build_direction(l, &label_seed_vectors(l, d, seed))?.with_strength(lambda_s)
            })
            .collect::<Result<Vec<_>>>()?;
        StyleBank::new(entries)
    }

    pub fn default_bank(d: usize, seed: u64, lambda_s: f64) -> Result<Self> {
        Self::from_labels(&DEFAULT_LABELS, d, seed, lambda_s)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StyleDirection] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    /// Looks up the cached direction for `label`.
    pub fn select(&self, label: &str) -> Result<&StyleDirection> {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .ok_or_else(|| SscError::NotFound {
                label: label.to_string(),
                available: self.labels(),
            })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<RawDirection> = serde_json::from_str(text).map_err(SscError::parse)?;
        let entries = raw
            .into_iter()
            .map(|r| StyleDirection::new(r.label, r.s, r.lambda_s))
            .collect::<Result<Vec<_>>>()?;
        StyleBank::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Shifts every token by `lambda_s * s`.
pub fn inject_state(state: &LatentState, dir: &StyleDirection) -> Result<LatentState> {
    check_dim("style direction", state.dim(), dir.dim())?;
    let mut out = state.clone();
    let lambda = dir.lambda_s;
    for k in 0..out.len() {
        for (x, sj) in out.tokens.row_mut(k).iter_mut().zip(&dir.s) {
            *x += lambda * sj;
        }
    }
    Ok(out)
}

/// Velocity-mode steering gain `min(lambda_s * (1 - t)^2, cap)`.
pub fn style_gate(t: f64, lambda_s: f64, cap: f64) -> f64 {
    let late = (1.0 - t).clamp(0.0, 1.0);
    (lambda_s * late * late).clamp(0.0, cap)
}
