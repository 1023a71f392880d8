//! Run configuration: defaults, optional JSON file, flag overrides, and the
//! content hash that tags every artifact.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssc_core::field::FieldSpec;
use ssc_core::suite::StandardSetup;
use ssc_core::{Grid, StyleMode};

/// Fully resolved settings for `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub layout: PathBuf,
    pub style: Option<String>,
    pub bank: Option<PathBuf>,
    pub steps: usize,
    pub lambda_s: f64,
    pub style_mode: StyleMode,
    pub style_cap: f64,
    pub seed: u64,
    pub scene_seed: u64,
    pub grid: Grid,
    pub d: usize,
    pub patch: usize,
    pub boundary_weight: f64,
    /// Background drift; the standard palette mixture when absent.
    pub field: Option<FieldSpec>,
    pub out: PathBuf,
    pub force: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = StandardSetup::default();
        RunConfig {
            layout: PathBuf::new(),
            style: None,
            bank: None,
            steps: s.steps,
            lambda_s: s.lambda_s,
            style_mode: StyleMode::Velocity,
            style_cap: s.style_cap,
            seed: s.seed,
            scene_seed: s.scene_seed,
            grid: s.grid,
            d: s.d,
            patch: s.patch,
            boundary_weight: s.boundary_weight,
            field: None,
            out: PathBuf::from("ssc-out"),
            force: false,
        }
    }
}

/// Settings a config file may carry; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub layout: Option<PathBuf>,
    pub style: Option<String>,
    pub bank: Option<PathBuf>,
    pub steps: Option<usize>,
    pub lambda_s: Option<f64>,
    pub style_mode: Option<StyleMode>,
    pub style_cap: Option<f64>,
    pub seed: Option<u64>,
    pub scene_seed: Option<u64>,
    pub grid: Option<Grid>,
    pub d: Option<usize>,
    pub patch: Option<usize>,
    pub boundary_weight: Option<f64>,
    pub field: Option<FieldSpec>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(layout, steps, lambda_s, style_mode, style_cap, seed, scene_seed, grid, d, patch, boundary_weight, out);
        if self.style.is_some() {
            cfg.style = self.style;
        }
        if self.bank.is_some() {
            cfg.bank = self.bank;
        }
        if self.field.is_some() {
            cfg.field = self.field;
        }
    }
}

/// Parses `HxW`, e.g. `32x24`.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .with_context(|| format!("grid {text:?} is not of the form HxW"))?;
    let h: usize = h.trim().parse().with_context(|| format!("bad grid height in {text:?}"))?;
    let w: usize = w.trim().parse().with_context(|| format!("bad grid width in {text:?}"))?;
    Ok(Grid::new(h, w)?)
}

pub fn check_lambda(lambda_s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda_s) {
        bail!("invalid config: lambda must lie in [0, 1], got {lambda_s}");
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            bail!("invalid config: steps must be >= 1");
        }
        check_lambda(self.lambda_s)?;
        if !(self.style_cap > 0.0) {
            bail!("invalid config: style cap must be > 0, got {}", self.style_cap);
        }
        Grid::new(self.grid.h, self.grid.w)?;
        if self.d == 0 {
            bail!("invalid config: dim must be >= 1");
        }
        if self.patch == 0 {
            bail!("invalid config: patch must be >= 1");
        }
        if !(self.boundary_weight > 0.0 && self.boundary_weight <= 1.0) {
            bail!("invalid config: boundary weight must lie in (0, 1], got {}", self.boundary_weight);
        }
        if self.layout.as_os_str().is_empty() {
            bail!("invalid config: no layout file given (--layout)");
        }
        Ok(())
    }

    pub fn setup(&self) -> StandardSetup {
        StandardSetup {
            grid: self.grid,
            d: self.d,
            steps: self.steps,
            lambda_s: self.lambda_s,
            style_cap: self.style_cap,
            boundary_weight: self.boundary_weight,
            patch: self.patch,
            seed: self.seed,
            scene_seed: self.scene_seed,
        }
    }

    /// Hash over every setting that affects outputs plus the bytes of the
    /// layout and bank files. Output location and `force` are excluded, so
    /// the same inputs hash the same wherever they are written.
    pub fn hash(&self, layout_bytes: &[u8], bank_bytes: Option<&[u8]>) -> String {
        let mut canon = self.clone();
        canon.layout = PathBuf::new();
        canon.bank = None;
        canon.out = PathBuf::new();
        canon.force = false;
        let json = serde_json::to_vec(&canon).expect("config serializes");
        let mut h = Sha256::new();
        h.update(&json);
        h.update(b"\0layout\0");
        h.update(layout_bytes);
        if let Some(bank) = bank_bytes {
            h.update(b"\0bank\0");
            h.update(bank);
        }
        hex::encode(h.finalize())[..16].to_string()
    }
}

/// Hash of a verification setup plus suite name.
pub fn setup_hash(setup: &StandardSetup, suite: &str) -> String {
    let json = serde_json::to_vec(setup).expect("setup serializes");
    let mut h = Sha256::new();
    h.update(&json);
    h.update(suite.as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}
