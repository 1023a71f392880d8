//! `ssc stylebank`: build and inspect style direction banks.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ssc_core::style::DEFAULT_LABELS;
use ssc_core::StyleBank;

use crate::config::check_lambda;

pub fn default_labels() -> Vec<String> {
    DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()
}

pub fn build(labels: &[String], d: usize, seed: u64, lambda_s: f64, path: &Path, force: bool) -> Result<StyleBank> {
    check_lambda(lambda_s)?;
    if path.exists() && !force {
        bail!("{} already exists; pass --force to overwrite", path.display());
    }
    let bank = StyleBank::from_labels(labels, d, seed, lambda_s)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    bank.save(path)?;
    Ok(bank)
}

pub fn list_lines(path: &Path) -> Result<Vec<String>> {
    let bank = StyleBank::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(bank
        .entries()
        .iter()
        .map(|e| {
            let norm = e.direction().iter().map(|x| x * x).sum::<f64>().sqrt();
            format!("{:<16} d={} lambda={} |s|={:.12}", e.label(), e.dim(), e.lambda_s(), norm)
        })
        .collect())
}
