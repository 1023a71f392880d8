//! `ssc generate`: per-page runs, images, and the metrics report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use ssc_core::control::{Controller, Schedule, TrajectoryRecord};
use ssc_core::diagnostics::{multipage_consistency, ConsistencyStats};
use ssc_core::latent::{foreground_energy, init_state};
use ssc_core::layout::{parse_layout, rasterize_mask};
use ssc_core::render::{composite, decode, text_box_contrasts, write_ppm, BoxContrast, WCAG_AA};
use ssc_core::suite::standard_scene;
use ssc_core::{ExecMode, ForegroundMask, LatentState, StyleBank, VelocityField};

use crate::config::RunConfig;

/// Label carried by every contrast number we report.
pub const PROXY_NOTE: &str =
    "wcag coverage is a proxy: box fill vs mean background in a one-patch ring, no glyph segmentation";

#[derive(Debug, Serialize)]
pub struct PageMetrics {
    pub wcag_coverage: Option<f64>,
    pub boxes: Vec<BoxContrast>,
    pub foreground_tokens: usize,
    pub final_foreground_energy: f64,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub note: &'static str,
    pub style: Option<String>,
    pub pages: BTreeMap<String, PageMetrics>,
    pub consistency: Option<ConsistencyStats>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    state: &'a LatentState,
}

#[derive(Serialize)]
struct TrajectoryFile<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    record: &'a TrajectoryRecord,
}

/// What a generate run wrote.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub dir: PathBuf,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    pub metrics: MetricsReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cfg: &RunConfig, exec: ExecMode) -> Result<GenerateOutcome> {
    cfg.validate()?;
    let layout_bytes =
        fs::read(&cfg.layout).with_context(|| format!("reading layout {}", cfg.layout.display()))?;
    let doc = parse_layout(&layout_bytes).with_context(|| format!("layout {}", cfg.layout.display()))?;
    let bank_bytes = match &cfg.bank {
        Some(p) => Some(fs::read(p).with_context(|| format!("reading style bank {}", p.display()))?),
        None => None,
    };
    let hash = cfg.hash(&layout_bytes, bank_bytes.as_deref());

    let dir = match &cfg.style {
        Some(label) => {
            let bank = match &bank_bytes {
                Some(bytes) => StyleBank::from_json(std::str::from_utf8(bytes).context("style bank is not UTF-8")?)?,
                None => StyleBank::default_bank(cfg.d, cfg.scene_seed, cfg.lambda_s)?,
            };
            if bank.dim() != cfg.d {
                bail!("style bank has d = {}, run uses d = {}", bank.dim(), cfg.d);
            }
            Some(bank.select(label)?.with_strength(cfg.lambda_s)?)
        }
        None => None,
    };

    let scene = standard_scene(cfg.d, cfg.scene_seed)?;
    let field = match &cfg.field {
        Some(spec) => VelocityField::try_from(spec.clone())?,
        None => scene.field.clone(),
    };
    let controller = Controller::new(Schedule::new(cfg.steps, cfg.style_mode, cfg.style_cap)?, cfg.lambda_s, cfg.d)?;

    let out_dir = cfg.out.join(&hash);
    if out_dir.exists() && !cfg.force {
        bail!(
            "output directory {} already exists; pass --force to overwrite",
            out_dir.display()
        );
    }
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let pages: Vec<usize> = (0..doc.pages.len()).collect();
    let results = ssc_core::exec::map(exec, &pages, |&p| -> Result<(LatentState, ForegroundMask, TrajectoryRecord)> {
        let page = &doc.pages[p];
        let mask = rasterize_mask(page, cfg.grid, cfg.boundary_weight)?;
        let init = init_state(cfg.grid, cfg.d, cfg.seed, p as u64, &mask, &controller.b, cfg.lambda_s)?;
        let (fin, rec) = controller.run(&field, &mask, dir.as_ref(), &init)?;
        Ok((fin, mask, rec))
    });

    let mut files = Vec::new();
    let mut page_metrics = BTreeMap::new();
    let mut finals = Vec::new();
    let mut masks = Vec::new();
    for (p, result) in results.into_iter().enumerate() {
        let (fin, mask, rec) = result.with_context(|| format!("page {p}"))?;
        let page = &doc.pages[p];
        let mut bg = decode(&fin, &scene.decoder, cfg.patch)?;
        bg.config_hash = hash.clone();
        let img = composite(&bg, page);
        let boxes = text_box_contrasts(&img, page, WCAG_AA);
        let coverage = (!boxes.is_empty())
            .then(|| boxes.iter().filter(|b| b.passes).count() as f64 / boxes.len() as f64);

        let stem = format!("page-{p:03}");
        let latent = out_dir.join(format!("{stem}.latent.json"));
        write_json(&latent, &Snapshot { config_hash: &hash, state: &fin })?;
        let trajectory = out_dir.join(format!("{stem}.trajectory.json"));
        write_json(&trajectory, &TrajectoryFile { config_hash: &hash, record: &rec })?;
        for (name, image) in [("background", &bg), ("composite", &img)] {
            let path = out_dir.join(format!("{stem}.{name}.ppm"));
            let mut buf = Vec::new();
            write_ppm(image, &mut buf)?;
            fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
        }
        files.push(latent);
        files.push(trajectory);

        page_metrics.insert(
            p.to_string(),
            PageMetrics {
                wcag_coverage: coverage,
                boxes,
                foreground_tokens: mask.count(),
                final_foreground_energy: foreground_energy(&fin, &mask, &controller.b)?,
            },
        );
        finals.push(fin);
        masks.push(mask);
    }

    let consistency = match &dir {
        Some(dir) if finals.len() >= 2 => multipage_consistency(&finals, &masks, dir.direction()).ok(),
        _ => None,
    };
    let metrics = MetricsReport {
        config_hash: hash.clone(),
        note: PROXY_NOTE,
        style: cfg.style.clone(),
        pages: page_metrics,
        consistency,
    };
    let metrics_path = out_dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;
    files.push(metrics_path);

    #[derive(Serialize)]
    struct ConfigEcho<'a> {
        config_hash: &'a str,
        #[serde(flatten)]
        config: &'a RunConfig,
    }
    let mut echo_cfg = cfg.clone();
    echo_cfg.out = PathBuf::new();
    echo_cfg.force = false;
    let config_path = out_dir.join("config.json");
    write_json(&config_path, &ConfigEcho { config_hash: &hash, config: &echo_cfg })?;
    files.push(config_path);

    Ok(GenerateOutcome {
        dir: out_dir,
        config_hash: hash,
        files,
        metrics,
    })
}
