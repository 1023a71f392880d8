//! Measured checks of the stability properties over recorded trajectories,
//! multi-page consistency statistics, and the three-way ablation.
//!
//! Every check recomputes the schedule values (`alpha`, `gamma`) from the
//! recorded times and recomputes squared distances from the recorded token
//! vectors instead of reusing the controller's own numbers.

use serde::{Deserialize, Serialize};

use crate::control::{Controller, Schedule, StyleMode, TrajectoryRecord};
use crate::error::{Result, SscError};
use crate::exec::{self, ExecMode};
use crate::field::VelocityField;
use crate::latent::{init_state, BackingLatent, ForegroundMask, Grid, LatentState};
use crate::layout::{rasterize_mask, LayoutPage};
use crate::render::{composite, decode, text_box_contrasts, WCAG_AA};
use crate::style::{StyleBank, StyleDirection, DEFAULT_LABELS};
use crate::suite::{self, StandardSetup};

pub const GATING_TOL: f64 = 1e-10;
pub const LYAPUNOV_TOL: f64 = 1e-10;
pub const PRODUCT_TOL: f64 = 1e-9;
pub const ENERGY_STEP_TOL: f64 = 1e-10;
pub const TRANSLATION_TOL: f64 = 1e-10;
/// Final-step foreground update must shrink below this fraction of the first.
pub const DECAY_RATIO: f64 = 0.01;

pub const ABLATION_MIN_COVERAGE: f64 = 0.95;
pub const ABLATION_MIN_GAP: f64 = 0.10;
pub const ABLATION_MIN_WINS: usize = 9;

/// One pass/fail measurement; passes iff `max_deviation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_step: Option<usize>,
    pub samples: usize,
}

impl Check {
    fn new(name: &str, worst: Worst, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            max_deviation: worst.dev,
            tolerance,
            passed: worst.dev <= tolerance,
            worst_step: worst.step,
            samples: worst.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub id: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PropositionReport {
    fn new(id: &str, checks: Vec<Check>, notes: Vec<String>) -> Self {
        PropositionReport {
            id: id.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            notes,
        }
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    dev: f64,
    step: Option<usize>,
    count: usize,
}

impl Worst {
    fn new() -> Self {
        Worst {
            dev: 0.0,
            step: None,
            count: 0,
        }
    }

    fn see(&mut self, dev: f64, step: usize) {
        self.count += 1;
        // NaN deviations must fail
        if dev.is_nan() {
            self.dev = f64::INFINITY;
            self.step = Some(step);
        } else if dev > self.dev || self.step.is_none() && dev >= self.dev {
            self.dev = dev;
            self.step = Some(step);
        }
    }
}

fn gate(t: f64) -> f64 {
    (1.0 - t) * (1.0 - t)
}

fn pull(rec: &TrajectoryRecord, t: f64) -> f64 {
    if rec.relaxation {
        rec.lambda_s * gate(t)
    } else {
        0.0
    }
}

fn sq_dist(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum()
}

fn rel_dev(measured: f64, expected: f64) -> f64 {
    let diff = (measured - expected).abs();
    if expected.abs() > 0.0 {
        diff / expected.abs()
    } else {
        diff
    }
}

fn non_empty(rec: &TrajectoryRecord) -> Result<()> {
    if rec.entries.is_empty() {
        Err(SscError::EmptyRecord)
    } else {
        Ok(())
    }
}

/// Foreground time-scale separation: each foreground token's gated update is
/// exactly `1 - alpha(t)` times its ungated update. With `decay_ratio`, also
/// requires the last step's foreground update norm to be at most that
/// fraction of the first step's.
pub fn check_timescale(rec: &TrajectoryRecord, decay_ratio: Option<f64>) -> Result<PropositionReport> {
    non_empty(rec)?;
    let mut factor = Worst::new();
    for (i, e) in rec.entries.iter().enumerate() {
        let expected = if rec.gating { 1.0 - gate(e.t) } else { 1.0 };
        for &[ungated, gated] in &e.fg_updates {
            if ungated == 0.0 {
                factor.see(gated.abs(), i);
            } else {
                factor.see(rel_dev(gated / ungated, expected), i);
            }
        }
    }
    let mut checks = vec![Check::new("gating-factor", factor, GATING_TOL)];
    let mut notes = Vec::new();
    if let Some(ratio) = decay_ratio {
        let first = rec.entries[0].fg_update_norm;
        let last = rec.entries[rec.entries.len() - 1].fg_update_norm;
        let mut w = Worst::new();
        if first > 0.0 {
            w.see(last / first, rec.entries.len() - 1);
        } else {
            notes.push("first-step foreground update is zero; decay ratio not measurable".into());
            w.see(if last == 0.0 { 0.0 } else { f64::INFINITY }, rec.entries.len() - 1);
        }
        checks.push(Check::new("late-decay", w, ratio));
    }
    Ok(PropositionReport::new("prop1", checks, notes))
}

/// Lyapunov contraction of sampled foreground tokens across relaxation.
pub fn check_lyapunov(rec: &TrajectoryRecord) -> Result<PropositionReport> {
    non_empty(rec)?;
    let mut ratio = Worst::new();
    let mut monotone = Worst::new();
    let mut product = Worst::new();
    let mut notes = Vec::new();

    for (j, sample) in rec.sampled.iter().enumerate() {
        let mut drift_free = true;
        let v0 = sq_dist(&rec.entries[0].samples_before[j], &rec.b);
        let mut cumulative = 1.0;
        for (i, e) in rec.entries.iter().enumerate() {
            let before = &e.samples_before[j];
            let after = &e.samples_after[j];
            if i > 0 && rec.entries[i - 1].samples_after[j] != *before {
                drift_free = false;
            }
            let vb = sq_dist(before, &rec.b);
            let va = sq_dist(after, &rec.b);
            let keep = 1.0 - pull(rec, e.t) * sample.weight;
            let f = keep * keep;
            ratio.see(rel_dev(va, f * vb), i);
            monotone.see(if vb > 0.0 { ((va - vb) / vb).max(0.0) } else { va }, i);
            cumulative *= f;
            if drift_free {
                product.see(rel_dev(va, v0 * cumulative), i);
            }
        }
        if !drift_free {
            notes.push(format!(
                "token {} moves between relaxations; product law not applicable",
                sample.index
            ));
        }
    }
    if rec.sampled.is_empty() {
        notes.push("no foreground tokens sampled".into());
    }
    let mut checks = vec![
        Check::new("relaxation-ratio", ratio, LYAPUNOV_TOL),
        Check::new("non-increasing", monotone, 0.0),
    ];
    if product.count > 0 {
        checks.push(Check::new("product-law", product, PRODUCT_TOL));
    }
    Ok(PropositionReport::new("prop2", checks, notes))
}

/// Foreground energy dissipation. Every relaxation sub-step must not raise
/// the energy, and must lower it when `gamma > 0`. With unit weights each
/// sub-step scales the energy by `(1 - gamma)^2`; when foreground tokens also
/// never move between relaxations the whole trace follows the product law.
pub fn check_energy(rec: &TrajectoryRecord) -> Result<PropositionReport> {
    non_empty(rec)?;
    let uniform = rec.fg_weights.iter().all(|&w| w == 1.0);
    let drift_free = rec.entries.iter().all(|e| e.fg_update_norm == 0.0);
    let mut decrease = Worst::new();
    let mut step = Worst::new();
    let mut product = Worst::new();
    let e0 = rec.entries[0].energy_before;
    let mut cumulative = 1.0;
    for (i, e) in rec.entries.iter().enumerate() {
        let g = pull(rec, e.t);
        let violated = e.energy_after > e.energy_before
            || (g > 0.0 && e.energy_before > 0.0 && !(e.energy_after < e.energy_before));
        decrease.see(if violated { 1.0 } else { 0.0 }, i);
        let f = (1.0 - g) * (1.0 - g);
        if uniform {
            step.see(rel_dev(e.energy_after, f * e.energy_before), i);
        }
        cumulative *= f;
        if uniform && drift_free {
            product.see(rel_dev(e.energy_after, e0 * cumulative), i);
        }
    }
    let mut checks = vec![Check::new("decreases", decrease, 0.0)];
    let mut notes = Vec::new();
    if uniform {
        checks.push(Check::new("step-factor", step, ENERGY_STEP_TOL));
    } else {
        notes.push("non-uniform interior weights; per-step factor not a single scalar".into());
    }
    if uniform && drift_free {
        checks.push(Check::new("product-law", product, PRODUCT_TOL));
    }
    Ok(PropositionReport::new("prop4", checks, notes))
}

fn paired_runs(
    controller: &Controller,
    field: &VelocityField,
    dir: &StyleDirection,
    mask: &ForegroundMask,
    init: &LatentState,
) -> Result<(Vec<LatentState>, Vec<LatentState>)> {
    let mut ctl = controller.clone();
    ctl.schedule.style_mode = StyleMode::State;
    let mut plain = Vec::new();
    ctl.run_observed(field, mask, None, init, |_, x| plain.push(x.clone()))?;
    let mut shifted = Vec::new();
    ctl.run_observed(field, mask, Some(dir), init, |_, x| shifted.push(x.clone()))?;
    Ok((plain, shifted))
}

/// Affine invariance: a trajectory started from `x0 + lambda * s` stays
/// offset by exactly `lambda * s` on background tokens at every step.
/// Requires a translation-equivariant (constant) field.
pub fn check_translation(
    controller: &Controller,
    field: &VelocityField,
    dir: &StyleDirection,
    mask: &ForegroundMask,
    init: &LatentState,
) -> Result<PropositionReport> {
    if !field.is_translation_equivariant() {
        return Err(SscError::InvalidConfig(format!(
            "translation check needs a translation-equivariant field, got {}",
            field.kind_name()
        )));
    }
    let bg: Vec<usize> = (0..mask.len()).filter(|&k| !mask.is_fg(k)).collect();
    if bg.is_empty() {
        return Err(SscError::InvalidConfig("translation check needs background tokens".into()));
    }
    let (plain, shifted) = paired_runs(controller, field, dir, mask, init)?;
    let expected: Vec<f64> = dir.direction().iter().map(|s| dir.lambda_s() * s).collect();
    let mut w = Worst::new();
    for (i, (a, b)) in plain.iter().zip(&shifted).enumerate() {
        for &k in &bg {
            let dev = a
                .tokens
                .row(k)
                .iter()
                .zip(b.tokens.row(k))
                .zip(&expected)
                .map(|((xa, xb), e)| ((xb - xa) - e).abs())
                .fold(0.0, f64::max);
            w.see(dev, i);
        }
    }
    let notes = vec![format!(
        "{} background tokens compared over {} steps",
        bg.len(),
        plain.len()
    )];
    Ok(PropositionReport::new("prop3", vec![Check::new("offset-preserved", w, TRANSLATION_TOL)], notes))
}

/// Informative offset profile for any field: per step, the mean background
/// offset projected on `s`, divided by `lambda`.
pub fn translation_profile(
    controller: &Controller,
    field: &VelocityField,
    dir: &StyleDirection,
    mask: &ForegroundMask,
    init: &LatentState,
) -> Result<Vec<f64>> {
    if dir.lambda_s() == 0.0 {
        return Err(SscError::InvalidConfig("offset profile needs lambda > 0".into()));
    }
    let bg: Vec<usize> = (0..mask.len()).filter(|&k| !mask.is_fg(k)).collect();
    let (plain, shifted) = paired_runs(controller, field, dir, mask, init)?;
    Ok(plain
        .iter()
        .zip(&shifted)
        .map(|(a, b)| {
            let total: f64 = bg
                .iter()
                .map(|&k| {
                    a.tokens
                        .row(k)
                        .iter()
                        .zip(b.tokens.row(k))
                        .zip(dir.direction())
                        .map(|((xa, xb), s)| (xb - xa) * s)
                        .sum::<f64>()
                })
                .sum();
            total / bg.len() as f64 / dir.lambda_s()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    /// Mean cosine over all page pairs of background mean vectors.
    pub pairwise_cosine: f64,
    /// Mean cosine of each page's background mean with the style direction.
    pub style_cosine: f64,
    pub page_means: Vec<Vec<f64>>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cross-page consistency of background-token means.
pub fn multipage_consistency(
    finals: &[LatentState],
    masks: &[ForegroundMask],
    s: &[f64],
) -> Result<ConsistencyStats> {
    if finals.len() < 2 {
        return Err(SscError::InvalidConfig("consistency needs at least two pages".into()));
    }
    if finals.len() != masks.len() {
        return Err(SscError::DimMismatch {
            what: "masks per page",
            expected: finals.len(),
            found: masks.len(),
        });
    }
    let mut page_means = Vec::with_capacity(finals.len());
    for (p, (state, mask)) in finals.iter().zip(masks).enumerate() {
        crate::error::check_dim("page mask", state.len(), mask.len())?;
        crate::error::check_dim("style direction", state.dim(), s.len())?;
        let mut mean = vec![0.0; state.dim()];
        let mut count = 0usize;
        for k in (0..state.len()).filter(|&k| !mask.is_fg(k)) {
            for (m, x) in mean.iter_mut().zip(state.tokens.row(k)) {
                *m += x;
            }
            count += 1;
        }
        if count == 0 {
            return Err(SscError::UndefinedCosine(format!("page {p} has no background tokens")));
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        if mean.iter().all(|&m| m == 0.0) {
            return Err(SscError::UndefinedCosine(format!("page {p} background mean is zero")));
        }
        page_means.push(mean);
    }
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..page_means.len() {
        for j in i + 1..page_means.len() {
            pair_sum += cosine(&page_means[i], &page_means[j]);
            pairs += 1;
        }
    }
    let style_cosine = page_means.iter().map(|m| cosine(m, s)).sum::<f64>() / page_means.len() as f64;
    Ok(ConsistencyStats {
        pairwise_cosine: pair_sum / pairs as f64,
        style_cosine,
        page_means,
    })
}

/// Empirical order of the Euler scheme against a fine-step reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: Vec<usize>,
    pub reference_steps: usize,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

pub fn euler_convergence(
    field: &VelocityField,
    init: &LatentState,
    steps: &[usize],
    reference_steps: usize,
) -> Result<ConvergenceReport> {
    let mask = ForegroundMask::empty(init.len());
    let solve = |s: usize| -> Result<LatentState> {
        let mut ctl = Controller::new(Schedule::new(s, StyleMode::Velocity, 1.0)?, 0.0, init.dim())?;
        ctl.gating = false;
        ctl.relaxation = false;
        ctl.samples = 0;
        Ok(ctl.run(field, &mask, None, init)?.0)
    };
    let reference = solve(reference_steps)?;
    let errors = steps
        .iter()
        .map(|&s| {
            let x = solve(s)?;
            Ok(x.tokens
                .as_slice()
                .iter()
                .zip(reference.tokens.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let orders = steps
        .windows(2)
        .zip(errors.windows(2))
        .map(|(s, e)| (e[0] / e[1]).ln() / (s[1] as f64 / s[0] as f64).ln())
        .collect();
    Ok(ConvergenceReport {
        steps: steps.to_vec(),
        reference_steps,
        errors,
        orders,
    })
}

// ---------------------------------------------------------------------------
// Standard suites

fn standard_controller(setup: &StandardSetup) -> Result<Controller> {
    Controller::new(
        Schedule::new(setup.steps, StyleMode::Velocity, setup.style_cap)?,
        setup.lambda_s,
        setup.d,
    )
}

fn standard_page_state(setup: &StandardSetup, boundary_weight: f64) -> Result<(ForegroundMask, LatentState)> {
    let page = suite::synthetic_page(setup.grid, setup.seed, 0);
    let mask = rasterize_mask(&page, setup.grid, boundary_weight)?;
    let init = init_state(
        setup.grid,
        setup.d,
        setup.seed,
        0,
        &mask,
        &BackingLatent::zeros(setup.d),
        setup.lambda_s,
    )?;
    Ok((mask, init))
}

pub fn verify_prop1(setup: &StandardSetup) -> Result<PropositionReport> {
    let (mask, init) = standard_page_state(setup, setup.boundary_weight)?;
    let field = suite::standard_linear_field(setup.d)?;
    let (_, rec) = standard_controller(setup)?.run(&field, &mask, None, &init)?;
    check_timescale(&rec, Some(DECAY_RATIO))
}

pub fn verify_prop2(setup: &StandardSetup) -> Result<PropositionReport> {
    let (mask, init) = standard_page_state(setup, setup.boundary_weight)?;
    let field = VelocityField::zero(setup.d)?;
    let (_, rec) = standard_controller(setup)?.run(&field, &mask, None, &init)?;
    check_lyapunov(&rec)
}

pub fn verify_prop3(setup: &StandardSetup) -> Result<PropositionReport> {
    let (mask, init) = standard_page_state(setup, setup.boundary_weight)?;
    let field = suite::standard_constant_field(setup.d, setup.scene_seed)?;
    let bank = StyleBank::default_bank(setup.d, setup.scene_seed, setup.lambda_s)?;
    let dir = bank.select("muted")?;
    check_translation(&standard_controller(setup)?, &field, dir, &mask, &init)
}

/// Zero-field product law on a unit-weight mask, plus per-step dissipation
/// under the mixture field on the standard mask.
pub fn verify_prop4(setup: &StandardSetup) -> Result<PropositionReport> {
    let ctl = standard_controller(setup)?;
    let (mask, init) = standard_page_state(setup, 1.0)?;
    let (_, rec) = ctl.run(&VelocityField::zero(setup.d)?, &mask, None, &init)?;
    let zero = check_energy(&rec)?;

    let (mask, init) = standard_page_state(setup, setup.boundary_weight)?;
    let scene = suite::standard_scene(setup.d, setup.scene_seed)?;
    let (_, rec) = ctl.run(&scene.field, &mask, None, &init)?;
    let mixture = check_energy(&rec)?;

    let mut checks = Vec::new();
    for (tag, report) in [("zero-field", zero), ("mixture-field", mixture)] {
        for mut c in report.checks {
            c.name = format!("{tag}/{}", c.name);
            checks.push(c);
        }
    }
    Ok(PropositionReport::new("prop4", checks, Vec::new()))
}

/// Conjunction of the four property suites.
pub fn verify_theorem1(setup: &StandardSetup, mode: ExecMode) -> Result<Vec<PropositionReport>> {
    let suites: [fn(&StandardSetup) -> Result<PropositionReport>; 4] =
        [verify_prop1, verify_prop2, verify_prop3, verify_prop4];
    exec::map(mode, &suites, |f| f(setup)).into_iter().collect()
}

// ---------------------------------------------------------------------------
// Ablation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Full,
    NoStyleBank,
    NoSsc,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Full, Condition::NoStyleBank, Condition::NoSsc];
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub setup: StandardSetup,
    pub pages: usize,
    pub seeds: Vec<u64>,
    pub exec: ExecMode,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            setup: StandardSetup::default(),
            pages: 7,
            seeds: (0..10).collect(),
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub style: String,
    pub coverage: f64,
    pub boxes_measured: usize,
    pub pairwise_cosine: f64,
    pub style_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub mean_coverage: f64,
    pub mean_pairwise_cosine: f64,
    pub mean_style_cosine: f64,
    pub seeds: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub pages: usize,
    pub conditions: Vec<ConditionSummary>,
    /// Seeds where the full condition's style cosine beats no-style-bank.
    pub style_wins: usize,
    pub coverage_gap: f64,
    pub passed: bool,
}

impl AblationReport {
    pub fn summary(&self, c: Condition) -> &ConditionSummary {
        self.conditions
            .iter()
            .find(|s| s.condition == c)
            .expect("every condition is reported")
    }
}

struct PageOutcome {
    passing: usize,
    measured: usize,
    final_state: LatentState,
    mask: ForegroundMask,
}

fn run_page(
    setup: &StandardSetup,
    condition: Condition,
    scene: &suite::Scene,
    page: &LayoutPage,
    page_id: u64,
    seed: u64,
    dir: &StyleDirection,
) -> Result<PageOutcome> {
    let mask = rasterize_mask(page, setup.grid, setup.boundary_weight)?;
    let b = BackingLatent::zeros(setup.d);
    let mut ctl = standard_controller(setup)?;
    ctl.samples = 0;
    let (init_lambda, dir) = match condition {
        Condition::Full => (setup.lambda_s, Some(dir)),
        Condition::NoStyleBank => (setup.lambda_s, None),
        Condition::NoSsc => {
            ctl = ctl.without_ssc();
            (0.0, Some(dir))
        }
    };
    let init = init_state(setup.grid, setup.d, seed, page_id, &mask, &b, init_lambda)?;
    let (final_state, _) = ctl.run(&scene.field, &mask, dir, &init)?;
    let img = composite(&decode(&final_state, &scene.decoder, setup.patch)?, page);
    let boxes = text_box_contrasts(&img, page, WCAG_AA);
    Ok(PageOutcome {
        passing: boxes.iter().filter(|b| b.passes).count(),
        measured: boxes.len(),
        final_state,
        mask,
    })
}

/// Runs full, no-style-bank, and no-SSC conditions on the same seeds.
pub fn ablation_suite(cfg: &AblationConfig) -> Result<AblationReport> {
    let setup = &cfg.setup;
    check_lambda_setup(setup)?;
    let scene = suite::standard_scene(setup.d, setup.scene_seed)?;
    let bank = StyleBank::default_bank(setup.d, setup.scene_seed, setup.lambda_s)?;

    let mut jobs = Vec::new();
    for (si, &seed) in cfg.seeds.iter().enumerate() {
        for condition in Condition::ALL {
            for page in 0..cfg.pages {
                jobs.push((si, seed, condition, page));
            }
        }
    }
    let docs: Vec<_> = cfg
        .seeds
        .iter()
        .map(|&seed| suite::synthetic_document(cfg.pages, setup.grid, seed))
        .collect();
    let label = |seed: u64| DEFAULT_LABELS[(seed % DEFAULT_LABELS.len() as u64) as usize];
    let outcomes = exec::map(cfg.exec, &jobs, |&(si, seed, condition, page)| {
        let dir = bank.select(label(seed))?;
        run_page(setup, condition, &scene, &docs[si].pages[page], page as u64, seed, dir)
    });
    let mut outcomes = outcomes.into_iter();

    let mut per_condition: Vec<Vec<SeedOutcome>> = vec![Vec::new(); Condition::ALL.len()];
    for &seed in &cfg.seeds {
        let s = bank.select(label(seed))?.direction();
        for (ci, _) in Condition::ALL.iter().enumerate() {
            let pages: Vec<PageOutcome> = outcomes.by_ref().take(cfg.pages).collect::<Result<_>>()?;
            let passing: usize = pages.iter().map(|p| p.passing).sum();
            let measured: usize = pages.iter().map(|p| p.measured).sum();
            let finals: Vec<LatentState> = pages.iter().map(|p| p.final_state.clone()).collect();
            let masks: Vec<ForegroundMask> = pages.iter().map(|p| p.mask.clone()).collect();
            let stats = multipage_consistency(&finals, &masks, s)?;
            per_condition[ci].push(SeedOutcome {
                seed,
                style: label(seed).to_string(),
                coverage: if measured > 0 { passing as f64 / measured as f64 } else { f64::NAN },
                boxes_measured: measured,
                pairwise_cosine: stats.pairwise_cosine,
                style_cosine: stats.style_cosine,
            });
        }
    }

    let mean = |xs: &[SeedOutcome], f: fn(&SeedOutcome) -> f64| xs.iter().map(f).sum::<f64>() / xs.len().max(1) as f64;
    let conditions: Vec<ConditionSummary> = Condition::ALL
        .iter()
        .zip(per_condition)
        .map(|(&condition, seeds)| ConditionSummary {
            condition,
            mean_coverage: mean(&seeds, |s| s.coverage),
            mean_pairwise_cosine: mean(&seeds, |s| s.pairwise_cosine),
            mean_style_cosine: mean(&seeds, |s| s.style_cosine),
            seeds,
        })
        .collect();
    let full = &conditions[0];
    let no_style = &conditions[1];
    let no_ssc = &conditions[2];
    let style_wins = full
        .seeds
        .iter()
        .zip(&no_style.seeds)
        .filter(|(a, b)| a.style_cosine > b.style_cosine)
        .count();
    let coverage_gap = full.mean_coverage - no_ssc.mean_coverage;
    let needed_wins = ABLATION_MIN_WINS.min(cfg.seeds.len());
    let passed = full.mean_coverage >= ABLATION_MIN_COVERAGE
        && coverage_gap >= ABLATION_MIN_GAP
        && style_wins >= needed_wins;
    Ok(AblationReport {
        pages: cfg.pages,
        conditions,
        style_wins,
        coverage_gap,
        passed,
    })
}

fn check_lambda_setup(setup: &StandardSetup) -> Result<()> {
    crate::control::check_lambda(setup.lambda_s)?;
    Grid::new(setup.grid.h, setup.grid.w)?;
    Ok(())
}
