//! The controlled denoising loop.
//!
//! Each step at time `t_i` evaluates the drift, folds in velocity-mode style
//! steering, attenuates foreground rows by `1 - alpha(t_i)`, takes an Euler
//! step of size `dt`, then relaxes foreground tokens toward the backing
//! latent with strength `gamma(t_i) * interior_weight`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SscError};
use crate::exec::ExecMode;
use crate::field::VelocityField;
use crate::latent::{foreground_energy, lyapunov, BackingLatent, ForegroundMask, LatentState, TokenMatrix};
use crate::style::{inject_state, style_gate, StyleDirection};

/// Foreground gate `(1 - t)^2`.
pub fn alpha(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SscError::TimeOutOfRange(t));
    }
    Ok((1.0 - t) * (1.0 - t))
}

/// Relaxation strength `lambda_s * alpha(t)`.
pub fn gamma(t: f64, lambda_s: f64) -> Result<f64> {
    check_lambda(lambda_s)?;
    Ok(lambda_s * alpha(t)?)
}

pub(crate) fn check_lambda(lambda_s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda_s) {
        Ok(())
    } else {
        Err(SscError::InvalidConfig(format!(
            "lambda_s must lie in [0, 1], got {lambda_s}"
        )))
    }
}

/// Scales foreground rows of `v` by `1 - a`; background rows pass through.
pub fn gate_velocity(v: &TokenMatrix, mask: &ForegroundMask, a: f64) -> Result<TokenMatrix> {
    check_dim("mask length", v.rows(), mask.len())?;
    if !(0.0..=1.0).contains(&a) {
        return Err(SscError::InvalidConfig(format!("gate value {a} outside [0, 1]")));
    }
    let mut out = v.clone();
    let keep = 1.0 - a;
    for k in mask.fg_indices() {
        out.row_mut(k).iter_mut().for_each(|x| *x *= keep);
    }
    Ok(out)
}

/// Blends foreground token `k` toward `b` with weight `g * interior_weight[k]`.
pub fn relax_foreground(
    state: &LatentState,
    mask: &ForegroundMask,
    g: f64,
    b: &BackingLatent,
) -> Result<LatentState> {
    check_dim("mask length", state.len(), mask.len())?;
    check_dim("backing latent", state.dim(), b.dim())?;
    if !(0.0..=1.0).contains(&g) {
        return Err(SscError::InvalidConfig(format!("relaxation strength {g} outside [0, 1]")));
    }
    let mut out = state.clone();
    for k in mask.fg_indices() {
        let w = g * mask.weight(k);
        for (x, &bj) in out.tokens.row_mut(k).iter_mut().zip(b.as_slice()) {
            *x = (1.0 - w) * *x + w * bj;
        }
    }
    Ok(out)
}

/// `x <- x - v * dt`, `t <- t - dt`.
pub fn euler_step(state: &LatentState, v: &TokenMatrix, dt: f64) -> Result<LatentState> {
    check_dim("velocity rows", state.len(), v.rows())?;
    check_dim("velocity columns", state.dim(), v.cols())?;
    if !(dt > 0.0) || dt > state.t + 1e-12 {
        return Err(SscError::Overshoot { t: state.t, dt });
    }
    let mut out = state.clone();
    for (x, vj) in out.tokens.as_mut_slice().iter_mut().zip(v.as_slice()) {
        *x -= vj * dt;
    }
    out.t = (state.t - dt).max(0.0);
    Ok(out)
}

/// Foreground temperature `(1 - g) * T`.
pub fn effective_temperature(_t: f64, g: f64, temperature: f64) -> f64 {
    (1.0 - g) * temperature
}

/// Nominal temperature schedule: linear cooling `T(t) = t`.
pub fn nominal_temperature(t: f64) -> f64 {
    t
}

/// Where the style direction enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StyleMode {
    /// One displacement `x + lambda_s * s` before the first step.
    State,
    /// A gated, capped velocity term `-eta(t) * s` at every step.
    #[default]
    Velocity,
}

impl std::str::FromStr for StyleMode {
    type Err = SscError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(StyleMode::State),
            "velocity" => Ok(StyleMode::Velocity),
            other => Err(SscError::InvalidConfig(format!(
                "unknown style mode {other:?} (expected state or velocity)"
            ))),
        }
    }
}

/// Uniform time grid from 1 down to `1/steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: usize,
    pub style_mode: StyleMode,
    pub style_cap: f64,
}

impl Schedule {
    pub fn new(steps: usize, style_mode: StyleMode, style_cap: f64) -> Result<Self> {
        let s = Schedule {
            steps,
            style_mode,
            style_cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(SscError::InvalidConfig("steps must be >= 1".into()));
        }
        if !(self.style_cap > 0.0) || !self.style_cap.is_finite() {
            return Err(SscError::InvalidConfig(format!(
                "style cap must be > 0, got {}",
                self.style_cap
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// `t_i = (S - i) / S` for `i = 0..S`.
    pub fn t_grid(&self) -> Vec<f64> {
        let s = self.steps as f64;
        (0..self.steps).map(|i| (self.steps - i) as f64 / s).collect()
    }
}

/// A foreground token whose full vector is logged every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledToken {
    pub index: usize,
    pub weight: f64,
}

/// Everything measured during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Velocity-mode style gain (0 when unused).
    pub eta: f64,
    pub temperature: f64,
    pub fg_temperature: f64,
    /// Frobenius norm of the gated Euler displacement over foreground rows.
    pub fg_update_norm: f64,
    pub bg_update_norm: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `[ungated, gated]` displacement magnitudes per foreground token.
    pub fg_updates: Vec<[f64; 2]>,
    pub lyapunov_before: Vec<f64>,
    pub lyapunov_after: Vec<f64>,
    /// Sampled token vectors just before and just after relaxation.
    pub samples_before: Vec<Vec<f64>>,
    pub samples_after: Vec<Vec<f64>>,
}

/// Per-step trace of a run; read-only once produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub steps: usize,
    pub dt: f64,
    pub lambda_s: f64,
    pub gating: bool,
    pub relaxation: bool,
    pub field: String,
    pub b: Vec<f64>,
    pub fg_tokens: Vec<usize>,
    pub fg_weights: Vec<f64>,
    pub sampled: Vec<SampledToken>,
    pub entries: Vec<StepRecord>,
}

/// Default number of foreground tokens logged in full.
pub const DEFAULT_SAMPLES: usize = 8;

/// Control settings shared by every run on a page set.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub schedule: Schedule,
    pub lambda_s: f64,
    pub b: BackingLatent,
    /// Foreground velocity attenuation on/off.
    pub gating: bool,
    /// Foreground relaxation toward `b` on/off.
    pub relaxation: bool,
    pub samples: usize,
    pub exec: ExecMode,
}

impl Controller {
    pub fn new(schedule: Schedule, lambda_s: f64, d: usize) -> Result<Self> {
        schedule.validate()?;
        check_lambda(lambda_s)?;
        Ok(Controller {
            schedule,
            lambda_s,
            b: BackingLatent::zeros(d),
            gating: true,
            relaxation: true,
            samples: DEFAULT_SAMPLES,
            exec: ExecMode::Sequential,
        })
    }

    /// Same controller with foreground gating and relaxation both off.
    pub fn without_ssc(mut self) -> Self {
        self.gating = false;
        self.relaxation = false;
        self
    }

    /// Runs the full schedule from `init`.
    pub fn run(
        &self,
        field: &VelocityField,
        mask: &ForegroundMask,
        dir: Option<&StyleDirection>,
        init: &LatentState,
    ) -> Result<(LatentState, TrajectoryRecord)> {
        self.run_observed(field, mask, dir, init, |_, _| {})
    }

    /// Like [`Controller::run`], calling `observe(step, state)` with the
    /// state at the end of every step.
    pub fn run_observed<F>(
        &self,
        field: &VelocityField,
        mask: &ForegroundMask,
        dir: Option<&StyleDirection>,
        init: &LatentState,
        mut observe: F,
    ) -> Result<(LatentState, TrajectoryRecord)>
    where
        F: FnMut(usize, &LatentState),
    {
        self.schedule.validate()?;
        check_lambda(self.lambda_s)?;
        let d = init.dim();
        check_dim("field dimension", d, field.dim())?;
        check_dim("mask length", init.len(), mask.len())?;
        check_dim("backing latent", d, self.b.dim())?;
        if let Some(dir) = dir {
            check_dim("style direction", d, dir.dim())?;
        }
        if (init.t - 1.0).abs() > 1e-12 {
            return Err(SscError::InvalidConfig(format!(
                "runs start at t = 1, initial state has t = {}",
                init.t
            )));
        }

        let fg = mask.fg_indices();
        let sampled = pick_samples(&fg, self.samples, mask);
        let dt = self.schedule.dt();
        let mut x = match (dir, self.schedule.style_mode) {
            (Some(dir), StyleMode::State) => inject_state(init, dir)?,
            _ => init.clone(),
        };
        let steering = match (dir, self.schedule.style_mode) {
            (Some(dir), StyleMode::Velocity) => Some(dir),
            _ => None,
        };

        let mut entries = Vec::with_capacity(self.schedule.steps);
        for (i, &t) in self.schedule.t_grid().iter().enumerate() {
            let a = alpha(t)?;
            let g = if self.relaxation { gamma(t, self.lambda_s)? } else { 0.0 };
            let mut v = field.eval_with(&x, t, self.exec)?;
            let eta = match steering {
                Some(dir) => {
                    let eta = style_gate(t, dir.lambda_s(), self.schedule.style_cap);
                    for k in 0..v.rows() {
                        for (vj, sj) in v.row_mut(k).iter_mut().zip(dir.direction()) {
                            *vj -= eta * sj;
                        }
                    }
                    eta
                }
                None => 0.0,
            };
            let gated = gate_velocity(&v, mask, if self.gating { a } else { 0.0 })?;

            let fg_updates: Vec<[f64; 2]> = fg
                .iter()
                .map(|&k| [row_norm(v.row(k)) * dt, row_norm(gated.row(k)) * dt])
                .collect();
            let (mut fg_sq, mut bg_sq) = (0.0, 0.0);
            for (k, row) in gated.iter_rows().enumerate() {
                let sq: f64 = row.iter().map(|x| x * x).sum();
                if mask.is_fg(k) {
                    fg_sq += sq;
                } else {
                    bg_sq += sq;
                }
            }

            x = euler_step(&x, &gated, dt)?;
            let energy_before = foreground_energy(&x, mask, &self.b)?;
            let samples_before: Vec<Vec<f64>> = sampled.iter().map(|s| x.tokens.row(s.index).to_vec()).collect();
            x = relax_foreground(&x, mask, g, &self.b)?;
            let energy_after = foreground_energy(&x, mask, &self.b)?;
            let samples_after: Vec<Vec<f64>> = sampled.iter().map(|s| x.tokens.row(s.index).to_vec()).collect();
            // pin t to the grid so the final state lands on exactly 0
            x.t = (self.schedule.steps - i - 1) as f64 / self.schedule.steps as f64;

            if !x.tokens.all_finite() {
                return Err(SscError::NonFinite { step: i });
            }
            observe(i, &x);
            let lyap = |vs: &[Vec<f64>]| -> Result<Vec<f64>> { vs.iter().map(|v| lyapunov(v, &self.b)).collect() };
            let temperature = nominal_temperature(t);
            entries.push(StepRecord {
                t,
                alpha: a,
                gamma: g,
                eta,
                temperature,
                fg_temperature: effective_temperature(t, g, temperature),
                fg_update_norm: fg_sq.sqrt() * dt,
                bg_update_norm: bg_sq.sqrt() * dt,
                energy_before,
                energy_after,
                fg_updates,
                lyapunov_before: lyap(&samples_before)?,
                lyapunov_after: lyap(&samples_after)?,
                samples_before,
                samples_after,
            });
        }

        let record = TrajectoryRecord {
            steps: self.schedule.steps,
            dt,
            lambda_s: self.lambda_s,
            gating: self.gating,
            relaxation: self.relaxation,
            field: field.kind_name().to_string(),
            b: self.b.0.clone(),
            fg_weights: fg.iter().map(|&k| mask.weight(k)).collect(),
            fg_tokens: fg,
            sampled,
            entries,
        };
        Ok((x, record))
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn pick_samples(fg: &[usize], count: usize, mask: &ForegroundMask) -> Vec<SampledToken> {
    if fg.is_empty() || count == 0 {
        return Vec::new();
    }
    let count = count.min(fg.len());
    (0..count)
        .map(|j| {
            let index = fg[j * fg.len() / count];
            SampledToken {
                index,
                weight: mask.weight(index),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::Grid;

    fn state(rows: &[Vec<f64>]) -> LatentState {
        let grid = Grid::new(1, rows.len()).unwrap();
        LatentState::new(TokenMatrix::from_rows(rows).unwrap(), grid, 1.0).unwrap()
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(1.0).unwrap(), 0.0);
        assert_eq!(alpha(0.0).unwrap(), 1.0);
        assert_eq!(alpha(0.5).unwrap(), 0.25);
        assert!(alpha(-0.1).is_err());
        assert!(alpha(1.1).is_err());
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(gamma(0.0, 0.8).unwrap(), 0.8);
        assert_eq!(gamma(0.5, 0.5).unwrap(), 0.125);
        assert!(gamma(0.5, 1.5).is_err());
    }

    #[test]
    fn gating_examples() {
        let v = TokenMatrix::from_rows(&[vec![5.0, -2.0], vec![4.0, 0.0], vec![7.0, 7.0]]).unwrap();
        let mask = ForegroundMask::from_bits(vec![true, true, false]);
        assert_eq!(gate_velocity(&v, &mask, 0.0).unwrap(), v);
        let full = gate_velocity(&v, &mask, 1.0).unwrap();
        assert_eq!(full.row(0), &[0.0, -0.0]);
        assert_eq!(full.row(2), &[7.0, 7.0]);
        assert_eq!(gate_velocity(&v, &mask, 0.25).unwrap().row(1), &[3.0, 0.0]);
    }

    #[test]
    fn relaxation_examples() {
        let s = state(&[vec![2.0, 0.0], vec![9.0, 9.0]]);
        let b = BackingLatent::zeros(2);
        let mask = ForegroundMask::from_bits(vec![true, false]);
        assert_eq!(relax_foreground(&s, &mask, 0.0, &b).unwrap(), s);
        let half = relax_foreground(&s, &mask, 0.5, &b).unwrap();
        assert_eq!(half.tokens.row(0), &[1.0, 0.0]);
        assert_eq!(half.tokens.row(1), &[9.0, 9.0]);
        assert_eq!(lyapunov(half.tokens.row(0), &b).unwrap(), 1.0);

        let b2 = BackingLatent(vec![0.3, -0.7]);
        let collapsed = relax_foreground(&s, &mask, 1.0, &b2).unwrap();
        assert_eq!(collapsed.tokens.row(0), b2.as_slice());
    }

    #[test]
    fn interior_weight_scales_pull() {
        let s = state(&[vec![4.0, 0.0]]);
        let mask = ForegroundMask::new(vec![true], vec![0.5]).unwrap();
        let out = relax_foreground(&s, &mask, 0.5, &BackingLatent::zeros(2)).unwrap();
        assert_eq!(out.tokens.row(0), &[3.0, 0.0]);
    }

    #[test]
    fn euler_examples() {
        let s = state(&[vec![1.0, 1.0]]);
        let v = TokenMatrix::from_rows(&[vec![2.0, 0.0]]).unwrap();
        let out = euler_step(&s, &v, 0.25).unwrap();
        assert_eq!(out.tokens.row(0), &[0.5, 1.0]);
        assert_eq!(out.t, 0.75);
        let still = euler_step(&s, &TokenMatrix::zeros(1, 2), 0.25).unwrap();
        assert_eq!(still.tokens, s.tokens);
        assert_eq!(still.t, 0.75);

        let mut late = s.clone();
        late.t = 0.1;
        assert!(matches!(euler_step(&late, &v, 0.5), Err(SscError::Overshoot { .. })));
        assert!(euler_step(&s, &v, 0.0).is_err());
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(effective_temperature(0.3, 0.0, 0.3), 0.3);
        assert_eq!(effective_temperature(0.3, 1.0, 0.3), 0.0);
        let g = gamma(0.5, 1.0).unwrap();
        assert_eq!(effective_temperature(0.5, g, nominal_temperature(0.5)), 0.375);
    }

    #[test]
    fn schedule_grid() {
        let s = Schedule::new(4, StyleMode::Velocity, 1.0).unwrap();
        assert_eq!(s.t_grid(), vec![1.0, 0.75, 0.5, 0.25]);
        assert!(Schedule::new(0, StyleMode::Velocity, 1.0).is_err());
    }

    #[test]
    fn zero_field_no_relaxation_is_a_no_op() {
        let init = state(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let mask = ForegroundMask::from_bits(vec![true, false]);
        let ctl = Controller::new(Schedule::new(10, StyleMode::Velocity, 1.0).unwrap(), 0.0, 2).unwrap();
        let (out, rec) = ctl.run(&VelocityField::zero(2).unwrap(), &mask, None, &init).unwrap();
        assert_eq!(out.tokens, init.tokens);
        assert_eq!(out.t, 0.0);
        assert_eq!(rec.entries.len(), 10);
    }

    #[test]
    fn nonfinite_aborts_with_step() {
        let init = state(&[vec![1e308, 1e308]]);
        let mask = ForegroundMask::empty(1);
        let field = VelocityField::constant(vec![-1e308, -1e308]).unwrap();
        let ctl = Controller::new(Schedule::new(1, StyleMode::Velocity, 1.0).unwrap(), 0.0, 2).unwrap();
        match ctl.run(&field, &mask, None, &init) {
            Err(SscError::NonFinite { step }) => assert_eq!(step, 0),
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }
}
