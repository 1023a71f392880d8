//! Closed-form drift fields standing in for the learned velocity.
//!
//! Sign convention: the state evolves as `dx/dt = -v(x, t)` with `t` running
//! from 1 down to 0, so an Euler step is `x <- x - v * dt`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SscError};
use crate::exec::{self, ExecMode};
use crate::latent::{dot, norm, LatentState, TokenMatrix};

/// Default bound on `|Re(lambda)|` for linear fields.
pub const DEFAULT_SPECTRAL_CAP: f64 = 10.0;

/// Serialized form of a field, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Constant {
        c: Vec<f64>,
    },
    Linear {
        a: Vec<Vec<f64>>,
        mu: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spectral_cap: Option<f64>,
    },
    GaussianMixtureScore {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variance: f64,
        #[serde(default)]
        time_scaled: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Mixture {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variance: f64,
    time_scaled: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant(Vec<f64>),
    Linear {
        a: Vec<Vec<f64>>,
        mu: Vec<f64>,
        cap: f64,
    },
    Mixture(Mixture),
}

/// A validated velocity field over `d`-dimensional tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldSpec", into = "FieldSpec")]
pub struct VelocityField {
    kind: Kind,
    d: usize,
}

impl TryFrom<FieldSpec> for VelocityField {
    type Error = SscError;

    fn try_from(spec: FieldSpec) -> Result<Self> {
        match spec {
            FieldSpec::Constant { c } => VelocityField::constant(c),
            FieldSpec::Linear {
                a,
                mu,
                spectral_cap,
            } => VelocityField::linear_capped(a, mu, spectral_cap.unwrap_or(DEFAULT_SPECTRAL_CAP)),
            FieldSpec::GaussianMixtureScore {
                weights,
                means,
                variance,
                time_scaled,
            } => VelocityField::mixture(weights, means, variance, time_scaled),
        }
    }
}

impl From<VelocityField> for FieldSpec {
    fn from(f: VelocityField) -> Self {
        match f.kind {
            Kind::Constant(c) => FieldSpec::Constant { c },
            Kind::Linear { a, mu, cap } => FieldSpec::Linear {
                a,
                mu,
                spectral_cap: Some(cap),
            },
            Kind::Mixture(m) => FieldSpec::GaussianMixtureScore {
                weights: m.weights,
                means: m.means,
                variance: m.variance,
                time_scaled: m.time_scaled,
            },
        }
    }
}

fn finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SscError::InvalidConfig(format!("{what} has non-finite entries")))
    }
}

impl VelocityField {
    pub fn constant(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(SscError::InvalidConfig("constant field needs d >= 1".into()));
        }
        finite("constant field", &c)?;
        let d = c.len();
        Ok(VelocityField {
            kind: Kind::Constant(c),
            d,
        })
    }

    pub fn zero(d: usize) -> Result<Self> {
        Self::constant(vec![0.0; d])
    }

    /// `v(x) = A (x - mu)` with the default spectral cap.
    pub fn linear(a: Vec<Vec<f64>>, mu: Vec<f64>) -> Result<Self> {
        Self::linear_capped(a, mu, DEFAULT_SPECTRAL_CAP)
    }

    /// `v(x) = A (x - mu)`, rejecting `A` when some eigenvalue has
    /// `|Re(lambda)| > cap`.
    pub fn linear_capped(a: Vec<Vec<f64>>, mu: Vec<f64>, cap: f64) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(SscError::InvalidConfig("linear field needs d >= 1".into()));
        }
        check_dim("linear field rows", d, a.len())?;
        for row in &a {
            check_dim("linear field columns", d, row.len())?;
            finite("linear field matrix", row)?;
        }
        finite("linear field center", &mu)?;
        if !(cap > 0.0) {
            return Err(SscError::InvalidConfig(format!("spectral cap must be > 0, got {cap}")));
        }
        let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
        let worst = m
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re.abs())
            .fold(0.0_f64, f64::max);
        if !(worst <= cap) {
            return Err(SscError::InvalidConfig(format!(
                "linear field eigenvalue real part {worst} exceeds cap {cap}"
            )));
        }
        Ok(VelocityField {
            kind: Kind::Linear { a, mu, cap },
            d,
        })
    }

    /// Negated score of an isotropic Gaussian mixture.
    pub fn mixture(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variance: f64,
        time_scaled: bool,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(SscError::InvalidConfig("mixture needs at least one component".into()));
        }
        check_dim("mixture means", weights.len(), means.len())?;
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(SscError::InvalidConfig("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SscError::InvalidConfig(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(SscError::InvalidConfig(format!(
                "mixture variance must be > 0, got {variance}"
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(SscError::InvalidConfig("mixture needs d >= 1".into()));
        }
        for mean in &means {
            check_dim("mixture mean", d, mean.len())?;
            finite("mixture mean", mean)?;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(VelocityField {
            kind: Kind::Mixture(Mixture {
                weights,
                log_weights,
                means,
                variance,
                time_scaled,
            }),
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Constant(_) => "constant",
            Kind::Linear { .. } => "linear",
            Kind::Mixture(_) => "gaussian-mixture-score",
        }
    }

    /// True for fields with `v(x + u) = v(x)` for every offset `u`.
    pub fn is_translation_equivariant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// Writes `v(x, t)` for one token into `out`.
    pub fn eval_token(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match &self.kind {
            Kind::Constant(c) => out.copy_from_slice(c),
            Kind::Linear { a, mu, .. } => {
                for (o, row) in out.iter_mut().zip(a) {
                    *o = row.iter().zip(x.iter().zip(mu)).map(|(aij, (xj, mj))| aij * (xj - mj)).sum();
                }
            }
            Kind::Mixture(m) => {
                let (scale, var) = m.at_time(t);
                // responsibilities via a stable softmax
                let logits: Vec<f64> = m
                    .means
                    .iter()
                    .zip(&m.log_weights)
                    .map(|(mean, lw)| {
                        let d2: f64 = x.iter().zip(mean).map(|(xi, mi)| (xi - scale * mi).powi(2)).sum();
                        lw - d2 / (2.0 * var)
                    })
                    .collect();
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let z: f64 = e.iter().sum();
                out.fill(0.0);
                for (ei, mean) in e.iter().zip(&m.means) {
                    let r = ei / z;
                    for ((o, xi), mi) in out.iter_mut().zip(x).zip(mean) {
                        *o += r * (xi - scale * mi) / var;
                    }
                }
            }
        }
    }

    /// Per-token velocity for the whole state.
    pub fn eval(&self, state: &LatentState, t: f64) -> Result<TokenMatrix> {
        self.eval_with(state, t, ExecMode::default())
    }

    pub fn eval_with(&self, state: &LatentState, t: f64, mode: ExecMode) -> Result<TokenMatrix> {
        if !(0.0..=1.0).contains(&t) {
            return Err(SscError::TimeOutOfRange(t));
        }
        check_dim("field dimension", self.d, state.dim())?;
        let mut out = TokenMatrix::zeros(state.len(), self.d);
        let d = self.d;
        exec::for_each_row(mode, out.as_mut_slice(), d, |k, row| {
            self.eval_token(state.tokens.row(k), t, row);
        });
        Ok(out)
    }

    /// `log p(x)` of the mixture density at time `t`; `None` for other kinds.
    pub fn log_density(&self, x: &[f64], t: f64) -> Option<f64> {
        let Kind::Mixture(m) = &self.kind else {
            return None;
        };
        let (scale, var) = m.at_time(t);
        let logits: Vec<f64> = m
            .means
            .iter()
            .zip(&m.log_weights)
            .map(|(mean, lw)| {
                let d2: f64 = x.iter().zip(mean).map(|(xi, mi)| (xi - scale * mi).powi(2)).sum();
                lw - d2 / (2.0 * var)
            })
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        Some(lse - 0.5 * self.d as f64 * (2.0 * std::f64::consts::PI * var).ln())
    }
}

impl Mixture {
    /// Mean scale and variance at time `t`. Time-scaled mixtures follow the
    /// straight-line interpolation `x_t = (1 - t) x_0 + t * eps`.
    fn at_time(&self, t: f64) -> (f64, f64) {
        if self.time_scaled {
            let s = 1.0 - t;
            (s, s * s * self.variance + t * t)
        } else {
            (1.0, self.variance)
        }
    }
}

/// Splits each row of `v` into its component along the unit vector `s` and
/// the orthogonal remainder.
pub fn decompose(v: &TokenMatrix, s: &[f64]) -> Result<(TokenMatrix, TokenMatrix)> {
    check_dim("direction", v.cols(), s.len())?;
    let n = norm(s);
    if (n - 1.0).abs() > 1e-9 {
        return Err(SscError::NonUnit {
            label: "decompose".into(),
            norm: n,
        });
    }
    let mut par = TokenMatrix::zeros(v.rows(), v.cols());
    let mut perp = TokenMatrix::zeros(v.rows(), v.cols());
    for k in 0..v.rows() {
        let row = v.row(k);
        let c = dot(row, s);
        for ((p, q), (&x, &sj)) in par
            .row_mut(k)
            .iter_mut()
            .zip(perp.row_mut(k).iter_mut())
            .zip(row.iter().zip(s))
        {
            *p = c * sj;
            *q = x - *p;
        }
    }
    Ok((par, perp))
}
