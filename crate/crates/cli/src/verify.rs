//! `ssc verify`: runs property suites and the ablation, writes a JSON report.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use ssc_core::diagnostics::{
    ablation_suite, verify_prop1, verify_prop2, verify_prop3, verify_prop4, verify_theorem1,
    AblationConfig, AblationReport, Condition, PropositionReport,
};
use ssc_core::suite::StandardSetup;
use ssc_core::ExecMode;

use crate::config::{check_lambda, setup_hash};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Prop1,
    Prop2,
    Prop3,
    Prop4,
    Theorem1,
    Ablation,
    All,
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "prop1" => Suite::Prop1,
            "prop2" => Suite::Prop2,
            "prop3" => Suite::Prop3,
            "prop4" => Suite::Prop4,
            "theorem1" => Suite::Theorem1,
            "ablation" => Suite::Ablation,
            "all" => Suite::All,
            other => bail!(
                "unknown suite {other:?}; expected prop1, prop2, prop3, prop4, theorem1, ablation, or all"
            ),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Prop1 => "prop1",
            Suite::Prop2 => "prop2",
            Suite::Prop3 => "prop3",
            Suite::Prop4 => "prop4",
            Suite::Theorem1 => "theorem1",
            Suite::Ablation => "ablation",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub config_hash: String,
    pub setup: StandardSetup,
    pub passed: bool,
    pub propositions: Vec<PropositionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
}

pub fn run(suite: Suite, setup: &StandardSetup, exec: ExecMode) -> Result<VerifyReport> {
    check_lambda(setup.lambda_s)?;
    let mut propositions = Vec::new();
    let mut ablation = None;
    match suite {
        Suite::Prop1 => propositions.push(verify_prop1(setup)?),
        Suite::Prop2 => propositions.push(verify_prop2(setup)?),
        Suite::Prop3 => propositions.push(verify_prop3(setup)?),
        Suite::Prop4 => propositions.push(verify_prop4(setup)?),
        Suite::Theorem1 => propositions = verify_theorem1(setup, exec)?,
        Suite::Ablation | Suite::All => {
            if suite == Suite::All {
                propositions = verify_theorem1(setup, exec)?;
            }
            let cfg = AblationConfig {
                setup: setup.clone(),
                exec,
                ..AblationConfig::default()
            };
            ablation = Some(ablation_suite(&cfg)?);
        }
    }
    let passed = propositions.iter().all(|p| p.passed) && ablation.as_ref().is_none_or(|a| a.passed);
    Ok(VerifyReport {
        suite: suite.to_string(),
        config_hash: setup_hash(setup, &suite.to_string()),
        setup: setup.clone(),
        passed,
        propositions,
        ablation,
    })
}

/// One line per check, then one per ablation condition.
pub fn summary_lines(report: &VerifyReport) -> Vec<String> {
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut lines = Vec::new();
    for p in &report.propositions {
        for c in &p.checks {
            lines.push(format!(
                "{} {}/{}: max deviation {:.3e} (tol {:.1e})",
                mark(c.passed),
                p.id,
                c.name,
                c.max_deviation,
                c.tolerance
            ));
        }
    }
    if let Some(a) = &report.ablation {
        for c in Condition::ALL {
            let s = a.summary(c);
            lines.push(format!(
                "     ablation/{:?}: coverage {:.3}, pairwise cosine {:.4}, style cosine {:.4}",
                c, s.mean_coverage, s.mean_pairwise_cosine, s.mean_style_cosine
            ));
        }
        lines.push(format!(
            "{} ablation: coverage gap {:.3}, style wins {}/{}",
            mark(a.passed),
            a.coverage_gap,
            a.style_wins,
            a.summary(Condition::Full).seeds.len()
        ));
    }
    lines.push(format!("{} {} [{}]", mark(report.passed), report.suite, report.config_hash));
    lines
}

pub fn write_report(report: &VerifyReport, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in ["prop1", "prop2", "prop3", "prop4", "theorem1", "ablation", "all"] {
            assert_eq!(s.parse::<Suite>().unwrap().to_string(), s);
        }
        assert!("prop5".parse::<Suite>().is_err());
    }

    #[test]
    fn lambda_above_one_is_rejected() {
        let setup = StandardSetup {
            lambda_s: 1.5,
            ..StandardSetup::default()
        };
        let err = run(Suite::Prop2, &setup, ExecMode::Sequential).unwrap_err();
        assert!(err.to_string().contains("lambda"));
    }
}
