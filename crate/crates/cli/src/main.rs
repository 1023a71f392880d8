use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ssc_cli::config::{parse_grid, ConfigFile, RunConfig};
use ssc_cli::verify::Suite;
use ssc_cli::{generate, stylebank, verify};
use ssc_core::{ExecMode, Grid, StyleMode};

#[derive(Parser)]
#[command(name = "ssc", version, about = "Layout-aware background generation with foreground state-space control")]
struct Cli {
    /// Run pages and suites one at a time.
    #[arg(long, global = true, env = "SSC_SEQUENTIAL")]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate backgrounds and composites for every page of a layout.
    Generate(GenerateArgs),
    /// Run property checks or the ablation; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Build or list a style bank.
    #[command(subcommand)]
    Stylebank(BankCommand),
}

/// Settings shared by generate and verify. Unset values fall back to the
/// config file, then to the defaults.
#[derive(Args)]
struct Common {
    #[arg(long, env = "SSC_STEPS")]
    steps: Option<usize>,
    #[arg(long = "lambda", env = "SSC_LAMBDA")]
    lambda_s: Option<f64>,
    #[arg(long, env = "SSC_STYLE_CAP")]
    style_cap: Option<f64>,
    #[arg(long, env = "SSC_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SSC_SCENE_SEED")]
    scene_seed: Option<u64>,
    /// Token grid as HxW.
    #[arg(long, env = "SSC_GRID", value_parser = parse_grid)]
    grid: Option<Grid>,
    /// Latent channels per token.
    #[arg(long = "dim", env = "SSC_DIM")]
    d: Option<usize>,
    #[arg(long, env = "SSC_PATCH")]
    patch: Option<usize>,
    #[arg(long, env = "SSC_BOUNDARY_WEIGHT")]
    boundary_weight: Option<f64>,
    /// JSON config file; flags and SSC_* variables take precedence.
    #[arg(long, env = "SSC_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, env = "SSC_LAYOUT")]
    layout: Option<PathBuf>,
    #[arg(long, env = "SSC_STYLE")]
    style: Option<String>,
    /// Style bank file; the built-in bank is used when absent.
    #[arg(long, env = "SSC_BANK")]
    bank: Option<PathBuf>,
    #[arg(long, env = "SSC_STYLE_MODE")]
    style_mode: Option<StyleMode>,
    #[arg(long, env = "SSC_OUT")]
    out: Option<PathBuf>,
    /// Overwrite an existing output directory.
    #[arg(long, env = "SSC_FORCE")]
    force: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// prop1, prop2, prop3, prop4, theorem1, ablation, or all.
    suite: Suite,
    /// Where to write the JSON report.
    #[arg(long, env = "SSC_REPORT", default_value = "ssc-out/verify.json")]
    report: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum BankCommand {
    /// Write a bank with one unit direction per label.
    Build {
        /// Comma-separated labels; the seven default categories when absent.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        #[arg(long = "dim", env = "SSC_DIM", default_value_t = 16)]
        d: usize,
        #[arg(long, env = "SSC_SEED", default_value_t = 2024)]
        seed: u64,
        #[arg(long = "lambda", env = "SSC_LAMBDA", default_value_t = 0.8)]
        lambda_s: f64,
        #[arg(long, env = "SSC_BANK", default_value = "style-bank.json")]
        path: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print labels and direction norms.
    List {
        #[arg(long, env = "SSC_BANK", default_value = "style-bank.json")]
        path: PathBuf,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        ConfigFile::load(path)?.apply(&mut cfg);
    }
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = common.$f { cfg.$f = v; } )* };
    }
    take!(steps, lambda_s, style_cap, seed, scene_seed, grid, d, patch, boundary_weight);
    Ok(cfg)
}

fn exec_mode(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

fn run(cli: Cli) -> Result<bool> {
    let exec = exec_mode(cli.sequential);
    match cli.command {
        Command::Generate(args) => {
            let mut cfg = resolve(&args.common)?;
            if let Some(v) = args.layout {
                cfg.layout = v;
            }
            if args.style.is_some() {
                cfg.style = args.style;
            }
            if args.bank.is_some() {
                cfg.bank = args.bank;
            }
            if let Some(v) = args.style_mode {
                cfg.style_mode = v;
            }
            if let Some(v) = args.out {
                cfg.out = v;
            }
            cfg.force = args.force;
            let outcome = generate::run(&cfg, exec)?;
            for (page, m) in &outcome.metrics.pages {
                match m.wcag_coverage {
                    Some(c) => println!("page {page}: wcag coverage {c:.3} over {} boxes", m.boxes.len()),
                    None => println!("page {page}: wcag coverage undefined (no measurable text boxes)"),
                }
            }
            println!("wrote {} files to {}", outcome.files.len(), outcome.dir.display());
            Ok(true)
        }
        Command::Verify(args) => {
            let cfg = resolve(&args.common)?;
            let report = verify::run(args.suite, &cfg.setup(), exec)?;
            for line in verify::summary_lines(&report) {
                println!("{line}");
            }
            verify::write_report(&report, &args.report)?;
            println!("report: {}", args.report.display());
            Ok(report.passed)
        }
        Command::Stylebank(BankCommand::Build { labels, d, seed, lambda_s, path, force }) => {
            let labels = labels.unwrap_or_else(stylebank::default_labels);
            let bank = stylebank::build(&labels, d, seed, lambda_s, &path, force)?;
            println!("wrote {} directions (d = {d}) to {}", bank.len(), path.display());
            Ok(true)
        }
        Command::Stylebank(BankCommand::List { path }) => {
            for line in stylebank::list_lines(&path)? {
                println!("{line}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
