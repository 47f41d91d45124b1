//! Subcommand definitions and their JSON output.
//!
//! Exit codes: 0 success, 1 domain failure, 2 I/O, syntax or usage error.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lenslex::grpo::{group_advantages, GroupRewards};
use lenslex::optimizer::{refine, FreeVariables, MeritConfig, OptimizeError, SpotModel};
use lenslex::prescription::{mask, parse_with, GlassCatalog, MaskSite, Prescription, SpecHeader, Specification};
use lenslex::render::render_svg;
use lenslex::reward::{score_text, RewardBreakdown, RewardOptions};
use lenslex::tracer::{spot_paraxial, spot_real, trace_first_order, OpticalSystem};
use lenslex::validation::validate;

const CATALOG_ENV: &str = "LENSLEX_CATALOG";

#[derive(Debug, Parser)]
#[command(name = "lenslex", version, about = "Lens prescription validation, tracing and reward scoring")]
pub struct Cli {
    /// Emit JSON on standard output (the only output format).
    #[arg(long, global = true, default_value_t = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the format and structure checks.
    Validate { path: PathBuf },
    /// First-order trace: EFFL, BFL, image-plane height, total track.
    Trace {
        path: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Stop-aimed meridional spot sizes.
    Spot {
        path: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value_t = SpotArg::Paraxial)]
        spot: SpotArg,
    },
    /// Hierarchical reward of one candidate.
    Score {
        path: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Score a manifest of candidates and compute group-centered advantages.
    ScoreBatch {
        manifest: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Damped least-squares refinement of curvatures and air gaps.
    Optimize {
        path: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, value_enum, default_value_t = FreeArg::Both)]
        free: FreeArg,
        #[arg(long, value_enum, default_value_t = SpotArg::Paraxial)]
        spot: SpotArg,
        /// Also write the refined prescription here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hide a fraction of the numeric fields behind MASK tokens.
    Mask {
        path: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the masked prescription here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG layout with real ray fans.
    Render {
        path: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Demand overrides; each one wins over the document's SPEC line.
#[derive(Debug, Clone, Copy, Args)]
struct SpecArgs {
    /// Target effective focal length, mm.
    #[arg(long)]
    effl: Option<f64>,
    /// Full field of view, degrees.
    #[arg(long)]
    fov: Option<f64>,
    /// F-number.
    #[arg(long)]
    fno: Option<f64>,
}

impl SpecArgs {
    fn header(&self) -> SpecHeader {
        SpecHeader {
            effl: self.effl,
            fno: self.fno,
            fov: self.fov,
            totr: None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpotArg {
    Paraxial,
    Real,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FreeArg {
    Radii,
    Gaps,
    Both,
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable input, bad syntax or unusable arguments.
    Input(String),
    /// Valid input that the requested operation cannot handle.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Domain(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Manifest {
    spec: SpecHeader,
    candidates: Vec<Candidate>,
}

#[derive(Debug, Deserialize)]
struct Candidate {
    id: String,
    path: PathBuf,
}

#[derive(Debug, Serialize)]
struct BatchEntry {
    id: String,
    reward_breakdown: RewardBreakdown,
    advantage: f64,
}

#[derive(Debug, Serialize)]
struct MaskOutput {
    prompt: String,
    mask_sites: Vec<MaskSite>,
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let catalog = load_catalog()?;
    match cli.command {
        Command::Validate { path } => {
            let p = read_prescription(&path, &catalog)?;
            let report = validate(&p);
            emit(&report)?;
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Trace { path, spec } => {
            let p = read_prescription(&path, &catalog)?;
            let spec = resolve(&p, &spec)?;
            let report = trace_first_order(&p, &spec).map_err(domain)?;
            emit(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spot { path, spec, spot } => {
            let p = read_prescription(&path, &catalog)?;
            let spec = resolve(&p, &spec)?;
            let sys = OpticalSystem::from_prescription(&p).map_err(domain)?;
            let report = match spot {
                SpotArg::Paraxial => spot_paraxial(&sys, &spec),
                SpotArg::Real => spot_real(&sys, &spec),
            }
            .map_err(domain)?;
            emit(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { path, spec } => {
            let text = read_text(&path)?;
            let breakdown = score_text(&text, &spec.header(), &catalog, &RewardOptions::default())
                .map_err(|e| CliError::Input(e.to_string()))?;
            emit(&breakdown)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ScoreBatch { manifest, spec } => {
            let entries = score_batch(&manifest, &spec, &catalog)?;
            emit(&entries)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            path,
            spec,
            iters,
            free,
            spot,
            out,
        } => {
            let p = read_prescription(&path, &catalog)?;
            let spec = resolve(&p, &spec)?;
            if iters == 0 {
                return Err(CliError::Input("--iters must be at least 1".into()));
            }
            let cfg = MeritConfig {
                max_iters: iters,
                free_variables: match free {
                    FreeArg::Radii => FreeVariables::Radii,
                    FreeArg::Gaps => FreeVariables::AirGaps,
                    FreeArg::Both => FreeVariables::Both,
                },
                spot: match spot {
                    SpotArg::Paraxial => SpotModel::Paraxial,
                    SpotArg::Real => SpotModel::Real,
                },
                ..MeritConfig::default()
            };
            match refine(&p, &spec, &cfg) {
                Ok(result) => {
                    if let Some(out) = out {
                        write_file(&out, &result.refined.to_oddl())?;
                    }
                    emit(&result)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(OptimizeError::NotImprovable(result)) => {
                    emit(&result)?;
                    eprintln!("lenslex: {}", OptimizeError::NotImprovable(result));
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(domain(e)),
            }
        }
        Command::Mask { path, ratio, seed, out } => {
            let p = read_prescription(&path, &catalog)?;
            let masked = mask(&p, ratio, seed).map_err(domain)?;
            let prompt = masked.to_oddl();
            if let Some(out) = out {
                write_file(&out, &prompt)?;
            }
            emit(&MaskOutput {
                prompt,
                mask_sites: masked.mask_sites,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Render { path, spec, out } => {
            let p = read_prescription(&path, &catalog)?;
            let spec = resolve(&p, &spec)?;
            let svg = render_svg(&p, &spec).map_err(domain)?;
            match out {
                Some(out) => write_file(&out, &svg)?,
                None => write_stdout(&svg)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn score_batch(manifest_path: &Path, flags: &SpecArgs, catalog: &GlassCatalog) -> Result<Vec<BatchEntry>, CliError> {
    let text = read_text(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: invalid manifest: {e}", manifest_path.display())))?;
    if manifest.candidates.is_empty() {
        return Err(CliError::Input("manifest lists no candidates".into()));
    }
    let mut seen = HashSet::new();
    for c in &manifest.candidates {
        if !seen.insert(c.id.as_str()) {
            return Err(CliError::Input(format!("duplicate candidate id {:?}", c.id)));
        }
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let overrides = merge(&manifest.spec, &flags.header());
    let opts = RewardOptions::default();
    let breakdowns: Vec<RewardBreakdown> = manifest
        .candidates
        .par_iter()
        .map(|c| {
            let path = base.join(&c.path);
            match fs::read_to_string(&path) {
                Ok(text) => score_text(&text, &overrides, catalog, &opts)
                    .unwrap_or_else(|e| RewardBreakdown::rejected(e.to_string())),
                Err(e) => RewardBreakdown::rejected(format!("cannot read {}: {e}", path.display())),
            }
        })
        .collect();
    let rewards = GroupRewards::new(breakdowns.iter().map(|b| b.r_lex).collect())
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let advantages = group_advantages(&rewards);
    Ok(manifest
        .candidates
        .into_iter()
        .zip(breakdowns)
        .zip(advantages)
        .map(|((c, reward_breakdown), advantage)| BatchEntry {
            id: c.id,
            reward_breakdown,
            advantage,
        })
        .collect())
}

/// Keys set in `top` win over `base`.
fn merge(base: &SpecHeader, top: &SpecHeader) -> SpecHeader {
    SpecHeader {
        effl: top.effl.or(base.effl),
        fno: top.fno.or(base.fno),
        fov: top.fov.or(base.fov),
        totr: top.totr.or(base.totr),
    }
}

fn load_catalog() -> Result<GlassCatalog, CliError> {
    match std::env::var_os(CATALOG_ENV) {
        Some(path) => GlassCatalog::load(&path)
            .map_err(|e| CliError::Input(format!("{CATALOG_ENV}={}: {e}", Path::new(&path).display()))),
        None => Ok(GlassCatalog::builtin().clone()),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_prescription(path: &Path, catalog: &GlassCatalog) -> Result<Prescription, CliError> {
    let text = read_text(path)?;
    parse_with(&text, catalog).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn resolve(p: &Prescription, flags: &SpecArgs) -> Result<Specification, CliError> {
    p.header
        .resolve(&flags.header())
        .map_err(|e| CliError::Input(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn domain(e: impl fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn emit<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Domain(e.to_string()))?;
    text.push('\n');
    write_stdout(&text)
}

fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Input(format!("cannot write standard output: {e}")))
}
