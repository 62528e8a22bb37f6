use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dyadlab::oscillation::Functional;
use dyadlab::DomainSpec;
use dyadlab_cli::config::{BerezinMode, CloudSpec, GeometryAudit, GridSpec};
use dyadlab_cli::experiments::{build_systems, execute, write_grid_file, Context};
use dyadlab_cli::report::{Check, Outcome, Status, Table};
use dyadlab_cli::run::{resolve_out_dir, run, write_manifest, write_outcome};
use dyadlab_cli::{parse_symbol, suite, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dyadlab", version, about = "Dyadic, oscillation and commutator experiments on model domains")]
struct Cli {
    /// Master seed; every stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Base config (JSON); command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    Ball,
    Ellipsoid,
    Perturbed,
}

#[derive(Args, Clone)]
struct DomainArgs {
    #[arg(long, value_enum)]
    domain: Option<DomainKind>,
    /// Complex dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Ellipsoid weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Perturbation size of the perturbed ball.
    #[arg(long, default_value_t = 0.1)]
    perturbation: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditArg {
    Ballbox,
    BbDistance,
    LocalConstancy,
    Rf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dyadic,
    Modified,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    Kobayashi,
    Dyadic,
    Berezin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Acceptance,
}

#[derive(Subcommand)]
enum Command {
    /// Build adjacent dyadic grids and write them with their calibration.
    BuildGrid {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        #[arg(long, default_value_t = 0.7)]
        delta: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        adjacent: usize,
        /// Uniform boundary sample size.
        #[arg(long, default_value_t = 300_000)]
        samples: usize,
        #[arg(long, default_value = "grid.bin")]
        out: PathBuf,
    },
    /// Per-level counts, exact audit and calibration of a grid file.
    GridAudit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "audit.csv")]
        out: PathBuf,
    },
    /// Geometry audits against the ball oracles.
    CheckGeometry {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_enum)]
        audit: AuditArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Rudin-Forelli exponent fit along a ray.
    RfAudit {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 3)]
        zdecades: usize,
        /// Points per scale of each local cloud.
        #[arg(long, default_value_t = 8000)]
        pts: usize,
        #[arg(long, default_value = "rf.csv")]
        out: PathBuf,
    },
    /// Modified or dyadic Berezin transform of a symbol.
    Berezin {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        symbol: String,
        #[arg(long, value_enum, default_value = "modified")]
        mode: ModeArg,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
    },
    /// Mean-oscillation curves.
    Bmo {
        #[command(flatten)]
        osc: OscArgs,
        #[arg(long, default_value = "osc.csv")]
        out: PathBuf,
    },
    /// Boundary-decay profiles and VMO classification.
    VmoProfile {
        #[command(flatten)]
        osc: OscArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1e-1, 1e-2, 1e-3])]
        thresholds: Vec<f64>,
        #[arg(long, default_value = "vmo.csv")]
        out: PathBuf,
    },
    /// Norm of `[b, P]` on the ball (p = 2) or its dictionary lower bound.
    Commutator {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "comm.csv")]
        out: PathBuf,
    },
    /// Tail norms below depth cuts and the peaking-family curve.
    Compactness {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-1, 1e-2, 1e-3])]
        cuts: Vec<f64>,
        #[arg(long, default_value = "tail.csv")]
        out: PathBuf,
    },
    /// Calibrate the Cauchy-Fantappie kernel and check reproduction.
    CfVerify {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value = "cf.csv")]
        out: PathBuf,
    },
    /// Run every experiment of `--config`, or a preset.
    Run {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
}

#[derive(Args, Clone)]
struct OscArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Symbols, comma separated (default: the BMO family).
    #[arg(long, value_delimiter = ',')]
    symbol: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    functional: Vec<FunctionalArg>,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct OperatorArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, value_delimiter = ',')]
    symbol: Vec<String>,
    /// Nyström cloud size.
    #[arg(long, default_value_t = 4000)]
    pts: usize,
}

impl DomainArgs {
    /// Overrides the base domain only where flags were given.
    fn apply(&self, base: &DomainSpec) -> Result<DomainSpec> {
        let n = self.n.unwrap_or(base.n());
        Ok(match (self.domain, base) {
            (None, DomainSpec::Ball { .. }) | (Some(DomainKind::Ball), _) => DomainSpec::Ball { n },
            (None, DomainSpec::Ellipsoid { weights, .. }) if self.weights.is_empty() => DomainSpec::Ellipsoid { n, weights: weights.clone() },
            (None, DomainSpec::PerturbedBall { eps, .. }) => DomainSpec::PerturbedBall { n, eps: *eps },
            (None, DomainSpec::Ellipsoid { .. }) | (Some(DomainKind::Ellipsoid), _) => {
                if self.weights.len() != n {
                    bail!("--weights needs {n} values");
                }
                DomainSpec::Ellipsoid { n, weights: self.weights.clone() }
            }
            (Some(DomainKind::Perturbed), _) => DomainSpec::PerturbedBall { n, eps: self.perturbation },
        })
    }
}

fn symbols(list: &[String]) -> Result<Vec<dyadlab::oscillation::Symbol>> {
    list.iter().map(|s| parse_symbol(s)).collect()
}

fn functional(f: FunctionalArg) -> Functional {
    match f {
        FunctionalArg::Kobayashi => Functional::Kobayashi,
        FunctionalArg::Dyadic => Functional::Dyadic,
        FunctionalArg::Berezin => Functional::Berezin,
    }
}

/// `dir/file` unless `file` is absolute.
fn place(dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        dir.join(file)
    }
}

/// Writes an outcome's first table to `out` and the others next to it as
/// `<stem>_<table>.csv`, then `<stem>.manifest.json` in the same directory.
fn finish(config: &ExperimentConfig, out: &Path, outcome: Outcome) -> Result<Status> {
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&dir)?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string();
    let mut tables = outcome.tables.into_iter();
    let mut entries = Vec::new();
    if let Some((_, first)) = tables.next() {
        first.write(out)?;
        let bytes = std::fs::read(out)?;
        let file = out.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        entries.push(dyadlab_cli::run::OutputEntry { file, rows: Some(first.rows.len()), sha256: dyadlab_cli::run::content_hash(&bytes) });
    }
    let rest = Outcome { tables: tables.collect(), checks: Vec::new() };
    entries.extend(write_outcome(&dir, &stem, &rest)?);
    let m = write_manifest(&dir.join(format!("{stem}.manifest.json")), config, entries, outcome.checks)?;
    for c in m.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    Ok(m.status)
}

fn single(config: ExperimentConfig, exp: Experiment, out: &Path) -> Result<Status> {
    let config = ExperimentConfig { experiments: vec![exp.clone()], ..config };
    config.validate()?;
    let mut ctx = Context::new(&config)?;
    let outcome = execute(&exp, &mut ctx)?;
    finish(&config, out, outcome)
}

fn acceptance(config: &ExperimentConfig, dir: &Path) -> Result<Status> {
    std::fs::create_dir_all(dir)?;
    let results = suite::run_all(config.seed, |r| println!("{}", r.line()));
    let table: Table = suite::results_table(&results);
    let outcome = Outcome {
        tables: vec![("criteria".into(), table)],
        checks: results.iter().map(|r| Check::soft(format!("criterion_{}", r.id), r.passed, r.detail.clone())).collect(),
    };
    let entries = write_outcome(dir, "acceptance", &outcome)?;
    Ok(write_manifest(&dir.join(dyadlab_cli::run::MANIFEST), config, entries, outcome.checks)?.status)
}

fn main_inner(cli: Cli) -> Result<Status> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let dir = resolve_out_dir(&config, cli.out_dir.as_deref());
    let base_domain = config.domain.clone();
    match cli.command {
        Command::BuildGrid { domain, s, delta, levels, adjacent, samples, out } => {
            config.domain = domain.apply(&base_domain)?;
            config.grid = GridSpec { s, delta_cal: delta, levels, adjacent, sample_count: samples, file: None };
            config.validate()?;
            let d = dyadlab::Domain::new(config.domain.clone())?;
            let systems = build_systems(&d, &config.grid, config.seed)?;
            let path = place(&dir, &out);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_grid_file(&path, &systems)?;
            let mut ctx_config = config.clone();
            ctx_config.grid.file = Some(path.clone());
            let bytes = std::fs::read(&path)?;
            let entry = dyadlab_cli::run::OutputEntry {
                file: out.display().to_string(),
                rows: None,
                sha256: dyadlab_cli::run::content_hash(&bytes),
            };
            let checks = systems
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let v = s.grid.exact_audit();
                    Check::hard(format!("grid{i}_exact_audit"), v == (0, 0, 0), format!("{v:?}"))
                })
                .collect();
            let manifest = path.with_extension("manifest.json");
            Ok(write_manifest(&manifest, &ctx_config, vec![entry], checks)?.status)
        }
        Command::GridAudit { input, out } => {
            config.grid.file = Some(input.clone());
            let first = dyadlab_cli::experiments::read_grid_file(&input)?;
            config.domain = first[0].grid.domain.spec().clone();
            single(config, Experiment::GridAudit, &place(&dir, &out))
        }
        Command::CheckGeometry { domain, audit, samples, out } => {
            config.domain = domain.apply(&base_domain)?;
            let audit = match audit {
                AuditArg::Ballbox => GeometryAudit::Ballbox,
                AuditArg::BbDistance => GeometryAudit::BbDistance,
                AuditArg::LocalConstancy => GeometryAudit::LocalConstancy,
                AuditArg::Rf => GeometryAudit::Rf,
            };
            single(config, Experiment::Geometry { audit, samples }, &place(&dir, &out))
        }
        Command::RfAudit { domain, a, b, zdecades, pts, out } => {
            config.domain = domain.apply(&base_domain)?;
            single(config, Experiment::RfAudit { a, b, zdecades, per_scale: pts }, &place(&dir, &out))
        }
        Command::Berezin { domain, symbol, mode, grid, out } => {
            config.domain = domain.apply(&base_domain)?;
            config.symbols = vec![parse_symbol(&symbol)?];
            if grid.is_some() {
                config.grid.file = grid;
            }
            let mode = match mode {
                ModeArg::Dyadic => BerezinMode::Dyadic,
                ModeArg::Modified => BerezinMode::Modified,
            };
            single(config, Experiment::Berezin { mode }, &place(&dir, &out))
        }
        Command::Bmo { osc, out } => {
            apply_osc(&mut config, &osc, &base_domain)?;
            single(config, Experiment::Bmo { r: osc.r, p: osc.p }, &place(&dir, &out))
        }
        Command::VmoProfile { osc, thresholds, out } => {
            apply_osc(&mut config, &osc, &base_domain)?;
            single(config, Experiment::VmoProfile { r: osc.r, p: osc.p, thresholds }, &place(&dir, &out))
        }
        Command::Commutator { op, p, out } => {
            apply_op(&mut config, &op, &base_domain)?;
            single(config, Experiment::Commutator { p }, &place(&dir, &out))
        }
        Command::Compactness { op, cuts, out } => {
            apply_op(&mut config, &op, &base_domain)?;
            single(config, Experiment::Compactness { cuts }, &place(&dir, &out))
        }
        Command::CfVerify { domain, eps, out } => {
            config.domain = domain.apply(&base_domain)?;
            single(config, Experiment::CfVerify { eps }, &place(&dir, &out))
        }
        Command::Run { preset: Some(Preset::Acceptance) } => acceptance(&config, &dir),
        Command::Run { preset: None } => {
            if cli.config.is_none() {
                bail!("run needs --config or --preset");
            }
            Ok(run(&config, &dir)?.status)
        }
    }
}

fn apply_osc(config: &mut ExperimentConfig, osc: &OscArgs, base: &DomainSpec) -> Result<()> {
    config.domain = osc.domain.apply(base)?;
    if !osc.symbol.is_empty() {
        config.symbols = symbols(&osc.symbol)?;
    }
    if !osc.functional.is_empty() {
        config.functionals = osc.functional.iter().map(|&f| functional(f)).collect();
    }
    if osc.grid.is_some() {
        config.grid.file = osc.grid.clone();
    }
    Ok(())
}

fn apply_op(config: &mut ExperimentConfig, op: &OperatorArgs, base: &DomainSpec) -> Result<()> {
    config.domain = op.domain.apply(base)?;
    if !op.symbol.is_empty() {
        config.symbols = symbols(&op.symbol)?;
    }
    config.cloud = CloudSpec { points: op.pts, ..config.cloud.clone() };
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors exit with 1; clap's own code 2 is reserved for soft fails.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
