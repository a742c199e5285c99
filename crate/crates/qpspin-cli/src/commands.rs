//! The experiment subcommands: grid expansion, cost guard, engines and
//! deterministic row output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use qpspin::disorder::DisorderVariant;
use qpspin::geometry::{self, ScaleChoice};
use qpspin::pressure::{
    self, critical_field, ln_cosh, one_over_p_correction, qrem_pressure, rem_pressure,
    PressureRecord, TraceEngine,
};

use crate::config::{
    parse_grid, parse_usize_list, resolve, resolve_output, resolve_required, resolve_string,
    ConfigFile,
};

pub enum AppError {
    Config(String),
    Engine(qpspin::Error),
}

impl From<qpspin::Error> for AppError {
    fn from(e: qpspin::Error) -> Self {
        AppError::Engine(e)
    }
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

/// Rough wall-clock ceiling (in estimated seconds) above which a command
/// refuses to run; prevents accidental dense requests at large N.
const DEFAULT_MAX_COST: f64 = 600.0;

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Flat key=value config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent). Relative paths are joined onto
    /// $QPSPIN_OUTPUT_DIR when that variable is set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format: csv (header row) or json (newline-delimited records).
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Cost ceiling in estimated seconds; commands refuse to start above it.
    #[arg(long)]
    pub max_cost: Option<f64>,
    /// Record wall-clock times in output rows. Off by default so that
    /// reruns of the same config produce byte-identical files.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum OutFormat {
    Csv,
    Json,
}

struct Context {
    cfg: ConfigFile,
    format: OutFormat,
    output: Option<PathBuf>,
    max_cost: f64,
    timing: bool,
}

impl Context {
    fn new(common: &CommonArgs) -> Result<Self, AppError> {
        let cfg = match &common.config {
            Some(path) => ConfigFile::load(path).map_err(config_err)?,
            None => ConfigFile::empty(),
        };
        let format = match resolve_string(common.format.clone(), &cfg, "format")
            .unwrap_or_else(|| "csv".into())
            .as_str()
        {
            "csv" => OutFormat::Csv,
            "json" => OutFormat::Json,
            other => return Err(config_err(format!("unknown format `{other}`"))),
        };
        let threads = resolve(common.threads, &cfg, "threads", 0).map_err(config_err)?;
        if threads > 0 {
            // Ignore the error when a pool is already installed (tests).
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
        let max_cost =
            resolve(common.max_cost, &cfg, "max-cost", DEFAULT_MAX_COST).map_err(config_err)?;
        Ok(Self {
            output: resolve_output(common.output.clone()),
            cfg,
            format,
            max_cost,
            timing: common.timing,
        })
    }

    fn guard_cost(&self, estimate: f64) -> Result<(), AppError> {
        if estimate > self.max_cost {
            return Err(config_err(format!(
                "estimated cost {estimate:.1}s exceeds ceiling {:.1}s; raise --max-cost to proceed",
                self.max_cost
            )));
        }
        Ok(())
    }

    fn emit<R: Row>(&self, rows: &[R]) -> Result<(), AppError> {
        let mut text = String::new();
        match self.format {
            OutFormat::Csv => {
                text.push_str(&R::csv_header().join(","));
                text.push('\n');
                for row in rows {
                    text.push_str(&row.csv_cells().join(","));
                    text.push('\n');
                }
            }
            OutFormat::Json => {
                for row in rows {
                    let line = serde_json::to_string(row)
                        .map_err(|e| config_err(format!("serialization failed: {e}")))?;
                    text.push_str(&line);
                    text.push('\n');
                }
            }
        }
        match &self.output {
            Some(path) => std::fs::write(path, text).map_err(|e| AppError::Engine(e.into()))?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

trait Row: Serialize {
    fn csv_header() -> Vec<&'static str>;
    fn csv_cells(&self) -> Vec<String>;
}

fn cell_f64(x: f64) -> String {
    format!("{x}")
}

fn cell_opt_f64(x: Option<f64>) -> String {
    x.map(cell_f64).unwrap_or_default()
}

fn cell_opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_variant(
    name: &str,
    p: usize,
) -> Result<DisorderVariant, AppError> {
    match name {
        "strict" => Ok(DisorderVariant::StrictPSpin { p }),
        "full" => Ok(DisorderVariant::FullPSpin { p }),
        "rem" => Ok(DisorderVariant::Rem),
        other => Err(config_err(format!(
            "unknown variant `{other}` (expected strict, full or rem)"
        ))),
    }
}

#[derive(Clone, Copy)]
enum EngineChoice {
    Auto,
    Dense,
    Stochastic,
}

fn parse_engine(name: &str) -> Result<EngineChoice, AppError> {
    match name {
        "auto" => Ok(EngineChoice::Auto),
        "dense" => Ok(EngineChoice::Dense),
        "stochastic" => Ok(EngineChoice::Stochastic),
        other => Err(config_err(format!(
            "unknown engine `{other}` (expected auto, dense or stochastic)"
        ))),
    }
}

fn concrete_engine(choice: EngineChoice, n: usize, probes: usize, krylov_dim: usize) -> TraceEngine {
    match choice {
        EngineChoice::Dense => TraceEngine::Dense,
        EngineChoice::Stochastic => TraceEngine::Stochastic { probes, krylov_dim },
        EngineChoice::Auto => {
            if n <= 12 {
                TraceEngine::Dense
            } else {
                TraceEngine::Stochastic { probes, krylov_dim }
            }
        }
    }
}

/// Estimated seconds for one quenched grid point.
fn point_cost(n: usize, gamma: f64, engine: TraceEngine, num_disorder: usize) -> f64 {
    let dim = (1u64 << n) as f64;
    let per = if gamma == 0.0 {
        dim * n as f64 / 5e8
    } else {
        match engine {
            TraceEngine::Dense => (dim / 4096.0).powi(3) * 17.0,
            TraceEngine::Stochastic { probes, krylov_dim } => {
                let k = krylov_dim as f64;
                probes as f64 * (2.0 * k * dim * n as f64 + 2.0 * k * k * dim) / 5e8
            }
        }
    };
    per * num_disorder as f64
}

// ── pressure ─────────────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct PressureArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Disorder variant: strict, full or rem.
    #[arg(long)]
    pub variant: Option<String>,
    /// Interaction orders, comma list (ignored for rem).
    #[arg(long)]
    pub p: Option<String>,
    /// Spin counts, comma list.
    #[arg(long)]
    pub n: Option<String>,
    /// Inverse-temperature grid (`a,b,c` or `lo:hi:count`).
    #[arg(long)]
    pub beta: Option<String>,
    /// Transverse-field grid.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub num_disorder: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Trace engine: auto, dense or stochastic.
    #[arg(long)]
    pub engine: Option<String>,
}

struct SweepParams {
    variant_name: String,
    ps: Vec<usize>,
    ns: Vec<usize>,
    betas: Vec<f64>,
    gammas: Vec<f64>,
    num_disorder: usize,
    probes: usize,
    krylov_dim: usize,
    base_seed: u64,
    engine: EngineChoice,
}

impl SweepParams {
    fn from(args: &PressureArgs, ctx: &Context) -> Result<Self, AppError> {
        let cfg = &ctx.cfg;
        let variant_name =
            resolve_string(args.variant.clone(), cfg, "variant").unwrap_or_else(|| "rem".into());
        let ps = match resolve_string(args.p.clone(), cfg, "p") {
            Some(spec) => parse_usize_list(&spec).map_err(config_err)?,
            None => vec![2],
        };
        let ns = match resolve_string(args.n.clone(), cfg, "n") {
            Some(spec) => parse_usize_list(&spec).map_err(config_err)?,
            None => return Err(config_err("missing required option `n`")),
        };
        let betas = parse_grid(
            &resolve_string(args.beta.clone(), cfg, "beta")
                .ok_or_else(|| config_err("missing required option `beta`"))?,
        )
        .map_err(config_err)?;
        let gammas = parse_grid(
            &resolve_string(args.gamma.clone(), cfg, "gamma").unwrap_or_else(|| "0".into()),
        )
        .map_err(config_err)?;
        if ps.is_empty() || ns.is_empty() || betas.is_empty() || gammas.is_empty() {
            return Err(config_err("grids must be nonempty"));
        }
        Ok(Self {
            variant_name,
            ps,
            ns,
            betas,
            gammas,
            num_disorder: resolve(args.num_disorder, cfg, "num-disorder", 8).map_err(config_err)?,
            probes: resolve(args.probes, cfg, "probes", 16).map_err(config_err)?,
            krylov_dim: resolve(args.krylov_dim, cfg, "krylov-dim", 60).map_err(config_err)?,
            base_seed: resolve(args.base_seed, cfg, "base-seed", 1).map_err(config_err)?,
            engine: parse_engine(
                &resolve_string(args.engine.clone(), cfg, "engine").unwrap_or_else(|| "auto".into()),
            )?,
        })
    }

    /// (variant, n, beta, gamma) grid in deterministic nested order.
    fn points(&self) -> Result<Vec<(DisorderVariant, usize, f64, f64)>, AppError> {
        let mut out = Vec::new();
        let ps: &[usize] = if self.variant_name == "rem" {
            &self.ps[..1]
        } else {
            &self.ps
        };
        for &p in ps {
            let variant = parse_variant(&self.variant_name, p)?;
            for &n in &self.ns {
                for &beta in &self.betas {
                    for &gamma in &self.gammas {
                        out.push((variant, n, beta, gamma));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct PressureRow(PressureRecord);

impl Row for PressureRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "method",
            "variant",
            "p",
            "n",
            "beta",
            "gamma",
            "value",
            "stderr",
            "num_samples",
            "seed_lo",
            "seed_hi",
            "wall_time_s",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        let r = &self.0;
        vec![
            r.method.clone(),
            r.variant.clone(),
            cell_opt_usize(r.p),
            r.n.to_string(),
            cell_f64(r.beta),
            cell_f64(r.gamma),
            cell_f64(r.value),
            cell_f64(r.stderr),
            r.num_samples.to_string(),
            r.seed_range[0].to_string(),
            r.seed_range[1].to_string(),
            cell_f64(r.wall_time_s),
        ]
    }
}

pub fn run_pressure(args: PressureArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let params = SweepParams::from(&args, &ctx)?;
    let points = params.points()?;
    let cost: f64 = points
        .iter()
        .map(|&(_, n, _, gamma)| {
            let engine = concrete_engine(params.engine, n, params.probes, params.krylov_dim);
            point_cost(n, gamma, engine, params.num_disorder)
        })
        .sum();
    ctx.guard_cost(cost)?;

    let mut rows = Vec::with_capacity(points.len());
    for (variant, n, beta, gamma) in points {
        let engine = concrete_engine(params.engine, n, params.probes, params.krylov_dim);
        let started = Instant::now();
        let est = pressure::quenched_pressure(
            variant,
            n,
            beta,
            gamma,
            params.num_disorder,
            params.base_seed,
            engine,
        )?;
        let mut record = PressureRecord::from_estimate(&est, variant, n, params.base_seed, started);
        if !ctx.timing {
            record.wall_time_s = 0.0;
        }
        rows.push(PressureRow(record));
    }
    ctx.emit(&rows)
}

// ── converge-p ───────────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct ConvergePArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Disorder variant for the finite-p rows: strict or full.
    #[arg(long)]
    pub variant: Option<String>,
    /// Interaction orders (at least three), comma list.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub num_disorder: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub engine: Option<String>,
}

#[derive(Serialize)]
struct ConvergeRow {
    variant: String,
    /// None encodes the REM baseline row (p = infinity).
    p: Option<usize>,
    n: usize,
    beta: f64,
    gamma: f64,
    value: f64,
    stderr: f64,
    qrem: f64,
    one_over_p: Option<f64>,
    gap: f64,
    gap_times_p: Option<f64>,
    num_samples: usize,
    seed_lo: u64,
    seed_hi: u64,
}

impl Row for ConvergeRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "variant",
            "p",
            "n",
            "beta",
            "gamma",
            "value",
            "stderr",
            "qrem",
            "one_over_p",
            "gap",
            "gap_times_p",
            "num_samples",
            "seed_lo",
            "seed_hi",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        vec![
            self.variant.clone(),
            self.p.map(|p| p.to_string()).unwrap_or_else(|| "inf".into()),
            self.n.to_string(),
            cell_f64(self.beta),
            cell_f64(self.gamma),
            cell_f64(self.value),
            cell_f64(self.stderr),
            cell_f64(self.qrem),
            cell_opt_f64(self.one_over_p),
            cell_f64(self.gap),
            cell_opt_f64(self.gap_times_p),
            self.num_samples.to_string(),
            self.seed_lo.to_string(),
            self.seed_hi.to_string(),
        ]
    }
}

pub fn run_converge_p(args: ConvergePArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let cfg = &ctx.cfg;
    let variant_name =
        resolve_string(args.variant.clone(), cfg, "variant").unwrap_or_else(|| "full".into());
    if variant_name == "rem" {
        return Err(config_err("converge-p needs a finite-p variant"));
    }
    let ps = parse_usize_list(
        &resolve_string(args.p.clone(), cfg, "p")
            .ok_or_else(|| config_err("missing required option `p`"))?,
    )
    .map_err(config_err)?;
    if ps.len() < 3 {
        return Err(config_err("converge-p needs at least three p values"));
    }
    let n: usize = resolve_required(args.n, cfg, "n").map_err(config_err)?;
    let beta: f64 = resolve_required(args.beta, cfg, "beta").map_err(config_err)?;
    let gamma: f64 = resolve(args.gamma, cfg, "gamma", 0.0).map_err(config_err)?;
    let num_disorder = resolve(args.num_disorder, cfg, "num-disorder", 50).map_err(config_err)?;
    let probes = resolve(args.probes, cfg, "probes", 16).map_err(config_err)?;
    let krylov_dim = resolve(args.krylov_dim, cfg, "krylov-dim", 60).map_err(config_err)?;
    let base_seed = resolve(args.base_seed, cfg, "base-seed", 1).map_err(config_err)?;
    let engine_choice = parse_engine(
        &resolve_string(args.engine.clone(), cfg, "engine").unwrap_or_else(|| "auto".into()),
    )?;
    let engine = concrete_engine(engine_choice, n, probes, krylov_dim);
    ctx.guard_cost(point_cost(n, gamma, engine, num_disorder) * (ps.len() + 1) as f64)?;

    let phi_limit = qrem_pressure(beta, gamma);
    let mut rows = Vec::new();
    for &p in &ps {
        let variant = parse_variant(&variant_name, p)?;
        let est =
            pressure::quenched_pressure(variant, n, beta, gamma, num_disorder, base_seed, engine)?;
        let gap = est.value - phi_limit;
        rows.push(ConvergeRow {
            variant: variant.label().to_string(),
            p: Some(p),
            n,
            beta,
            gamma,
            value: est.value,
            stderr: est.stderr,
            qrem: phi_limit,
            one_over_p: one_over_p_correction(beta, gamma, p).ok(),
            gap,
            gap_times_p: Some(gap * p as f64),
            num_samples: est.num_samples,
            seed_lo: base_seed,
            seed_hi: base_seed.wrapping_add(num_disorder as u64 - 1),
        });
    }
    // REM baseline row: finite-size corrections only.
    let est = pressure::quenched_pressure(
        DisorderVariant::Rem,
        n,
        beta,
        gamma,
        num_disorder,
        base_seed,
        engine,
    )?;
    rows.push(ConvergeRow {
        variant: "rem".into(),
        p: None,
        n,
        beta,
        gamma,
        value: est.value,
        stderr: est.stderr,
        qrem: phi_limit,
        one_over_p: None,
        gap: est.value - phi_limit,
        gap_times_p: None,
        num_samples: est.num_samples,
        seed_lo: base_seed,
        seed_hi: base_seed.wrapping_add(num_disorder as u64 - 1),
    });
    ctx.emit(&rows)
}

// ── phase-diagram ────────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct PhaseDiagramArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Inverse-temperature grid.
    #[arg(long)]
    pub beta: Option<String>,
    /// Transverse-field grid.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub num_disorder: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub engine: Option<String>,
}

#[derive(Serialize)]
struct PhaseRow {
    variant: String,
    p: Option<usize>,
    n: usize,
    beta: f64,
    gamma: f64,
    value: f64,
    stderr: f64,
    qrem: f64,
    /// Which argument of the closed-form max wins.
    branch: &'static str,
    gamma_c: f64,
    num_samples: usize,
}

impl Row for PhaseRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "variant",
            "p",
            "n",
            "beta",
            "gamma",
            "value",
            "stderr",
            "qrem",
            "branch",
            "gamma_c",
            "num_samples",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        vec![
            self.variant.clone(),
            cell_opt_usize(self.p),
            self.n.to_string(),
            cell_f64(self.beta),
            cell_f64(self.gamma),
            cell_f64(self.value),
            cell_f64(self.stderr),
            cell_f64(self.qrem),
            self.branch.to_string(),
            cell_f64(self.gamma_c),
            self.num_samples.to_string(),
        ]
    }
}

pub fn run_phase_diagram(args: PhaseDiagramArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let cfg = &ctx.cfg;
    let variant_name =
        resolve_string(args.variant.clone(), cfg, "variant").unwrap_or_else(|| "rem".into());
    let p = resolve(args.p, cfg, "p", 3).map_err(config_err)?;
    let variant = parse_variant(&variant_name, p)?;
    let n: usize = resolve_required(args.n, cfg, "n").map_err(config_err)?;
    let betas = parse_grid(
        &resolve_string(args.beta.clone(), cfg, "beta")
            .ok_or_else(|| config_err("missing required option `beta`"))?,
    )
    .map_err(config_err)?;
    let gammas = parse_grid(
        &resolve_string(args.gamma.clone(), cfg, "gamma")
            .ok_or_else(|| config_err("missing required option `gamma`"))?,
    )
    .map_err(config_err)?;
    let num_disorder = resolve(args.num_disorder, cfg, "num-disorder", 20).map_err(config_err)?;
    let probes = resolve(args.probes, cfg, "probes", 16).map_err(config_err)?;
    let krylov_dim = resolve(args.krylov_dim, cfg, "krylov-dim", 60).map_err(config_err)?;
    let base_seed = resolve(args.base_seed, cfg, "base-seed", 1).map_err(config_err)?;
    let engine_choice = parse_engine(
        &resolve_string(args.engine.clone(), cfg, "engine").unwrap_or_else(|| "auto".into()),
    )?;

    let cost: f64 = betas
        .iter()
        .flat_map(|_| gammas.iter())
        .map(|&g| {
            point_cost(
                n,
                g,
                concrete_engine(engine_choice, n, probes, krylov_dim),
                num_disorder,
            )
        })
        .sum();
    ctx.guard_cost(cost)?;

    let mut rows = Vec::new();
    for &beta in &betas {
        for &gamma in &gammas {
            let engine = concrete_engine(engine_choice, n, probes, krylov_dim);
            let est = pressure::quenched_pressure(
                variant,
                n,
                beta,
                gamma,
                num_disorder,
                base_seed,
                engine,
            )?;
            let classical = rem_pressure(beta);
            let paramagnet = ln_cosh(beta * gamma);
            rows.push(PhaseRow {
                variant: variant.label().to_string(),
                p: variant.p(),
                n,
                beta,
                gamma,
                value: est.value,
                stderr: est.stderr,
                qrem: classical.max(paramagnet),
                branch: if classical >= paramagnet {
                    "classical"
                } else {
                    "paramagnet"
                },
                gamma_c: critical_field(beta),
                num_samples: est.num_samples,
            });
        }
    }
    ctx.emit(&rows)
}

// ── selfavg ──────────────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct SelfavgArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Disorder samples per grid point (at least 200).
    #[arg(long)]
    pub num_disorder: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub engine: Option<String>,
}

#[derive(Serialize)]
struct SelfavgRow {
    variant: String,
    p: Option<usize>,
    n: usize,
    beta: f64,
    gamma: f64,
    num_samples: usize,
    t: f64,
    threshold: f64,
    empirical_fraction: f64,
    bound: f64,
    binomial_stderr: f64,
}

impl Row for SelfavgRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "variant",
            "p",
            "n",
            "beta",
            "gamma",
            "num_samples",
            "t",
            "threshold",
            "empirical_fraction",
            "bound",
            "binomial_stderr",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        vec![
            self.variant.clone(),
            cell_opt_usize(self.p),
            self.n.to_string(),
            cell_f64(self.beta),
            cell_f64(self.gamma),
            self.num_samples.to_string(),
            cell_f64(self.t),
            cell_f64(self.threshold),
            cell_f64(self.empirical_fraction),
            cell_f64(self.bound),
            cell_f64(self.binomial_stderr),
        ]
    }
}

pub fn run_selfavg(args: SelfavgArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let cfg = &ctx.cfg;
    let variant_name =
        resolve_string(args.variant.clone(), cfg, "variant").unwrap_or_else(|| "rem".into());
    let p = resolve(args.p, cfg, "p", 3).map_err(config_err)?;
    let variant = parse_variant(&variant_name, p)?;
    let n: usize = resolve_required(args.n, cfg, "n").map_err(config_err)?;
    let betas = parse_grid(
        &resolve_string(args.beta.clone(), cfg, "beta")
            .ok_or_else(|| config_err("missing required option `beta`"))?,
    )
    .map_err(config_err)?;
    let gammas = parse_grid(
        &resolve_string(args.gamma.clone(), cfg, "gamma").unwrap_or_else(|| "0".into()),
    )
    .map_err(config_err)?;
    let num_disorder = resolve(args.num_disorder, cfg, "num-disorder", 500).map_err(config_err)?;
    if num_disorder < 200 {
        return Err(config_err("selfavg needs num-disorder >= 200"));
    }
    let probes = resolve(args.probes, cfg, "probes", 16).map_err(config_err)?;
    let krylov_dim = resolve(args.krylov_dim, cfg, "krylov-dim", 60).map_err(config_err)?;
    let base_seed = resolve(args.base_seed, cfg, "base-seed", 1).map_err(config_err)?;
    let engine_choice = parse_engine(
        &resolve_string(args.engine.clone(), cfg, "engine").unwrap_or_else(|| "auto".into()),
    )?;

    let cost: f64 = betas
        .iter()
        .flat_map(|_| gammas.iter())
        .map(|&g| {
            point_cost(
                n,
                g,
                concrete_engine(engine_choice, n, probes, krylov_dim),
                num_disorder,
            )
        })
        .sum();
    ctx.guard_cost(cost)?;

    let mut rows = Vec::new();
    for &beta in &betas {
        for &gamma in &gammas {
            let engine = concrete_engine(engine_choice, n, probes, krylov_dim);
            let samples =
                pressure::pressure_samples(variant, n, beta, gamma, num_disorder, base_seed, engine)?;
            let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            for t in [1.0f64, 2.0, 3.0, 4.0] {
                let threshold = t * beta / (n as f64).sqrt();
                let exceed = values.iter().filter(|&&v| (v - mean).abs() > threshold).count();
                let fraction = exceed as f64 / values.len() as f64;
                let bound = 2.0 * (-t * t / 4.0).exp();
                let b = bound.min(1.0);
                rows.push(SelfavgRow {
                    variant: variant.label().to_string(),
                    p: variant.p(),
                    n,
                    beta,
                    gamma,
                    num_samples: num_disorder,
                    t,
                    threshold,
                    empirical_fraction: fraction,
                    bound,
                    binomial_stderr: (b * (1.0 - b) / num_disorder as f64).sqrt(),
                });
            }
        }
    }
    ctx.emit(&rows)
}

// ── cluster-census ───────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct ClusterCensusArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Deep-hole density ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Connectivity scale; taken from the schedule when absent.
    #[arg(long)]
    pub r: Option<f64>,
    /// Diameter multiplier L; taken from the schedule when absent.
    #[arg(long)]
    pub l: Option<usize>,
    /// Number of disorder seeds.
    #[arg(long)]
    pub num_disorder: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
}

#[derive(Serialize)]
struct CensusCsvRow(geometry::CensusRow);

impl Row for CensusCsvRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "seed",
            "epsilon",
            "r",
            "num_components",
            "max_diameter",
            "max_component_size",
            "T_norm",
            "bound_2N_sqrt_rL",
            "event_flag",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        let r = &self.0;
        vec![
            r.seed.to_string(),
            cell_f64(r.epsilon),
            cell_f64(r.r),
            r.num_components.to_string(),
            r.max_diameter.to_string(),
            r.max_component_size.to_string(),
            cell_f64(r.t_norm),
            cell_f64(r.bound_2n_sqrt_rl),
            r.event_flag.to_string(),
        ]
    }
}

pub fn run_cluster_census(args: ClusterCensusArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let cfg = &ctx.cfg;
    let variant_name =
        resolve_string(args.variant.clone(), cfg, "variant").unwrap_or_else(|| "rem".into());
    let p = resolve(args.p, cfg, "p", 4).map_err(config_err)?;
    let variant = parse_variant(&variant_name, p)?;
    let n: usize = resolve_required(args.n, cfg, "n").map_err(config_err)?;
    let epsilon: f64 = resolve_required(args.epsilon, cfg, "epsilon").map_err(config_err)?;
    let num_disorder = resolve(args.num_disorder, cfg, "num-disorder", 50).map_err(config_err)?;
    let base_seed = resolve(args.base_seed, cfg, "base-seed", 1).map_err(config_err)?;
    let r = resolve(args.r, cfg, "r", f64::NAN).map_err(config_err)?;
    let l = resolve(args.l, cfg, "l", 0).map_err(config_err)?;
    let scale = if r.is_finite() && l > 0 {
        ScaleChoice::Explicit { r, l }
    } else if r.is_finite() || l > 0 {
        return Err(config_err("census needs both `r` and `l`, or neither"));
    } else {
        ScaleChoice::FromSchedule
    };

    ctx.guard_cost(num_disorder as f64 * (1u64 << n) as f64 * n as f64 / 1e8)?;

    let report = match geometry::diameter_tail_experiment(
        variant,
        n,
        epsilon,
        num_disorder,
        base_seed,
        scale,
    ) {
        Ok(rep) => rep,
        Err(e @ qpspin::Error::ScheduleInadmissible { .. }) => {
            return Err(config_err(format!(
                "{e}; pass explicit --r and --l to run anyway"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let mut summary = format!(
        "census: {} seeds, event frequency {}",
        num_disorder, report.frequency
    );
    if let Some(bound) = report.theoretical_bound {
        let _ = write!(summary, ", tail bound {bound}");
    }
    eprintln!("{summary}");
    let rows: Vec<CensusCsvRow> = report.rows.into_iter().map(CensusCsvRow).collect();
    ctx.emit(&rows)
}

// ── closed-form ──────────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct ClosedFormArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Inverse-temperature grid.
    #[arg(long)]
    pub beta: Option<String>,
    /// Transverse-field grid.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Interaction order for the 1/p-corrected value (optional).
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Serialize)]
struct ClosedFormRow {
    beta: f64,
    gamma: f64,
    p: Option<usize>,
    rem: f64,
    qrem: f64,
    gamma_c: f64,
    branch: &'static str,
    /// Absent on the transition lines and when p is not given.
    one_over_p: Option<f64>,
}

impl Row for ClosedFormRow {
    fn csv_header() -> Vec<&'static str> {
        vec![
            "beta", "gamma", "p", "rem", "qrem", "gamma_c", "branch", "one_over_p",
        ]
    }

    fn csv_cells(&self) -> Vec<String> {
        vec![
            cell_f64(self.beta),
            cell_f64(self.gamma),
            cell_opt_usize(self.p),
            cell_f64(self.rem),
            cell_f64(self.qrem),
            cell_f64(self.gamma_c),
            self.branch.to_string(),
            cell_opt_f64(self.one_over_p),
        ]
    }
}

pub fn run_closed_form(args: ClosedFormArgs) -> Result<(), AppError> {
    let ctx = Context::new(&args.common)?;
    let cfg = &ctx.cfg;
    let betas = parse_grid(
        &resolve_string(args.beta.clone(), cfg, "beta")
            .ok_or_else(|| config_err("missing required option `beta`"))?,
    )
    .map_err(config_err)?;
    let gammas = parse_grid(
        &resolve_string(args.gamma.clone(), cfg, "gamma").unwrap_or_else(|| "0".into()),
    )
    .map_err(config_err)?;
    let p: Option<usize> = match args.p {
        Some(v) => Some(v),
        None => match cfg.get("p") {
            Some(raw) => Some(
                raw.parse()
                    .map_err(|_| config_err(format!("config key `p`: cannot parse `{raw}`")))?,
            ),
            None => None,
        },
    };
    if betas.iter().any(|&b| b <= 0.0) {
        return Err(config_err("closed forms need beta > 0"));
    }
    if gammas.iter().any(|&g| g < 0.0) {
        return Err(config_err("closed forms need gamma >= 0"));
    }

    let mut rows = Vec::new();
    for &beta in &betas {
        for &gamma in &gammas {
            let classical = rem_pressure(beta);
            let paramagnet = ln_cosh(beta * gamma);
            rows.push(ClosedFormRow {
                beta,
                gamma,
                p,
                rem: classical,
                qrem: classical.max(paramagnet),
                gamma_c: critical_field(beta),
                branch: if classical >= paramagnet {
                    "classical"
                } else {
                    "paramagnet"
                },
                one_over_p: p.and_then(|p| one_over_p_correction(beta, gamma, p).ok()),
            });
        }
    }
    ctx.emit(&rows)
}
