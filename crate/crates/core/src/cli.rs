//! The `ert` command line.
//!
//! Every subcommand accepts `--config <file.json>` whose keys mirror the
//! long flag names (with `_` for `-`); flags given on the command line win.
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when a
//! computation is declined because its inputs are degenerate.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::ErtError;
use crate::ert::forward_sinogram;
use crate::fbp::reconstruct;
use crate::filter::FilterParams;
use crate::io;
use crate::model::{rasterize, Phantom, PhantomComponent};
use crate::risk::{fit_rate, run_study, Criterion, RiskStudyConfig};
use crate::stochastic::{estimate_grid, simulate, EstimatorConfig, NoiseKind, NoiseModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DECLINED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(ErtError),
    Declined(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) => EXIT_USAGE,
            CliError::Declined(_) => EXIT_DECLINED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(e) => write!(f, "error: {e}"),
            CliError::Declined(m) => write!(f, "declined: {m}"),
        }
    }
}

impl From<ErtError> for CliError {
    fn from(e: ErtError) -> Self {
        CliError::Failed(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "ert", version, about = "Exponential Radon transform tools")]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "ERT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a phantom JSON and optionally rasterize it
    Phantom(PhantomArgs),
    /// Sample the exponential Radon transform of a phantom
    Sinogram(SinogramArgs),
    /// Filtered backprojection of a sinogram file
    Fbp(FbpArgs),
    /// Simulate noisy random-design data and evaluate the kernel estimator
    Estimate(EstimateArgs),
    /// Monte Carlo risk study with a log-log rate fit
    Risk(RiskArgs),
    /// Fit a convergence rate to a risk table
    RateFit(RateFitArgs),
}

/// Fills unset fields of `$flags` from `$base`.
macro_rules! overlay {
    ($flags:expr, $base:expr; $($field:ident),+ $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $base.$field; } )+
    };
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

fn read_phantom(path: &Path) -> CliResult<Phantom> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read phantom {}: {e}", path.display())))?;
    Ok(Phantom::from_json(&text)?)
}

fn parse_quad(text: &str, what: &str) -> CliResult<[f64; 4]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("--{what} expects cx,cy,size,amplitude, got {text:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomArgs {
    /// JSON file supplying defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Existing phantom JSON to start from
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Disk component `cx,cy,radius,amplitude` (repeatable)
    #[arg(long, allow_hyphen_values = true)]
    pub disk: Vec<String>,
    /// Bump component `cx,cy,scale,amplitude` (repeatable)
    #[arg(long, allow_hyphen_values = true)]
    pub bump: Vec<String>,
    /// Where to write the phantom JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also rasterize to this grid file
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Grid side for `--grid`
    #[arg(long)]
    pub nside: Option<usize>,
    /// Write the grid in the binary encoding
    #[arg(long)]
    #[serde(skip)]
    pub binary: bool,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct SinogramArgs {
    /// JSON file supplying defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Phantom JSON file
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    /// Attenuation coefficient
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Number of angles on [0, 2 pi)
    #[arg(long)]
    pub ntheta: Option<usize>,
    /// Number of offsets on [-1, 1]
    #[arg(long)]
    pub ns: Option<usize>,
    /// Sinogram output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional long-form CSV export
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct FbpArgs {
    /// JSON file supplying defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Sinogram file
    #[arg(long)]
    pub sinogram: Option<PathBuf>,
    /// Filter bandwidth
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Output grid side (default 128)
    #[arg(long)]
    pub nside: Option<usize>,
    /// Grid output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the grid in the binary encoding
    #[arg(long)]
    #[serde(skip)]
    pub binary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Mse,
    Mise,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateArgs {
    /// JSON file supplying defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Phantom JSON file (for simulated data)
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    /// Observation CSV to use instead of simulating
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Number of observations to simulate
    #[arg(long)]
    pub n: Option<u64>,
    /// Attenuation coefficient (simulated data)
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Noise law (default gaussian)
    #[arg(long, value_enum)]
    pub noise: Option<NoiseKindArg>,
    /// Noise standard deviation (default 0.05)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Random seed (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bandwidth; overrides the rule below
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Bandwidth rule when `--rho` is absent (default mise)
    #[arg(long, value_enum)]
    pub rule: Option<BandwidthRule>,
    /// Smoothness index (default 2)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bandwidth prefactor (default 1)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output grid side (default 64)
    #[arg(long)]
    pub nside: Option<usize>,
    /// Grid output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also save the simulated observations (CSV plus JSON sidecar)
    #[arg(long)]
    pub obs_out: Option<PathBuf>,
    /// Write the grid in the binary encoding
    #[arg(long)]
    #[serde(skip)]
    pub binary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKindArg {
    Gaussian,
    Uniform,
    None,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(k: NoiseKindArg) -> Self {
        match k {
            NoiseKindArg::Gaussian => NoiseKind::Gaussian,
            NoiseKindArg::Uniform => NoiseKind::Uniform,
            NoiseKindArg::None => NoiseKind::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Mse,
    Mise,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Mse => Criterion::Mse,
            CriterionArg::Mise => Criterion::Mise,
        }
    }
}

#[derive(Args, Debug)]
pub struct RiskArgs {
    /// Study description (JSON risk-study config)
    #[arg(long)]
    pub config: PathBuf,
    /// Override the study criterion
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Override the master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the sample sizes (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<u64>>,
    /// Risk table output (CSV)
    #[arg(long)]
    pub out: PathBuf,
    /// Rate fit output (JSON); defaults to the table path with `.fit.json`
    #[arg(long)]
    pub fit_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RateFitArgs {
    /// Risk table (CSV)
    #[arg(long)]
    pub table: PathBuf,
    /// Theoretical slope to report alongside the fit
    #[arg(long, allow_hyphen_values = true, conflicts_with = "criterion")]
    pub theory_slope: Option<f64>,
    /// Derive the theoretical slope from this criterion and `--beta`
    #[arg(long, value_enum, requires = "beta")]
    pub criterion: Option<CriterionArg>,
    /// Smoothness index for `--criterion`
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fit output (JSON); printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Messages go to `stdout` / `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "ert: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command on a pool of the requested size.
pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    let command = cli.command;
    let mut buf = Vec::new();
    let result = pool.install(|| match command {
        Command::Phantom(a) => cmd_phantom(a, &mut buf),
        Command::Sinogram(a) => cmd_sinogram(a, &mut buf),
        Command::Fbp(a) => cmd_fbp(a, &mut buf),
        Command::Estimate(a) => cmd_estimate(a, &mut buf),
        Command::Risk(a) => cmd_risk(a, &mut buf),
        Command::RateFit(a) => cmd_rate_fit(a, &mut buf),
    });
    out.write_all(&buf)?;
    result
}

pub fn cmd_phantom(mut a: PhantomArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let base: PhantomArgs = load_config(a.config.as_deref())?;
    overlay!(a, base; input, out, grid, nside);
    if a.disk.is_empty() && a.bump.is_empty() {
        a.disk = base.disk;
        a.bump = base.bump;
    }
    let dest = require(a.out, "out")?;
    let mut components = match &a.input {
        Some(path) => read_phantom(path)?.components().to_vec(),
        None => Vec::new(),
    };
    for d in &a.disk {
        let [cx, cy, radius, amplitude] = parse_quad(d, "disk")?;
        components.push(PhantomComponent::Disk { center: [cx, cy], radius, amplitude });
    }
    for b in &a.bump {
        let [cx, cy, scale, amplitude] = parse_quad(b, "bump")?;
        components.push(PhantomComponent::Bump { center: [cx, cy], scale, amplitude });
    }
    let phantom = Phantom::new(components)?;
    fs::write(&dest, phantom.to_json() + "\n")?;
    writeln!(out, "phantom with {} component(s) -> {}", phantom.components().len(), dest.display())?;
    if let Some(grid_path) = a.grid {
        let grid = rasterize(&phantom, a.nside.unwrap_or(128))?;
        io::write_grid(&grid_path, &grid, a.binary)?;
        writeln!(out, "{} -> {}", io::describe_grid(&grid), grid_path.display())?;
    }
    Ok(())
}

pub fn cmd_sinogram(mut a: SinogramArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let base: SinogramArgs = load_config(a.config.as_deref())?;
    overlay!(a, base; phantom, mu, ntheta, ns, out, csv);
    let phantom = read_phantom(&require(a.phantom, "phantom")?)?;
    let mu = require(a.mu, "mu")?;
    let n_theta = require(a.ntheta, "ntheta")?;
    let n_s = require(a.ns, "ns")?;
    let dest = require(a.out, "out")?;
    let g = forward_sinogram(&phantom, n_theta, n_s, mu)?;
    io::write_sinogram(&dest, &g)?;
    if let Some(csv) = a.csv {
        io::write_sinogram_csv(&g, fs::File::create(csv)?)?;
    }
    let (lo, hi) = g.min_max();
    writeln!(
        out,
        "sinogram {n_theta}x{n_s}, mu {}, min {}, max {} -> {}",
        io::fmt_f64(mu),
        io::fmt_f64(lo),
        io::fmt_f64(hi),
        dest.display()
    )?;
    Ok(())
}

pub fn cmd_fbp(mut a: FbpArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let base: FbpArgs = load_config(a.config.as_deref())?;
    overlay!(a, base; sinogram, rho, nside, out);
    let g = io::read_sinogram(&require(a.sinogram, "sinogram")?)?;
    let rho = require(a.rho, "rho")?;
    let dest = require(a.out, "out")?;
    let p = FilterParams::new(rho, g.mu())?;
    let grid = reconstruct(&g, &p, a.nside.unwrap_or(128))?;
    io::write_grid(&dest, &grid, a.binary)?;
    writeln!(out, "{} -> {}", io::describe_grid(&grid), dest.display())?;
    Ok(())
}

pub fn cmd_estimate(mut a: EstimateArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let base: EstimateArgs = load_config(a.config.as_deref())?;
    overlay!(a, base; phantom, obs, n, mu, noise, sigma, seed, rho, rule, beta, alpha, nside, out, obs_out);
    let dest = require(a.out, "out")?;
    let obs = match (&a.obs, &a.phantom) {
        (Some(path), _) => io::read_observations(path)?,
        (None, Some(path)) => {
            let phantom = read_phantom(path)?;
            let n = require(a.n, "n")?;
            if n < 1 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let kind = a.noise.map(NoiseKind::from).unwrap_or(NoiseKind::Gaussian);
            let noise = NoiseModel::new(kind, a.sigma.unwrap_or(0.05))?;
            simulate(&phantom, n as usize, require(a.mu, "mu")?, noise, a.seed.unwrap_or(0))?
        }
        (None, None) => return Err(CliError::Usage("need --phantom (to simulate) or --obs".into())),
    };
    if let Some(path) = &a.obs_out {
        io::write_observations(path, &obs)?;
    }
    let beta = a.beta.unwrap_or(2.0);
    let alpha = a.alpha.unwrap_or(1.0);
    let n = obs.len() as u64;
    let cfg = match (a.rho, a.rule.unwrap_or(BandwidthRule::Mise)) {
        (Some(rho), _) => EstimatorConfig::new(obs.mu(), rho, beta, alpha)?,
        (None, BandwidthRule::Mse) => EstimatorConfig::for_mse(n, obs.mu(), beta, alpha)?,
        (None, BandwidthRule::Mise) => EstimatorConfig::for_mise(n, obs.mu(), beta, alpha)?,
    };
    let grid = estimate_grid(&obs, &cfg, a.nside.unwrap_or(64))?;
    io::write_grid(&dest, &grid, a.binary)?;
    writeln!(out, "n {n}, rho {}, {} -> {}", io::fmt_f64(cfg.rho_n), io::describe_grid(&grid), dest.display())?;
    Ok(())
}

fn fit_path(table: &Path) -> PathBuf {
    table.with_extension("fit.json")
}

pub fn cmd_risk(a: RiskArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let mut cfg: RiskStudyConfig = load_config_required(&a.config)?;
    if let Some(c) = a.criterion {
        cfg.criterion = c.into();
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(ns) = a.n_values {
        cfg.n_values = ns;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = run_study(&cfg)?;
    let mut table = Vec::new();
    io::write_risk_csv(&rows, &mut table)?;
    fs::write(&a.out, &table)?;
    out.extend_from_slice(&table);
    let fit_out = a.fit_out.unwrap_or_else(|| fit_path(&a.out));
    let fit = fit_or_decline(&rows, cfg.criterion.theory_slope(cfg.beta))?;
    let json = io::to_json_line(&fit)?;
    fs::write(&fit_out, &json)?;
    out.extend_from_slice(json.as_bytes());
    Ok(())
}

fn load_config_required<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn fit_or_decline(rows: &[crate::risk::RiskRow], theory: f64) -> CliResult<crate::risk::RateFit> {
    if let Some(r) = rows.iter().find(|r| !(r.risk > 0.0)) {
        return Err(CliError::Declined(format!(
            "rate fit refused: risk at n = {} is {} (nonpositive risks have no logarithm)",
            r.n, r.risk
        )));
    }
    fit_rate(rows, theory).map_err(|e| CliError::Declined(format!("rate fit refused: {e}")))
}

pub fn cmd_rate_fit(a: RateFitArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let file = fs::File::open(&a.table)
        .map_err(|e| CliError::Usage(format!("cannot read table {}: {e}", a.table.display())))?;
    let rows = io::read_risk_csv(file)?;
    let theory = match (a.theory_slope, a.criterion, a.beta) {
        (Some(t), _, _) => t,
        (None, Some(c), Some(beta)) => Criterion::from(c).theory_slope(beta),
        _ => return Err(CliError::Usage("need --theory-slope or --criterion with --beta".into())),
    };
    let fit = fit_or_decline(&rows, theory)?;
    let json = io::to_json_line(&fit)?;
    match a.out {
        Some(path) => {
            fs::write(&path, &json)?;
            writeln!(out, "slope {} (theory {}) -> {}", io::fmt_f64(fit.slope), io::fmt_f64(theory), path.display())?;
        }
        None => out.extend_from_slice(json.as_bytes()),
    }
    Ok(())
}
