//! Command-line front end.
//!
//! Every command accepts `--tol`, `--seed` and `--config <json>`; values
//! given as flags override the config file. Exit status is 0 on success,
//! 1 when a check fails (or on I/O and parse errors), 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport, BoundSweep};
use crate::frechet::{apply, assemble_block, dropped_diagonals};
use crate::io;
use crate::oracle::{self, OracleBox, OracleReport};
use crate::quadrature::DiskGrid;
use crate::recon::{self, ReconConfig};
use crate::sobolev::{self, EmbeddingReport, EmbeddingSweep};
use crate::zernike::synthesize;
use crate::{Error, Result};

pub const THREADS_ENV: &str = "EITLIN_THREADS";

const DEFAULT_ORACLE_TOL: f64 = 1e-9;
const DEFAULT_ZERO_TOL: f64 = 1e-12;
const DEFAULT_RECON_TOL: f64 = 1e-4;
const DEFAULT_ALPHA: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "eitlin", version, about = "Linearized EIT forward map on the unit disk")]
pub struct Cli {
    /// Tolerance for comparisons (must be > 0)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for random inputs
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the M x K section of F^{|j|} as CSV
    Assemble {
        #[arg(long, allow_negative_numbers = true)]
        j: i64,
        /// Rows M
        #[arg(long)]
        rows: usize,
        /// Columns K (defaults to M)
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run invariant sweeps and write a JSON report
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        bounds: BoundArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        embedding: EmbeddingArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Entry magnitudes and majorant for m in {15,30,100}, j in {0,3}, k in 1..=16
    Figure1 {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Apply F to a coefficient table (JSON) and write the ND matrix (CSV)
    Forward {
        #[arg(long)]
        eta: PathBuf,
        #[arg(long)]
        mmax: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a coefficient table from an ND matrix
    Recon {
        #[arg(long)]
        nd: PathBuf,
        #[command(flatten)]
        recon: ReconArgs,
        /// Compare against this table and fail if the max error exceeds --tol
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also write η sampled on a disk grid (r,theta,re,im)
        #[arg(long)]
        eta_out: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        grid_radial: usize,
        #[arg(long, default_value_t = 32)]
        grid_theta: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare closed-form entries with quadrature over an index box
    OracleCheck {
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Random-matrix check of the finite-rank embedding bound
    EmbeddingCheck {
        #[command(flatten)]
        embedding: EmbeddingArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Bounds,
    Oracle,
    Embedding,
    All,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundArgs {
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long)]
    pub gronwall_m_max: Option<usize>,
    #[arg(long)]
    pub gronwall_j_max: Option<usize>,
    #[arg(long)]
    pub gronwall_step: Option<f64>,
    #[arg(long)]
    pub schur_n_max: Option<usize>,
    #[arg(long)]
    pub schur_j_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub norm_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub norm_j_max: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Relative tolerance on the k = 1 equality rows (0 demands bit equality)
    #[arg(long)]
    pub k1_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleArgs {
    #[arg(long)]
    pub box_j_max: Option<usize>,
    #[arg(long)]
    pub box_k_max: Option<usize>,
    #[arg(long)]
    pub box_m_max: Option<usize>,
    /// Tolerance for structurally zero entries and the Hermitian pairing
    #[arg(long)]
    pub zero_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingArgs {
    /// Matrix size N
    #[arg(long = "size")]
    #[serde(rename = "size")]
    pub n: Option<usize>,
    /// Truncations M (comma separated)
    #[arg(long = "trunc", value_delimiter = ',')]
    #[serde(rename = "trunc")]
    pub m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconArgs {
    /// Fourier window (defaults to the data window)
    #[arg(long)]
    pub mmax: Option<usize>,
    #[arg(long)]
    pub jmax: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Add complex Gaussian noise of this size before solving
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub bounds: BoundArgs,
    pub oracle: OracleArgs,
    pub embedding: EmbeddingArgs,
    pub recon: ReconArgs,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

macro_rules! merge_fields {
    ($flag:expr, $cfg:expr, $($f:ident),+) => {
        $( if $flag.$f.is_none() { $flag.$f = $cfg.$f.clone(); } )+
    };
}

impl BoundArgs {
    fn merged(mut self, cfg: &BoundArgs) -> Self {
        merge_fields!(self, cfg, m_max, j_max, gronwall_m_max, gronwall_j_max, gronwall_step,
            schur_n_max, schur_j_max, norm_sizes, norm_j_max, iters, k1_tol);
        self
    }

    fn sweep(&self) -> Result<BoundSweep> {
        let d = BoundSweep::default();
        let s = BoundSweep {
            m_max: self.m_max.unwrap_or(d.m_max),
            j_max: self.j_max.unwrap_or(d.j_max),
            gronwall_m_max: self.gronwall_m_max.unwrap_or(d.gronwall_m_max),
            gronwall_j_max: self.gronwall_j_max.unwrap_or(d.gronwall_j_max),
            gronwall_step: self.gronwall_step.unwrap_or(d.gronwall_step),
            schur_n_max: self.schur_n_max.unwrap_or(d.schur_n_max),
            schur_j_max: self.schur_j_max.unwrap_or(d.schur_j_max),
            norm_sizes: self.norm_sizes.clone().unwrap_or(d.norm_sizes),
            norm_j_max: self.norm_j_max.unwrap_or(d.norm_j_max),
            iters: self.iters.unwrap_or(d.iters),
            k1_tol: self.k1_tol.unwrap_or(d.k1_tol),
        };
        if !(s.gronwall_step > 0.0) || s.iters == 0 || !(s.k1_tol >= 0.0) {
            return Err(Error::invalid("gronwall step and iters must be positive, k1 tolerance >= 0"));
        }
        if s.norm_sizes.contains(&0) {
            return Err(Error::invalid("norm truncation sizes must be positive"));
        }
        Ok(s)
    }
}

impl OracleArgs {
    fn merged(mut self, cfg: &OracleArgs) -> Self {
        merge_fields!(self, cfg, box_j_max, box_k_max, box_m_max, zero_tol);
        self
    }

    fn index_box(&self) -> OracleBox {
        let d = OracleBox::default();
        OracleBox {
            j_max: self.box_j_max.unwrap_or(d.j_max),
            k_max: self.box_k_max.unwrap_or(d.k_max),
            m_max: self.box_m_max.unwrap_or(d.m_max),
        }
    }
}

impl EmbeddingArgs {
    fn merged(mut self, cfg: &EmbeddingArgs) -> Self {
        merge_fields!(self, cfg, n, m, eps, trials);
        self
    }

    fn sweep(&self, seed: u64) -> EmbeddingSweep {
        let d = EmbeddingSweep::default();
        let n = self.n.unwrap_or(d.n);
        EmbeddingSweep {
            n,
            m_values: self.m.clone().unwrap_or_else(|| (1..n).collect()),
            eps_values: self.eps.clone().unwrap_or(d.eps_values),
            trials: self.trials.unwrap_or(d.trials),
            seed,
        }
    }
}

impl ReconArgs {
    fn merged(mut self, cfg: &ReconArgs) -> Self {
        merge_fields!(self, cfg, mmax, jmax, kmax, alpha, noise);
        self
    }
}

/// Global settings after merging flags over the config file.
struct Globals {
    tol: Option<f64>,
    seed: u64,
    config: RunConfig,
}

impl Globals {
    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn out(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.config.out.clone())
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingReport>,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Whether the command's checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    io::write_json(io::create(out)?, value, out)
}

fn verify(suite: Suite, b: BoundArgs, o: OracleArgs, e: EmbeddingArgs, g: &Globals) -> Result<VerifyReport> {
    let wants = |s: Suite| suite == s || suite == Suite::All;
    let mut report = VerifyReport {
        bounds: None,
        oracle: None,
        embedding: None,
        failures: Vec::new(),
        pass: true,
    };
    if wants(Suite::Bounds) {
        let sweep = b.merged(&g.config.bounds).sweep()?;
        let r = bounds::run_bound_suite(&sweep);
        for ineq in r.inequalities.iter().filter(|i| !i.pass) {
            report.failures.push(format!("bounds/{}: margin {:e}", ineq.name, ineq.worst_margin));
        }
        report.bounds = Some(r);
    }
    if wants(Suite::Oracle) {
        let r = oracle_report(o, g)?;
        if !r.pass {
            report.failures.push(format!("oracle: max discrepancy {:e}", r.max_discrepancy));
        }
        report.oracle = Some(r);
    }
    if wants(Suite::Embedding) {
        let r = sobolev::run_embedding_sweep(&e.merged(&g.config.embedding).sweep(g.seed))?;
        if !r.pass {
            report.failures.push(format!("embedding: worst ratio {}", r.worst_ratio));
        }
        report.embedding = Some(r);
    }
    report.pass = report.failures.is_empty();
    Ok(report)
}

fn oracle_report(o: OracleArgs, g: &Globals) -> Result<OracleReport> {
    let o = o.merged(&g.config.oracle);
    let zero_tol = o.zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    if !(zero_tol > 0.0) {
        return Err(Error::invalid("zero tolerance must be > 0"));
    }
    oracle::max_discrepancy(o.index_box(), g.tol_or(DEFAULT_ORACLE_TOL), zero_tol)
}

fn run_command(command: Command, g: &Globals) -> Result<Outcome> {
    match command {
        Command::Assemble { j, rows, cols, out } => {
            let block = assemble_block(j.unsigned_abs() as usize, rows, cols.unwrap_or(rows))?;
            let out = g.out(out);
            io::write_block(io::create(out.as_deref())?, &block, out.as_deref())?;
            Ok(Outcome::Pass)
        }
        Command::Verify { suite, bounds, oracle, embedding, out } => {
            let report = verify(suite, bounds, oracle, embedding, g)?;
            emit(&report, g.out(out).as_deref())?;
            for f in &report.failures {
                warn!("check failed: {f}");
            }
            Ok(Outcome::from_pass(report.pass))
        }
        Command::Figure1 { out } => {
            let rows = bounds::figure1_default();
            let out = g.out(out);
            io::write_figure1(io::create(out.as_deref())?, &rows, out.as_deref())?;
            Ok(Outcome::Pass)
        }
        Command::Forward { eta, mmax, out } => {
            let table = io::read_table(&eta)?;
            let dropped = dropped_diagonals(&table, mmax);
            if !dropped.is_empty() {
                warn!("diagonals outside the window |j| <= {} dropped: {dropped:?}", 2 * mmax);
            }
            let nd = apply(&table, mmax)?;
            let out = g.out(out);
            io::write_nd(io::create(out.as_deref())?, &nd, out.as_deref())?;
            Ok(Outcome::Pass)
        }
        Command::Recon { nd, recon, reference, eta_out, grid_radial, grid_theta, out } => {
            let args = recon.merged(&g.config.recon);
            let mut data = io::read_nd(&nd)?;
            let cfg = ReconConfig {
                mmax: args.mmax.unwrap_or(data.mmax()),
                jmax: args.jmax.ok_or_else(|| Error::invalid("recon needs --jmax"))?,
                kmax: args.kmax.ok_or_else(|| Error::invalid("recon needs --kmax"))?,
                alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
                noise_sigma: args.noise.unwrap_or(0.0),
            };
            cfg.validate()?;
            if cfg.noise_sigma > 0.0 {
                data = recon::add_noise(&data, cfg.noise_sigma, g.seed)?;
            }
            for (j, cond) in recon::block_conditions(&cfg)? {
                info!("block j={j}: condition number {cond:.3e}");
            }
            let table = recon::reconstruct(&data, &cfg)?;
            emit(&table, g.out(out).as_deref())?;
            if let Some(path) = eta_out {
                let grid = DiskGrid::new(grid_radial, grid_theta)?;
                let points: Vec<(f64, f64)> = grid.points().collect();
                let values = synthesize(&table, &points)?;
                let samples: Vec<_> = points.iter().zip(values).map(|(&(r, t), v)| (r, t, v)).collect();
                io::write_samples(io::create(Some(&path))?, &samples, Some(&path))?;
            }
            match reference {
                Some(path) => {
                    let truth = io::read_table(&path)?;
                    let err = table.max_abs_diff(&truth);
                    let tol = g.tol_or(DEFAULT_RECON_TOL);
                    info!("max coefficient error {err:e} (tol {tol:e})");
                    if err > tol {
                        warn!("reconstruction error {err:e} exceeds tolerance {tol:e}");
                    }
                    Ok(Outcome::from_pass(err <= tol))
                }
                None => Ok(Outcome::Pass),
            }
        }
        Command::OracleCheck { oracle, out } => {
            let report = oracle_report(oracle, g)?;
            println!("max discrepancy {:e}", report.max_discrepancy);
            if let Some(out) = g.out(out) {
                emit(&report, Some(&out))?;
            }
            Ok(Outcome::from_pass(report.pass))
        }
        Command::EmbeddingCheck { embedding, out } => {
            let report = sobolev::run_embedding_sweep(&embedding.merged(&g.config.embedding).sweep(g.seed))?;
            emit(&report, g.out(out).as_deref())?;
            Ok(Outcome::from_pass(report.pass))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot configure thread pool: {e}")))
}

/// Run a parsed command line.
pub fn execute(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let tol = cli.tol.or(config.tol);
    if let Some(t) = tol {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("--tol must be > 0, got {t}")));
        }
    }
    let g = Globals {
        tol,
        seed: cli.seed.or(config.seed).unwrap_or(0),
        config,
    };
    run_command(cli.command, &g)
}

pub fn exit_code(result: Result<Outcome>) -> ExitCode {
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    exit_code(execute(Cli::parse()))
}
