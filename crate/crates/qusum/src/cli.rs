//! Command-line frontend: parse state/POVM/channel specs and experiment
//! configs, dispatch to the library, emit CSV/JSON/SVG.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 parse/IO error,
//! 3 support-infinite under --require-finite, 4 optimizer budget exhausted
//! under --strict, 5 insufficient false-alarm spread for a slope fit.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detection::{ChangePoint, ChangePointModel, PreparedTrial};
use crate::entropy::{nats_to_bits, quantum_relative_entropy};
use crate::error::{Error, Result};
use crate::experiments::{
    self, render_csv, render_svg, tradeoff_experiment, verify_compression_convergence,
    verify_dpi, verify_dual_identity, TradeoffConfig,
};
use crate::measurement::{basis_povm, random_diagonal_state, Povm};
use crate::povm_search::{block_measurement_sweep, optimize_measurement, SearchConfig};
use crate::rng::{RngHandle, StreamKind};
use crate::states::{build_pair, parse_state_spec, tensor_power, DensityMatrix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_PARSE_IO: i32 = 2;
pub const EXIT_SUPPORT_INFINITE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_SPREAD: i32 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "qusum",
    about = "Quantum quickest change-point detection laboratory",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random stream this invocation uses.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; the default uses available parallelism. Results are
    /// identical for every value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Emit a machine-readable JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Write an SVG chart where the command produces a curve.
    #[arg(long, global = true)]
    svg: Option<PathBuf>,

    /// Exit with an error when a requested divergence is infinite.
    #[arg(long, global = true)]
    require_finite: bool,

    /// Treat optimizer budget exhaustion as an error.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Relative entropies between two states.
    Entropy {
        /// Post-change state spec, e.g. thermal:nbar=1.0
        #[arg(long)]
        sigma: String,
        /// Pre-change state spec, e.g. thermal:nbar=0.5
        #[arg(long)]
        rho: String,
        /// Also display values in bits.
        #[arg(long)]
        bits: bool,
    },
    /// Maximize the measured relative entropy over POVMs.
    PovmOpt {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        rho: String,
        /// Write the best POVM to this JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Joint measurements on blocks of this many states.
        #[arg(long, default_value_t = 1)]
        block_l: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        /// POVM outcomes (defaults to the squared dimension).
        #[arg(long)]
        outcomes: Option<usize>,
    },
    /// Threshold sweep: false-alarm/delay trade-off curve with slope fit.
    Tradeoff {
        /// JSON experiment config path.
        config: PathBuf,
        /// Override the CSV output path from the config.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a single detection trial with a verbose trace.
    Simulate {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        rho: String,
        /// POVM: "basis", "auto", or a JSON file path.
        #[arg(long, default_value = "basis")]
        povm: String,
        #[arg(long, default_value_t = 1)]
        block_l: usize,
        /// Change point: last pre-change step index, or "never".
        #[arg(long, default_value = "0")]
        nu: String,
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
        #[arg(long, default_value_t = 100000)]
        horizon: u64,
        /// Print at most this many trace steps.
        #[arg(long, default_value_t = 50)]
        trace_limit: usize,
    },
    /// Run the verification suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Optional POVM file to include in the dual-identity instances.
        #[arg(long)]
        povm: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Channel-dual identity: measuring a pulled-back POVM reproduces the
    /// statistics of measuring after the channel.
    #[value(name = "dual", alias = "lemma3")]
    Dual,
    /// Compression-channel convergence of the divergence.
    Compression,
    /// Data-processing inequalities (channels and measurements).
    Dpi,
    /// Everything.
    All,
}

/// Entry point used by the binary: parse `std::env::args`, run, return the
/// exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let mut out = std::io::stdout();
    execute(cli, &mut out)
}

/// Testable entry point.
pub fn run_from<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, out),
        Err(e) => {
            let _ = writeln!(out, "{e}");
            EXIT_PARSE_IO
        }
    }
}

fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> i32 {
    let jobs = cli.jobs;
    let mut run = || match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            exit_code_for(&e)
        }
    };
    match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                let _ = writeln!(out, "error: {e}");
                EXIT_PARSE_IO
            }
        },
        None => run(),
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InsufficientSpread { .. } => EXIT_SPREAD,
        Error::InfiniteRelativeEntropy => EXIT_SUPPORT_INFINITE,
        _ => EXIT_PARSE_IO,
    }
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32> {
    match &cli.command {
        Command::Entropy { sigma, rho, bits } => {
            cmd_entropy(sigma, rho, *bits, cli.require_finite, cli.json, out)
        }
        Command::PovmOpt { sigma, rho, out: povm_out, block_l, restarts, max_iters, outcomes } => {
            cmd_povm_opt(
                sigma,
                rho,
                povm_out.as_deref(),
                *block_l,
                *restarts,
                *max_iters,
                *outcomes,
                cli.seed,
                cli.strict,
                cli.json,
                out,
            )
        }
        Command::Tradeoff { config, csv } => {
            cmd_tradeoff(config, cli.svg.as_deref(), csv.as_deref(), cli.json, out)
        }
        Command::Simulate { sigma, rho, povm, block_l, nu, threshold, horizon, trace_limit } => {
            cmd_simulate(
                sigma,
                rho,
                povm,
                *block_l,
                nu,
                *threshold,
                *horizon,
                *trace_limit,
                cli.seed,
                cli.json,
                out,
            )
        }
        Command::Verify { suite, povm } => cmd_verify(*suite, povm.as_deref(), cli.json, out),
    }
}

fn cmd_entropy(
    sigma_spec: &str,
    rho_spec: &str,
    bits: bool,
    require_finite: bool,
    json: bool,
    out: &mut (dyn Write + Send),
) -> Result<i32> {
    let sigma = parse_state_spec(sigma_spec)?;
    let rho = parse_state_spec(rho_spec)?;
    let (sigma, rho) = build_pair(&sigma, &rho)?;
    let forward = quantum_relative_entropy(&sigma, &rho)?;
    let backward = quantum_relative_entropy(&rho, &sigma)?;

    if json {
        let report = json!({
            "dim": sigma.dim(),
            "d_sigma_rho_nats": forward.value,
            "d_rho_sigma_nats": backward.value,
            "support_ok": forward.support_ok,
            "truncation_budget": forward.truncation_budget,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        writeln!(out, "common Fock dimension: {}", sigma.dim())?;
        writeln!(out, "D(sigma||rho) = {}", fmt_nats(forward.value, bits))?;
        writeln!(out, "D(rho||sigma) = {}", fmt_nats(backward.value, bits))?;
        writeln!(
            out,
            "support: {}",
            if forward.support_ok { "contained" } else { "violated (infinite)" }
        )?;
        writeln!(out, "truncation budget: {:.3e}", forward.truncation_budget)?;
    }
    if require_finite && !forward.is_finite() {
        return Ok(EXIT_SUPPORT_INFINITE);
    }
    Ok(EXIT_OK)
}

fn fmt_nats(value: f64, bits: bool) -> String {
    if value.is_infinite() {
        return "infinite (support violation)".into();
    }
    if bits {
        format!("{} nats ({} bits)", value, nats_to_bits(value))
    } else {
        format!("{value} nats")
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_povm_opt(
    sigma_spec: &str,
    rho_spec: &str,
    povm_out: Option<&Path>,
    block_l: usize,
    restarts: usize,
    max_iters: usize,
    outcomes: Option<usize>,
    seed: u64,
    strict: bool,
    json: bool,
    out: &mut (dyn Write + Send),
) -> Result<i32> {
    let sigma = parse_state_spec(sigma_spec)?;
    let rho = parse_state_spec(rho_spec)?;
    let (sigma, rho) = build_pair(&sigma, &rho)?;
    let cfg = SearchConfig {
        restarts,
        max_iters,
        n_outcomes: outcomes,
        seed,
        ..SearchConfig::default()
    };

    let rows = block_measurement_sweep(&sigma, &rho, block_l, &cfg)?;
    let quantum = quantum_relative_entropy(&sigma, &rho)?.value;
    let last = rows.last().expect("at least one block level");
    let gap = quantum - last.per_copy;

    if let Some(path) = povm_out {
        last.povm.save(path)?;
    }
    if json {
        let report = json!({
            "per_copy_values": rows.iter().map(|r| r.per_copy).collect::<Vec<_>>(),
            "best_value": last.value,
            "best_per_copy": last.per_copy,
            "block_l": last.l,
            "quantum_ceiling": quantum,
            "gap": gap,
            "per_restart_values": last.per_restart_values,
            "converged": rows.iter().all(|r| r.converged),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        for row in &rows {
            writeln!(
                out,
                "l={}: best D^M = {} nats ({} per copy){}",
                row.l,
                row.value,
                row.per_copy,
                if row.converged { "" } else { "  [budget exhausted]" }
            )?;
            let formatted: Vec<String> =
                row.per_restart_values.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "   restart values: [{}]", formatted.join(", "))?;
        }
        writeln!(out, "quantum ceiling D = {quantum} nats, gap = {gap} nats")?;
        if let Some(path) = povm_out {
            writeln!(out, "wrote POVM to {}", path.display())?;
        }
    }
    if strict && !rows.iter().all(|r| r.converged) {
        return Ok(EXIT_BUDGET);
    }
    Ok(EXIT_OK)
}

/// Flat JSON experiment config for the `tradeoff` subcommand. Seeds are
/// mandatory: reproducibility is the artifact's point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sigma_spec: String,
    pub rho_spec: String,
    /// "auto" (optimize), "basis", or a POVM JSON file path.
    pub povm: String,
    #[serde(default = "default_block_l")]
    pub block_l: usize,
    /// Explicit threshold grid, or "auto".
    pub thresholds: ThresholdSpec,
    #[serde(default = "default_delay_trials")]
    pub n_trials_delay: u64,
    #[serde(default = "default_tfa_trials")]
    pub n_trials_tfa: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    pub seed: u64,
    /// CSV output path.
    pub csv: Option<PathBuf>,
    /// Optional SVG output path.
    pub svg: Option<PathBuf>,
}

fn default_block_l() -> usize {
    1
}
fn default_delay_trials() -> u64 {
    experiments::DEFAULT_DELAY_TRIALS
}
fn default_tfa_trials() -> u64 {
    experiments::DEFAULT_TFA_TRIALS
}
fn default_horizon() -> u64 {
    experiments::DEFAULT_HORIZON
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    Named(String),
    Grid(Vec<f64>),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn thresholds(&self) -> Result<Vec<f64>> {
        match &self.thresholds {
            ThresholdSpec::Grid(g) if !g.is_empty() => Ok(g.clone()),
            ThresholdSpec::Grid(_) => Err(Error::BadSpec("empty threshold grid".into())),
            ThresholdSpec::Named(name) if name == "auto" => Ok(experiments::auto_threshold_grid(8)),
            ThresholdSpec::Named(other) => {
                Err(Error::BadSpec(format!("unknown thresholds value `{other}`")))
            }
        }
    }
}

/// Resolve a POVM description against block states of dimension dim^l.
fn resolve_povm(
    text: &str,
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    block_l: usize,
    seed: u64,
) -> Result<Povm> {
    match text {
        "basis" => {
            let dim = rho.dim().pow(block_l as u32);
            Ok(basis_povm(dim))
        }
        "auto" => {
            let sl = tensor_power(sigma, block_l)?;
            let rl = tensor_power(rho, block_l)?;
            let cfg = SearchConfig { seed, ..SearchConfig::default() };
            Ok(optimize_measurement(&sl, &rl, &cfg)?.best_povm)
        }
        path => Povm::load(Path::new(path)),
    }
}

fn cmd_tradeoff(
    config_path: &Path,
    svg_override: Option<&Path>,
    csv_override: Option<&Path>,
    json: bool,
    out: &mut (dyn Write + Send),
) -> Result<i32> {
    let config = ExperimentConfig::load(config_path)?;
    let sigma_spec = parse_state_spec(&config.sigma_spec)?;
    let rho_spec = parse_state_spec(&config.rho_spec)?;
    let (sigma, rho) = build_pair(&sigma_spec, &rho_spec)?;
    let povm = resolve_povm(&config.povm, &sigma, &rho, config.block_l, config.seed)?;

    let cfg = TradeoffConfig {
        thresholds: config.thresholds()?,
        n_trials_delay: config.n_trials_delay,
        n_trials_tfa: config.n_trials_tfa,
        horizon: config.horizon,
        seed: config.seed,
        block_l: config.block_l,
    };
    let (curve, fit) = tradeoff_experiment(&sigma, &rho, &povm, &cfg)?;

    let csv = render_csv(&curve, &fit);
    if let Some(path) = csv_override.or(config.csv.as_deref()) {
        std::fs::write(path, &csv)?;
    }
    if let Some(path) = svg_override.or(config.svg.as_deref()) {
        std::fs::write(path, render_svg(&curve, &fit))?;
    }

    if json {
        let report = json!({
            "rows": curve.rows,
            "fit": fit,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{csv}")?;
    }
    writeln!(
        out,
        "slope={}, theory={}, quantum={}",
        fit.slope, fit.theory_slope, fit.quantum_slope
    )?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    sigma_spec: &str,
    rho_spec: &str,
    povm_text: &str,
    block_l: usize,
    nu_text: &str,
    threshold: f64,
    horizon: u64,
    trace_limit: usize,
    seed: u64,
    json: bool,
    out: &mut (dyn Write + Send),
) -> Result<i32> {
    let sigma = parse_state_spec(sigma_spec)?;
    let rho = parse_state_spec(rho_spec)?;
    let (sigma, rho) = build_pair(&sigma, &rho)?;
    let povm = resolve_povm(povm_text, &sigma, &rho, block_l, seed)?;
    let nu = match nu_text {
        "never" | "inf" | "infinity" => ChangePoint::Never,
        n => ChangePoint::At(
            n.parse::<u64>()
                .map_err(|_| Error::BadSpec(format!("bad change point `{n}`")))?,
        ),
    };
    let model = ChangePointModel { rho, sigma, nu };
    let prepared = PreparedTrial::new(&model, &povm, block_l)?;
    let mut rng = RngHandle::new(seed).trial(StreamKind::Simulation, 0);
    let (result, trace) = prepared.run_traced(threshold, horizon, &mut rng)?;

    if json {
        let report = json!({
            "stop_time": result.stop_time,
            "alarm": format!("{:?}", result.alarm_kind),
            "divergence_qp": prepared.table().divergence_qp,
            "trace_len": trace.len(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(EXIT_OK);
    }

    writeln!(
        out,
        "D(q||p) = {} nats/block, D(p||q) = {} nats/block",
        prepared.table().divergence_qp,
        prepared.table().divergence_pq
    )?;
    writeln!(out, "block outcome      llr        S")?;
    for step in trace.iter().take(trace_limit) {
        writeln!(
            out,
            "{:>5} {:>7} {:>10.4} {:>8.4}{}",
            step.block,
            step.outcome,
            step.llr,
            step.statistic,
            if step.stopped { "  <- stop" } else { "" }
        )?;
    }
    if trace.len() > trace_limit {
        writeln!(out, "... ({} more blocks)", trace.len() - trace_limit)?;
    }
    writeln!(out, "stop_time={} alarm={:?}", result.stop_time, result.alarm_kind)?;
    Ok(EXIT_OK)
}

fn cmd_verify(suite: Suite, povm_file: Option<&Path>, json: bool, out: &mut (dyn Write + Send)) -> Result<i32> {
    // fixed internal seeds: the suites are part of the acceptance surface
    const DUAL_SEED: u64 = 1001;
    const DPI_SEED: u64 = 1002;
    const COMPRESSION_SEED: u64 = 1003;

    // an injected POVM file must at least load and validate
    if let Some(path) = povm_file {
        let _ = Povm::load(path)?;
    }

    let mut all_pass = true;
    let mut reports = Vec::new();

    if matches!(suite, Suite::Dual | Suite::All) {
        let report = verify_dual_identity(100, DUAL_SEED)?;
        all_pass &= report.pass;
        if !json {
            writeln!(
                out,
                "dual identity: {} (100 instances, max discrepancy {:.3e})",
                pass_str(report.pass),
                report.max_discrepancy
            )?;
        }
        reports.push(json!({"suite": "dual", "pass": report.pass, "max_discrepancy": report.max_discrepancy}));
    }
    if matches!(suite, Suite::Compression | Suite::All) {
        let handle = RngHandle::new(COMPRESSION_SEED);
        let mut pass = true;
        let mut worst_slack = f64::NEG_INFINITY;
        for i in 0..20u64 {
            let mut rng = handle.sequence(StreamKind::Verification, i);
            let sigma = random_diagonal_state(5, &mut rng);
            let rho = random_diagonal_state(5, &mut rng);
            let report = verify_compression_convergence(&sigma, &rho)?;
            pass &= report.pass;
            let slack = (report.values.last().unwrap() - report.full_value).abs();
            worst_slack = worst_slack.max(slack);
        }
        all_pass &= pass;
        if !json {
            writeln!(
                out,
                "compression convergence: {} (20 diagonal pairs d=5, worst terminal gap {:.3e})",
                pass_str(pass),
                worst_slack
            )?;
        }
        reports.push(json!({"suite": "compression", "pass": pass, "worst_terminal_gap": worst_slack}));
    }
    if matches!(suite, Suite::Dpi | Suite::All) {
        let report = verify_dpi(200, DPI_SEED)?;
        all_pass &= report.pass;
        if !json {
            writeln!(
                out,
                "data processing: {} (200 instances, channel excess {:.3e}, measured excess {:.3e})",
                pass_str(report.pass),
                report.max_channel_excess,
                report.max_measured_excess
            )?;
        }
        reports.push(json!({
            "suite": "dpi",
            "pass": report.pass,
            "max_channel_excess": report.max_channel_excess,
            "max_measured_excess": report.max_measured_excess,
        }));
    }

    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&json!({"pass": all_pass, "suites": reports}))?)?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
