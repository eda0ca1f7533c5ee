//! Command-line front end: configuration, dispatch, and persistence.
//!
//! Every subcommand takes its parameters from flags, optionally backed by a
//! flat TOML config file (flags win). All randomness flows from a single
//! `--seed`; artifacts embed the resolved configuration so a rerun with the
//! same inputs reproduces them byte for byte.

use crate::adaptive::{
    empirical_rates, injection_field, make_backend, reweight, run_calibration, run_main,
    BackendKind, EventKind, PhysicalNoise, PhysicalSpec, RateField, ShotRecord, SyntheticSpec,
};
use crate::analysis::{bootstrap_se, crossing_estimate, effective_exponent, EffExpSeries};
use crate::code422::{build_gadget, ft_check, GadgetKind};
use crate::dephased::run_ensemble;
use crate::dm::{build_reuse_schedule, simulate_with_cap, DEFAULT_LIVE_CAP};
use crate::model::{build_circuit, ModelParams};
use crate::observables::ObservableSeries;
use crate::report::resource_report;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files (exit 2).
    Config(String),
    /// Resource limits: window caps, qubit caps, budgets (exit 3).
    Resource(String),
    /// Numerical invariant violations and estimator failures (exit 4).
    Numerical(String),
    /// I/O trouble (exit 1).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::dm::DmError> for CliError {
    fn from(e: crate::dm::DmError) -> Self {
        match e {
            crate::dm::DmError::Window(crate::dm::WindowError::WindowTooLarge { .. }) => {
                CliError::Resource(e.to_string())
            }
            crate::dm::DmError::Window(crate::dm::WindowError::TraceDrift { .. }) => {
                CliError::Numerical(e.to_string())
            }
            crate::dm::DmError::Model(m) => CliError::Config(m.to_string()),
        }
    }
}

impl From<crate::adaptive::AdaptiveError> for CliError {
    fn from(e: crate::adaptive::AdaptiveError) -> Self {
        use crate::adaptive::AdaptiveError::*;
        match e {
            TooManyQubits(_) => CliError::Resource(e.to_string()),
            DetectionExceedsTarget(_) | DegenerateRate(_) => CliError::Numerical(e.to_string()),
            MalformedField(_) | NoRecords => CliError::Config(e.to_string()),
        }
    }
}

impl From<crate::analysis::AnalysisError> for CliError {
    fn from(e: crate::analysis::AnalysisError) -> Self {
        use crate::analysis::AnalysisError::*;
        match e {
            GridTooSmall => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "fqcp",
    about = "Contact-process circuit simulators with [[4,2,2]] error detection",
    version
)]
pub struct Cli {
    /// Flat TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo ensembles of the fully-dephased classical model.
    Dephased(DephasedArgs),
    /// Exact density-matrix evolution with qubit reuse.
    Dm(DmArgs),
    /// Fault-tolerance reports for the gadget library.
    Ftcheck(FtcheckArgs),
    /// Calibration, injection and main run of the adaptive protocol.
    Adaptive(AdaptiveArgs),
    /// Importance-sampling reweighting of recorded shots.
    Reweight(ReweightArgs),
    /// Effective exponents, crossings and bootstrap errors.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DephasedArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated reset rates; overrides --p.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep per-shot N_R trajectories in memory (bootstrap input).
    #[arg(long, default_value_t = false)]
    pub store_shots: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DmArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub t: Option<u32>,
    /// Live-site cap of the reuse window.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FtcheckArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AdaptiveArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    /// Target combined reset rate.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub shots: Option<u64>,
    /// Calibration-run shots (defaults to --shots).
    #[arg(long)]
    pub cal_shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `synthetic` or `physical`.
    #[arg(long)]
    pub backend: Option<String>,
    /// CSV rate field (t,r,p) of synthetic detection events.
    #[arg(long)]
    pub detect_field: Option<PathBuf>,
    /// CSV rate field of synthetic leakage-detection events.
    #[arg(long)]
    pub leak_field: Option<PathBuf>,
    /// Physical backend block range, e.g. "-1,1".
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub blocks: Option<Vec<i32>>,
    /// Physical noise: 1q gate, 2q gate, measurement-flip rates.
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub meas_flip: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub store_shots: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReweightArgs {
    /// JSON-lines shot records from an adaptive run.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Target reset rate.
    #[arg(long)]
    pub p: Option<f64>,
    /// Error out on degenerate empirical rates instead of clipping.
    #[arg(long, default_value_t = false)]
    pub strict_reweight: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AnalyzeArgs {
    /// Combined scan CSV with columns p,t,mean_NR[,se_NR,shots].
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<u32>,
    /// Times used for the crossing estimate.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<u32>>,
    /// Optional records.jsonl for a bootstrap of final N_R.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub resamples: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // Ignore the error when a pool already exists (repeated calls in
        // one process, e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let table = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Dephased(args) => cmd_dephased(args, &table),
        Command::Dm(args) => cmd_dm(args, &table),
        Command::Ftcheck(args) => cmd_ftcheck(args, &table),
        Command::Adaptive(args) => cmd_adaptive(args, &table),
        Command::Reweight(args) => cmd_reweight(args, &table),
        Command::Analyze(args) => cmd_analyze(args, &table),
    }
}

fn load_config(path: Option<&Path>) -> Result<toml::Table, CliError> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("bad config {}: {e}", p.display())))
        }
    }
}

// Config-or-flag resolution helpers: flags win, then the config file, then
// an optional default.

fn want<T: Clone>(flag: &Option<T>, table: &toml::Table, key: &str, from: impl Fn(&toml::Value) -> Option<T>) -> Option<T> {
    flag.clone().or_else(|| table.get(key).and_then(|v| from(v)))
}

fn need<T: Clone>(
    flag: &Option<T>,
    table: &toml::Table,
    key: &str,
    from: impl Fn(&toml::Value) -> Option<T>,
) -> Result<T, CliError> {
    want(flag, table, key, from).ok_or_else(|| CliError::Config(format!("missing `{key}`")))
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn as_u64(v: &toml::Value) -> Option<u64> {
    v.as_integer().map(|i| i as u64)
}

fn as_u32(v: &toml::Value) -> Option<u32> {
    v.as_integer().map(|i| i as u32)
}

fn as_path(v: &toml::Value) -> Option<PathBuf> {
    v.as_str().map(PathBuf::from)
}

fn out_dir(out: &Option<PathBuf>, table: &toml::Table) -> Result<PathBuf, CliError> {
    let dir = need(out, table, "out", as_path)?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &text)
}

/// CSV prologue embedding the resolved run configuration.
fn config_banner<T: Serialize>(config: &T) -> String {
    format!("# config: {}\n", serde_json::to_string(config).expect("serializable"))
}

fn format_p(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

// ------------------------------------------------------------ subcommands

#[derive(Serialize)]
struct DephasedConfig {
    theta: f64,
    p_grid: Vec<f64>,
    t: u32,
    shots: u64,
    seed: u64,
    store_shots: bool,
}

fn cmd_dephased(args: DephasedArgs, table: &toml::Table) -> Result<(), CliError> {
    let theta = need(&args.theta, table, "theta", as_f64)?;
    let t = need(&args.t, table, "t", as_u32)?;
    let shots = need(&args.shots, table, "shots", as_u64)?;
    let seed = want(&args.seed, table, "seed", as_u64).unwrap_or(0);
    let p_grid = resolve_p_grid(&args.p, &args.p_grid, table)?;
    let dir = out_dir(&args.out, table)?;
    let config = DephasedConfig {
        theta,
        p_grid: p_grid.clone(),
        t,
        shots,
        seed,
        store_shots: args.store_shots,
    };
    let banner = config_banner(&config);

    let mut scan = banner.clone();
    scan.push_str("p,t,mean_NR,se_NR,shots\n");
    for &p in &p_grid {
        let circuit = build_circuit(&ModelParams::new(theta, p, t))?;
        let series = run_ensemble(&circuit, theta, p, shots, seed, args.store_shots);
        write_series(&dir, "dephased", p, &series, &banner)?;
        for tt in 0..=t {
            scan.push_str(&format!(
                "{},{},{},{},{}\n",
                p,
                tt,
                series.n_right[tt as usize],
                series.n_right_se[tt as usize],
                shots
            ));
        }
    }
    write_text(&dir.join("scan.csv"), &scan)?;
    write_json(&dir.join("meta.json"), &config)?;
    println!("dephased scan written to {}", dir.display());
    Ok(())
}

fn resolve_p_grid(
    p: &Option<f64>,
    p_grid: &Option<Vec<f64>>,
    table: &toml::Table,
) -> Result<Vec<f64>, CliError> {
    if let Some(grid) = p_grid {
        return Ok(grid.clone());
    }
    if let Some(v) = table.get("p_grid").and_then(|v| v.as_array()) {
        let grid: Option<Vec<f64>> = v.iter().map(as_f64).collect();
        if let Some(grid) = grid {
            return Ok(grid);
        }
    }
    Ok(vec![need(p, table, "p", as_f64)?])
}

fn write_series(
    dir: &Path,
    prefix: &str,
    p: f64,
    series: &ObservableSeries,
    banner: &str,
) -> Result<(), CliError> {
    let mut density = banner.to_string().into_bytes();
    series.write_density_csv(&mut density)?;
    write_text(
        &dir.join(format!("{prefix}_density_p{}.csv", format_p(p))),
        &String::from_utf8(density).expect("utf8"),
    )?;
    let mut csv = banner.to_string().into_bytes();
    series.write_series_csv(&mut csv)?;
    write_text(
        &dir.join(format!("{prefix}_series_p{}.csv", format_p(p))),
        &String::from_utf8(csv).expect("utf8"),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct DmConfig {
    theta: f64,
    p_grid: Vec<f64>,
    t: u32,
    cap: usize,
}

fn cmd_dm(args: DmArgs, table: &toml::Table) -> Result<(), CliError> {
    let theta = need(&args.theta, table, "theta", as_f64)?;
    let t = need(&args.t, table, "t", as_u32)?;
    let cap = want(&args.cap, table, "cap", |v| v.as_integer().map(|i| i as usize))
        .unwrap_or(DEFAULT_LIVE_CAP);
    let p_grid = resolve_p_grid(&args.p, &args.p_grid, table)?;
    let dir = out_dir(&args.out, table)?;
    let config = DmConfig { theta, p_grid: p_grid.clone(), t, cap };
    let banner = config_banner(&config);

    let circuit = build_circuit(&ModelParams::new(theta, p_grid[0], t))?;
    let schedule = build_reuse_schedule(&circuit);
    #[derive(Serialize)]
    struct ScheduleReport<'a> {
        max_live: usize,
        ops: &'a [crate::dm::ScheduleOp],
    }
    write_json(
        &dir.join("schedule.json"),
        &ScheduleReport { max_live: schedule.max_live, ops: &schedule.ops },
    )?;
    write_json(&dir.join("resources.json"), &resource_report(&circuit, false))?;

    let mut scan = banner.clone();
    scan.push_str("p,t,mean_NR,se_NR,shots\n");
    for &p in &p_grid {
        let series = simulate_with_cap(&ModelParams::new(theta, p, t), cap)?;
        write_series(&dir, "dm", p, &series, &banner)?;
        for tt in 0..=t {
            scan.push_str(&format!(
                "{},{},{},0,0\n",
                p,
                tt,
                series.n_right[tt as usize]
            ));
        }
    }
    write_text(&dir.join("scan.csv"), &scan)?;
    write_json(&dir.join("meta.json"), &config)?;
    println!("dm scan written to {}", dir.display());
    Ok(())
}

fn cmd_ftcheck(args: FtcheckArgs, table: &toml::Table) -> Result<(), CliError> {
    let dir = out_dir(&args.out, table)?;
    let pi = std::f64::consts::PI;
    let gadgets = [
        build_gadget(GadgetKind::StabMeas, None).unwrap(),
        build_gadget(GadgetKind::Reset00, None).unwrap(),
        build_gadget(GadgetKind::MeasZ1, None).unwrap(),
        build_gadget(GadgetKind::MeasZ2, None).unwrap(),
        build_gadget(GadgetKind::CrxIntra { control: 1 }, Some(pi)).unwrap(),
        build_gadget(GadgetKind::CrxIntra { control: 2 }, Some(pi)).unwrap(),
        build_gadget(GadgetKind::CrxInter, Some(pi)).unwrap(),
    ];
    let mut reports = Vec::new();
    let mut netlists = String::new();
    for g in &gadgets {
        let report = ft_check(g).map_err(|e| CliError::Numerical(e.to_string()))?;
        println!(
            "{:ticks$}{:?}: {}",
            "",
            g.kind,
            if report.is_ft { "fault-tolerant" } else { "NOT fault-tolerant" },
            ticks = 2
        );
        reports.push(report);
        netlists.push_str(&g.netlist());
        netlists.push('\n');
    }
    write_json(&dir.join("ft_report.json"), &reports)?;
    write_text(&dir.join("netlists.txt"), &netlists)?;
    println!("fault-tolerance reports written to {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct AdaptiveConfig {
    theta: f64,
    p: f64,
    t: u32,
    shots: u64,
    cal_shots: u64,
    seed: u64,
    backend: String,
    detect_field: Option<PathBuf>,
    leak_field: Option<PathBuf>,
    blocks: Option<(i32, i32)>,
    p1: f64,
    p2: f64,
    meas_flip: f64,
}

fn cmd_adaptive(args: AdaptiveArgs, table: &toml::Table) -> Result<(), CliError> {
    let theta = need(&args.theta, table, "theta", as_f64)?;
    let p = need(&args.p, table, "p", as_f64)?;
    let t = need(&args.t, table, "t", as_u32)?;
    let shots = need(&args.shots, table, "shots", as_u64)?;
    let cal_shots = want(&args.cal_shots, table, "cal_shots", as_u64).unwrap_or(shots);
    let seed = want(&args.seed, table, "seed", as_u64).unwrap_or(0);
    let backend_kind = want(&args.backend, table, "backend", |v| v.as_str().map(String::from))
        .unwrap_or_else(|| "synthetic".to_string());
    let dir = out_dir(&args.out, table)?;

    let circuit = build_circuit(&ModelParams::new(theta, p, t))?;
    let read_field = |path: &PathBuf| -> Result<RateField, CliError> {
        let file = fs::File::open(path)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        Ok(RateField::read_csv(BufReader::new(file))?)
    };

    let blocks = args.blocks.as_ref().map(|b| (b[0], b[1]));
    let p1 = want(&args.p1, table, "p1", as_f64).unwrap_or(0.0);
    let p2 = want(&args.p2, table, "p2", as_f64).unwrap_or(0.0);
    let meas_flip = want(&args.meas_flip, table, "meas_flip", as_f64).unwrap_or(0.0);
    let backend = match backend_kind.as_str() {
        "synthetic" => {
            let mut detect = Vec::new();
            if let Some(path) = &args.detect_field {
                detect.push((EventKind::DetectedSx, read_field(path)?));
            }
            if let Some(path) = &args.leak_field {
                // leakage is checked before the stabilizer field
                detect.insert(0, (EventKind::DetectedLeakage, read_field(path)?));
            }
            make_backend(BackendKind::Synthetic(SyntheticSpec { detect, logical_errors: None }))?
        }
        "physical" => {
            let blocks = blocks.ok_or_else(|| {
                CliError::Config("physical backend needs --blocks lo,hi".to_string())
            })?;
            make_backend(BackendKind::Physical(PhysicalSpec {
                blocks,
                noise: PhysicalNoise { p1, p2, meas_flip, mem_z: vec![] },
                detections_enabled: true,
                measure_final: true,
            }))?
        }
        other => return Err(CliError::Config(format!("unknown backend `{other}`"))),
    };

    let config = AdaptiveConfig {
        theta,
        p,
        t,
        shots,
        cal_shots,
        seed,
        backend: backend_kind,
        detect_field: args.detect_field.clone(),
        leak_field: args.leak_field.clone(),
        blocks,
        p1,
        p2,
        meas_flip,
    };
    let banner = config_banner(&config);

    let calibration = run_calibration(&circuit, &backend, cal_shots, seed)?;
    let injection = injection_field(p, &calibration)?;
    let records = run_main(&circuit, &backend, &injection, shots, seed)?;
    let rates = empirical_rates(&records)?;

    for (name, field) in [
        ("calibration.csv", &calibration),
        ("injection.csv", &injection),
        ("empirical.csv", &rates),
    ] {
        let mut buf = banner.clone().into_bytes();
        field.write_csv(&mut buf)?;
        write_text(&dir.join(name), &String::from_utf8(buf).expect("utf8"))?;
    }
    let mut jsonl = String::new();
    for rec in &records {
        jsonl.push_str(&rec.to_jsonl());
        jsonl.push('\n');
    }
    write_text(&dir.join("records.jsonl"), &jsonl)?;
    write_json(&dir.join("resources.json"), &resource_report(&circuit, true))?;
    write_json(&dir.join("meta.json"), &config)?;
    println!("adaptive run written to {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ReweightConfig {
    records: PathBuf,
    p: f64,
    strict: bool,
    seed: u64,
}

fn cmd_reweight(args: ReweightArgs, table: &toml::Table) -> Result<(), CliError> {
    let records_path = need(&args.records, table, "records", as_path)?;
    let p = need(&args.p, table, "p", as_f64)?;
    let seed = want(&args.seed, table, "seed", as_u64).unwrap_or(0);
    let dir = out_dir(&args.out, table)?;
    let config =
        ReweightConfig { records: records_path.clone(), p, strict: args.strict_reweight, seed };
    let banner = config_banner(&config);

    let file = fs::File::open(&records_path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", records_path.display())))?;
    let mut records: Vec<ShotRecord> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            ShotRecord::from_jsonl(&line)
                .map_err(|e| CliError::Config(format!("bad record: {e}")))?,
        );
    }
    let empirical = empirical_rates(&records)?;
    let outcome = reweight(&records, p, &empirical, args.strict_reweight)?;

    let mut jsonl = String::new();
    for (rec, &w) in records.iter().zip(&outcome.weights) {
        let mut rec = rec.clone();
        rec.weight = Some(w);
        jsonl.push_str(&rec.to_jsonl());
        jsonl.push('\n');
    }
    write_text(&dir.join("reweighted.jsonl"), &jsonl)?;

    let mut buf = banner.clone().into_bytes();
    outcome.reset_rate.write_csv(&mut buf)?;
    write_text(&dir.join("weighted_rates.csv"), &String::from_utf8(buf).expect("utf8"))?;

    let mut density = banner.clone();
    density.push_str("r,weighted_n\n");
    for (&site, &v) in &outcome.final_density {
        density.push_str(&format!("{site},{v}\n"));
    }
    write_text(&dir.join("weighted_density.csv"), &density)?;

    let nr: Vec<(f64, f64)> = records
        .iter()
        .zip(&outcome.weights)
        .map(|(r, &w)| (r.final_n_right(), w))
        .collect();
    let weighted_mean = crate::analysis::weighted_mean(&nr);
    let nr_se = bootstrap_se(&nr, crate::analysis::weighted_mean, 200, seed)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a ReweightConfig,
        mean_weight: f64,
        clipped_points: usize,
        weighted_n_right_final: f64,
        weighted_n_right_se: f64,
    }
    write_json(
        &dir.join("summary.json"),
        &Summary {
            config: &config,
            mean_weight: outcome.mean_weight,
            clipped_points: outcome.clipped.len(),
            weighted_n_right_final: weighted_mean,
            weighted_n_right_se: nr_se,
        },
    )?;
    println!(
        "reweighted {} records (mean weight {:.6}) into {}",
        records.len(),
        outcome.mean_weight,
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeConfig {
    input: Option<PathBuf>,
    dt: u32,
    times: Vec<u32>,
    records: Option<PathBuf>,
    resamples: u32,
    seed: u64,
}

fn cmd_analyze(args: AnalyzeArgs, table: &toml::Table) -> Result<(), CliError> {
    let dt = need(&args.dt, table, "dt", as_u32)?;
    let seed = want(&args.seed, table, "seed", as_u64).unwrap_or(0);
    let resamples = want(&args.resamples, table, "resamples", as_u32).unwrap_or(200);
    let times = args
        .times
        .clone()
        .or_else(|| {
            table.get("times").and_then(|v| v.as_array()).map(|a| {
                a.iter().filter_map(|v| v.as_integer().map(|i| i as u32)).collect()
            })
        })
        .unwrap_or_default();
    let dir = out_dir(&args.out, table)?;
    let input = want(&args.input, table, "input", as_path);
    let config = AnalyzeConfig {
        input: input.clone(),
        dt,
        times: times.clone(),
        records: args.records.clone(),
        resamples,
        seed,
    };
    let banner = config_banner(&config);

    if let Some(input) = &input {
        let text = fs::read_to_string(input)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
        let mut by_p: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
        for line in text.lines().skip_while(|l| l.starts_with('#')) {
            if line.starts_with('#') || line.starts_with('p') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(CliError::Config(format!("bad scan row: {line}")));
            }
            let t: u32 = fields[1]
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad scan row: {line}")))?;
            let v: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad scan row: {line}")))?;
            by_p.entry(fields[0].trim().to_string()).or_default().insert(t, v);
        }
        let mut curves: Vec<EffExpSeries> = Vec::new();
        let mut delta_csv = banner.clone();
        delta_csv.push_str("p,t,delta\n");
        for (p_label, series) in &by_p {
            let p: f64 = p_label
                .parse()
                .map_err(|_| CliError::Config(format!("bad p value `{p_label}`")))?;
            let positive: BTreeMap<u32, f64> =
                series.iter().filter(|&(_, &v)| v > 0.0).map(|(&t, &v)| (t, v)).collect();
            let curve = effective_exponent(&positive, dt, p)?;
            for &(t, d) in &curve.values {
                delta_csv.push_str(&format!("{p_label},{t},{d}\n"));
            }
            curves.push(curve);
        }
        write_text(&dir.join("delta.csv"), &delta_csv)?;
        if times.len() >= 2 {
            let estimate = crossing_estimate(&curves, &times)?;
            #[derive(Serialize)]
            struct CrossingReport<'a> {
                config: &'a AnalyzeConfig,
                estimate: &'a crate::analysis::CrossingEstimate,
            }
            write_json(
                &dir.join("crossing.json"),
                &CrossingReport { config: &config, estimate: &estimate },
            )?;
            println!(
                "crossing: p_c = {:.4} +- {:.4}, exponent = {:.4} +- {:.4}",
                estimate.p_c, estimate.p_c_scatter, estimate.exponent, estimate.exponent_scatter
            );
        }
    }

    if let Some(records_path) = &args.records {
        let file = fs::File::open(records_path)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", records_path.display())))?;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = ShotRecord::from_jsonl(&line)
                .map_err(|e| CliError::Config(format!("bad record: {e}")))?;
            samples.push((rec.final_n_right(), rec.weight.unwrap_or(1.0)));
        }
        let mean = crate::analysis::weighted_mean(&samples);
        let se = bootstrap_se(&samples, crate::analysis::weighted_mean, resamples, seed)?;
        #[derive(Serialize)]
        struct Bootstrap<'a> {
            config: &'a AnalyzeConfig,
            n_right_mean: f64,
            n_right_se: f64,
            samples: usize,
        }
        write_json(
            &dir.join("bootstrap.json"),
            &Bootstrap { config: &config, n_right_mean: mean, n_right_se: se, samples: samples.len() },
        )?;
        println!("bootstrap: N_R = {mean:.4} +- {se:.4}");
    }
    write_json(&dir.join("meta.json"), &config)?;
    Ok(())
}
