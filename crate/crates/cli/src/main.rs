//! Command-line runner for the cobandit simulator.
//!
//! Exit status is 0 on success, 1 when the scenario or arguments are invalid
//! and 2 when reading or writing files fails.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cobandit::experiment::{run_many_with, sweep, Batch, SweepParam};
use cobandit::gossip::GainMode;
use cobandit::metrics::{aggregate, Report, RunSummary};
use cobandit::scenarios;
use cobandit::sim::{Algorithm, RunRecord, ScenarioConfig, SlotRecord};
use cobandit::theory::{hear_probability, regret_bound, TheoryInputs};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cobandit", version, about = "Cooperative bandit network-selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a batch of seeded simulations and write traces and a report.
    Run(RunArgs),
    /// Run one batch per value of a parameter.
    Sweep(SweepArgs),
    /// Check a scenario and list every problem found.
    Validate {
        /// Preset name or path to a scenario JSON file.
        scenario: String,
    },
    /// Print a preset scenario as JSON.
    Show {
        /// One of the preset names.
        preset: String,
    },
    /// Evaluate the regret bound and the hearing probability.
    Theory(TheoryArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Preset name (baseline, uniform, skewed, leave, join_leave, mobility) or a JSON path.
    #[arg(long, default_value = "baseline")]
    scenario: String,
    /// Override every device's algorithm.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// Override the horizon, e.g. for long EXP3 runs.
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    minimal_reset: bool,
    #[arg(long, value_parser = parse_gain_mode)]
    gain_mode: Option<GainMode>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[arg(long, default_value_t = 100)]
    runs: u32,
    /// Seed of run 0; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    batch: BatchArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write a per-slot CSV for every run.
    #[arg(long)]
    traces: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 5)]
    k: u32,
    #[arg(long, default_value_t = 5)]
    d: u32,
    #[arg(long, default_value_t = 1200)]
    horizon: u64,
    #[arg(long, default_value_t = 0.0)]
    b0: f64,
    /// Devices, for the hearing probability.
    #[arg(long, default_value_t = 20)]
    n: u32,
    /// Per-hop hearing probability.
    #[arg(long, default_value_t = 0.05)]
    hop: f64,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<cobandit::Error> for Failure {
    fn from(e: cobandit::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, Failure>;

fn parse_gain_mode(s: &str) -> Result<GainMode, String> {
    match s {
        "reconstruct" => Ok(GainMode::Reconstruct),
        "literal" => Ok(GainMode::Literal),
        other => Err(format!("unknown gain mode '{other}' (reconstruct or literal)")),
    }
}

fn load_scenario(spec: &str) -> CliResult<ScenarioConfig> {
    if let Some(cfg) = scenarios::preset(spec) {
        return Ok(cfg);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Failure::Invalid(format!(
            "'{spec}' is neither a preset ({}) nor an existing file",
            scenarios::PRESETS.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn build_scenario(args: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(algo) = args.algo {
        cfg.set_algorithm(algo);
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if args.minimal_reset {
        cfg.params.minimal_reset = true;
    }
    if let Some(mode) = args.gain_mode {
        cfg.params.gain_mode = mode;
    }
    for kv in &args.overrides {
        let (name, value) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("override '{kv}' is not NAME=VALUE")))?;
        let param: SweepParam = name.trim().parse().map_err(Failure::Invalid)?;
        let value = match value.trim() {
            "true" => 1.0,
            "false" => 0.0,
            v => v
                .parse()
                .map_err(|_| Failure::Invalid(format!("override '{kv}': '{v}' is not a number")))?,
        };
        param.apply(&mut cfg, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn batch_of(args: &BatchArgs) -> Batch {
    Batch {
        runs: args.runs,
        base_seed: args.seed,
        threads: args.threads,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn csv_failure(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn write_trace(path: &Path, slots: &[SlotRecord]) -> CliResult {
    let mut w = csv_writer(path)?;
    let fail = csv_failure(path);
    w.write_record(SlotRecord::CSV_HEADER).map_err(&fail)?;
    for s in slots {
        for row in s.csv_rows() {
            w.write_record(&row).map_err(&fail)?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn write_distance(path: &Path, report: &Report) -> CliResult {
    let mut w = csv_writer(path)?;
    let fail = csv_failure(path);
    w.write_record(["slot", "mean_distance", "p10_distance", "p90_distance"])
        .map_err(&fail)?;
    for (i, m) in report.mean_distance.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            m.to_string(),
            report.p10_distance[i].to_string(),
            report.p90_distance[i].to_string(),
        ])
        .map_err(&fail)?;
    }
    w.flush().map_err(io_err(path))
}

/// Per-run facts, without the distance series already summarized in the report.
#[derive(Serialize)]
struct RunLine<'a> {
    seed: u64,
    stable: bool,
    stabilization_slot: Option<u32>,
    at_nash: bool,
    moves_to_ne: Option<u32>,
    downloads_bytes: &'a [(cobandit::DeviceId, f64)],
    switches: &'a [(cobandit::DeviceId, u32)],
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    runs: u32,
    base_seed: u64,
    report: &'a Report,
    per_run: Vec<RunLine<'a>>,
}

fn print_report(label: &str, r: &Report) {
    println!(
        "{label}: {:.1}% stable, {}/{} stable runs at NE, median stabilization slot {}, median download {:.3} GB",
        r.pct_stable,
        r.stable_at_ne_runs,
        r.stable_runs,
        r.median_stabilization_slot.map_or("-".to_string(), |m| m.to_string()),
        r.median_download_gb
    );
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let cfg = build_scenario(&args.scenario)?;
    let batch = batch_of(&args.batch);
    let runs_dir = args.out.join("runs");
    fs::create_dir_all(if args.traces { &runs_dir } else { &args.out }).map_err(io_err(&args.out))?;
    write_json(&args.out.join("config.json"), &cfg)?;
    log::info!("running '{}' x{} from seed {}", cfg.name, batch.runs, batch.base_seed);

    let summaries = run_many_with(&cfg, &batch, |r, record: &RunRecord| {
        if args.traces {
            let path = runs_dir.join(format!("run_{r}.csv"));
            write_trace(&path, &record.slots).map_err(|e| cobandit::Error::Precondition(e.to_string()))?;
        }
        Ok(())
    })
    .map_err(|e| match e {
        cobandit::Error::Precondition(m) if args.traces => Failure::Io(m),
        other => other.into(),
    })?;
    let report = aggregate(&summaries)?;
    write_summary(&args.out, &cfg, &batch, &report, &summaries)?;
    print_report(&cfg.name, &report);
    Ok(())
}

fn write_summary(
    out: &Path,
    cfg: &ScenarioConfig,
    batch: &Batch,
    report: &Report,
    summaries: &[RunSummary],
) -> CliResult {
    let per_run = summaries
        .iter()
        .map(|s| RunLine {
            seed: s.seed,
            stable: s.verdict.stable,
            stabilization_slot: s.verdict.stabilization_slot,
            at_nash: s.verdict.at_nash,
            moves_to_ne: s.verdict.moves_to_ne,
            downloads_bytes: &s.downloads,
            switches: &s.switches,
        })
        .collect();
    let summary = Summary {
        scenario: &cfg.name,
        runs: batch.runs,
        base_seed: batch.base_seed,
        report,
        per_run,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_distance(&out.join("distance.csv"), report)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let cfg = build_scenario(&args.scenario)?;
    let batch = batch_of(&args.batch);
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    write_json(&args.out.join("config.json"), &cfg)?;
    for &v in &args.values {
        let mut probe = cfg.clone();
        args.param.apply(&mut probe, v)?;
        probe.validate()?;
    }
    let points = sweep(&cfg, args.param, &args.values, &batch)?;
    write_json(&args.out.join("sweep.json"), &points)?;
    let path = args.out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    let fail = csv_failure(&path);
    w.write_record([
        args.param.to_string().as_str(),
        "pct_stable",
        "pct_stable_at_ne",
        "median_stabilization_slot",
        "median_download_gb",
    ])
    .map_err(&fail)?;
    for p in &points {
        let r = &p.report;
        w.write_record([
            p.value.to_string(),
            r.pct_stable.to_string(),
            r.pct_stable_at_ne.to_string(),
            r.median_stabilization_slot.map(|m| m.to_string()).unwrap_or_default(),
            r.median_download_gb.to_string(),
        ])
        .map_err(&fail)?;
        print_report(&format!("{}={}", args.param, p.value), r);
    }
    w.flush().map_err(io_err(&path))
}

fn cmd_validate(spec: &str) -> CliResult {
    let cfg = load_scenario(spec)?;
    let problems = cfg.problems();
    if problems.is_empty() {
        println!(
            "ok: {} devices, {} networks, {} slots",
            cfg.devices.len(),
            cfg.networks.len(),
            cfg.horizon
        );
        Ok(())
    } else {
        for p in &problems {
            println!("{p}");
        }
        Err(Failure::Invalid(format!("{} problem(s) found", problems.len())))
    }
}

fn cmd_show(name: &str) -> CliResult {
    let cfg = scenarios::preset(name)
        .ok_or_else(|| Failure::Invalid(format!("unknown preset '{name}' ({})", scenarios::PRESETS.join(", "))))?;
    println!("{}", cfg.to_json_pretty());
    Ok(())
}

#[derive(Serialize)]
struct TheoryOut {
    k: u32,
    d: u32,
    horizon: u64,
    b0: f64,
    eta_star: f64,
    regret_bound: f64,
    hear_probability: Vec<(u32, f64)>,
}

fn cmd_theory(args: &TheoryArgs) -> CliResult {
    let bound = regret_bound(&TheoryInputs {
        k: args.k,
        d: args.d,
        horizon: args.horizon,
        b0: args.b0,
        n: args.n,
        eta: None,
    })?;
    let hear = (0..=args.d)
        .map(|delay| hear_probability(args.n, args.hop, delay).map(|p| (delay, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let out = TheoryOut {
        k: args.k,
        d: args.d,
        horizon: args.horizon,
        b0: args.b0,
        eta_star: bound.eta_star,
        regret_bound: bound.bound,
        hear_probability: hear,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).map_err(|e| Failure::Io(e.to_string()))?
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COBANDIT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Show { preset } => cmd_show(preset),
        Command::Theory(a) => cmd_theory(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
