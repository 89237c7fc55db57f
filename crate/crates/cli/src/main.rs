//! Batch front end: run scenarios through the cascade engine and the
//! reference solvers, writing CSV time series and JSON manifests.
//!
//! Exit codes: 0 success, 1 invariant violation or runtime failure,
//! 2 configuration or usage error, 3 memory budget exceeded.

mod config;
mod engines;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use delayloop::{MemoryBudget, Simulation};
use rayon::prelude::*;
use serde::Serialize;

use config::{parse_engines, Engine, ScenarioConfig, SweepParam};
use engines::{model_columns, run_engine, EngineError, EngineRun};
use output::{fmt_num, with_suffix, write_manifest, write_series, write_table, EngineEntry, Manifest};

const PRESETS: [(&str, &str); 3] = [
    ("panel_a", include_str!("../presets/panel_a.toml")),
    ("panel_b", include_str!("../presets/panel_b.toml")),
    ("panel_c", include_str!("../presets/panel_c.toml")),
];

#[derive(Parser)]
#[command(name = "delayloop", version, about = "Quantum systems with time-delayed coherent feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured engine and write one CSV per engine.
    Run(Common),
    /// Run two engines on the same grid and write their difference.
    Compare(Common),
    /// Repeat a run over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Scenario instances run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in scenarios, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML with dotted keys).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
    /// Output base path; files are `<output>.csv`, `<output>.manifest.json`, ...
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated engines, overriding the scenario.
    #[arg(long)]
    engines: Option<String>,
    /// Integrator tolerance, overriding the scenario.
    #[arg(long)]
    tolerance: Option<f64>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
    fn runtime(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    cfg: ScenarioConfig,
    source: String,
    output: PathBuf,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let (text, source, stem) = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::usage)?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            (text, path.display().to_string(), stem)
        }
        (None, Some(name)) => {
            let text = preset(name).map_err(Failure::usage)?;
            (text.to_string(), format!("preset:{name}"), name.clone())
        }
        (None, None) => return Err(Failure::usage(anyhow!("either --config or --preset is required"))),
    };
    let mut cfg = ScenarioConfig::parse(&text)
        .with_context(|| format!("invalid configuration {source}"))
        .map_err(Failure::usage)?;
    if let Some(list) = &common.engines {
        cfg.run.engines = parse_engines(list).map_err(Failure::usage)?;
    }
    if let Some(tol) = common.tolerance {
        cfg.integrator.tolerance = Some(tol);
    }
    cfg.validate().map_err(Failure::usage)?;
    let output = common
        .output
        .clone()
        .or_else(|| cfg.run.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(stem));
    Ok(Loaded { cfg, source, output })
}

fn preset(name: &str) -> anyhow::Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| anyhow!("unknown preset `{name}` (available: panel_a, panel_b, panel_c)"))
}

fn budget() -> Result<MemoryBudget, Failure> {
    MemoryBudget::from_env().map_err(|e| Failure::usage(e.into()))
}

fn time_cap(cfg: &ScenarioConfig, budget: &MemoryBudget) -> f64 {
    cfg.model
        .system()
        .map(|sys| Simulation::new(sys).with_budget(*budget).max_reachable_time())
        .unwrap_or(f64::NAN)
}

fn base_notes(cfg: &ScenarioConfig, cap: f64) -> Vec<String> {
    let mut notes: Vec<String> = cfg.run.note.iter().cloned().collect();
    if cfg.run.engines.contains(&Engine::Cascade) && cfg.t_max() > cap {
        notes.push(format!("t_max = {} exceeds the cascade time cap {cap} under the memory budget", cfg.t_max()));
    }
    notes
}

/// Outcome of one engine, with the failure it should map to.
struct Attempt {
    run: Option<EngineRun>,
    failure: Option<Failure>,
}

fn attempt(cfg: &ScenarioConfig, engine: Engine, budget: &MemoryBudget) -> Attempt {
    match run_engine(cfg, engine, budget) {
        Ok(run) => {
            let bad = run.invariant_violations();
            let failure = bad.first().map(|&i| {
                Failure::runtime(anyhow!(
                    "{engine}: {} samples violate the trace/positivity bounds, first at t = {} (trace_err {:.3e}, min_eig {:.3e})",
                    bad.len(),
                    run.rows[i][0],
                    run.rows[i][4],
                    run.rows[i][5]
                ))
            });
            Attempt { run: Some(run), failure }
        }
        Err(EngineError::Budget { partial, error }) => Attempt {
            run: partial.map(|r| *r),
            failure: Some(Failure { code: 3, error: anyhow!("{engine}: {error}") }),
        },
        Err(EngineError::Other(e)) => Attempt { run: None, failure: Some(Failure::runtime(e.context(format!("{engine} failed")))) },
    }
}

fn engine_csv(output: &Path, index: usize, engine: Engine) -> PathBuf {
    if index == 0 {
        with_suffix(output, ".csv")
    } else {
        with_suffix(output, &format!(".{engine}.csv"))
    }
}

/// Worst failure wins: invariant violations and crashes over budget limits.
fn merge(failures: Vec<Failure>) -> Outcome {
    let mut failures = failures;
    failures.sort_by_key(|f| match f.code {
        1 => 0,
        3 => 1,
        _ => 2,
    });
    let mut iter = failures.into_iter();
    match iter.next() {
        None => Ok(()),
        Some(first) => {
            for other in iter {
                eprintln!("error: {:#}", other.error);
            }
            Err(first)
        }
    }
}

fn cmd_run(common: &Common) -> Outcome {
    let start = Instant::now();
    let Loaded { cfg, source, output } = load(common)?;
    let budget = budget()?;
    let columns = model_columns(&cfg);
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, &engine) in cfg.run.engines.iter().enumerate() {
        let Attempt { run, failure } = attempt(&cfg, engine, &budget);
        if let Some(run) = run {
            let path = engine_csv(&output, i, engine);
            write_series(&path, columns, &run.rows).map_err(Failure::runtime)?;
            eprintln!("{engine}: {} samples -> {}", run.samples, path.display());
            runs.push((path, run));
        }
        failures.extend(failure);
    }
    let invariant_broken = failures.iter().any(|f| f.code == 1);
    if !invariant_broken {
        let cap = time_cap(&cfg, &budget);
        let mut notes = base_notes(&cfg, cap);
        for (_, run) in &runs {
            if let Some(t) = &run.truncated {
                notes.push(format!("{} output truncated at t = {}: {}", run.engine, t.reachable_t, t.message));
            }
        }
        notes.extend(failures.iter().map(|f| format!("{:#}", f.error)));
        let manifest = Manifest {
            command: "run",
            library_version: delayloop::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            config_source: source,
            config: &cfg,
            t_max: cfg.t_max(),
            cascade_time_cap: cap,
            memory_budget_mb: budget.megabytes(),
            wall_time_s: start.elapsed().as_secs_f64(),
            completed: failures.is_empty(),
            engines: runs.iter().map(|(p, r)| EngineEntry { csv: p.display().to_string(), run: r }).collect(),
            notes,
        };
        write_manifest(&with_suffix(&output, ".manifest.json"), &manifest).map_err(Failure::runtime)?;
    }
    merge(failures)
}

fn cmd_compare(common: &Common) -> Outcome {
    let start = Instant::now();
    let Loaded { cfg, source, output } = load(common)?;
    let [e1, e2] = cfg.run.engines[..] else {
        return Err(Failure::usage(anyhow!(
            "compare needs exactly two engines, got {}",
            cfg.run.engines.len()
        )));
    };
    let budget = budget()?;
    let a = attempt(&cfg, e1, &budget);
    let b = attempt(&cfg, e2, &budget);
    let failures: Vec<Failure> = a.failure.into_iter().chain(b.failure).collect();
    let empty = |e| EngineRun::empty(e);
    let (ra, rb) = (a.run.unwrap_or_else(|| empty(e1)), b.run.unwrap_or_else(|| empty(e2)));
    let cavity = cfg.model.is_cavity();
    let mut header = vec!["t".to_string()];
    let picked: &[usize] = if cavity { &[1, 2] } else { &[1] };
    let names = model_columns(&cfg);
    for e in [e1, e2] {
        header.extend(picked.iter().map(|&c| format!("{}_{e}", names[c - 1])));
    }
    header.push("abs_diff".into());
    let n = ra.rows.len().min(rb.rows.len());
    let rows = (0..n).map(|i| {
        let (x, y) = (&ra.rows[i], &rb.rows[i]);
        let diff = if cavity { (x[1] - y[1]).hypot(x[2] - y[2]) } else { (x[1] - y[1]).abs() };
        let mut row = vec![fmt_num(x[0])];
        row.extend(picked.iter().map(|&c| fmt_num(x[c])));
        row.extend(picked.iter().map(|&c| fmt_num(y[c])));
        row.push(fmt_num(diff));
        row
    });
    let path = with_suffix(&output, ".csv");
    write_table(&path, &header, rows).map_err(Failure::runtime)?;
    eprintln!("{e1} vs {e2}: {n} samples -> {}", path.display());
    if !failures.iter().any(|f| f.code == 1) {
        let cap = time_cap(&cfg, &budget);
        let mut notes = base_notes(&cfg, cap);
        notes.extend(failures.iter().map(|f| format!("{:#}", f.error)));
        let max_diff = (0..n)
            .map(|i| {
                let (x, y) = (&ra.rows[i], &rb.rows[i]);
                if cavity { (x[1] - y[1]).hypot(x[2] - y[2]) } else { (x[1] - y[1]).abs() }
            })
            .fold(0.0, f64::max);
        notes.push(format!("max abs_diff = {max_diff:.6e} over {n} samples"));
        let manifest = Manifest {
            command: "compare",
            library_version: delayloop::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            config_source: source,
            config: &cfg,
            t_max: cfg.t_max(),
            cascade_time_cap: cap,
            memory_budget_mb: budget.megabytes(),
            wall_time_s: start.elapsed().as_secs_f64(),
            completed: failures.is_empty(),
            engines: [&ra, &rb].into_iter().map(|r| EngineEntry { csv: path.display().to_string(), run: r }).collect(),
            notes,
        };
        write_manifest(&with_suffix(&output, ".manifest.json"), &manifest).map_err(Failure::runtime)?;
    }
    merge(failures)
}

#[derive(Serialize)]
struct SweepInstance {
    value: f64,
    csv: String,
    #[serde(flatten)]
    run: Option<EngineRun>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    command: &'static str,
    library_version: &'static str,
    cli_version: &'static str,
    config_source: String,
    config: &'a ScenarioConfig,
    parameter: &'static str,
    engine: Engine,
    memory_budget_mb: u64,
    wall_time_s: f64,
    completed: bool,
    instances: Vec<SweepInstance>,
    notes: Vec<String>,
}

/// Late-time metrics over the last delay interval of a run: final value,
/// mean and peak-to-trough amplitude of the leading observable.
fn late_metrics(run: &EngineRun, column: usize, tau: f64) -> [f64; 3] {
    let Some(last) = run.rows.last() else {
        return [f64::NAN; 3];
    };
    let late: Vec<f64> = run.rows.iter().filter(|r| r[0] >= last[0] - tau).map(|r| r[column]).collect();
    let mean = late.iter().sum::<f64>() / late.len() as f64;
    let max = late.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = late.iter().copied().fold(f64::INFINITY, f64::min);
    [last[column], mean, max - min]
}

fn cmd_sweep(common: &Common, param: SweepParam, values: &str, jobs: usize) -> Outcome {
    let start = Instant::now();
    let Loaded { cfg, source, output } = load(common)?;
    let values: Vec<f64> = values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("invalid sweep value `{s}`")))
        .collect::<anyhow::Result<_>>()
        .map_err(Failure::usage)?;
    if values.is_empty() {
        return Err(Failure::usage(anyhow!("--values must list at least one value")));
    }
    if jobs == 0 {
        return Err(Failure::usage(anyhow!("--jobs must be at least 1")));
    }
    let engine = cfg.run.engines[0];
    let instances: Vec<ScenarioConfig> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.model.set(param, v)?;
            c.run.engines = vec![engine];
            c.validate().with_context(|| format!("{} = {v}", param.name()))?;
            Ok(c)
        })
        .collect::<anyhow::Result<_>>()
        .map_err(Failure::usage)?;
    let budget = budget()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::runtime(e.into()))?;
    let attempts: Vec<Attempt> = pool.install(|| instances.par_iter().map(|c| attempt(c, engine, &budget)).collect());

    let columns = model_columns(&cfg);
    let lead = if cfg.model.is_cavity() { 3 } else { 1 };
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    let mut records = Vec::new();
    for ((value, inst), Attempt { run, failure }) in values.iter().zip(&instances).zip(attempts) {
        let path = with_suffix(&output, &format!(".{}_{value}.csv", param.name()));
        if let Some(run) = &run {
            write_series(&path, columns, &run.rows).map_err(Failure::runtime)?;
            let [fin, mean, amp] = late_metrics(run, lead, inst.model.tau());
            let status = if failure.is_some() { "failed" } else { "ok" };
            summary.push(vec![
                param.name().to_string(),
                fmt_num(*value),
                fmt_num(run.rows.last().map_or(f64::NAN, |r| r[0])),
                fmt_num(fin),
                fmt_num(mean),
                fmt_num(amp),
                fmt_num(run.max_trace_error),
                fmt_num(run.min_eigenvalue),
                run.max_copies.unwrap_or(0).to_string(),
                status.to_string(),
            ]);
        }
        records.push(SweepInstance {
            value: *value,
            csv: path.display().to_string(),
            run,
            error: failure.as_ref().map(|f| format!("{:#}", f.error)),
        });
        failures.extend(failure);
    }
    let header: Vec<String> = [
        "parameter",
        "value",
        "t_end",
        "final",
        "late_mean",
        "late_amplitude",
        "max_trace_err",
        "min_eig",
        "max_k",
        "status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let summary_path = with_suffix(&output, ".summary.csv");
    write_table(&summary_path, &header, summary).map_err(Failure::runtime)?;
    eprintln!("{} instances -> {}", values.len(), summary_path.display());
    if !failures.iter().any(|f| f.code == 1) {
        let mut notes: Vec<String> = cfg.run.note.iter().cloned().collect();
        notes.push(format!(
            "summary metrics use column {} over the last delay interval of each run",
            columns[lead - 1]
        ));
        let manifest = SweepManifest {
            command: "sweep",
            library_version: delayloop::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            config_source: source,
            config: &cfg,
            parameter: param.name(),
            engine,
            memory_budget_mb: budget.megabytes(),
            wall_time_s: start.elapsed().as_secs_f64(),
            completed: failures.is_empty(),
            instances: records,
            notes,
        };
        let path = with_suffix(&output, ".manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::runtime(e.into()))?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::runtime)?;
    }
    merge(failures)
}

fn cmd_presets(name: Option<&str>) -> Outcome {
    match name {
        None => {
            for (n, text) in PRESETS {
                let summary = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{n}\t{summary}");
            }
            Ok(())
        }
        Some(n) => {
            print!("{}", preset(n).map_err(Failure::usage)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Sweep { common, param, values, jobs } => cmd_sweep(common, *param, values, *jobs),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
