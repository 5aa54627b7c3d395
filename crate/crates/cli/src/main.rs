//! `radon-sim`: run seeded simulations of the repairable atomic memory
//! protocols, check the resulting traces and report costs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use radon_core::analysis::{analyze, RunReport, Status, Units, CHECK_NAMES};
use radon_core::{run_scenario, Condition, DeliveryPolicy, FaultSpec, Protocol, ScenarioConfig};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "radon-sim", version, about = "Deterministic simulator for the RADON repairable atomic memory protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (or a preset) over one or more seeds.
    Run(RunArgs),
    /// Run the cross-product of parameter values over seeds and tabulate.
    Sweep(SweepArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig(ScenarioArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// The starving-write schedule against a single writer.
    Theorem1,
    /// Two writers and two readers, no faults.
    Basic,
    /// The same faulty coded workload with and without N1 enforcement.
    N1ViolationCompare,
    /// Coded storage for delta in {0, 1, 2, 4} at n=8, k=2.
    DeltaSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    /// Base configuration file (TOML).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Named preset to start from.
    #[arg(long, value_enum)]
    scenario: Option<Preset>,
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    n: Option<usize>,
    /// Code dimension, radon-c only.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    /// Fraction of servers each group-send protects.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    condition: Option<Condition>,
    #[arg(long)]
    writers: Option<usize>,
    #[arg(long)]
    readers: Option<usize>,
    /// Operations per client.
    #[arg(long)]
    ops: Option<usize>,
    /// Value length in bytes.
    #[arg(long)]
    value_size: Option<usize>,
    /// none, theorem1, random:RATE[:MAX_DOWN[:DOWNTIME]],
    /// put-crash:RATE[:MAX_DOWN[:DOWNTIME]] or burst[:PERIOD:SIZE:DOWNTIME].
    #[arg(long)]
    fault: Option<FaultSpec>,
    /// fifo, random, max-reorder or slow-links.
    #[arg(long)]
    delivery: Option<DeliveryPolicy>,
    #[arg(long)]
    max_delay: Option<u64>,
    #[arg(long)]
    think_time: Option<u64>,
    #[arg(long)]
    client_crash_rate: Option<f64>,
    /// Step budget per run.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, env = "RADON_SIM_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Seeds to run: `A..B` (inclusive), `A..=B`, or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated checks, or `all`.
    #[arg(long, default_value = "atomicity,liveness")]
    check: String,
    /// Directory for traces and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// `PARAM=V1,V2,...`; repeatable. PARAM is any scenario flag name.
    #[arg(long = "vary", value_name = "PARAM=VALUES")]
    vary: Vec<String>,
}

/// An error in the flags or configuration (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn preset_cells(preset: Preset) -> Vec<ScenarioConfig> {
    match preset {
        Preset::Theorem1 => {
            let mut c = ScenarioConfig::new(Protocol::RadonL, 3);
            c.fault = FaultSpec::Theorem1;
            c.ops = 1;
            vec![c]
        }
        Preset::Basic => {
            let mut c = ScenarioConfig::new(Protocol::RadonL, 5);
            c.writers = 2;
            c.readers = 2;
            vec![c]
        }
        Preset::N1ViolationCompare => [Condition::N1, Condition::None]
            .into_iter()
            .map(|condition| {
                let mut c = ScenarioConfig::new(Protocol::RadonC, 8);
                c.k = Some(2);
                c.delta = 4;
                c.alpha = Some(0.8125);
                c.writers = 2;
                c.readers = 2;
                c.think_time = 20;
                c.condition = condition;
                c.fault = FaultSpec::Random { rate: 0.05, max_down: None, downtime: None };
                c
            })
            .collect(),
        Preset::DeltaSweep => [0, 1, 2, 4]
            .into_iter()
            .map(|delta| {
                // One writer, spaced out, with enough writes to fill every list.
                let mut c = ScenarioConfig::new(Protocol::RadonC, 8);
                c.k = Some(2);
                c.delta = delta;
                c.ops = delta + 3;
                c.think_time = 50;
                c.delivery = DeliveryPolicy::Fifo;
                c
            })
            .collect(),
    }
}

impl ScenarioArgs {
    fn base_cells(&self) -> Result<Vec<ScenarioConfig>> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg: ScenarioConfig = ScenarioConfig::from_toml(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            return Ok(vec![cfg]);
        }
        Ok(match self.scenario {
            Some(p) => preset_cells(p),
            None => vec![ScenarioConfig::new(Protocol::RadonL, 5)],
        })
    }

    fn apply(&self, c: &mut ScenarioConfig) {
        if let Some(p) = self.protocol {
            c.protocol = p;
        }
        if c.protocol != Protocol::RadonC && self.k.is_none() {
            c.k = None;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(n, delta, condition, writers, readers, ops, fault, delivery, max_delay, think_time, client_crash_rate, budget, seed);
        if self.k.is_some() {
            c.k = self.k;
        }
        if self.alpha.is_some() {
            c.alpha = self.alpha;
        }
        if self.value_size.is_some() {
            c.value_size = self.value_size;
        }
    }

    fn cells(&self) -> Result<Vec<ScenarioConfig>> {
        let mut cells = self.base_cells()?;
        for c in &mut cells {
            self.apply(c);
        }
        Ok(cells)
    }
}

/// Apply one `--vary` value to a copy of `args`.
fn set_param(args: &mut ScenarioArgs, param: &str, value: &str) -> Result<()> {
    fn parse<T: std::str::FromStr>(param: &str, value: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e| usage(format!("bad value `{value}` for {param}: {e}")))
    }
    match param {
        "protocol" => args.protocol = Some(parse(param, value)?),
        "n" => args.n = Some(parse(param, value)?),
        "k" => args.k = Some(parse(param, value)?),
        "delta" => args.delta = Some(parse(param, value)?),
        "alpha" => args.alpha = Some(parse(param, value)?),
        "condition" => args.condition = Some(parse(param, value)?),
        "writers" => args.writers = Some(parse(param, value)?),
        "readers" => args.readers = Some(parse(param, value)?),
        "ops" => args.ops = Some(parse(param, value)?),
        "value-size" => args.value_size = Some(parse(param, value)?),
        "fault" => args.fault = Some(parse(param, value)?),
        "delivery" => args.delivery = Some(parse(param, value)?),
        "max-delay" => args.max_delay = Some(parse(param, value)?),
        "think-time" => args.think_time = Some(parse(param, value)?),
        "client-crash-rate" => args.client_crash_rate = Some(parse(param, value)?),
        "budget" => args.budget = Some(parse(param, value)?),
        other => return Err(usage(format!("cannot vary unknown parameter `{other}`"))),
    }
    Ok(())
}

fn sweep_cells(args: &SweepArgs) -> Result<Vec<ScenarioConfig>> {
    let mut variants = vec![args.scenario.clone()];
    for spec in &args.vary {
        let (param, values) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--vary expects PARAM=V1,V2,..., got `{spec}`")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(usage(format!("--vary {param} has no values")));
        }
        let mut next = Vec::new();
        for base in &variants {
            for v in &values {
                let mut a = base.clone();
                set_param(&mut a, param, v)?;
                next.push(a);
            }
        }
        variants = next;
    }
    let mut cells = Vec::new();
    for v in &variants {
        cells.extend(v.cells()?);
    }
    // A shared --k applies only to the coded cells of a mixed sweep.
    for c in &mut cells {
        if c.protocol != Protocol::RadonC {
            c.k = None;
        }
    }
    Ok(cells)
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("bad seed list `{spec}` (expected A..B, A..=B or A,B,C)"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    Ok(seeds)
}

fn parse_checks(list: &str) -> Result<Vec<&'static str>> {
    if list.trim() == "all" {
        return Ok(CHECK_NAMES.to_vec());
    }
    list.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            CHECK_NAMES
                .iter()
                .find(|name| **name == c)
                .copied()
                .ok_or_else(|| usage(format!("unknown check `{c}` (expected {} or all)", CHECK_NAMES.join(", "))))
        })
        .collect()
}

struct Outcome {
    cell: usize,
    seed: u64,
    report: RunReport,
    passed: bool,
}

fn execute(cells: &[ScenarioConfig], output: &OutputArgs) -> Result<Vec<Outcome>> {
    let checks = parse_checks(&output.check)?;
    let jobs: Vec<(usize, ScenarioConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, base)| {
            let seeds = match &output.seeds {
                Some(spec) => parse_seeds(spec),
                None => Ok(vec![base.seed]),
            };
            match seeds {
                Ok(seeds) => seeds
                    .into_iter()
                    .map(|seed| Ok((i, ScenarioConfig { seed, ..base.clone() })))
                    .collect::<Vec<_>>(),
                Err(e) => vec![Err(e)],
            }
        })
        .collect::<Result<_>>()?;
    for (i, c) in cells.iter().enumerate() {
        c.validate().map_err(|e| usage(format!("configuration {}: {e}", i + 1)))?;
    }
    if let Some(dir) = &output.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let many_cells = cells.len() > 1;
    jobs.par_iter()
        .map(|(cell, cfg)| {
            let trace = run_scenario(cfg).map_err(|e| usage(e.to_string()))?;
            if let Some(dir) = &output.out {
                let name = if many_cells {
                    format!("trace-{}-{}.jsonl", cell + 1, cfg.seed)
                } else {
                    format!("trace-{}.jsonl", cfg.seed)
                };
                write_trace(&dir.join(name), &trace)?;
            }
            let report = analyze(&trace).map_err(|e| anyhow!("analysing seed {}: {e}", cfg.seed))?;
            let passed = report.passes(&checks);
            Ok(Outcome { cell: *cell, seed: cfg.seed, report, passed })
        })
        .collect()
}

fn write_trace(path: &Path, trace: &radon_core::Trace) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_jsonl(std::io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

fn report_json(cells: &[ScenarioConfig], outcomes: &[Outcome], checks: &[&str]) -> serde_json::Value {
    let runs: Vec<_> = outcomes
        .iter()
        .map(|o| {
            json!({
                "cell": o.cell + 1,
                "seed": o.seed,
                "passed": o.passed,
                "failures": o.report.failures(checks),
                "report": o.report,
            })
        })
        .collect();
    let configs: Vec<_> = cells.iter().map(|c| c.to_toml()).collect();
    json!({ "checks": checks, "configs": configs, "runs": runs })
}

fn describe(c: &ScenarioConfig) -> String {
    let mut s = format!("{} n={}", c.protocol, c.n);
    if let Some(k) = c.k {
        write!(s, " k={k} delta={}", c.delta).unwrap();
    }
    write!(s, " condition={} fault={} delivery={}", c.condition, fault_label(&c.fault), c.delivery).unwrap();
    s
}

fn fault_label(f: &FaultSpec) -> String {
    match f {
        FaultSpec::None => "none".into(),
        FaultSpec::Theorem1 => "theorem1".into(),
        FaultSpec::Random { rate, .. } => format!("random:{rate}"),
        FaultSpec::PutCrash { rate, .. } => format!("put-crash:{rate}"),
        FaultSpec::Burst { period, size, downtime } => format!("burst:{period}:{size}:{downtime}"),
        FaultSpec::Inline { events } => format!("inline({})", events.len()),
    }
}

fn alpha_line(c: &ScenarioConfig) -> String {
    format!(
        "alpha={:.4}: ceil(alpha*n) = {} of {} servers protected per group-send (protocol needs {})",
        c.effective_alpha(),
        c.protected_count(),
        c.n,
        c.put_quorum()
    )
}

fn opt_units(u: Option<Units>) -> String {
    u.map_or_else(|| "-".into(), |u| u.to_string())
}

fn detailed(out: &mut String, c: &ScenarioConfig, o: &Outcome, checks: &[&str]) {
    let r = &o.report;
    writeln!(out, "{}  seed={}", describe(c), o.seed).unwrap();
    writeln!(out, "{}", alpha_line(c)).unwrap();
    writeln!(
        out,
        "steps={}{}  server crashes={}  deferred crashes={}  deferred repairs={}  condition violations={}  measured delta={}",
        r.steps,
        if r.budget_exhausted { " (budget exhausted)" } else { "" },
        r.server_crashes,
        r.deferred_crashes,
        r.deferred_repairs,
        r.condition_violations,
        r.measured_delta
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{:<10} {:<13} detail", "check", "status").unwrap();
    for check in checks {
        let status = r.status(check).expect("validated");
        let prefix = format!("{check}: {status}");
        let detail = r
            .failures(&[check])
            .first()
            .and_then(|f| f.strip_prefix(&prefix))
            .map(|d| d.trim().trim_start_matches('(').trim_end_matches(')').to_string())
            .unwrap_or_default();
        writeln!(out, "{check:<10} {:<13} {detail}", status.to_string()).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "{:<10} {:>10} {:>10}", "cost", "measured", "formula").unwrap();
    let f = &r.costs.formula;
    writeln!(out, "{:<10} {:>10} {:>10}", "write", opt_units(r.costs.write_cost), f.write.to_string()).unwrap();
    writeln!(out, "{:<10} {:>10} {:>10}", "read", opt_units(r.costs.read_cost), format!("<= {}", f.read)).unwrap();
    writeln!(out, "{:<10} {:>10} {:>10}", "storage", r.costs.storage_max.to_string(), format!("<= {}", f.storage))
        .unwrap();
}

/// One row per cell, aggregated over its seeds.
fn summary_table(out: &mut String, cells: &[ScenarioConfig], outcomes: &[Outcome]) {
    writeln!(
        out,
        "{:>4}  {:<8} {:>3} {:>3} {:>5} {:>6} {:>4}  {:<16} {:>9}  {:>11} {:>11} {:>11}  {:>4} {:>7} {:>6}",
        "cell", "protocol", "n", "k", "delta", "alpha", "a*n", "cond/fault", "passed", "write", "read", "storage", "dmax", "crashes", "violat"
    )
    .unwrap();
    for (i, c) in cells.iter().enumerate() {
        let runs: Vec<&Outcome> = outcomes.iter().filter(|o| o.cell == i).collect();
        let Some(first) = runs.first() else { continue };
        let f = &first.report.costs.formula;
        let max = |g: &dyn Fn(&RunReport) -> Option<Units>| runs.iter().filter_map(|o| g(&o.report)).max();
        let pair = |m: Option<Units>, formula: Units| format!("{}/{}", opt_units(m), formula);
        writeln!(
            out,
            "{:>4}  {:<8} {:>3} {:>3} {:>5} {:>6.4} {:>4}  {:<16} {:>9}  {:>11} {:>11} {:>11}  {:>4} {:>7} {:>6}",
            i + 1,
            c.protocol.name(),
            c.n,
            c.k.map_or("-".into(), |k| k.to_string()),
            if c.protocol == Protocol::RadonC { c.delta.to_string() } else { "-".into() },
            c.effective_alpha(),
            c.protected_count(),
            format!("{}/{}", c.condition, fault_label(&c.fault)),
            format!("{}/{}", runs.iter().filter(|o| o.passed).count(), runs.len()),
            pair(max(&|r| r.costs.write_cost), f.write),
            pair(max(&|r| r.costs.read_cost), f.read),
            pair(max(&|r| Some(r.costs.storage_max)), f.storage),
            runs.iter().map(|o| o.report.measured_delta).max().unwrap_or(0),
            runs.iter().map(|o| o.report.server_crashes).sum::<usize>(),
            runs.iter().map(|o| o.report.condition_violations).sum::<usize>(),
        )
        .unwrap();
    }
    writeln!(out, "costs are measured max / formula in units of one value; a*n = ceil(alpha*n); dmax = largest measured write concurrency").unwrap();
}

fn failing_lines(out: &mut String, outcomes: &[Outcome], checks: &[&str], many_cells: bool) {
    const SHOWN: usize = 20;
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    for o in failed.iter().take(SHOWN) {
        let cell = if many_cells { format!("cell {} ", o.cell + 1) } else { String::new() };
        writeln!(out, "{cell}seed {}: {}", o.seed, o.report.failures(checks).join("; ")).unwrap();
    }
    if failed.len() > SHOWN {
        writeln!(out, "... and {} more failing runs", failed.len() - SHOWN).unwrap();
    }
}

fn finish(cells: &[ScenarioConfig], outcomes: Vec<Outcome>, output: &OutputArgs, sweep: bool) -> Result<bool> {
    let checks = parse_checks(&output.check)?;
    let json = report_json(cells, &outcomes, &checks);
    if let Some(dir) = &output.out {
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(&json)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let passed = outcomes.iter().all(|o| o.passed);
    let mut out = String::new();
    match output.format {
        Format::Json => {
            writeln!(out, "{}", serde_json::to_string_pretty(&json)?).unwrap();
        }
        Format::Table => {
            if !sweep && outcomes.len() == 1 {
                detailed(&mut out, &cells[0], &outcomes[0], &checks);
            } else {
                if !sweep {
                    for (i, c) in cells.iter().enumerate() {
                        writeln!(out, "cell {}: {}", i + 1, describe(c)).unwrap();
                        writeln!(out, "        {}", alpha_line(c)).unwrap();
                    }
                    writeln!(out).unwrap();
                }
                summary_table(&mut out, cells, &outcomes);
                writeln!(out).unwrap();
                failing_lines(&mut out, &outcomes, &checks, cells.len() > 1);
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(
                out,
                "{}: {} of {} runs passed [{}]",
                if passed { Status::Pass } else { Status::Fail },
                outcomes.len() - failed,
                outcomes.len(),
                checks.join(",")
            )
            .unwrap();
        }
    }
    print!("{out}");
    Ok(passed)
}

fn real_main(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cells = args.scenario.cells()?;
            let outcomes = execute(&cells, &args.output)?;
            finish(&cells, outcomes, &args.output, false)
        }
        Command::Sweep(args) => {
            let cells = sweep_cells(&args)?;
            let outcomes = execute(&cells, &args.output)?;
            finish(&cells, outcomes, &args.output, true)
        }
        Command::ShowConfig(args) => {
            for (i, c) in args.cells()?.iter().enumerate() {
                c.validate().map_err(|e| usage(format!("configuration {}: {e}", i + 1)))?;
                if i > 0 {
                    println!();
                }
                println!("# {}", alpha_line(c));
                print!("{}", c.to_toml());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
