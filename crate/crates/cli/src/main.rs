use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use hyperpack::analysis::bound::{case_bound, overall_bound, BoundResult, SearchConfig};
use hyperpack::analysis::feasibility::OracleConfig;
use hyperpack::analysis::weights::WeightSystem;
use hyperpack::bench::{run_experiment, GeneratorKind, GeneratorSpec};
use hyperpack::engine::{parse_trace, Engine, PackingReport};
use hyperpack::params::{validate, ParameterInstance};
use hyperpack::rational::{render, to_f64};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "hyperpack", version, about = "Online hypercube bin packing and its competitive-ratio analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Parameter set: builtin:square, builtin:cube, or a JSON file.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Dimension; picks the matching builtin when --params is absent.
    #[arg(long = "dim", global = true)]
    dim: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Worker threads for analysis and benchmarks.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pack a trace online and report bin usage.
    Pack {
        #[arg(long)]
        input: PathBuf,
        /// Keep tallies only; skips the geometry check.
        #[arg(long)]
        counting_only: bool,
    },
    /// Bound the asymptotic competitive ratio.
    Analyze {
        /// Only this weighting case.
        #[arg(long)]
        case: Option<usize>,
        #[arg(long, default_value_t = OracleConfig::default().node_limit)]
        node_limit: u64,
        #[arg(long, default_value_t = OracleConfig::default().max_items)]
        max_items: usize,
    },
    /// Check a parameter set against the admissibility rules.
    VerifyParams,
    /// Run generated instances and compare against a lower bound on the optimum.
    Bench {
        /// adversarial-harmonic, uniform, mixed-critical, or file:<path>.
        #[arg(long = "gen")]
        generator: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Consecutive seeds to run, starting at --seed.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Exact optimum through the feasibility oracle (at most 12 items).
        #[arg(long)]
        exact_opt: bool,
        /// One CSV row per run.
        #[arg(long)]
        csv: bool,
    },
    /// Dump weights and efficiencies of one case.
    Tables {
        #[arg(long, default_value_t = 1)]
        case: usize,
        #[arg(long, default_value_t = 1)]
        subcase: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYPERPACK_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether the command's own check passed.
fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        ensure!(jobs >= 1, "--jobs must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Pack { input, counting_only } => pack(common, input, *counting_only),
        Command::Analyze { case, node_limit, max_items } => {
            let params = load_params(common, None)?;
            let oracle = OracleConfig { node_limit: *node_limit, max_items: *max_items, ..OracleConfig::default() };
            analyze(common, &params, *case, SearchConfig { oracle, ..SearchConfig::default() })
        }
        Command::VerifyParams => verify(common),
        Command::Bench { generator, n, runs, exact_opt, csv } => {
            bench(common, generator, *n, *runs, *exact_opt, *csv)
        }
        Command::Tables { case, subcase } => tables(common, *case, *subcase),
    }
}

fn load_params(common: &Common, trace_dim: Option<usize>) -> Result<ParameterInstance> {
    let dim = match (common.dim, trace_dim) {
        (Some(a), Some(b)) if a != b => bail!("--dim {a} disagrees with the trace header `dim {b}`"),
        (a, b) => a.or(b),
    };
    let source = match (&common.params, dim) {
        (Some(p), _) => p.clone(),
        (None, Some(2) | None) => "builtin:square".to_string(),
        (None, Some(3)) => "builtin:cube".to_string(),
        (None, Some(d)) => bail!("no builtin parameters for dimension {d}; pass --params"),
    };
    let params = ParameterInstance::load(&source).with_context(|| format!("loading parameters `{source}`"))?;
    if let Some(d) = dim {
        ensure!(params.d == d, "parameters `{source}` are for dimension {}, not {d}", params.d);
    }
    Ok(params)
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn pack(common: &Common, input: &PathBuf, counting_only: bool) -> Result<bool> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let trace = parse_trace(&text).with_context(|| format!("parsing {}", input.display()))?;
    let params = load_params(common, trace.d)?;
    let mut engine = if counting_only { Engine::counting_only(&params)? } else { Engine::new(&params)? };
    for size in &trace.sizes {
        engine.push(*size)?;
    }
    let report = engine.report();
    let out = if common.pretty { pretty_pack(&report) } else { json(&report)? };
    emit(common, &out)?;
    if !report.is_clean() {
        log::error!("{} violations and {} breaches", report.violations.len(), report.breaches.len());
    }
    Ok(report.is_clean())
}

fn pretty_pack(report: &PackingReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "params: {} (d = {})", report.params, report.d);
    let _ = writeln!(s, "items: {}", report.items);
    let _ = writeln!(s, "bins: {} ({} small, {} large)", report.total_bins, report.small_bins, report.large_bins);
    let _ = writeln!(s, "{:<12} {:>8} {:>8}", "group", "open", "closed");
    for (group, count) in &report.bins_by_group {
        let _ = writeln!(s, "{group:<12} {:>8} {:>8}", count.open, count.closed);
    }
    let _ = writeln!(s, "max open small bins: {}", report.max_open_small);
    let _ = writeln!(s, "max open bi bins per group: {}", report.max_open_bi_per_group);
    let geometry = if report.geometry_checked { report.violations.len().to_string() } else { "not checked".into() };
    let _ = writeln!(s, "geometry violations: {geometry}");
    let _ = write!(s, "invariant breaches: {}", report.breaches.len());
    s
}

fn analyze(common: &Common, params: &ParameterInstance, case: Option<usize>, cfg: SearchConfig) -> Result<bool> {
    let result = match case {
        None => overall_bound(params, &cfg)?,
        Some(c) => {
            let ws = WeightSystem::new(params)?;
            let bound = case_bound(&ws, c, &cfg)?;
            BoundResult {
                params: params.name.clone(),
                d: params.d,
                p: bound.value,
                p_f64: bound.value_f64,
                certified: bound.certified,
                cases: vec![bound],
            }
        }
    };
    let out = if common.pretty { pretty_bound(&result) } else { json(&result)? };
    emit(common, &out)?;
    Ok(true)
}

fn pretty_bound(result: &BoundResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "params: {} (d = {})", result.params, result.d);
    let _ = writeln!(s, "{:<5} {:>10} {:>10} {:>8}  witness", "case", "value", "certified", "queries");
    for c in &result.cases {
        let witness: Vec<String> = c.witness.iter().map(|(t, m)| format!("m{t}={m}")).collect();
        let _ = writeln!(s, "{:<5} {:>10.6} {:>10} {:>8}  {}", c.case, c.value_f64, c.certified, c.oracle_calls, witness.join(" "));
    }
    let _ = write!(s, "bound: {:.6}{}", result.p_f64, if result.certified { "" } else { " (not certified)" });
    s
}

fn verify(common: &Common) -> Result<bool> {
    let params = load_params(common, None)?;
    let problems = validate(&params);
    let text = if problems.is_empty() {
        "valid".to_string()
    } else {
        let mut s = String::from("invalid");
        for p in &problems {
            let _ = write!(s, "\n  {p}");
        }
        s
    };
    emit(common, &text)?;
    Ok(problems.is_empty())
}

fn bench(common: &Common, generator: &str, n: usize, runs: u64, exact_opt: bool, csv: bool) -> Result<bool> {
    ensure!(runs >= 1, "--runs must be at least 1");
    let params = load_params(common, None)?;
    let kind: GeneratorKind = generator.parse()?;
    let reports = (0..runs)
        .into_par_iter()
        .map(|offset| {
            let spec = GeneratorSpec::new(kind.clone(), n, common.seed.wrapping_add(offset), params.d);
            run_experiment(&params, &spec, exact_opt)
        })
        .collect::<hyperpack::Result<Vec<_>>>()?;
    let out = if csv {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for report in &reports {
            writer.serialize(report.summary())?;
        }
        String::from_utf8(writer.into_inner().context("flushing CSV")?)?
    } else if common.pretty {
        reports.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n\n")
    } else if let [single] = reports.as_slice() {
        json(single)?
    } else {
        json(&reports)?
    };
    emit(common, &out)?;
    Ok(reports.iter().all(|r| r.breaches.is_empty()))
}

#[derive(Serialize)]
struct TableDump {
    params: String,
    d: usize,
    case: usize,
    subcase: usize,
    rows: Vec<hyperpack::analysis::weights::TableRow>,
}

fn tables(common: &Common, case: usize, subcase: usize) -> Result<bool> {
    let params = load_params(common, None)?;
    let ws = WeightSystem::new(&params)?;
    let rows = ws.table(case, subcase)?;
    let out = if common.pretty {
        let mut s = String::new();
        let _ = writeln!(s, "{} case {case}.{subcase}", params.name);
        let _ = writeln!(s, "{:<5} {:<16} {:>10} {:>10}", "type", "interval", "weight", "efficiency");
        for row in &rows {
            let interval = format!("({}, {}]", render(&row.lower), render(&row.upper));
            let weight = if row.type_index == params.small_type() {
                format!("{:.4}x^d", to_f64(&row.weight))
            } else {
                format!("{:.5}", to_f64(&row.weight))
            };
            let _ = writeln!(s, "{:<5} {interval:<16} {weight:>10} {:>10.4}", row.type_index, to_f64(&row.efficiency));
        }
        s
    } else {
        json(&TableDump { params: params.name.clone(), d: params.d, case, subcase, rows })?
    };
    emit(common, &out)?;
    Ok(true)
}
