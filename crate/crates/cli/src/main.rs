use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qualm::oracle::brute_force_optimum;
use qualm::pipeline::{prepare, render, Format, PipelineOptions, SampleText};
use qualm::tree::layout_variables;
use qualm::{run_pipeline, solve, ExampleRecord, LanguageName, OutputRecord, SolveOptions, TaskKind, UtilityConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Parser, Debug)]
#[command(name = "qualm", version, about = "Mark the parts of a code suggestion that sampled intents disagree on")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Annotate every record of a JSONL file
    Annotate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        format: OutFormat,
        /// Leave wall-clock timings out of the output
        #[arg(long)]
        no_timings: bool,
    },
    /// Annotate and score against baselines; writes a CSV summary
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// CSV destination (stdout if omitted)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write one JSON output record per line here
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Compare the solver with exhaustive search on small instances
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Skip instances with more variables than this
        #[arg(long, default_value_t = 16)]
        max_vars: usize,
        /// Generate this many random records instead of reading input
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the diagrams built for one record
    DumpDiagram {
        #[command(flatten)]
        common: Common,
        /// Record id (first record if omitted)
        #[arg(long)]
        id: Option<String>,
        /// Only this member diagram
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSONL file with one example record per line, `-` for stdin
    #[arg(default_value = "-")]
    input: PathBuf,
    #[arg(long, default_value = "regions", value_parser = parse_task)]
    task: TaskKind,
    /// JSON utility config; fields left out keep their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = SolveOptions::default().max_sweeps)]
    max_sweeps: usize,
    #[arg(long, default_value_t = SolveOptions::default().tol)]
    tol: f64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Ansi,
    Html,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Ansi => Format::Ansi,
            OutFormat::Html => Format::Html,
            OutFormat::Json => Format::Json,
        }
    }
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse::<TaskKind>().map_err(|e| e.to_string())
}

/// Failures that abort the whole run.
struct Fatal(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.into())
    }
}

struct Setup {
    records: Vec<ExampleRecord>,
    config: UtilityConfig,
    solve: SolveOptions,
}

fn read_records(path: &Path) -> Result<Vec<ExampleRecord>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
    };
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).with_context(|| format!("line {}: malformed record", i + 1))?;
        out.push(r);
    }
    Ok(out)
}

fn setup(common: &Common, read_input: bool) -> Result<Setup, Fatal> {
    if common.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(common.jobs).build_global()?;
    }
    let config = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => UtilityConfig::default(),
    };
    if let Err(e) = UtilityConfig::validate(&config) {
        return Err(anyhow::anyhow!("invalid config: {e}").into());
    }
    if !(common.tol >= 0.0) {
        return Err(anyhow::anyhow!("--tol must be non-negative").into());
    }
    let records = if read_input { read_records(&common.input)? } else { Vec::new() };
    Ok(Setup { records, config, solve: SolveOptions { max_sweeps: common.max_sweeps, tol: common.tol } })
}

fn run_all(s: &Setup, task: TaskKind, opts: PipelineOptions) -> Vec<Result<OutputRecord, String>> {
    s.records
        .par_iter()
        .map(|r| run_pipeline(r, task, &s.config, &opts).map_err(|e| format!("{} [{}]: {e}", r.id, e.code())))
        .collect()
}

fn annotate(common: &Common, format: OutFormat, no_timings: bool) -> Result<bool, Fatal> {
    let s = setup(common, true)?;
    let opts = PipelineOptions { solve: s.solve, timings: !no_timings, baselines: false };
    let results = run_all(&s, common.task, opts);
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut ok = true;
    for r in results {
        match r {
            Ok(rec) => {
                if !matches!(format, OutFormat::Json) {
                    writeln!(out, "== {}", rec.id)?;
                }
                writeln!(out, "{}", render(&rec, format.into()))?;
            }
            Err(e) => {
                ok = false;
                eprintln!("error: {e}");
            }
        }
    }
    out.flush()?;
    Ok(ok)
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

fn evaluate(common: &Common, csv_path: Option<&Path>, records: Option<&Path>) -> Result<bool, Fatal> {
    let s = setup(common, true)?;
    let opts = PipelineOptions { solve: s.solve, timings: true, baselines: true };
    let results = run_all(&s, common.task, opts);
    let sink: Box<dyn Write> = match csv_path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "example_id",
        "method",
        "utility",
        "est_utility",
        "loo_utility",
        "sensitivity",
        "specificity",
        "f1",
        "correct_chars",
        "incorrect_chars",
    ])?;
    let mut json = match records {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let mut ok = true;
    for r in results {
        let rec = match r {
            Ok(rec) => rec,
            Err(e) => {
                ok = false;
                eprintln!("error: {e}");
                continue;
            }
        };
        for row in &rec.eval {
            let Some(rep) = &row.report else {
                eprintln!("{}: {} skipped: {}", rec.id, row.method, row.skipped.as_deref().unwrap_or(""));
                continue;
            };
            w.write_record([
                rec.id.clone(),
                row.method.clone(),
                cell(rep.utility_vs_ground_truth),
                cell(Some(rep.estimated_utility)),
                cell(rep.loo_utility),
                cell(rep.sensitivity),
                cell(rep.specificity),
                cell(rep.f1),
                rep.correct_chars.map_or(String::new(), |c| c.to_string()),
                rep.incorrect_chars.map_or(String::new(), |c| c.to_string()),
            ])?;
        }
        if let Some(j) = json.as_mut() {
            writeln!(j, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    w.flush()?;
    if let Some(mut j) = json {
        j.flush()?;
    }
    Ok(ok)
}

fn random_records(count: usize, seed: u64) -> Vec<ExampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["a", "b", "c", "d"];
    let line = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=3);
        let mut s: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
        s.push("\n");
        s.join(" ")
    };
    (0..count)
        .map(|i| {
            let k = rng.gen_range(1..=4);
            let samples = (0..k)
                .map(|_| {
                    let lines = rng.gen_range(1..=2);
                    SampleText::Plain((0..lines).map(|_| line(&mut rng)).collect())
                })
                .collect();
            ExampleRecord {
                id: format!("random-{i}"),
                language: LanguageName::Python,
                context: String::new(),
                prototype: None,
                samples,
                holdout_sample: None,
                ground_truth: None,
            }
        })
        .collect()
}

fn oracle_check(common: &Common, max_vars: usize, random: Option<usize>, seed: u64) -> Result<bool, Fatal> {
    let mut s = setup(common, random.is_none())?;
    if let Some(n) = random {
        s.records = random_records(n, seed);
    }
    let rows: Vec<Result<Option<String>, String>> = s
        .records
        .par_iter()
        .map(|r| {
            let prep = prepare(r, common.task, &s.config).map_err(|e| format!("{}: {e}", r.id))?;
            if prep.system.num_vars() > max_vars {
                return Ok(None);
            }
            let rep = solve(&prep.system, s.solve).map_err(|e| format!("{}: {e}", r.id))?;
            let best = brute_force_optimum(&prep.system).map_err(|e| format!("{}: {e}", r.id))?;
            let eps = 1e-9;
            let sound = rep.primal_value <= best.best_value + eps && best.best_value <= rep.dual_bound + eps;
            let tight = rep.duality_gap.abs() < eps;
            let exact = !tight || (rep.primal_value - best.best_value).abs() < eps;
            let status = if sound && exact { "ok" } else { "VIOLATION" };
            let line = format!(
                "{}\t{status}\tvars={}\tprimal={:.9}\toptimum={:.9}\tdual={:.9}\tgap={:.3e}",
                r.id,
                prep.system.num_vars(),
                rep.primal_value,
                best.best_value,
                rep.dual_bound,
                rep.duality_gap
            );
            if sound && exact {
                Ok(Some(line))
            } else {
                Err(line)
            }
        })
        .collect();
    let mut ok = true;
    let (mut checked, mut skipped) = (0, 0);
    for r in rows {
        match r {
            Ok(Some(line)) => {
                checked += 1;
                println!("{line}");
            }
            Ok(None) => skipped += 1,
            Err(line) => {
                ok = false;
                checked += 1;
                println!("{line}");
            }
        }
    }
    eprintln!("checked {checked}, skipped {skipped} (more than {max_vars} variables)");
    Ok(ok)
}

fn dump_diagram(common: &Common, id: Option<&str>, index: Option<usize>) -> Result<bool, Fatal> {
    let s = setup(common, true)?;
    let record = match id {
        Some(id) => s.records.iter().find(|r| r.id == id),
        None => s.records.first(),
    };
    let Some(record) = record else {
        return Err(anyhow::anyhow!("no matching record").into());
    };
    let prep = prepare(record, common.task, &s.config)?;
    let layout = layout_variables(&prep.prototype);
    let names = |v: usize| {
        let info = &layout.variables[v];
        format!("x{v}:{:?}@{}", info.kind, info.position)
    };
    let system = &prep.system;
    if index.is_some_and(|j| j >= system.len()) {
        let msg = format!("diagram index out of range, the system has {} diagrams", system.len());
        return Err(anyhow::anyhow!(msg).into());
    }
    for j in 0..system.len() {
        if index.is_some_and(|i| i != j) {
            continue;
        }
        println!("# {} (scale {})", system.name(j), system.scale(j));
        let scope = system.diagram(j).scope().to_vec();
        let local = |k: usize| names(scope[k]);
        print!("{}", system.diagram(j).debug_export(Some(&local)));
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Annotate { common, format, no_timings } => annotate(common, *format, *no_timings),
        Command::Evaluate { common, csv, records } => evaluate(common, csv.as_deref(), records.as_deref()),
        Command::OracleCheck { common, max_vars, random, seed } => oracle_check(common, *max_vars, *random, *seed),
        Command::DumpDiagram { common, id, index } => dump_diagram(common, id.as_deref(), *index),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fatal(e)) => {
            eprintln!("fatal: {e:#}");
            ExitCode::from(2)
        }
    }
}
