use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use procmap::eval::BYTES_PER_WORD;
use procmap::export::{to_dot, SnapshotFile};
use procmap::ingest::{generate as generate_log, replay, write_events, Mode, Order, SourceError, SyntheticModel};
use procmap::run::{
    build_miner, geometric_budgets, parse_budget, rows_to_csv, sweep, BenchRow, Execution, RunSettings, BENCH_HEADER,
};
use procmap::{
    accuracy, lossless_budget_directed, memory_words, offline_dfg, EvalError, EvalReport, Event, FrequencyGraph,
    OnlineMiner, Technique,
};

use crate::source;
use crate::{BenchArgs, CaseArgs, EvaluateArgs, ExportArgs, Format, GenerateArgs, MineArgs, ModelArg, OrderArg};

/// Exit status when the log has no relations to compare against.
const EXIT_ZERO_TOTAL: u8 = 3;

fn order(arg: OrderArg) -> Order {
    match arg {
        OrderArg::AsIs => Order::AsIs,
        OrderArg::ByTimestamp => Order::ByTimestamp,
    }
}

fn mode(strict: bool) -> Mode {
    if strict {
        Mode::Strict
    } else {
        Mode::Lenient
    }
}

fn settings(b_rc: usize, cases: &CaseArgs) -> RunSettings {
    let mut s = RunSettings::new(b_rc).with_end_activities(cases.end_activities.iter().cloned());
    s.case_ttl = cases.case_ttl;
    s
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn edge_list(graph: &FrequencyGraph) -> String {
    let mut out = String::from("source,target,frequency\n");
    for ((s, t), f) in &graph.arcs {
        out.push_str(&format!("{},{},{f}\n", csv_field(s), csv_field(t)));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn render(snapshot: &SnapshotFile, format: Format, with_start_end: bool) -> Result<String> {
    Ok(match format {
        Format::Json => snapshot.to_json() + "\n",
        Format::Csv => edge_list(&snapshot.graph()),
        Format::Dot => {
            let boundaries = if with_start_end {
                Some(snapshot.boundaries().context(
                    "snapshot has no case start/end counts; mine with --end-activity to record them",
                )?)
            } else {
                None
            };
            to_dot(&snapshot.graph(), boundaries.as_ref())
        }
    })
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Dot => "dot",
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

/// `out.json` -> `out-<n>.json`, for periodic snapshots.
fn numbered(out: &Path, n: u64, format: Format) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| extension(format).to_owned());
    out.with_file_name(format!("{stem}-{n}.{ext}"))
}

struct Progress {
    peak_words: u64,
    observe_nanos: u128,
}

fn snapshot_of(miner: &dyn OnlineMiner, progress: &Progress, timed: bool) -> SnapshotFile {
    let events = miner.events_processed();
    let mut snap = SnapshotFile::new(miner.technique(), miner.budget(), events, &miner.graph())
        .with_boundaries(miner.boundaries());
    snap.peak_memory_words = Some(progress.peak_words);
    if timed {
        snap.ms_per_event = Some(if events == 0 {
            0.0
        } else {
            progress.observe_nanos as f64 / events as f64 / 1e6
        });
    }
    snap
}

pub fn mine(args: MineArgs) -> Result<ExitCode> {
    let technique: Technique = args.policy.parse()?;
    let raw_budget = match (technique, &args.budget, &args.bpm) {
        (Technique::Lcb, Some(b), _) | (Technique::Lcb, None, Some(b)) => b,
        (_, _, Some(b)) | (_, Some(b), None) => b,
        (Technique::Lcb, None, None) => bail!("--policy lcb needs --budget"),
        (_, None, None) => bail!("--bpm is required"),
    };
    let budget = parse_budget(raw_budget)?;
    if args.snapshot_every.is_some() && args.out.is_none() {
        bail!("--snapshot-every needs --out");
    }
    let settings = settings(args.brc, &args.cases);
    let mut miner = build_miner(technique, budget, &settings)?;

    let mode = mode(args.strict);
    let events = source::open(&args.source, args.order.map(order), mode)?;
    let mut trace = args
        .trace
        .as_ref()
        .map(|p| File::create(p).map(BufWriter::new).with_context(|| format!("creating {}", p.display())))
        .transpose()?;
    let timed = !args.no_timing;

    let mut progress = Progress {
        peak_words: miner.memory_words(),
        observe_nanos: 0,
    };
    let mut skipped = 0u64;
    for item in events {
        let event = match item {
            Ok(event) => event,
            Err(SourceError::Parse(e)) if mode == Mode::Lenient => {
                eprintln!("warning: {}: skipped {e}", args.source);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let start = Instant::now();
        let report = miner.observe(&event);
        progress.observe_nanos += start.elapsed().as_nanos();
        let report = report.with_context(|| format!("event {}", miner.events_processed() + 1))?;
        progress.peak_words = progress.peak_words.max(miner.memory_words());
        if let Some(t) = trace.as_mut() {
            writeln!(t, "{}", report.trace_line(&event))?;
        }
        if let (Some(every), Some(out)) = (args.snapshot_every, args.out.as_deref()) {
            let n = miner.events_processed();
            if every > 0 && n % every == 0 {
                let snap = snapshot_of(miner.as_ref(), &progress, timed);
                let text = render(&snap, args.format, snap.starts.is_some())?;
                write_output(Some(&numbered(out, n, args.format)), &text)?;
            }
        }
    }
    if let Some(mut t) = trace {
        t.flush()?;
    }

    let snap = snapshot_of(miner.as_ref(), &progress, timed);
    let text = render(&snap, args.format, snap.starts.is_some())?;
    write_output(args.out.as_deref(), &text)?;
    eprintln!(
        "{}: {} events, {} nodes, {} arcs, peak {} words ({} bytes){}{}",
        technique,
        snap.events_processed,
        snap.nodes.len(),
        snap.arcs.len(),
        progress.peak_words,
        progress.peak_words * BYTES_PER_WORD,
        snap.ms_per_event.map(|ms| format!(", {ms:.6} ms/event")).unwrap_or_default(),
        if skipped > 0 { format!(", {skipped} lines skipped") } else { String::new() },
    );
    Ok(ExitCode::SUCCESS)
}

fn load_log(path: &Path, order: OrderArg, strict: bool) -> Result<Vec<Event>> {
    let outcome = replay(path, self::order(order), mode(strict))?;
    for rejected in &outcome.rejected {
        eprintln!("warning: {}: skipped {rejected}", path.display());
    }
    Ok(outcome.events)
}

fn load_snapshot(path: &Path) -> Result<SnapshotFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SnapshotFile::from_json(&text).with_context(|| format!("parsing snapshot {}", path.display()))
}

pub fn evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let events = load_log(&args.log, args.order, args.strict)?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let oracle = offline_dfg(&events).to_graph();
    let acc = match accuracy(&oracle, &snapshot.graph()) {
        Ok(acc) => acc,
        Err(EvalError::ZeroTotalFrequency) => {
            eprintln!("error: {}: {}", args.log.display(), EvalError::ZeroTotalFrequency);
            return Ok(ExitCode::from(EXIT_ZERO_TOTAL));
        }
    };
    let words = snapshot
        .peak_memory_words
        .unwrap_or_else(|| memory_words(snapshot.technique, snapshot.nodes.len(), snapshot.arcs.len(), 0));
    let ms = snapshot.ms_per_event.unwrap_or(0.0);
    let report = EvalReport::new(snapshot.technique, snapshot.budget, acc, words, ms, snapshot.events_processed);
    let row = BenchRow {
        technique: snapshot.technique,
        budget: snapshot.budget,
        accuracy: Some(acc.accuracy),
        peak_memory_words: Some(words),
        ms_per_event: Some(ms),
        events_processed: Some(snapshot.events_processed),
        exact: Some(acc),
        error: None,
    };
    let mut out = String::new();
    if args.format != Some(Format::Csv) {
        out.push_str(&serde_json::to_string(&report)?);
        out.push('\n');
    }
    if args.format != Some(Format::Json) {
        out.push_str(BENCH_HEADER);
        out.push('\n');
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    write_output(None, &out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn bench(args: BenchArgs) -> Result<ExitCode> {
    let events = load_log(&args.log, args.order, args.strict)?;
    let oracle = offline_dfg(&events).to_graph();
    let techniques: Vec<Technique> = args
        .techniques
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()?;
    let budgets: Vec<usize> = if args.budgets.trim() == "auto" {
        let max = lossless_budget_directed(oracle.nodes.len().max(1))?;
        geometric_budgets(2, max, args.points)
    } else {
        args.budgets
            .split(',')
            .map(|b| parse_budget(b.trim()))
            .collect::<Result<_, _>>()?
    };
    let b_rc = match args.brc {
        Some(b) => b,
        None => events.iter().map(|e| e.case_id.as_str()).collect::<HashSet<_>>().len().max(1),
    };
    let settings = settings(b_rc, &args.cases);
    let points: Vec<(Technique, usize)> = techniques
        .iter()
        .flat_map(|&t| budgets.iter().map(move |&b| (t, b)))
        .collect();
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let rows = sweep(&events, &oracle, &points, &settings, execution, !args.no_timing);
    for row in &rows {
        if let Some(err) = &row.error {
            eprintln!("warning: {} at budget {}: {err}", row.technique, row.budget);
        }
    }
    write_output(args.out.as_deref(), &rows_to_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

pub fn export(args: ExportArgs) -> Result<ExitCode> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let text = render(&snapshot, args.format, args.with_start_end)?;
    write_output(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

pub fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let model = match args.model {
        ModelArg::Zipf => SyntheticModel::zipf(
            args.activities,
            args.exponent,
            args.end_probability,
            args.interleaving,
            args.seed,
        ),
        ModelArg::Random => SyntheticModel::random(args.activities, args.end_probability, args.interleaving, args.seed),
    }?;
    let generated = generate_log(&model, args.events);
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_events(BufWriter::new(file), &generated.events)?;
        }
        None => write_events(BufWriter::new(io::stdout().lock()), &generated.events)?,
    }
    if let Some(path) = &args.dfg {
        // A lossless LFU snapshot of the emitted log.
        let snap = SnapshotFile::new(
            Technique::Lfu,
            lossless_budget_directed(args.activities)?,
            generated.events.len() as u64,
            &generated.dfg,
        );
        write_output(Some(path), &(snap.to_json() + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}
