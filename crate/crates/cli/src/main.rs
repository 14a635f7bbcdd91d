//! `impact`: ingest smart-home logs, detect impact conflicts, and score the
//! detector on seeded synthetic corpora.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use impact_core::config::RunConfig;
use impact_core::detection::{analyze_all, analyze_pair, room_for, DetectionMode, PairAssessment};
use impact_core::dynamics::predict_signal;
use impact_core::evaluation::{evaluate, summarize_mae, threshold_sweep, write_mae_csv, write_sweep_csv};
use impact_core::ingest::{
    augment, merge_residents, parse_casas, read_events_csv, reconstruct_events, write_events_csv,
    write_rejects_csv, Reject,
};
use impact_core::report::{
    mined_bands, write_bands_csv, write_conflicts_jsonl, write_explain_json, MetricsReport,
    RunStamp, SeededRun,
};
use impact_core::synthetic::generate;
use impact_core::{ImpactConflict, ServiceEvent, ServiceRequest, TimeInterval};

#[derive(Parser)]
#[command(name = "impact", version, about = "Impact-conflict detection for shared smart homes")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Turn CASAS logs into the canonical event CSV.
    Ingest(IngestArgs),
    /// Report conflicts among service requests.
    Detect(DetectArgs),
    /// Score the detector and the no-preference baseline on synthetic corpora.
    Evaluate(OutArgs),
    /// Accuracy over a grid of temporal and preferential thresholds.
    Sweep(SweepArgs),
    /// Predicted trace, band and scores for each affected resident.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// One log per resident; several logs are merged over their common days.
    logs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add seeded window/blind events and TV sound levels.
    #[arg(long)]
    augment: bool,
}

#[derive(Args)]
struct Inputs {
    /// Historical service events (canonical event CSV).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Current service requests (canonical event CSV).
    #[arg(long)]
    requests: Option<PathBuf>,
    /// Baseline mode: any deviation from a setpoint is a conflict.
    #[arg(long)]
    no_preference: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Directory for conflicts.jsonl and bands.csv; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when any conflict is found.
    #[arg(long)]
    gate: bool,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// `T1,T2,../P1,P2,..`: temporal then preferential thresholds.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    no_preference: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only explain assessments for this resident.
    #[arg(long)]
    user: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// SHA-256 of the effective configuration, ignoring file locations.
fn config_hash(cfg: &RunConfig) -> String {
    let mut stripped = cfg.clone();
    stripped.paths = Default::default();
    Sha256::digest(stripped.to_toml().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let stamp = RunStamp::new(config_hash(&cfg), cfg.seed);
    match cli.command {
        None => bail!("no command given; see --help"),
        Some(Command::Ingest(a)) => ingest(&cfg, &stamp, a),
        Some(Command::Detect(a)) => detect(cfg, &stamp, a),
        Some(Command::Evaluate(a)) => evaluate_cmd(&cfg, &stamp, a),
        Some(Command::Sweep(a)) => sweep(cfg, &stamp, a),
        Some(Command::Explain(a)) => explain(cfg, &stamp, a),
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.paths.out.clone())
        .ok_or_else(|| anyhow!("--out is required"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_events(path: &Path) -> Result<Vec<ServiceEvent>> {
    read_events_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn ingest(cfg: &RunConfig, stamp: &RunStamp, a: IngestArgs) -> Result<ExitCode> {
    let logs = if a.logs.is_empty() { cfg.paths.logs.clone() } else { a.logs };
    if logs.is_empty() {
        bail!("no log files given");
    }
    let dir = out_dir(a.out, cfg)?;
    let mut rejects: Vec<Reject> = Vec::new();
    let mut datasets = Vec::new();
    let mut lines = 0;
    for path in &logs {
        let parsed = parse_casas(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        let rebuilt = reconstruct_events(&parsed.lines, &cfg.sensors);
        lines += parsed.lines.len();
        rejects.extend(parsed.rejects);
        rejects.extend(rebuilt.rejects);
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("log{}", datasets.len() + 1));
        datasets.push((label, rebuilt.events));
    }
    let mut events = if datasets.len() == 1 {
        datasets.pop().expect("one dataset").1
    } else {
        merge_residents(datasets)
    };
    if a.augment {
        events = augment(&events, &cfg.augmentation, cfg.seed);
    }
    let preamble = stamp.preamble();
    let mut w = create(&dir, "events.csv")?;
    write_events_csv(&events, &preamble, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "rejects.csv")?;
    write_rejects_csv(&rejects, &preamble, &mut w)?;
    w.flush()?;
    println!("lines={lines} events={} rejects={}", events.len(), rejects.len());
    Ok(ExitCode::SUCCESS)
}

struct Loaded {
    history: Vec<ServiceEvent>,
    requests: Vec<ServiceRequest>,
}

fn load_inputs(cfg: &mut RunConfig, inputs: &Inputs) -> Result<Loaded> {
    let events = inputs
        .events
        .clone()
        .or_else(|| cfg.paths.events.clone())
        .ok_or_else(|| anyhow!("--events is required"))?;
    let requests = inputs
        .requests
        .clone()
        .or_else(|| cfg.paths.requests.clone())
        .ok_or_else(|| anyhow!("--requests is required"))?;
    if inputs.no_preference {
        cfg.detection.mode = DetectionMode::NoPreference;
    }
    Ok(Loaded {
        history: read_events(&events)?,
        requests: read_events(&requests)?.into_iter().map(ServiceRequest::from).collect(),
    })
}

fn assessments(cfg: &RunConfig, input: &Loaded) -> Result<Vec<PairAssessment>> {
    Ok(analyze_all(&input.requests, &input.history, &cfg.rooms, &cfg.affinity, &cfg.detection)?)
}

fn detect(mut cfg: RunConfig, stamp: &RunStamp, a: DetectArgs) -> Result<ExitCode> {
    let input = load_inputs(&mut cfg, &a.inputs)?;
    // baseline mode changes the output, so it is part of the stamp
    let stamp = if a.inputs.no_preference {
        RunStamp::new(config_hash(&cfg), cfg.seed)
    } else {
        stamp.clone()
    };
    let all = assessments(&cfg, &input)?;
    let mut conflicts: Vec<ImpactConflict> = all.iter().filter_map(PairAssessment::conflict).collect();
    impact_core::detection::sort_conflicts(&mut conflicts);
    match a.out.or_else(|| cfg.paths.out.clone()) {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut w = create(&dir, "conflicts.jsonl")?;
            write_conflicts_jsonl(&conflicts, &stamp, &mut w)?;
            w.flush()?;
            let mut w = create(&dir, "bands.csv")?;
            write_bands_csv(&mined_bands(&all), &stamp, &mut w)?;
            w.flush()?;
            println!("requests={} conflicts={}", input.requests.len(), conflicts.len());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_conflicts_jsonl(&conflicts, &stamp, &mut lock)?;
            lock.flush()?;
        }
    }
    if a.gate && !conflicts.is_empty() {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn evaluate_cmd(cfg: &RunConfig, stamp: &RunStamp, a: OutArgs) -> Result<ExitCode> {
    let dir = out_dir(a.out, cfg)?;
    let mut runs = Vec::new();
    for seed in (0..cfg.evaluation.repetitions as u64).map(|k| cfg.seed.wrapping_add(k)) {
        let corpus = generate(&cfg.synthetic, &cfg.affinity, seed)?;
        let run = evaluate(&corpus, &cfg.affinity, &cfg.detection, &cfg.evaluation)?;
        runs.push(SeededRun { seed, run });
    }
    let mae = summarize_mae(&runs.iter().map(|r| r.run.mae.clone()).collect::<Vec<_>>());
    let report = MetricsReport::new(stamp.clone(), runs, mae);
    let mut w = create(&dir, "metrics.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = create(&dir, "mae.csv")?;
    write_mae_csv(&report.mae, &stamp.preamble(), &mut w)?;
    w.flush()?;
    println!(
        "runs={} accuracy={:.4} baseline_accuracy={:.4}",
        report.runs.len(),
        report.accuracy,
        report.baseline_accuracy
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().with_context(|| format!("bad threshold `{v}`"))?;
            if !(0.0..=1.0).contains(&x) {
                bail!("threshold {x} outside [0, 1]");
            }
            Ok(x)
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t, p) = text
        .split_once('/')
        .ok_or_else(|| anyhow!("--grid expects `T1,T2,../P1,P2,..`"))?;
    Ok((parse_list(t)?, parse_list(p)?))
}

fn sweep(mut cfg: RunConfig, stamp: &RunStamp, a: SweepArgs) -> Result<ExitCode> {
    let (tgrid, pgrid) = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => (cfg.evaluation.temporal_grid.clone(), cfg.evaluation.preferential_grid.clone()),
    };
    let dir = out_dir(a.out, &cfg)?;
    if a.no_preference {
        cfg.detection.mode = DetectionMode::NoPreference;
    }
    cfg.evaluation.temporal_grid = tgrid;
    cfg.evaluation.preferential_grid = pgrid;
    let stamp = if a.grid.is_some() || a.no_preference {
        RunStamp::new(config_hash(&cfg), cfg.seed)
    } else {
        stamp.clone()
    };
    let corpus = generate(&cfg.synthetic, &cfg.affinity, cfg.seed)?;
    let ev = &cfg.evaluation;
    let rows = threshold_sweep(
        &corpus,
        &cfg.affinity,
        &cfg.detection,
        &ev.temporal_grid,
        &ev.preferential_grid,
        ev.label_threshold,
    )?;
    let mut w = create(&dir, "sweep.csv")?;
    write_sweep_csv(&rows, &stamp.preamble(), &mut w)?;
    w.flush()?;
    let best = rows
        .iter()
        .max_by(|x, y| x.metrics.accuracy.total_cmp(&y.metrics.accuracy))
        .expect("non-empty grid");
    println!(
        "points={} best_tau_t={} best_tau_p={} best_accuracy={:.4}",
        rows.len(),
        best.tau_t,
        best.tau_p,
        best.metrics.accuracy
    );
    Ok(ExitCode::SUCCESS)
}

fn explain(mut cfg: RunConfig, stamp: &RunStamp, a: ExplainArgs) -> Result<ExitCode> {
    let input = load_inputs(&mut cfg, &a.inputs)?;
    let stamp = if a.inputs.no_preference {
        RunStamp::new(config_hash(&cfg), cfg.seed)
    } else {
        stamp.clone()
    };
    let dir = out_dir(a.out, &cfg)?;
    let mut items = Vec::new();
    let reqs = &input.requests;
    for (i, first) in reqs.iter().enumerate() {
        for second in &reqs[i + 1..] {
            let pair = [first.clone(), second.clone()];
            let found = analyze_pair(first, second, &input.history, &cfg.rooms, &cfg.affinity, &cfg.detection)?;
            for assessment in found {
                if a.user.as_ref().is_some_and(|u| *u != assessment.affected_user) {
                    continue;
                }
                // the trace spans both requests, not just their overlap
                let span = TimeInterval {
                    start: first.interval.start.min(second.interval.start),
                    end: first.interval.end.max(second.interval.end),
                };
                let room = room_for(&cfg.rooms, &first.location)?;
                let trace = predict_signal(assessment.property, &pair, room, &cfg.affinity, &span)?;
                let name = format!(
                    "signal-{}-{}-{}.csv",
                    items.len() + 1,
                    assessment.affected_user,
                    assessment.property
                );
                let mut w = create(&dir, &name)?;
                for line in stamp.preamble() {
                    writeln!(w, "# {line}")?;
                }
                trace.write_csv(&mut w)?;
                w.flush()?;
                items.push((assessment, name));
            }
        }
    }
    let mut w = create(&dir, "explain.json")?;
    write_explain_json(&items, &stamp, &mut w)?;
    w.flush()?;
    for (x, name) in &items {
        println!(
            "{} vs {} {}: impact={:.4} pref_prox={:.4} temp_prox={:.4} raw_cl={:.4} likelihood={:.4} -> {}",
            x.affected_user, x.other_user, x.property, x.impact, x.pref_prox, x.temp_prox, x.raw_cl, x.likelihood, name
        );
    }
    Ok(ExitCode::SUCCESS)
}
