use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use hypertrack::affinity::MotionContext;
use hypertrack::io::{
    emit_graph, emit_mot, emit_weights, load_sequence, parse_graph, parse_tracks, parse_weights, read_text, write_atomic, Config, GraphDump,
    MotFile, SequencePaths, WeightsFile, TOOL_VERSION,
};
use hypertrack::learn::{train, training_clips};
use hypertrack::metrics::evaluate;
use hypertrack::model::{default_arities, WeightVector};
use hypertrack::oracle::brute_force_dense;
use hypertrack::pipeline::run_sequence_observed;
use hypertrack::postprocess::resolve_conflicts;
use hypertrack::search::search_all;
use hypertrack::synth::{generate, Scenario};
use hypertrack::Error;

#[derive(Parser)]
#[command(name = "hypertrack", version, about = "Multi-object tracking by dense-structure search on learned hypergraphs")]
struct Cli {
    /// Worker threads for graph building and multi-start search (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection file and write MOTChallenge results.
    Track(TrackArgs),
    /// Dense-structure search on a hypergraph dump.
    Search(SearchArgs),
    /// Learn per-degree weights from annotated sequences.
    Learn(LearnArgs),
    /// CLEAR MOT and identity metrics of a result file.
    Eval(EvalArgs),
    /// Write a seeded synthetic scenario.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    det: PathBuf,
    /// Appearance embeddings, one row per detection.
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Precomputed color histograms, one row per detection.
    #[arg(long)]
    hist: Option<PathBuf>,
    /// Point trajectories for the motion channel.
    #[arg(long)]
    pts: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Learned weights; the published defaults are used otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write every window's hypergraph here.
    #[arg(long)]
    dump_graphs: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    alpha_hat: u32,
    #[arg(long)]
    out: PathBuf,
    /// Exhaustive subset enumeration instead of search (small graphs only).
    #[arg(long, hide = true)]
    brute_force: bool,
}

#[derive(Args)]
struct LearnArgs {
    /// A sequence directory (det.txt, gt.txt, optional emb.bin, hist.bin,
    /// points.csv) or a directory of such directories.
    #[arg(long)]
    train_dir: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_weights: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| writeln!(buf, "[{}] {}", rec.level(), rec.args()))
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Track(a) => track(a),
        Command::Search(a) => search(a),
        Command::Learn(a) => learn(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::SizeCap { .. } => 2,
        Error::Io { .. } => 3,
        e if e.is_input_format() => 3,
        _ => 1,
    }
}

fn load_config(path: &Path) -> Result<Config, Error> {
    Config::from_toml(&read_text(path)?, &path.display().to_string())
}

fn load_weights(path: &Path) -> Result<WeightVector, Error> {
    Ok(parse_weights(&read_text(path)?, &path.display().to_string())?.weights)
}

fn check_arities(weights: &WeightVector, expected: &[usize]) -> Result<(), Error> {
    if weights.arities() != expected {
        return Err(Error::DimensionMismatch(format!(
            "weights have per-degree lengths {:?}, graph expects {:?}",
            weights.arities(),
            expected
        )));
    }
    Ok(())
}

fn json_line(value: &serde_json::Value) -> Result<String, Error> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Internal(e.to_string()))
}

fn track(a: TrackArgs) -> Outcome {
    let cfg = load_config(&a.config)?;
    let weights = match &a.weights {
        Some(p) => load_weights(p)?,
        None => WeightVector::builtin(),
    };
    check_arities(&weights, &default_arities(cfg.build.max_degree))?;
    let seq = load_sequence(&SequencePaths {
        det: a.det.clone(),
        emb: a.emb.clone(),
        hist: a.hist.clone(),
        points: a.pts.clone(),
        gt: None,
    })?;
    let mut header = cfg.header_lines();
    header.push(format!(" weights: {:?}", weights.per_degree()));
    if let Some(dir) = &a.dump_graphs {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut dump_error = None;
    let mut windows = 0;
    let tracks = run_sequence_observed(&seq.detections, &MotionContext::new(seq.points), &cfg, &weights, &mut |view| {
        windows += 1;
        let Some(dir) = &a.dump_graphs else { return };
        if dump_error.is_some() {
            return;
        }
        let mut meta = header.clone();
        meta.push(format!(" window: {} start_frame: {}", view.stats.index, view.stats.start_frame + 1));
        let dump = GraphDump {
            meta,
            graph: view.graph.clone(),
        };
        let path = dir.join(format!("window_{:05}.graph", view.stats.index));
        if let Err(e) = write_atomic(&path, emit_graph(&dump).as_bytes()) {
            dump_error = Some(e);
        }
    })?;
    if let Some(e) = dump_error {
        return Err(e.into());
    }
    let labeled: Vec<(i64, _)> = tracks.into_iter().map(|(l, t)| (l as i64, t)).collect();
    write_atomic(&a.out, emit_mot(&MotFile::from_tracks(header, &labeled)).as_bytes())?;
    info!("{} detections, {windows} windows, {} trajectories -> {}", seq.detections.len(), labeled.len(), a.out.display());
    Ok(true)
}

fn search(a: SearchArgs) -> Outcome {
    let mut cfg = Config::default();
    cfg.tracking.alpha_hat = a.alpha_hat as usize;
    cfg.search.alpha_hat = a.alpha_hat as usize;
    cfg.validate()?;
    let dump = parse_graph(&read_text(&a.graph)?, &a.graph.display().to_string())?;
    let weights = load_weights(&a.weights)?;
    check_arities(&weights, dump.graph.arities())?;
    let search = cfg.search_config();

    let (body, converged) = if a.brute_force {
        let best = brute_force_dense(&dump.graph, &weights, search.alpha_hat)?;
        let structures: Vec<serde_json::Value> = best
            .into_iter()
            .map(|(support, theta)| serde_json::json!({ "support": support, "theta": theta }))
            .collect();
        (serde_json::json!({ "method": "brute_force", "structures": structures }), true)
    } else {
        let found = search_all(&dump.graph, &weights, &search)?;
        let selected = resolve_conflicts(&found, search.alpha_hat);
        let converged = found.iter().all(|s| s.converged);
        (serde_json::json!({ "method": "pairwise_updates", "structures": found, "selected": selected }), converged)
    };
    let mut doc = serde_json::json!({
        "tool": TOOL_VERSION,
        "config_hash": cfg.hash(),
        "alpha_hat": search.alpha_hat,
        "nodes": dump.graph.num_nodes(),
    });
    if let (Some(doc), serde_json::Value::Object(body)) = (doc.as_object_mut(), body) {
        doc.extend(body);
    }
    write_atomic(&a.out, json_line(&doc)?.as_bytes())?;
    if !converged {
        log::warn!("some starts hit the iteration cap; results written");
    }
    Ok(converged)
}

/// `dir` itself when it holds `det.txt`, else its subdirectories that do,
/// in name order.
fn sequence_dirs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    if dir.join("det.txt").is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("det.txt").is_file())
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Failure::Usage(format!("{} holds no sequence directories with det.txt", dir.display())));
    }
    Ok(out)
}

fn learn(a: LearnArgs) -> Outcome {
    let cfg = load_config(&a.config)?;
    let dirs = sequence_dirs(&a.train_dir)?;
    let mut instances = Vec::new();
    for dir in &dirs {
        let paths = SequencePaths::in_dir(dir);
        if paths.gt.is_none() {
            return Err(Failure::Usage(format!("{} has no gt.txt", dir.display())));
        }
        let seq = load_sequence(&paths)?;
        let gt = seq.ground_truth.unwrap_or_default();
        let clips = training_clips(&seq.detections, &gt, &MotionContext::new(seq.points), &cfg.build, &cfg.learn)?;
        info!("{}: {} clips", dir.display(), clips.len());
        instances.extend(clips);
    }
    if instances.is_empty() {
        return Err(Failure::Usage("no training clip has two or more matched detections".into()));
    }
    let out = train(&instances, &cfg.learn, &cfg.search_config())?;
    let mut comments = cfg.header_lines();
    comments.push(format!(
        " trained on {} clips from {} sequences: {} rounds, {}, slack sum {:e}",
        instances.len(),
        dirs.len(),
        out.rounds,
        if out.converged { "converged" } else { "not converged" },
        out.slack_sum
    ));
    let file = WeightsFile {
        comments,
        config_hash: Some(cfg.hash()),
        weights: out.weights,
    };
    write_atomic(&a.out_weights, emit_weights(&file).as_bytes())?;
    println!(
        "{} after {} rounds; slack sum {:e}; weights -> {}",
        if out.converged { "converged" } else { "stopped at max_rounds" },
        out.rounds,
        out.slack_sum,
        a.out_weights.display()
    );
    Ok(out.converged)
}

fn eval(a: EvalArgs) -> Outcome {
    let mut cfg = Config::default();
    cfg.metrics.iou_threshold = a.iou;
    cfg.validate()?;
    let results = parse_tracks(&read_text(&a.results)?, &a.results.display().to_string())?;
    let gt = parse_tracks(&read_text(&a.gt)?, &a.gt.display().to_string())?;
    let report = evaluate(&results.boxes(), &gt.boxes(), a.iou);
    let doc = serde_json::json!({
        "tool": TOOL_VERSION,
        "config_hash": cfg.hash(),
        "report": report,
    });
    write_atomic(&a.report, json_line(&doc)?.as_bytes())?;
    print!("{}", report.to_table());
    Ok(true)
}

fn synth(a: SynthArgs) -> Outcome {
    let scenario = Scenario::by_name(&a.scenario)?;
    let out = generate(&scenario, a.seed, &Config::default().header_lines())?;
    out.write_to(&a.out_dir)?;
    info!(
        "{}: {} detections, {} ground-truth boxes -> {}",
        scenario.name,
        out.detections.records.len(),
        out.ground_truth.records.len(),
        a.out_dir.display()
    );
    Ok(true)
}
