use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use retarget::buckets::{fit_thresholds, read_thresholds, write_thresholds, BucketKey, BucketRecord, UtilityScore};
use retarget::combiner::{
    export_traveler_embedding, sequence_matrix, train_combiner, write_params, CombinerKind, CombinerTrainConfig,
    SequenceExample,
};
use retarget::embedding::{
    demand_from_events, destination_embeddings, read_embeddings, train_skipgram, write_destinations, write_embeddings,
    NegativeSampling, SkipGramConfig,
};
use retarget::eval::{evaluate, format_table, DEFAULT_THRESHOLD};
use retarget::gbdt::{fit, read_ensemble, write_ensemble, BoostConfig, Objective};
use retarget::model::{build_histories, read_events, ActivityEvent, LabeledExample, DEFAULT_GAP_MS};
use retarget::pipeline::{
    generate_world, run_pipeline, write_world, BookingRule, ModelBundle, PipelineConfig, StreamScorer,
    SyntheticWorldConfig,
};
use retarget::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Booking-intent and value models for re-targeting returning travelers.
///
/// Any flag may also be set in a TOML file passed with `--config`: keys go in a
/// table named after the subcommand (`[boost]`, `rounds = 50`). For `pipeline`
/// the whole file is a pipeline configuration. Flags on the command line win.
#[derive(Parser, Debug)]
#[command(name = "retarget", version, args_override_self = true)]
struct Cli {
    /// TOML file supplying default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads; 0 uses every core. Defaults to 1 (reproducible).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic world with a known booking model.
    Generate(GenerateArgs),
    /// Train skip-gram listing embeddings on sessionized events.
    Embed(EmbedArgs),
    /// Train a traveler-embedding combiner and booking classifier.
    Combine(CombineArgs),
    /// Fit or apply a gradient boosted tree ensemble.
    Boost(BoostArgs),
    /// Fit bucket thresholds and assign travelers to funnel buckets.
    Bucket(BucketArgs),
    /// AUC, precision, recall and F1 for scored examples.
    Evaluate(EvaluateArgs),
    /// Run the full offline pipeline and persist every artifact.
    Pipeline(PipelineArgs),
    /// Score an NDJSON event stream one event at a time.
    ScoreStream(ScoreStreamArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Linear,
    Nonlinear,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Output directory for events, ground truth and centroids.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    travelers: usize,
    #[arg(long, default_value_t = 8)]
    destinations: usize,
    #[arg(long, default_value_t = 25)]
    listings_per_destination: usize,
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    mean_sessions: f64,
    #[arg(long, default_value_t = 5.0)]
    mean_session_length: f64,
    #[arg(long, value_enum, default_value_t = RuleArg::Linear)]
    rule: RuleArg,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 3.0)]
    signal_scale: f64,
    #[arg(long, default_value_t = 2)]
    periods: usize,
    #[arg(long, default_value_t = 7)]
    period_days: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    /// NDJSON event log.
    #[arg(long)]
    events: PathBuf,
    /// Listing embeddings output.
    #[arg(long)]
    out: PathBuf,
    /// Also write demand-weighted destination embeddings here.
    #[arg(long)]
    destinations_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GAP_MS)]
    session_gap_ms: i64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-3)]
    subsample_threshold: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Draw negatives uniformly instead of by unigram^0.75.
    #[arg(long)]
    uniform_negatives: bool,
    /// Give every coordinate zero mean and unit variance.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CombineArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// random, average, dan, lstm or lstm-attention.
    #[arg(long, default_value = "dan")]
    kind: CombinerKind,
    /// Combiner parameters output.
    #[arg(long)]
    out: PathBuf,
    /// Also write one NDJSON traveler embedding per traveler here.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GAP_MS)]
    session_gap_ms: i64,
    #[arg(long, default_value_t = retarget::combiner::MAX_SEQUENCE_LEN)]
    max_sequence_len: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    /// LSTM hidden size.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Logistic,
    SquaredLogValue,
}

#[derive(Args, Debug)]
struct BoostArgs {
    /// NDJSON labeled examples: traveler_id, features, label_intent, label_value.
    #[arg(long)]
    data: PathBuf,
    /// Write the fitted ensemble here.
    #[arg(long, required_unless_present = "model")]
    out: Option<PathBuf>,
    /// Apply this ensemble to the data instead of fitting.
    #[arg(long, conflicts_with = "out")]
    model: Option<PathBuf>,
    /// Predictions output when applying a model (stdout by default).
    #[arg(long, requires = "model")]
    predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Logistic)]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// 0 grows trees until no split has positive gain.
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.8)]
    colsample: f64,
    #[arg(long, default_value_t = 1e-3)]
    min_child_hessian: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KeyArg {
    Utility,
    Probability,
}

#[derive(Args, Debug)]
struct BucketArgs {
    /// NDJSON scores: traveler_id, r, m.
    #[arg(long)]
    scores: PathBuf,
    /// Use these thresholds instead of fitting new ones.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Write fitted thresholds here.
    #[arg(long, conflicts_with = "thresholds")]
    out: Option<PathBuf>,
    /// Bucket records output (stdout by default).
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long, default_value_t = retarget::buckets::DEFAULT_BUCKETS)]
    buckets: usize,
    #[arg(long, value_enum, default_value_t = KeyArg::Utility)]
    key: KeyArg,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// NDJSON lines with `score`, `label` (bool or 0/1) and optional `setting`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Print JSON reports instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated combiners to compare.
    #[arg(long, value_delimiter = ',')]
    combiners: Option<Vec<CombinerKind>>,
    #[arg(long)]
    primary_combiner: Option<CombinerKind>,
    #[arg(long)]
    boundary_ms: Option<i64>,
    #[arg(long)]
    period_days: Option<i64>,
    #[arg(long)]
    buckets: Option<usize>,
}

#[derive(Args, Debug)]
struct ScoreStreamArgs {
    /// Directory written by `pipeline`.
    #[arg(long)]
    models: PathBuf,
    /// Event input (stdin by default).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Record output (stdout by default).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Travelers kept in memory before the least recent is evicted.
    #[arg(long, default_value_t = 100_000)]
    capacity: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(Error::Json(e))
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::Config(_) => EXIT_USAGE,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

fn open_input(path: &Path) -> CliResult<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Run(Error::InvalidInput(format!("cannot open {}: {e}", path.display()))))
}

fn create_output(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn output_or_stdout(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create_output(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_events(path: &Path) -> CliResult<Vec<ActivityEvent>> {
    let (events, report) = read_events(open_input(path)?)?;
    if report.malformed > 0 {
        log::warn!("{} malformed lines skipped in {}", report.malformed, path.display());
    }
    Ok(events)
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::Run(Error::InvalidInput(format!("{}, line {}: {e}", path.display(), i + 1))))?;
        out.push(item);
    }
    Ok(out)
}

fn generate(a: GenerateArgs) -> CliResult {
    let config = SyntheticWorldConfig {
        n_travelers: a.travelers,
        n_destinations: a.destinations,
        listings_per_destination: a.listings_per_destination,
        latent_dim: a.latent_dim,
        mean_sessions: a.mean_sessions,
        mean_session_length: a.mean_session_length,
        rule: match a.rule {
            RuleArg::Linear => BookingRule::Linear,
            RuleArg::Nonlinear => BookingRule::Nonlinear,
        },
        noise: a.noise,
        signal_scale: a.signal_scale,
        periods: a.periods,
        period_days: a.period_days,
        seed: a.seed,
        ..SyntheticWorldConfig::default()
    };
    let world = generate_world(&config)?;
    write_world(&a.out, &world)?;
    let summary = serde_json::json!({
        "events": world.events.len(),
        "travelers": world.truth.travelers.len(),
        "booking_rate": world.truth.booking_rate(),
        "mean_true_probability": world.truth.mean_true_probability(),
    });
    println!("{summary}");
    Ok(())
}

fn embed(a: EmbedArgs) -> CliResult {
    let events = load_events(&a.events)?;
    let histories = build_histories(&events, a.session_gap_ms)?;
    let sequences: Vec<Vec<String>> = histories
        .iter()
        .flat_map(|h| h.sessions.iter().map(|s| s.listing_sequence.clone()))
        .filter(|s| !s.is_empty())
        .collect();
    let config = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        subsample_threshold: a.subsample_threshold,
        min_count: a.min_count,
        negative_sampling: if a.uniform_negatives { NegativeSampling::Uniform } else { NegativeSampling::Unigram },
        seed: a.seed,
        threads: rayon::current_num_threads(),
    };
    let model = train_skipgram(&sequences, &config)?;
    let table = if a.standardize { model.to_table().standardized() } else { model.to_table() };
    let mut w = create_output(&a.out)?;
    write_embeddings(&mut w, &table)?;
    w.flush()?;
    if let Some(path) = &a.destinations_out {
        let dest = destination_embeddings(&table, &demand_from_events(&events)?)?;
        let mut w = create_output(path)?;
        write_destinations(&mut w, dest.vectors())?;
        w.flush()?;
    }
    log::info!("embedded {} listings from {} sessions", table.len(), sequences.len());
    Ok(())
}

fn combine(a: CombineArgs) -> CliResult {
    let events = load_events(&a.events)?;
    let table = read_embeddings(open_input(&a.embeddings)?)?;
    let histories = build_histories(&events, a.session_gap_ms)?;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for h in &histories {
        if let Some(seq) = sequence_matrix(&table, &h.listing_sequence(), a.max_sequence_len) {
            ids.push(h.traveler_id.clone());
            data.push(SequenceExample::new(seq, if h.label().0 { 1.0 } else { 0.0 })?);
        }
    }
    let config = CombinerTrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        patience: a.patience,
        validation_fraction: a.validation_fraction,
        hidden: a.hidden,
        seed: a.seed,
    };
    let (params, report) = train_combiner(a.kind, &data, &config)?;
    let mut w = create_output(&a.out)?;
    write_params(&mut w, &params)?;
    w.flush()?;
    if let Some(path) = &a.export {
        let mut w = create_output(path)?;
        for (id, ex) in ids.iter().zip(&data) {
            let e = export_traveler_embedding(&params, id, ex.sequence.view())?;
            serde_json::to_writer(&mut w, &serde_json::json!({"traveler_id": e.traveler_id, "vector": e.vector}))?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn boost(a: BoostArgs) -> CliResult {
    let data: Vec<LabeledExample> = read_ndjson(&a.data)?;
    if let Some(model_path) = &a.model {
        let model = read_ensemble(open_input(model_path)?)?;
        let mut out = output_or_stdout(a.predictions.as_deref())?;
        for ex in &data {
            let p = model.predict(&ex.features)?;
            serde_json::to_writer(&mut out, &serde_json::json!({"traveler_id": ex.traveler_id, "prediction": p}))?;
            writeln!(out)?;
        }
        out.flush()?;
        return Ok(());
    }
    let config = BoostConfig {
        rounds: a.rounds,
        learning_rate: a.learning_rate,
        max_depth: (a.max_depth > 0).then_some(a.max_depth),
        lambda: a.lambda,
        gamma: a.gamma,
        colsample: a.colsample,
        min_child_hessian: a.min_child_hessian,
        seed: a.seed,
        objective: match a.objective {
            ObjectiveArg::Logistic => Objective::Logistic,
            ObjectiveArg::SquaredLogValue => Objective::SquaredLogValue,
        },
        parallel: rayon::current_num_threads() > 1,
    };
    let model = fit(&data, &config)?;
    let out = a.out.as_deref().expect("clap requires --out or --model");
    let mut w = create_output(out)?;
    write_ensemble(&mut w, &model)?;
    w.flush()?;
    log::info!("fitted {} trees on {} examples", model.trees.len(), data.len());
    Ok(())
}

#[derive(Deserialize)]
struct ScoreLine {
    traveler_id: String,
    r: f64,
    #[serde(default)]
    m: f64,
}

fn bucket(a: BucketArgs) -> CliResult {
    let lines: Vec<ScoreLine> = read_ndjson(&a.scores)?;
    let scores: Vec<UtilityScore> =
        lines.into_iter().map(|s| UtilityScore::new(s.traveler_id, s.r, s.m)).collect::<Result<_, _>>()?;
    let key = match a.key {
        KeyArg::Utility => BucketKey::Utility,
        KeyArg::Probability => BucketKey::Probability,
    };
    let thresholds = match &a.thresholds {
        Some(path) => read_thresholds(open_input(path)?)?,
        None => {
            let keys: Vec<f64> = scores.iter().map(|s| s.key(key)).collect();
            let t = fit_thresholds(&keys, a.buckets)?;
            if let Some(path) = &a.out {
                let mut w = create_output(path)?;
                write_thresholds(&mut w, &t)?;
                w.flush()?;
            }
            t
        }
    };
    let mut out = output_or_stdout(a.records.as_deref())?;
    for s in &scores {
        serde_json::to_writer(&mut out, &BucketRecord::new(s, &thresholds, key))?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_label(v: &serde_json::Value) -> Option<bool> {
    match v {
        serde_json::Value::Bool(b) => Some(*b),
        serde_json::Value::Number(n) => match n.as_f64()? {
            0.0 => Some(false),
            1.0 => Some(true),
            _ => None,
        },
        _ => None,
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult {
    let rows: Vec<serde_json::Value> = read_ndjson(&a.scores)?;
    let mut groups: Vec<(String, Vec<f64>, Vec<bool>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let bad = |what: &str| CliError::Run(Error::InvalidInput(format!("record {}: {what}", i + 1)));
        let score = row.get("score").and_then(|v| v.as_f64()).ok_or_else(|| bad("missing numeric `score`"))?;
        let label = row.get("label").and_then(parse_label).ok_or_else(|| bad("`label` must be a bool or 0/1"))?;
        let setting = row.get("setting").and_then(|v| v.as_str()).unwrap_or("scores").to_string();
        match groups.iter_mut().find(|g| g.0 == setting) {
            Some(g) => {
                g.1.push(score);
                g.2.push(label);
            }
            None => groups.push((setting, vec![score], vec![label])),
        }
    }
    let reports = groups
        .iter()
        .map(|(s, scores, labels)| evaluate(s.clone(), scores, labels, a.threshold))
        .collect::<Result<Vec<_>, _>>()?;
    if a.json {
        for r in &reports {
            println!("{}", serde_json::to_string(r)?);
        }
    } else {
        print!("{}", format_table(&reports));
    }
    Ok(())
}

fn pipeline(a: PipelineArgs, config_path: Option<&Path>, threads: Option<usize>) -> CliResult {
    let mut config = match config_path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = a.events {
        config.events = v;
    }
    if let Some(v) = a.output {
        config.output = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.combiners {
        config.combiners = v;
    }
    if let Some(v) = a.primary_combiner {
        config.primary_combiner = v;
    }
    if let Some(v) = a.boundary_ms {
        config.boundary_ms = Some(v);
    }
    if let Some(v) = a.period_days {
        config.period_days = v;
    }
    if let Some(v) = a.buckets {
        config.n_buckets = v;
    }
    if let Some(v) = threads {
        config.threads = v;
    }
    let (outcome, _) = run_pipeline(&config)?;
    print!("{}", outcome.report.to_text());
    log::info!("artifacts written to {}", config.output.display());
    Ok(())
}

fn score_stream(a: ScoreStreamArgs) -> CliResult {
    let bundle = ModelBundle::load(&a.models)?;
    let mut scorer = StreamScorer::new(bundle, a.capacity)?;
    let input: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(open_input(p)?),
        None => Box::new(io::stdin().lock()),
    };
    let out = output_or_stdout(a.output.as_deref())?;
    let stats = scorer.run(input, out, io::stderr().lock())?;
    log::info!("{}", serde_json::to_string(&stats)?);
    Ok(())
}

/// Splices the `[<subcommand>]` table of the `--config` file into the
/// arguments, right after the subcommand, so explicit flags still win.
fn splice_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let text: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config = None;
    for (i, a) in text.iter().enumerate() {
        if a == "--config" {
            config = text.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        }
    }
    let Some(config) = config else { return Ok(args) };
    let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = text.iter().skip(1).position(|a| names.contains(a)).map(|p| p + 1) else {
        return Ok(args);
    };
    if text[pos] == "pipeline" {
        return Ok(args);
    }
    let raw = fs::read_to_string(&config).map_err(|e| CliError::Usage(format!("cannot read {config}: {e}")))?;
    let table: toml::Table = raw.parse().map_err(|e| CliError::Usage(format!("{config}: {e}")))?;
    let Some(section) = table.get(&text[pos]) else { return Ok(args) };
    let section =
        section.as_table().ok_or_else(|| CliError::Usage(format!("{config}: `{}` must be a table", text[pos])))?;
    let mut injected = Vec::new();
    for (key, value) in section {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> CliResult<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(n) => Ok(n.to_string()),
                toml::Value::Float(x) => Ok(x.to_string()),
                _ => Err(CliError::Usage(format!("{config}: unsupported value for `{key}`"))),
            }
        };
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    injected.push(flag.clone());
                    injected.push(scalar(item)?);
                }
            }
            v => {
                injected.push(flag);
                injected.push(scalar(v)?);
            }
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected.into_iter().map(OsString::from));
    Ok(out)
}

fn run(cli: Cli) -> CliResult {
    let threads = cli.threads;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(1))
        .build_global()
        .map_err(|e| CliError::Run(Error::Config(format!("thread pool: {e}"))))?;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Embed(a) => embed(a),
        Command::Combine(a) => combine(a),
        Command::Boost(a) => boost(a),
        Command::Bucket(a) => bucket(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Pipeline(a) => pipeline(a, cli.config.as_deref(), threads),
        Command::ScoreStream(a) => score_stream(a),
    }
}

fn main() -> ExitCode {
    let args = match splice_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::command().try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
