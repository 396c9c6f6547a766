//! The offline pipeline and the model bundle it produces.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use crate::buckets::{
    bucket_report, fit_thresholds, read_thresholds, write_thresholds, BucketKey, BucketRecord, BucketReport,
    BucketThresholds, Outcome, UtilityScore,
};
use crate::combiner::{
    read_params, sequence_matrix, train_combiner, write_params, CombinerKind, CombinerParams, SequenceExample,
    TrainReport,
};
use crate::embedding::{read_embeddings, train_skipgram, write_embeddings, EmbeddingTable};
use crate::eval::{evaluate, format_table, temporal_split, MetricReport};
use crate::gbdt::{fit, read_ensemble, write_ensemble, Ensemble};
use crate::model::{
    build_histories, filter_bots, handcrafted_features_with, read_events, ActivityEvent, LabeledExample,
    TravelerHistory, MS_PER_DAY, NUM_FEATURES,
};
use crate::util::sigmoid;
use crate::{Error, Result};

pub const EMBEDDINGS_FILE: &str = "embeddings.emb";
pub const INTENT_FILE: &str = "intent.gbt";
pub const VALUE_FILE: &str = "value.gbt";
pub const THRESHOLDS_FILE: &str = "thresholds.bkt";
pub const SCORING_FILE: &str = "scoring.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const BUCKETS_FILE: &str = "buckets.ndjson";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn combiner_file(kind: CombinerKind) -> String {
    format!("combiner-{kind}.nn")
}

/// Display name of a combiner in reports.
pub fn combiner_label(kind: CombinerKind) -> &'static str {
    match kind {
        CombinerKind::Random => "Random",
        CombinerKind::Average => "Averaging",
        CombinerKind::Dan => "DAN",
        CombinerKind::Lstm => "LSTM",
        CombinerKind::LstmAttention => "LSTM + Attention",
    }
}

/// A row of the metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// The combiner's own booking classifier on its traveler embedding.
    Combiner(CombinerKind),
    /// Gradient boosting on handcrafted features.
    Handcrafted,
    /// Gradient boosting on handcrafted features and the traveler embedding.
    Combined(CombinerKind),
}

impl FeatureSet {
    pub fn label(self) -> String {
        match self {
            FeatureSet::Combiner(k) => combiner_label(k).to_string(),
            FeatureSet::Handcrafted => "Only handcrafted".to_string(),
            FeatureSet::Combined(k) => format!("Handcrafted + {}", combiner_label(k)),
        }
    }
}

/// `handcrafted ++ embedding ++ [has_embedding]`; a missing embedding is zeros.
pub fn join_features(handcrafted: &[f64], embedding: Option<&[f64]>, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(handcrafted.len() + dim + 1);
    out.extend_from_slice(handcrafted);
    match embedding {
        Some(e) => {
            out.extend_from_slice(e);
            out.push(1.0);
        }
        None => {
            out.extend(std::iter::repeat_n(0.0, dim));
            out.push(0.0);
        }
    }
    out
}

/// Traveler embedding from the listings a traveler interacted with, oldest first.
pub fn traveler_embedding<S: AsRef<str>>(
    combiner: &CombinerParams,
    table: &EmbeddingTable,
    listings: &[S],
    max_len: usize,
) -> Result<Option<Vec<f64>>> {
    match sequence_matrix(table, listings, max_len) {
        Some(seq) => Ok(Some(combiner.embed(seq.view())?.to_vec())),
        None => Ok(None),
    }
}

/// Booking probability from a combiner's own readout; a traveler without an
/// embedding gets the readout of the zero vector.
pub fn combiner_probability(combiner: &CombinerParams, embedding: Option<&[f64]>) -> f64 {
    let logit = match embedding {
        Some(e) => combiner.readout(e),
        None => combiner.readout(&vec![0.0; combiner.output_dim()]),
    };
    sigmoid(logit)
}

/// Settings shared by batch and stream scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSpec {
    pub session_gap_ms: i64,
    pub feature_window_ms: i64,
    pub max_sequence_len: usize,
    pub combiner: CombinerKind,
    pub bucket_key: BucketKey,
}

/// Everything needed to score a traveler.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub spec: ScoringSpec,
    pub embeddings: EmbeddingTable,
    pub combiner: CombinerParams,
    pub intent: Ensemble,
    pub value: Option<Ensemble>,
    pub thresholds: BucketThresholds,
}

impl ModelBundle {
    pub fn features<S: AsRef<str>>(&self, handcrafted: &[f64], listings: &[S]) -> Result<Vec<f64>> {
        let emb = traveler_embedding(&self.combiner, &self.embeddings, listings, self.spec.max_sequence_len)?;
        Ok(join_features(handcrafted, emb.as_deref(), self.combiner.output_dim()))
    }

    /// Booking probability, predicted value and bucket from handcrafted
    /// features and the traveler's listing interactions.
    pub fn score<S: AsRef<str>>(&self, traveler_id: &str, handcrafted: &[f64], listings: &[S]) -> Result<BucketRecord> {
        let x = self.features(handcrafted, listings)?;
        let r = self.intent.predict(&x)?;
        let m = match &self.value {
            Some(v) => v.predict(&x)?,
            None => 0.0,
        };
        let score = UtilityScore::new(traveler_id, r, m)?;
        Ok(BucketRecord::new(&score, &self.thresholds, self.spec.bucket_key))
    }

    pub fn score_history(&self, history: &TravelerHistory) -> Result<BucketRecord> {
        let handcrafted = handcrafted_features_with(history, self.spec.feature_window_ms);
        self.score(&history.traveler_id, &handcrafted, &history.listing_sequence())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let create =
            |name: &str| -> Result<BufWriter<fs::File>> { Ok(BufWriter::new(fs::File::create(dir.join(name))?)) };
        let mut w = create(SCORING_FILE)?;
        serde_json::to_writer_pretty(&mut w, &self.spec)?;
        writeln!(w)?;
        w.flush()?;
        let mut w = create(EMBEDDINGS_FILE)?;
        write_embeddings(&mut w, &self.embeddings)?;
        w.flush()?;
        let mut w = create(&combiner_file(self.spec.combiner))?;
        write_params(&mut w, &self.combiner)?;
        w.flush()?;
        let mut w = create(INTENT_FILE)?;
        write_ensemble(&mut w, &self.intent)?;
        w.flush()?;
        if let Some(v) = &self.value {
            let mut w = create(VALUE_FILE)?;
            write_ensemble(&mut w, v)?;
            w.flush()?;
        }
        let mut w = create(THRESHOLDS_FILE)?;
        write_thresholds(&mut w, &self.thresholds)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<BufReader<fs::File>> {
            let path = dir.join(name);
            fs::File::open(&path)
                .map(BufReader::new)
                .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
        };
        let spec: ScoringSpec = serde_json::from_reader(open(SCORING_FILE)?)?;
        let embeddings = read_embeddings(open(EMBEDDINGS_FILE)?)?;
        let combiner = read_params(open(&combiner_file(spec.combiner))?)?;
        if combiner.kind() != spec.combiner || combiner.input_dim() != embeddings.dim() {
            return Err(Error::ShapeMismatch("combiner does not match the embeddings".into()));
        }
        let intent = read_ensemble(open(INTENT_FILE)?)?;
        let value = if dir.join(VALUE_FILE).exists() { Some(read_ensemble(open(VALUE_FILE)?)?) } else { None };
        let thresholds = read_thresholds(open(THRESHOLDS_FILE)?)?;
        let width = NUM_FEATURES + combiner.output_dim() + 1;
        if intent.num_features != width || value.as_ref().is_some_and(|v| v.num_features != width) {
            return Err(Error::ShapeMismatch(format!("models expect a different feature width than {width}")));
        }
        Ok(ModelBundle { spec, embeddings, combiner, intent, value, thresholds })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerTraining {
    pub combiner: CombinerKind,
    pub examples: usize,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub events: usize,
    pub bots_dropped: usize,
    pub boundary_ms: i64,
    pub embedding_period_travelers: usize,
    pub evaluation_period_travelers: usize,
    pub train_travelers: usize,
    pub test_travelers: usize,
    pub vocabulary_size: usize,
    pub combiner_training: Vec<CombinerTraining>,
    /// One row per feature set, evaluated on the held-out travelers.
    pub metrics: Vec<MetricReport>,
    pub value_model: bool,
    pub buckets: BucketReport,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn metric(&self, set: FeatureSet) -> Option<&MetricReport> {
        let label = set.label();
        self.metrics.iter().find(|m| m.setting == label)
    }

    pub fn to_text(&self) -> String {
        let mut out = format_table(&self.metrics);
        out.push('\n');
        out.push_str(&format!(
            "{:>6}  {:>6}  {:>12}  {:>12}  {:>10}\n",
            "bucket", "count", "booking_rate", "mean_utility", "mean_rpc"
        ));
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for b in &self.buckets.buckets {
            out.push_str(&format!(
                "{:>6}  {:>6}  {:>12}  {:>12}  {:>10}\n",
                b.bucket,
                b.count,
                opt(b.booking_rate),
                opt(b.mean_predicted_utility),
                opt(b.mean_rpc)
            ));
        }
        out.push_str(&format!("spearman(bucket, rpc) = {}\n", opt(self.buckets.spearman)));
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Models and report of one run, plus the test-set bucket records.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub bundle: ModelBundle,
    /// Every trained combiner, primary included.
    pub combiners: Vec<CombinerParams>,
    pub report: PipelineReport,
    pub test_records: Vec<BucketRecord>,
}

struct Row {
    traveler_id: String,
    handcrafted: Vec<f64>,
    embeddings: Vec<Option<Vec<f64>>>,
    booked: bool,
    value: f64,
}

fn examples(rows: &[&Row], set: FeatureSet, kinds: &[CombinerKind], dims: &[usize]) -> Vec<LabeledExample> {
    let pick = |k: CombinerKind| kinds.iter().position(|&x| x == k).expect("trained combiner");
    rows.iter()
        .map(|r| {
            let features = match set {
                FeatureSet::Handcrafted | FeatureSet::Combiner(_) => r.handcrafted.clone(),
                FeatureSet::Combined(k) => {
                    join_features(&r.handcrafted, r.embeddings[pick(k)].as_deref(), dims[pick(k)])
                }
            };
            LabeledExample {
                traveler_id: r.traveler_id.clone(),
                features,
                label_intent: r.booked,
                label_value: r.value,
            }
        })
        .collect()
}

/// Runs every stage on in-memory events. Errors name the failing stage.
pub fn run_on_events(events: &[ActivityEvent], config: &PipelineConfig) -> Result<PipelineOutcome> {
    let cfg = config.resolved();
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_stages(events, &cfg))
}

fn run_stages(events: &[ActivityEvent], cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let mut warnings = Vec::new();

    let (kept, dropped) = filter_bots(events, cfg.bots);
    if !dropped.is_empty() {
        log::info!("dropped {} bot travelers", dropped.len());
    }

    let first = kept
        .iter()
        .map(|e| e.timestamp)
        .min()
        .ok_or(Error::InvalidInput("no events".into()))
        .map_err(|e| e.in_stage("split"))?;
    let boundary = cfg.boundary_ms.unwrap_or(first + cfg.period_days * MS_PER_DAY);
    let (period1, period2) = temporal_split(&kept, boundary).map_err(|e| e.in_stage("split"))?;
    let sessionize =
        |ev: &[ActivityEvent]| build_histories(ev, cfg.session_gap_ms).map_err(|e| e.in_stage("sessionize"));
    let (hist1, hist2) = (sessionize(&period1)?, sessionize(&period2)?);
    log::info!("{} travelers before the boundary, {} after", hist1.len(), hist2.len());

    let sequences: Vec<Vec<String>> = hist1
        .iter()
        .flat_map(|h| h.sessions.iter().map(|s| s.listing_sequence.clone()))
        .filter(|s| !s.is_empty())
        .collect();
    let skipgram = train_skipgram(&sequences, &cfg.skipgram).map_err(|e| e.in_stage("skipgram"))?;
    let table = if cfg.standardize_embeddings { skipgram.to_table().standardized() } else { skipgram.to_table() };
    log::info!("embedded {} listings in {} dimensions", table.len(), table.dim());

    let train_seqs: Vec<SequenceExample> = hist1
        .iter()
        .filter_map(|h| {
            let seq = sequence_matrix(&table, &h.listing_sequence(), cfg.max_sequence_len)?;
            Some(SequenceExample { sequence: seq, label: if h.label().0 { 1.0 } else { 0.0 } })
        })
        .collect();
    let mut combiners = Vec::new();
    let mut combiner_training = Vec::new();
    for &kind in &cfg.combiners {
        let (params, report) = train_combiner(kind, &train_seqs, &cfg.combiner).map_err(|e| e.in_stage("combiner"))?;
        log::info!("trained {kind} combiner for {} epochs", report.epochs_run());
        combiner_training.push(CombinerTraining { combiner: kind, examples: train_seqs.len(), report });
        combiners.push(params);
    }
    let kinds: Vec<CombinerKind> = combiners.iter().map(CombinerParams::kind).collect();
    let dims: Vec<usize> = combiners.iter().map(CombinerParams::output_dim).collect();

    let rows: Vec<Row> = hist2
        .iter()
        .map(|h| {
            let listings = h.listing_sequence();
            let embeddings = combiners
                .iter()
                .map(|c| traveler_embedding(c, &table, &listings, cfg.max_sequence_len))
                .collect::<Result<Vec<_>>>()?;
            let (booked, value) = h.label();
            Ok(Row {
                traveler_id: h.traveler_id.clone(),
                handcrafted: handcrafted_features_with(h, cfg.feature_window_ms),
                embeddings,
                booked,
                value,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| e.in_stage("features"))?;
    if rows.len() < 2 {
        return Err(Error::InvalidInput("fewer than two travelers to evaluate".into()).in_stage("features"));
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(4)));
    let n_test = ((rows.len() as f64 * cfg.test_fraction).round() as usize).clamp(1, rows.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train: Vec<&Row> = train_idx.iter().map(|&i| &rows[i]).collect();
    let test: Vec<&Row> = test_idx.iter().map(|&i| &rows[i]).collect();
    let test_labels: Vec<bool> = test.iter().map(|r| r.booked).collect();

    let mut sets: Vec<FeatureSet> = kinds.iter().map(|&k| FeatureSet::Combiner(k)).collect();
    sets.push(FeatureSet::Handcrafted);
    sets.extend(kinds.iter().map(|&k| FeatureSet::Combined(k)));
    let primary = FeatureSet::Combined(cfg.primary_combiner);
    let mut metrics = Vec::new();
    let mut intent = None;
    for set in sets {
        let scores: Vec<f64> = if let FeatureSet::Combiner(k) = set {
            let i = kinds.iter().position(|&x| x == k).expect("trained combiner");
            test.iter().map(|r| combiner_probability(&combiners[i], r.embeddings[i].as_deref())).collect()
        } else {
            let train_ex = examples(&train, set, &kinds, &dims);
            let model = fit(&train_ex, &cfg.intent).map_err(|e| e.in_stage("intent"))?;
            let scores = examples(&test, set, &kinds, &dims)
                .iter()
                .map(|e| model.predict(&e.features))
                .collect::<Result<_>>()
                .map_err(|e| e.in_stage("intent"))?;
            if set == primary {
                intent = Some(model);
            }
            scores
        };
        match evaluate(set.label(), &scores, &test_labels, cfg.threshold) {
            Ok(m) => metrics.push(m),
            Err(e) => {
                log::warn!("{}: {e}", set.label());
                warnings.push(format!("{}: {e}", set.label()));
            }
        }
    }
    let intent = intent.expect("primary feature set is evaluated");

    let train_main = examples(&train, primary, &kinds, &dims);
    let booked: Vec<LabeledExample> = train_main.iter().filter(|e| e.label_intent).cloned().collect();
    let value = if booked.is_empty() {
        let msg = "no bookings in the training travelers; value model skipped and values set to 0".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        None
    } else {
        Some(fit(&booked, &cfg.value).map_err(|e| e.in_stage("value"))?)
    };

    let pi = kinds.iter().position(|&k| k == cfg.primary_combiner).expect("primary trained");
    let score_rows = |rows: &[&Row]| -> Result<Vec<UtilityScore>> {
        rows.iter()
            .map(|r| {
                let x = join_features(&r.handcrafted, r.embeddings[pi].as_deref(), dims[pi]);
                let p = intent.predict(&x)?;
                let m = match &value {
                    Some(v) => v.predict(&x)?,
                    None => 0.0,
                };
                UtilityScore::new(r.traveler_id.clone(), p, m)
            })
            .collect()
    };
    let train_scores = score_rows(&train).map_err(|e| e.in_stage("buckets"))?;
    let test_scores = score_rows(&test).map_err(|e| e.in_stage("buckets"))?;
    let keys: Vec<f64> = train_scores.iter().map(|s| s.key(cfg.bucket_key)).collect();
    let thresholds = fit_thresholds(&keys, cfg.n_buckets).map_err(|e| e.in_stage("buckets"))?;
    let test_records: Vec<BucketRecord> =
        test_scores.iter().map(|s| BucketRecord::new(s, &thresholds, cfg.bucket_key)).collect();
    let assignments: Vec<usize> = test_records.iter().map(|r| r.bucket).collect();
    let utilities: Vec<f64> = test_records.iter().map(|r| r.u).collect();
    let outcomes: Vec<Outcome> = test.iter().map(|r| Outcome { booked: r.booked, value: r.value }).collect();
    let buckets =
        bucket_report(cfg.n_buckets, &assignments, &utilities, &outcomes).map_err(|e| e.in_stage("buckets"))?;

    let report = PipelineReport {
        events: events.len(),
        bots_dropped: dropped.len(),
        boundary_ms: boundary,
        embedding_period_travelers: hist1.len(),
        evaluation_period_travelers: hist2.len(),
        train_travelers: train.len(),
        test_travelers: test.len(),
        vocabulary_size: table.len(),
        combiner_training,
        metrics,
        value_model: value.is_some(),
        buckets,
        warnings,
    };
    let bundle = ModelBundle {
        spec: ScoringSpec {
            session_gap_ms: cfg.session_gap_ms,
            feature_window_ms: cfg.feature_window_ms,
            max_sequence_len: cfg.max_sequence_len,
            combiner: cfg.primary_combiner,
            bucket_key: cfg.bucket_key,
        },
        embeddings: table,
        combiner: combiners[pi].clone(),
        intent,
        value,
        thresholds,
    };
    Ok(PipelineOutcome { bundle, combiners, report, test_records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    pub threads: usize,
    pub config_sha256: String,
    /// File name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the event log named in `config`, runs the pipeline and writes every
/// artifact plus a manifest into `config.output`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(PipelineOutcome, Manifest)> {
    let cfg = config.resolved();
    cfg.validate()?;
    let file = fs::File::open(&cfg.events)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", cfg.events.display())).in_stage("ingest"))?;
    let (events, ingest) = read_events(BufReader::new(file)).map_err(|e| e.in_stage("ingest"))?;
    let mut outcome = run_on_events(&events, &cfg)?;
    if ingest.malformed > 0 {
        outcome.report.warnings.push(format!("{} malformed lines skipped", ingest.malformed));
    }
    let manifest = persist(&cfg, &outcome).map_err(|e| e.in_stage("persist"))?;
    Ok((outcome, manifest))
}

fn persist(cfg: &PipelineConfig, outcome: &PipelineOutcome) -> Result<Manifest> {
    let dir = &cfg.output;
    outcome.bundle.save(dir)?;
    for c in &outcome.combiners {
        let mut w = BufWriter::new(fs::File::create(dir.join(combiner_file(c.kind())))?);
        write_params(&mut w, c)?;
        w.flush()?;
    }
    if outcome.bundle.value.is_none() && dir.join(VALUE_FILE).exists() {
        fs::remove_file(dir.join(VALUE_FILE))?;
    }
    let config_text = cfg.to_toml()?;
    fs::write(dir.join(CONFIG_FILE), &config_text)?;
    fs::write(dir.join(REPORT_JSON), serde_json::to_string_pretty(&outcome.report)? + "\n")?;
    fs::write(dir.join(REPORT_TEXT), outcome.report.to_text())?;
    let mut w = BufWriter::new(fs::File::create(dir.join(BUCKETS_FILE))?);
    for r in &outcome.test_records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;

    let mut names = vec![
        SCORING_FILE.to_string(),
        EMBEDDINGS_FILE.to_string(),
        INTENT_FILE.to_string(),
        THRESHOLDS_FILE.to_string(),
        REPORT_JSON.to_string(),
        REPORT_TEXT.to_string(),
        BUCKETS_FILE.to_string(),
        CONFIG_FILE.to_string(),
    ];
    names.extend(outcome.combiners.iter().map(|c| combiner_file(c.kind())));
    if outcome.bundle.value.is_some() {
        names.push(VALUE_FILE.to_string());
    }
    let mut artifacts = BTreeMap::new();
    for name in names {
        artifacts.insert(name.clone(), sha256_hex(&fs::read(dir.join(&name))?));
    }
    let manifest = Manifest {
        format: "retarget-manifest 1".into(),
        seed: cfg.seed,
        threads: cfg.threads,
        config_sha256: sha256_hex(config_text.as_bytes()),
        artifacts,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
