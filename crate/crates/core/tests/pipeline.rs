use std::fs;

use retarget::combiner::CombinerKind;
use retarget::model::{write_events, ActivityEvent, ActivityType};
use retarget::pipeline::{
    generate_world, run_on_events, run_pipeline, write_world, BookingRule, FeatureSet, Manifest, ModelBundle,
    PipelineConfig, SyntheticWorldConfig, EVENTS_FILE, MANIFEST_FILE, REPORT_JSON, VALUE_FILE,
};
use retarget::Error;

fn world(n: usize, rule: BookingRule, seed: u64) -> Vec<ActivityEvent> {
    generate_world(&SyntheticWorldConfig { n_travelers: n, rule, seed, ..Default::default() }).unwrap().events
}

#[test]
fn linear_world_is_recoverable_by_the_averaging_combiner() {
    let events = world(1000, BookingRule::Linear, 11);
    let out = run_on_events(&events, &PipelineConfig { seed: 11, ..Default::default() }).unwrap();
    let avg = out.report.metric(FeatureSet::Combiner(CombinerKind::Average)).unwrap();
    assert!(avg.auc > 0.8, "averaging auc {}", avg.auc);
    assert!(out.report.value_model);
    assert_eq!(out.report.train_travelers + out.report.test_travelers, out.report.evaluation_period_travelers);
    assert_eq!(out.test_records.len(), out.report.test_travelers);
}

#[test]
fn report_has_one_row_per_setting() {
    let events = world(600, BookingRule::Nonlinear, 12);
    let config = PipelineConfig { combiners: vec![CombinerKind::Average], seed: 12, ..Default::default() };
    let out = run_on_events(&events, &config).unwrap();
    let labels: Vec<&str> = out.report.metrics.iter().map(|m| m.setting.as_str()).collect();
    assert_eq!(labels, ["Averaging", "DAN", "Only handcrafted", "Handcrafted + Averaging", "Handcrafted + DAN"]);
    assert_eq!(out.combiners.len(), 2);
}

#[test]
fn without_bookings_the_value_model_is_skipped_with_a_warning() {
    let events: Vec<ActivityEvent> =
        world(500, BookingRule::Linear, 13).into_iter().filter(|e| e.activity_type != ActivityType::Booking).collect();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("events.ndjson");
    write_events(fs::File::create(&path).unwrap(), &events).unwrap();
    let config = PipelineConfig { events: path, output: tmp.path().join("out"), ..Default::default() };
    let (out, manifest) = run_pipeline(&config).unwrap();
    assert!(!out.report.value_model);
    assert!(out.bundle.value.is_none());
    assert!(out.report.warnings.iter().any(|w| w.contains("value model skipped")));
    assert!(out.test_records.iter().all(|r| r.m == 0.0 && r.u == 0.0));
    assert!(!manifest.artifacts.contains_key(VALUE_FILE));
    assert!(!config.output.join(VALUE_FILE).exists());
    let bundle = ModelBundle::load(&config.output).unwrap();
    assert!(bundle.value.is_none());
}

#[test]
fn rerun_from_saved_config_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let w = generate_world(&SyntheticWorldConfig { n_travelers: 500, seed: 14, ..Default::default() }).unwrap();
    write_world(tmp.path(), &w).unwrap();
    let config = PipelineConfig {
        events: tmp.path().join(EVENTS_FILE),
        output: tmp.path().join("first"),
        seed: 14,
        ..Default::default()
    };
    let (first, manifest) = run_pipeline(&config).unwrap();
    let saved = PipelineConfig::load(&config.output.join("config.toml")).unwrap();
    let again = PipelineConfig { output: tmp.path().join("second"), ..saved };
    let (second, _) = run_pipeline(&again).unwrap();
    assert_eq!(first.report, second.report);
    assert_eq!(fs::read(config.output.join(REPORT_JSON)).unwrap(), fs::read(again.output.join(REPORT_JSON)).unwrap());

    let on_disk: Manifest = serde_json::from_slice(&fs::read(config.output.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    for (name, hash) in &manifest.artifacts {
        assert_eq!(&retarget::pipeline::sha256_hex(&fs::read(config.output.join(name)).unwrap()), hash, "{name}");
    }
}

#[test]
fn saved_bundle_scores_like_the_trained_one() {
    let events = world(500, BookingRule::Nonlinear, 15);
    let out = run_on_events(&events, &PipelineConfig { seed: 15, ..Default::default() }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    out.bundle.save(tmp.path()).unwrap();
    let loaded = ModelBundle::load(tmp.path()).unwrap();
    assert_eq!(loaded, out.bundle);
}

#[test]
fn stage_errors_name_the_stage() {
    let err = run_on_events(&[], &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "split", .. }), "{err}");

    // every event in the first period leaves nothing to evaluate
    let events = world(50, BookingRule::Linear, 16);
    let config = PipelineConfig { boundary_ms: Some(i64::MAX), ..Default::default() };
    let err = run_on_events(&events, &config).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "split", .. }), "{err}");
    assert!(err.is_data_error());

    // a single evaluation-period traveler cannot be split into train and test
    let boundary = events.iter().map(|e| e.timestamp).max().unwrap();
    let late: Vec<&str> = events.iter().filter(|e| e.timestamp >= boundary).map(|e| e.traveler_id.as_str()).collect();
    assert_eq!(late.len(), 1);
    let config = PipelineConfig { boundary_ms: Some(boundary), ..Default::default() };
    let err = run_on_events(&events, &config).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "features", .. }), "{err}");

    let missing = PipelineConfig { events: "/nonexistent/events.ndjson".into(), ..Default::default() };
    let err = run_pipeline(&missing).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "ingest", .. }), "{err}");
}

#[test]
fn invalid_config_is_rejected_before_any_work() {
    let config = PipelineConfig { test_fraction: 1.5, ..Default::default() };
    assert!(matches!(run_on_events(&world(20, BookingRule::Linear, 17), &config), Err(Error::Config(_))));
}
