use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn retarget(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retarget")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&retarget(&[])), 1);
    assert_eq!(code(&retarget(&["frobnicate"])), 1);
    assert_eq!(code(&retarget(&["boost", "--data", "x.ndjson"])), 1);
    assert_eq!(code(&retarget(&["combine", "--events", "e", "--embeddings", "m", "--out", "o", "--kind", "mlp"])), 1);
    assert_eq!(code(&retarget(&["--help"])), 0);
    assert_eq!(code(&retarget(&["score-stream", "--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.ndjson");
    assert_eq!(code(&retarget(&["evaluate", "--scores", p(&missing)])), 2);

    let bad = tmp.path().join("bad.ndjson");
    fs::write(&bad, "{\"score\": 0.3, \"label\": 7}\n").unwrap();
    let out = retarget(&["evaluate", "--scores", p(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));

    let one_class = tmp.path().join("one.ndjson");
    fs::write(&one_class, "{\"score\": 0.3, \"label\": true}\n").unwrap();
    assert_eq!(code(&retarget(&["evaluate", "--scores", p(&one_class)])), 2);
}

#[test]
fn config_file_sets_flags_and_command_line_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("train.ndjson");
    let mut f = fs::File::create(&data).unwrap();
    for i in 0..40 {
        let x = i as f64 / 40.0;
        writeln!(f, r#"{{"traveler_id":"t{i}","features":[{x}],"label_intent":{},"label_value":0.0}}"#, x > 0.5)
            .unwrap();
    }
    let config = tmp.path().join("retarget.toml");
    fs::write(&config, "[boost]\nrounds = 3\nmax_depth = 1\n").unwrap();
    let model = tmp.path().join("m.gbt");
    let trees = |path: &Path| fs::read_to_string(path).unwrap().lines().filter(|l| l.starts_with("tree ")).count();

    let out = retarget(&["boost", "--config", p(&config), "--data", p(&data), "--out", p(&model)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(trees(&model), 3);

    let out = retarget(&["boost", "--config", p(&config), "--data", p(&data), "--out", p(&model), "--rounds", "5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(trees(&model), 5);

    fs::write(&config, "[boost]\nroundz = 3\n").unwrap();
    assert_eq!(code(&retarget(&["boost", "--config", p(&config), "--data", p(&data), "--out", p(&model)])), 1);
}

#[test]
fn generate_pipeline_and_score_stream_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("world");
    let models = tmp.path().join("models");
    let out = retarget(&["generate", "--out", p(&world), "--travelers", "300", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["travelers"], 300);

    let events = world.join("events.ndjson");
    let out = retarget(&["pipeline", "--events", p(&events), "--output", p(&models), "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("Handcrafted + DAN"));
    assert!(models.join("manifest.json").exists());

    let mut child = Command::new(env!("CARGO_BIN_EXE_retarget"))
        .args(["score-stream", "--models", p(&models)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let lines: Vec<String> = fs::read_to_string(&events).unwrap().lines().take(20).map(String::from).collect();
    {
        let mut stdin = child.stdin.take().unwrap();
        for l in &lines {
            writeln!(stdin, "{l}").unwrap();
        }
        writeln!(stdin, "garbage").unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    let records: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 20);
    for r in &records {
        for key in ["traveler_id", "r", "m", "u", "bucket"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
    }
    let diag = String::from_utf8(out.stderr).unwrap();
    assert!(diag.contains("\"line\":21"), "{diag}");

    let missing_models = tmp.path().join("nothing");
    assert_eq!(code(&retarget(&["score-stream", "--models", p(&missing_models)])), 2);
}

#[test]
fn pipeline_reads_a_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("world");
    assert_eq!(code(&retarget(&["generate", "--out", p(&world), "--travelers", "200", "--seed", "5"])), 0);
    let config = tmp.path().join("pipeline.toml");
    fs::write(
        &config,
        format!(
            "events = {:?}\noutput = {:?}\nseed = 5\ncombiners = [\"average\"]\nprimary_combiner = \"average\"\n\n[intent]\nrounds = 10\n",
            world.join("events.ndjson"),
            tmp.path().join("out")
        ),
    )
    .unwrap();
    let out = retarget(&["pipeline", "--config", p(&config)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let saved = fs::read_to_string(tmp.path().join("out").join("config.toml")).unwrap();
    assert!(saved.contains("primary_combiner = \"average\""));
    assert!(!tmp.path().join("out").join("combiner-dan.nn").exists());

    fs::write(&config, "seed = \"five\"\n").unwrap();
    assert_eq!(code(&retarget(&["pipeline", "--config", p(&config)])), 1);
}

#[test]
fn embed_combine_bucket_round() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("w");
    assert_eq!(code(&retarget(&["generate", "--out", p(&world), "--travelers", "300", "--seed", "6"])), 0);
    let events = world.join("events.ndjson");
    let emb = tmp.path().join("listings.emb");
    let dest = tmp.path().join("destinations.emb");
    let out =
        retarget(&["embed", "--events", p(&events), "--out", p(&emb), "--destinations-out", p(&dest), "--dim", "8"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&dest).unwrap().lines().count() > 1);

    let nn = tmp.path().join("avg.nn");
    let export = tmp.path().join("travelers.ndjson");
    let out = retarget(&[
        "combine",
        "--events",
        p(&events),
        "--embeddings",
        p(&emb),
        "--kind",
        "average",
        "--out",
        p(&nn),
        "--export",
        p(&export),
        "--epochs",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&export).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["vector"].as_array().unwrap().len(), 8);

    let scores = tmp.path().join("scores.ndjson");
    fs::write(
        &scores,
        (0..20)
            .map(|i| format!("{{\"traveler_id\":\"t{i}\",\"r\":{},\"m\":10}}\n", i as f64 / 20.0))
            .collect::<String>(),
    )
    .unwrap();
    let thresholds = tmp.path().join("t.bkt");
    let out = retarget(&["bucket", "--scores", p(&scores), "--buckets", "4", "--out", p(&thresholds)]);
    assert_eq!(code(&out), 0);
    let buckets: Vec<u64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["bucket"].as_u64().unwrap())
        .collect();
    assert_eq!(buckets.iter().filter(|&&b| b == 1).count(), 5);
    let again = retarget(&["bucket", "--scores", p(&scores), "--thresholds", p(&thresholds)]);
    assert_eq!(code(&again), 0);
}
