use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pejkit::synth::{directional_corpus, DirectionalSpec};

fn pejkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pejkit")).args(args).output().unwrap()
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/pejorativity_fixture.jsonl")
        .to_string_lossy()
        .into_owned()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    directional_corpus(DirectionalSpec {
        tweets: 120,
        ..DirectionalSpec::default()
    })
    .save(&path)
    .unwrap();
    path
}

#[test]
fn corpus_stats_reports_fixture_cells() {
    let text = stdout(&pejkit(&["--format", "csv", "corpus", "stats", "--corpus", &fixture()]));
    assert!(text.contains("total,391,6,190,613,1200"), "{text}");
    let text = stdout(&pejkit(&["corpus", "stats", "--corpus", &fixture()]));
    assert!(text.contains("phi(misogynous, pejorative) = 0.7045"), "{text}");
}

#[test]
fn prompt_export_writes_96_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch");
    stdout(&pejkit(&["prompts", "export", "--corpus", &fixture(), "--out", out.to_str().unwrap()]));
    let lines = std::fs::read_to_string(out.join("prompts.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 96);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn prompt_ingest_rejects_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch");
    stdout(&pejkit(&["prompts", "export", "--corpus", &fixture(), "--out", batch.to_str().unwrap()]));
    let responses = dir.path().join("responses.jsonl");
    std::fs::write(&responses, "{\"id\":\"nope\",\"model\":\"m\",\"response\":\"r\"}\n").unwrap();
    let out = pejkit(&[
        "prompts",
        "ingest",
        "--corpus",
        &fixture(),
        "--batch",
        batch.to_str().unwrap(),
        "--responses",
        responses.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_run_prints_five_rows_and_match_subcommand_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "corpus = \"corpus.jsonl\"\noutput = \"out\"\n").unwrap();

    let text = stdout(&pejkit(&["--format", "csv", "pipeline", "run", "--config", config.to_str().unwrap()]));
    assert_eq!(text.lines().count(), 6, "{text}");

    let matches = dir.path().join("matches.jsonl");
    stdout(&pejkit(&["match", "--corpus", corpus.to_str().unwrap(), "--out", matches.to_str().unwrap()]));
    assert_eq!(
        std::fs::read(&matches).unwrap(),
        std::fs::read(dir.path().join("out/matches.jsonl")).unwrap()
    );
}

#[test]
fn enrich_subcommand_matches_pipeline_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "corpus = \"corpus.jsonl\"\noutput = \"out\"\n").unwrap();
    stdout(&pejkit(&["pipeline", "run", "--config", config.to_str().unwrap()]));

    let enriched = dir.path().join("subst.jsonl");
    stdout(&pejkit(&[
        "enrich",
        "--corpus",
        corpus.to_str().unwrap(),
        "--strategy",
        "subst",
        "--out",
        enriched.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(&enriched).unwrap(),
        std::fs::read(dir.path().join("out/enriched/subst-gold.jsonl")).unwrap()
    );
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let c = corpus.to_str().unwrap();
    let model = dir.path().join("model.json");
    let preds = dir.path().join("preds.jsonl");
    let report = dir.path().join("report.json");
    stdout(&pejkit(&["train", "--corpus", c, "--task", "mis", "--out", model.to_str().unwrap()]));
    stdout(&pejkit(&["predict", "--corpus", c, "--model", model.to_str().unwrap(), "--out", preds.to_str().unwrap()]));
    let text = stdout(&pejkit(&[
        "eval",
        "--corpus",
        c,
        "--task",
        "mis",
        "--predictions",
        preds.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]));
    assert!(text.contains("baseline"), "{text}");
    let compared = stdout(&pejkit(&["compare", report.to_str().unwrap()]));
    assert_eq!(compared, text);
}

#[test]
fn invalid_lexicon_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lexicon.tsv");
    std::fs::write(
        &path,
        "word\tliteral_gloss\tpejorative_gloss\tneutral_anchors\tpejorative_anchors\noca\tgoose\tsilly\toca|uccello\toca\n",
    )
    .unwrap();
    let out = pejkit(&["lexicon", "validate", "--lexicon", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oca"));
    assert!(stdout(&pejkit(&["lexicon", "validate"])).starts_with("ok: "));
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "no_such_key = 1\n").unwrap();
    let out = pejkit(&["pipeline", "run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(pejkit(&["pipeline", "run", "--config", "/does/not/exist.toml"]).status.code(), Some(2));
}

#[test]
fn print_config_round_trips_as_default() {
    let text = stdout(&pejkit(&["--print-config"]));
    let parsed = pejkit::pipeline::RunConfig::from_toml(&text).unwrap();
    assert_eq!(parsed.to_toml(), text);
    assert!(text.contains("seeds = [13, 42, 2024]"));
}
