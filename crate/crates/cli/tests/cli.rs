use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/tiny_t5");

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crossprune"));
    c.env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn crossprune")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dataset(dir: &Path, n: usize, junk_line: bool) -> PathBuf {
    let places = ["the old barn", "the north tower", "a stone well", "the ferry dock"];
    let mut text = String::new();
    for i in 0..n {
        let place = places[i % places.len()];
        let line = serde_json::json!({
            "id": format!("r{i}"),
            "context": format!(
                "Morning fog rolled over the valley. The brass key {i} was hidden in {place} last winter. \
                 Nobody in the village spoke of it again."
            ),
            "question": "Where was the brass key hidden?",
            "answers": [place],
        });
        text.push_str(&line.to_string());
        text.push('\n');
        if junk_line && i == 1 {
            text.push_str("{not json\n");
        }
    }
    let path = dir.join("sample.jsonl");
    fs::write(&path, text).unwrap();
    path
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn compress_writes_one_result_per_record() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 5, false);
    let o = run(&["compress", "--input", input.to_str().unwrap(), "--scorer", "random", "--tau", "0.4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = json_lines(&stdout(&o));
    assert_eq!(lines.len(), 5);
    for (i, v) in lines.iter().enumerate() {
        assert_eq!(v["kind"], "compression_result");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["id"], format!("r{i}"));
        let n = v["n_words"].as_u64().unwrap() as f64;
        let kept = v["retained_word_indices"].as_array().unwrap().len() as f64;
        assert_eq!(kept, (0.4 * n + 0.5).floor());
    }
}

#[test]
fn malformed_lines_warn_in_lenient_mode_and_fail_in_strict() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 3, true);
    let path = input.to_str().unwrap();
    let o = run(&["compress", "--input", path, "--scorer", "mock"]);
    assert!(o.status.success());
    assert_eq!(json_lines(&stdout(&o)).len(), 3);
    assert!(stderr(&o).contains("first at line 3"), "{}", stderr(&o));

    let o = run(&["compress", "--input", path, "--scorer", "mock", "--strict"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[dataset]"), "{}", stderr(&o));
}

#[test]
fn tau_out_of_range_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 1, false);
    let o = run(&["compress", "--input", input.to_str().unwrap(), "--scorer", "mock", "--tau", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("tau") && err.contains("(0, 1]"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_flag_and_missing_model_exit_two() {
    assert_eq!(run(&["compress", "--frobnicate"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 1, false);
    let o = run(&["compress", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model"), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 40, false);
    let mut outputs = Vec::new();
    for jobs in ["1", "4", "4"] {
        let out = dir.path().join(format!("out{}.jsonl", outputs.len()));
        let o = run(&[
            "compress",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--scorer",
            "random",
            "--seed",
            "11",
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(&out).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn flags_override_the_settings_file() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 2, false);
    let settings = dir.path().join("settings.json");
    fs::write(
        &settings,
        serde_json::json!({
            "input": input,
            "scorer": "random",
            "seed": 5,
            "compression": {"tau": 0.25, "sigma": 2.0},
        })
        .to_string(),
    )
    .unwrap();
    let cfg = settings.to_str().unwrap();

    let from_file = json_lines(&stdout(&run(&["compress", "--config", cfg])));
    assert_eq!(from_file[0]["provenance"]["config"]["tau"], 0.25);
    assert_eq!(from_file[0]["provenance"]["config"]["sigma"], 2.0);

    let o = run(&["compress", "--config", cfg, "--tau", "0.75"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let flagged = json_lines(&stdout(&o));
    assert_eq!(flagged[0]["provenance"]["config"]["tau"], 0.75);
    assert_eq!(flagged[0]["provenance"]["config"]["sigma"], 2.0);

    fs::write(&settings, r#"{"tua": 0.5}"#).unwrap();
    assert_eq!(run(&["compress", "--config", cfg]).status.code(), Some(2));
}

#[test]
fn field_remap_reads_other_key_names() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("remap.jsonl");
    fs::write(&input, r#"{"passage":"alpha beta gamma delta","query":"which letter?"}"#).unwrap();
    let o = run(&[
        "compress",
        "--input",
        input.to_str().unwrap(),
        "--scorer",
        "mock",
        "--field",
        "context=passage",
        "--field",
        "question=query",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = &json_lines(&stdout(&o))[0];
    assert_eq!(v["n_words"], 4);
    assert_eq!(v["id"], "1");
}

#[test]
fn coverage_reports_one_line_per_tau() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 4, false);
    let o = run(&["evaluate", "--input", input.to_str().unwrap(), "--scorer", "random", "--taus", "1.0,0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = json_lines(&stdout(&o));
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["metric"], "info_coverage");
    assert_eq!(reports[0]["dataset_id"], "sample");
    assert_eq!(reports[0]["aggregate"], 1.0);
    assert_eq!(reports[1]["config"]["tau"], 0.5);

    let o = run(&["evaluate", "--input", input.to_str().unwrap(), "--scorer", "random", "--metric", "em"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--endpoint"));
}

#[test]
fn sigma_sweep_has_a_row_per_sigma() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 4, false);
    let csv = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    let o = run(&[
        "sigma-sweep",
        "--input",
        input.to_str().unwrap(),
        "--scorer",
        "random",
        "--sigmas",
        "1,2,3,4,5",
        "--csv",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = &json_lines(&stdout(&o))[0];
    assert_eq!(report["kind"], "sweep_report");
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    assert_eq!(report["overlap"].as_array().unwrap().len(), 5);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let o = run(&["sigma-sweep", "--input", input.to_str().unwrap(), "--scorer", "random", "--sigmas", "0,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mrr_experiment_compares_requested_scorers() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 6, false);
    let csv = dir.path().join("mrr.csv");
    let o = run(&[
        "mrr-experiment",
        "--input",
        input.to_str().unwrap(),
        "--scorers",
        "random,mock",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = &json_lines(&stdout(&o))[0];
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["scorer"], "mock");
    for r in rows {
        let m = r["mean_mrr"].as_f64().unwrap();
        assert!(m > 0.0 && m <= 1.0);
    }
    assert!(fs::read_to_string(&csv).unwrap().starts_with("scorer,mean_mrr"));
}

#[test]
fn export_check_accepts_fixture_and_rejects_empty_dir() {
    let o = run(&["export-check", "--model", FIXTURE]);
    assert!(o.status.success(), "{}", stderr(&o));
    let check: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(check["problems"].as_array().unwrap().is_empty());

    let empty = TempDir::new().unwrap();
    let o = run(&["export-check", "--model", empty.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[artifact]"));
}

#[test]
fn model_scorer_runs_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let input = dataset(dir.path(), 2, false);
    let o = run(&[
        "compress",
        "--input",
        input.to_str().unwrap(),
        "--model",
        FIXTURE,
        "--strategy",
        "chunk2",
        "--chunk-size",
        "48",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = json_lines(&stdout(&o));
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["provenance"]["scorer"].as_str().unwrap().starts_with("cross-first@"));
}
