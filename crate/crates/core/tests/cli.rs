use std::ffi::OsString;
use std::path::{Path, PathBuf};

use topic_diffusion::cli::{run_cli, EXIT_CONFIG, EXIT_OK};
use topic_diffusion::pipeline::TOP_TERMS_HEADER;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let mut argv: Vec<OsString> = vec!["topic-diffusion".into()];
    argv.extend(args.into_iter().map(Into::into));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn smoke_run(out: &Path) {
    let res = cli([
        "run".into(),
        "--config".into(),
        data("smoke_config.json").into_os_string(),
        "--out".into(),
        out.as_os_str().to_owned(),
    ]);
    assert_eq!(res.code, EXIT_OK, "{}", res.stderr);
}

#[test]
fn missing_dictionary_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let res = cli([
        "run".into(),
        "--corpus".into(),
        data("smoke_corpus.jsonl").into_os_string(),
        "--out".into(),
        dir.path().as_os_str().to_owned(),
        "--windows".into(),
        "2019-12-31,2020-12-31".into(),
    ]);
    assert_eq!(res.code, EXIT_CONFIG);
    assert!(res.stderr.contains("--dict"), "{}", res.stderr);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn nonexistent_dictionary_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = cli([
        "run".into(),
        "--config".into(),
        data("smoke_config.json").into_os_string(),
        "--dict".into(),
        dir.path().join("nope.txt").into_os_string(),
        "--out".into(),
        dir.path().join("out").into_os_string(),
    ]);
    assert_eq!(res.code, EXIT_CONFIG);
    assert!(res.stderr.contains("--dict"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn smoke_run_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    smoke_run(dir.path());
    for file in ["diffusion.csv", "posteriors.csv", "top_terms.csv", "alignment.json", "run_manifest.json"] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
    for w in 0..3 {
        assert!(dir.path().join(format!("models/window_{w:02}.json")).is_file());
    }
}

#[test]
fn flags_override_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let res = cli([
        "run".into(),
        "--config".into(),
        data("smoke_config.json").into_os_string(),
        "--out".into(),
        dir.path().as_os_str().to_owned(),
        "--seed".into(),
        "5".into(),
        "--alpha".into(),
        "0.05".into(),
        "--threads".into(),
        "1".into(),
    ]);
    assert_eq!(res.code, EXIT_OK, "{}", res.stderr);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["fit"]["seed"], 5);
    assert_eq!(manifest["config"]["alpha"], 0.05);
    assert_eq!(manifest["config"]["fit"]["k"], 3);
}

#[test]
fn top_terms_text_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    smoke_run(dir.path());
    let model = dir.path().join("models/window_02.json").into_os_string();
    let base = || -> Vec<OsString> {
        vec![
            "top-terms".into(),
            "--model".into(),
            model.clone(),
            "--dict".into(),
            data("smoke_dict.txt").into_os_string(),
        ]
    };

    let mut args = base();
    args.extend(["--topic".into(), "1".into(), "-n".into(), "10".into()]);
    let res = cli(args);
    assert_eq!(res.code, EXIT_OK, "{}", res.stderr);
    assert_eq!(res.stdout.lines().skip(1).count(), 10);

    let mut args = base();
    args.extend(["--topic".into(), "3".into()]);
    assert_eq!(cli(args).code, EXIT_CONFIG);

    let mut args = base();
    args.extend(["--format".into(), "csv".into(), "-n".into(), "4".into()]);
    let res = cli(args);
    assert_eq!(res.code, EXIT_OK);
    let mut reader = csv::Reader::from_reader(res.stdout.as_bytes());
    assert_eq!(reader.headers().unwrap(), &csv::StringRecord::from(TOP_TERMS_HEADER.to_vec()));
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert_eq!(&row[0], "y2021");
        let rank: usize = row[2].parse().unwrap();
        assert!((1..=4).contains(&rank));
        row[4].parse::<f64>().unwrap();
    }
}

#[test]
fn top_terms_missing_model() {
    let res = cli(["top-terms", "--model", "/nonexistent/model.json", "--dict", "/nonexistent/dict.txt"]);
    assert_eq!(res.code, EXIT_CONFIG);
    assert!(res.stderr.contains("--model"));
}

#[test]
fn diffuse_reports_series_suggestions_and_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    smoke_run(dir.path());
    let run = dir.path().as_os_str().to_owned();
    let diffuse = |term: &str| cli(["diffuse".into(), "--run".into(), run.clone(), "--term".into(), OsString::from(term)]);

    let res = diffuse("lasso");
    assert_eq!(res.code, EXIT_OK);
    assert!(res.stdout.contains("classification: narrow convergent"), "{}", res.stdout);
    let verdicts: Vec<&str> = res.stdout.lines().skip(3).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(verdicts, ["convergent", "convergent"]);

    let res = diffuse("lassso");
    assert_eq!(res.code, EXIT_CONFIG);
    assert!(res.stderr.contains("lasso"), "{}", res.stderr);

    let res = diffuse("Transformer");
    assert_eq!(res.code, EXIT_OK);
    assert!(res.stdout.contains("insufficient support"), "{}", res.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(["bogus"]).code, EXIT_CONFIG);
    assert_eq!(cli(["run", "--k", "zero"]).code, EXIT_CONFIG);
}
