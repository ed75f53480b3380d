use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_infodemic"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(rel)
}

fn write_config(dir: &Path, catalogs: &[PathBuf]) -> PathBuf {
    let cfg = config_json(catalogs);
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    path
}

fn config_json(catalogs: &[PathBuf]) -> String {
    let list: Vec<String> = catalogs
        .iter()
        .map(|p| format!("{:?}", p.to_str().unwrap()))
        .collect();
    format!(
        r#"{{"input_globs": ["corpus.jsonl"], "catalogs": [{}], "seed": 3, "topics": {{"kmeans": {{"k": 5}}}}}}"#,
        list.join(", ")
    )
}

fn generate(dir: &Path, n: usize) -> Output {
    bin()
        .args([
            "generate",
            "--tweets",
            &n.to_string(),
            "--seed",
            "5",
            "--output",
        ])
        .arg(dir.join("corpus.jsonl"))
        .output()
        .unwrap()
}

fn catalogs() -> Vec<PathBuf> {
    ["mbfc", "newsguard", "zimdars"]
        .iter()
        .map(|p| data(&format!("catalogs/{p}.csv")))
        .collect()
}

#[test]
fn generate_then_all_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 2_000);
    assert!(
        gen.status.success(),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );
    let lines = fs::read_to_string(dir.path().join("corpus.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert!(lines >= 2_000);

    let cfg = write_config(dir.path(), &catalogs());
    let all = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--workers", "2", "all"])
        .output()
        .unwrap();
    assert_eq!(
        all.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&all.stderr)
    );
    let stdout = String::from_utf8_lossy(&all.stdout);
    assert!(stdout.contains("manifest:"), "{stdout}");
    assert!(dir.path().join("artifacts/manifest.json").is_file());

    let again = bin().arg("--config").arg(&cfg).arg("all").output().unwrap();
    assert!(String::from_utf8_lossy(&again.stdout)
        .lines()
        .filter(|l| !l.starts_with("manifest"))
        .all(|l| l.ends_with("skipped")));

    let verify = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("verify")
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(0));

    fs::write(dir.path().join("artifacts/dataset_stats.json"), "{}").unwrap();
    let tampered = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("verify")
        .output()
        .unwrap();
    assert_eq!(tampered.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&tampered.stdout).contains("mismatch: dataset_stats"));
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(generate(a.path(), 500).status.success());
    assert!(generate(b.path(), 500).status.success());
    assert_eq!(
        fs::read(a.path().join("corpus.jsonl")).unwrap(),
        fs::read(b.path().join("corpus.jsonl")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().arg("ingest").output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"input_globs": ["x"], "catalogs": [], "unknown_key": 1}"#,
    )
    .unwrap();
    let out = bin()
        .arg("--config")
        .arg(&bad)
        .arg("ingest")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let absent = bin()
        .arg("--config")
        .arg(dir.path().join("nope.json"))
        .arg("all")
        .output()
        .unwrap();
    assert_eq!(absent.status.code(), Some(2));
}

#[test]
fn stage_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), 300).status.success());
    let mut cats = catalogs();
    cats.push(dir.path().join("missing.csv"));
    let cfg = write_config(dir.path(), &cats);
    let out = bin().arg("--config").arg(&cfg).arg("all").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("label"), "{stderr}");

    let empty = tempfile::tempdir().unwrap();
    let cfg = write_config(empty.path(), &catalogs());
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("ingest")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
