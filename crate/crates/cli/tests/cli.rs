use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_scene-embed"));
    cmd.env("RUST_LOG", "warn").env_remove("SCENE_EMBED_CACHE");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(snapshot(&path));
        } else {
            out.insert(path.clone(), fs::read(&path).unwrap());
        }
    }
    out
}

/// 20 scenes in 2 supercategories, 200 objects.
fn synthetic(dir: &Path) {
    ok(
        dir,
        &[
            "--seed",
            "5",
            "synth-corpus",
            "--images-per-scene",
            "30",
            "--test-images-per-scene",
            "10",
            "--out",
            "syn",
        ],
    );
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["train-lsa", "--help"]] {
        let out = run(tmp.path(), args);
        assert_eq!(code(&out), 0, "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &[],
        &["frobnicate"],
        &["matrix", "--corpus", "c.jsonl", "--out", "m", "--bogus"],
        &[
            "matrix", "--corpus", "c.jsonl", "--norm", "sqrt", "--out", "m",
        ],
        &["train-lsa", "--out", "x"],
        &["train-lsa", "--corpus", "a", "--matrix", "b", "--out", "x"],
        &[
            "neighbors",
            "--embeddings",
            "e.tsv",
            "--probe",
            "x",
            "--k",
            "0",
        ],
        &[
            "graph",
            "--embeddings",
            "e.tsv",
            "--threshold",
            "2.5",
            "--out",
            "g",
        ],
    ];
    for args in cases {
        let out = run(tmp.path(), args);
        assert_eq!(
            code(&out),
            1,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["matrix", "--corpus", "missing.jsonl", "--out", "m"],
    );
    assert_eq!(code(&out), 2);

    fs::write(tmp.path().join("bad.jsonl"), "{\"image_id\": 3}\n").unwrap();
    let out = run(
        tmp.path(),
        &["matrix", "--corpus", "bad.jsonl", "--out", "m"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:1"));

    synthetic(tmp.path());
    let out = run(
        tmp.path(),
        &[
            "parse-spatial",
            "--corpus",
            "syn/corpus.jsonl",
            "--out",
            "p",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn lsa_then_neighbors_lists_k_neighbors() {
    let tmp = tempfile::tempdir().unwrap();
    synthetic(tmp.path());
    ok(
        tmp.path(),
        &[
            "train-lsa",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "10",
            "--out",
            "lsa",
        ],
    );
    for file in [
        "model.json",
        "objects.tsv",
        "scenes.tsv",
        "config.json",
        "manifest.json",
    ] {
        assert!(tmp.path().join("lsa").join(file).exists(), "{file}");
    }
    let table = ok(
        tmp.path(),
        &[
            "neighbors",
            "--embeddings",
            "lsa/objects.tsv",
            "--probe",
            "object 0001",
            "--k",
            "3",
            "--format",
            "tsv",
        ],
    );
    let rows: Vec<Vec<&str>> = table
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 3, "{table}");
    for (rank, row) in rows.iter().enumerate() {
        assert_eq!(row[0], "object 0001");
        assert_eq!(row[1], (rank + 1).to_string());
    }
    let distances: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(distances.windows(2).all(|w| w[0] <= w[1]));

    let out = run(
        tmp.path(),
        &[
            "neighbors",
            "--embeddings",
            "lsa/objects.tsv",
            "--probe",
            "object 1",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean"));
}

#[test]
fn ranksum_on_synthetic_corpus_is_negative() {
    let tmp = tempfile::tempdir().unwrap();
    synthetic(tmp.path());
    ok(
        tmp.path(),
        &[
            "train-lsa",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "10",
            "--out",
            "lsa",
        ],
    );
    let printed: Value = serde_json::from_str(&ok(
        tmp.path(),
        &[
            "ranksum",
            "--embeddings",
            "lsa/scenes.tsv",
            "--supercats",
            "syn/supercats.tsv",
            "--out",
            "rs",
        ],
    ))
    .unwrap();
    assert!(printed["z"].as_f64().unwrap() < -3.0, "{printed}");
    assert!(printed["mean_within"].as_f64() < printed["mean_between"].as_f64());
    assert_eq!(read_json(tmp.path().join("rs/ranksum.json")), printed);
}

#[test]
fn matrix_graph_classify_and_distances() {
    let tmp = tempfile::tempdir().unwrap();
    synthetic(tmp.path());
    ok(
        tmp.path(),
        &["ingest", "--input", "syn/corpus.jsonl", "--out", "ing"],
    );
    let stats = read_json(tmp.path().join("ing/stats.json"));
    assert_eq!(stats["after"]["scenes"], 20);

    ok(
        tmp.path(),
        &[
            "matrix",
            "--corpus",
            "ing/corpus.jsonl",
            "--norm",
            "log",
            "--out",
            "mat",
        ],
    );
    let tsv = fs::read_to_string(tmp.path().join("mat/matrix.tsv")).unwrap();
    assert!(tsv.starts_with("#norm=log\t"));
    ok(
        tmp.path(),
        &[
            "train-lsa",
            "--matrix",
            "mat/matrix.tsv",
            "--d",
            "8",
            "--out",
            "lsa",
        ],
    );

    let summary = ok(
        tmp.path(),
        &["graph", "--embeddings", "lsa/scenes.tsv", "--out", "g"],
    );
    assert!(summary.contains("components"));
    assert!(tmp.path().join("g/components.tsv").exists());

    ok(
        tmp.path(),
        &[
            "export-dist",
            "--embeddings",
            "lsa/scenes.tsv",
            "--out",
            "dist",
        ],
    );
    let dist = fs::read_to_string(tmp.path().join("dist/distances.tsv")).unwrap();
    assert_eq!(dist.lines().count(), 21);

    for method in ["nearest_centroid", "logistic"] {
        let report: Value = serde_json::from_str(&ok(
            tmp.path(),
            &[
                "classify",
                "--model",
                "lsa/model.json",
                "--train",
                "syn/corpus.jsonl",
                "--test",
                "syn/test.jsonl",
                "--method",
                method,
            ],
        ))
        .unwrap();
        assert_eq!(report["n_tested"], 200);
        // chance is 1/20
        assert!(report["top1"].as_f64().unwrap() > 0.3, "{method}: {report}");
    }
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    synthetic(tmp.path());
    let runs: &[&[&str]] = &[
        &[
            "--deterministic",
            "train-skipgram",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "8",
            "--epochs",
            "3",
            "--out",
            "o",
        ],
        &[
            "--deterministic",
            "train-cbow",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "8",
            "--epochs",
            "3",
            "--out",
            "o",
        ],
        &[
            "--deterministic",
            "train-lsa",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "5",
            "--out",
            "o",
        ],
    ];
    for args in runs {
        ok(tmp.path(), args);
        let first = snapshot(&tmp.path().join("o"));
        ok(tmp.path(), args);
        let second = snapshot(&tmp.path().join("o"));
        assert_eq!(first, second, "{args:?}");
        fs::remove_dir_all(tmp.path().join("o")).unwrap();
    }

    let mut args = runs[0].to_vec();
    args[0] = "--seed=9";
    ok(tmp.path(), &args);
    let other = fs::read(tmp.path().join("o/objects.tsv")).unwrap();
    ok(tmp.path(), runs[0]);
    assert_ne!(other, fs::read(tmp.path().join("o/objects.tsv")).unwrap());
}

#[test]
fn manifest_covers_inputs_outputs_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    synthetic(tmp.path());
    ok(
        tmp.path(),
        &[
            "--seed",
            "4",
            "train-cbow",
            "--corpus",
            "syn/corpus.jsonl",
            "--d",
            "6",
            "--epochs",
            "2",
            "--out",
            "cb",
        ],
    );
    let config = read_json(tmp.path().join("cb/config.json"));
    assert_eq!(config["command"], "train-cbow");
    assert_eq!(config["seed"], 4);
    assert_eq!(config["args"]["train"]["d"], 6);
    assert_eq!(config["args"]["train"]["lr"], 0.01);

    let manifest = read_json(tmp.path().join("cb/manifest.json"));
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["inputs"][0]["path"], "syn/corpus.jsonl");
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
            o["path"].as_str().unwrap()
        })
        .collect();
    assert_eq!(outputs, ["objects.tsv", "scenes.tsv", "train_log.csv"]);
    let hash = manifest["inputs"][0]["sha256"].as_str().unwrap();
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn spatial_pipeline_on_planted_maps() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        tmp.path(),
        &[
            "--seed",
            "3",
            "synth-spatial",
            "--pairs",
            "4",
            "--images",
            "40",
            "--out",
            "sp",
        ],
    );
    assert!(tmp.path().join("sp/maps/planted_00000.segmap").exists());

    let out = bin()
        .current_dir(tmp.path())
        .env("SCENE_EMBED_CACHE", "cache")
        .args([
            "parse-spatial",
            "--corpus",
            "sp/corpus.jsonl",
            "--out",
            "parsed",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let config = read_json(tmp.path().join("parsed/config.json"));
    assert_eq!(config["args"]["context"]["cache_dir"], "cache");
    let stats = read_json(tmp.path().join("parsed/parse_stats.json"));
    assert_eq!(stats["images_parsed"], 40);
    let graphs = fs::read_to_string(tmp.path().join("parsed/graphs.jsonl")).unwrap();
    assert_eq!(graphs.lines().count(), 40);
    for line in graphs.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        for edge in v["edges"].as_array().unwrap() {
            let d = edge[2].as_f64().unwrap();
            assert!((1e-10..=1.0).contains(&d));
        }
    }

    ok(
        tmp.path(),
        &[
            "train-spatial",
            "--corpus",
            "sp/corpus.jsonl",
            "--d",
            "8",
            "--epochs",
            "30",
            "--out",
            "ts",
        ],
    );
    let table = ok(
        tmp.path(),
        &[
            "neighbors",
            "--embeddings",
            "ts/objects.tsv",
            "--probe",
            "pair 00 a",
            "--k",
            "1",
            "--format",
            "tsv",
        ],
    );
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[..2], ["pair 00 a", "1"]);
    assert!(tmp.path().join("ts/parse_stats.json").exists());
}
