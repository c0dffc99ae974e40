use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_CONFIG: &str = "\
# tiny dimensions so the whole pipeline runs in seconds
encoder.d_char = 8
encoder.filters = 1:4, 2:4, 3:4
encoder.d_word = 16
encoder.d_lm = 16
encoder.n_layers = 1
encoder.mix_mode = learned_scalar_mix
classifier.lstm_hidden = 16
classifier.ffn_units = 16
classifier.batch_size = 16
train.lr0 = 0.003
train.max_epochs = 30
train.early_stop_patience = 5
pretrain.epochs = 1
data.min_tokens = 3
";

const FILLER: [&str; 16] = [
    "the", "day", "bus", "work", "coffee", "rain", "meeting", "traffic", "monday", "weekend", "phone", "email",
    "train", "food", "boss", "class",
];

fn sentence(i: usize, sarcastic: bool) -> String {
    let body: Vec<&str> = (0..4 + i % 4).map(|k| FILLER[(i * 7 + k * 3) % FILLER.len()]).collect();
    if sarcastic {
        format!("oh GREAT {} #fail", body.join(" "))
    } else {
        format!("i like {}", body.join(" "))
    }
}

/// A corpus whose label is carried by a capitalised cue word and a
/// trailing hashtag, split into per-split TSV files, with a paired file and
/// a pretraining corpus.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir(root.join("data")).unwrap();
        for (name, n, offset) in [("train", 80, 0), ("valid", 20, 1000), ("test", 20, 2000)] {
            let text: String = (0..n)
                .map(|i| {
                    let pos = i % 2 == 0;
                    format!("{}\t{}\n", pos as u8, sentence(i + offset, pos))
                })
                .collect();
            fs::write(root.join(format!("data/{name}.tsv")), text).unwrap();
        }
        let pairs: String = (0..10)
            .map(|i| {
                let (s, n) = (sentence(3000 + i, true), sentence(3000 + i, false));
                let (a, b, side) = if i % 2 == 0 { (s, n, "a") } else { (n, s, "b") };
                serde_json::json!({ "context_id": format!("c{i}"), "a": a, "b": b, "sarcastic": side }).to_string() + "\n"
            })
            .collect();
        fs::write(root.join("pairs.jsonl"), pairs).unwrap();
        let corpus: String = (0..60).map(|i| sentence(i, i % 3 == 0) + "\n").collect();
        fs::write(root.join("corpus.txt"), corpus).unwrap();
        fs::write(root.join("small.cfg"), SMALL_CONFIG).unwrap();
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn arg(&self, rel: &str) -> String {
        self.path(rel).display().to_string()
    }

    /// Runs the binary in the fixture directory with the small config
    /// supplied through the environment.
    fn irony(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_irony"))
            .args(args)
            .current_dir(self.dir.path())
            .env("IRONY_CONFIG", self.path("small.cfg"))
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.irony(args);
        assert!(
            out.status.success(),
            "{args:?} failed with {:?}:\n{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn trained(&self) -> PathBuf {
        self.ok(&["pretrain-lm", "--corpus", &self.arg("corpus.txt"), "--out", &self.arg("enc.ck")]);
        self.ok(&[
            "train", "--data", &self.arg("data"), "--encoder", &self.arg("enc.ck"), "--seed", "3", "--out", &self.arg("run"),
        ]);
        self.path("run/model.ck")
    }
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn train_without_data_is_a_usage_error() {
    let fx = Fixture::new();
    let out = fx.irony(&["train", "--out", &fx.arg("run")]);
    assert_eq!(code(&out), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--data"), "{err}");
    assert!(err.contains("Usage: irony train"), "{err}");
}

#[test]
fn unknown_subcommand_and_bad_config_keys_exit_1() {
    let fx = Fixture::new();
    assert_eq!(code(&fx.irony(&["frobnicate"])), Some(1));
    let out = fx.irony(&["--set", "encoder.no_such_key=3", "tokenize", "--input", &fx.arg("corpus.txt")]);
    assert_eq!(code(&out), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
    assert_eq!(code(&fx.irony(&["--help"])), Some(0));
}

#[test]
fn missing_input_file_is_a_data_error() {
    let fx = Fixture::new();
    let out = fx.irony(&["ingest", "--data", &fx.arg("nope.tsv"), "--out", &fx.arg("d.json")]);
    assert_eq!(code(&out), Some(2));
}

#[test]
fn tokenize_prints_one_json_array_per_line_and_honours_config() {
    let fx = Fixture::new();
    fs::write(fx.path("in.txt"), "Oh GREAT @bob #sarcasm\nsecond line 🙃\n").unwrap();
    let out = fx.ok(&["tokenize", "--input", &fx.arg("in.txt")]);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let surfaces = |v: &Value| -> Vec<String> {
        v.as_array().unwrap().iter().map(|t| t["surface"].as_str().unwrap().to_string()).collect()
    };
    assert!(!surfaces(&lines[0]).contains(&"#sarcasm".to_string()));
    assert!(surfaces(&lines[0]).contains(&"GREAT".to_string()));

    fs::write(fx.path("keep.cfg"), "tokenizer.strip_artifact_hashtags = false\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_irony"))
        .args(["tokenize", "--input", &fx.arg("in.txt")])
        .current_dir(fx.dir.path())
        .env("IRONY_CONFIG", fx.path("keep.cfg"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success());
    let first: Value = serde_json::from_str(String::from_utf8(out.stdout).unwrap().lines().next().unwrap()).unwrap();
    assert!(surfaces(&first).contains(&"#sarcasm".to_string()));
}

#[test]
fn evaluate_reaches_accuracy_one_on_the_cue_fixture() {
    let fx = Fixture::new();
    let model = fx.trained();
    let inputs_before = snapshot(&fx.path("data"));
    let out = fx.ok(&[
        "evaluate", "--model", &model.display().to_string(), "--data", &fx.arg("data"), "--pairs", &fx.arg("pairs.jsonl"),
    ]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["split"], "test");
    assert_eq!(report["n_examples"], 20);
    assert_eq!(report["model"]["positive_class"]["accuracy"], 1.0);
    assert_eq!(report["model"]["macro_avg"]["f1"], 1.0);
    assert_eq!(report["model"]["paired"]["accuracy"], 1.0);
    assert_eq!(report["model"]["paired"]["n_pairs"], 10);
    assert_eq!(snapshot(&fx.path("data")), inputs_before, "evaluate modified its inputs");

    let log = fs::read_to_string(fx.path("run/train_log.jsonl")).unwrap();
    assert!(log.lines().count() >= 1);
    for line in log.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        assert!(rec["lr"].is_number() && rec["val_accuracy"].is_number());
    }
}

#[test]
fn predict_emits_jsonl_records() {
    let fx = Fixture::new();
    let model = fx.trained();
    fs::write(fx.path("texts.txt"), format!("{}\n{}\n", sentence(5000, true), sentence(5001, false))).unwrap();
    let out = fx.ok(&["predict", "--model", &model.display().to_string(), "--input", &fx.arg("texts.txt")]);
    let recs: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["label"], 1);
    assert_eq!(recs[1]["label"], 0);
    assert!(recs.iter().all(|r| r["id"].is_string() && r["p_sarcastic"].is_number()));
}

#[test]
fn replay_reproduces_training_and_evaluation_bit_exactly() {
    let fx = Fixture::new();
    let model = fx.trained();
    let train_manifest: Value = serde_json::from_str(&fs::read_to_string(fx.path("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(train_manifest["seed"], 3);
    assert!(train_manifest["inputs"].as_array().unwrap().len() >= 2);

    let replay = fx.ok(&["replay", &fx.arg("run/manifest.json"), "--scratch", &fx.arg("scratch-train")]);
    let summary: Value = serde_json::from_str(&replay).unwrap();
    assert_eq!(summary["identical"], true);
    assert_eq!(
        fs::read(fx.path("scratch-train/out/model.ck")).unwrap(),
        fs::read(&model).unwrap()
    );

    fx.ok(&[
        "evaluate", "--model", &model.display().to_string(), "--data", &fx.arg("data"), "--out", &fx.arg("report.json"),
    ]);
    let replay = fx.ok(&["replay", &fx.arg("report.json.manifest.json"), "--scratch", &fx.arg("scratch-eval")]);
    assert!(replay.contains("\"identical\":true"));
    assert_eq!(
        fs::read(fx.path("scratch-eval/report.json")).unwrap(),
        fs::read(fx.path("report.json")).unwrap()
    );
}

#[test]
fn replay_refuses_changed_inputs() {
    let fx = Fixture::new();
    fx.ok(&["ingest", "--data", &fx.arg("data"), "--out", &fx.arg("d.json")]);
    let mut text = fs::read_to_string(fx.path("data/test.tsv")).unwrap();
    text.push_str("1\tone more GREAT line #fail\n");
    fs::write(fx.path("data/test.tsv"), text).unwrap();
    let out = fx.irony(&["replay", &fx.arg("d.json.manifest.json")]);
    assert_eq!(code(&out), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no longer matches"));
}

#[test]
fn ensemble_training_and_voting() {
    let fx = Fixture::new();
    fx.ok(&["pretrain-lm", "--corpus", &fx.arg("corpus.txt"), "--out", &fx.arg("enc.ck")]);
    fx.ok(&[
        "train", "--data", &fx.arg("data"), "--encoder", &fx.arg("enc.ck"), "--ensemble", "3", "--out", &fx.arg("ens"),
    ]);
    let members: Vec<Vec<u8>> = (0..3).map(|i| fs::read(fx.path(&format!("ens/member-{i}.ck"))).unwrap()).collect();
    assert!(members[0] != members[1] && members[1] != members[2] && members[0] != members[2]);
    let out = fx.ok(&["evaluate", "--ensemble", &fx.arg("ens"), "--data", &fx.arg("data")]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["ensemble"]["members"], 3);
    assert!(report["ensemble"]["positive_class"]["accuracy"].as_f64().unwrap() >= 0.9);
}
