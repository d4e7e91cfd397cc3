use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use haiku_core::synthetic::themed_corpus;

fn haiku(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haiku"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = haiku(dir, args);
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

/// Raw rows in mixed separator styles, plus two unusable rows.
fn write_raw(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for (i, h) in themed_corpus(160, 5).iter().enumerate() {
        let sep = ["/", "$", "\\n", "\t"][i % 4];
        text.push_str(&h.lines().join(sep));
        text.push('\n');
    }
    text.push_str("just one line\n");
    text.push_str("a / / b\n");
    let path = dir.join("raw.txt");
    fs::write(&path, text).unwrap();
    path
}

struct Trained {
    dir: tempfile::TempDir,
}

fn train_all() -> Trained {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_raw(d);
    ok(d, &["clean", "--input", "raw.txt", "--output", "corpus.txt", "--skipped", "skipped.csv"]);
    ok(d, &["split", "--corpus", "corpus.txt", "--seed", "3", "--train", "train.txt", "--test", "test.txt"]);
    ok(d, &["train-ngram", "--corpus", "train.txt", "--output", "ngram.model"]);
    ok(d, &["train-embed", "--corpus", "train.txt", "--epochs", "3", "--seed", "1", "--output", "emb.model"]);
    ok(d, &[
        "train-sim", "--corpus", "train.txt", "--validation", "test.txt", "--embedding", "emb.model",
        "--ngram", "ngram.model", "--iterations", "30", "--output", "sim.model",
    ]);
    for level in ["char", "word"] {
        ok(d, &[
            "train-rnn", "--corpus", "test.txt", "--validation", "test.txt", "--level", level, "--hidden", "16",
            "--embedding-dim", "8", "--epochs", "2", "--seed", "4", "--output", &format!("{level}.rnn"),
        ]);
    }
    Trained { dir: tmp }
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = haiku(tmp.path(), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&haiku(tmp.path(), &["gen", "--method", "beam", "--what"])), 1);
    assert_eq!(code(&haiku(tmp.path(), &["gen", "--method", "sideways", "--first-line", "x"])), 1);
    assert_eq!(code(&haiku(tmp.path(), &["--help"])), 0);
}

#[test]
fn full_pipeline() {
    let t = train_all();
    let d = t.dir.path();

    let skipped = fs::read_to_string(d.join("skipped.csv")).unwrap();
    assert!(skipped.starts_with("row_index,reason\n161,too_few_segments\n162,"), "{skipped}");
    let corpus = fs::read_to_string(d.join("corpus.txt")).unwrap();
    assert_eq!(corpus.lines().count(), 160);
    let manifest = fs::read_to_string(d.join("corpus.txt.manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"clean\""));

    let beam = ok(d, &[
        "gen", "--method", "beam", "--first-line", "barren trees", "--ngram", "ngram.model",
        "--embedding", "emb.model", "--sim", "sim.model",
    ]);
    let lines: Vec<&str> = beam.lines().collect();
    assert_eq!(lines.len(), 4, "{beam}");
    assert_eq!(lines[0], "barren trees");
    assert_eq!(lines[3], "# source=beam seed=0");

    let greedy = ok(d, &[
        "gen", "--method", "greedy", "--first-line", "Barren Trees", "--ngram", "ngram.model", "--no-metadata",
    ]);
    assert_eq!(greedy.lines().count(), 3);
    assert!(greedy.starts_with("Barren Trees\n"));

    for (method, model) in [("rnn-char", "char.rnn"), ("rnn-word", "word.rnn")] {
        let args = ["gen", "--method", method, "--first-line", "cold moon", "--rnn", model, "--seed", "7"];
        let a = ok(d, &args);
        assert_eq!(a, ok(d, &args));
        assert_eq!(a.lines().count(), 4);
        assert!(a.ends_with("seed=7\n"));
    }

    let curves = ok(d, &["curves", "--model", "char.rnn"]);
    assert!(curves.starts_with("epoch,train_loss,val_loss\n1,"));
    assert_eq!(curves.lines().count(), 3);
    let sim_curve = ok(d, &["curves", "--model", "sim.model", "--smooth", "50"]);
    assert!(sim_curve.starts_with("iteration,mean_abs_error\n0,"));

    ok(d, &["oracle", "--corpus", "test.txt", "--n", "2", "--seed", "1", "--output", "oracle.txt"]);
    fs::write(d.join("prompts.txt"), "barren trees\nthe quiet moon\n").unwrap();
    ok(d, &["gen", "--method", "greedy", "--prompts", "prompts.txt", "--ngram", "ngram.model", "--output", "greedy.txt"]);
    ok(d, &[
        "gen", "--method", "rnn-char", "--prompts", "prompts.txt", "--rnn", "char.rnn", "--seed", "2", "--output",
        "rnn.txt",
    ]);
    ok(d, &[
        "survey-make", "--engine", "oracle=oracle.txt", "--engine", "greedy=greedy.txt", "--engine",
        "rnn_char=rnn.txt", "--n", "2", "--seed", "5", "--sheet", "sheet.txt", "--key", "key.csv",
    ]);
    let sheet = fs::read_to_string(d.join("sheet.txt")).unwrap();
    assert_eq!(sheet.matches("\n[item").count(), 6);
    for name in ["oracle", "greedy", "rnn"] {
        assert!(!sheet.contains(name));
    }
    let key = fs::read_to_string(d.join("key.csv")).unwrap();
    let mut scores = String::from("rater_id,item_id,q1,q2\n");
    for line in key.lines().skip(1) {
        let item = line.split(',').next().unwrap();
        scores.push_str(&format!("r1,{item},6,4\nr2,{item},8,\n"));
    }
    fs::write(d.join("scores.csv"), scores).unwrap();
    let report = ok(d, &["survey-score", "--scores", "scores.csv", "--key", "key.csv"]);
    assert_eq!(
        report,
        "engine,question,mean,n\ngreedy,q1,7.0,4\ngreedy,q2,4.0,2\noracle,q1,7.0,4\noracle,q2,4.0,2\n\
         rnn_char,q1,7.0,4\nrnn_char,q2,4.0,2\n"
    );
}

#[test]
fn replaying_manifests_reproduces_artifacts() {
    let t = train_all();
    let d = t.dir.path();
    for artifact in ["corpus.txt", "train.txt", "ngram.model", "emb.model", "sim.model", "char.rnn", "word.rnn"] {
        let before = fs::read(d.join(artifact)).unwrap();
        fs::remove_file(d.join(artifact)).unwrap();
        ok(d, &["replay", "--manifest", &format!("{artifact}.manifest.json")]);
        assert_eq!(fs::read(d.join(artifact)).unwrap(), before, "{artifact}");
    }
}

#[test]
fn error_exit_codes() {
    let t = train_all();
    let d = t.dir.path();
    // data errors
    assert_eq!(code(&haiku(d, &["clean", "--input", "missing.txt", "--output", "x.txt"])), 2);
    fs::write(d.join("bad_scores.csv"), "rater_id,item_id,q1,q2\nr1,item99,3,3\n").unwrap();
    fs::write(d.join("key.csv"), "item_id,engine\nitem01,beam\n").unwrap();
    let out = haiku(d, &["survey-score", "--scores", "bad_scores.csv", "--key", "key.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("item99"));
    // model errors
    fs::write(d.join("broken.model"), "HKG-NGRAM 1\nalpha nope\n").unwrap();
    let gen = ["gen", "--method", "greedy", "--first-line", "moon", "--ngram", "broken.model"];
    assert_eq!(code(&haiku(d, &gen)), 3);
    let oov = haiku(d, &[
        "gen", "--method", "beam", "--first-line", "zzz qqq", "--ngram", "ngram.model", "--embedding", "emb.model",
        "--sim", "sim.model",
    ]);
    assert_eq!(code(&oov), 3);
    // a method missing its model is a usage error
    assert_eq!(code(&haiku(d, &["gen", "--method", "beam", "--first-line", "moon", "--ngram", "ngram.model"])), 1);
    assert_eq!(code(&haiku(d, &["gen", "--method", "rnn-word", "--first-line", "moon", "--rnn", "char.rnn"])), 1);
}
