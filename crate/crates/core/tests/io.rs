use std::fs;

use haiku_core::corpus::{self, load_dataset, FormatHint, RawRecord};
use haiku_core::embedding::{train_sgns, EmbeddingModel, SgnsConfig};
use haiku_core::ngram::{train_ngram, NGramModel};
use haiku_core::rnn::{self, build_dataset, Level, LstmNet, NetConfig, SymbolTable, TrainConfig};
use haiku_core::simpredictor::{build_examples, train_sim, LinearSimilarityModel, SimConfig};
use haiku_core::syllable::SyllableLexicon;
use haiku_core::synthetic::themed_corpus;

#[test]
fn tab_rows_pass_through_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.tsv");
    fs::write(&path, "old pond\tfrog jumps\tsplash\n").unwrap();
    let report = load_dataset(&path, FormatHint::Tsv).unwrap();
    assert_eq!(report.records, [RawRecord::new(1, "old pond\tfrog jumps\tsplash")]);
    assert!(report.skipped.is_empty());
}

#[test]
fn empty_file_loads_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.txt");
    fs::write(&path, "").unwrap();
    let report = load_dataset(&path, FormatHint::Auto).unwrap();
    assert!(report.records.is_empty() && report.skipped.is_empty());
}

#[test]
fn loader_leaves_artifacts_for_the_cleaner() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.txt");
    let row = "a?b?c / x / y";
    fs::write(&path, format!("{row}\n")).unwrap();
    let report = load_dataset(&path, FormatHint::OnePerLine).unwrap();
    assert_eq!(report.records[0].text.as_bytes(), row.as_bytes());
}

#[test]
fn csv_rows_join_columns_and_count_bad_utf8() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    let mut bytes = b"line1,line2,line3\nold pond,frog jumps,splash\n\"wind / rain / sun\",,\n".to_vec();
    bytes.extend(b"bad \xff byte,two,three\n");
    fs::write(&path, bytes).unwrap();
    let report = load_dataset(&path, FormatHint::Auto).unwrap();
    assert_eq!(report.invalid_utf8, 1);
    let cleaned: Vec<String> = corpus::clean_all(&report.records)
        .0
        .iter()
        .map(|h| h.to_string())
        .collect();
    assert!(cleaned.contains(&"old pond / frog jumps / splash".to_string()), "{cleaned:?}");
    assert!(cleaned.contains(&"wind / rain / sun".to_string()), "{cleaned:?}");
    assert!(cleaned.contains(&"bad byte / two / three".to_string()), "{cleaned:?}");
}

#[test]
fn models_survive_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = themed_corpus(80, 2);

    let ngram = train_ngram(&corpus, 0.1).unwrap();
    let p = dir.path().join("ngram.model");
    ngram.save(&p).unwrap();
    assert_eq!(NGramModel::load(&p).unwrap(), ngram);

    let emb = train_sgns(&corpus, &SgnsConfig { epochs: 1, ..Default::default() }).unwrap();
    let p = dir.path().join("emb.model");
    emb.save(&p).unwrap();
    assert_eq!(EmbeddingModel::load(&p).unwrap(), emb);

    let (examples, _) = build_examples(&corpus, &emb);
    let sim = train_sim(&examples, &[], &ngram, &SimConfig { iterations: 5, ..Default::default() }).unwrap();
    let p = dir.path().join("sim.model");
    sim.save(&p).unwrap();
    assert_eq!(LinearSimilarityModel::load(&p).unwrap(), sim);

    let table = SymbolTable::from_corpus(&corpus, Level::Word);
    let cfg = NetConfig { hidden_size: 8, embedding_dim: 4, ..NetConfig::for_level(Level::Word) };
    let pairs = build_dataset(&corpus[..10], &table, cfg.window);
    let mut net = LstmNet::new(table, cfg, 0).unwrap();
    rnn::train(&mut net, &pairs, &pairs, &TrainConfig { epochs: 1, ..Default::default() }).unwrap();
    let p = dir.path().join("word.rnn");
    net.save(&p).unwrap();
    assert_eq!(LstmNet::load(&p).unwrap(), net);
}

#[test]
fn lexicon_file_overrides_rules() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.txt");
    fs::write(&path, "# local words\nfirefly 3\n").unwrap();
    let mut lex = SyllableLexicon::builtin();
    lex.merge(&SyllableLexicon::load(&path).unwrap()).unwrap();
    assert_eq!(haiku_core::syllable::count_line("firefly glow", &lex), 4);
}

#[test]
fn truncated_model_files_are_format_errors() {
    let corpus = themed_corpus(20, 1);
    let text = train_ngram(&corpus, 0.1).unwrap().to_text();
    let cut = &text[..text.len() / 2];
    let cut = &cut[..cut.rfind('\n').unwrap()];
    assert!(matches!(NGramModel::from_text(cut), Err(haiku_core::Error::Format { .. })));
    assert!(NGramModel::from_text("HKG-NGRAM 2\n").is_err());
}
