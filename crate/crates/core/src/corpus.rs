//! Loading, cleaning and splitting the haiku dataset.
//!
//! Rows arrive with mixed line separators and scraping debris. [`load_dataset`]
//! keeps each row byte-for-byte; [`clean_record`] repairs it into a [`Haiku`]
//! or rejects it with a reason code.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::textio;

/// Single-letter tokens that survive cleaning.
pub const SINGLE_LETTER_WORDS: [char; 3] = ['a', 'i', 'o'];

/// Join used by the cleaned corpus file format.
pub const LINE_JOIN: &str = " / ";

/// Who wrote a poem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Human,
    Greedy,
    Beam,
    RnnChar,
    RnnWord,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::Human,
        Source::Greedy,
        Source::Beam,
        Source::RnnChar,
        Source::RnnWord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Human => "human",
            Source::Greedy => "greedy",
            Source::Beam => "beam",
            Source::RnnChar => "rnn_char",
            Source::RnnWord => "rnn_word",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown poem source {s:?}")))
    }
}

/// A three-line poem.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Haiku {
    lines: [String; 3],
    source: Source,
}

impl Haiku {
    /// Builds a haiku, checking that every line is non-empty and single-line.
    pub fn new(lines: [String; 3], source: Source) -> Result<Self> {
        for line in &lines {
            if line.trim().is_empty() {
                return Err(Error::InvalidArgument("haiku line is empty".into()));
            }
            if line.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidArgument(format!(
                    "haiku line contains a tab or line break: {line:?}"
                )));
            }
        }
        Ok(Haiku { lines, source })
    }

    pub fn lines(&self) -> &[String; 3] {
        &self.lines
    }

    pub fn line(&self, i: usize) -> &str {
        &self.lines[i]
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    /// Whitespace tokens of every line, in reading order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.split_whitespace())
    }

    /// The poem as three LF-separated lines, without a trailing newline.
    pub fn to_poem_text(&self) -> String {
        self.lines.join("\n")
    }
}

/// Cleaned corpus row format: lines joined by `" / "`.
impl fmt::Display for Haiku {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines.join(LINE_JOIN))
    }
}

/// One dataset row exactly as read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    /// 1-based row number in the source file.
    pub row: usize,
    pub text: String,
}

impl RawRecord {
    pub fn new(row: usize, text: impl Into<String>) -> Self {
        RawRecord {
            row,
            text: text.into(),
        }
    }
}

impl From<&Haiku> for RawRecord {
    fn from(h: &Haiku) -> Self {
        RawRecord::new(0, h.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatHint {
    /// `.csv` files are parsed as CSV, anything else one row per line.
    #[default]
    Auto,
    Csv,
    Tsv,
    OnePerLine,
}

impl FromStr for FormatHint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(FormatHint::Auto),
            "csv" => Ok(FormatHint::Csv),
            "tsv" => Ok(FormatHint::Tsv),
            "one_per_line" | "one-per-line" => Ok(FormatHint::OnePerLine),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

/// Why a row did not become a haiku.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Fewer than three line segments could be detected while loading.
    TooFewSegments,
    /// Fewer than three non-empty lines remained after cleaning.
    TooFewLines,
    /// More than three non-empty lines remained after cleaning.
    TooManyLines,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::TooFewSegments => "too_few_segments",
            RejectReason::TooFewLines => "too_few_lines",
            RejectReason::TooManyLines => "too_many_lines",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Skip {
    pub row: usize,
    pub reason: RejectReason,
}

/// Output of [`load_dataset`].
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<Skip>,
    /// Invalid UTF-8 sequences replaced with U+FFFD.
    pub invalid_utf8: usize,
}

/// Line separator conventions seen in scraped haiku files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separator {
    Newline,
    Tab,
    /// The two characters `\` `n`.
    EscapedNewline,
    Slash,
    Dollar,
}

impl Separator {
    /// Detection order.
    pub const ALL: [Separator; 5] = [
        Separator::Newline,
        Separator::Tab,
        Separator::EscapedNewline,
        Separator::Slash,
        Separator::Dollar,
    ];

    pub fn split(self, text: &str) -> Vec<&str> {
        match self {
            Separator::Newline => text.split('\n').collect(),
            Separator::Tab => text.split('\t').collect(),
            Separator::EscapedNewline => text.split("\\n").collect(),
            Separator::Slash => text.split('/').collect(),
            Separator::Dollar => text.split('$').collect(),
        }
    }
}

fn non_empty_segments(text: &str, sep: Separator) -> usize {
    sep.split(text)
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .count()
}

/// First separator (in [`Separator::ALL`] order) that yields at least three
/// non-empty segments.
pub fn detect_separator(text: &str) -> Option<Separator> {
    Separator::ALL
        .into_iter()
        .find(|&sep| non_empty_segments(text, sep) >= 3)
}

/// Reads one haiku per row from `path`.
///
/// Rows whose line separator cannot be detected are skipped and reported.
pub fn load_dataset(path: &Path, hint: FormatHint) -> Result<LoadReport> {
    let (text, invalid_utf8) = textio::read_lossy(path)?;
    let hint = match hint {
        FormatHint::Auto => {
            let is_csv = path
                .extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
            if is_csv {
                FormatHint::Csv
            } else {
                FormatHint::OnePerLine
            }
        }
        other => other,
    };
    let mut report = match hint {
        FormatHint::Csv => load_csv(&text)?,
        FormatHint::Tsv => load_rows(&text, |row| non_empty_segments(row, Separator::Tab) >= 3),
        _ => load_rows(&text, |row| detect_separator(row).is_some()),
    };
    report.invalid_utf8 = invalid_utf8;
    Ok(report)
}

fn load_rows(text: &str, accept: impl Fn(&str) -> bool) -> LoadReport {
    let mut report = LoadReport::default();
    for (i, row) in text.lines().enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        if accept(row) {
            report.records.push(RawRecord::new(i + 1, row));
        } else {
            report.skipped.push(Skip {
                row: i + 1,
                reason: RejectReason::TooFewSegments,
            });
        }
    }
    report
}

fn load_csv(text: &str) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut report = LoadReport::default();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().filter(|f| !f.trim().is_empty()).collect();
        let text = match fields.len() {
            0 => continue,
            1 | 2 => fields[0].to_string(),
            _ => fields.join("\t"),
        };
        if detect_separator(&text).is_some() {
            report.records.push(RawRecord::new(row, text));
        } else {
            report.skipped.push(Skip {
                row,
                reason: RejectReason::TooFewSegments,
            });
        }
    }
    Ok(report)
}

/// Repairs one line: letter-flanked `?` become spaces and other `?` vanish,
/// separator characters become spaces, everything is lowercased and
/// non-whitelisted single-letter tokens are dropped.
pub fn clean_line(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut repaired = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '?' => {
                let flanked = i > 0
                    && i + 1 < chars.len()
                    && chars[i - 1].is_alphabetic()
                    && chars[i + 1].is_alphabetic();
                if flanked {
                    repaired.push(' ');
                }
            }
            '\u{2018}' | '\u{2019}' => repaired.push('\''),
            '\u{201C}' | '\u{201D}' => repaired.push('"'),
            '\u{FFFD}' => {}
            _ => repaired.push(c),
        }
    }
    let lowered = repaired.to_lowercase().replace("\\n", " ");
    let spaced: String = lowered
        .chars()
        .map(|c| match c {
            '/' | '$' | '\t' | '\r' | '\n' => ' ',
            c => c,
        })
        .collect();
    spaced
        .split_whitespace()
        .filter(|tok| !is_stray_letter(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_stray_letter(token: &str) -> bool {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => c.is_alphabetic() && !SINGLE_LETTER_WORDS.contains(&c),
        _ => false,
    }
}

/// Lowercased, repaired tokens of a free-form line (used for prompts).
pub fn normalize_tokens(line: &str) -> Vec<String> {
    clean_line(line)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Turns a raw row into a haiku, or says why it cannot.
pub fn clean_record(record: &RawRecord) -> std::result::Result<Haiku, RejectReason> {
    let segments = match detect_separator(&record.text) {
        Some(sep) => sep.split(&record.text),
        None => vec![record.text.as_str()],
    };
    let lines: Vec<String> = segments
        .into_iter()
        .map(clean_line)
        .filter(|l| !l.is_empty())
        .collect();
    match <[String; 3]>::try_from(lines) {
        Ok(lines) => Ok(Haiku { lines, source: Source::Human }),
        Err(lines) if lines.len() < 3 => Err(RejectReason::TooFewLines),
        Err(_) => Err(RejectReason::TooManyLines),
    }
}

/// Cleans every record, keeping input order and collecting rejections.
pub fn clean_all(records: &[RawRecord]) -> (Vec<Haiku>, Vec<Skip>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for record in records {
        match clean_record(record) {
            Ok(h) => kept.push(h),
            Err(reason) => rejected.push(Skip {
                row: record.row,
                reason,
            }),
        }
    }
    (kept, rejected)
}

/// Renders skips as `row_index,reason` CSV.
pub fn skip_report_csv(skips: &[Skip]) -> String {
    let mut out = String::from("row_index,reason\n");
    for skip in skips {
        out.push_str(&format!("{},{}\n", skip.row, skip.reason));
    }
    out
}

/// Renders haikus in the cleaned corpus format, one per row.
pub fn corpus_to_string(corpus: &[Haiku]) -> String {
    let mut out = String::new();
    for h in corpus {
        out.push_str(&h.to_string());
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, corpus: &[Haiku]) -> Result<()> {
    textio::write_string(path, &corpus_to_string(corpus))
}

/// Parses the cleaned corpus format. Every non-blank row must hold exactly
/// three `" / "`-joined lines.
pub fn parse_corpus(text: &str, source: Source) -> Result<Vec<Haiku>> {
    let mut corpus = Vec::new();
    for (i, row) in text.lines().enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = row.split(LINE_JOIN).collect();
        let lines = <[&str; 3]>::try_from(parts).map_err(|parts| {
            Error::format(
                "corpus",
                i + 1,
                format!("expected 3 lines, found {}", parts.len()),
            )
        })?;
        let haiku = Haiku::new(lines.map(str::to_owned), source)
            .map_err(|e| Error::format("corpus", i + 1, e.to_string()))?;
        corpus.push(haiku);
    }
    Ok(corpus)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Haiku>> {
    parse_corpus(&textio::read_to_string(path)?, Source::Human)
}

/// A seeded train/test partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Haiku>,
    pub test: Vec<Haiku>,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Train,
    Test,
}

/// Train fraction used when none is given.
pub const DEFAULT_SPLIT_RATIO: f64 = 0.9;

/// Shuffles with `seed` and puts the first `floor(ratio * n)` haikus in train.
pub fn split_corpus(corpus: &[Haiku], ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    if corpus.len() < 2 {
        return Err(Error::CorpusTooSmall(corpus.len()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut crate::seeded_rng(seed));
    // the epsilon keeps products like 0.29 * 100 from flooring to 28
    let n_train = ((ratio * corpus.len() as f64) + 1e-9).floor() as usize;
    let (train_idx, test_idx) = order.split_at(n_train.min(corpus.len()));
    Ok(CorpusSplit {
        train: train_idx.iter().map(|&i| corpus[i].clone()).collect(),
        test: test_idx.iter().map(|&i| corpus[i].clone()).collect(),
        seed,
        ratio,
    })
}

/// Line 1 of every haiku in the chosen half, in order.
pub fn first_lines(split: &CorpusSplit, which: Which) -> Vec<String> {
    let half = match which {
        Which::Train => &split.train,
        Which::Test => &split.test,
    };
    half.iter().map(|h| h.line(0).to_owned()).collect()
}

/// Dense word ids in lexicographic order, with occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_corpus(corpus: &[Haiku]) -> Self {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for tok in corpus.iter().flat_map(Haiku::tokens) {
            *counts.entry(tok).or_default() += 1;
        }
        Self::from_counts(counts.into_iter().map(|(w, c)| (w.to_owned(), c)))
    }

    /// Builds a vocabulary from `(word, count)` pairs; ids follow sorted word order.
    pub fn from_counts(pairs: impl IntoIterator<Item = (String, u64)>) -> Self {
        let sorted: BTreeMap<String, u64> = pairs.into_iter().collect();
        let mut vocab = Vocabulary::default();
        for (word, count) in sorted {
            vocab.index.insert(word.clone(), vocab.words.len());
            vocab.words.push(word);
            vocab.counts.push(count);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haiku(a: &str, b: &str, c: &str) -> Haiku {
        Haiku::new([a.into(), b.into(), c.into()], Source::Human).unwrap()
    }

    fn clean(text: &str) -> std::result::Result<Haiku, RejectReason> {
        clean_record(&RawRecord::new(1, text))
    }

    #[test]
    fn repairs_question_marks_and_stray_letters() {
        let h = clean("leaves?fall?down / s cold wind / night").unwrap();
        assert_eq!(h.lines(), &["leaves fall down", "cold wind", "night"]);
    }

    #[test]
    fn question_mark_not_flanked_by_letters_is_removed() {
        let h = clean("a hawk's eye? / autumn gusts rattle / the beech leaves").unwrap();
        assert_eq!(h.line(0), "a hawk's eye");
        let h = clean("what?? now / x?y 3?4 / end").unwrap();
        assert_eq!(h.lines(), &["what now", "34", "end"]);
    }

    #[test]
    fn artifact_free_rows_only_change_case() {
        let h = clean("Old Pond / Frog Jumps In / The Sound Of Water").unwrap();
        assert_eq!(h.lines(), &["old pond", "frog jumps in", "the sound of water"]);
    }

    #[test]
    fn clean_rows_only_change_case() {
        let h = clean("Old Pond / Frog Jumps / Splash").unwrap();
        assert_eq!(h.lines(), &["old pond", "frog jumps", "splash"]);
        // lone letters other than a, i, o are debris even in an otherwise clean row
        assert_eq!(clean("a b / c d / e f"), Err(RejectReason::TooFewLines));
    }

    #[test]
    fn two_lines_are_rejected() {
        assert_eq!(clean("x / y"), Err(RejectReason::TooFewLines));
        assert_eq!(clean("cold / s / night"), Err(RejectReason::TooFewLines));
        assert_eq!(clean("aa / bb / cc / dd"), Err(RejectReason::TooManyLines));
    }

    #[test]
    fn every_separator_is_detected() {
        for text in [
            "old pond\tfrog jumps\tsplash",
            "old pond\\nfrog jumps\\nsplash",
            "old pond / frog jumps / splash",
            "old pond$frog jumps$splash",
            "old pond\nfrog jumps\nsplash",
        ] {
            let h = clean(text).unwrap();
            assert_eq!(h.lines(), &["old pond", "frog jumps", "splash"], "{text:?}");
        }
    }

    #[test]
    fn cleaning_is_idempotent_on_tricky_input() {
        for text in [
            "\\?n?\\N / AND/OR $5 / İstanbul?s",
            "oh?? ?a b? / c\\\\nn / ye\u{2019}s",
        ] {
            if let Ok(once) = clean(text) {
                let twice = clean_record(&RawRecord::from(&once)).unwrap();
                assert_eq!(once, twice, "{text:?}");
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_sized() {
        let corpus: Vec<Haiku> = (0..10)
            .map(|i| haiku(&format!("line{i}"), "middle", "end"))
            .collect();
        let a = split_corpus(&corpus, 0.8, 7).unwrap();
        let b = split_corpus(&corpus, 0.8, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        for h in &a.test {
            assert!(!a.train.contains(h));
        }
    }

    #[test]
    fn split_rejects_tiny_corpus_and_bad_ratio() {
        let one = vec![haiku("aa", "bb", "cc")];
        assert!(matches!(split_corpus(&one, 0.8, 1), Err(Error::CorpusTooSmall(1))));
        let two = vec![haiku("aa", "bb", "cc"), haiku("dd", "ee", "ff")];
        assert!(split_corpus(&two, 1.0, 1).is_err());
        assert!(split_corpus(&two, 0.0, 1).is_err());
    }

    #[test]
    fn first_lines_preserve_order() {
        let split = CorpusSplit {
            train: vec![haiku("one", "x1", "y1"), haiku("two", "x2", "y2")],
            test: vec![],
            seed: 0,
            ratio: 0.5,
        };
        assert_eq!(first_lines(&split, Which::Train), ["one", "two"]);
        assert!(first_lines(&split, Which::Test).is_empty());
    }

    #[test]
    fn vocabulary_ids_are_sorted_and_dense() {
        let v = Vocabulary::from_corpus(&[haiku("b a", "c b", "b")]);
        assert_eq!(v.words(), ["a", "b", "c"]);
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.count(1), 3);
        assert_eq!(v.total(), 5);
    }

    #[test]
    fn haiku_rejects_tabs_and_empty_lines() {
        assert!(Haiku::new(["a\tb".into(), "c".into(), "d".into()], Source::Human).is_err());
        assert!(Haiku::new(["  ".into(), "c".into(), "d".into()], Source::Human).is_err());
    }

    #[test]
    fn corpus_format_round_trips() {
        let corpus = vec![haiku("withering leaves", "the lawyer to write his will", "rings the doorbell")];
        let text = corpus_to_string(&corpus);
        assert_eq!(text, "withering leaves / the lawyer to write his will / rings the doorbell\n");
        assert_eq!(parse_corpus(&text, Source::Human).unwrap(), corpus);
        assert!(parse_corpus("a / b\n", Source::Human).is_err());
    }
}
