//! Blind survey sheets and score aggregation.
//!
//! A sheet mixes poems from several engines in a seeded order and hides
//! which engine wrote which; the mapping goes to a separate key file. Rater
//! scores come back as CSV and are averaged per engine and question.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::corpus::Haiku;
use crate::error::{Error, Result};
use crate::textio;

pub const KEY_HEADER: [&str; 2] = ["item_id", "engine"];
pub const SCORES_HEADER: [&str; 4] = ["rater_id", "item_id", "q1", "q2"];
pub const REPORT_HEADER: &str = "engine,question,mean,n";

/// Prompts printed at the top of every sheet.
pub const QUESTIONS: [&str; 2] = [
    "How good is this poem? (1 = very poor, 10 = excellent)",
    "How likely is it that a person wrote this poem? (1 = not at all, 10 = certainly)",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyItem {
    pub item_id: String,
    pub lines: [String; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveySheet {
    pub sheet_id: String,
    pub items: Vec<SurveyItem>,
}

/// Item id to engine name.
pub type SurveyKey = BTreeMap<String, String>;

impl SurveySheet {
    /// Plain-text sheet handed to raters.
    pub fn to_text(&self) -> String {
        let mut out = format!("Poetry survey {}\n\nPlease answer for each poem:\n", self.sheet_id);
        for (i, q) in QUESTIONS.iter().enumerate() {
            out.push_str(&format!("  Q{}. {q}\n", i + 1));
        }
        for item in &self.items {
            out.push_str(&format!("\n[{}]\n", item.item_id));
            for line in &item.lines {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

/// Builds a sheet from the first `n_per_engine` poems of every engine.
///
/// Items are numbered after a seeded shuffle, so ids carry no information
/// about the engine.
pub fn make_survey(
    poem_sets: &BTreeMap<String, Vec<Haiku>>,
    n_per_engine: usize,
    seed: u64,
) -> Result<(SurveySheet, SurveyKey)> {
    let mut pool = Vec::new();
    for (engine, poems) in poem_sets {
        if poems.len() < n_per_engine {
            return Err(Error::NotEnoughItems {
                requested: n_per_engine,
                available: poems.len(),
            });
        }
        pool.extend(poems[..n_per_engine].iter().map(|p| (engine, p)));
    }
    pool.shuffle(&mut crate::seeded_rng(seed));
    let width = pool.len().to_string().len().max(2);
    let mut items = Vec::with_capacity(pool.len());
    let mut key = SurveyKey::new();
    for (i, (engine, poem)) in pool.into_iter().enumerate() {
        let item_id = format!("item{:0width$}", i + 1);
        key.insert(item_id.clone(), engine.clone());
        items.push(SurveyItem {
            item_id,
            lines: poem.lines().clone(),
        });
    }
    let sheet = SurveySheet {
        sheet_id: format!("s{seed}"),
        items,
    };
    Ok((sheet, key))
}

pub fn key_to_csv(key: &SurveyKey) -> String {
    let mut out = KEY_HEADER.join(",");
    out.push('\n');
    for (item, engine) in key {
        out.push_str(&format!("{item},{engine}\n"));
    }
    out
}

pub fn parse_key(text: &str) -> Result<SurveyKey> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &KEY_HEADER, "key")?;
    let mut key = SurveyKey::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != 2 {
            return Err(Error::format("key", line, "expected item_id,engine"));
        }
        if key.insert(row[0].to_owned(), row[1].to_owned()).is_some() {
            return Err(Error::format("key", line, format!("duplicate item id {:?}", &row[0])));
        }
    }
    Ok(key)
}

/// One rater's answers for one item. A missing answer is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRecord {
    pub rater_id: String,
    pub item_id: String,
    pub q1_quality: Option<u8>,
    pub q2_humanlike: Option<u8>,
}

fn parse_score(field: &str, line: usize) -> Result<Option<u8>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<u8>() {
        Ok(s) if (1..=10).contains(&s) => Ok(Some(s)),
        _ => Err(Error::format(
            "scores",
            line,
            format!("score must be an integer from 1 to 10, got {field:?}"),
        )),
    }
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &SCORES_HEADER, "scores")?;
    let mut scores = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != 4 {
            return Err(Error::format("scores", line, "expected rater_id,item_id,q1,q2"));
        }
        scores.push(ScoreRecord {
            rater_id: row[0].to_owned(),
            item_id: row[1].to_owned(),
            q1_quality: parse_score(&row[2], line)?,
            q2_humanlike: parse_score(&row[3], line)?,
        });
    }
    Ok(scores)
}

pub fn scores_to_csv(scores: &[ScoreRecord]) -> String {
    let mut out = SCORES_HEADER.join(",");
    out.push('\n');
    let show = |s: Option<u8>| s.map_or(String::new(), |v| v.to_string());
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.rater_id,
            s.item_id,
            show(s.q1_quality),
            show(s.q2_humanlike)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Question {
    Quality,
    HumanLike,
}

impl Question {
    pub fn as_str(self) -> &'static str {
        match self {
            Question::Quality => "q1",
            Question::HumanLike => "q2",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub engine: String,
    pub question: Question,
    pub mean: f64,
    pub count: usize,
}

/// Mean score per engine and question, sorted by engine then question.
/// Combinations nobody answered are left out.
pub fn aggregate(scores: &[ScoreRecord], key: &SurveyKey) -> Result<Vec<AggregateRow>> {
    let unknown: BTreeSet<&str> = scores
        .iter()
        .filter(|s| !key.contains_key(&s.item_id))
        .map(|s| s.item_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownItems(unknown.into_iter().map(str::to_owned).collect()));
    }
    // Integer sums keep the means independent of score order.
    let mut sums: BTreeMap<(&str, Question), (u64, usize)> = BTreeMap::new();
    for s in scores {
        let engine = key[&s.item_id].as_str();
        for (q, v) in [(Question::Quality, s.q1_quality), (Question::HumanLike, s.q2_humanlike)] {
            if let Some(v) = v {
                let e = sums.entry((engine, q)).or_default();
                e.0 += u64::from(v);
                e.1 += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|((engine, question), (sum, count))| AggregateRow {
            engine: engine.to_owned(),
            question,
            mean: sum as f64 / count as f64,
            count,
        })
        .collect())
}

pub fn report_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.engine,
            r.question,
            textio::fmt_f64(r.mean),
            r.count
        ));
    }
    out
}

pub fn write_survey(sheet: &SurveySheet, key: &SurveyKey, sheet_path: &Path, key_path: &Path) -> Result<()> {
    textio::write_string(sheet_path, &sheet.to_text())?;
    textio::write_string(key_path, &key_to_csv(key))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str], format: &'static str) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::format(
            format,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn poems(tag: &str, n: usize) -> Vec<Haiku> {
        (0..n)
            .map(|i| {
                Haiku::new(
                    [format!("{tag} moon {i}"), "over the still pond".into(), "frogs wait".into()],
                    Source::Human,
                )
                .unwrap()
            })
            .collect()
    }

    fn engines() -> BTreeMap<String, Vec<Haiku>> {
        ["oracle", "greedy", "beam", "rnn_char"]
            .iter()
            .enumerate()
            .map(|(i, e)| (e.to_string(), poems(&format!("p{i}"), 3)))
            .collect()
    }

    fn rec(rater: &str, item: &str, q1: Option<u8>, q2: Option<u8>) -> ScoreRecord {
        ScoreRecord {
            rater_id: rater.into(),
            item_id: item.into(),
            q1_quality: q1,
            q2_humanlike: q2,
        }
    }

    #[test]
    fn two_per_engine_gives_eight_keyed_items() {
        let (sheet, key) = make_survey(&engines(), 2, 5).unwrap();
        assert_eq!(sheet.items.len(), 8);
        assert_eq!(key.len(), 8);
        for engine in ["oracle", "greedy", "beam", "rnn_char"] {
            assert_eq!(key.values().filter(|e| *e == engine).count(), 2);
        }
        let ids: BTreeSet<&String> = sheet.items.iter().map(|i| &i.item_id).collect();
        assert!(ids.iter().all(|id| key.contains_key(*id)));
    }

    #[test]
    fn empty_and_oversized_requests() {
        let (sheet, key) = make_survey(&engines(), 0, 1).unwrap();
        assert!(sheet.items.is_empty() && key.is_empty());
        assert!(matches!(
            make_survey(&engines(), 4, 1),
            Err(Error::NotEnoughItems { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn ordering_is_seeded() {
        let a = make_survey(&engines(), 3, 9).unwrap();
        assert_eq!(a, make_survey(&engines(), 3, 9).unwrap());
        let orders: BTreeSet<Vec<[String; 3]>> = (0..5)
            .map(|s| make_survey(&engines(), 3, s).unwrap().0.items.into_iter().map(|i| i.lines).collect())
            .collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn sheet_text_hides_engines() {
        let (sheet, key) = make_survey(&engines(), 3, 2).unwrap();
        let text = sheet.to_text().to_lowercase();
        for name in ["oracle", "greedy", "beam", "rnn", "char", "human", "word"] {
            assert!(!text.contains(name), "{name}");
        }
        assert!(key_to_csv(&key).contains("oracle"));
    }

    #[test]
    fn single_and_paired_scores() {
        let key: SurveyKey = [("item01".to_string(), "beam".to_string())].into();
        let rows = aggregate(&[rec("r1", "item01", Some(7), None)], &key).unwrap();
        assert_eq!(rows, [AggregateRow { engine: "beam".into(), question: Question::Quality, mean: 7.0, count: 1 }]);
        let rows = aggregate(
            &[rec("r1", "item01", Some(6), Some(2)), rec("r2", "item01", Some(8), None)],
            &key,
        )
        .unwrap();
        assert_eq!(rows[0].mean, 7.0);
        assert_eq!(rows[0].count, 2);
        assert_eq!((rows[1].question, rows[1].mean, rows[1].count), (Question::HumanLike, 2.0, 1));
    }

    #[test]
    fn unknown_items_are_listed() {
        let key: SurveyKey = [("item01".to_string(), "beam".to_string())].into();
        let scores = [
            rec("r1", "item09", Some(1), Some(1)),
            rec("r1", "item01", Some(1), Some(1)),
            rec("r2", "item07", Some(1), Some(1)),
        ];
        match aggregate(&scores, &key) {
            Err(Error::UnknownItems(ids)) => assert_eq!(ids, ["item07", "item09"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn score_csv_round_trips_and_validates() {
        let scores = vec![rec("r1", "item01", Some(10), None), rec("r2", "item02", None, Some(1))];
        assert_eq!(parse_scores(&scores_to_csv(&scores)).unwrap(), scores);
        for bad in ["0", "11", "7.5", "x"] {
            let text = format!("rater_id,item_id,q1,q2\nr1,item01,{bad},3\n");
            assert!(parse_scores(&text).is_err(), "{bad}");
        }
        assert!(parse_scores("rater,item,q1,q2\n").is_err());
    }

    #[test]
    fn key_csv_round_trips() {
        let (_, key) = make_survey(&engines(), 2, 3).unwrap();
        assert_eq!(parse_key(&key_to_csv(&key)).unwrap(), key);
    }
}
