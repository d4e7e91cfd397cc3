//! Greedy bigram baseline, oracle sampling and embedding-guided beam search.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::corpus::{normalize_tokens, Haiku, Source};
use crate::embedding::{EmbeddingModel, DEFAULT_K};
use crate::error::{Error, Result};
use crate::ngram::NGramModel;
use crate::simpredictor::LinearSimilarityModel;
use crate::syllable::{count_token, SyllableLexicon};

/// Syllable budgets for lines 2 and 3.
pub const DEFAULT_BUDGETS: [u32; 2] = [7, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Candidate successors per state.
    pub k: usize,
    /// Partial lines kept per depth.
    pub beam_width: usize,
    pub line_budgets: [u32; 2],
    /// Require lines to hit their budget exactly.
    pub strict_budget: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k: DEFAULT_K,
            beam_width: 20,
            line_budgets: DEFAULT_BUDGETS,
            strict_budget: true,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.beam_width == 0 {
            return Err(Error::InvalidArgument("k and beam width must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_first_line(first_line: &str) -> Result<()> {
    if first_line.trim().is_empty() || first_line.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!(
            "first line must be a single non-empty line, got {first_line:?}"
        )));
    }
    Ok(())
}

/// Baseline: after the last word of the previous line, repeatedly append the
/// word with the lowest bigram cost until the line reaches its budget (it may
/// go over). A word never directly follows itself.
pub fn generate_greedy(
    first_line: &str,
    ngram: &NGramModel,
    lex: &SyllableLexicon,
    budgets: [u32; 2],
) -> Result<Haiku> {
    check_first_line(first_line)?;
    if ngram.vocab().is_empty() {
        return Err(Error::VocabTooSmall(0, 1));
    }
    let mut prev = normalize_tokens(first_line).pop();
    let mut lines = Vec::with_capacity(2);
    for budget in budgets {
        let mut words: Vec<String> = Vec::new();
        let mut syllables = 0;
        loop {
            let next = match prev.as_deref() {
                Some(p) if ngram.vocab().contains(p) => ngram.argmin_next(p, &[p])?,
                Some(p) => ngram.unigram_argmin(&[p])?,
                None => ngram.unigram_argmin(&[])?,
            };
            syllables += count_token(&next, lex);
            words.push(next.clone());
            prev = Some(next);
            if syllables >= budget {
                break;
            }
        }
        lines.push(words.join(" "));
    }
    let [second, third] = <[String; 2]>::try_from(lines).expect("two budgets");
    Haiku::new([first_line.to_owned(), second, third], Source::Greedy)
}

/// Picks `n` distinct haikus from `test` and tags them as human.
pub fn sample_oracle(test: &[Haiku], n: usize, seed: u64) -> Result<Vec<Haiku>> {
    if n > test.len() {
        return Err(Error::NotEnoughItems {
            requested: n,
            available: test.len(),
        });
    }
    let mut rng = crate::seeded_rng(seed);
    Ok(rand::seq::index::sample(&mut rng, test.len(), n)
        .into_iter()
        .map(|i| test[i].clone().with_source(Source::Human))
        .collect())
}

/// Models the beam search consults.
#[derive(Debug, Clone, Copy)]
pub struct BeamModels<'a> {
    pub embedding: &'a EmbeddingModel,
    pub predictor: &'a LinearSimilarityModel,
    pub ngram: &'a NGramModel,
    pub lexicon: &'a SyllableLexicon,
}

/// A partial line in the search.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub previous_word: String,
    pub words: Vec<String>,
    pub num_syllables: u32,
    pub cost: f64,
}

impl BeamState {
    fn start(word: &str) -> Self {
        BeamState {
            previous_word: word.to_owned(),
            words: Vec::new(),
            num_syllables: 0,
            cost: 0.0,
        }
    }

    pub fn current_line(&self) -> String {
        self.words.join(" ")
    }
}

fn rank(a: &(f64, String), b: &(f64, String)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Result of searching one line.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamLine {
    pub line: String,
    pub cost: f64,
    /// The line hit its budget exactly under strict search.
    pub strict: bool,
}

struct Searcher<'a> {
    models: BeamModels<'a>,
    k: usize,
    actions: HashMap<String, Vec<(String, f64)>>,
}

impl Searcher<'_> {
    fn actions(&mut self, word: &str) -> Result<&[(String, f64)]> {
        if !self.actions.contains_key(word) {
            let list = self.models.embedding.k_most_similar(word, self.k)?;
            self.actions.insert(word.to_owned(), list);
        }
        Ok(&self.actions[word])
    }

    fn predicted(&self, state: &BeamState) -> f64 {
        let m = &self.models;
        if state.words.is_empty() {
            m.predictor.predict_similarity(std::slice::from_ref(&state.previous_word), m.ngram)
        } else {
            m.predictor.predict_similarity(&state.words, m.ngram)
        }
    }

    /// Lowest-cost goal line, or `None` if the beam runs dry first.
    fn run(&mut self, start_word: &str, budget: u32, width: usize, strict: bool) -> Result<Option<(f64, String)>> {
        let is_goal = |n: u32| if strict { n == budget } else { n >= budget };
        if is_goal(0) {
            return Ok(Some((0.0, String::new())));
        }
        let mut best: Option<(f64, String)> = None;
        let mut frontier = vec![BeamState::start(start_word)];
        while !frontier.is_empty() {
            let mut next: Vec<(f64, String, BeamState)> = Vec::new();
            for state in &frontier {
                let predicted = self.predicted(state);
                let lexicon = self.models.lexicon;
                for (word, similarity) in self.actions(&state.previous_word)?.to_vec() {
                    let syllables = state.num_syllables + count_token(&word, lexicon);
                    if strict && syllables > budget {
                        continue;
                    }
                    let cost = state.cost + (similarity - predicted).abs();
                    if best.as_ref().is_some_and(|b| cost > b.0) {
                        continue;
                    }
                    let mut words = state.words.clone();
                    words.push(word.clone());
                    let line = words.join(" ");
                    if is_goal(syllables) {
                        let candidate = (cost, line);
                        if best.as_ref().is_none_or(|b| rank(&candidate, b) == Ordering::Less) {
                            best = Some(candidate);
                        }
                    } else {
                        next.push((
                            cost,
                            line,
                            BeamState {
                                previous_word: word,
                                words,
                                num_syllables: syllables,
                                cost,
                            },
                        ));
                    }
                }
            }
            if let Some(b) = &best {
                next.retain(|(cost, _, _)| *cost <= b.0);
            }
            next.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            next.truncate(width);
            frontier = next.into_iter().map(|(_, _, s)| s).collect();
        }
        Ok(best)
    }
}

/// Beam search for one line starting after `start_word`.
///
/// Each step appends one of the `k` words most similar to the previous word
/// and pays `|similarity(previous, word) - predicted similarity|`. Under a
/// strict budget a line must land exactly on `budget` syllables; if no such
/// line survives the search is repeated with "at least `budget`" as the goal.
pub fn beam_line(start_word: &str, budget: u32, models: BeamModels<'_>, cfg: &SearchConfig) -> Result<BeamLine> {
    cfg.validate()?;
    if !models.embedding.contains(start_word) {
        return Err(Error::OutOfVocabulary(start_word.to_owned()));
    }
    let mut searcher = Searcher {
        models,
        k: cfg.k,
        actions: HashMap::new(),
    };
    if cfg.strict_budget {
        if let Some((cost, line)) = searcher.run(start_word, budget, cfg.beam_width, true)? {
            return Ok(BeamLine { line, cost, strict: true });
        }
    }
    match searcher.run(start_word, budget, cfg.beam_width, false)? {
        Some((cost, line)) => Ok(BeamLine { line, cost, strict: false }),
        None => Err(Error::NoCompletion(budget)),
    }
}

/// A beam-search poem with per-line search details.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPoem {
    pub haiku: Haiku,
    pub lines: [BeamLine; 2],
}

/// Line 2 continues from the last known word of line 1, line 3 from the last
/// word of line 2.
pub fn generate_beam(first_line: &str, models: BeamModels<'_>, cfg: &SearchConfig) -> Result<BeamPoem> {
    check_first_line(first_line)?;
    if cfg.line_budgets.contains(&0) {
        return Err(Error::InvalidArgument("line budgets must be positive".into()));
    }
    let start = normalize_tokens(first_line)
        .into_iter()
        .rev()
        .find(|w| models.embedding.contains(w))
        .ok_or_else(|| Error::OutOfVocabulary(first_line.to_owned()))?;
    let second = beam_line(&start, cfg.line_budgets[0], models, cfg)?;
    let pivot = second.line.rsplit(' ').next().expect("non-empty line").to_owned();
    let third = beam_line(&pivot, cfg.line_budgets[1], models, cfg)?;
    let haiku = Haiku::new(
        [first_line.to_owned(), second.line.clone(), third.line.clone()],
        Source::Beam,
    )?;
    Ok(BeamPoem {
        haiku,
        lines: [second, third],
    })
}

/// Three LF-terminated lines plus an optional `# source=... seed=...` line.
pub fn format_poem(haiku: &Haiku, seed: Option<u64>) -> String {
    let mut out = haiku.to_poem_text();
    out.push('\n');
    if let Some(seed) = seed {
        out.push_str(&format!("# source={} seed={seed}\n", haiku.source()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::ngram::train_ngram;

    fn haiku(a: &str, b: &str, c: &str) -> Haiku {
        Haiku::new([a.into(), b.into(), c.into()], Source::Human).unwrap()
    }

    #[test]
    fn greedy_follows_bigrams() {
        let ng = train_ngram(&[haiku("a b", "b c", "c a")], 1.0).unwrap();
        let lex = SyllableLexicon::empty();
        let h = generate_greedy("a", &ng, &lex, [2, 2]).unwrap();
        let first = h.line(1).split(' ').next().unwrap();
        assert_eq!(first, ng.argmin_next("a", &["a"]).unwrap());
        assert_eq!(h.line(0), "a");
        assert_eq!(h.source(), Source::Greedy);
    }

    #[test]
    fn greedy_one_syllable_budget_gives_one_word() {
        let ng = train_ngram(&[haiku("dog cat", "cat sun", "sun dog")], 1.0).unwrap();
        let h = generate_greedy("Dog", &ng, &SyllableLexicon::empty(), [1, 1]).unwrap();
        assert_eq!(h.line(1).split(' ').count(), 1);
        assert_eq!(h.line(2).split(' ').count(), 1);
        assert_eq!(h.line(0), "Dog");
    }

    #[test]
    fn greedy_oov_prompt_starts_from_most_frequent_word() {
        let ng = train_ngram(&[haiku("cat cat", "dog", "cat")], 1.0).unwrap();
        let h = generate_greedy("zebra", &ng, &SyllableLexicon::empty(), [1, 1]).unwrap();
        assert_eq!(h.line(1), "cat");
        assert_eq!(h.line(2), "dog");
    }

    #[test]
    fn greedy_rejects_bad_first_line() {
        let ng = train_ngram(&[haiku("a b", "b c", "c a")], 1.0).unwrap();
        assert!(generate_greedy("", &ng, &SyllableLexicon::empty(), [1, 1]).is_err());
        assert!(generate_greedy("a\tb", &ng, &SyllableLexicon::empty(), [1, 1]).is_err());
    }

    #[test]
    fn oracle_sampling() {
        let test: Vec<Haiku> = (0..6).map(|i| haiku(&format!("l{i}"), "b", "c")).collect();
        assert!(sample_oracle(&test, 0, 1).unwrap().is_empty());
        let a = sample_oracle(&test, 3, 5).unwrap();
        assert_eq!(a, sample_oracle(&test, 3, 5).unwrap());
        let mut firsts: Vec<&str> = a.iter().map(|h| h.line(0)).collect();
        firsts.dedup();
        assert_eq!(firsts.len(), 3);
        assert!(a.iter().all(|h| h.source() == Source::Human));
        assert!(sample_oracle(&test, 7, 1).is_err());
    }

    struct Fixture {
        emb: EmbeddingModel,
        sim: LinearSimilarityModel,
        ng: NGramModel,
        lex: SyllableLexicon,
    }

    impl Fixture {
        fn models(&self) -> BeamModels<'_> {
            BeamModels {
                embedding: &self.emb,
                predictor: &self.sim,
                ngram: &self.ng,
                lexicon: &self.lex,
            }
        }
    }

    /// Three one-syllable words with 2-d vectors at chosen angles.
    fn fixture() -> Fixture {
        let vocab = Vocabulary::from_counts(["cat", "dog", "sun"].map(|w| (w.to_string(), 1)));
        let angles = [0.0f64, 0.5, 2.0];
        let input: Vec<f64> = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
        Fixture {
            emb: EmbeddingModel::from_vectors(vocab, 2, input, vec![0.0; 6]).unwrap(),
            sim: LinearSimilarityModel::zero(4),
            ng: train_ngram(&[haiku("cat dog", "sun", "dog")], 1.0).unwrap(),
            lex: SyllableLexicon::empty(),
        }
    }

    #[test]
    fn beam_matches_exhaustive_enumeration() {
        let f = fixture();
        let cfg = SearchConfig { k: 2, beam_width: 4, ..Default::default() };
        let got = beam_line("cat", 2, f.models(), &cfg).unwrap();
        // zero predictor: step cost = |cos(angle difference)|
        let words = ["cat", "dog", "sun"];
        let angle = |w: &str| [0.0f64, 0.5, 2.0][words.iter().position(|x| *x == w).unwrap()];
        let mut best = (f64::INFINITY, String::new());
        for a in words.iter().filter(|w| **w != "cat") {
            for b in words.iter().filter(|w| *w != a) {
                let cost = (angle("cat") - angle(a)).cos().abs() + (angle(a) - angle(b)).cos().abs();
                let line = format!("{a} {b}");
                if cost < best.0 - 1e-12 || ((cost - best.0).abs() < 1e-12 && line < best.1) {
                    best = (cost, line);
                }
            }
        }
        assert_eq!(got.line, best.1);
        assert!((got.cost - best.0).abs() < 1e-12);
        assert!(got.strict);
    }

    #[test]
    fn zero_budget_is_immediately_done() {
        let f = fixture();
        let got = beam_line("cat", 0, f.models(), &SearchConfig::default()).unwrap();
        assert_eq!(got, BeamLine { line: String::new(), cost: 0.0, strict: true });
    }

    #[test]
    fn k_one_follows_most_similar_chain() {
        let f = fixture();
        let cfg = SearchConfig { k: 1, beam_width: 1, ..Default::default() };
        let got = beam_line("sun", 3, f.models(), &cfg).unwrap();
        let mut chain = vec![];
        let mut prev = "sun".to_string();
        for _ in 0..3 {
            prev = f.emb.k_most_similar(&prev, 1).unwrap()[0].0.clone();
            chain.push(prev.clone());
        }
        assert_eq!(got.line, chain.join(" "));
    }

    #[test]
    fn strict_failure_falls_back_to_relaxed() {
        let mut f = fixture();
        f.lex = SyllableLexicon::parse("cat 2\ndog 2\nsun 2\n").unwrap();
        let got = beam_line("cat", 3, f.models(), &SearchConfig::default()).unwrap();
        assert!(!got.strict);
        assert_eq!(got.line.split(' ').count(), 2);
        let cfg = SearchConfig { strict_budget: false, ..Default::default() };
        assert!(!beam_line("cat", 4, f.models(), &cfg).unwrap().strict);
    }

    #[test]
    fn beam_poem_keeps_first_line_and_budgets() {
        let f = fixture();
        let cfg = SearchConfig { line_budgets: [3, 2], ..Default::default() };
        let poem = generate_beam("The Black CAT", f.models(), &cfg).unwrap();
        assert_eq!(poem.haiku.line(0), "The Black CAT");
        assert_eq!(poem.haiku.line(1).split(' ').count(), 3);
        assert_eq!(poem.haiku.line(2).split(' ').count(), 2);
        assert_eq!(poem.haiku.source(), Source::Beam);
        assert!(matches!(
            generate_beam("zebra", f.models(), &cfg),
            Err(Error::OutOfVocabulary(_))
        ));
        assert!(beam_line("zebra", 2, f.models(), &cfg).is_err());
    }

    #[test]
    fn poem_format() {
        let h = haiku("a1", "b2", "c3").with_source(Source::Beam);
        assert_eq!(format_poem(&h, Some(7)), "a1\nb2\nc3\n# source=beam seed=7\n");
        assert_eq!(format_poem(&h, None), "a1\nb2\nc3\n");
    }
}
