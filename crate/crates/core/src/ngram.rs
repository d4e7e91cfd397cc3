//! Add-alpha smoothed unigram and bigram costs.
//!
//! Costs are negative natural logs of smoothed probabilities. Every line opens
//! with a start sentinel, and bigrams also link the last word of a line to the
//! first word of the next line of the same haiku. All unseen words share one
//! reserved out-of-vocabulary slot, so each context distributes its mass over
//! `V + 1` outcomes.

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::{Haiku, Vocabulary};
use crate::error::{Error, Result};
use crate::textio::{self, Lines};

pub const FORMAT_HEADER: &str = "HKG-NGRAM 1";
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Vocabulary,
    alpha: f64,
    /// Keyed by (context, next); context `V` is the line-start sentinel.
    bigrams: HashMap<(usize, usize), u64>,
    /// Per context: successors sorted by id, with counts.
    successors: Vec<Vec<(usize, u64)>>,
    /// Per context: number of bigrams leaving it.
    outgoing: Vec<u64>,
}

/// Counts unigrams and bigrams over `corpus`.
pub fn train_ngram(corpus: &[Haiku], alpha: f64) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::from_corpus(corpus);
    let start = vocab.len();
    let mut bigrams: HashMap<(usize, usize), u64> = HashMap::new();
    for haiku in corpus {
        let mut prev_line_end = None;
        for line in haiku.lines() {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| vocab.id(t).expect("vocabulary covers corpus"))
                .collect();
            let Some(&first) = ids.first() else { continue };
            *bigrams.entry((start, first)).or_default() += 1;
            if let Some(last) = prev_line_end {
                *bigrams.entry((last, first)).or_default() += 1;
            }
            for pair in ids.windows(2) {
                *bigrams.entry((pair[0], pair[1])).or_default() += 1;
            }
            prev_line_end = ids.last().copied();
        }
    }
    NGramModel::from_parts(vocab, alpha, bigrams)
}

impl NGramModel {
    fn from_parts(
        vocab: Vocabulary,
        alpha: f64,
        bigrams: HashMap<(usize, usize), u64>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing alpha must be positive, got {alpha}"
            )));
        }
        let contexts = vocab.len() + 1;
        let mut successors = vec![Vec::new(); contexts];
        let mut outgoing = vec![0u64; contexts];
        for (&(ctx, next), &count) in &bigrams {
            successors[ctx].push((next, count));
            outgoing[ctx] += count;
        }
        for list in &mut successors {
            list.sort_unstable();
        }
        Ok(NGramModel {
            vocab,
            alpha,
            bigrams,
            successors,
            outgoing,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn total_tokens(&self) -> u64 {
        self.vocab.total()
    }

    fn start_context(&self) -> usize {
        self.vocab.len()
    }

    /// Denominator mass beyond the observed counts: alpha for each word plus OOV.
    fn smoothing_mass(&self) -> f64 {
        self.alpha * (self.vocab.len() + 1) as f64
    }

    pub fn unigram_count(&self, word: &str) -> u64 {
        self.vocab.id(word).map_or(0, |id| self.vocab.count(id))
    }

    pub fn bigram_count(&self, prev: &str, next: &str) -> u64 {
        match (self.vocab.id(prev), self.vocab.id(next)) {
            (Some(p), Some(n)) => self.bigrams.get(&(p, n)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// `-ln P(word)`; finite for unseen words.
    pub fn unigram_cost(&self, word: &str) -> f64 {
        let count = self.unigram_count(word) as f64;
        -((count + self.alpha) / (self.total_tokens() as f64 + self.smoothing_mass())).ln()
    }

    fn context_cost(&self, ctx: Option<usize>, next: &str) -> f64 {
        let (pair, context_total) = match ctx {
            Some(c) => {
                let pair = self
                    .vocab
                    .id(next)
                    .and_then(|n| self.bigrams.get(&(c, n)).copied())
                    .unwrap_or(0);
                (pair, self.outgoing[c])
            }
            None => (0, 0),
        };
        -((pair as f64 + self.alpha) / (context_total as f64 + self.smoothing_mass())).ln()
    }

    /// `-ln P(next | prev)`; either word may be out of vocabulary.
    pub fn bigram_cost(&self, prev: &str, next: &str) -> f64 {
        self.context_cost(self.vocab.id(prev), next)
    }

    /// `-ln P(next | start of line)`.
    pub fn start_cost(&self, next: &str) -> f64 {
        self.context_cost(Some(self.start_context()), next)
    }

    /// Vocabulary word with the lowest bigram cost after `prev`, skipping
    /// `banned`. Equal costs resolve to the lexicographically smallest word.
    pub fn argmin_next(&self, prev: &str, banned: &[&str]) -> Result<String> {
        if self.vocab.is_empty() {
            return Err(Error::VocabTooSmall(0, 1));
        }
        let is_banned = |id: usize| banned.contains(&self.vocab.word(id));
        // observed successors beat every unseen word; among them the highest
        // count wins and ids are already in lexicographic order
        let best_seen = self
            .vocab
            .id(prev)
            .into_iter()
            .flat_map(|p| self.successors[p].iter())
            .filter(|(id, _)| !is_banned(*id))
            .fold(None, |best: Option<(usize, u64)>, &(id, count)| match best {
                Some((_, c)) if c >= count => best,
                _ => Some((id, count)),
            });
        let id = match best_seen {
            Some((id, _)) => id,
            None => (0..self.vocab.len())
                .find(|&id| !is_banned(id))
                .ok_or(Error::AllWordsBanned)?,
        };
        Ok(self.vocab.word(id).to_owned())
    }

    /// Most frequent word; ties go to the lexicographically smallest.
    pub fn unigram_argmin(&self, banned: &[&str]) -> Result<String> {
        let counts = self.vocab.counts();
        (0..self.vocab.len())
            .filter(|&id| !banned.contains(&self.vocab.word(id)))
            .fold(None, |best: Option<usize>, id| match best {
                Some(b) if counts[b] >= counts[id] => best,
                _ => Some(id),
            })
            .map(|id| self.vocab.word(id).to_owned())
            .ok_or(Error::AllWordsBanned)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\n");
        out.push_str(&format!("alpha {}\n", textio::fmt_f64(self.alpha)));
        out.push_str(&format!("vocab {}\n", self.vocab.len()));
        for (word, count) in self.vocab.words().iter().zip(self.vocab.counts()) {
            out.push_str(&format!("{word} {count}\n"));
        }
        out.push_str(&format!("bigrams {}\n", self.bigrams.len()));
        for (ctx, list) in self.successors.iter().enumerate() {
            for &(next, count) in list {
                if ctx == self.start_context() {
                    out.push_str(&format!("^ {next} {count}\n"));
                } else {
                    out.push_str(&format!("{ctx} {next} {count}\n"));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new("ngram", text);
        lines.expect(FORMAT_HEADER)?;
        let alpha: f64 = lines.parsed("alpha")?;
        let n_vocab: usize = lines.parsed("vocab")?;
        let mut pairs = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            let line = lines.next_line()?;
            let (word, count) = line
                .rsplit_once(' ')
                .ok_or_else(|| lines.err("expected `word count`"))?;
            pairs.push((word.to_owned(), lines.parse::<u64>(count)?));
        }
        let vocab = Vocabulary::from_counts(pairs);
        if vocab.len() != n_vocab {
            return Err(lines.err("duplicate vocabulary words"));
        }
        let n_bigrams: usize = lines.parsed("bigrams")?;
        let mut bigrams = HashMap::with_capacity(n_bigrams);
        for _ in 0..n_bigrams {
            let line = lines.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            let [ctx, next, count] = parts[..] else {
                return Err(lines.err("expected `context next count`"));
            };
            let ctx = if ctx == "^" { n_vocab } else { lines.parse(ctx)? };
            let next: usize = lines.parse(next)?;
            if ctx > n_vocab || next >= n_vocab {
                return Err(lines.err("word id out of range"));
            }
            bigrams.insert((ctx, next), lines.parse::<u64>(count)?);
        }
        Self::from_parts(vocab, alpha, bigrams)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_to_string(path)?)
    }
}
