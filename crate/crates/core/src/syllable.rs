//! Syllable counting for line budgets.
//!
//! A vowel-group rule engine with an exceptions lexicon for the words the rules
//! get wrong. Counting never fails at line level: tokens that are not words
//! count as one syllable.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio;

const BUILTIN_EXCEPTIONS: &str = include_str!("../data/syllable_exceptions.txt");

/// Per-word syllable overrides, keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyllableLexicon {
    overrides: HashMap<String, u32>,
}

impl SyllableLexicon {
    /// A lexicon with no overrides; every word goes through the rules.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The exceptions list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_EXCEPTIONS).expect("bundled syllable exceptions are well-formed")
    }

    /// Parses `word count` lines; `#` starts a comment.
    ///
    /// The same word listed twice with different counts is an error, so the
    /// result never depends on entry order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::format("syllable exceptions", i + 1, msg);
            let mut parts = line.split_whitespace();
            let (Some(word), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected `word count`"));
            };
            let count: u32 = count.parse().map_err(|_| bad("count is not an integer"))?;
            if count == 0 {
                return Err(bad("count must be at least 1"));
            }
            lex.insert(word, count).map_err(|_| bad("conflicting duplicate entry"))?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&textio::read_to_string(path)?)
    }

    /// Adds the entries of `other`; conflicting counts are an error.
    pub fn merge(&mut self, other: &SyllableLexicon) -> Result<()> {
        for (word, &count) in &other.overrides {
            self.insert(word, count)?;
        }
        Ok(())
    }

    fn insert(&mut self, word: &str, count: u32) -> Result<()> {
        let key = word.to_lowercase();
        match self.overrides.get(&key) {
            Some(&existing) if existing != count => Err(Error::InvalidArgument(format!(
                "conflicting syllable counts for {key:?}: {existing} and {count}"
            ))),
            _ => {
                self.overrides.insert(key, count);
                Ok(())
            }
        }
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.overrides.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.overrides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overrides.is_empty()
    }
}

fn is_vowel(c: char, position: usize) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u') || (c == 'y' && position > 0)
}

fn is_consonant(c: char) -> bool {
    c.is_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group estimate for a single lowercase word without hyphens.
fn rule_count(word: &str) -> u32 {
    let chars: Vec<char> = word.chars().collect();
    let mut groups = 0u32;
    let mut in_group = false;
    for (i, &c) in chars.iter().enumerate() {
        let vowel = is_vowel(c, i);
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    let n = chars.len();
    if n > 0 && chars[n - 1] == 'e' {
        let consonant_le = n >= 3 && chars[n - 2] == 'l' && is_consonant(chars[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

fn strip_edges(w: &str) -> &str {
    w.trim_matches(|c: char| !c.is_alphabetic())
}

/// Syllables in one word.
///
/// Non-alphabetic edge characters are ignored, hyphenated words are counted
/// per part, and lexicon entries win over the rules.
pub fn count_word(word: &str, lex: &SyllableLexicon) -> Result<u32> {
    let stripped = strip_edges(word);
    if stripped.is_empty() {
        return Err(Error::NotAWord(word.to_owned()));
    }
    let lower = stripped.to_lowercase();
    if let Some(n) = lex.get(&lower) {
        return Ok(n);
    }
    if lower.contains('-') {
        let mut total = 0;
        for part in lower.split('-').map(strip_edges).filter(|p| !p.is_empty()) {
            total += count_word(part, lex)?;
        }
        return Ok(total.max(1));
    }
    Ok(rule_count(&lower))
}

/// Syllable total for a line plus how many tokens fell back to one syllable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LineCount {
    pub syllables: u32,
    pub fallbacks: u32,
}

pub fn count_line_detailed(line: &str, lex: &SyllableLexicon) -> LineCount {
    let mut out = LineCount::default();
    for token in line.split_whitespace() {
        match count_word(token, lex) {
            Ok(n) => out.syllables += n,
            Err(_) => {
                out.syllables += 1;
                out.fallbacks += 1;
            }
        }
    }
    out
}

/// Syllables in a whitespace-separated line. Tokens that are not words count 1.
pub fn count_line(line: &str, lex: &SyllableLexicon) -> u32 {
    count_line_detailed(line, lex).syllables
}

/// Like [`count_word`] but with the one-syllable fallback.
pub fn count_token(token: &str, lex: &SyllableLexicon) -> u32 {
    count_word(token, lex).unwrap_or(1)
}
