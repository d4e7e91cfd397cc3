//! Skip-gram word vectors trained with negative sampling.
//!
//! Similarity is the cosine of the input ("center") vectors. Context windows
//! span a whole haiku, line breaks included.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::corpus::{Haiku, Vocabulary};
use crate::error::{Error, Result};
use crate::textio::{self, Lines};

pub const FORMAT_HEADER: &str = "HKG-EMB 1";

/// Number of candidate successors the beam search asks for.
pub const DEFAULT_K: usize = 20;

/// Exponent applied to unigram counts for the noise distribution.
const NOISE_POWER: f64 = 0.75;

pub const MIN_LR_FRACTION: f64 = 1e-4;

/// ChaCha stream used for the negatives that score each epoch.
const EVAL_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.window == 0 || self.negatives == 0 {
            return Err(Error::InvalidArgument(
                "dim must be at least 2; window and negatives must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    unit: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln sigmoid(x)` without overflow for large `|x|`.
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized_rows(data: &[f64], dim: usize) -> Vec<f64> {
    let mut unit = data.to_vec();
    for row in unit.chunks_mut(dim) {
        let norm = dot(row, row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    unit
}

/// Loss and gradient of one (center, context) pair with its noise words.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    /// Gradient with respect to the center word's input vector.
    pub center: Vec<f64>,
    /// Gradients with respect to output vectors, one entry per distinct word.
    pub outputs: Vec<(usize, Vec<f64>)>,
}

impl EmbeddingModel {
    /// Wraps existing vectors (row-major, `vocab.len() * dim` each).
    pub fn from_vectors(vocab: Vocabulary, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("embedding dim must be at least 2".into()));
        }
        let expected = vocab.len() * dim;
        if input.len() != expected || output.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} values per matrix, got {} and {}",
                input.len(),
                output.len()
            )));
        }
        if input.iter().chain(&output).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        let unit = normalized_rows(&input, dim);
        Ok(EmbeddingModel {
            vocab,
            dim,
            input,
            output,
            unit,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains(word)
    }

    pub fn input_vector(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    fn unit_vector(&self, id: usize) -> &[f64] {
        &self.unit[id * self.dim..(id + 1) * self.dim]
    }

    fn id(&self, word: &str) -> Result<usize> {
        self.vocab
            .id(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    /// Cosine similarity of the input vectors of `a` and `b`.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.similarity_ids(self.id(a)?, self.id(b)?))
    }

    pub fn similarity_ids(&self, a: usize, b: usize) -> f64 {
        dot(self.unit_vector(a), self.unit_vector(b)).clamp(-1.0, 1.0)
    }

    /// The `k` words closest to `word`, most similar first, excluding `word`.
    /// Ties go to the lexicographically smaller word.
    pub fn k_most_similar(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let target = self.id(word)?;
        let mut scored: Vec<(usize, f64)> = (0..self.vocab.len())
            .filter(|&id| id != target)
            .map(|id| (id, self.similarity_ids(target, id)))
            .collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(id, s)| (self.vocab.word(id).to_owned(), s))
            .collect())
    }

    /// Negative-sampling loss of one (center, context) pair:
    /// `-ln s(u_ctx . v_c) - sum_neg ln s(-u_neg . v_c)`.
    pub fn pair_loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let v = self.input_vector(center);
        let mut loss = -ln_sigmoid(dot(self.output_vector(context), v));
        for &neg in negatives {
            loss -= ln_sigmoid(-dot(self.output_vector(neg), v));
        }
        loss
    }

    /// [`EmbeddingModel::pair_loss`] together with its exact gradient.
    pub fn pair_gradient(&self, center: usize, context: usize, negatives: &[usize]) -> PairGradient {
        let v = self.input_vector(center);
        let mut grad_center = vec![0.0; self.dim];
        let mut outputs: Vec<(usize, Vec<f64>)> = Vec::with_capacity(negatives.len() + 1);
        let mut add_output = |id: usize, coef: f64, grad_center: &mut Vec<f64>| {
            let u = self.output_vector(id);
            for (g, ui) in grad_center.iter_mut().zip(u) {
                *g += coef * ui;
            }
            let slot = match outputs.iter().position(|(o, _)| *o == id) {
                Some(pos) => pos,
                None => {
                    outputs.push((id, vec![0.0; self.dim]));
                    outputs.len() - 1
                }
            };
            for (g, vi) in outputs[slot].1.iter_mut().zip(v) {
                *g += coef * vi;
            }
        };

        let score = dot(self.output_vector(context), v);
        let mut loss = -ln_sigmoid(score);
        add_output(context, sigmoid(score) - 1.0, &mut grad_center);
        for &neg in negatives {
            let score = dot(self.output_vector(neg), v);
            loss -= ln_sigmoid(-score);
            add_output(neg, sigmoid(score), &mut grad_center);
        }
        PairGradient {
            loss,
            center: grad_center,
            outputs,
        }
    }

    fn apply(&mut self, center: usize, grad: &PairGradient, lr: f64) {
        let dim = self.dim;
        for (x, g) in self.input[center * dim..(center + 1) * dim].iter_mut().zip(&grad.center) {
            *x -= lr * g;
        }
        for (id, g) in &grad.outputs {
            for (x, gi) in self.output[id * dim..(id + 1) * dim].iter_mut().zip(g) {
                *x -= lr * gi;
            }
        }
    }

    pub fn input_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn output_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    /// Recomputes cached unit vectors after editing the matrices directly.
    pub fn refresh(&mut self) {
        self.unit = normalized_rows(&self.input, self.dim);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\ndim {}\nvocab {}\n", self.dim, self.vocab.len());
        for (word, count) in self.vocab.words().iter().zip(self.vocab.counts()) {
            out.push_str(&format!("{word} {count}\n"));
        }
        out.push_str("input\n");
        for row in self.input.chunks(self.dim) {
            textio::push_row(&mut out, row);
        }
        out.push_str("output\n");
        for row in self.output.chunks(self.dim) {
            textio::push_row(&mut out, row);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new("embedding", text);
        lines.expect(FORMAT_HEADER)?;
        let dim: usize = lines.parsed("dim")?;
        let n: usize = lines.parsed("vocab")?;
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next_line()?;
            let (word, count) = line
                .rsplit_once(' ')
                .ok_or_else(|| lines.err("expected `word count`"))?;
            pairs.push((word.to_owned(), lines.parse::<u64>(count)?));
        }
        let vocab = Vocabulary::from_counts(pairs);
        if vocab.len() != n {
            return Err(lines.err("duplicate vocabulary words"));
        }
        let mut read_matrix = |name: &str| -> Result<Vec<f64>> {
            lines.expect(name)?;
            let mut m = Vec::with_capacity(n * dim);
            for _ in 0..n {
                m.extend(lines.floats(dim)?);
            }
            Ok(m)
        };
        let input = read_matrix("input")?;
        let output = read_matrix("output")?;
        Self::from_vectors(vocab, dim, input, output)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_to_string(path)?)
    }
}

/// Seeded initial model: input vectors uniform in `(-0.5/dim, 0.5/dim)`,
/// output vectors zero.
fn init_model(vocab: Vocabulary, dim: usize, rng: &mut impl Rng) -> Result<EmbeddingModel> {
    let n = vocab.len() * dim;
    let input: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect();
    EmbeddingModel::from_vectors(vocab, dim, input, vec![0.0; n])
}

/// Trains skip-gram vectors. Same corpus and config give bitwise-equal models.
pub fn train_sgns(corpus: &[Haiku], cfg: &SgnsConfig) -> Result<EmbeddingModel> {
    fit(corpus, cfg, false).map(|(m, _)| m)
}

/// Like [`train_sgns`], also returning the training loss after each epoch.
///
/// Each epoch's loss is the mean over its pairs of the loss just before the
/// pair's update. It is scored against negatives from a separate seeded
/// stream that restarts every epoch, so every epoch is scored on the same
/// draws. The trained model is the same as [`train_sgns`] gives.
pub fn train_sgns_with_trace(corpus: &[Haiku], cfg: &SgnsConfig) -> Result<(EmbeddingModel, Vec<f64>)> {
    fit(corpus, cfg, true)
}

/// Positions within `window` of `i` in a sentence of length `len`, including `i`.
fn window_span(i: usize, len: usize, window: usize) -> std::ops::Range<usize> {
    i.saturating_sub(window)..(i + window + 1).min(len)
}

/// Calls `f(center, context)` for every skip-gram pair, in corpus order.
fn for_each_pair(sentences: &[Vec<usize>], window: usize, mut f: impl FnMut(usize, usize)) {
    for ids in sentences {
        for (i, &center) in ids.iter().enumerate() {
            for j in window_span(i, ids.len(), window) {
                if j != i {
                    f(center, ids[j]);
                }
            }
        }
    }
}

/// Draws up to `k` noise words, dropping any that equal `context`.
fn draw_negatives(
    noise: &WeightedIndex<f64>,
    k: usize,
    context: usize,
    rng: &mut impl Rng,
    out: &mut Vec<usize>,
) {
    out.clear();
    for _ in 0..k {
        let neg = noise.sample(rng);
        if neg != context {
            out.push(neg);
        }
    }
}

fn fit(corpus: &[Haiku], cfg: &SgnsConfig, with_trace: bool) -> Result<(EmbeddingModel, Vec<f64>)> {
    cfg.validate()?;
    let vocab = Vocabulary::from_corpus(corpus);
    if vocab.len() < 2 {
        return Err(Error::VocabTooSmall(vocab.len(), 2));
    }
    let mut rng = crate::seeded_rng(cfg.seed);
    let noise = WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(NOISE_POWER)))
        .expect("vocabulary counts are positive");
    let mut model = init_model(vocab, cfg.dim, &mut rng)?;

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|h| h.tokens().map(|t| model.vocab.id(t).expect("vocabulary covers corpus")).collect())
        .collect();
    let mut per_epoch = 0usize;
    for_each_pair(&sentences, cfg.window, |_, _| per_epoch += 1);
    let total_pairs = (per_epoch * cfg.epochs).max(1) as f64;
    let mut seen = 0usize;

    let mut trace = Vec::with_capacity(if with_trace { cfg.epochs } else { 0 });
    let mut negatives = Vec::with_capacity(cfg.negatives);
    let mut scoring = Vec::with_capacity(cfg.negatives);
    for _ in 0..cfg.epochs {
        let mut eval_rng = crate::seeded_rng(cfg.seed);
        eval_rng.set_stream(EVAL_STREAM);
        let mut total = 0.0;
        for_each_pair(&sentences, cfg.window, |center, context| {
            if with_trace {
                draw_negatives(&noise, cfg.negatives, context, &mut eval_rng, &mut scoring);
                total += model.pair_loss(center, context, &scoring);
            }
            draw_negatives(&noise, cfg.negatives, context, &mut rng, &mut negatives);
            let grad = model.pair_gradient(center, context, &negatives);
            let lr = cfg.learning_rate * (1.0 - seen as f64 / total_pairs).max(MIN_LR_FRACTION);
            seen += 1;
            model.apply(center, &grad, lr);
        });
        if with_trace {
            trace.push(if per_epoch == 0 { 0.0 } else { total / per_epoch as f64 });
        }
    }
    model.refresh();
    Ok((model, trace))
}
