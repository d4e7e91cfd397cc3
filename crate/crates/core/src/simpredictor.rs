//! Linear regressor predicting how similar the next word will be to the
//! previous one, given the words of the line so far.
//!
//! Features per prefix: a bias, the prefix length, the unigram cost of the
//! last word, the mean and last bigram cost along the prefix, and a one-hot
//! hash bucket of the last word. Lengths are divided by [`LENGTH_SCALE`] and
//! costs by [`COST_SCALE`] so every dense feature sits near unit range.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::corpus::Haiku;
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::ngram::NGramModel;
use crate::textio::{self, Lines};

pub const FORMAT_HEADER: &str = "HKG-SIM 1";
pub const DEFAULT_BUCKETS: usize = 1024;
pub const LENGTH_SCALE: f64 = 10.0;
pub const COST_SCALE: f64 = 10.0;

/// Dense features before the hash buckets.
pub const DENSE_FEATURES: usize = 5;

/// Floor of the linearly decayed learning rate, as a fraction of the start.
pub const MIN_LR_FRACTION: f64 = 1e-4;

/// Validation error is recorded every this many iterations.
pub const TRACE_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimExample {
    /// Words of the line before the word being predicted.
    pub prefix: Vec<String>,
    /// Similarity between the last prefix word and the following word.
    pub target: f64,
}

/// Sparse view of a feature vector: dense part plus one active bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub dense: [f64; DENSE_FEATURES],
    pub bucket: usize,
}

impl Features {
    /// Expands to the full `DENSE_FEATURES + buckets` vector.
    pub fn to_dense(&self, buckets: usize) -> Vec<f64> {
        let mut v = vec![0.0; DENSE_FEATURES + buckets];
        v[..DENSE_FEATURES].copy_from_slice(&self.dense);
        v[DENSE_FEATURES + self.bucket] = 1.0;
        v
    }

    fn dot(&self, weights: &[f64]) -> f64 {
        let dense: f64 = self.dense.iter().zip(weights).map(|(x, w)| x * w).sum();
        dense + weights[DENSE_FEATURES + self.bucket]
    }
}

/// 64-bit FNV-1a, used so bucket assignment is stable across platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn bucket_of(word: &str, buckets: usize) -> usize {
    (fnv1a(word.as_bytes()) % buckets as u64) as usize
}

/// Features of a prefix. A pure function of its arguments.
pub fn featurize<S: AsRef<str>>(prefix: &[S], ngram: &NGramModel, buckets: usize) -> Features {
    let Some(last) = prefix.last().map(AsRef::as_ref) else {
        return Features {
            dense: [1.0, 0.0, 0.0, 0.0, 0.0],
            bucket: bucket_of("", buckets),
        };
    };
    let mut bigram_costs = Vec::with_capacity(prefix.len());
    bigram_costs.push(ngram.start_cost(prefix[0].as_ref()));
    for pair in prefix.windows(2) {
        bigram_costs.push(ngram.bigram_cost(pair[0].as_ref(), pair[1].as_ref()));
    }
    let mean = bigram_costs.iter().sum::<f64>() / bigram_costs.len() as f64;
    let last_cost = *bigram_costs.last().expect("non-empty prefix");
    Features {
        dense: [
            1.0,
            prefix.len() as f64 / LENGTH_SCALE,
            ngram.unigram_cost(last) / COST_SCALE,
            mean / COST_SCALE,
            last_cost / COST_SCALE,
        ],
        bucket: bucket_of(last, buckets),
    }
}

/// One example per word position after the first in every line, using only
/// in-vocabulary words. Returns the examples and the number of lines too
/// short to yield any.
pub fn build_examples(corpus: &[Haiku], emb: &EmbeddingModel) -> (Vec<SimExample>, usize) {
    let mut examples = Vec::new();
    let mut short_lines = 0;
    for line in corpus.iter().flat_map(|h| h.lines()) {
        let words: Vec<&str> = line.split_whitespace().filter(|w| emb.contains(w)).collect();
        if words.len() < 2 {
            short_lines += 1;
            continue;
        }
        for i in 1..words.len() {
            let target = emb
                .similarity(words[i - 1], words[i])
                .expect("words were filtered to the vocabulary");
            examples.push(SimExample {
                prefix: words[..i].iter().map(|w| w.to_string()).collect(),
                target,
            });
        }
    }
    (examples, short_lines)
}

/// What one training iteration consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IterationUnit {
    /// One minibatch update drawn from a shuffled stream of examples.
    #[default]
    Batch,
    /// One full pass over the shuffled training set.
    Pass,
}

impl IterationUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            IterationUnit::Batch => "batch",
            IterationUnit::Pass => "pass",
        }
    }
}

impl std::str::FromStr for IterationUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(IterationUnit::Batch),
            "pass" => Ok(IterationUnit::Pass),
            other => Err(Error::InvalidArgument(format!("unknown iteration unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub unit: IterationUnit,
    /// Examples averaged per update; capped at the training set size.
    pub batch_size: usize,
    pub seed: u64,
    pub buckets: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            learning_rate: 0.01,
            iterations: 1000,
            unit: IterationUnit::Batch,
            batch_size: 32,
            seed: 0,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSimilarityModel {
    weights: Vec<f64>,
    buckets: usize,
    /// `(iteration, mean absolute validation error)`, starting at iteration 0.
    trace: Vec<(usize, f64)>,
}

/// Squared loss `0.5 (w . phi - target)^2` and its gradient in `w`.
pub fn squared_loss_grad(weights: &[f64], phi: &[f64], target: f64) -> (f64, Vec<f64>) {
    let residual: f64 = weights.iter().zip(phi).map(|(w, x)| w * x).sum::<f64>() - target;
    (0.5 * residual * residual, phi.iter().map(|x| residual * x).collect())
}

fn mean_abs_error(weights: &[f64], data: &[(Features, f64)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|(f, t)| (f.dot(weights) - t).abs()).sum::<f64>() / data.len() as f64
}

/// Fits the regressor with minibatch SGD from zero weights.
///
/// The learning rate decays linearly to [`MIN_LR_FRACTION`] of its start
/// over the run.
///
/// The trace records validation error before training and after every
/// [`TRACE_EVERY`] iterations; with no validation examples the training set
/// is scored instead.
pub fn train_sim(
    train: &[SimExample],
    validation: &[SimExample],
    ngram: &NGramModel,
    cfg: &SimConfig,
) -> Result<LinearSimilarityModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if cfg.buckets == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(
            "buckets, batch size and learning rate must be positive".into(),
        ));
    }
    let encode = |examples: &[SimExample]| -> Vec<(Features, f64)> {
        examples
            .iter()
            .map(|e| (featurize(&e.prefix, ngram, cfg.buckets), e.target))
            .collect()
    };
    let train_set = encode(train);
    let val_set = if validation.is_empty() { train_set.clone() } else { encode(validation) };

    let mut weights = vec![0.0; DENSE_FEATURES + cfg.buckets];
    let mut trace = vec![(0, mean_abs_error(&weights, &val_set))];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = crate::seeded_rng(cfg.seed);
    let batch = cfg.batch_size.min(order.len());
    let updates = match cfg.unit {
        IterationUnit::Batch => 1,
        IterationUnit::Pass => order.len().div_ceil(batch),
    };
    // Position in the shuffled stream; reshuffled whenever it runs out.
    let mut pos = order.len();
    let total_updates = (cfg.iterations * updates).max(1) as f64;
    let mut done = 0usize;
    let mut residuals = Vec::with_capacity(batch);
    for iteration in 1..=cfg.iterations {
        for _ in 0..updates {
            residuals.clear();
            for _ in 0..batch {
                if pos == order.len() {
                    order.shuffle(&mut rng);
                    pos = 0;
                }
                let (features, target) = &train_set[order[pos]];
                pos += 1;
                residuals.push((features, features.dot(&weights) - target));
            }
            let lr = cfg.learning_rate * (1.0 - done as f64 / total_updates).max(MIN_LR_FRACTION);
            done += 1;
            for (features, r) in &residuals {
                let step = lr * r / batch as f64;
                for (w, x) in weights.iter_mut().zip(&features.dense) {
                    *w -= step * x;
                }
                weights[DENSE_FEATURES + features.bucket] -= step;
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged {
                epoch: iteration,
                loss: f64::NAN,
            });
        }
        if iteration % TRACE_EVERY == 0 {
            trace.push((iteration, mean_abs_error(&weights, &val_set)));
        }
    }
    Ok(LinearSimilarityModel {
        weights,
        buckets: cfg.buckets,
        trace,
    })
}

impl LinearSimilarityModel {
    pub fn from_weights(weights: Vec<f64>, buckets: usize) -> Result<Self> {
        if weights.len() != DENSE_FEATURES + buckets || buckets == 0 {
            return Err(Error::InvalidArgument(format!(
                "expected {} weights, got {}",
                DENSE_FEATURES + buckets,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(LinearSimilarityModel {
            weights,
            buckets,
            trace: Vec::new(),
        })
    }

    pub fn zero(buckets: usize) -> Self {
        Self::from_weights(vec![0.0; DENSE_FEATURES + buckets], buckets).expect("valid shape")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn trace(&self) -> &[(usize, f64)] {
        &self.trace
    }

    /// Unclamped `w . phi(prefix)`.
    pub fn raw_prediction<S: AsRef<str>>(&self, prefix: &[S], ngram: &NGramModel) -> f64 {
        featurize(prefix, ngram, self.buckets).dot(&self.weights)
    }

    /// Predicted similarity of the next word, clamped to `[-1, 1]`.
    pub fn predict_similarity<S: AsRef<str>>(&self, prefix: &[S], ngram: &NGramModel) -> f64 {
        self.raw_prediction(prefix, ngram).clamp(-1.0, 1.0)
    }

    /// The trace as `iteration,mean_abs_error` CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,mean_abs_error\n");
        for (it, err) in &self.trace {
            out.push_str(&format!("{it},{}\n", textio::fmt_f64(*err)));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\nbuckets {}\nweights {}\n", self.buckets, self.weights.len());
        textio::push_row(&mut out, &self.weights);
        out.push_str(&format!("trace {}\n", self.trace.len()));
        for (it, err) in &self.trace {
            out.push_str(&format!("{it} {}\n", textio::fmt_f64(*err)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new("similarity model", text);
        lines.expect(FORMAT_HEADER)?;
        let buckets: usize = lines.parsed("buckets")?;
        let n: usize = lines.parsed("weights")?;
        let weights = lines.floats(n)?;
        let mut model = Self::from_weights(weights, buckets)?;
        let n_trace: usize = lines.parsed("trace")?;
        for _ in 0..n_trace {
            let line = lines.next_line()?;
            let (it, err) = line
                .split_once(' ')
                .ok_or_else(|| lines.err("expected `iteration error`"))?;
            model.trace.push((lines.parse(it)?, lines.parse(err)?));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_to_string(path)?)
    }
}

/// Trailing moving average of a trace over `window` iterations.
pub fn smooth_trace(trace: &[(usize, f64)], window: usize) -> Vec<(usize, f64)> {
    trace
        .iter()
        .map(|&(it, _)| {
            let inside: Vec<f64> = trace
                .iter()
                .filter(|(j, _)| *j <= it && *j + window > it)
                .map(|&(_, e)| e)
                .collect();
            (it, inside.iter().sum::<f64>() / inside.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, Vocabulary};
    use crate::ngram::train_ngram;

    fn haiku(a: &str, b: &str, c: &str) -> Haiku {
        Haiku::new([a.into(), b.into(), c.into()], Source::Human).unwrap()
    }

    fn toy_ngram() -> NGramModel {
        train_ngram(&[haiku("a b c", "b c", "a c")], 1.0).unwrap()
    }

    fn hand_embedding() -> EmbeddingModel {
        let vocab = Vocabulary::from_counts([("a", 1), ("b", 1), ("c", 1)].map(|(w, c)| (w.to_string(), c)));
        let input = vec![1.0, 0.0, 0.6, 0.8, 0.0, 1.0];
        EmbeddingModel::from_vectors(vocab, 2, input, vec![0.0; 6]).unwrap()
    }

    #[test]
    fn examples_follow_line_prefixes() {
        let emb = hand_embedding();
        let (ex, short) = build_examples(&[haiku("a b c", "a", "zzz b")], &emb);
        assert_eq!(short, 2);
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].prefix, ["a"]);
        assert!((ex[0].target - 0.6).abs() < 1e-12);
        assert_eq!(ex[1].prefix, ["a", "b"]);
        assert!((ex[1].target - 0.8).abs() < 1e-12);
        assert!(ex.iter().all(|e| (-1.0..=1.0).contains(&e.target)));
    }

    #[test]
    fn features_by_hand_for_two_word_prefix() {
        let ng = toy_ngram();
        let f = featurize(&["a", "b"], &ng, 16);
        // V = 3, tokens: a b c b c a c (7); alpha 1
        // unigram(b) = -ln((2 + 1) / (7 + 4))
        let uni_b = -(3.0f64 / 11.0).ln();
        // start -> a: starts are a, b, a -> count 2 of 3
        let start_a = -((2.0 + 1.0) / (3.0 + 4.0f64)).ln();
        // a -> b: a is followed by b (line 1) only; "a c" line 3 gives a -> c
        let a_b = -((1.0 + 1.0) / (2.0 + 4.0f64)).ln();
        let expected = [1.0, 0.2, uni_b / 10.0, (start_a + a_b) / 20.0, a_b / 10.0];
        for (got, want) in f.dense.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(f.bucket, bucket_of("b", 16));

        let mut weights = vec![0.0; DENSE_FEATURES + 16];
        weights[..5].copy_from_slice(&[0.5, -1.0, 0.25, 2.0, -0.5]);
        weights[DENSE_FEATURES + f.bucket] = 0.125;
        let model = LinearSimilarityModel::from_weights(weights.clone(), 16).unwrap();
        let manual: f64 = expected.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() + 0.125;
        assert!((model.raw_prediction(&["a", "b"], &ng) - manual).abs() < 1e-12);
    }

    #[test]
    fn predictions_clamp_and_zero_model_predicts_zero() {
        let ng = toy_ngram();
        assert_eq!(LinearSimilarityModel::zero(8).predict_similarity(&["a"], &ng), 0.0);
        let mut w = vec![0.0; DENSE_FEATURES + 8];
        w[0] = 3.7;
        let m = LinearSimilarityModel::from_weights(w.clone(), 8).unwrap();
        assert_eq!(m.raw_prediction(&["a"], &ng), 3.7);
        assert_eq!(m.predict_similarity(&["a"], &ng), 1.0);
        w[0] = -3.7;
        let m = LinearSimilarityModel::from_weights(w, 8).unwrap();
        assert_eq!(m.predict_similarity(&["a"], &ng), -1.0);
    }

    #[test]
    fn repeated_example_converges() {
        let ng = toy_ngram();
        let ex = vec![SimExample { prefix: vec!["a".into(), "b".into()], target: 0.42 }];
        let cfg = SimConfig { learning_rate: 0.1, iterations: 200, seed: 1, buckets: 8, ..Default::default() };
        let m = train_sim(&ex, &[], &ng, &cfg).unwrap();
        assert!((m.predict_similarity(&ex[0].prefix, &ng) - 0.42).abs() < 1e-3);
        assert_eq!(m.trace().len(), 21);
        assert!(m.trace().windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn units_agree_on_a_single_example() {
        let ng = toy_ngram();
        let ex = vec![SimExample { prefix: vec!["b".into()], target: -0.2 }];
        let run = |unit| {
            let cfg = SimConfig { iterations: 40, unit, buckets: 8, ..Default::default() };
            train_sim(&ex, &[], &ng, &cfg).unwrap()
        };
        assert_eq!(run(IterationUnit::Batch), run(IterationUnit::Pass));
        assert_eq!("pass".parse::<IterationUnit>().unwrap(), IterationUnit::Pass);
        assert!("epoch".parse::<IterationUnit>().is_err());
    }

    #[test]
    fn zero_iterations_leave_zero_weights() {
        let ng = toy_ngram();
        let ex = vec![SimExample { prefix: vec!["a".into()], target: 0.5 }];
        let m = train_sim(&ex, &[], &ng, &SimConfig { iterations: 0, ..Default::default() }).unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.0));
        assert_eq!(m.predict_similarity(&["c", "b"], &ng), 0.0);
        assert!(train_sim(&[], &[], &ng, &SimConfig::default()).is_err());
        assert!(train_sim(&ex, &[], &ng, &SimConfig { batch_size: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn squared_loss_gradient_matches_finite_differences() {
        let ng = toy_ngram();
        let phi = featurize(&["b", "c", "a"], &ng, 4).to_dense(4);
        let weights: Vec<f64> = (0..phi.len()).map(|i| 0.3 - 0.07 * i as f64).collect();
        let target = 0.35;
        let (_, grad) = squared_loss_grad(&weights, &phi, target);
        let h = 1e-6;
        for i in 0..weights.len() {
            let mut plus = weights.clone();
            let mut minus = weights.clone();
            plus[i] += h;
            minus[i] -= h;
            let numeric = (squared_loss_grad(&plus, &phi, target).0 - squared_loss_grad(&minus, &phi, target).0) / (2.0 * h);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-8);
            assert!((grad[i] - numeric).abs() / denom < 1e-6 || (grad[i] - numeric).abs() < 1e-10, "{i}");
        }
    }

    #[test]
    fn featurize_is_pure() {
        let ng = toy_ngram();
        assert_eq!(featurize(&["a", "c"], &ng, 32), featurize(&["a", "c"], &ng, 32));
    }

    #[test]
    fn text_format_round_trips() {
        let ng = toy_ngram();
        let ex = vec![SimExample { prefix: vec!["a".into()], target: 0.5 }];
        let m = train_sim(&ex, &ex, &ng, &SimConfig { iterations: 30, buckets: 4, ..Default::default() }).unwrap();
        let back = LinearSimilarityModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(m.trace_csv().starts_with("iteration,mean_abs_error\n0,"));
    }

    #[test]
    fn smoothing_averages_trailing_window() {
        let trace = [(0, 4.0), (10, 2.0), (20, 0.0)];
        let s = smooth_trace(&trace, 20);
        assert_eq!(s, vec![(0, 4.0), (10, 3.0), (20, 1.0)]);
    }
}
