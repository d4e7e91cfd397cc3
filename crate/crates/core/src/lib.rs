//! Generate the second and third lines of a haiku from its first line.
//!
//! Three interchangeable engines share one corpus pipeline:
//!
//! - [`generate::generate_greedy`]: picks the lowest bigram-cost word until each
//!   line reaches its syllable budget.
//! - [`generate::generate_beam`]: beam search over the words most similar to the
//!   previous one, scored against a learned similarity predictor.
//! - [`rnn::generate_rnn`]: character- or word-level LSTM with Gumbel-noise sampling.
//!
//! Supporting pieces are the corpus cleaner ([`corpus`]), the syllable counter
//! ([`syllable`]), the smoothed n-gram model ([`ngram`]), skip-gram embeddings
//! ([`embedding`]), the linear similarity regressor ([`simpredictor`]) and the
//! blind-survey tooling ([`evalharness`]).

pub mod corpus;
pub mod embedding;
mod error;
pub mod evalharness;
pub mod generate;
pub mod ngram;
pub mod rnn;
pub mod simpredictor;
pub mod syllable;
pub mod synthetic;
mod textio;

pub use corpus::{CorpusSplit, Haiku, RawRecord, Source, Vocabulary};
pub use error::{Error, Result};

/// Deterministic RNG used by every seeded stage.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub(crate) fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
