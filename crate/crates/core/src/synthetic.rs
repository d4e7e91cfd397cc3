//! Seeded toy corpora for demos and tests.
//!
//! The themed corpus imitates short nature poems: each haiku draws most of its
//! words from one theme, so embeddings trained on it form visible clusters.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Haiku, Source};

struct Theme {
    nouns: &'static [&'static str],
    adjectives: &'static [&'static str],
    verbs: &'static [&'static str],
}

const THEMES: [Theme; 6] = [
    Theme {
        nouns: &["snow", "frost", "pine", "ice", "crow", "hearth", "branch", "trees"],
        adjectives: &["cold", "white", "barren", "silent", "frozen", "pale"],
        verbs: &["falls", "settles", "cracks", "hushes", "gathers", "waits"],
    },
    Theme {
        nouns: &["blossom", "rain", "sparrow", "bud", "petal", "meadow", "willow", "stream"],
        adjectives: &["soft", "green", "early", "tender", "misty", "young"],
        verbs: &["opens", "drifts", "sings", "rises", "stirs", "wakes"],
    },
    Theme {
        nouns: &["cicada", "sun", "dust", "wave", "shade", "heat", "field", "noon"],
        adjectives: &["hot", "long", "golden", "lazy", "bright", "dry"],
        verbs: &["burns", "hums", "shimmers", "sleeps", "glares", "drones"],
    },
    Theme {
        nouns: &["leaf", "harvest", "wind", "maple", "goose", "dusk", "apple", "smoke"],
        adjectives: &["red", "late", "brown", "fading", "crisp", "thin"],
        verbs: &["turns", "scatters", "calls", "leaves", "ripens", "sighs"],
    },
    Theme {
        nouns: &["moon", "star", "owl", "lantern", "shadow", "cloud", "temple", "bell"],
        adjectives: &["dark", "quiet", "distant", "empty", "lonely", "deep"],
        verbs: &["glows", "shines", "echoes", "fades", "watches", "rings"],
    },
    Theme {
        nouns: &["tide", "shell", "gull", "shore", "boat", "foam", "reef", "harbor"],
        adjectives: &["salty", "grey", "restless", "wide", "cool", "blue"],
        verbs: &["rolls", "breaks", "cries", "returns", "sways", "washes"],
    },
];

const PREPOSITIONS: &[&str] = &["in", "over", "under", "beside", "across", "through"];

fn pick<'a>(rng: &mut impl Rng, theme: &'a Theme, stray: f64, part: fn(&Theme) -> &'static [&'static str]) -> &'a str {
    let theme = if rng.gen::<f64>() < stray {
        THEMES.choose(rng).expect("themes")
    } else {
        theme
    };
    part(theme).choose(rng).expect("non-empty word list")
}

/// `n` haiku-like poems from a fixed seed.
pub fn themed_corpus(n: usize, seed: u64) -> Vec<Haiku> {
    let mut rng = crate::seeded_rng(seed);
    let noun = |t: &Theme| t.nouns;
    let adj = |t: &Theme| t.adjectives;
    let verb = |t: &Theme| t.verbs;
    let stray = 0.15;
    (0..n)
        .map(|_| {
            let theme = THEMES.choose(&mut rng).expect("themes");
            let mut w = |part: fn(&Theme) -> &'static [&'static str]| pick(&mut rng, theme, stray, part).to_owned();
            let first = match w(noun).len() % 3 {
                0 => format!("{} {}", w(adj), w(noun)),
                1 => format!("the {} {}", w(noun), w(verb)),
                _ => format!("{} {} {}", w(adj), w(noun), w(verb)),
            };
            let prep = PREPOSITIONS[w(noun).len() % PREPOSITIONS.len()];
            let second = match w(verb).len() % 2 {
                0 => format!("{} {} {prep} the {}", w(noun), w(verb), w(noun)),
                _ => format!("the {} {} {} {}", w(adj), w(noun), w(verb), w(adj)),
            };
            let third = match w(adj).len() % 2 {
                0 => format!("{} {}", w(adj), w(noun)),
                _ => format!("{} {} {}", w(noun), w(verb), w(noun)),
            };
            Haiku::new([first, second, third], Source::Human).expect("generated lines are valid")
        })
        .collect()
}

/// Word pairs used by [`paired_corpus`].
pub const PAIRS: [(&str, &str); 12] = [
    ("sun", "moon"),
    ("frog", "pond"),
    ("snow", "pine"),
    ("crow", "dusk"),
    ("tide", "shell"),
    ("bell", "temple"),
    ("leaf", "maple"),
    ("rain", "willow"),
    ("owl", "lantern"),
    ("smoke", "hearth"),
    ("gull", "harbor"),
    ("bee", "clover"),
];

/// Every pair repeated `reps` times, each haiku holding just one pair.
pub fn paired_corpus(pairs: &[(&str, &str)], reps: usize) -> Vec<Haiku> {
    let mut corpus = Vec::with_capacity(pairs.len() * reps);
    for _ in 0..reps {
        for (a, b) in pairs {
            let line = format!("{a} {b}");
            corpus.push(Haiku::new([line.clone(), line.clone(), line], Source::Human).expect("pair lines are valid"));
        }
    }
    corpus
}
