//! Writes a raw haiku dataset built from the synthetic themed corpus.
//!
//! Usage: `cargo run -p haiku-core --example sample_data -- OUT [N] [SEED]`

use std::fmt::Write as _;

use haiku_core::synthetic::themed_corpus;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| {
        eprintln!("usage: sample_data OUT [N] [SEED]");
        std::process::exit(1);
    });
    let n = args.next().map_or(400, |v| v.parse().expect("N is a count"));
    let seed = args.next().map_or(1, |v| v.parse().expect("SEED is an integer"));
    let mut text = String::new();
    for (i, h) in themed_corpus(n, seed).iter().enumerate() {
        // rotate through the separator styles the cleaner accepts
        let sep = [" / ", "$", "\\n", "\t"][i % 4];
        writeln!(text, "{}", h.lines().join(sep)).unwrap();
    }
    std::fs::write(&out, text).expect("write output");
    eprintln!("wrote {n} haikus to {out}");
}
