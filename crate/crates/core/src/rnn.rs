//! Character- and word-level LSTM language models for haiku continuation.
//!
//! The network is one LSTM layer over a fixed-length window of symbols, then
//! inverted dropout (training only), a dense layer and a softmax over the
//! symbol table. Character models feed one-hot symbols straight into the
//! gates; word models look up a trainable embedding first.
//!
//! All parameters live in one flat vector so optimizers, clipping, gradient
//! checks and checkpoints can treat them uniformly.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{clean_line, Haiku, Source};
use crate::error::{Error, Result};
use crate::textio::{self, Lines};

pub const FORMAT_HEADER: &str = "HKG-RNN 1";

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const WORD_EOL: &str = "<eol>";
pub const CHAR_EOL: &str = "\n";

const PAD_ID: usize = 0;
const UNK_ID: usize = 1;
const EOL_ID: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Char,
    Word,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Char => "char",
            Level::Word => "word",
        }
    }

    pub fn source(self) -> Source {
        match self {
            Level::Char => Source::RnnChar,
            Level::Word => Source::RnnWord,
        }
    }

    /// Default context length in symbols.
    pub fn default_window(self) -> usize {
        match self {
            Level::Char => 10,
            Level::Word => 6,
        }
    }

    fn split(self, line: &str) -> Vec<String> {
        match self {
            Level::Char => line.chars().map(String::from).collect(),
            Level::Word => line.split_whitespace().map(str::to_owned).collect(),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(Level::Char),
            "word" => Ok(Level::Word),
            other => Err(Error::InvalidArgument(format!("unknown level {other:?}"))),
        }
    }
}

/// Symbols known to a network. Ids 0, 1 and 2 are padding, unknown and
/// end-of-line; the rest follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    level: Level,
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new(level: Level, symbols: impl IntoIterator<Item = String>) -> Self {
        let eol = match level {
            Level::Char => CHAR_EOL,
            Level::Word => WORD_EOL,
        };
        let specials = [PAD, UNK, eol];
        let rest: BTreeSet<String> = symbols
            .into_iter()
            .filter(|s| !specials.contains(&s.as_str()))
            .collect();
        let symbols: Vec<String> = specials.iter().map(|s| s.to_string()).chain(rest).collect();
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        SymbolTable { level, symbols, index }
    }

    pub fn from_corpus(corpus: &[Haiku], level: Level) -> Self {
        let symbols = corpus
            .iter()
            .flat_map(|h| h.lines().iter())
            .flat_map(|l| level.split(l));
        Self::new(level, symbols)
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK_ID)
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn pad(&self) -> usize {
        PAD_ID
    }

    pub fn unk(&self) -> usize {
        UNK_ID
    }

    pub fn eol(&self) -> usize {
        EOL_ID
    }

    /// Ids for one line of text (no end-of-line appended).
    pub fn encode_line(&self, line: &str) -> Vec<usize> {
        self.level.split(line).iter().map(|s| self.id(s)).collect()
    }

    /// A haiku as one id sequence, every line closed by end-of-line.
    pub fn render(&self, haiku: &Haiku) -> Vec<usize> {
        let mut ids = Vec::new();
        for line in haiku.lines() {
            ids.extend(self.encode_line(line));
            ids.push(EOL_ID);
        }
        ids
    }
}

/// Every length-`window` slice of `symbols` paired with the symbol after it.
pub fn sliding_pairs(symbols: &[usize], window: usize) -> Vec<(Vec<usize>, usize)> {
    if window == 0 || symbols.len() <= window {
        return Vec::new();
    }
    (0..symbols.len() - window)
        .map(|i| (symbols[i..i + window].to_vec(), symbols[i + window]))
        .collect()
}

/// Training pairs for a corpus.
///
/// When the first line plus its end-of-line is shorter than `window`, the
/// text is left-padded so that the first pair's window is exactly the padded
/// first line, the same context generation starts from.
pub fn build_dataset(corpus: &[Haiku], table: &SymbolTable, window: usize) -> Vec<(Vec<usize>, usize)> {
    let mut pairs = Vec::new();
    for haiku in corpus {
        let lead = table.encode_line(haiku.line(0)).len() + 1;
        let mut text = vec![PAD_ID; window.saturating_sub(lead)];
        text.extend(table.render(haiku));
        pairs.extend(sliding_pairs(&text, window));
    }
    pairs
}

/// Shape and regularization of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub hidden_size: usize,
    /// Word-level embedding width; ignored for character models.
    pub embedding_dim: usize,
    pub dropout: f64,
    pub window: usize,
}

impl NetConfig {
    pub fn for_level(level: Level) -> Self {
        NetConfig {
            hidden_size: 64,
            embedding_dim: 32,
            dropout: 0.2,
            window: level.default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    vocab: usize,
    input: usize,
    hidden: usize,
    embed: Range<usize>,
    wx: Range<usize>,
    wh: Range<usize>,
    b: Range<usize>,
    wd: Range<usize>,
    bd: Range<usize>,
}

impl Layout {
    fn new(level: Level, vocab: usize, embedding_dim: usize, hidden: usize) -> Self {
        let (embed_len, input) = match level {
            Level::Char => (0, vocab),
            Level::Word => (vocab * embedding_dim, embedding_dim),
        };
        let gates = 4 * hidden;
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let embed = take(embed_len);
        let wx = take(input * gates);
        let wh = take(hidden * gates);
        let b = take(gates);
        let wd = take(vocab * hidden);
        let bd = take(vocab);
        Layout {
            vocab,
            input,
            hidden,
            embed,
            wx,
            wh,
            b,
            wd,
            bd,
        }
    }

    fn len(&self) -> usize {
        self.bd.end
    }

    fn tensors(&self) -> [(&'static str, Range<usize>, usize); 6] {
        [
            ("embed", self.embed.clone(), self.input),
            ("wx", self.wx.clone(), 4 * self.hidden),
            ("wh", self.wh.clone(), 4 * self.hidden),
            ("b", self.b.clone(), 4 * self.hidden),
            ("wd", self.wd.clone(), self.hidden),
            ("bd", self.bd.clone(), self.vocab),
        ]
    }
}

/// Loss of one epoch; validation loss is absent without validation data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    table: SymbolTable,
    config: NetConfig,
    layout: Layout,
    params: Vec<f64>,
    trace: Vec<EpochStats>,
}

/// Per-step activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Input gate, forget gate, output gate and candidate, per step.
    pub gates: Vec<[Vec<f64>; 4]>,
    /// Cell states, `c[0]` being the zero initial state.
    pub cells: Vec<Vec<f64>>,
    /// Hidden states, `h[0]` being the zero initial state.
    pub hidden: Vec<Vec<f64>>,
    /// Final hidden state after dropout.
    pub dropped: Vec<f64>,
    pub probs: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

fn uniform(rng: &mut impl Rng, bound: f64) -> f64 {
    (rng.gen::<f64>() * 2.0 - 1.0) * bound
}

impl LstmNet {
    /// Randomly initialized network: Glorot-uniform weights, zero biases
    /// except a forget-gate bias of 1.
    pub fn new(table: SymbolTable, config: NetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(table, config)?;
        let mut rng = crate::seeded_rng(seed);
        let l = net.layout.clone();
        let (v, i, h) = (l.vocab, l.input, l.hidden);
        let g = 4 * h;
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        for x in &mut net.params[l.embed.clone()] {
            *x = uniform(&mut rng, 0.05);
        }
        for (range, bound) in [
            (l.wx.clone(), glorot(i, g)),
            (l.wh.clone(), glorot(h, g)),
            (l.wd.clone(), glorot(h, v)),
        ] {
            for x in &mut net.params[range] {
                *x = uniform(&mut rng, bound);
            }
        }
        for x in &mut net.params[l.b.start + h..l.b.start + 2 * h] {
            *x = 1.0;
        }
        Ok(net)
    }

    /// A network with every parameter zero.
    pub fn zeroed(table: SymbolTable, config: NetConfig) -> Result<Self> {
        if config.hidden_size == 0 || config.window == 0 {
            return Err(Error::InvalidArgument("hidden size and window must be positive".into()));
        }
        if table.level() == Level::Word && config.embedding_dim == 0 {
            return Err(Error::InvalidArgument("word models need an embedding dimension".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                config.dropout
            )));
        }
        let layout = Layout::new(table.level(), table.len(), config.embedding_dim, config.hidden_size);
        Ok(LstmNet {
            params: vec![0.0; layout.len()],
            table,
            config,
            layout,
            trace: Vec::new(),
        })
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn level(&self) -> Level {
        self.table.level()
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trace(&self) -> &[EpochStats] {
        &self.trace
    }

    /// Inverted-dropout mask for the final hidden state: each unit is kept
    /// with probability `1 - p` and scaled by `1 / (1 - p)`.
    pub fn dropout_mask(&self, rng: &mut impl Rng) -> Vec<f64> {
        let p = self.config.dropout;
        let keep = 1.0 / (1.0 - p);
        (0..self.layout.hidden)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect()
    }

    fn input_into(&self, id: usize, z: &mut [f64]) {
        let g = 4 * self.layout.hidden;
        let wx = &self.params[self.layout.wx.clone()];
        match self.level() {
            Level::Char => {
                for (zi, w) in z.iter_mut().zip(&wx[id * g..(id + 1) * g]) {
                    *zi += w;
                }
            }
            Level::Word => {
                let e = self.layout.input;
                let x = &self.params[self.layout.embed.start + id * e..self.layout.embed.start + (id + 1) * e];
                for (xi, row) in x.iter().zip(wx.chunks_exact(g)) {
                    for (zi, w) in z.iter_mut().zip(row) {
                        *zi += xi * w;
                    }
                }
            }
        }
    }

    /// Full forward pass keeping intermediate activations.
    pub fn run(&self, window: &[usize], mask: Option<&[f64]>) -> ForwardTrace {
        let h = self.layout.hidden;
        let g = 4 * h;
        let wh = &self.params[self.layout.wh.clone()];
        let b = &self.params[self.layout.b.clone()];
        let mut trace = ForwardTrace {
            gates: Vec::with_capacity(window.len()),
            cells: vec![vec![0.0; h]],
            hidden: vec![vec![0.0; h]],
            dropped: Vec::new(),
            probs: Vec::new(),
        };
        for &id in window {
            let mut z = b.to_vec();
            self.input_into(id, &mut z);
            let h_prev = trace.hidden.last().expect("initial state");
            for (hj, row) in h_prev.iter().zip(wh.chunks_exact(g)) {
                if *hj != 0.0 {
                    for (zi, w) in z.iter_mut().zip(row) {
                        *zi += hj * w;
                    }
                }
            }
            let input: Vec<f64> = z[..h].iter().map(|&x| sigmoid(x)).collect();
            let forget: Vec<f64> = z[h..2 * h].iter().map(|&x| sigmoid(x)).collect();
            let output: Vec<f64> = z[2 * h..3 * h].iter().map(|&x| sigmoid(x)).collect();
            let cand: Vec<f64> = z[3 * h..].iter().map(|&x| x.tanh()).collect();
            let c_prev = trace.cells.last().expect("initial state");
            let c: Vec<f64> = (0..h).map(|j| forget[j] * c_prev[j] + input[j] * cand[j]).collect();
            let h_new: Vec<f64> = (0..h).map(|j| output[j] * c[j].tanh()).collect();
            trace.gates.push([input, forget, output, cand]);
            trace.cells.push(c);
            trace.hidden.push(h_new);
        }
        let last = trace.hidden.last().expect("initial state");
        trace.dropped = match mask {
            Some(m) => last.iter().zip(m).map(|(x, k)| x * k).collect(),
            None => last.clone(),
        };
        let wd = &self.params[self.layout.wd.clone()];
        let mut logits = self.params[self.layout.bd.clone()].to_vec();
        for (logit, row) in logits.iter_mut().zip(wd.chunks_exact(h)) {
            *logit += row.iter().zip(&trace.dropped).map(|(w, x)| w * x).sum::<f64>();
        }
        softmax_in_place(&mut logits);
        trace.probs = logits;
        trace
    }

    /// Next-symbol distribution. In training mode a fresh dropout mask is drawn.
    pub fn forward(&self, window: &[usize], train_mode: bool, rng: &mut impl Rng) -> Vec<f64> {
        if train_mode {
            let mask = self.dropout_mask(rng);
            self.run(window, Some(&mask)).probs
        } else {
            self.run(window, None).probs
        }
    }

    /// Evaluation-mode next-symbol distribution.
    pub fn probabilities(&self, window: &[usize]) -> Vec<f64> {
        self.run(window, None).probs
    }

    /// Cross-entropy of `target` after `window` and its gradient with respect
    /// to every parameter, by backpropagation through time.
    pub fn loss_and_gradient(&self, window: &[usize], target: usize, mask: Option<&[f64]>) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(window, target, mask, &mut grad);
        (loss, grad)
    }

    fn accumulate_gradient(&self, window: &[usize], target: usize, mask: Option<&[f64]>, grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let h = l.hidden;
        let g = 4 * h;
        let fwd = self.run(window, mask);
        let loss = -fwd.probs[target].max(f64::MIN_POSITIVE).ln();

        let mut dlogits = fwd.probs.clone();
        dlogits[target] -= 1.0;
        let wd = &self.params[l.wd.clone()];
        let mut dh = vec![0.0; h];
        for (v, &dl) in dlogits.iter().enumerate() {
            grad[l.bd.start + v] += dl;
            let row = &wd[v * h..(v + 1) * h];
            let grow = &mut grad[l.wd.start + v * h..l.wd.start + (v + 1) * h];
            for j in 0..h {
                grow[j] += dl * fwd.dropped[j];
                dh[j] += dl * row[j];
            }
        }
        if let Some(m) = mask {
            dh.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
        }

        let wx = &self.params[l.wx.clone()];
        let wh = &self.params[l.wh.clone()];
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; g];
        for t in (0..window.len()).rev() {
            let [input, forget, output, cand] = &fwd.gates[t];
            let c = &fwd.cells[t + 1];
            let c_prev = &fwd.cells[t];
            for j in 0..h {
                let tc = c[j].tanh();
                let d_out = dh[j] * tc;
                let dcj = dc[j] + dh[j] * output[j] * (1.0 - tc * tc);
                dz[j] = dcj * cand[j] * input[j] * (1.0 - input[j]);
                dz[h + j] = dcj * c_prev[j] * forget[j] * (1.0 - forget[j]);
                dz[2 * h + j] = d_out * output[j] * (1.0 - output[j]);
                dz[3 * h + j] = dcj * input[j] * (1.0 - cand[j] * cand[j]);
                dc[j] = dcj * forget[j];
            }
            for (gb, d) in grad[l.b.clone()].iter_mut().zip(&dz) {
                *gb += d;
            }
            let id = window[t];
            match self.level() {
                Level::Char => {
                    let row = &mut grad[l.wx.start + id * g..l.wx.start + (id + 1) * g];
                    row.iter_mut().zip(&dz).for_each(|(r, d)| *r += d);
                }
                Level::Word => {
                    let e = l.input;
                    let x_at = l.embed.start + id * e;
                    for k in 0..e {
                        let xk = self.params[x_at + k];
                        let wrow = &wx[k * g..(k + 1) * g];
                        let dx: f64 = wrow.iter().zip(&dz).map(|(w, d)| w * d).sum();
                        let grow = &mut grad[l.wx.start + k * g..l.wx.start + (k + 1) * g];
                        grow.iter_mut().zip(&dz).for_each(|(r, d)| *r += xk * d);
                        grad[x_at + k] += dx;
                    }
                }
            }
            let h_prev = &fwd.hidden[t];
            for j in 0..h {
                let wrow = &wh[j * g..(j + 1) * g];
                let grow = &mut grad[l.wh.start + j * g..l.wh.start + (j + 1) * g];
                let hj = h_prev[j];
                let mut acc = 0.0;
                for ((r, w), d) in grow.iter_mut().zip(wrow).zip(&dz) {
                    *r += hj * d;
                    acc += w * d;
                }
                dh[j] = acc;
            }
        }
        loss
    }

    /// Mean evaluation-mode cross-entropy.
    pub fn mean_loss(&self, data: &[(Vec<usize>, usize)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter()
            .map(|(w, t)| -self.probabilities(w)[*t].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / data.len() as f64
    }

    /// Fraction of pairs whose most probable next symbol is the target.
    pub fn accuracy(&self, data: &[(Vec<usize>, usize)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|(w, t)| argmax(&self.probabilities(w)) == *t)
            .count();
        hits as f64 / data.len() as f64
    }

    pub fn trace_csv(&self) -> String {
        trace_csv(&self.trace)
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "{FORMAT_HEADER}\nlevel {}\nhidden {}\nembedding {}\ndropout {}\nwindow {}\nsymbols {}\n",
            self.level(),
            c.hidden_size,
            c.embedding_dim,
            textio::fmt_f64(c.dropout),
            c.window,
            self.table.len()
        );
        for s in &self.table.symbols {
            out.push_str(&escape_symbol(s));
            out.push('\n');
        }
        for (name, range, cols) in self.layout.tensors() {
            let rows = range.len().checked_div(cols).unwrap_or(0);
            out.push_str(&format!("tensor {name} {rows} {cols}\n"));
            for row in self.params[range].chunks(cols.max(1)) {
                textio::push_row(&mut out, row);
            }
        }
        out.push_str(&format!("trace {}\n", self.trace.len()));
        for s in &self.trace {
            let val = s.val_loss.map_or("-".to_string(), textio::fmt_f64);
            out.push_str(&format!("{} {} {val}\n", s.epoch, textio::fmt_f64(s.train_loss)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new("rnn checkpoint", text);
        lines.expect(FORMAT_HEADER)?;
        let level: Level = lines.parsed("level")?;
        let config = NetConfig {
            hidden_size: lines.parsed("hidden")?,
            embedding_dim: lines.parsed("embedding")?,
            dropout: lines.parsed("dropout")?,
            window: lines.parsed("window")?,
        };
        let n: usize = lines.parsed("symbols")?;
        let mut symbols = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = lines.next_line()?;
            symbols.push(unescape_symbol(raw).ok_or_else(|| lines.err("bad symbol escape"))?);
        }
        let table = SymbolTable::new(level, symbols.iter().cloned());
        if table.symbols != symbols {
            return Err(lines.err("symbol table is not in canonical order"));
        }
        let mut net = Self::zeroed(table, config)?;
        for (name, range, cols) in net.layout.tensors() {
            let header = lines.field("tensor")?;
            let rows = range.len().checked_div(cols).unwrap_or(0);
            if header != format!("{name} {rows} {cols}") {
                return Err(lines.err(format!("expected tensor {name} {rows} {cols}, found {header}")));
            }
            let mut at = range.start;
            for _ in 0..rows {
                let row = lines.floats(cols)?;
                net.params[at..at + cols].copy_from_slice(&row);
                at += cols;
            }
        }
        if net.params.iter().any(|x| !x.is_finite()) {
            return Err(lines.err("non-finite parameter"));
        }
        let n_trace: usize = lines.parsed("trace")?;
        for _ in 0..n_trace {
            let line = lines.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            let [epoch, train, val] = parts[..] else {
                return Err(lines.err("expected `epoch train val`"));
            };
            net.trace.push(EpochStats {
                epoch: lines.parse(epoch)?,
                train_loss: lines.parse(train)?,
                val_loss: if val == "-" { None } else { Some(lines.parse(val)?) },
            });
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_to_string(path)?)
    }
}

fn escape_symbol(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            ' ' => out.push_str("\\s"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_symbol(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            'n' => '\n',
            't' => '\t',
            'r' => '\r',
            's' => ' ',
            _ => return None,
        });
    }
    Some(out)
}

pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for s in trace {
        let val = s.val_loss.map_or(String::new(), textio::fmt_f64);
        out.push_str(&format!("{},{},{val}\n", s.epoch, textio::fmt_f64(s.train_loss)));
    }
    out
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    Sgd,
    /// Adam with beta1 0.9, beta2 0.999, epsilon 1e-8.
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Gradients with a larger global norm are rescaled to this norm.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 32,
            learning_rate: 0.005,
            seed: 0,
            clip_norm: 5.0,
            optimizer: Optimizer::Adam,
        }
    }
}

/// Trains `net` in place on `(window, next symbol)` pairs.
///
/// Each epoch shuffles the pairs, averages gradients over mini-batches, clips
/// the global norm and steps the optimizer. The returned stats (also appended
/// to the network's trace) hold the mean training loss seen during the epoch
/// and the evaluation-mode validation loss.
pub fn train(
    net: &mut LstmNet,
    train: &[(Vec<usize>, usize)],
    validation: &[(Vec<usize>, usize)],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(cfg.clip_norm > 0.0) {
        return Err(Error::InvalidArgument(
            "batch size, learning rate and clip norm must be positive".into(),
        ));
    }
    let vocab = net.table.len();
    if train
        .iter()
        .chain(validation)
        .any(|(w, t)| *t >= vocab || w.iter().any(|&s| s >= vocab))
    {
        return Err(Error::InvalidArgument("symbol id outside the network's table".into()));
    }
    let mut rng = crate::seeded_rng(cfg.seed);
    let n_params = net.params.len();
    let mut grad = vec![0.0; n_params];
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let first_epoch = net.trace.last().map_or(1, |s| s.epoch + 1);
    let mut stats = Vec::with_capacity(cfg.epochs);

    for epoch in first_epoch..first_epoch + cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (window, target) = &train[i];
                let mask = (net.config.dropout > 0.0).then(|| net.dropout_mask(&mut rng));
                total += net.accumulate_gradient(window, *target, mask.as_deref(), &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in net.params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam => {
                    const B1: f64 = 0.9;
                    const B2: f64 = 0.999;
                    step += 1;
                    let c1 = 1.0 - B1.powi(step);
                    let c2 = 1.0 - B2.powi(step);
                    for i in 0..n_params {
                        let g = grad[i];
                        m[i] = B1 * m[i] + (1.0 - B1) * g;
                        v[i] = B2 * v[i] + (1.0 - B2) * g * g;
                        net.params[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
                    }
                }
            }
        }
        let train_loss = total / train.len() as f64;
        if !train_loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: train_loss });
        }
        let s = EpochStats {
            epoch,
            train_loss,
            val_loss: (!validation.is_empty()).then(|| net.mean_loss(validation)),
        };
        net.trace.push(s);
        stats.push(s);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Scale of the Gumbel noise: 0 is greedy, 1 samples the softmax exactly.
    pub noise_scale: f64,
    pub max_tokens_per_line: usize,
}

impl SamplerConfig {
    pub fn for_level(level: Level) -> Self {
        SamplerConfig {
            noise_scale: 0.8,
            max_tokens_per_line: match level {
                Level::Char => 40,
                Level::Word => 10,
            },
        }
    }
}

/// Gumbel-max choice: `argmax_i ln p_i + noise_scale * g_i` over unmasked
/// symbols, where `g_i` is standard Gumbel noise. Masked symbols are never
/// returned; the remaining mass needs no renormalization because a common
/// shift of every `ln p_i` does not change the argmax.
pub fn gumbel_argmax(probs: &[f64], masked: &[bool], noise_scale: f64, rng: &mut impl Rng) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in probs.iter().enumerate() {
        if masked.get(i).copied().unwrap_or(false) {
            continue;
        }
        let noise = if noise_scale > 0.0 {
            let u: f64 = rng.sample(Open01);
            -(-u.ln()).ln()
        } else {
            0.0
        };
        let score = if p > 0.0 { p.ln() + noise_scale * noise } else { f64::NEG_INFINITY };
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((i, score)),
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Draws the next symbol id, never padding or unknown.
pub fn sample_next(net: &LstmNet, window: &[usize], sampler: &SamplerConfig, rng: &mut impl Rng) -> usize {
    let mut masked = vec![false; net.table.len()];
    masked[PAD_ID] = true;
    masked[UNK_ID] = true;
    gumbel_argmax(&net.probabilities(window), &masked, sampler.noise_scale, rng)
}

/// Completes a haiku from its first line.
///
/// The context starts as the (cleaned) first line plus end-of-line. Symbols
/// are sampled until an end-of-line closes each of lines 2 and 3, or until a
/// line reaches `max_tokens_per_line` and is closed by force. A line cannot
/// be closed before it has visible content.
pub fn generate_rnn(net: &LstmNet, first_line: &str, sampler: &SamplerConfig, seed: u64) -> Result<Haiku> {
    if first_line.trim().is_empty() || first_line.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!(
            "first line must be a single non-empty line, got {first_line:?}"
        )));
    }
    if sampler.max_tokens_per_line == 0 {
        return Err(Error::InvalidArgument("max tokens per line must be at least 1".into()));
    }
    let table = &net.table;
    let window = net.window();
    let mut context = table.encode_line(&clean_line(first_line));
    context.push(EOL_ID);
    if context.len() < window {
        let mut padded = vec![PAD_ID; window - context.len()];
        padded.extend(context);
        context = padded;
    }
    let space = match net.level() {
        Level::Char => table.index.get(" ").copied(),
        Level::Word => None,
    };

    let mut rng = crate::seeded_rng(seed);
    let mut masked = vec![false; table.len()];
    masked[PAD_ID] = true;
    masked[UNK_ID] = true;
    let mut lines = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut symbols: Vec<usize> = Vec::new();
        while symbols.len() < sampler.max_tokens_per_line {
            let blank = symbols.iter().all(|&s| Some(s) == space);
            masked[EOL_ID] = blank;
            if let Some(sp) = space {
                masked[sp] = blank;
            }
            let probs = net.probabilities(&context[context.len() - window..]);
            let next = gumbel_argmax(&probs, &masked, sampler.noise_scale, &mut rng);
            if next == EOL_ID {
                break;
            }
            symbols.push(next);
            context.push(next);
        }
        context.push(EOL_ID);
        let text: Vec<&str> = symbols.iter().map(|&s| table.symbol(s)).collect();
        let line = match net.level() {
            Level::Char => text.concat().split_whitespace().collect::<Vec<_>>().join(" "),
            Level::Word => text.join(" "),
        };
        lines.push(line);
    }
    let [second, third] = <[String; 2]>::try_from(lines).expect("two lines");
    Haiku::new([first_line.to_owned(), second, third], net.level().source())
}
