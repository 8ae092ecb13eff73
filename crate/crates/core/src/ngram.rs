//! Maximum-likelihood n-gram caption model with stupid backoff.
//!
//! This is the image-blind "naive agent": it conditions only on the
//! trailing `n - 1` caption tokens, so beam search over it reproduces the
//! most frequent phrasing in the training captions regardless of the image.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::embedding::ImageEmbedding;
use crate::error::{Error, Result};
use crate::scorer::{NextTokenDistribution, Scorer};
use crate::text::{EncodedCaption, TokenSequence, Vocabulary, START, START_INDEX};

pub const DEFAULT_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    n: usize,
    vocab: Vocabulary,
    /// context (length 0..n) -> next token -> count
    counts: HashMap<Vec<usize>, BTreeMap<usize, u64>>,
    totals: HashMap<Vec<usize>, u64>,
}

impl NgramModel {
    /// Counts every (context, next token) pair for context lengths
    /// `0..n`. `<startseq>` only ever appears as context.
    pub fn train<'a, I>(captions: I, n: usize, vocab: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        if n < 1 {
            return Err(Error::InvalidArgument("n-gram order must be >= 1".into()));
        }
        let mut model = NgramModel {
            n,
            vocab: vocab.clone(),
            counts: HashMap::new(),
            totals: HashMap::new(),
        };
        let mut seen = 0usize;
        for caption in captions {
            seen += 1;
            let idx: Vec<usize> = caption
                .tokens()
                .iter()
                .map(|t| vocab.index_or_unk(t))
                .collect();
            for j in 1..idx.len() {
                let target = idx[j];
                if target == START_INDEX {
                    continue;
                }
                for m in 0..=j.min(n - 1) {
                    model.add(idx[j - m..j].to_vec(), target, 1);
                }
            }
        }
        if seen == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(model)
    }

    fn add(&mut self, context: Vec<usize>, token: usize, count: u64) {
        *self.totals.entry(context.clone()).or_default() += count;
        *self.counts.entry(context).or_default().entry(token).or_default() += count;
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn count(&self, context: &[usize], token: usize) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&token))
            .copied()
            .unwrap_or(0)
    }

    pub fn context_count(&self, context: &[usize]) -> u64 {
        self.totals.get(context).copied().unwrap_or(0)
    }

    /// MLE estimate `count(context, token) / count(context)` for a stored
    /// context, without backoff.
    pub fn probability(&self, context: &[usize], token: usize) -> Option<f64> {
        let total = self.context_count(context);
        (total > 0).then(|| self.count(context, token) as f64 / total as f64)
    }

    /// The longest trailing context of `prefix` (at most `n - 1` tokens)
    /// that was seen in training.
    pub fn backoff_context<'p>(&self, prefix: &'p [usize]) -> Option<&'p [usize]> {
        let longest = prefix.len().min(self.n - 1);
        (0..=longest)
            .rev()
            .map(|m| &prefix[prefix.len() - m..])
            .find(|ctx| self.context_count(ctx) > 0)
    }

    fn distribution_for(&self, context: &[usize]) -> NextTokenDistribution {
        let total = self.context_count(context) as f64;
        let mut probs = vec![0.0; self.vocab.len()];
        if let Some(next) = self.counts.get(context) {
            for (&tok, &c) in next {
                probs[tok] = c as f64 / total;
            }
        }
        NextTokenDistribution::from_weights(probs)
    }

    /// Top `k` continuations of `context`, by count then token.
    ///
    /// When `<startseq>` plus `context` fits the model order, the context is
    /// anchored at the caption start, so `[]` lists caption-leading words
    /// and `["chicken"]` lists what follows a leading `chicken`. Longer
    /// contexts are looked up as given. Unknown contexts yield an empty list.
    pub fn leading_ngram_table(&self, context: &[&str], k: usize) -> Vec<(String, u64)> {
        let Some(idx) = context
            .iter()
            .map(|t| self.vocab.index_of(t))
            .collect::<Option<Vec<usize>>>()
        else {
            return Vec::new();
        };
        let key = if context.first() != Some(&START) && idx.len() + 1 < self.n {
            std::iter::once(START_INDEX).chain(idx).collect()
        } else {
            idx
        };
        let Some(next) = self.counts.get(&key) else {
            return Vec::new();
        };
        let mut rows: Vec<(String, u64)> = next
            .iter()
            .map(|(&tok, &c)| (self.vocab.token(tok).unwrap_or("?").to_string(), c))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows.truncate(k);
        rows
    }

    /// Writes the `NGRAM v1` text format, one `context<TAB>token<TAB>count`
    /// line per stored pair in sorted order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut contexts: Vec<&Vec<usize>> = self.counts.keys().collect();
        contexts.sort();
        let name = |i: usize| self.vocab.token(i).unwrap_or("<unk>");
        let write = || -> std::io::Result<()> {
            writeln!(w, "NGRAM v1 {}", self.n)?;
            for ctx in contexts {
                let ctx_text = ctx.iter().map(|&i| name(i)).collect::<Vec<_>>().join(" ");
                for (&tok, &c) in &self.counts[ctx] {
                    writeln!(w, "{ctx_text}\t{}\t{c}", name(tok))?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, vocab)
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let err = |line: usize, detail: String| Error::Parse {
            what: "n-gram model",
            line,
            detail,
        };
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["NGRAM", "v1", n] => n.parse::<usize>().map_err(|e| err(1, e.to_string()))?,
            _ => return Err(err(1, format!("bad header {header:?}"))),
        };
        if n < 1 {
            return Err(err(1, "order must be >= 1".into()));
        }
        let mut model = NgramModel {
            n,
            vocab: vocab.clone(),
            counts: HashMap::new(),
            totals: HashMap::new(),
        };
        let lookup = |tok: &str, line: usize| {
            vocab
                .index_of(tok)
                .ok_or_else(|| err(line, format!("token {tok:?} not in vocabulary")))
        };
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let parts: Vec<&str> = line.split('\t').collect();
            let [ctx, tok, count] = parts.as_slice() else {
                return Err(err(lineno, "expected context<TAB>token<TAB>count".into()));
            };
            let context = ctx
                .split_whitespace()
                .map(|t| lookup(t, lineno))
                .collect::<Result<Vec<_>>>()?;
            if context.len() >= n {
                return Err(err(lineno, format!("context longer than order {n}")));
            }
            let tok = lookup(tok, lineno)?;
            let count: u64 = count.parse().map_err(|e: std::num::ParseIntError| err(lineno, e.to_string()))?;
            model.add(context, tok, count);
        }
        Ok(model)
    }
}

impl Scorer for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Ignores the image entirely.
    fn predict_next(&self, _embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        Ok(match self.backoff_context(prefix.tokens()) {
            Some(ctx) => self.distribution_for(ctx),
            None => NextTokenDistribution::uniform(self.vocab.len()),
        })
    }
}
