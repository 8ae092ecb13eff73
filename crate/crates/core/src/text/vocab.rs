use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{
    EncodedCaption, TokenSequence, END_INDEX, NULL_INDEX, RESERVED, START_INDEX, UNK_INDEX,
};
use crate::error::{Error, Result};

/// Bidirectional token/index map with corpus frequencies.
///
/// Reserved tokens occupy indices 0..4 (`<null>`, `<startseq>`, `<endseq>`,
/// `<unk>`); the remaining tokens follow by descending frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    token_to_index: HashMap<String, usize>,
    frequency: Vec<u64>,
    min_frequency: u64,
}

impl Vocabulary {
    pub fn build<'a, I>(captions: I, min_frequency: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        if min_frequency < 1 {
            return Err(Error::InvalidArgument("min_frequency must be >= 1".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut n_captions = 0usize;
        for caption in captions {
            n_captions += 1;
            for tok in caption.tokens() {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        if n_captions == 0 {
            return Err(Error::EmptyCorpus);
        }

        let mut rest: Vec<(&str, u64)> = counts
            .iter()
            .filter(|(tok, &c)| !RESERVED.contains(tok) && c >= min_frequency)
            .map(|(&tok, &c)| (tok, c))
            .collect();
        rest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let entries = RESERVED
            .iter()
            .map(|&tok| (tok.to_string(), counts.get(tok).copied().unwrap_or(0)))
            .chain(rest.into_iter().map(|(t, c)| (t.to_string(), c)));
        Ok(Self::from_entries(entries, min_frequency))
    }

    fn from_entries(entries: impl IntoIterator<Item = (String, u64)>, min_frequency: u64) -> Self {
        let (index_to_token, frequency): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            index_to_token,
            token_to_index,
            frequency,
            min_frequency,
        }
    }

    /// Vocabulary size V.
    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn min_frequency(&self) -> u64 {
        self.min_frequency
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    /// Index of `token`, or `<unk>` when absent.
    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index_of(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn frequency(&self, token: &str) -> u64 {
        self.index_of(token).map_or(0, |i| self.frequency[i])
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.index_to_token.iter().map(String::as_str)
    }

    /// Maps tokens to indices, truncating to `max_len` and padding with
    /// `<null>`. Unknown tokens become `<unk>`.
    pub fn encode(&self, tokens: &TokenSequence, max_len: usize) -> EncodedCaption {
        let idx: Vec<usize> = tokens
            .tokens()
            .iter()
            .take(max_len)
            .map(|t| self.index_or_unk(t))
            .collect();
        EncodedCaption::from_indices(&idx, max_len)
    }

    /// Inverse of [`encode`](Self::encode) up to truncation and OOV loss.
    /// Padding entries are dropped.
    pub fn decode(&self, caption: &EncodedCaption) -> Result<TokenSequence> {
        self.decode_indices(caption.indices())
    }

    pub fn decode_indices(&self, indices: &[usize]) -> Result<TokenSequence> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let tok = self.token(i).ok_or(Error::IndexOutOfRange {
                index: i,
                vocab_size: self.len(),
            })?;
            if i != NULL_INDEX {
                out.push(tok.to_string());
            }
        }
        Ok(TokenSequence::from_unchecked(out))
    }

    /// Writes the `VOCAB v1` text format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "VOCAB v1 {} {}", self.len(), self.min_frequency)?;
            for (i, (tok, freq)) in self.index_to_token.iter().zip(&self.frequency).enumerate() {
                writeln!(w, "{tok}\t{i}\t{freq}")?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, detail: String| Error::Parse {
            what: "vocabulary",
            line,
            detail,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (size, min_frequency) = match fields.as_slice() {
            ["VOCAB", "v1", v, m] => (
                v.parse::<usize>().map_err(|e| err(1, e.to_string()))?,
                m.parse::<u64>().map_err(|e| err(1, e.to_string()))?,
            ),
            _ => return Err(err(1, format!("bad header {header:?}"))),
        };

        let mut entries = Vec::with_capacity(size);
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            let parts: Vec<&str> = line.split('\t').collect();
            let [tok, idx, freq] = parts.as_slice() else {
                return Err(err(lineno, "expected token<TAB>index<TAB>frequency".into()));
            };
            let idx: usize = idx.parse().map_err(|e: std::num::ParseIntError| err(lineno, e.to_string()))?;
            if idx != entries.len() {
                return Err(err(lineno, format!("index {idx} out of order")));
            }
            let freq: u64 = freq.parse().map_err(|e: std::num::ParseIntError| err(lineno, e.to_string()))?;
            entries.push((tok.to_string(), freq));
        }
        if entries.len() != size {
            return Err(err(1, format!("header declares {size} tokens, found {}", entries.len())));
        }
        for (i, reserved) in RESERVED.iter().enumerate() {
            if entries.get(i).map(|e| e.0.as_str()) != Some(*reserved) {
                return Err(err(i + 2, format!("expected reserved token {reserved}")));
            }
        }
        Ok(Self::from_entries(entries, min_frequency))
    }
}

// Reserved indices are fixed by construction; keep them in sync with RESERVED.
const _: () = {
    assert!(NULL_INDEX == 0 && START_INDEX == 1 && END_INDEX == 2 && UNK_INDEX == 3);
};
