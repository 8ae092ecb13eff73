//! Caption text handling: the cleansing pipeline that turns raw caption
//! strings into token sequences, the vocabulary, and fixed-length integer
//! encoding.

mod normalize;
mod vocab;

pub use normalize::{cleanse, normalize_caption};
pub use vocab::Vocabulary;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const START: &str = "<startseq>";
pub const END: &str = "<endseq>";
pub const NULL: &str = "<null>";
pub const UNK: &str = "<unk>";

/// Index of the padding token. Every vocabulary places it first.
pub const NULL_INDEX: usize = 0;
pub const START_INDEX: usize = 1;
pub const END_INDEX: usize = 2;
pub const UNK_INDEX: usize = 3;

/// Reserved tokens in index order.
pub const RESERVED: [&str; 4] = [NULL, START, END, UNK];

/// Default caption budget, markers included.
pub const DEFAULT_MAX_LEN: usize = 15;

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Ordered caption tokens, normally wrapped in `<startseq>` / `<endseq>`.
///
/// Sequences produced by [`normalize_caption`] are always well formed.
/// [`Vocabulary::decode`] may yield a bare or truncated sequence, so the
/// structural invariant is checked by [`TokenSequence::new`] rather than
/// enforced on every value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence and checks the marker and alphabet invariants.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let seq = TokenSequence(tokens);
        seq.validate()?;
        Ok(seq)
    }

    pub(crate) fn from_unchecked(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    /// Wraps bare content words with the start and end markers.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![START.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        tokens.push(END.to_string());
        Self::new(tokens)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.0.first().map(String::as_str) != Some(START) {
            return bad(format!("sequence must start with {START}: {self}"));
        }
        let starts = self.0.iter().filter(|t| *t == START).count();
        if starts != 1 {
            return bad(format!("sequence holds {starts} {START} markers"));
        }
        let ends = self.0.iter().filter(|t| *t == END).count();
        if ends > 1 {
            return bad(format!("sequence holds {ends} {END} markers"));
        }
        if let Some(tok) = self
            .0
            .iter()
            .find(|t| !(is_reserved(t) || is_word(t)))
        {
            return bad(format!("token {tok:?} is outside [a-z]+"));
        }
        Ok(())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Content tokens only: markers and padding removed.
    pub fn words(&self) -> Vec<String> {
        strip_markers(&self.0)
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

fn is_word(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_lowercase())
}

/// Drops `<startseq>`, `<endseq>` and `<null>`; `<unk>` is kept.
pub fn strip_markers<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !matches!(*t, START | END | NULL))
        .map(str::to_string)
        .collect()
}

/// A caption as a fixed-length vector of vocabulary indices, padded with
/// [`NULL_INDEX`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedCaption {
    indices: Vec<usize>,
    true_length: usize,
}

impl EncodedCaption {
    /// Truncates or pads `indices` to exactly `max_len` entries.
    pub fn from_indices(indices: &[usize], max_len: usize) -> Self {
        let true_length = indices.len().min(max_len);
        let mut padded = Vec::with_capacity(max_len);
        padded.extend_from_slice(&indices[..true_length]);
        padded.resize(max_len, NULL_INDEX);
        EncodedCaption {
            indices: padded,
            true_length,
        }
    }

    /// Builds a caption from raw padded indices. The true length is the
    /// count of entries before the first padding index.
    pub fn from_padded(indices: Vec<usize>) -> Self {
        let true_length = indices
            .iter()
            .position(|&i| i == NULL_INDEX)
            .unwrap_or(indices.len());
        EncodedCaption {
            indices,
            true_length,
        }
    }

    /// All `max_len` slots, padding included.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The non-pad prefix.
    pub fn tokens(&self) -> &[usize] {
        &self.indices[..self.true_length]
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    pub fn max_len(&self) -> usize {
        self.indices.len()
    }

    /// The first `len` tokens, re-padded to the same `max_len`.
    pub fn prefix(&self, len: usize) -> EncodedCaption {
        EncodedCaption::from_indices(&self.tokens()[..len.min(self.true_length)], self.max_len())
    }
}

/// One line of the caption input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCaption {
    pub photo_id: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_malformed_sequences() {
        assert!(TokenSequence::new(vec!["a".into()]).is_err());
        assert!(TokenSequence::new(vec![START.into(), START.into()]).is_err());
        assert!(TokenSequence::new(vec![START.into(), END.into(), END.into()]).is_err());
        assert!(TokenSequence::new(vec![START.into(), "Bad".into()]).is_err());
        assert!(TokenSequence::new(vec![START.into(), "ok".into(), END.into()]).is_ok());
        // truncated captions legitimately lack the end marker
        assert!(TokenSequence::new(vec![START.into(), "ok".into()]).is_ok());
    }

    #[test]
    fn encoded_caption_pads_and_truncates() {
        let e = EncodedCaption::from_indices(&[1, 5, 2], 5);
        assert_eq!(e.indices(), &[1, 5, 2, 0, 0]);
        assert_eq!(e.true_length(), 3);
        let t = EncodedCaption::from_indices(&[1, 4, 4, 4, 4, 2], 4);
        assert_eq!(t.indices(), &[1, 4, 4, 4]);
        assert_eq!(t.true_length(), 4);
        assert_eq!(EncodedCaption::from_padded(vec![1, 7, 0, 0]).true_length(), 2);
        assert_eq!(e.prefix(2).indices(), &[1, 5, 0, 0, 0]);
    }

    #[test]
    fn strip_markers_keeps_unk() {
        let toks = [START, "a", UNK, END, NULL];
        assert_eq!(strip_markers(&toks), vec!["a".to_string(), UNK.to_string()]);
    }
}
