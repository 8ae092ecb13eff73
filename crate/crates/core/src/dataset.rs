//! Caption records, the train/validation split, and expansion of each
//! caption into next-token training examples.
//!
//! A caption `[<startseq>, w1, ..., <endseq>]` of encoded length `L` yields
//! `L - 1` examples: prefix `[<startseq>]` predicts `w1`, prefix
//! `[<startseq>, w1]` predicts `w2`, and so on. The split always happens on
//! whole records, before expansion.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize_caption, EncodedCaption, RawCaption, TokenSequence, Vocabulary};

pub const CACHE_MAGIC: [u8; 4] = *b"NICD";
pub const CACHE_VERSION: u8 = 1;

/// One normalized caption and its image key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub photo_id: String,
    pub tokens: TokenSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CaptionRecord {
    pub fn new(photo_id: impl Into<String>, tokens: TokenSequence, label: Option<String>) -> Result<Self> {
        let photo_id = photo_id.into();
        if photo_id.is_empty() {
            return Err(Error::InvalidArgument("photo_id must be non-empty".into()));
        }
        Ok(CaptionRecord {
            photo_id,
            tokens,
            label,
        })
    }

    pub fn from_raw(raw: &RawCaption) -> Result<Self> {
        Self::new(raw.photo_id.clone(), normalize_caption(&raw.caption), raw.label.clone())
    }
}

/// The covariates (image key + prefix) and response (next token) of one
/// supervised step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub photo_id: String,
    pub prefix: EncodedCaption,
    pub target: usize,
}

/// Splits records into `(train, validation)` with a seeded shuffle.
///
/// The validation share is `ceil(fraction * N)`; each side keeps the input
/// order of its records.
pub fn split(
    records: &[CaptionRecord],
    validation_fraction: f64,
    seed: u64,
) -> Result<(Vec<CaptionRecord>, Vec<CaptionRecord>)> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let n_val = validation_size(records.len(), validation_fraction);

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_val = vec![false; records.len()];
    for &i in &order[..n_val] {
        in_val[i] = true;
    }

    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (rec, &v) in records.iter().zip(&in_val) {
        if v {
            val.push(rec.clone());
        } else {
            train.push(rec.clone());
        }
    }
    Ok((train, val))
}

/// Number of validation records for `n` records at `fraction`.
pub fn validation_size(n: usize, fraction: f64) -> usize {
    // tolerance absorbs representation error such as 0.7 * 10 = 7.000000000000001
    ((fraction * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize
}

/// Expands one caption into its next-token examples.
pub fn expand(record: &CaptionRecord, vocab: &Vocabulary, max_len: usize) -> Vec<TrainingExample> {
    let encoded = vocab.encode(&record.tokens, max_len);
    let len = encoded.true_length();
    if len < 2 {
        log::debug!("caption {} too short to expand", record.photo_id);
        return Vec::new();
    }
    (1..len)
        .map(|t| TrainingExample {
            photo_id: record.photo_id.clone(),
            prefix: encoded.prefix(t),
            target: encoded.tokens()[t],
        })
        .collect()
}

/// Expanded examples plus summary counts.
#[derive(Debug, Clone, Default)]
pub struct ExpandedDataset {
    pub examples: Vec<TrainingExample>,
    pub captions: usize,
}

impl ExpandedDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Mean number of examples per caption (0 for an empty dataset).
    pub fn examples_per_caption(&self) -> f64 {
        if self.captions == 0 {
            0.0
        } else {
            self.examples.len() as f64 / self.captions as f64
        }
    }
}

/// Expands every record, in record order.
pub fn expand_all(records: &[CaptionRecord], vocab: &Vocabulary, max_len: usize) -> ExpandedDataset {
    let examples = records
        .iter()
        .flat_map(|r| expand(r, vocab, max_len))
        .collect();
    ExpandedDataset {
        examples,
        captions: records.len(),
    }
}

/// Reads a JSON-lines file of raw captions (`photo_id`, `caption`, `label`).
pub fn read_raw_captions(path: impl AsRef<Path>) -> Result<Vec<RawCaption>> {
    read_jsonl(path.as_ref(), "caption file")
}

/// Reads a JSON-lines file of normalized records (`photo_id`, `tokens`, `label`).
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    let records: Vec<CaptionRecord> = read_jsonl(path.as_ref(), "token file")?;
    for (n, r) in records.iter().enumerate() {
        if r.photo_id.is_empty() {
            return Err(Error::Parse {
                what: "token file",
                line: n + 1,
                detail: "empty photo_id".into(),
            });
        }
    }
    Ok(records)
}

pub fn write_records(path: impl AsRef<Path>, records: &[CaptionRecord]) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            what,
            line: n + 1,
            detail: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the `NICD` example cache:
///
/// ```text
/// "NICD" | version: u8 | max_len: u32 | count: u64
/// count x ( id_len: u16 | id bytes | max_len x u32 prefix | u32 target )
/// ```
pub fn save_cache(path: impl AsRef<Path>, examples: &[TrainingExample], max_len: usize) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&[CACHE_VERSION])?;
        w.write_all(&(max_len as u32).to_le_bytes())?;
        w.write_all(&(examples.len() as u64).to_le_bytes())?;
        for ex in examples {
            w.write_all(&(ex.photo_id.len() as u16).to_le_bytes())?;
            w.write_all(ex.photo_id.as_bytes())?;
            for &i in ex.prefix.indices() {
                w.write_all(&(i as u32).to_le_bytes())?;
            }
            w.write_all(&(ex.target as u32).to_le_bytes())?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<Vec<TrainingExample>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let u32_at = |r: &mut &[u8], record: u64| -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| Error::TruncatedRecord {
            what: "example cache",
            record,
        })?;
        Ok(u32::from_le_bytes(b))
    };
    let mut head = [0u8; 17];
    r.read_exact(&mut head).map_err(|_| Error::TruncatedRecord {
        what: "example cache header",
        record: 0,
    })?;
    let magic: [u8; 4] = head[..4].try_into().expect("slice of 4");
    if magic != CACHE_MAGIC {
        return Err(Error::BadMagic {
            expected: CACHE_MAGIC,
            found: magic,
        });
    }
    if head[4] != CACHE_VERSION {
        return Err(Error::UnsupportedVersion(head[4]));
    }
    let max_len = u32::from_le_bytes(head[5..9].try_into().expect("slice of 4")) as usize;
    let count = u64::from_le_bytes(head[9..17].try_into().expect("slice of 8"));

    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    for record in 0..count {
        let truncated = || Error::TruncatedRecord {
            what: "example cache",
            record,
        };
        let mut len = [0u8; 2];
        r.read_exact(&mut len).map_err(|_| truncated())?;
        let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut id).map_err(|_| truncated())?;
        let photo_id = String::from_utf8(id).map_err(|e| Error::Parse {
            what: "example cache",
            line: record as usize,
            detail: e.to_string(),
        })?;
        let mut prefix = Vec::with_capacity(max_len);
        for _ in 0..max_len {
            prefix.push(u32_at(&mut r, record)? as usize);
        }
        let target = u32_at(&mut r, record)? as usize;
        out.push(TrainingExample {
            photo_id,
            prefix: EncodedCaption::from_padded(prefix),
            target,
        });
    }
    Ok(out)
}
