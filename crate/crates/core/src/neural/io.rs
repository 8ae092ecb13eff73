//! `NICM` model files.
//!
//! ```text
//! "NICM" | version: u8 | kind: u8
//! u32 x 6: vocab_size, max_len, embedding_dim, lstm_hidden_dim,
//!          image_dense_dim, image_input_dim
//! f32 tensors in ModelParameters::TENSOR_NAMES order, row-major
//! ```
//!
//! Integers and floats are little-endian. Weights are stored as `f32`, so a
//! reloaded model matches the in-memory one to single precision.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ArchitectureKind, ArchitectureSpec, ModelParameters, NeuralModel};
use crate::error::{Error, Result};
use crate::text::Vocabulary;

pub const MODEL_MAGIC: [u8; 4] = *b"NICM";
pub const MODEL_VERSION: u8 = 1;

impl NeuralModel {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let s = &self.spec;
        w.write_all(&MODEL_MAGIC)?;
        w.write_all(&[MODEL_VERSION, s.kind.code()])?;
        for v in [
            s.vocab_size,
            s.max_len,
            s.embedding_dim,
            s.lstm_hidden_dim,
            s.image_dense_dim,
            s.image_input_dim,
        ] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for tensor in self.params.tensors() {
            for &v in tensor {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let truncated = |_| Error::TruncatedRecord {
            what: "model file",
            record: 0,
        };
        let mut head = [0u8; 6];
        r.read_exact(&mut head).map_err(truncated)?;
        let magic: [u8; 4] = head[..4].try_into().expect("4 bytes");
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic {
                expected: MODEL_MAGIC,
                found: magic,
            });
        }
        if head[4] != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(head[4]));
        }
        let kind = ArchitectureKind::from_code(head[5])
            .ok_or_else(|| Error::InvalidArchitecture(format!("unknown kind code {}", head[5])))?;
        let mut dims = [0usize; 6];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(truncated)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let spec = ArchitectureSpec {
            kind,
            vocab_size: dims[0],
            max_len: dims[1],
            embedding_dim: dims[2],
            lstm_hidden_dim: dims[3],
            image_dense_dim: dims[4],
            image_input_dim: dims[5],
        };
        spec.validate()?;
        let mut params = ModelParameters::zeros(&spec);
        for tensor in params.tensors_mut() {
            for v in tensor.iter_mut() {
                let mut b = [0u8; 4];
                r.read_exact(&mut b).map_err(truncated)?;
                *v = f64::from(f32::from_le_bytes(b));
            }
        }
        if !r.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} trailing bytes after model parameters",
                r.len()
            )));
        }
        NeuralModel::from_parts(spec, params)
    }
}

/// Overwrites word-embedding rows from a text table of `token v1 ... vE`
/// lines (word2vec/GloVe text layout). Tokens missing from the vocabulary
/// are skipped. Returns the number of rows replaced.
pub fn load_word_vectors(path: impl AsRef<Path>, vocab: &Vocabulary, model: &mut NeuralModel) -> Result<usize> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let dim = model.spec.embedding_dim;
    let mut replaced = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                what: "word vectors",
                line: n + 1,
                detail: e.to_string(),
            })?;
        // word2vec text files open with a "count dim" header line
        if n == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
            });
        }
        if let Some(idx) = vocab.index_of(token) {
            model
                .params
                .word_embedding
                .row_mut(idx)
                .iter_mut()
                .zip(values)
                .for_each(|(dst, v)| *dst = v);
            replaced += 1;
        }
    }
    Ok(replaced)
}
