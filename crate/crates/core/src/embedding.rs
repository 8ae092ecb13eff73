//! Image embeddings: the `NICE` binary store, CSV import, and a seeded mock
//! encoder that stands in for a CNN feature extractor.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "NICE" | version: u8 = 1 | dim: u32 | count: u64
//! count x ( id_len: u16 | id: UTF-8 bytes | dim x f32 )
//! ```

use std::collections::HashMap;
use std::fs;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"NICE";
pub const VERSION: u8 = 1;

/// Feature width of the VGG16 penultimate layer.
pub const VGG16_DIM: usize = 4096;

/// A fixed-length image feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEmbedding {
    values: Vec<f32>,
}

impl ImageEmbedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding must have dim >= 1".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "embedding entry {pos} is not finite"
            )));
        }
        Ok(ImageEmbedding { values })
    }

    pub fn zeros(dim: usize) -> Self {
        ImageEmbedding {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Deterministic stand-in for a CNN encoder: entries in `[0, 1)` drawn from
/// a generator seeded by `(photo_id, seed)`.
pub fn mock_embed(photo_id: &str, dim: usize, seed: u64) -> ImageEmbedding {
    // FNV-1a keeps the id hash stable across Rust releases, unlike SipHash
    // with the std default keys.
    let mut h = Fnv1a::default();
    h.write(photo_id.as_bytes());
    h.write(&[0xff]);
    h.write(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
    let values = (0..dim).map(|_| rng.gen::<f32>()).collect();
    ImageEmbedding { values }
}

struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv1a {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// Embeddings keyed by photo id, all of the same dimension. Insertion order
/// is preserved and is the on-disk order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    embeddings: Vec<ImageEmbedding>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            ids: Vec::new(),
            embeddings: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, photo_id: impl Into<String>, embedding: ImageEmbedding) -> Result<()> {
        let photo_id = photo_id.into();
        if embedding.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: embedding.dim(),
            });
        }
        if photo_id.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "photo_id longer than {} bytes",
                u16::MAX
            )));
        }
        if self.index.contains_key(&photo_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate photo_id {photo_id:?}"
            )));
        }
        self.index.insert(photo_id.clone(), self.ids.len());
        self.ids.push(photo_id);
        self.embeddings.push(embedding);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, photo_id: &str) -> Option<&ImageEmbedding> {
        self.index.get(photo_id).map(|&i| &self.embeddings[i])
    }

    /// Like [`get`](Self::get) but reports the missing id as an error.
    pub fn require(&self, photo_id: &str) -> Result<&ImageEmbedding> {
        self.get(photo_id)
            .ok_or_else(|| Error::MissingEmbedding(photo_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ImageEmbedding)> {
        self.ids.iter().map(String::as_str).zip(&self.embeddings)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&[VERSION])?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (id, emb) in self.iter() {
            w.write_all(&(id.len() as u16).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for v in emb.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        if r.read_exact(&mut magic).is_err() {
            let mut found = [0u8; 4];
            found[..bytes.len().min(4)].copy_from_slice(&bytes[..bytes.len().min(4)]);
            return Err(Error::BadMagic {
                expected: MAGIC,
                found,
            });
        }
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let header = |_| Error::TruncatedRecord {
            what: "embedding header",
            record: 0,
        };
        let version = read_array::<1>(&mut r).map_err(header)?[0];
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(read_array(&mut r).map_err(header)?) as usize;
        let count = u64::from_le_bytes(read_array(&mut r).map_err(header)?);
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be >= 1".into()));
        }

        let mut store = EmbeddingStore::new(dim);
        for record in 0..count {
            let truncated = |_| Error::TruncatedRecord {
                what: "embedding store",
                record,
            };
            let id_len = u16::from_le_bytes(read_array(&mut r).map_err(truncated)?) as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id).map_err(truncated)?;
            let id = String::from_utf8(id).map_err(|e| Error::Parse {
                what: "embedding store",
                line: record as usize,
                detail: e.to_string(),
            })?;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(f32::from_le_bytes(read_array(&mut r).map_err(truncated)?));
            }
            store.insert(id, ImageEmbedding::new(values)?)?;
        }
        Ok(store)
    }

    /// Imports `photo_id,v1,...,vdim` rows. A first line whose second field
    /// is not a number is treated as a header and skipped.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store: Option<EmbeddingStore> = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim().to_string();
            let parsed: std::result::Result<Vec<f32>, _> =
                fields.map(|f| f.trim().parse::<f32>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if n == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        what: "embedding CSV",
                        line: n + 1,
                        detail: e.to_string(),
                    })
                }
            };
            let store = store.get_or_insert_with(|| EmbeddingStore::new(values.len()));
            store.insert(id, ImageEmbedding::new(values)?)?;
        }
        store.ok_or(Error::EmptyCorpus)
    }
}

fn read_array<const N: usize>(r: &mut &[u8]) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store_of(ids: &[&str], dim: usize) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(dim);
        for id in ids {
            s.insert(*id, mock_embed(id, dim, 3)).unwrap();
        }
        s
    }

    fn bytes_of(store: &EmbeddingStore) -> Vec<u8> {
        let mut buf = Vec::new();
        store.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn mock_embed_is_deterministic_and_id_sensitive() {
        assert_eq!(mock_embed("a", 4, 7), mock_embed("a", 4, 7));
        assert_ne!(mock_embed("a", 4, 7), mock_embed("b", 4, 7));
        assert_ne!(mock_embed("a", 4, 7), mock_embed("a", 4, 8));
        let e = mock_embed("a", 8, 7);
        assert_eq!(e.dim(), 8);
        assert!(e.values().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.nice");
        let s = store_of(&["p2", "p1"], 4);
        s.save(&p).unwrap();
        let back = EmbeddingStore::load(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 4);
        let order: Vec<&str> = back.iter().map(|(id, _)| id).collect();
        assert_eq!(order, ["p2", "p1"]);
    }

    #[test]
    fn empty_store_keeps_header_dim() {
        let back = EmbeddingStore::from_bytes(&bytes_of(&EmbeddingStore::new(4))).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 4);
    }

    #[test]
    fn short_record_is_truncation_error() {
        let mut bytes = bytes_of(&store_of(&["x"], 4));
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(
            EmbeddingStore::from_bytes(&bytes),
            Err(Error::TruncatedRecord { record: 0, .. })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = bytes_of(&store_of(&["x"], 2));
        bytes[0] = b'X';
        assert!(matches!(EmbeddingStore::from_bytes(&bytes), Err(Error::BadMagic { .. })));
        let mut bytes = bytes_of(&store_of(&["x"], 2));
        bytes[4] = 9;
        assert!(matches!(EmbeddingStore::from_bytes(&bytes), Err(Error::UnsupportedVersion(9))));
        assert!(matches!(EmbeddingStore::from_bytes(b"NI"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn insert_checks_dimension_and_duplicates() {
        let mut s = EmbeddingStore::new(3);
        assert!(matches!(
            s.insert("a", mock_embed("a", 4, 0)),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        ));
        s.insert("a", mock_embed("a", 3, 0)).unwrap();
        assert!(s.insert("a", mock_embed("a", 3, 0)).is_err());
        assert!(matches!(s.require("zz"), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "photo_id,v1,v2\nabc,0.5,1.5\ndef,-1,2\n").unwrap();
        let s = EmbeddingStore::from_csv(&p).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get("def").unwrap().values(), &[-1.0, 2.0]);
        fs::write(&p, "abc,0.5,1.5\ndef,1\n").unwrap();
        assert!(matches!(
            EmbeddingStore::from_csv(&p),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(ImageEmbedding::new(vec![1.0, f32::NAN]).is_err());
        assert!(ImageEmbedding::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(
            rows in proptest::collection::vec(
                ("[a-z0-9_-]{1,12}", proptest::collection::vec(-1e6f32..1e6, 3)),
                0..8,
            )
        ) {
            let mut s = EmbeddingStore::new(3);
            for (id, vals) in rows {
                if s.get(&id).is_none() {
                    s.insert(id, ImageEmbedding::new(vals).unwrap()).unwrap();
                }
            }
            let bytes = bytes_of(&s);
            let back = EmbeddingStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(bytes_of(&back), bytes);
        }
    }
}
