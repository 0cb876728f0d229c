//! Binary embedding sidecar.
//!
//! Layout (little-endian): magic `BIDE`, `u32` version, `u32` dim, `u64` count,
//! then `count × dim` `f32` values, row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Corpus, CorpusError, EmbeddingRecord, Manifest, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"BIDE";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Decodes an embedding payload and attaches row `i` to manifest record `i`.
pub fn read_embeddings<R: Read>(mut input: R, meta: &Manifest) -> Result<Corpus> {
    let io = |source| CorpusError::Io {
        path: "<embedding stream>".into(),
        source,
    };
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() < HEADER_LEN {
        return Err(CorpusError::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != EMBEDDING_MAGIC {
        return Err(CorpusError::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(CorpusError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(CorpusError::ZeroDimension);
    }
    if count != meta.len() as u64 {
        return Err(CorpusError::CountMismatch {
            header: count,
            records: meta.len(),
        });
    }
    let expected = HEADER_LEN as u64 + count * dim as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(CorpusError::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }

    let payload = &bytes[HEADER_LEN..];
    let mut records = Vec::with_capacity(meta.len());
    for (row, m) in meta.records.iter().enumerate() {
        let raw = &payload[row * dim * 4..(row + 1) * dim * 4];
        let mut vector = Vec::with_capacity(dim);
        for (col, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(CorpusError::NonFinite { row, col });
            }
            vector.push(f64::from(v));
        }
        records.push(EmbeddingRecord {
            key: m.key.clone(),
            tags: m.tags.clone(),
            vector,
        });
    }
    let mut corpus = Corpus::from_records(records);
    corpus.dim = dim;
    Ok(corpus)
}

pub fn load_embeddings(path: impl AsRef<Path>, meta: &Manifest) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_embeddings(std::io::BufReader::new(file), meta)
}

/// Encodes every record vector as `f32`. Vectors must share the corpus dimension.
pub fn write_embeddings<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    out.write_all(&EMBEDDING_MAGIC)?;
    out.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
    out.write_all(&(corpus.dim() as u32).to_le_bytes())?;
    out.write_all(&(corpus.len() as u64).to_le_bytes())?;
    for r in corpus.records() {
        if r.vector.len() != corpus.dim() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!(
                    "record {} has dimension {}, corpus has {}",
                    r.key,
                    r.vector.len(),
                    corpus.dim()
                ),
            ));
        }
        for &v in &r.vector {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_embeddings(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_embeddings(corpus, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConditionTags, MediaKey, RecordMeta};

    fn meta(n: usize) -> Manifest {
        Manifest {
            records: (0..n)
                .map(|i| RecordMeta {
                    key: MediaKey::still("p", format!("m{i}")),
                    tags: ConditionTags::default(),
                })
                .collect(),
        }
    }

    fn encode(dim: u32, count: u64, values: &[f32]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"BIDE");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&dim.to_le_bytes());
        b.extend_from_slice(&count.to_le_bytes());
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn two_four_dim_rows() {
        let bytes = encode(4, 2, &[1., 2., 3., 4., 5., 6., 7., 8.]);
        let c = read_embeddings(&bytes[..], &meta(2)).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.record(1).vector, vec![5., 6., 7., 8.]);
    }

    #[test]
    fn count_mismatch() {
        let bytes = encode(4, 3, &[0.0; 12]);
        assert!(matches!(
            read_embeddings(&bytes[..], &meta(2)),
            Err(CorpusError::CountMismatch {
                header: 3,
                records: 2
            })
        ));
    }

    #[test]
    fn nan_payload_is_rejected() {
        let bytes = encode(2, 1, &[0.0, f32::NAN]);
        assert!(matches!(
            read_embeddings(&bytes[..], &meta(1)),
            Err(CorpusError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(2, 1, &[0.0, 0.0]);
        bytes[0] = b'X';
        assert!(matches!(
            read_embeddings(&bytes[..], &meta(1)),
            Err(CorpusError::BadMagic { .. })
        ));

        let mut bytes = encode(2, 1, &[0.0, 0.0]);
        bytes[4] = 2;
        assert!(matches!(
            read_embeddings(&bytes[..], &meta(1)),
            Err(CorpusError::UnsupportedVersion(2))
        ));

        let bytes = encode(2, 1, &[0.0]);
        assert!(matches!(
            read_embeddings(&bytes[..], &meta(1)),
            Err(CorpusError::Truncated { .. })
        ));
    }

    #[test]
    fn writer_matches_hand_encoding() {
        let c = read_embeddings(&encode(3, 1, &[0.5, -1.0, 2.0])[..], &meta(1)).unwrap();
        let mut out = Vec::new();
        write_embeddings(&c, &mut out).unwrap();
        assert_eq!(out, encode(3, 1, &[0.5, -1.0, 2.0]));
    }
}
