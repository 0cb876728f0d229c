//! Identity/media data model and corpus ingestion.
//!
//! A corpus is an ordered list of [`EmbeddingRecord`]s. Metadata comes from a
//! line-delimited JSON manifest; vectors come from a little-endian binary
//! sidecar whose rows line up with manifest lines.

mod embeddings;
mod manifest;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embeddings::{
    load_embeddings, read_embeddings, save_embeddings, write_embeddings, EMBEDDING_MAGIC,
    EMBEDDING_VERSION,
};
pub use manifest::{load_manifest, parse_manifest, save_manifest, write_manifest};
pub use validate::{validate, Rule, Violation};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("manifest line {line}: duplicate media key {key}")]
    DuplicateKey { line: usize, key: String },
    #[error("manifest line {line}: unknown {field} value {value:?}")]
    UnknownEnum {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("embedding file: bad magic {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("embedding file: unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("embedding file: header declares {header} rows but manifest has {records} records")]
    CountMismatch { header: u64, records: usize },
    #[error("embedding file: dimension must be at least 1")]
    ZeroDimension,
    #[error("embedding file: truncated payload (expected {expected} bytes, found {found})")]
    Truncated { expected: u64, found: u64 },
    #[error("embedding file: non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("corpus failed validation: {0}")]
    Invalid(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Identifies one media item: a still image, or one frame of a video clip.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MediaKey {
    pub identity_id: String,
    pub media_id: String,
    pub clip_id: Option<String>,
    pub frame_index: Option<u64>,
}

impl MediaKey {
    pub fn still(identity_id: impl Into<String>, media_id: impl Into<String>) -> Self {
        Self {
            identity_id: identity_id.into(),
            media_id: media_id.into(),
            clip_id: None,
            frame_index: None,
        }
    }

    pub fn frame(
        identity_id: impl Into<String>,
        media_id: impl Into<String>,
        clip_id: impl Into<String>,
        frame_index: u64,
    ) -> Self {
        Self {
            identity_id: identity_id.into(),
            media_id: media_id.into(),
            clip_id: Some(clip_id.into()),
            frame_index: Some(frame_index),
        }
    }

    pub fn is_video(&self) -> bool {
        self.clip_id.is_some()
    }
}

impl fmt::Display for MediaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.identity_id, self.media_id)?;
        if let Some(clip) = &self.clip_id {
            write!(f, "/{clip}")?;
        }
        if let Some(frame) = self.frame_index {
            write!(f, "#{frame}")?;
        }
        Ok(())
    }
}

macro_rules! tag_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant,)+
            #[default]
            Unknown,
        }

        impl $name {
            pub const FIELD: &'static str = $field;

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                    $name::Unknown => "unknown",
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    "unknown" => Ok($name::Unknown),
                    other => Err(other.to_string()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

tag_enum!(
    /// Whether the subject's face is visible in the media.
    FaceVisibility, "face_visibility" { Included => "included", Restricted => "restricted" }
);
tag_enum!(
    RangeBand, "range_band" { Close => "close", LongRange => "long_range" }
);
tag_enum!(
    /// Capture platform.
    Platform, "platform" { Ground => "ground", Uav => "uav" }
);

/// Capture-condition metadata attached to every record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ConditionTags {
    pub clothing_set_id: String,
    pub face_visibility: FaceVisibility,
    pub range_band: RangeBand,
    pub platform: Platform,
}

/// Record metadata without a vector: one manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub key: MediaKey,
    pub tags: ConditionTags,
}

/// A manifest: ordered record metadata awaiting vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<RecordMeta>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub key: MediaKey,
    pub tags: ConditionTags,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn identity(&self) -> &str {
        &self.key.identity_id
    }
}

/// An ordered, immutable collection of embedding records with an identity index.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<EmbeddingRecord>,
    dim: usize,
    index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    /// Wraps records without checking invariants; see [`validate`].
    ///
    /// The corpus dimension is taken from the first record.
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Self {
        let dim = records.first().map_or(0, |r| r.vector.len());
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            index.entry(r.key.identity_id.clone()).or_default().push(i);
        }
        Self {
            records,
            dim,
            index,
        }
    }

    /// Wraps records and fails if any invariant is violated.
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let corpus = Self::from_records(records);
        let violations = validate(&corpus);
        if let Some(first) = violations.first() {
            return Err(CorpusError::Invalid(format!(
                "{} violation(s), first: {first}",
                violations.len()
            )));
        }
        Ok(corpus)
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &EmbeddingRecord {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Identity ids in sorted order.
    pub fn identities(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn identity_count(&self) -> usize {
        self.index.len()
    }

    /// Record positions for an identity, in corpus order.
    pub fn records_of(&self, identity: &str) -> &[usize] {
        self.index.get(identity).map_or(&[], Vec::as_slice)
    }

    pub fn index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.index
    }

    /// Metadata-only view (what a manifest stores).
    pub fn manifest(&self) -> Manifest {
        Manifest {
            records: self
                .records
                .iter()
                .map(|r| RecordMeta {
                    key: r.key.clone(),
                    tags: r.tags.clone(),
                })
                .collect(),
        }
    }

    /// Replaces every vector, e.g. with head embeddings. Row `i` goes to record `i`.
    pub fn with_vectors(&self, vectors: Vec<Vec<f64>>) -> Self {
        assert_eq!(vectors.len(), self.records.len(), "one vector per record");
        let records = self
            .records
            .iter()
            .zip(vectors)
            .map(|(r, v)| EmbeddingRecord {
                key: r.key.clone(),
                tags: r.tags.clone(),
                vector: v,
            })
            .collect();
        Self::from_records(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_parsing_is_closed() {
        assert_eq!("uav".parse::<Platform>(), Ok(Platform::Uav));
        assert_eq!("long_range".parse::<RangeBand>(), Ok(RangeBand::LongRange));
        assert_eq!(
            "unknown".parse::<FaceVisibility>(),
            Ok(FaceVisibility::Unknown)
        );
        assert!("blurred".parse::<FaceVisibility>().is_err());
        assert_eq!(FaceVisibility::default(), FaceVisibility::Unknown);
    }

    #[test]
    fn index_follows_record_order() {
        let rec = |id: &str, m: &str| EmbeddingRecord {
            key: MediaKey::still(id, m),
            tags: ConditionTags::default(),
            vector: vec![0.0],
        };
        let c = Corpus::from_records(vec![rec("b", "1"), rec("a", "1"), rec("b", "2")]);
        assert_eq!(c.identities().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(c.records_of("b"), &[0, 2]);
        assert_eq!(c.records_of("zz"), &[] as &[usize]);
        assert_eq!(c.dim(), 1);
    }

    #[test]
    fn media_key_display() {
        assert_eq!(
            MediaKey::frame("p1", "v3", "c0", 12).to_string(),
            "p1/v3/c0#12"
        );
        assert_eq!(MediaKey::still("p1", "img").to_string(), "p1/img");
    }
}
