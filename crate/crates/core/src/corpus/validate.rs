use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Two records share (identity, media, clip, frame).
    DuplicateKey,
    /// Vector length differs from the corpus dimension.
    Dimension,
    /// Vector holds NaN or infinity.
    NonFinite,
    /// `clip_id` and `frame_index` must be both present (video) or both absent (still).
    ClipConsistency,
    /// Corpus dimension is zero.
    ZeroDimension,
    EmptyIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub record: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "record {}: {:?}: {}",
            self.record, self.rule, self.detail
        )
    }
}

/// Checks every corpus invariant. An empty result means the corpus is well formed.
pub fn validate(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let dim = corpus.dim();
    if dim == 0 && !corpus.is_empty() {
        out.push(Violation {
            record: 0,
            rule: Rule::ZeroDimension,
            detail: "corpus dimension must be at least 1".into(),
        });
    }
    let mut first_seen: HashMap<&super::MediaKey, usize> = HashMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        if let Some(&j) = first_seen.get(&r.key) {
            out.push(Violation {
                record: i,
                rule: Rule::DuplicateKey,
                detail: format!("key {} first seen at record {j}", r.key),
            });
        } else {
            first_seen.insert(&r.key, i);
        }
        if r.key.identity_id.is_empty() {
            out.push(Violation {
                record: i,
                rule: Rule::EmptyIdentity,
                detail: "identity_id is empty".into(),
            });
        }
        if r.vector.len() != dim {
            out.push(Violation {
                record: i,
                rule: Rule::Dimension,
                detail: format!("dimension {} but corpus has {dim}", r.vector.len()),
            });
        }
        if let Some(col) = r.vector.iter().position(|v| !v.is_finite()) {
            out.push(Violation {
                record: i,
                rule: Rule::NonFinite,
                detail: format!("non-finite value at column {col}"),
            });
        }
        if r.key.clip_id.is_some() != r.key.frame_index.is_some() {
            let detail = if r.key.clip_id.is_some() {
                "clip_id set on a still (no frame_index)"
            } else {
                "frame_index set without clip_id"
            };
            out.push(Violation {
                record: i,
                rule: Rule::ClipConsistency,
                detail: detail.into(),
            });
        }
    }
    out
}
