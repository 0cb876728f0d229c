//! Gallery templates, probe-clip embeddings, and probe × gallery scoring.
//!
//! Gallery templates average every selected record of an identity. Probe
//! embeddings average the frames of one video clip, so each clip yields one
//! probe. Means are accumulated with compensated summation, which makes them
//! independent of record order to well below 1e-12.

mod export;
mod score;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConditionTags, Corpus};
use crate::linalg::{self, CompensatedSum};

pub use export::{matrix_csv, matrix_metadata_json, write_score_matrix, ScoreMatrixMeta};
pub use score::{
    score_matrix, score_vectors, Metric, ProbeInfo, ScoreMatrix, ScoreOptions, DEFAULT_BLOCK_COLS,
};

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("record index {index} out of range for corpus of {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("identity {0:?} has no selected records")]
    NoRecords(String),
    #[error("record {index} ({key}) is a still image and cannot form a probe clip")]
    StillInProbe { index: usize, key: String },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("probe {probe:?} has identity {identity:?}, which is not enrolled in the gallery")]
    NotEnrolled { probe: String, identity: String },
    #[error("gallery identity {0:?} appears more than once")]
    DuplicateGallery(String),
    #[error("score matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("score matrix shape {rows}×{cols} does not match its labels")]
    Shape { rows: usize, cols: usize },
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T, E = TemplateError> = std::result::Result<T, E>;

/// How vectors are normalized around averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateNorm {
    /// Plain arithmetic mean of the raw vectors.
    #[default]
    Raw,
    /// Mean of raw vectors, then L2-normalized.
    MeanThenNormalize,
    /// Each vector L2-normalized, then averaged.
    NormalizeThenMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryTemplate {
    pub identity_id: String,
    pub vector: Vec<f64>,
    pub source_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEmbedding {
    /// `identity/clip`.
    pub probe_id: String,
    pub true_identity: String,
    /// Tags of the clip's first selected frame.
    pub tags: ConditionTags,
    pub vector: Vec<f64>,
    pub frame_count: usize,
}

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = linalg::norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(TemplateError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn check_selection(corpus: &Corpus, selection: &[usize]) -> Result<()> {
    if selection.is_empty() {
        return Err(TemplateError::EmptySelection);
    }
    if let Some(&index) = selection.iter().find(|&&i| i >= corpus.len()) {
        return Err(TemplateError::OutOfRange {
            index,
            len: corpus.len(),
        });
    }
    Ok(())
}

/// Compensated mean of the given corpus rows, applying `norm`.
fn mean_of(corpus: &Corpus, rows: &[usize], norm: TemplateNorm) -> Result<Vec<f64>> {
    let dim = corpus.record(rows[0]).vector.len();
    let mut acc = vec![CompensatedSum::new(); dim];
    for &i in rows {
        let v = &corpus.record(i).vector;
        if v.len() != dim {
            return Err(TemplateError::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        if norm == TemplateNorm::NormalizeThenMean {
            for (a, x) in acc.iter_mut().zip(l2_normalize(v)?) {
                a.add(x);
            }
        } else {
            for (a, &x) in acc.iter_mut().zip(v) {
                a.add(x);
            }
        }
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = acc.iter().map(|a| a.value() / n).collect();
    match norm {
        TemplateNorm::MeanThenNormalize => l2_normalize(&mean),
        _ => Ok(mean),
    }
}

/// One template per identity present in `selection`, ordered by identity id.
pub fn build_gallery_templates(
    corpus: &Corpus,
    selection: &[usize],
    norm: TemplateNorm,
) -> Result<Vec<GalleryTemplate>> {
    check_selection(corpus, selection)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in selection {
        groups
            .entry(corpus.record(i).identity())
            .or_default()
            .push(i);
    }
    groups
        .into_iter()
        .map(|(id, rows)| {
            Ok(GalleryTemplate {
                identity_id: id.to_string(),
                vector: mean_of(corpus, &rows, norm)?,
                source_count: rows.len(),
            })
        })
        .collect()
}

/// Like [`build_gallery_templates`] but enrolls exactly `identities`, in that
/// order, failing if any of them has no selected record.
pub fn build_gallery_templates_for(
    corpus: &Corpus,
    selection: &[usize],
    identities: &[String],
    norm: TemplateNorm,
) -> Result<Vec<GalleryTemplate>> {
    let all = build_gallery_templates(corpus, selection, norm)?;
    let mut by_id: BTreeMap<String, GalleryTemplate> = all
        .into_iter()
        .map(|t| (t.identity_id.clone(), t))
        .collect();
    identities
        .iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| TemplateError::NoRecords(id.clone()))
        })
        .collect()
}

/// One probe per (identity, clip) in order of first appearance in `selection`.
pub fn build_probe_embeddings(
    corpus: &Corpus,
    selection: &[usize],
    norm: TemplateNorm,
) -> Result<Vec<ProbeEmbedding>> {
    check_selection(corpus, selection)?;
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for &i in selection {
        let r = corpus.record(i);
        let clip = r
            .key
            .clip_id
            .clone()
            .ok_or_else(|| TemplateError::StillInProbe {
                index: i,
                key: r.key.to_string(),
            })?;
        let k = (r.key.identity_id.clone(), clip);
        let rows = groups.entry(k.clone()).or_default();
        if rows.is_empty() {
            order.push(k);
        }
        rows.push(i);
    }
    order
        .into_iter()
        .map(|k| {
            let rows = &groups[&k];
            Ok(ProbeEmbedding {
                probe_id: format!("{}/{}", k.0, k.1),
                true_identity: k.0.clone(),
                tags: corpus.record(rows[0]).tags.clone(),
                vector: mean_of(corpus, rows, norm)?,
                frame_count: rows.len(),
            })
        })
        .collect()
}

/// Each selected record becomes its own probe (still-image probing).
pub fn build_record_probes(corpus: &Corpus, selection: &[usize]) -> Result<Vec<ProbeEmbedding>> {
    check_selection(corpus, selection)?;
    Ok(selection
        .iter()
        .map(|&i| {
            let r = corpus.record(i);
            ProbeEmbedding {
                probe_id: r.key.to_string(),
                true_identity: r.key.identity_id.clone(),
                tags: r.tags.clone(),
                vector: r.vector.clone(),
                frame_count: 1,
            }
        })
        .collect())
}
