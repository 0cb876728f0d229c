use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{l2_normalize, GalleryTemplate, ProbeEmbedding, Result, TemplateError};
use crate::corpus::ConditionTags;
use crate::linalg::{self, Matrix};

/// Gallery columns per cache tile.
pub const DEFAULT_BLOCK_COLS: usize = 256;
/// Probe rows sharing one pass over a gallery tile.
const TILE_ROWS: usize = 8;

/// Similarity used for matching. Higher is more similar under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    /// Negated Euclidean distance.
    #[serde(alias = "euclidean")]
    NegativeEuclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::NegativeEuclidean => "negative_euclidean",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" | "negative_euclidean" => Ok(Metric::NegativeEuclidean),
            other => Err(format!(
                "unknown metric {other:?} (expected cosine or euclidean)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub block_cols: usize,
    pub workers: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            block_cols: DEFAULT_BLOCK_COLS,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInfo {
    pub probe_id: String,
    pub true_identity: String,
    #[serde(default)]
    pub tags: ConditionTags,
}

impl From<&ProbeEmbedding> for ProbeInfo {
    fn from(p: &ProbeEmbedding) -> Self {
        Self {
            probe_id: p.probe_id.clone(),
            true_identity: p.true_identity.clone(),
            tags: p.tags.clone(),
        }
    }
}

/// Probes × gallery similarities with label alignment.
///
/// Every probe's identity is enrolled; `truth[i]` is the column of probe `i`'s
/// own template.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    probes: Vec<ProbeInfo>,
    gallery: Vec<String>,
    scores: Matrix,
    metric: Metric,
    truth: Vec<usize>,
}

impl ScoreMatrix {
    /// Checks shape, closed-set enrollment, and finiteness.
    pub fn new(
        probes: Vec<ProbeInfo>,
        gallery: Vec<String>,
        scores: Matrix,
        metric: Metric,
    ) -> Result<Self> {
        if scores.rows() != probes.len() || scores.cols() != gallery.len() {
            return Err(TemplateError::Shape {
                rows: scores.rows(),
                cols: scores.cols(),
            });
        }
        let mut column: HashMap<&str, usize> = HashMap::with_capacity(gallery.len());
        for (j, g) in gallery.iter().enumerate() {
            if column.insert(g, j).is_some() {
                return Err(TemplateError::DuplicateGallery(g.clone()));
            }
        }
        let truth = probes
            .iter()
            .map(|p| {
                column
                    .get(p.true_identity.as_str())
                    .copied()
                    .ok_or_else(|| TemplateError::NotEnrolled {
                        probe: p.probe_id.clone(),
                        identity: p.true_identity.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        for i in 0..scores.rows() {
            if let Some(j) = scores.row(i).iter().position(|s| !s.is_finite()) {
                return Err(TemplateError::NonFinite { row: i, col: j });
            }
        }
        Ok(Self {
            probes,
            gallery,
            scores,
            metric,
            truth,
        })
    }

    /// Convenience for tests and fixtures: probe `i` is named `p{i}`.
    pub fn from_labels(
        probe_identities: &[&str],
        gallery: &[&str],
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let probes = probe_identities
            .iter()
            .enumerate()
            .map(|(i, id)| ProbeInfo {
                probe_id: format!("p{i}"),
                true_identity: id.to_string(),
                tags: ConditionTags::default(),
            })
            .collect();
        let m = if scores.is_empty() {
            Matrix::zeros(0, gallery.len())
        } else {
            Matrix::from_rows(&scores).ok_or(TemplateError::Shape {
                rows: scores.len(),
                cols: gallery.len(),
            })?
        };
        Self::new(
            probes,
            gallery.iter().map(|s| s.to_string()).collect(),
            m,
            Metric::Cosine,
        )
    }

    pub fn probes(&self) -> &[ProbeInfo] {
        &self.probes
    }

    pub fn gallery(&self) -> &[String] {
        &self.gallery
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_probes(&self) -> usize {
        self.probes.len()
    }

    pub fn n_gallery(&self) -> usize {
        self.gallery.len()
    }

    /// Column index of probe `i`'s true identity.
    pub fn true_column(&self, i: usize) -> usize {
        self.truth[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.scores.row(i)
    }

    pub fn genuine_score(&self, i: usize) -> f64 {
        self.scores.get(i, self.truth[i])
    }

    /// Sub-matrix over the listed probe rows, in the given order.
    pub fn select_probes(&self, rows: &[usize]) -> Self {
        Self {
            probes: rows.iter().map(|&i| self.probes[i].clone()).collect(),
            gallery: self.gallery.clone(),
            scores: self.scores.select_rows(rows),
            metric: self.metric,
            truth: rows.iter().map(|&i| self.truth[i]).collect(),
        }
    }

    /// Reorders gallery columns: new column `k` is old column `order[k]`.
    pub fn permute_gallery(&self, order: &[usize]) -> Result<Self> {
        let gallery = order.iter().map(|&j| self.gallery[j].clone()).collect();
        let mut scores = Matrix::zeros(self.n_probes(), order.len());
        for i in 0..self.n_probes() {
            let src = self.scores.row(i);
            for (k, &j) in order.iter().enumerate() {
                scores.set(i, k, src[j]);
            }
        }
        Self::new(self.probes.clone(), gallery, scores, self.metric)
    }

    /// Applies `f` to every score; used to check transform invariance.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.scores.data().iter().map(|&s| f(s)).collect();
        Self::new(
            self.probes.clone(),
            self.gallery.clone(),
            Matrix::from_vec(self.n_probes(), self.n_gallery(), data),
            self.metric,
        )
    }
}

fn pack<'a>(
    vectors: impl Iterator<Item = &'a [f64]>,
    dim: usize,
    normalize: bool,
) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut rows = 0;
    for v in vectors {
        if v.len() != dim {
            return Err(TemplateError::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        if normalize {
            data.extend(l2_normalize(v)?);
        } else {
            data.extend_from_slice(v);
        }
        rows += 1;
    }
    Ok(Matrix::from_vec(rows, dim, data))
}

/// Fills `out` (rows `row0..`, full gallery width) tile by tile.
fn score_rows(
    probes: &Matrix,
    gallery: &Matrix,
    metric: Metric,
    block_cols: usize,
    row0: usize,
    out: &mut [f64],
) {
    let n_gallery = gallery.rows();
    let n_rows = out.len() / n_gallery.max(1);
    for t0 in (0..n_rows).step_by(TILE_ROWS) {
        let t1 = (t0 + TILE_ROWS).min(n_rows);
        for c0 in (0..n_gallery).step_by(block_cols) {
            let c1 = (c0 + block_cols).min(n_gallery);
            for j in c0..c1 {
                let g = gallery.row(j);
                for r in t0..t1 {
                    let p = probes.row(row0 + r);
                    out[r * n_gallery + j] = match metric {
                        Metric::Cosine => linalg::dot(p, g),
                        Metric::NegativeEuclidean => -linalg::squared_distance(p, g).sqrt(),
                    };
                }
            }
        }
    }
}

/// Scores every probe against every gallery template.
///
/// Cosine scores are dot products of L2-normalized vectors. The result does not
/// depend on `opts`: each entry is computed by the same kernel regardless of
/// tiling or worker count.
pub fn score_matrix(
    probes: &[ProbeEmbedding],
    gallery: &[GalleryTemplate],
    metric: Metric,
    opts: &ScoreOptions,
) -> Result<ScoreMatrix> {
    if opts.workers == 0 {
        return Err(TemplateError::ZeroWorkers);
    }
    let dim = gallery
        .first()
        .map(|g| g.vector.len())
        .or_else(|| probes.first().map(|p| p.vector.len()))
        .unwrap_or(0);
    let normalize = metric == Metric::Cosine;
    let pm = pack(probes.iter().map(|p| p.vector.as_slice()), dim, normalize)?;
    let gm = pack(gallery.iter().map(|g| g.vector.as_slice()), dim, normalize)?;
    let scores = score_packed(&pm, &gm, metric, opts)?;
    ScoreMatrix::new(
        probes.iter().map(ProbeInfo::from).collect(),
        gallery.iter().map(|g| g.identity_id.clone()).collect(),
        scores,
        metric,
    )
}

/// Raw kernel over packed (already normalized, for cosine) rows.
pub(crate) fn score_packed(
    probes: &Matrix,
    gallery: &Matrix,
    metric: Metric,
    opts: &ScoreOptions,
) -> Result<Matrix> {
    if probes.cols() != gallery.cols() && probes.rows() > 0 && gallery.rows() > 0 {
        return Err(TemplateError::DimensionMismatch {
            left: probes.cols(),
            right: gallery.cols(),
        });
    }
    let block = opts.block_cols.max(1);
    let n_gallery = gallery.rows();
    let mut out = Matrix::zeros(probes.rows(), n_gallery);
    if n_gallery == 0 || probes.rows() == 0 {
        return Ok(out);
    }
    if opts.workers == 1 {
        score_rows(probes, gallery, metric, block, 0, out.data_mut());
        return Ok(out);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| TemplateError::ThreadPool(e.to_string()))?;
    // chunks of whole tiles so each task writes a disjoint row band
    let rows_per_task = TILE_ROWS * 4;
    pool.install(|| {
        out.data_mut()
            .par_chunks_mut(rows_per_task * n_gallery)
            .enumerate()
            .for_each(|(k, chunk)| {
                score_rows(probes, gallery, metric, block, k * rows_per_task, chunk)
            });
    });
    Ok(out)
}

/// Raw-vector scoring entry point used by benchmarks: `probes` and `gallery`
/// are row-major matrices of vectors.
pub fn score_vectors(
    probes: &Matrix,
    gallery: &Matrix,
    metric: Metric,
    opts: &ScoreOptions,
) -> Result<Matrix> {
    if opts.workers == 0 {
        return Err(TemplateError::ZeroWorkers);
    }
    if metric == Metric::Cosine {
        let pn = pack(probes.iter_rows(), probes.cols(), true)?;
        let gn = pack(gallery.iter_rows(), gallery.cols(), true)?;
        score_packed(&pn, &gn, metric, opts)
    } else {
        score_packed(probes, gallery, metric, opts)
    }
}
