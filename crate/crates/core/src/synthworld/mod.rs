//! Synthetic identity worlds with known structure.
//!
//! A record's feature vector is `[latent | 0] + clothing + view + frame`: the
//! identity latent fills the first `identity_dim` coordinates, the per-set
//! clothing offset lives only in the trailing `nuisance_dim` coordinates, and
//! the per-clip view offset and per-frame noise touch every coordinate.
//! Identity latents sit on a sphere with a minimum pairwise separation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    self, ConditionTags, Corpus, CorpusError, EmbeddingRecord, FaceVisibility, MediaKey, Platform,
    RangeBand,
};
use crate::linalg::{self, Matrix};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("could not place identity {placed} of {wanted} at separation {separation} after {attempts} attempts")]
    Separation {
        placed: usize,
        wanted: usize,
        separation: f64,
        attempts: usize,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ground truth: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = WorldError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_identities: usize,
    pub identity_dim: usize,
    pub nuisance_dim: usize,
    pub clothing_sets_per_id: usize,
    pub clips_per_set: usize,
    pub frames_per_clip: usize,
    /// σ_c, per nuisance coordinate.
    pub clothing_scale: f64,
    /// σ_v, per coordinate.
    pub view_noise: f64,
    /// σ_f, per coordinate.
    pub frame_noise: f64,
    pub n_desc: usize,
    pub latent_radius: f64,
    pub min_separation: f64,
    pub seed: u64,
    /// Seeds the descriptor map alone, so worlds with different `seed` can
    /// share one map.
    pub descriptor_seed: u64,
    pub id_prefix: String,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_identities: 200,
            identity_dim: 16,
            nuisance_dim: 48,
            clothing_sets_per_id: 3,
            clips_per_set: 2,
            frames_per_clip: 4,
            clothing_scale: 0.2,
            view_noise: 0.05,
            frame_noise: 0.05,
            n_desc: 30,
            latent_radius: 1.0,
            min_separation: 0.5,
            seed: 0,
            descriptor_seed: 0,
            id_prefix: "id".into(),
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

impl WorldConfig {
    pub fn feature_dim(&self) -> usize {
        self.identity_dim + self.nuisance_dim
    }

    pub fn record_count(&self) -> usize {
        self.n_identities * self.clothing_sets_per_id * self.clips_per_set * self.frames_per_clip
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_identities", self.n_identities),
            ("identity_dim", self.identity_dim),
            ("nuisance_dim", self.nuisance_dim),
            ("clothing_sets_per_id", self.clothing_sets_per_id),
            ("clips_per_set", self.clips_per_set),
            ("frames_per_clip", self.frames_per_clip),
            ("n_desc", self.n_desc),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(WorldError::InvalidConfig(format!(
                "{name} must be at least 1"
            )));
        }
        let scales = [
            ("clothing_scale", self.clothing_scale),
            ("view_noise", self.view_noise),
            ("frame_noise", self.frame_noise),
            ("min_separation", self.min_separation),
        ];
        if let Some((name, _)) = scales.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(WorldError::InvalidConfig(format!(
                "{name} must be finite and non-negative"
            )));
        }
        if !(self.latent_radius.is_finite() && self.latent_radius > 0.0) {
            return Err(WorldError::InvalidConfig(
                "latent_radius must be positive".into(),
            ));
        }
        if self.min_separation > 2.0 * self.latent_radius {
            return Err(WorldError::InvalidConfig(
                "min_separation exceeds the sphere diameter".into(),
            ));
        }
        Ok(())
    }

    pub fn identity_name(&self, i: usize) -> String {
        format!("{}{:04}", self.id_prefix, i)
    }
}

/// Where a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOrigin {
    pub identity: usize,
    pub clothing_set: usize,
    pub clip: usize,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: WorldConfig,
    pub identity_ids: Vec<String>,
    /// One per identity, `identity_dim` long.
    pub latents: Vec<Vec<f64>>,
    /// n_desc × identity_dim.
    pub descriptor_map: Matrix,
    /// `descriptor_map · latent`, one per identity.
    pub descriptors: Vec<Vec<f64>>,
    /// `[identity][set]`, `nuisance_dim` long.
    pub clothing_offsets: Vec<Vec<Vec<f64>>>,
    /// `[identity][set][clip]`, full feature length.
    pub view_offsets: Vec<Vec<Vec<Vec<f64>>>>,
    /// Parallel to the corpus records.
    pub origins: Vec<RecordOrigin>,
}

impl GroundTruth {
    /// Clean signal of a record, before frame noise and f32 storage rounding.
    pub fn noiseless(&self, origin: &RecordOrigin) -> Vec<f64> {
        let c = &self.config;
        let mut v = self.latents[origin.identity].clone();
        v.extend(&self.clothing_offsets[origin.identity][origin.clothing_set]);
        let view = &self.view_offsets[origin.identity][origin.clothing_set][origin.clip];
        for (x, o) in v.iter_mut().zip(view) {
            *x += o;
        }
        debug_assert_eq!(v.len(), c.feature_dim());
        v
    }

    /// Descriptor targets for every corpus record, row-aligned.
    pub fn record_descriptors(&self) -> Matrix {
        let rows: Vec<&[f64]> = self
            .origins
            .iter()
            .map(|o| self.descriptors[o.identity].as_slice())
            .collect();
        Matrix::from_rows(&rows).expect("descriptor rows share a length")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Gaussian entries scaled by `1/sqrt(identity_dim)`.
pub fn descriptor_map(cfg: &WorldConfig) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.descriptor_seed);
    let s = 1.0 / (cfg.identity_dim as f64).sqrt();
    let data = (0..cfg.n_desc * cfg.identity_dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        })
        .collect::<Vec<f64>>();
    Matrix::from_vec(cfg.n_desc, cfg.identity_dim, data)
}

fn sphere_point<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = linalg::norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|x| radius * x / n).collect();
        }
    }
}

fn place_latents(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let min_sq = cfg.min_separation * cfg.min_separation;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_identities);
    while out.len() < cfg.n_identities {
        let mut attempts = 0;
        let p = loop {
            attempts += 1;
            let p = sphere_point(cfg.identity_dim, cfg.latent_radius, rng);
            if out
                .iter()
                .all(|q| linalg::squared_distance(&p, q) >= min_sq)
            {
                break p;
            }
            if attempts >= MAX_PLACEMENT_ATTEMPTS {
                return Err(WorldError::Separation {
                    placed: out.len(),
                    wanted: cfg.n_identities,
                    separation: cfg.min_separation,
                    attempts,
                });
            }
        };
        out.push(p);
    }
    Ok(out)
}

/// Tags cycle through four exclusive capture conditions, one per clip.
fn condition_for(slot: usize) -> (FaceVisibility, RangeBand, Platform) {
    match slot % 4 {
        0 => (
            FaceVisibility::Included,
            RangeBand::Unknown,
            Platform::Unknown,
        ),
        1 => (
            FaceVisibility::Restricted,
            RangeBand::Unknown,
            Platform::Unknown,
        ),
        2 => (
            FaceVisibility::Unknown,
            RangeBand::LongRange,
            Platform::Unknown,
        ),
        _ => (FaceVisibility::Unknown, RangeBand::Unknown, Platform::Uav),
    }
}

struct IdentityDraw {
    records: Vec<EmbeddingRecord>,
    origins: Vec<RecordOrigin>,
    clothing: Vec<Vec<f64>>,
    views: Vec<Vec<Vec<f64>>>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated scale")
}

fn draw_identity(cfg: &WorldConfig, i: usize, latent: &[f64]) -> IdentityDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64 + 1);
    let (nc, nv, nf) = (
        normal(cfg.clothing_scale),
        normal(cfg.view_noise),
        normal(cfg.frame_noise),
    );
    let dim = cfg.feature_dim();
    let name = cfg.identity_name(i);
    let mut out = IdentityDraw {
        records: Vec::new(),
        origins: Vec::new(),
        clothing: Vec::new(),
        views: Vec::new(),
    };
    for set in 0..cfg.clothing_sets_per_id {
        let clothing: Vec<f64> = (0..cfg.nuisance_dim).map(|_| nc.sample(&mut rng)).collect();
        let mut views = Vec::new();
        for clip in 0..cfg.clips_per_set {
            let view: Vec<f64> = (0..dim).map(|_| nv.sample(&mut rng)).collect();
            let slot = (i * cfg.clothing_sets_per_id + set) * cfg.clips_per_set + clip;
            let (face_visibility, range_band, platform) = condition_for(slot);
            let clip_id = format!("s{set}c{clip}");
            for frame in 0..cfg.frames_per_clip {
                let vector: Vec<f64> = (0..dim)
                    .map(|d| {
                        let base = if d < cfg.identity_dim {
                            latent[d]
                        } else {
                            clothing[d - cfg.identity_dim]
                        };
                        // stored as f32 on disk; round here so in-memory and on-disk corpora agree
                        f64::from((base + view[d] + nf.sample(&mut rng)) as f32)
                    })
                    .collect();
                out.records.push(EmbeddingRecord {
                    key: MediaKey::frame(
                        &name,
                        format!("{clip_id}f{frame}"),
                        &clip_id,
                        frame as u64,
                    ),
                    tags: ConditionTags {
                        clothing_set_id: format!("s{set}"),
                        face_visibility,
                        range_band,
                        platform,
                    },
                    vector,
                });
                out.origins.push(RecordOrigin {
                    identity: i,
                    clothing_set: set,
                    clip,
                    frame,
                });
            }
            views.push(view);
        }
        out.clothing.push(clothing);
        out.views.push(views);
    }
    out
}

/// Records are ordered identity, set, clip, frame.
pub fn generate(cfg: &WorldConfig) -> Result<(Corpus, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latents = place_latents(cfg, &mut rng)?;
    let map = descriptor_map(cfg);
    let descriptors = latents
        .iter()
        .map(|l| map.iter_rows().map(|row| linalg::dot(row, l)).collect())
        .collect();

    let draws: Vec<IdentityDraw> = latents
        .par_iter()
        .enumerate()
        .map(|(i, l)| draw_identity(cfg, i, l))
        .collect();

    let mut records = Vec::with_capacity(cfg.record_count());
    let mut origins = Vec::with_capacity(cfg.record_count());
    let mut clothing_offsets = Vec::with_capacity(cfg.n_identities);
    let mut view_offsets = Vec::with_capacity(cfg.n_identities);
    for d in draws {
        records.extend(d.records);
        origins.extend(d.origins);
        clothing_offsets.push(d.clothing);
        view_offsets.push(d.views);
    }
    let corpus = Corpus::new(records)?;
    let gt = GroundTruth {
        config: cfg.clone(),
        identity_ids: (0..cfg.n_identities)
            .map(|i| cfg.identity_name(i))
            .collect(),
        latents,
        descriptor_map: map,
        descriptors,
        clothing_offsets,
        view_offsets,
        origins,
    };
    Ok((corpus, gt))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMatch {
    Unique(usize),
    /// Several latents tie for nearest; all are listed.
    Ambiguous(Vec<usize>),
}

impl OracleMatch {
    pub fn unique(&self) -> Option<usize> {
        match self {
            OracleMatch::Unique(i) => Some(*i),
            OracleMatch::Ambiguous(_) => None,
        }
    }
}

/// Nearest latent by Euclidean distance over the identity coordinates only.
pub fn oracle_identify(records: &[EmbeddingRecord], gt: &GroundTruth) -> Vec<OracleMatch> {
    let k = gt.config.identity_dim;
    records
        .par_iter()
        .map(|r| {
            let x = &r.vector[..k.min(r.vector.len())];
            let d: Vec<f64> = gt
                .latents
                .iter()
                .map(|l| linalg::squared_distance(x, l))
                .collect();
            let best = d.iter().copied().fold(f64::INFINITY, f64::min);
            let hits: Vec<usize> = (0..d.len()).filter(|&i| d[i] == best).collect();
            if hits.len() == 1 {
                OracleMatch::Unique(hits[0])
            } else {
                OracleMatch::Ambiguous(hits)
            }
        })
        .collect()
}

/// Fraction of records the oracle assigns uniquely to their true identity.
pub fn oracle_accuracy(corpus: &Corpus, gt: &GroundTruth) -> f64 {
    let m = oracle_identify(corpus.records(), gt);
    let hits = m
        .iter()
        .zip(&gt.origins)
        .filter(|(m, o)| m.unique() == Some(o.identity))
        .count();
    hits as f64 / corpus.len().max(1) as f64
}

/// The corpus with every vector cut to its identity coordinates.
pub fn identity_projection(corpus: &Corpus, identity_dim: usize) -> Corpus {
    corpus.with_vectors(
        corpus
            .records()
            .iter()
            .map(|r| r.vector[..identity_dim].to_vec())
            .collect(),
    )
}

/// Paths of a world written by [`write_world`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldFiles {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    pub ground_truth: PathBuf,
}

impl WorldFiles {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            manifest: dir.join(format!("{stem}.manifest.jsonl")),
            embeddings: dir.join(format!("{stem}.emb")),
            ground_truth: dir.join(format!("{stem}.truth.json")),
        }
    }
}

pub fn write_world(
    dir: &Path,
    stem: &str,
    corpus: &Corpus,
    gt: &GroundTruth,
) -> Result<WorldFiles> {
    let files = WorldFiles::in_dir(dir, stem);
    corpus::save_manifest(&corpus.manifest(), &files.manifest)?;
    corpus::save_embeddings(corpus, &files.embeddings)?;
    fs::write(&files.ground_truth, gt.to_json()).map_err(|source| WorldError::Io {
        path: files.ground_truth.display().to_string(),
        source,
    })?;
    Ok(files)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    GroundTruth::from_json(&text)
}
