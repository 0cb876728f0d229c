//! Gallery/probe splits: temporal halves, clothing-disjoint restructuring, and
//! condition-tag probe subsets.
//!
//! Every split accounts for every corpus record exactly once, as gallery,
//! probe, or an exclusion with a reason.

mod subset;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

pub use subset::{filter_probe_subset, ProbeSubset, Tagged};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("no record carries a clothing set id")]
    NoClothingTags,
    #[error("split covers {split} records but corpus has {corpus}")]
    CorpusMismatch { split: usize, corpus: usize },
    #[error("split is inconsistent: {0}")]
    Inconsistent(String),
    #[error("split file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("split file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SplitError> = std::result::Result<T, E>;

/// Which clothing set of an identity becomes its probe set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClothingRule {
    /// Lexicographically smallest set id.
    #[default]
    Lowest,
    /// Lexicographically largest set id.
    Highest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    HalfTemporal,
    ClothingDisjoint {
        #[serde(default)]
        probe_clothing: ProbeClothingRule,
    },
    /// Runs `base`, then keeps only probes matching `subset`.
    TagFilter {
        base: Box<SplitSpec>,
        subset: ProbeSubset,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    SingleClip,
    SingleClothingSet,
    MissingClothingSet,
    OutsideSubset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub record: usize,
    pub reason: ExclusionReason,
}

/// Record positions (into the corpus) on each side of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub spec: SplitSpec,
    pub record_count: usize,
    pub gallery: Vec<usize>,
    pub probe: Vec<usize>,
    pub excluded: Vec<Exclusion>,
}

impl SplitResult {
    fn finish(
        spec: SplitSpec,
        record_count: usize,
        mut gallery: Vec<usize>,
        mut probe: Vec<usize>,
        mut excluded: Vec<Exclusion>,
    ) -> Self {
        gallery.sort_unstable();
        probe.sort_unstable();
        excluded.sort_by_key(|e| e.record);
        Self {
            spec,
            record_count,
            gallery,
            probe,
            excluded,
        }
    }

    /// Checks disjointness and full coverage of `0..record_count`.
    pub fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.record_count];
        let all = self
            .gallery
            .iter()
            .chain(&self.probe)
            .chain(self.excluded.iter().map(|e| &e.record));
        for &i in all {
            match seen.get_mut(i) {
                None => return Err(SplitError::Inconsistent(format!("record {i} out of range"))),
                Some(true) => {
                    return Err(SplitError::Inconsistent(format!("record {i} listed twice")))
                }
                Some(s) => *s = true,
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(SplitError::Inconsistent(format!("record {i} not assigned")));
        }
        Ok(())
    }

    /// Confirms this split was made for a corpus of the given size.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        if self.record_count != corpus.len() {
            return Err(SplitError::CorpusMismatch {
                split: self.record_count,
                corpus: corpus.len(),
            });
        }
        self.check()
    }

    pub fn excluded_with(&self, reason: ExclusionReason) -> impl Iterator<Item = usize> + '_ {
        self.excluded
            .iter()
            .filter(move |e| e.reason == reason)
            .map(|e| e.record)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult> {
    match spec {
        SplitSpec::HalfTemporal => Ok(half_split_temporal(corpus)),
        SplitSpec::ClothingDisjoint { probe_clothing } => {
            clothing_disjoint_split(corpus, *probe_clothing)
        }
        SplitSpec::TagFilter { base, subset } => {
            let b = split(corpus, base)?;
            let (keep, drop): (Vec<usize>, Vec<usize>) = b
                .probe
                .iter()
                .partition(|&&i| subset.matches(&corpus.record(i).tags));
            let mut excluded = b.excluded;
            excluded.extend(drop.into_iter().map(|record| Exclusion {
                record,
                reason: ExclusionReason::OutsideSubset,
            }));
            Ok(SplitResult::finish(
                spec.clone(),
                corpus.len(),
                b.gallery,
                keep,
                excluded,
            ))
        }
    }
}

/// Compares digit runs by numeric value so `c2 < c10`; falls back to plain
/// string order on ties such as `c01` vs `c1`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn runs(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    if a.is_empty() || b.is_empty() {
        return a.cmp(b);
    }
    let (ra, rb) = (runs(a), runs(b));
    for (x, y) in ra.iter().zip(&rb) {
        let o = match (x.0, y.0) {
            (true, true) => {
                let (tx, ty) = (x.1.trim_start_matches('0'), y.1.trim_start_matches('0'));
                tx.len().cmp(&ty.len()).then_with(|| tx.cmp(ty))
            }
            _ => x.1.cmp(y.1),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    ra.len().cmp(&rb.len()).then_with(|| a.cmp(b))
}

/// Per identity, orders its clips (stills count as one-record clips keyed by
/// media id) and sends the first `floor(n/2)` to the gallery, the rest to the
/// probe side. Identities with one clip are excluded.
pub fn half_split_temporal(corpus: &Corpus) -> SplitResult {
    let (mut gallery, mut probe, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for rows in corpus.index().values() {
        let mut clips: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in rows {
            let k = &corpus.record(i).key;
            clips
                .entry(k.clip_id.as_deref().unwrap_or(&k.media_id))
                .or_default()
                .push(i);
        }
        let mut order: Vec<(&str, Vec<usize>)> = clips.into_iter().collect();
        order.sort_by(|a, b| natural_cmp(a.0, b.0));
        if order.len() < 2 {
            excluded.extend(
                order
                    .into_iter()
                    .flat_map(|(_, r)| r)
                    .map(|record| Exclusion {
                        record,
                        reason: ExclusionReason::SingleClip,
                    }),
            );
            continue;
        }
        let cut = order.len() / 2;
        for (n, (_, r)) in order.into_iter().enumerate() {
            if n < cut {
                gallery.extend(r);
            } else {
                probe.extend(r);
            }
        }
    }
    SplitResult::finish(
        SplitSpec::HalfTemporal,
        corpus.len(),
        gallery,
        probe,
        excluded,
    )
}

/// Per identity: one clothing set to the probe side, all others to the
/// gallery. Identities with fewer than two sets are excluded; records with no
/// set id are excluded on their own.
pub fn clothing_disjoint_split(corpus: &Corpus, rule: ProbeClothingRule) -> Result<SplitResult> {
    if corpus
        .records()
        .iter()
        .all(|r| r.tags.clothing_set_id.is_empty())
    {
        return Err(SplitError::NoClothingTags);
    }
    let (mut gallery, mut probe, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for rows in corpus.index().values() {
        let sets: BTreeSet<&str> = rows
            .iter()
            .map(|&i| corpus.record(i).tags.clothing_set_id.as_str())
            .filter(|s| !s.is_empty())
            .collect();
        let chosen = match rule {
            ProbeClothingRule::Lowest => sets.first(),
            ProbeClothingRule::Highest => sets.last(),
        };
        for &i in rows {
            let set = corpus.record(i).tags.clothing_set_id.as_str();
            if set.is_empty() {
                excluded.push(Exclusion {
                    record: i,
                    reason: ExclusionReason::MissingClothingSet,
                });
            } else if sets.len() < 2 {
                excluded.push(Exclusion {
                    record: i,
                    reason: ExclusionReason::SingleClothingSet,
                });
            } else if Some(&set) == chosen {
                probe.push(i);
            } else {
                gallery.push(i);
            }
        }
    }
    Ok(SplitResult::finish(
        SplitSpec::ClothingDisjoint {
            probe_clothing: rule,
        },
        corpus.len(),
        gallery,
        probe,
        excluded,
    ))
}

/// Pairs (identity, clothing set) present on both sides of a split.
pub fn clothing_overlap(corpus: &Corpus, split: &SplitResult) -> Vec<(String, String)> {
    let side = |rows: &[usize]| -> BTreeSet<(String, String)> {
        rows.iter()
            .map(|&i| {
                let r = corpus.record(i);
                (r.key.identity_id.clone(), r.tags.clothing_set_id.clone())
            })
            .collect()
    };
    side(&split.probe)
        .intersection(&side(&split.gallery))
        .cloned()
        .collect()
}
