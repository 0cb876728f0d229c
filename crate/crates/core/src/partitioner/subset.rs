use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    ConditionTags, EmbeddingRecord, FaceVisibility, Platform, RangeBand, RecordMeta,
};
use crate::templates::{ProbeEmbedding, ProbeInfo};

/// Named probe subsets over capture-condition tags. Subsets may overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSubset {
    All,
    FaceIncluded,
    FaceRestricted,
    LongRange,
    Uav,
}

impl ProbeSubset {
    pub const NAMED: [ProbeSubset; 4] = [
        ProbeSubset::FaceIncluded,
        ProbeSubset::FaceRestricted,
        ProbeSubset::LongRange,
        ProbeSubset::Uav,
    ];

    pub fn matches(self, t: &ConditionTags) -> bool {
        match self {
            ProbeSubset::All => true,
            ProbeSubset::FaceIncluded => t.face_visibility == FaceVisibility::Included,
            ProbeSubset::FaceRestricted => t.face_visibility == FaceVisibility::Restricted,
            ProbeSubset::LongRange => t.range_band == RangeBand::LongRange,
            ProbeSubset::Uav => t.platform == Platform::Uav,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeSubset::All => "all",
            ProbeSubset::FaceIncluded => "face_included",
            ProbeSubset::FaceRestricted => "face_restricted",
            ProbeSubset::LongRange => "long_range",
            ProbeSubset::Uav => "uav",
        }
    }
}

impl fmt::Display for ProbeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeSubset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [ProbeSubset::All]
            .into_iter()
            .chain(Self::NAMED)
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown probe subset '{s}'"))
    }
}

pub trait Tagged {
    fn tags(&self) -> &ConditionTags;
}

impl Tagged for ConditionTags {
    fn tags(&self) -> &ConditionTags {
        self
    }
}

impl Tagged for EmbeddingRecord {
    fn tags(&self) -> &ConditionTags {
        &self.tags
    }
}

impl Tagged for RecordMeta {
    fn tags(&self) -> &ConditionTags {
        &self.tags
    }
}

impl Tagged for ProbeEmbedding {
    fn tags(&self) -> &ConditionTags {
        &self.tags
    }
}

impl Tagged for ProbeInfo {
    fn tags(&self) -> &ConditionTags {
        &self.tags
    }
}

/// Positions of the matching items, in input order.
pub fn filter_probe_subset<T: Tagged>(probes: &[T], subset: ProbeSubset) -> Vec<usize> {
    probes
        .iter()
        .enumerate()
        .filter(|(_, p)| subset.matches(p.tags()))
        .map(|(i, _)| i)
        .collect()
}
