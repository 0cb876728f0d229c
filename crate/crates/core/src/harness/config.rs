use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Result};
use crate::partitioner::{ProbeClothingRule, ProbeSubset, SplitSpec};
use crate::synthworld::WorldConfig;
use crate::templates::{Metric, TemplateNorm};
use crate::trainer::{HeadKind, TrainConfig};

/// Where the evaluation embeddings come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadChoice {
    /// The checkpoint written by the train stage.
    #[default]
    Trained,
    /// A freshly initialized head from the train config.
    Untrained,
    /// Raw features, no head.
    None,
}

impl HeadChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadChoice::Trained => "trained",
            HeadChoice::Untrained => "untrained",
            HeadChoice::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub head: HeadChoice,
    pub template_norm: TemplateNorm,
    pub block_cols: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            head: HeadChoice::Trained,
            template_norm: TemplateNorm::Raw,
            block_cols: crate::templates::DEFAULT_BLOCK_COLS,
        }
    }
}

/// Corpus locations as path stems: `<stem>.manifest.jsonl`, `<stem>.emb`,
/// `<stem>.truth.json`. Relative stems resolve against the output directory;
/// absent stems point at the synth stage outputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationCell {
    pub label: String,
    pub head_kind: HeadKind,
    /// Input-size proxy: the synthetic world's feature width is
    /// `identity_dim + nuisance_dim`.
    pub identity_dim: usize,
    pub nuisance_dim: usize,
}

impl AblationCell {
    pub fn input_size_proxy(&self) -> String {
        format!("feature_dim={}", self.identity_dim + self.nuisance_dim)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSpec {
    pub label: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationGrid {
    pub cells: Vec<AblationCell>,
    pub deltas: Vec<DeltaSpec>,
}

impl Default for AblationGrid {
    /// Two head kinds crossed with a narrow and a wide input, with the
    /// architecture delta taken at the narrow input and the input-size delta
    /// on the bottleneck head.
    fn default() -> Self {
        let cell = |label: &str, head_kind, identity_dim, nuisance_dim| AblationCell {
            label: label.into(),
            head_kind,
            identity_dim,
            nuisance_dim,
        };
        Self {
            cells: vec![
                cell("projection_narrow", HeadKind::Projection, 16, 48),
                cell("bottleneck_narrow", HeadKind::LinguisticBottleneck, 16, 48),
                cell("projection_wide", HeadKind::Projection, 24, 72),
                cell("bottleneck_wide", HeadKind::LinguisticBottleneck, 24, 72),
            ],
            deltas: vec![
                DeltaSpec {
                    label: "architecture: projection to bottleneck".into(),
                    from: "projection_narrow".into(),
                    to: "bottleneck_narrow".into(),
                },
                DeltaSpec {
                    label: "input size proxy: narrow to wide".into(),
                    from: "bottleneck_narrow".into(),
                    to: "bottleneck_wide".into(),
                },
            ],
        }
    }
}

impl AblationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(HarnessError::Config("ablation grid has no cells".into()));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if self.cells[..i].iter().any(|d| d.label == c.label) {
                return Err(HarnessError::Config(format!(
                    "duplicate ablation cell '{}'",
                    c.label
                )));
            }
        }
        for d in &self.deltas {
            for end in [&d.from, &d.to] {
                if !self.cells.iter().any(|c| &c.label == end) {
                    return Err(HarnessError::Config(format!(
                        "delta row '{}' references unknown cell '{end}'",
                        d.label
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything a run needs. Seeds for the worlds and the trainer all derive
/// from the top-level `seed`; the `seed` fields inside `synth` and `train`
/// are overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub metric: Metric,
    pub subsets: Vec<ProbeSubset>,
    pub out_dir: PathBuf,
    pub synth: WorldConfig,
    pub corpus: CorpusPaths,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub ablation: AblationGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut subsets = vec![ProbeSubset::All];
        subsets.extend(ProbeSubset::NAMED);
        Self {
            seed: 0,
            metric: Metric::Cosine,
            subsets,
            out_dir: PathBuf::from("runs/default"),
            synth: WorldConfig::default(),
            corpus: CorpusPaths::default(),
            split: SplitSpec::ClothingDisjoint {
                probe_clothing: ProbeClothingRule::Lowest,
            },
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
            ablation: AblationGrid::default(),
        }
    }
}

/// Offset between the training and evaluation world seeds.
pub const EVAL_WORLD_SEED_OFFSET: u64 = 1;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.ablation.validate()?;
        if self.subsets.is_empty() {
            return Err(HarnessError::Config("no probe subsets requested".into()));
        }
        if self.eval.block_cols == 0 {
            return Err(HarnessError::Config(
                "eval.block_cols must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn train_world(&self) -> WorldConfig {
        WorldConfig {
            seed: self.seed,
            descriptor_seed: self.seed,
            id_prefix: "train".into(),
            ..self.synth.clone()
        }
    }

    pub fn eval_world(&self) -> WorldConfig {
        WorldConfig {
            seed: self.seed.wrapping_add(EVAL_WORLD_SEED_OFFSET),
            descriptor_seed: self.seed,
            id_prefix: "eval".into(),
            ..self.synth.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    fn stem(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        match given {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.out_dir.join(p),
            None => self.out_dir.join("synth").join(default),
        }
    }

    pub fn train_stem(&self) -> PathBuf {
        self.stem(&self.corpus.train, "train")
    }

    pub fn eval_stem(&self) -> PathBuf {
        self.stem(&self.corpus.eval, "eval")
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            out_dir: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 7
            metric = "euclidean"
            subsets = ["uav", "long_range"]

            [synth]
            n_identities = 10

            [split]
            kind = "tag_filter"
            subset = "face_included"
            base = { kind = "half_temporal" }

            [train]
            epochs = 2
            head_kind = "linguistic_bottleneck"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.metric, Metric::NegativeEuclidean);
        assert_eq!(cfg.synth.n_identities, 10);
        assert_eq!(cfg.train_config().seed, 7);
        assert_eq!(cfg.eval_world().seed, 8);
        assert!(matches!(cfg.split, SplitSpec::TagFilter { .. }));
    }

    #[test]
    fn invalid_sections_fail_fast() {
        for bad in [
            "[train]\nlearning_rate = 0.0",
            "[synth]\nidentity_dim = 0",
            "unknown_key = 1",
            "subsets = []",
            "[[ablation.cells]]\nlabel = \"a\"\nhead_kind = \"projection\"\nidentity_dim = 4\nnuisance_dim = 4\n[[ablation.deltas]]\nlabel = \"d\"\nfrom = \"a\"\nto = \"b\"",
        ] {
            assert!(ExperimentConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_out_dir_but_not_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: "elsewhere".into(),
            ..a.clone()
        };
        let c = ExperimentConfig {
            seed: 1,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
