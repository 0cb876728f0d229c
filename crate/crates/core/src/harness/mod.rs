//! Experiment orchestration: `synth`, `split`, `train`, `eval` and `ablate`
//! stages reading and writing artifacts under one output directory.
//!
//! Every stage writes a `provenance.json` next to its artifacts with the
//! config hash, the seed, format versions, and SHA-256 digests of the files
//! it read and wrote. Artifacts never embed wall-clock time or absolute paths,
//! so reruns of the same config are byte-identical.

mod ablation;
mod config;
mod pipeline;
mod provenance;

use thiserror::Error;

pub use ablation::{
    cmd_ablate, delta_row, delta_table_csv, round4, AblationOutput, AblationScalars, CellResult,
    DeltaRow,
};
pub use config::{
    AblationCell, AblationGrid, CorpusPaths, DeltaSpec, EvalSettings, ExperimentConfig, HeadChoice,
    EVAL_WORLD_SEED_OFFSET,
};
pub use pipeline::{
    cmd_eval, cmd_split, cmd_synth, cmd_train, embed_corpus, evaluate, load_corpus, EvalReport,
    ReportScalars, Runtime, StageOutput, SubsetEvaluation,
};
pub use provenance::{sha256_file, FileDigest, Provenance};

use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::partitioner::SplitError;
use crate::synthworld::WorldError;
use crate::templates::TemplateError;
use crate::trainer::TrainerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {0}")]
    MissingInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ablation cell '{label}': {source}")]
    Cell {
        label: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}
