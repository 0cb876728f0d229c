use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{EvalSettings, ExperimentConfig, HeadChoice};
use super::provenance::Provenance;
use super::{io_err, HarnessError, Result};
use crate::corpus::{self, Corpus};
use crate::linalg::Matrix;
use crate::metrics::{self, MetricsReport, OperatingPoint, PairCounts};
use crate::partitioner::{self, filter_probe_subset, ProbeSubset, SplitResult};
use crate::synthworld::{self, WorldFiles};
use crate::templates::{self, Metric, ScoreOptions};
use crate::trainer::{self, HeadKind, HeadParams};

/// Settings that affect speed but never results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Runtime {
    pub workers: usize,
}

impl Default for Runtime {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

impl Runtime {
    fn install<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
        pool.install(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub stage: &'static str,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn stage_dir(cfg: &ExperimentConfig, stage: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir.join(stage);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(HarnessError::MissingInput(path.display().to_string()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn files_of(stem: &Path) -> WorldFiles {
    let dir = stem.parent().unwrap_or(Path::new("."));
    let name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    WorldFiles::in_dir(dir, &name)
}

pub fn load_corpus(stem: &Path) -> Result<Corpus> {
    let f = files_of(stem);
    require(&f.manifest)?;
    require(&f.embeddings)?;
    let manifest = corpus::load_manifest(&f.manifest)?;
    Ok(corpus::load_embeddings(&f.embeddings, &manifest)?)
}

fn finish(
    stage: &'static str,
    dir: PathBuf,
    cfg: &ExperimentConfig,
    inputs: &[&Path],
    outputs: Vec<PathBuf>,
) -> Result<StageOutput> {
    let mut prov = Provenance::new(stage, &cfg.hash(), cfg.seed);
    prov.record_inputs(inputs)?;
    prov.record_outputs(&outputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    prov.save(&dir)?;
    let mut files = outputs;
    files.push(dir.join("provenance.json"));
    Ok(StageOutput { stage, dir, files })
}

/// Writes a training world and a disjoint evaluation world that share one
/// descriptor map.
pub fn cmd_synth(cfg: &ExperimentConfig, rt: &Runtime) -> Result<StageOutput> {
    cfg.validate()?;
    let dir = stage_dir(cfg, "synth")?;
    let written = rt.install(|| {
        let mut out = Vec::new();
        for (stem, world) in [("train", cfg.train_world()), ("eval", cfg.eval_world())] {
            let (c, gt) = synthworld::generate(&world)?;
            out.push(synthworld::write_world(&dir, stem, &c, &gt)?);
        }
        Ok(out)
    })?;
    let outputs = written
        .into_iter()
        .flat_map(|w| [w.manifest, w.embeddings, w.ground_truth])
        .collect();
    finish("synth", dir, cfg, &[], outputs)
}

pub fn cmd_split(cfg: &ExperimentConfig, rt: &Runtime) -> Result<StageOutput> {
    cfg.validate()?;
    let stem = cfg.eval_stem();
    let corpus = load_corpus(&stem)?;
    let result = rt.install(|| Ok(partitioner::split(&corpus, &cfg.split)?))?;
    let dir = stage_dir(cfg, "split")?;
    let path = dir.join("split.json");
    result.save(&path)?;
    let f = files_of(&stem);
    finish("split", dir, cfg, &[&f.manifest, &f.embeddings], vec![path])
}

fn features_of(corpus: &Corpus) -> Matrix {
    Matrix::from_rows(
        &corpus
            .records()
            .iter()
            .map(|r| r.vector.as_slice())
            .collect::<Vec<_>>(),
    )
    .unwrap_or_else(|| Matrix::zeros(0, corpus.dim()))
}

pub fn cmd_train(cfg: &ExperimentConfig, rt: &Runtime) -> Result<StageOutput> {
    cfg.validate()?;
    let stem = cfg.train_stem();
    let corpus = load_corpus(&stem)?;
    let f = files_of(&stem);
    let tc = cfg.train_config();
    let needs_desc = tc.head_kind == HeadKind::LinguisticBottleneck && tc.aux_weight > 0.0;
    let mut inputs: Vec<&Path> = vec![&f.manifest, &f.embeddings];
    let descriptors = if needs_desc {
        require(&f.ground_truth)?;
        inputs.push(&f.ground_truth);
        let gt = synthworld::read_ground_truth(&f.ground_truth)?;
        if gt.origins.len() != corpus.len() {
            return Err(HarnessError::Config(format!(
                "ground truth covers {} records, corpus has {}",
                gt.origins.len(),
                corpus.len()
            )));
        }
        Some(gt.record_descriptors())
    } else {
        None
    };
    let labels: Vec<&str> = corpus.records().iter().map(|r| r.identity()).collect();
    let features = features_of(&corpus);
    let (head, log) = rt.install(|| {
        Ok(trainer::train(
            &features,
            &labels,
            descriptors.as_ref(),
            &tc,
        )?)
    })?;

    let dir = stage_dir(cfg, "train")?;
    let head_path = dir.join("head.bidh");
    let log_path = dir.join("train_log.jsonl");
    trainer::save_head(&head, &head_path)?;
    log.write_jsonl(&log_path)?;
    finish("train", dir, cfg, &inputs, vec![head_path, log_path])
}

/// Applies `head` to every record vector, 4096 rows at a time.
pub fn embed_corpus(corpus: &Corpus, head: &HeadParams) -> Result<Corpus> {
    const CHUNK: usize = 4096;
    let mut vectors = Vec::with_capacity(corpus.len());
    for chunk in corpus.records().chunks(CHUNK) {
        let rows: Vec<&[f64]> = chunk.iter().map(|r| r.vector.as_slice()).collect();
        let x = Matrix::from_rows(&rows).expect("corpus rows share a dimension");
        let e = head.embed(&x)?;
        vectors.extend(e.iter_rows().map(<[f64]>::to_vec));
    }
    Ok(corpus.with_vectors(vectors))
}

/// Metrics for one probe subset; `report` is absent when no probe matches.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetEvaluation {
    pub subset: ProbeSubset,
    pub probes: usize,
    pub unenrolled_probes: usize,
    pub gallery_templates: usize,
    pub report: Option<MetricsReport>,
}

/// Templates from the split, one score matrix, then one report per subset.
/// Probes whose identity has no gallery template are dropped and counted.
pub fn evaluate(
    corpus: &Corpus,
    split: &SplitResult,
    head: Option<&HeadParams>,
    metric: Metric,
    subsets: &[ProbeSubset],
    settings: &EvalSettings,
    workers: usize,
) -> Result<Vec<SubsetEvaluation>> {
    split.check_against(corpus)?;
    let embedded;
    let corpus = match head {
        Some(h) => {
            embedded = embed_corpus(corpus, h)?;
            &embedded
        }
        None => corpus,
    };
    let gallery =
        templates::build_gallery_templates(corpus, &split.gallery, settings.template_norm)?;
    let enrolled: BTreeSet<&str> = gallery.iter().map(|g| g.identity_id.as_str()).collect();
    let mut probes = if split.probe.is_empty() {
        Vec::new()
    } else if split.probe.iter().all(|&i| corpus.record(i).key.is_video()) {
        templates::build_probe_embeddings(corpus, &split.probe, settings.template_norm)?
    } else {
        templates::build_record_probes(corpus, &split.probe)?
    };
    let before = probes.len();
    probes.retain(|p| enrolled.contains(p.true_identity.as_str()));
    let unenrolled = before - probes.len();

    let opts = ScoreOptions {
        block_cols: settings.block_cols,
        workers,
    };
    let m = templates::score_matrix(&probes, &gallery, metric, &opts)?;
    subsets
        .iter()
        .map(|&subset| {
            let rows = filter_probe_subset(m.probes(), subset);
            let report = if rows.is_empty() {
                None
            } else {
                Some(metrics::report(&m.select_probes(&rows))?)
            };
            Ok(SubsetEvaluation {
                subset,
                probes: rows.len(),
                unenrolled_probes: unenrolled,
                gallery_templates: gallery.len(),
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportScalars {
    pub auc: f64,
    pub tar_at_far_1e3: f64,
    pub tar_at_far_1e4: f64,
    pub rank1: f64,
    pub rank20: f64,
    pub operating_points: Vec<OperatingPoint>,
    pub counts: PairCounts,
    pub cmc: Vec<f64>,
}

impl From<&MetricsReport> for ReportScalars {
    fn from(r: &MetricsReport) -> Self {
        Self {
            auc: r.auc,
            tar_at_far_1e3: r.tar_at_far_1e3,
            tar_at_far_1e4: r.tar_at_far_1e4,
            rank1: r.rank1,
            rank20: r.rank20,
            operating_points: r.operating_points.clone(),
            counts: r.counts,
            cmc: r.cmc.values.clone(),
        }
    }
}

/// The JSON written per subset. ROC and CMC curves go to CSV alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub seed: u64,
    pub subset: ProbeSubset,
    pub metric: Metric,
    pub head: HeadChoice,
    pub probes: usize,
    pub unenrolled_probes: usize,
    pub gallery_templates: usize,
    pub metrics: Option<ReportScalars>,
}

fn eval_head(cfg: &ExperimentConfig, d_in: usize) -> Result<(Option<HeadParams>, Option<PathBuf>)> {
    match cfg.eval.head {
        HeadChoice::None => Ok((None, None)),
        HeadChoice::Untrained => Ok((
            Some(trainer::init_head(
                d_in,
                cfg.synth.n_desc,
                &cfg.train_config(),
            )),
            None,
        )),
        HeadChoice::Trained => {
            let path = cfg.out_dir.join("train").join("head.bidh");
            require(&path)?;
            Ok((Some(trainer::load_head(&path)?), Some(path)))
        }
    }
}

pub fn cmd_eval(cfg: &ExperimentConfig, rt: &Runtime) -> Result<StageOutput> {
    cfg.validate()?;
    let stem = cfg.eval_stem();
    let corpus = load_corpus(&stem)?;
    let split_path = cfg.out_dir.join("split").join("split.json");
    require(&split_path)?;
    let split = SplitResult::load(&split_path)?;
    let (head, head_path) = eval_head(cfg, corpus.dim())?;
    let results = rt.install(|| {
        evaluate(
            &corpus,
            &split,
            head.as_ref(),
            cfg.metric,
            &cfg.subsets,
            &cfg.eval,
            rt.workers,
        )
    })?;

    let dir = stage_dir(cfg, "eval")?;
    let hash = cfg.hash();
    let mut outputs = Vec::new();
    let mut summary = String::from("subset,probes,auc,tar_far_1e-3,tar_far_1e-4,rank1,rank20\n");
    for r in &results {
        let name = r.subset.as_str();
        let report = EvalReport {
            config_hash: hash.clone(),
            seed: cfg.seed,
            subset: r.subset,
            metric: cfg.metric,
            head: cfg.eval.head,
            probes: r.probes,
            unenrolled_probes: r.unenrolled_probes,
            gallery_templates: r.gallery_templates,
            metrics: r.report.as_ref().map(ReportScalars::from),
        };
        let json_path = dir.join(format!("report_{name}.json"));
        write_text(
            &json_path,
            &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        )?;
        outputs.push(json_path);
        match &r.report {
            Some(m) => {
                let cmc_path = dir.join(format!("cmc_{name}.csv"));
                let roc_path = dir.join(format!("roc_{name}.csv"));
                write_text(&cmc_path, &m.cmc.to_csv())?;
                write_text(&roc_path, &m.roc.to_csv())?;
                outputs.extend([cmc_path, roc_path]);
                let s = m.scalars();
                summary.push_str(&format!(
                    "{name},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                    r.probes, s[0], s[1], s[2], s[3], s[4]
                ));
            }
            None => summary.push_str(&format!("{name},0,,,,,\n")),
        }
    }
    let summary_path = dir.join("summary.csv");
    write_text(&summary_path, &summary)?;
    outputs.push(summary_path);

    let f = files_of(&stem);
    let mut inputs: Vec<&Path> = vec![&f.manifest, &f.embeddings, &split_path];
    if let Some(p) = &head_path {
        inputs.push(p);
    }
    finish("eval", dir, cfg, &inputs, outputs)
}
