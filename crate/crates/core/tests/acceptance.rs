//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any counted criterion fails.
//!
//! Run with `cargo test -p bodyid-core --test acceptance`; pass a substring to
//! run matching criteria only.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bodyid_core::corpus::{ConditionTags, Corpus, EmbeddingRecord, MediaKey};
use bodyid_core::harness::{
    self, delta_row, delta_table_csv, AblationOutput, AblationScalars, CellResult, DeltaSpec,
    EvalSettings, ExperimentConfig, Runtime,
};
use bodyid_core::linalg::Matrix;
use bodyid_core::metrics::{self, auc, cmc, roc, tar_at_far};
use bodyid_core::partitioner::{
    clothing_disjoint_split, clothing_overlap, half_split_temporal, ExclusionReason,
    ProbeClothingRule, ProbeSubset,
};
use bodyid_core::synthworld::{self, identity_projection};
use bodyid_core::templates::{score_vectors, Metric, ScoreMatrix, ScoreOptions};
use bodyid_core::trainer::{
    self, batch_hard_mine, loss_and_grads, loss_value, BottleneckDims, HeadKind, HeadParams,
    LossConfig, Triplet, TripletIndices,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when the host cannot exercise the criterion; the line still prints
    /// PASS or FAIL but does not decide the exit status.
    blocked: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            blocked: None,
        }
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [Criterion; 9] = [
        ("metrics_oracle_equivalence", metrics_oracle),
        ("gradient_correctness", gradient_correctness),
        ("miner_correctness", miner_correctness),
        ("end_to_end_learning", end_to_end_learning),
        ("protocol_invariants", protocol_invariants),
        ("ablation_fixture", ablation_fixture),
        ("determinism", determinism),
        ("performance_single_thread", performance_single_thread),
        ("performance_four_workers", performance_four_workers),
    ];
    let mut counted_failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = match &o.blocked {
            Some(why) => format!(" [not counted: {why}]"),
            None => String::new(),
        };
        println!(
            "{status} {name} ({:.1}s): {}{note}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass && o.blocked.is_none() {
            counted_failures += 1;
        }
    }
    if counted_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

// ---------------------------------------------------------------- metrics

fn random_matrix(rng: &mut ChaCha8Rng) -> ScoreMatrix {
    let n_probes = rng.random_range(1..=50);
    let n_gallery = rng.random_range(2..=50);
    let gallery: Vec<String> = (0..n_gallery).map(|j| format!("g{j}")).collect();
    let probes: Vec<String> = (0..n_probes)
        .map(|_| gallery[rng.random_range(0..n_gallery)].clone())
        .collect();
    let coarse = rng.random_bool(0.3);
    let scores: Vec<Vec<f64>> = (0..n_probes)
        .map(|_| {
            (0..n_gallery)
                .map(|_| {
                    if coarse {
                        f64::from(rng.random_range(0..6u8)) / 10.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let p: Vec<&str> = probes.iter().map(String::as_str).collect();
    let g: Vec<&str> = gallery.iter().map(String::as_str).collect();
    ScoreMatrix::from_labels(&p, &g, scores).expect("valid matrix")
}

/// Sorts each row with the true identity placed after every equal score.
fn oracle_cmc(m: &ScoreMatrix) -> Vec<f64> {
    let mut hist = vec![0usize; m.n_gallery()];
    for i in 0..m.n_probes() {
        let t = m.true_column(i);
        let row = m.row(i);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then((a == t).cmp(&(b == t))));
        let rank = order.iter().position(|&j| j == t).unwrap();
        hist[rank] += 1;
    }
    let mut acc = 0;
    hist.iter()
        .map(|h| {
            acc += h;
            acc as f64 / m.n_probes() as f64
        })
        .collect()
}

fn genuine_impostor(m: &ScoreMatrix) -> (Vec<f64>, Vec<f64>) {
    let (mut g, mut i) = (Vec::new(), Vec::new());
    for p in 0..m.n_probes() {
        for (j, &s) in m.row(p).iter().enumerate() {
            if j == m.true_column(p) {
                g.push(s)
            } else {
                i.push(s)
            }
        }
    }
    (g, i)
}

fn oracle_auc(g: &[f64], imp: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in g {
        for &b in imp {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (g.len() * imp.len()) as f64
}

fn oracle_tar(g: &[f64], imp: &[f64], far: f64) -> f64 {
    let mut thresholds: Vec<f64> = g.iter().chain(imp).copied().collect();
    thresholds.push(f64::INFINITY);
    let mut best = 0.0f64;
    for t in thresholds {
        let fa = imp.iter().filter(|&&s| s >= t).count() as f64 / imp.len() as f64;
        if fa <= far {
            best = best.max(g.iter().filter(|&&s| s >= t).count() as f64 / g.len() as f64);
        }
    }
    best
}

fn metrics_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let (mut cmc_bad, mut tar_bad, mut worst_auc) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let m = random_matrix(&mut rng);
        let curve = cmc(&m).unwrap();
        let expected = oracle_cmc(&m);
        let rep = metrics::report(&m).unwrap();
        if curve.values != expected
            || rep.rank1 != expected[0]
            || rep.rank20 != expected[19.min(expected.len() - 1)]
        {
            cmc_bad += 1;
        }
        let (g, imp) = genuine_impostor(&m);
        let r = roc(&m).unwrap();
        worst_auc = worst_auc.max((auc(&r) - oracle_auc(&g, &imp)).abs());
        for far in [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0] {
            if tar_at_far(&r, far).unwrap().tar != oracle_tar(&g, &imp, far) {
                tar_bad += 1;
            }
        }
    }
    let e = t.elapsed();
    Outcome::new(
        cmc_bad == 0 && tar_bad == 0 && worst_auc <= 1e-12 && within(e, 30),
        format!("1000 matrices; CMC mismatches {cmc_bad}, TAR mismatches {tar_bad}, max AUC error {worst_auc:.1e}, {:.1}s (limit 30s)", e.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- gradients

const FD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-6;

struct GradPoint {
    head: HeadParams,
    x: Matrix,
    labels: Vec<usize>,
    desc: Matrix,
    triplets: TripletIndices,
}

fn random_point(kind: HeadKind, rng: &mut ChaCha8Rng, cfg: &LossConfig) -> GradPoint {
    let (d_in, d_out, n_desc) = (16, 8, 6);
    let labels: Vec<usize> = (0..9).map(|i| i / 3).collect();
    loop {
        let mut head = match kind {
            HeadKind::Projection => HeadParams::projection(d_in, d_out, rng),
            HeadKind::LinguisticBottleneck => {
                HeadParams::bottleneck(d_in, d_out, BottleneckDims::scaled(d_in, n_desc), rng)
            }
        };
        for l in head.layers_mut() {
            l.bias
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.2..0.2));
        }
        let x = Matrix::from_vec(
            9,
            d_in,
            (0..9 * d_in).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let desc = Matrix::from_vec(
            9,
            n_desc,
            (0..9 * n_desc)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
        let (out, cache) = head.forward(&x).unwrap();
        let triplets = batch_hard_mine(&out.embeddings, &labels).unwrap();
        // central differences need every kink farther than the step
        let hinge_gap = triplets
            .triplets
            .iter()
            .map(|t| {
                let e = &out.embeddings;
                let d = |a: usize, b: usize| {
                    bodyid_core::linalg::squared_distance(e.row(a), e.row(b)).sqrt()
                };
                (d(t.anchor, t.positive) - d(t.anchor, t.negative) + cfg.margin).abs()
            })
            .fold(f64::INFINITY, f64::min);
        if cache.relu_margin() > 10.0 * FD_STEP && hinge_gap > 10.0 * FD_STEP {
            return GradPoint {
                head,
                x,
                labels,
                desc,
                triplets,
            };
        }
    }
}

fn gradient_relative_error(p: &GradPoint, cfg: &LossConfig) -> f64 {
    let (_, analytic) =
        loss_and_grads(&p.head, &p.x, &p.labels, Some(&p.desc), &p.triplets, cfg).unwrap();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let mut head = p.head.clone();
    let mut worst = 0.0f64;
    for (ti, an) in analytic.iter().enumerate() {
        let mut num = vec![0.0; an.len()];
        for (k, slot) in num.iter_mut().enumerate() {
            let orig = head.tensors()[ti][k];
            head.tensors_mut()[ti][k] = orig + FD_STEP;
            let lp = loss_value(&head, &p.x, &p.labels, Some(&p.desc), &p.triplets, cfg).unwrap();
            head.tensors_mut()[ti][k] = orig - FD_STEP;
            let lm = loss_value(&head, &p.x, &p.labels, Some(&p.desc), &p.triplets, cfg).unwrap();
            head.tensors_mut()[ti][k] = orig;
            *slot = (lp - lm) / (2.0 * FD_STEP);
        }
        let diff = num
            .iter()
            .zip(an)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = num
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(an.iter().map(|a| a * a).sum::<f64>().sqrt());
        // a shared output shift leaves the triplet loss unchanged, so some bias
        // gradients are exactly zero and the difference quotient is pure
        // round-off; below this floor the error is taken in absolute terms
        let rel = diff / scale.max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let t = Instant::now();
    let cfg = LossConfig {
        margin: 1.0,
        aux_weight: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [HeadKind::Projection, HeadKind::LinguisticBottleneck] {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = random_point(kind, &mut rng, &cfg);
            worst = worst.max(gradient_relative_error(&p, &cfg));
        }
        ok &= worst < 1e-4;
        parts.push(format!("{kind:?} max rel err {worst:.2e}"));
    }
    let e = t.elapsed();
    Outcome::new(
        ok && within(e, 60),
        format!(
            "100 points per head, h={FD_STEP:e}; {}; {:.1}s (limit 60s)",
            parts.join(", "),
            e.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- miner

fn oracle_mine(x: &Matrix, labels: &[usize]) -> TripletIndices {
    let n = labels.len();
    let dist = |a: usize, b: usize| {
        let mut s = 0.0;
        for (u, v) in x.row(a).iter().zip(x.row(b)) {
            s += (u - v) * (u - v);
        }
        s.sqrt()
    };
    let mut out = TripletIndices::default();
    for a in 0..n {
        let mut pos: Option<usize> = None;
        let mut neg: Option<usize> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            if labels[j] == labels[a] {
                if pos.is_none_or(|p| dist(a, j) > dist(a, p)) {
                    pos = Some(j);
                }
            } else if neg.is_none_or(|q| dist(a, j) < dist(a, q)) {
                neg = Some(j);
            }
        }
        match (pos, neg) {
            (Some(positive), Some(negative)) => out.triplets.push(Triplet {
                anchor: a,
                positive,
                negative,
            }),
            _ => out.skipped.push(a),
        }
    }
    out
}

fn miner_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut mismatches = 0;
    let mut triplets = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..=64);
        let ids = rng.random_range(2..=n.min(12));
        let dim = rng.random_range(1..=16);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..ids)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let x = Matrix::from_vec(
            n,
            dim,
            (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let got = batch_hard_mine(&x, &labels).unwrap();
        triplets += got.len();
        if got != oracle_mine(&x, &labels) {
            mismatches += 1;
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("500 batches (2..=64 rows), {triplets} triplets; {mismatches} batches differ from exhaustive search"),
    )
}

// ---------------------------------------------------------------- end to end

fn rank1(
    corpus: &Corpus,
    split: &bodyid_core::partitioner::SplitResult,
    head: Option<&HeadParams>,
) -> f64 {
    let r = harness::evaluate(
        corpus,
        split,
        head,
        Metric::Cosine,
        &[ProbeSubset::All],
        &EvalSettings::default(),
        1,
    )
    .unwrap();
    r[0].report.as_ref().unwrap().rank1
}

fn end_to_end_learning() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let (train_c, _) = synthworld::generate(&cfg.train_world()).unwrap();
    let (eval_c, _) = synthworld::generate(&cfg.eval_world()).unwrap();
    let split = clothing_disjoint_split(&eval_c, ProbeClothingRule::Lowest).unwrap();

    let ceiling = rank1(
        &identity_projection(&eval_c, cfg.synth.identity_dim),
        &split,
        None,
    );
    let tc = cfg.train_config();
    let untrained_head = trainer::init_head(eval_c.dim(), cfg.synth.n_desc, &tc);
    let untrained = rank1(&eval_c, &split, Some(&untrained_head));

    let features = Matrix::from_rows(
        &train_c
            .records()
            .iter()
            .map(|r| r.vector.as_slice())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let labels: Vec<&str> = train_c.records().iter().map(|r| r.identity()).collect();
    let (head, _) = trainer::train(&features, &labels, None, &tc).unwrap();
    let trained = rank1(&eval_c, &split, Some(&head));
    let e = t.elapsed();

    let pass = untrained <= ceiling - 0.20
        && trained - untrained >= 0.20
        && trained >= 0.80 * ceiling
        && within(e, 300);
    Outcome::new(
        pass,
        format!(
            "clothing-disjoint Rank-1: ceiling {ceiling:.4}, untrained {untrained:.4}, trained {trained:.4} \
             (gap {:.4} >= 0.20, gain {:.4} >= 0.20, ratio {:.3} >= 0.80); {:.1}s (limit 300s)",
            ceiling - untrained,
            trained - untrained,
            trained / ceiling,
            e.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- protocols

fn random_corpus(rng: &mut ChaCha8Rng) -> Corpus {
    let mut records = Vec::new();
    for id in 0..rng.random_range(1..=20) {
        let name = format!("p{id}");
        for set in 0..rng.random_range(1..=4) {
            for clip in 0..rng.random_range(1..=5) {
                let clothing = if rng.random_bool(0.05) {
                    String::new()
                } else {
                    format!("s{set}")
                };
                let clip_id = format!("s{set}c{clip}");
                for frame in 0..rng.random_range(1..=3u64) {
                    records.push(EmbeddingRecord {
                        key: MediaKey::frame(&name, format!("{clip_id}f{frame}"), &clip_id, frame),
                        tags: ConditionTags {
                            clothing_set_id: clothing.clone(),
                            ..Default::default()
                        },
                        vector: vec![rng.random::<f64>()],
                    });
                }
            }
        }
    }
    records[0].tags.clothing_set_id = "s0".into();
    Corpus::new(records).unwrap()
}

fn protocol_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut problems: Vec<String> = Vec::new();
    for n in 0..100 {
        let c = random_corpus(&mut rng);

        let s = clothing_disjoint_split(&c, ProbeClothingRule::Lowest).unwrap();
        if let Err(e) = s.check() {
            problems.push(format!("corpus {n} clothing partition: {e}"));
        }
        if !clothing_overlap(&c, &s).is_empty() {
            problems.push(format!("corpus {n}: clothing overlap"));
        }

        let h = half_split_temporal(&c);
        if let Err(e) = h.check() {
            problems.push(format!("corpus {n} temporal partition: {e}"));
        }
        let mut clips: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
        for (i, r) in c.records().iter().enumerate() {
            clips
                .entry(r.identity())
                .or_default()
                .entry(r.key.clip_id.as_deref().unwrap())
                .or_default()
                .push(i);
        }
        let excluded: Vec<usize> = h.excluded_with(ExclusionReason::SingleClip).collect();
        for (id, by_clip) in &clips {
            let single = by_clip.len() == 1;
            let mut g_clips = 0;
            for rows in by_clip.values() {
                let in_g = rows
                    .iter()
                    .filter(|i| h.gallery.binary_search(i).is_ok())
                    .count();
                let in_p = rows
                    .iter()
                    .filter(|i| h.probe.binary_search(i).is_ok())
                    .count();
                let in_x = rows.iter().filter(|i| excluded.contains(i)).count();
                if single && in_x != rows.len() {
                    problems.push(format!(
                        "corpus {n}: single-clip identity {id} not excluded"
                    ));
                }
                if !single && in_g != rows.len() && in_p != rows.len() {
                    problems.push(format!("corpus {n}: clip of {id} straddles the split"));
                }
                if in_g == rows.len() {
                    g_clips += 1;
                }
            }
            if !single && g_clips != by_clip.len() / 2 {
                problems.push(format!(
                    "corpus {n}: {id} has {g_clips} gallery clips of {}",
                    by_clip.len()
                ));
            }
        }
    }
    let detail = if problems.is_empty() {
        "100 random corpora: partitions exact, zero clothing overlap, single-clip identities excluded".to_string()
    } else {
        format!("{} problems, first: {}", problems.len(), problems[0])
    };
    Outcome::new(problems.is_empty(), detail)
}

// ---------------------------------------------------------------- ablation

fn ablation_fixture() -> Outcome {
    let cell = |label: &str, v: [f64; 4]| CellResult {
        label: label.into(),
        head_kind: HeadKind::Projection,
        input_size_proxy: String::new(),
        config_hash: String::new(),
        scalars: AblationScalars {
            tar_at_far_1e3: v[0],
            tar_at_far_1e4: v[1],
            rank1: v[2],
            rank20: v[3],
        },
    };
    let cells = vec![
        cell("bidds_224_224", [0.2549, 0.0990, 0.3072, 0.7645]),
        cell("swin_bidds_224_224", [0.2776, 0.1063, 0.3141, 0.7865]),
        cell("bidds_224_384", [0.2926, 0.1207, 0.3342, 0.7816]),
        cell("swin_bidds_384_384", [0.3575, 0.1523, 0.3909, 0.8228]),
    ];
    let specs = [
        DeltaSpec {
            label: "architecture".into(),
            from: "bidds_224_224".into(),
            to: "swin_bidds_224_224".into(),
        },
        DeltaSpec {
            label: "image size".into(),
            from: "swin_bidds_224_224".into(),
            to: "swin_bidds_384_384".into(),
        },
    ];
    let out = AblationOutput::from_cells(cells.clone(), &specs).unwrap();
    let csv = delta_table_csv(&out.cells, &out.deltas);
    let lines: Vec<&str> = csv.lines().collect();
    let expect_arch = "architecture,,+0.0227,+0.0073,+0.0069,+0.0220";
    let expect_size = "image size,,+0.0799,+0.0460,+0.0768,+0.0363";
    // independent subtraction of the stored cells
    let independent = delta_row(&cells[1].scalars, &cells[3].scalars) == out.deltas[1].deltas
        && out.deltas[0].deltas[0] == 0.0227
        && out.deltas[1].deltas[0] == 0.0799;
    let pass = lines.contains(&expect_arch) && lines.contains(&expect_size) && independent;
    Outcome::new(
        pass,
        format!(
            "TAR@1e-3 deltas {:+.4} and {:+.4}; rows: [{}] [{}]",
            out.deltas[0].deltas[0],
            out.deltas[1].deltas[0],
            lines[lines.len() - 2],
            lines[lines.len() - 1]
        ),
    )
}

// ---------------------------------------------------------------- determinism

fn run_pipeline(out: &Path) -> harness::Result<()> {
    let cfg = ExperimentConfig {
        out_dir: out.to_path_buf(),
        ..Default::default()
    };
    let rt = Runtime::default();
    harness::cmd_synth(&cfg, &rt)?;
    harness::cmd_split(&cfg, &rt)?;
    harness::cmd_train(&cfg, &rt)?;
    harness::cmd_eval(&cfg, &rt)?;
    Ok(())
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = run_pipeline(a.path()).and_then(|_| run_pipeline(b.path())) {
        return Outcome::new(false, format!("pipeline failed: {e}"));
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
    let pass = sa.len() == sb.len() && differing.is_empty() && !sa.is_empty();
    Outcome::new(
        pass,
        format!(
            "synth|split|train|eval twice: {} artifacts, {} differ{}",
            sa.len(),
            differing.len(),
            differing
                .first()
                .map(|d| format!(" (first: {d})"))
                .unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- performance

fn perf_inputs() -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut m = |rows: usize| {
        Matrix::from_vec(
            rows,
            512,
            (0..rows * 512)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    };
    (m(10_000), m(1_000))
}

fn timed_score(p: &Matrix, g: &Matrix, workers: usize) -> (Matrix, Duration) {
    let opts = ScoreOptions {
        workers,
        ..Default::default()
    };
    let t = Instant::now();
    let s = score_vectors(p, g, Metric::Cosine, &opts).unwrap();
    (s, t.elapsed())
}

fn performance_single_thread() -> Outcome {
    let (p, g) = perf_inputs();
    let (_, e) = timed_score(&p, &g, 1);
    Outcome::new(
        within(e, 10),
        format!(
            "10000 x 1000 at dim 512, 1 worker: {:.2}s (limit 10s)",
            e.as_secs_f64()
        ),
    )
}

fn performance_four_workers() -> Outcome {
    let (p, g) = perf_inputs();
    let (s1, e1) = timed_score(&p, &g, 1);
    let (s4, e4) = timed_score(&p, &g, 4);
    let speedup = e1.as_secs_f64() / e4.as_secs_f64();
    let identical = s1 == s4;
    let cpus = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut o = Outcome::new(
        identical && speedup >= 2.0,
        format!(
            "1 worker {:.2}s, 4 workers {:.2}s, speedup {speedup:.2}x (need >= 2x); outputs identical: {identical}; {cpus} CPU(s) available",
            e1.as_secs_f64(),
            e4.as_secs_f64()
        ),
    );
    if cpus < 4 && identical {
        o.blocked = Some(format!(
            "host exposes {cpus} CPU(s), a 4-worker speedup needs 4"
        ));
    }
    o
}
