//! Times probe × gallery scoring at a given size.
//!
//! `cargo run --release --example score_bench -- [probes] [gallery] [dim] [workers]`

use std::time::Instant;

use bodyid_core::linalg::Matrix;
use bodyid_core::templates::{score_vectors, Metric, ScoreOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let probes = args.first().copied().unwrap_or(10_000);
    let gallery = args.get(1).copied().unwrap_or(1_000);
    let dim = args.get(2).copied().unwrap_or(512);
    let workers = args.get(3).copied().unwrap_or(1);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut random = |rows: usize| {
        Matrix::from_vec(
            rows,
            dim,
            (0..rows * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    };
    let p = random(probes);
    let g = random(gallery);
    let opts = ScoreOptions {
        workers,
        ..Default::default()
    };
    let start = Instant::now();
    let s = score_vectors(&p, &g, Metric::Cosine, &opts).expect("scoring");
    println!(
        "{probes}x{gallery} dim {dim}, {workers} worker(s): {:.3}s (checksum {:.6})",
        start.elapsed().as_secs_f64(),
        s.data().iter().sum::<f64>()
    );
}
