#![allow(dead_code)]

use std::path::PathBuf;

use cohs_cqg::corpus::{parse_coqa, Conversation};
use cohs_cqg::relevance::RelevanceMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const THRESHOLDS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name)
}

pub fn fixture_corpus() -> Vec<Conversation> {
    parse_coqa(&std::fs::read_to_string(fixture("coqa_mini.json")).unwrap()).unwrap()
}

pub struct Instance {
    pub t: RelevanceMatrix,
    pub c_s: usize,
}

/// Random matrix with `m <= 12`, `h <= 8`, entries in U(-1, 1).
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.gen_range(1..=12);
    let h = rng.gen_range(0..=8);
    let data = (0..m * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Instance { t: RelevanceMatrix::from_vec(m, h, data).unwrap(), c_s: rng.gen_range(0..m) }
}

pub fn instances(seed: u64, n: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_instance(&mut rng)).collect()
}
