//! Inputs shared by the benchmarks under `benches/`.

use dialoforge::eval::ProbRecord;
use dialoforge::seed::rng_from_seed;
use dialoforge::synth::{GenerationConfig, Generator, TopicRegistry};
use dialoforge::{Dialogue, GroundTruth};
use rand::Rng;

pub fn corpus(n: u64, seed: u64) -> Vec<(Dialogue, GroundTruth)> {
    Generator::new(TopicRegistry::builtin(), GenerationConfig::default())
        .expect("default config is valid")
        .corpus(n, seed)
        .collect()
}

/// Random start/end distributions over `len` positions.
pub fn prob_records(count: usize, len: usize, seed: u64) -> Vec<ProbRecord> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|k| ProbRecord {
            qa_id: format!("q{k}"),
            p_start: (0..len).map(|_| rng.random()).collect(),
            p_end: (0..len).map(|_| rng.random()).collect(),
        })
        .collect()
}
