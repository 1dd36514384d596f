//! Shared fixtures for the pipeline benchmarks.

use hintclust::mutual::{prepare, PreparedCorpus};
use hintclust::synth::{generate, SynthConfig, SynthCorpus};
use hintclust::HintOptions;

/// Planted corpus with `k = 4` and `n` documents per collection.
pub fn corpus(n: usize, seed: u64) -> SynthCorpus {
    let cfg = SynthConfig {
        n1: n,
        n2: n,
        seed,
        ..SynthConfig::default()
    };
    generate(&cfg).expect("valid synthetic config")
}

pub fn options(seed: u64) -> HintOptions {
    HintOptions {
        k1: 4,
        k2: 4,
        seed,
        ..HintOptions::default()
    }
}

pub fn prepared(n: usize, seed: u64) -> PreparedCorpus {
    prepare(&corpus(n, seed).corpus, &options(seed)).expect("prepared corpus")
}
