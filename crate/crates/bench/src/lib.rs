//! Shared fixtures for the pipeline benchmarks.

use pon_sentinel::nn::{LstmArch, LstmClassifier};
use pon_sentinel::{generate_dataset, Branch, Dataset, GenConfig, PonTopology, TopologySampler};

/// Balanced noisy dataset drawn from a fixed pool of random topologies.
pub fn dataset(per_class: usize) -> Dataset {
    let pool = TopologySampler::default().pool(50, 11);
    let gen = GenConfig { per_class, seed: 7, ..GenConfig::default() };
    generate_dataset(&gen, &pool).expect("fixture dataset")
}

/// Eight branches arranged as two pairs, two pairs and two singles.
pub fn eight_branch_topology() -> PonTopology {
    let d = [4.5, 7.8, 16.7, 20.0, 29.0, 32.3, 42.9, 55.1];
    let branches = d
        .iter()
        .enumerate()
        .map(|(i, &distance_m)| Branch { id: i as u32 + 1, distance_m, reflect_height: 1.0 })
        .collect();
    PonTopology::new(branches, 10.0).expect("fixture topology")
}

pub fn model(layers: usize) -> LstmClassifier {
    LstmClassifier::new(LstmArch { layers, ..LstmArch::default() }, 1).expect("fixture model")
}
