// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use bntrace::network::{BayesianNetwork, NetworkStructure};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Binary generator where node `i` takes `min(i, eta)` distinct earlier
/// nodes as parents, with every CPT row drawn from weights in `[1, 4]`
/// (probabilities between 0.2 and 0.8).
pub fn layered_generator(m: usize, eta: usize, seed: u64) -> BayesianNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let mut p = sample(&mut rng, i, eta.min(i)).into_vec();
            p.sort_unstable();
            p
        })
        .collect();
    let structure = NetworkStructure::new(vec![2; m], parents, eta).unwrap();
    BayesianNetwork::random(structure, 1.0, 4.0, seed.wrapping_add(1)).unwrap()
}

/// Exact complexity of [`layered_generator`].
pub fn layered_complexity(m: usize, eta: usize) -> u64 {
    (0..m).map(|i| 1u64 << eta.min(i)).sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
