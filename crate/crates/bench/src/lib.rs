//! Fixtures shared by the sampler benchmarks.

use qmaxent::samplers::{SamplerConfig, SamplerKind};
use qmaxent::topology::Graph;
use qmaxent::IsingModel;

/// A dense model on `n` spins with deterministic, mildly frustrated
/// parameters.
pub fn dense_model(n: usize) -> IsingModel {
    let g = Graph::complete(n);
    let h = (0..n).map(|i| 0.1 * ((i % 5) as f64 - 2.0)).collect();
    let j = (0..g.num_edges()).map(|k| if k % 3 == 0 { -0.2 } else { 0.15 }).collect();
    IsingModel::from_params(g, h, j).expect("sizes agree")
}

pub fn config(kind: SamplerKind, n_samples: usize) -> SamplerConfig {
    SamplerConfig { n_samples, seed: 7, gamma: 0.5, ..SamplerConfig::new(kind) }
}
