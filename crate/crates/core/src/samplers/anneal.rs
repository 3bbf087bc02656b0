//! Simulated thermal annealing with single-site Metropolis updates.
//!
//! Each sample is an independent chain: uniform random start, `t_max`
//! proposals at uniformly random free sites, final state returned.

use rand::Rng as _;
use rayon::prelude::*;

use super::{clamp_fields, ClampMode, Provenance, SampleSet, SamplerConfig, Schedule};
use crate::error::Result;
use crate::model::IsingModel;
use crate::rng;
use crate::spin::Spin;

/// Compressed adjacency with couplings inlined, for the inner loop.
struct Csr {
    h: Vec<f64>,
    offsets: Vec<usize>,
    nbr: Vec<u32>,
    w: Vec<f64>,
}

impl Csr {
    fn new(model: &IsingModel) -> Csr {
        let g = model.graph();
        let mut offsets = Vec::with_capacity(g.len() + 1);
        let mut nbr = Vec::new();
        let mut w = Vec::new();
        offsets.push(0);
        for i in 0..g.len() {
            for &(n, k) in g.adjacency(i) {
                nbr.push(n as u32);
                w.push(model.j[k]);
            }
            offsets.push(nbr.len());
        }
        Csr { h: model.h.clone(), offsets, nbr, w }
    }

    #[inline]
    fn field(&self, i: usize, z: &[Spin]) -> f64 {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.nbr[a..b]
            .iter()
            .zip(&self.w[a..b])
            .fold(self.h[i], |acc, (&n, &w)| acc + w * f64::from(z[n as usize]))
    }
}

fn run_chain(csr: &Csr, base: &[Spin], free: &[usize], cfg: &SamplerConfig, seed: u64, out: &mut [Spin]) {
    let mut rng = rng::from_seed(seed);
    out.copy_from_slice(base);
    for &i in free {
        out[i] = if rng.random::<bool>() { 1 } else { -1 };
    }
    if free.is_empty() {
        return;
    }
    let t_max = cfg.t_max as f64;
    let nfree = free.len();
    for t in 1..=cfg.t_max {
        let beta = match cfg.schedule {
            Schedule::Linear => cfg.beta * t as f64 / t_max,
            Schedule::Constant => cfg.beta,
        };
        let i = free[rng.random_range(0..nfree)];
        let de = 2.0 * f64::from(out[i]) * csr.field(i, out);
        if de <= 0.0 || rng.random::<f64>() < (-beta * de).exp() {
            out[i] = -out[i];
        }
    }
}

pub fn sa_sample(model: &IsingModel, cfg: &SamplerConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let n = model.len();
    let (csr, base, free) = match cfg.clamp_mode() {
        ClampMode::Freeze => {
            let clamp = cfg.clamp_indices(model)?;
            let mut base = vec![-1; n];
            let mut is_free = vec![true; n];
            for &(i, s) in &clamp {
                base[i] = s;
                is_free[i] = false;
            }
            (Csr::new(model), base, (0..n).filter(|&i| is_free[i]).collect::<Vec<_>>())
        }
        ClampMode::StrongField => {
            let clamped = clamp_fields(model, &cfg.clamp, cfg.h_max)?;
            (Csr::new(&clamped), vec![-1; n], (0..n).collect())
        }
    };
    let seeds: Vec<u64> = (0..cfg.n_samples as u64).map(|i| rng::derive_seed(cfg.seed, i)).collect();
    let mut data = vec![0 as Spin; cfg.n_samples * n];
    if n > 0 {
        data.par_chunks_exact_mut(n)
            .zip(seeds.par_iter())
            .for_each(|(row, &s)| run_chain(&csr, &base, &free, cfg, s, row));
    }
    Ok(SampleSet::new(n, data, Provenance { config: cfg.echo(), sample_seeds: seeds }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{exact_moments, Clamp, SamplerKind};
    use crate::topology::Graph;

    #[test]
    fn flat_landscape_is_uniform() {
        let m = IsingModel::zeros(Graph::complete(5));
        let cfg = SamplerConfig { n_samples: 10_000, t_max: 50, seed: 4, ..SamplerConfig::new(SamplerKind::Sa) };
        let mom = sa_sample(&m, &cfg).unwrap().moments(&m).unwrap();
        let sigma = (1.0 / 10_000f64).sqrt();
        assert!(mom.first.iter().all(|v| v.abs() < 3.0 * sigma), "{:?}", mom.first);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = IsingModel::from_params(Graph::complete(3), vec![0.1, 0.2, -0.3], vec![0.5, 0.1, -0.2]).unwrap();
        let cfg = SamplerConfig { n_samples: 64, t_max: 300, seed: 12, ..SamplerConfig::new(SamplerKind::Sa) };
        let a = sa_sample(&m, &cfg).unwrap();
        assert_eq!(a, sa_sample(&m, &cfg).unwrap());
        let b = sa_sample(&m, &SamplerConfig { seed: 13, ..cfg.clone() }).unwrap();
        assert_ne!(a.data(), b.data());
        // A prefix of chains does not depend on how many chains run.
        let c = sa_sample(&m, &SamplerConfig { n_samples: 16, ..cfg }).unwrap();
        assert_eq!(c.data(), &a.data()[..16 * 3]);
    }

    #[test]
    fn frozen_sites_hold() {
        let m = IsingModel::from_params(Graph::complete(3), vec![-2.0, 0.0, 0.0], vec![0.5, 0.1, -0.2]).unwrap();
        let cfg = SamplerConfig {
            n_samples: 200,
            t_max: 100,
            clamp: Clamp::from([(0, 1)]),
            ..SamplerConfig::new(SamplerKind::Sa)
        };
        assert!(sa_sample(&m, &cfg).unwrap().rows().all(|r| r[0] == 1));
    }

    #[test]
    fn constant_schedule_detailed_balance() {
        let models = [
            IsingModel::from_params(Graph::complete(2), vec![0.3, -0.1], vec![0.7]).unwrap(),
            IsingModel::from_params(
                Graph::complete(4),
                vec![0.2, -0.3, 0.1, 0.0],
                vec![0.4, -0.5, 0.3, 0.2, -0.1, 0.6],
            )
            .unwrap(),
        ];
        for m in &models {
            let cfg = SamplerConfig {
                n_samples: 10_000,
                t_max: 400,
                schedule: Schedule::Constant,
                seed: 21,
                ..SamplerConfig::new(SamplerKind::Sa)
            };
            let emp = sa_sample(m, &cfg).unwrap().moments(m).unwrap();
            let exact = exact_moments(m, 1.0, &Clamp::new()).unwrap().moments;
            let n = cfg.n_samples as f64;
            for (e, x) in exact.first.iter().chain(&exact.second).zip(emp.first.iter().chain(&emp.second)) {
                let sigma = ((1.0 - e * e) / n).sqrt();
                assert!((e - x).abs() < 3.0 * sigma, "{e} vs {x}");
            }
        }
    }
}
