//! Exact classical Boltzmann statistics by full enumeration.

use rand::Rng as _;
use rayon::prelude::*;

use super::{clamp_fields, Clamp, ClampMode, Provenance, SampleSet, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng;
use crate::spin::Spin;
use crate::training::MomentVector;

const CHUNK: usize = 1 << 12;

/// Normalised Boltzmann weights over every configuration of the free
/// (unclamped) variables. State `s` sets free variable `b` to `+1` when bit
/// `b` of `s` is set.
#[derive(Debug, Clone)]
pub struct Enumeration {
    free: Vec<usize>,
    base: Vec<Spin>,
    probs: Vec<f64>,
    pub log_z: f64,
}

impl Enumeration {
    pub fn new(model: &IsingModel, beta: f64, clamp: &[(usize, Spin)], cap: usize) -> Result<Enumeration> {
        let n = model.len();
        let mut base = vec![-1; n];
        let mut is_free = vec![true; n];
        for &(i, s) in clamp {
            base[i] = s;
            is_free[i] = false;
        }
        let free: Vec<usize> = (0..n).filter(|&i| is_free[i]).collect();
        if free.len() > cap {
            return Err(Error::SizeLimit { what: "exact enumeration", n: free.len(), cap });
        }
        let states = 1usize << free.len();

        // Gray-code walk: one spin flip per state, O(degree) energy update.
        let mut energies = vec![0.0; states];
        let mut z = base.clone();
        let mut e = model.energy_unchecked(&z);
        energies[0] = e;
        for k in 1..states {
            let b = k.trailing_zeros() as usize;
            let i = free[b];
            e += 2.0 * f64::from(z[i]) * model.local_field(i, &z);
            z[i] = -z[i];
            energies[k ^ (k >> 1)] = e;
        }

        let min_e = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for w in energies.iter_mut() {
            *w = (-beta * (*w - min_e)).exp();
            total += *w;
        }
        for w in energies.iter_mut() {
            *w /= total;
        }
        Ok(Enumeration { free, base, probs: energies, log_z: -beta * min_e + total.ln() })
    }

    pub(crate) fn from_parts(free: Vec<usize>, base: Vec<Spin>, probs: Vec<f64>, log_z: f64) -> Enumeration {
        Enumeration { free, base, probs, log_z }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn free_vars(&self) -> &[usize] {
        &self.free
    }

    pub fn fill_state(&self, s: usize, z: &mut [Spin]) {
        z.copy_from_slice(&self.base);
        for (b, &i) in self.free.iter().enumerate() {
            z[i] = if (s >> b) & 1 == 1 { 1 } else { -1 };
        }
    }

    pub fn state(&self, s: usize) -> Vec<Spin> {
        let mut z = self.base.clone();
        self.fill_state(s, &mut z);
        z
    }

    /// Index of the free-variable configuration of a full state vector.
    pub fn index_of(&self, z: &[Spin]) -> usize {
        self.free
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &i)| if z[i] > 0 { acc | (1 << b) } else { acc })
    }

    pub fn moments(&self, model: &IsingModel) -> MomentVector {
        let graph = model.graph();
        let n = graph.len();
        let ne = graph.num_edges();
        let partials: Vec<MomentVector> = self
            .probs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = MomentVector::zeros(n, ne);
                let mut z = vec![0 as Spin; n];
                let mut pz = vec![0.0; n];
                for (off, &p) in chunk.iter().enumerate() {
                    self.fill_state(c * CHUNK + off, &mut z);
                    for i in 0..n {
                        pz[i] = p * f64::from(z[i]);
                        acc.first[i] += pz[i];
                    }
                    for (k, &(a, b)) in graph.edges().iter().enumerate() {
                        acc.second[k] += pz[a] * f64::from(z[b]);
                    }
                }
                acc
            })
            .collect();
        let mut total = MomentVector::zeros(n, ne);
        for p in &partials {
            total.add_assign(p);
        }
        total
    }

    /// Draw `n` independent states, sample `i` from stream `(seed, i)`.
    pub fn draw(&self, n: usize, seed: u64) -> (Vec<Spin>, Vec<u64>) {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let width = self.base.len();
        let mut data = vec![0 as Spin; n * width];
        let seeds: Vec<u64> = (0..n as u64).map(|i| rng::derive_seed(seed, i)).collect();
        for (row, &s) in data.chunks_exact_mut(width.max(1)).zip(&seeds) {
            let u: f64 = rng::from_seed(s).random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            self.fill_state(idx, row);
        }
        (data, seeds)
    }
}

#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub moments: MomentVector,
    pub log_z: f64,
}

/// Exact `⟨z_i⟩`, `⟨z_i z_j⟩` (edges) and `ln Z` at inverse temperature
/// `beta`, conditioned on frozen `clamp` values.
pub fn exact_moments(model: &IsingModel, beta: f64, clamp: &Clamp) -> Result<ExactMoments> {
    let cfg = SamplerConfig { beta, ..SamplerConfig::new(super::SamplerKind::Exact) };
    let idx = SamplerConfig { clamp: clamp.clone(), ..cfg.clone() }.clamp_indices(model)?;
    exact_moments_cfg(model, &cfg, &idx)
}

pub(crate) fn exact_moments_cfg(
    model: &IsingModel,
    cfg: &SamplerConfig,
    clamp: &[(usize, Spin)],
) -> Result<ExactMoments> {
    let en = Enumeration::new(model, cfg.beta, clamp, cfg.exact_cap)?;
    Ok(ExactMoments { moments: en.moments(model), log_z: en.log_z })
}

/// I.i.d. draws from the exact Boltzmann distribution at `cfg.beta`.
pub fn exact_sample(model: &IsingModel, cfg: &SamplerConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let en = match cfg.clamp_mode() {
        ClampMode::Freeze => Enumeration::new(model, cfg.beta, &cfg.clamp_indices(model)?, cfg.exact_cap)?,
        ClampMode::StrongField => {
            let clamped = clamp_fields(model, &cfg.clamp, cfg.h_max)?;
            Enumeration::new(&clamped, cfg.beta, &[], cfg.exact_cap)?
        }
    };
    let (data, seeds) = en.draw(cfg.n_samples, cfg.seed);
    Ok(SampleSet::new(
        model.len(),
        data,
        Provenance { config: cfg.echo(), sample_seeds: seeds },
    ))
}
