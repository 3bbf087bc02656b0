//! Dense transverse-field Gibbs states for small systems.
//!
//! `H = -Γ Σ_i X_i + H_P`, where `H_P` is diagonal in the computational
//! basis with entries `E(z)`. At `Γ = 0` the state reduces to the classical
//! Boltzmann distribution. `ρ = e^{-βH} / Z` is formed from a symmetric
//! eigendecomposition.

use nalgebra::{DMatrix, DVector};

use super::exact::Enumeration;
use super::{clamp_fields, ClampMode, Provenance, SampleSet, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::spin::Spin;
use crate::training::MomentVector;

#[derive(Debug, Clone)]
pub struct GibbsState {
    pub beta: f64,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub log_z: f64,
    /// Computational-basis view: `diag(ρ)` over the free qubits.
    pub basis: Enumeration,
}

impl GibbsState {
    /// `(ln ρ)_{ss}` for basis state `s`.
    pub fn log_rho_diag(&self, s: usize) -> f64 {
        let row = self.eigenvectors.row(s);
        let sum: f64 = row.iter().zip(self.eigenvalues.iter()).map(|(v, l)| v * v * (-self.beta * l)).sum();
        sum - self.log_z
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Build `ρ` for `model` with `clamp` qubits frozen out of the dynamics.
pub fn gibbs_state(
    model: &IsingModel,
    beta: f64,
    gamma: f64,
    clamp: &[(usize, Spin)],
    cap: usize,
) -> Result<GibbsState> {
    if !(gamma >= 0.0) {
        return Err(Error::input(format!("gamma must be non-negative, got {gamma}")));
    }
    let n = model.len();
    let mut base = vec![-1; n];
    let mut is_free = vec![true; n];
    for &(i, s) in clamp {
        base[i] = s;
        is_free[i] = false;
    }
    let free: Vec<usize> = (0..n).filter(|&i| is_free[i]).collect();
    if free.len() > cap {
        return Err(Error::SizeLimit { what: "quantum Gibbs state", n: free.len(), cap });
    }
    let dim = 1usize << free.len();
    let scratch = Enumeration::from_parts(free.clone(), base.clone(), Vec::new(), 0.0);
    let mut ham = DMatrix::<f64>::zeros(dim, dim);
    let mut z = base.clone();
    for s in 0..dim {
        scratch.fill_state(s, &mut z);
        ham[(s, s)] = model.energy_unchecked(&z);
        for b in 0..free.len() {
            ham[(s, s ^ (1 << b))] = -gamma;
        }
    }
    let eig = ham.symmetric_eigen();
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|l| (-beta * (l - lmin)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let log_z = -beta * lmin + total.ln();
    let probs: Vec<f64> = (0..dim)
        .map(|s| {
            let row = eig.eigenvectors.row(s);
            row.iter().zip(&weights).map(|(v, w)| v * v * w).sum::<f64>() / total
        })
        .collect();
    Ok(GibbsState {
        beta,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        log_z,
        basis: Enumeration::from_parts(free, base, probs, log_z),
    })
}

fn state_for(model: &IsingModel, cfg: &SamplerConfig) -> Result<(GibbsState, Option<IsingModel>)> {
    cfg.validate()?;
    match cfg.clamp_mode() {
        ClampMode::Freeze => {
            let idx = cfg.clamp_indices(model)?;
            Ok((gibbs_state(model, cfg.beta, cfg.gamma, &idx, cfg.quantum_cap)?, None))
        }
        ClampMode::StrongField => {
            let clamped = clamp_fields(model, &cfg.clamp, cfg.h_max)?;
            let st = gibbs_state(&clamped, cfg.beta, cfg.gamma, &[], cfg.quantum_cap)?;
            Ok((st, Some(clamped)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantumSamples {
    pub samples: SampleSet,
    /// Exact `Tr(ρ Z_i)` and `Tr(ρ Z_i Z_j)` on edges.
    pub moments: MomentVector,
    pub log_z: f64,
}

/// Computational-basis measurements of `ρ`, together with its exact
/// Z-basis moments.
pub fn quantum_gibbs_sample(model: &IsingModel, cfg: &SamplerConfig) -> Result<QuantumSamples> {
    let (st, _) = state_for(model, cfg)?;
    let (data, seeds) = st.basis.draw(cfg.n_samples, cfg.seed);
    Ok(QuantumSamples {
        samples: SampleSet::new(model.len(), data, Provenance { config: cfg.echo(), sample_seeds: seeds }),
        moments: st.basis.moments(model),
        log_z: st.log_z,
    })
}

pub(crate) fn quantum_moments(model: &IsingModel, cfg: &SamplerConfig) -> Result<MomentVector> {
    let (st, _) = state_for(model, cfg)?;
    Ok(st.basis.moments(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{Clamp, SamplerKind, QUANTUM_CAP};
    use crate::topology::Graph;

    fn qcfg(gamma: f64) -> SamplerConfig {
        SamplerConfig { gamma, n_samples: 10, ..SamplerConfig::new(SamplerKind::Quantum) }
    }

    #[test]
    fn single_qubit_without_field_is_balanced() {
        let m = IsingModel::zeros(Graph::complete(1));
        for gamma in [0.0, 0.3, 2.0] {
            for beta in [0.5, 1.0, 3.0] {
                let st = gibbs_state(&m, beta, gamma, &[], QUANTUM_CAP).unwrap();
                assert_eq!(st.basis.probabilities()[1], st.basis.probabilities()[0]);
                assert!((st.basis.probabilities()[1] - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn negative_gamma_rejected() {
        let m = IsingModel::zeros(Graph::complete(2));
        assert!(quantum_gibbs_sample(&m, &qcfg(-0.1)).is_err());
    }

    #[test]
    fn size_limit() {
        let m = IsingModel::zeros(Graph::complete(13));
        assert!(matches!(quantum_gibbs_sample(&m, &qcfg(1.0)), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn moments_continuous_in_gamma() {
        let m = IsingModel::from_params(Graph::complete(3), vec![0.2, -0.1, 0.3], vec![0.5, -0.4, 0.2]).unwrap();
        for gamma in [0.1, 0.5, 1.5] {
            let a = quantum_moments(&m, &qcfg(gamma)).unwrap();
            let b = quantum_moments(&m, &qcfg(gamma + 1e-3)).unwrap();
            let c = quantum_moments(&m, &qcfg(gamma + 1e-2)).unwrap();
            let (d1, d2) = (a.max_abs_diff(&b), a.max_abs_diff(&c));
            assert!(d1 < 1e-2 && d1 < d2, "gamma={gamma}: {d1} {d2}");
        }
    }

    #[test]
    fn frozen_clamp_holds() {
        let m = IsingModel::from_params(Graph::complete(3), vec![0.2, -0.1, 0.3], vec![0.5, -0.4, 0.2]).unwrap();
        let cfg = SamplerConfig {
            clamp: Clamp::from([(2, -1)]),
            clamp_mode: Some(ClampMode::Freeze),
            n_samples: 40,
            ..qcfg(0.7)
        };
        let q = quantum_gibbs_sample(&m, &cfg).unwrap();
        assert!(q.samples.rows().all(|r| r[2] == -1));
        assert!((q.moments.first[2] + 1.0).abs() < 1e-12);
    }
}
