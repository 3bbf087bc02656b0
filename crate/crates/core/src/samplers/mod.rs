//! Samplers for the physical model: exact enumeration of the classical
//! Boltzmann distribution, simulated thermal annealing, and the dense
//! transverse-field Gibbs state for small systems.
//!
//! All samplers share [`SamplerConfig`]. Sample `i` is always drawn from the
//! random stream `(seed, i)`, so a sample set does not depend on how chains
//! are scheduled across threads.

mod anneal;
mod exact;
mod quantum;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

pub use anneal::sa_sample;
pub use exact::{exact_moments, exact_sample, Enumeration, ExactMoments};
pub use quantum::{gibbs_state, quantum_gibbs_sample, GibbsState, QuantumSamples};

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::spin::{format_spins, Spin};
use crate::topology::QubitId;
use crate::training::MomentVector;

pub const EXACT_CAP: usize = 25;
pub const QUANTUM_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Exact,
    Sa,
    Quantum,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Exact => "exact",
            SamplerKind::Sa => "sa",
            SamplerKind::Quantum => "quantum",
        })
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SamplerKind::Exact),
            "sa" => Ok(SamplerKind::Sa),
            "quantum" => Ok(SamplerKind::Quantum),
            _ => Err(Error::input(format!("unknown sampler `{s}` (exact, sa, quantum)"))),
        }
    }
}

/// How clamped qubits are held at their values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampMode {
    /// Removed from the dynamics entirely.
    Freeze,
    /// Kept dynamical under a field of magnitude `h_max`.
    StrongField,
}

impl fmt::Display for ClampMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClampMode::Freeze => "freeze",
            ClampMode::StrongField => "strong-field",
        })
    }
}

impl std::str::FromStr for ClampMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freeze" => Ok(ClampMode::Freeze),
            "strong-field" | "strong_field" => Ok(ClampMode::StrongField),
            _ => Err(Error::input(format!("unknown clamp mode `{s}`"))),
        }
    }
}

/// Inverse-temperature schedule for simulated annealing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `beta * t / t_max` at update `t`.
    Linear,
    /// `beta` throughout; plain Metropolis.
    Constant,
}

/// Qubit label to clamped value.
pub type Clamp = BTreeMap<QubitId, Spin>;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub beta: f64,
    pub gamma: f64,
    pub t_max: u64,
    pub schedule: Schedule,
    pub n_samples: usize,
    pub seed: u64,
    pub clamp: Clamp,
    /// `None` picks freeze for classical samplers and strong field for the
    /// quantum one.
    pub clamp_mode: Option<ClampMode>,
    pub h_max: f64,
    pub exact_cap: usize,
    pub quantum_cap: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::Sa,
            beta: 1.0,
            gamma: 0.0,
            t_max: 15_200,
            schedule: Schedule::Linear,
            n_samples: 100,
            seed: 0,
            clamp: Clamp::new(),
            clamp_mode: None,
            h_max: 2.0,
            exact_cap: EXACT_CAP,
            quantum_cap: QUANTUM_CAP,
        }
    }
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerConfig { kind, ..Default::default() }
    }

    pub fn clamp_mode(&self) -> ClampMode {
        self.clamp_mode.unwrap_or(match self.kind {
            SamplerKind::Quantum => ClampMode::StrongField,
            _ => ClampMode::Freeze,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::input(format!("beta must be positive, got {}", self.beta)));
        }
        if self.t_max == 0 {
            return Err(Error::input("t_max must be at least 1"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::input(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.exact_cap > EXACT_CAP {
            log::warn!("exact sampler cap raised to {} qubits", self.exact_cap);
        }
        if self.quantum_cap > QUANTUM_CAP {
            log::warn!("quantum sampler cap raised to {} qubits", self.quantum_cap);
        }
        Ok(())
    }

    /// One-line `key=value` echo used in sample-set headers.
    pub fn echo(&self) -> String {
        let mut s = format!(
            "kind={} beta={} gamma={} t_max={} n_samples={} seed={} clamp_mode={} h_max={}",
            self.kind,
            self.beta,
            self.gamma,
            self.t_max,
            self.n_samples,
            self.seed,
            self.clamp_mode(),
            self.h_max
        );
        if self.schedule == Schedule::Constant {
            s.push_str(" schedule=constant");
        }
        if !self.clamp.is_empty() {
            let _ = write!(s, " clamped={}", self.clamp.len());
        }
        s
    }

    /// Resolve clamp labels to vertex indices of `model`.
    pub(crate) fn clamp_indices(&self, model: &IsingModel) -> Result<Vec<(usize, Spin)>> {
        self.clamp
            .iter()
            .map(|(&q, &s)| {
                let i = model.graph().index_of(q).ok_or(Error::UnknownQubit(q))?;
                if s != 1 && s != -1 {
                    return Err(Error::input(format!("clamp value for qubit {q} must be ±1")));
                }
                Ok((i, s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: String,
    pub sample_seeds: Vec<u64>,
}

/// Row-major matrix of ±1 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_vars: usize,
    data: Vec<Spin>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn new(n_vars: usize, data: Vec<Spin>, provenance: Provenance) -> SampleSet {
        assert!(n_vars == 0 || data.len().is_multiple_of(n_vars));
        SampleSet { n_vars, data, provenance }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        if self.n_vars == 0 {
            0
        } else {
            self.data.len() / self.n_vars
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[Spin] {
        &self.data[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Spin]> {
        self.data.chunks_exact(self.n_vars.max(1))
    }

    pub fn data(&self) -> &[Spin] {
        &self.data
    }

    /// Empirical moments over the model's edges.
    pub fn moments(&self, model: &IsingModel) -> Result<MomentVector> {
        MomentVector::from_rows(self.rows(), self.len(), model.graph())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# samples {}\n", self.provenance.config);
        for row in self.rows() {
            out.push_str(&format_spins(row));
            out.push('\n');
        }
        out
    }
}

/// Copy of `model` with every clamped qubit's field replaced by `±h_max`.
/// The result may lie outside the model's field range.
pub fn clamp_fields(model: &IsingModel, clamp: &Clamp, h_max: f64) -> Result<IsingModel> {
    let mut out = model.clone();
    for (&q, &s) in clamp {
        let i = model.graph().index_of(q).ok_or(Error::UnknownQubit(q))?;
        out.h[i] = h_max * f64::from(s);
    }
    Ok(out)
}

/// Draw `cfg.n_samples` states with the configured sampler.
pub fn sample(model: &IsingModel, cfg: &SamplerConfig) -> Result<SampleSet> {
    match cfg.kind {
        SamplerKind::Exact => exact_sample(model, cfg),
        SamplerKind::Sa => sa_sample(model, cfg),
        SamplerKind::Quantum => quantum_gibbs_sample(model, cfg).map(|q| q.samples),
    }
}

/// Where negative-phase moments came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    Analytic,
    Empirical,
}

/// Model moments: analytic where the sampler provides them, empirical
/// averages over `cfg.n_samples` draws otherwise.
pub fn model_moments(model: &IsingModel, cfg: &SamplerConfig) -> Result<(MomentVector, MomentSource)> {
    match cfg.kind {
        SamplerKind::Exact => {
            let m = match cfg.clamp_mode() {
                ClampMode::Freeze => exact::exact_moments_cfg(model, cfg, &cfg.clamp_indices(model)?)?,
                ClampMode::StrongField => {
                    let clamped = clamp_fields(model, &cfg.clamp, cfg.h_max)?;
                    exact::exact_moments_cfg(&clamped, cfg, &[])?
                }
            };
            Ok((m.moments, MomentSource::Analytic))
        }
        SamplerKind::Quantum => {
            let q = quantum::quantum_moments(model, cfg)?;
            Ok((q, MomentSource::Analytic))
        }
        SamplerKind::Sa => Ok((sa_sample(model, cfg)?.moments(model)?, MomentSource::Empirical)),
    }
}
