//! Fully visible Boltzmann machines embedded in Chimera-style hardware graphs.
//!
//! The crate covers the whole learning pipeline: building hardware graphs,
//! mapping logical variables onto qubit chains, holding the physical Ising
//! model, drawing samples (exact enumeration, simulated annealing, dense
//! transverse-field Gibbs states), moment-matching training, data sets and
//! evaluation protocols.

pub mod datasets;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod spin;
pub mod topology;
pub mod training;

pub use embedding::{Embedding, EmbeddingStats, Logical};
pub use error::{EmbeddingError, Error, Result};
pub use model::{Checkpoint, IsingModel, ParamRange};
pub use samplers::{ClampMode, SampleSet, SamplerConfig, SamplerKind};
pub use spin::Spin;
pub use topology::{build_chimera, ChimeraSpec, Graph, HardwareGraph, QubitId};
pub use training::{train, MomentVector, TrainConfig, TrainOutcome};
