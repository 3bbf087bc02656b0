//! Moment-matching gradient ascent with momentum and L2 on couplings.
//!
//! The gradient for each parameter is the data moment minus the model
//! moment; the inverse temperature is absorbed into the learning rate.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::datasets::LogicalDataset;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::model::{init_model, IsingModel, Velocity};
use crate::rng;
use crate::samplers::{model_moments, MomentSource, SamplerConfig};
use crate::spin::Spin;
use crate::topology::{Graph, HardwareGraph};

/// First moments per vertex and second moments per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl MomentVector {
    pub fn zeros(n: usize, n_edges: usize) -> MomentVector {
        MomentVector { first: vec![0.0; n], second: vec![0.0; n_edges] }
    }

    pub fn from_rows<'a>(
        rows: impl IntoIterator<Item = &'a [Spin]>,
        count: usize,
        graph: &Graph,
    ) -> Result<MomentVector> {
        if count == 0 {
            return Err(Error::input("cannot average over zero rows"));
        }
        let mut m = MomentVector::zeros(graph.len(), graph.num_edges());
        let mut seen = 0;
        for row in rows {
            if row.len() != graph.len() {
                return Err(Error::LengthMismatch { expected: graph.len(), got: row.len() });
            }
            for (acc, &z) in m.first.iter_mut().zip(row) {
                *acc += f64::from(z);
            }
            for (acc, &(a, b)) in m.second.iter_mut().zip(graph.edges()) {
                *acc += f64::from(row[a] * row[b]);
            }
            seen += 1;
        }
        debug_assert_eq!(seen, count);
        let inv = 1.0 / seen as f64;
        m.first.iter_mut().chain(m.second.iter_mut()).for_each(|v| *v *= inv);
        Ok(m)
    }

    pub fn add_assign(&mut self, other: &MomentVector) {
        self.first.iter_mut().zip(&other.first).for_each(|(a, b)| *a += b);
        self.second.iter_mut().zip(&other.second).for_each(|(a, b)| *a += b);
    }

    pub fn max_abs_diff(&self, other: &MomentVector) -> f64 {
        self.first
            .iter()
            .zip(&other.first)
            .chain(self.second.iter().zip(&other.second))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn same_shape(&self, other: &MomentVector) -> bool {
        self.first.len() == other.first.len() && self.second.len() == other.second.len()
    }
}

/// Data-side moments of extended (physical) rows over the edges of `graph`.
pub fn positive_phase<'a>(rows: impl IntoIterator<Item = &'a [Spin]>, graph: &Graph) -> Result<MomentVector> {
    let rows: Vec<&[Spin]> = rows.into_iter().collect();
    MomentVector::from_rows(rows.iter().copied(), rows.len(), graph)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub h: Vec<f64>,
    pub j: Vec<f64>,
}

impl Gradient {
    pub fn mean_abs_h(&self) -> f64 {
        mean_abs(&self.h)
    }

    pub fn mean_abs_j(&self) -> f64 {
        mean_abs(&self.j)
    }
}

fn mean_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

pub fn gradient(pos: &MomentVector, neg: &MomentVector) -> Result<Gradient> {
    if !pos.same_shape(neg) {
        return Err(Error::input(format!(
            "moment shapes differ: ({}, {}) vs ({}, {})",
            pos.first.len(),
            pos.second.len(),
            neg.first.len(),
            neg.second.len()
        )));
    }
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(Gradient { h: diff(&pos.first, &neg.first), j: diff(&pos.second, &neg.second) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Applied to couplings only.
    pub l2: f64,
    /// Rows per positive phase; 0 uses the full data set, computed once.
    pub minibatch: usize,
    pub max_iters: u64,
    /// Negative-phase sampler; its seed is replaced per iteration.
    pub sampler: SamplerConfig,
    pub stop_on_range_exit: bool,
    pub seed: u64,
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0025,
            momentum: 0.5,
            l2: 1e-5,
            minibatch: 0,
            max_iters: 1000,
            sampler: SamplerConfig::default(),
            stop_on_range_exit: true,
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::input(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::input(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::input(format!("l2 must be non-negative, got {}", self.l2)));
        }
        self.sampler.validate()
    }
}

/// A parameter of the physical model, by vertex or edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Field(usize),
    Coupling(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Applied,
    /// The step would have moved these parameters out of range; nothing
    /// was changed.
    RangeExit(Vec<Param>),
}

/// `v <- μ v + η (g - λ J)` (λ on couplings only), then `θ <- θ + v`.
///
/// With `stop_on_range_exit`, a step that would leave the allowed ranges is
/// rejected whole. Otherwise parameters are clipped to their ranges.
pub fn update(model: &mut IsingModel, grad: &Gradient, cfg: &TrainConfig, velocity: &mut Velocity) -> UpdateOutcome {
    let (eta, mu, lambda) = (cfg.learning_rate, cfg.momentum, cfg.l2);
    let vh: Vec<f64> = velocity.h.iter().zip(&grad.h).map(|(v, g)| mu * v + eta * g).collect();
    let vj: Vec<f64> = velocity
        .j
        .iter()
        .zip(&grad.j)
        .zip(&model.j)
        .map(|((v, g), w)| mu * v + eta * (g - lambda * w))
        .collect();
    let h: Vec<f64> = model.h.iter().zip(&vh).map(|(p, v)| p + v).collect();
    let j: Vec<f64> = model.j.iter().zip(&vj).map(|(p, v)| p + v).collect();

    if cfg.stop_on_range_exit {
        let mut exits: Vec<Param> = h
            .iter()
            .enumerate()
            .filter(|(_, v)| !model.h_range.contains(**v))
            .map(|(i, _)| Param::Field(i))
            .collect();
        exits.extend(
            j.iter()
                .enumerate()
                .filter(|(_, v)| !model.j_range.contains(**v))
                .map(|(k, _)| Param::Coupling(k)),
        );
        if !exits.is_empty() {
            return UpdateOutcome::RangeExit(exits);
        }
        model.h = h;
        model.j = j;
    } else {
        let (hr, jr) = (model.h_range, model.j_range);
        model.h = h.into_iter().map(|v| hr.clamp(v)).collect();
        model.j = j.into_iter().map(|v| jr.clamp(v)).collect();
    }
    velocity.h = vh;
    velocity.j = vj;
    UpdateOutcome::Applied
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLine {
    pub iteration: u64,
    pub mean_abs_grad_h: f64,
    pub mean_abs_grad_j: f64,
    pub max_abs_param: f64,
    pub eval: Option<f64>,
    pub wall_seconds: Option<f64>,
}

impl LogLine {
    pub const HEADER: &'static str = "# iter\tmean_abs_grad_h\tmean_abs_grad_J\tmax_abs_param\tlambda_av\twall_s";
}

impl fmt::Display for LogLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.9e}\t{:.9e}\t{:.9e}\t",
            self.iteration, self.mean_abs_grad_h, self.mean_abs_grad_j, self.max_abs_param
        )?;
        match self.eval {
            Some(v) => write!(f, "{v:.9}\t")?,
            None => f.write_str("-\t")?,
        }
        match self.wall_seconds {
            Some(w) => write!(f, "{w:.3}"),
            None => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxIterations,
    /// Step `iteration` was rejected; the model holds the state after
    /// `iteration - 1` updates.
    RangeExit { iteration: u64, params: Vec<Param> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iteration: u64,
    pub gradient: Gradient,
    pub outcome: UpdateOutcome,
    pub source: MomentSource,
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const SAMPLER_STREAM: u64 = 0x4e45_4741;

/// Training state: extended data, model, optimiser velocity and batch cursor.
pub struct Trainer {
    cfg: TrainConfig,
    width: usize,
    extended: Vec<Spin>,
    rows: usize,
    model: IsingModel,
    velocity: Velocity,
    iteration: u64,
    full_batch: Option<MomentVector>,
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
    logged_source: bool,
}

impl Trainer {
    /// Encode `data` through `e` and start from a fresh seeded model.
    pub fn new(data: &LogicalDataset, e: &Embedding, hw: &HardwareGraph, cfg: TrainConfig) -> Result<Trainer> {
        let model = init_model(hw, e, cfg.seed)?;
        let velocity = Velocity::zeros(&model);
        Trainer::resume(data, e, model, velocity, 0, cfg)
    }

    pub fn resume(
        data: &LogicalDataset,
        e: &Embedding,
        model: IsingModel,
        velocity: Velocity,
        iteration: u64,
        cfg: TrainConfig,
    ) -> Result<Trainer> {
        cfg.validate()?;
        if data.n_vars() != e.num_logical() {
            return Err(Error::LengthMismatch { expected: e.num_logical(), got: data.n_vars() });
        }
        if data.is_empty() {
            return Err(Error::input("training data is empty"));
        }
        if model.len() != e.num_physical() {
            return Err(Error::LengthMismatch { expected: e.num_physical(), got: model.len() });
        }
        let width = e.num_physical();
        let mut extended = Vec::with_capacity(width * data.len());
        for row in data.rows() {
            e.encode_into(row, &mut extended);
        }
        let rows = data.len();
        let full_batch = if cfg.minibatch == 0 || cfg.minibatch >= rows {
            Some(positive_phase(extended.chunks_exact(width), model.graph())?)
        } else {
            None
        };
        let mut t = Trainer {
            cfg,
            width,
            extended,
            rows,
            model,
            velocity,
            iteration,
            full_batch,
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
            logged_source: false,
        };
        // Replay the batch schedule so a resumed run sees the same batches.
        if t.full_batch.is_none() {
            for _ in 0..iteration {
                t.next_batch();
            }
        }
        Ok(t)
    }

    pub fn model(&self) -> &IsingModel {
        &self.model
    }

    pub fn velocity(&self) -> &Velocity {
        &self.velocity
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn into_parts(self) -> (IsingModel, Velocity, u64) {
        (self.model, self.velocity, self.iteration)
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.cfg.minibatch);
        while batch.len() < self.cfg.minibatch {
            if self.cursor == self.order.len() {
                if !batch.is_empty() {
                    break;
                }
                self.order = (0..self.rows).collect();
                self.order.shuffle(&mut rng::stream(rng::derive_seed(self.cfg.seed, SHUFFLE_STREAM), self.epoch));
                self.epoch += 1;
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    fn positive(&mut self) -> Result<MomentVector> {
        if let Some(full) = &self.full_batch {
            return Ok(full.clone());
        }
        let batch = self.next_batch();
        let w = self.width;
        positive_phase(batch.iter().map(|&r| &self.extended[r * w..(r + 1) * w]), self.model.graph())
    }

    /// One positive phase, negative phase and update.
    pub fn step(&mut self) -> Result<StepReport> {
        let t = self.iteration + 1;
        let pos = self.positive()?;
        let sampler = SamplerConfig {
            seed: rng::derive_seed(rng::derive_seed(self.cfg.seed, SAMPLER_STREAM), t),
            ..self.cfg.sampler.clone()
        };
        let (neg, source) = model_moments(&self.model, &sampler)?;
        if !self.logged_source {
            log::info!("negative phase: {} moments from the {} sampler", match source {
                MomentSource::Analytic => "analytic",
                MomentSource::Empirical => "empirical",
            }, sampler.kind);
            self.logged_source = true;
        }
        let grad = gradient(&pos, &neg)?;
        let outcome = update(&mut self.model, &grad, &self.cfg, &mut self.velocity);
        if outcome == UpdateOutcome::Applied {
            self.iteration = t;
        }
        Ok(StepReport { iteration: t, gradient: grad, outcome, source })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: IsingModel,
    pub velocity: Velocity,
    /// Number of applied updates.
    pub iterations: u64,
    pub stop: StopReason,
    pub log: Vec<LogLine>,
}

/// Train from a fresh model until `max_iters` or a range exit.
///
/// `hook` runs after every applied update and may return a value for the
/// log's evaluation column.
pub fn train(
    data: &LogicalDataset,
    e: &Embedding,
    hw: &HardwareGraph,
    cfg: &TrainConfig,
    hook: impl FnMut(u64, &IsingModel) -> Result<Option<f64>>,
) -> Result<TrainOutcome> {
    let trainer = Trainer::new(data, e, hw, cfg.clone())?;
    run(trainer, hook)
}

/// Drive `trainer` to `max_iters` or the first range exit.
pub fn run(
    mut trainer: Trainer,
    mut hook: impl FnMut(u64, &IsingModel) -> Result<Option<f64>>,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut log = Vec::new();
    let mut stop = StopReason::MaxIterations;
    while trainer.iteration() < trainer.cfg.max_iters {
        let report = trainer.step()?;
        if let UpdateOutcome::RangeExit(params) = report.outcome {
            log::info!("iteration {}: parameters would leave the dynamic range", report.iteration);
            stop = StopReason::RangeExit { iteration: report.iteration, params };
            break;
        }
        let eval = hook(report.iteration, trainer.model())?;
        log.push(LogLine {
            iteration: report.iteration,
            mean_abs_grad_h: report.gradient.mean_abs_h(),
            mean_abs_grad_j: report.gradient.mean_abs_j(),
            max_abs_param: trainer.model().max_abs_param(),
            eval,
            wall_seconds: trainer.cfg.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        });
    }
    let (model, velocity, iterations) = trainer.into_parts();
    Ok(TrainOutcome { model, velocity, iterations, stop, log })
}

/// True when edge `k` of the embedded model joins two qubits of one chain.
pub fn is_intra_chain(e: &Embedding, graph: &Graph, k: usize) -> bool {
    let (a, b) = graph.edges()[k];
    chain_of(e, a) == chain_of(e, b)
}

fn chain_of(e: &Embedding, pos: usize) -> usize {
    (0..e.num_logical()).find(|&i| e.chain_range(i).contains(&pos)).expect("position inside embedding")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{exact_moments, Clamp, SamplerKind};
    use crate::topology::Graph;

    fn cfg_plain(eta: f64) -> TrainConfig {
        TrainConfig { learning_rate: eta, momentum: 0.0, l2: 0.0, ..Default::default() }
    }

    #[test]
    fn all_up_point() {
        let g = Graph::complete(3);
        let row: &[Spin] = &[1, 1, 1];
        let m = positive_phase([row], &g).unwrap();
        assert!(m.first.iter().chain(&m.second).all(|&v| v == 1.0));
    }

    #[test]
    fn flip_pair_point() {
        let g = Graph::complete(3);
        let z: &[Spin] = &[1, -1, 1];
        let nz: &[Spin] = &[-1, 1, -1];
        let m = positive_phase([z, nz], &g).unwrap();
        assert!(m.first.iter().all(|&v| v == 0.0));
        assert_eq!(m.second, vec![-1.0, 1.0, -1.0]);
        assert!(positive_phase(std::iter::empty::<&[Spin]>(), &g).is_err());
    }

    #[test]
    fn stationary_gradient() {
        let m = MomentVector { first: vec![0.2, -0.1], second: vec![0.4] };
        let g = gradient(&m, &m).unwrap();
        assert!(g.h.iter().chain(&g.j).all(|&v| v == 0.0));
        assert!(gradient(&m, &MomentVector::zeros(3, 1)).is_err());
    }

    #[test]
    fn chain_coupling_grows() {
        let eps = 0.05;
        let pos = MomentVector { first: vec![0.0; 2], second: vec![1.0] };
        let neg = MomentVector { first: vec![0.0; 2], second: vec![1.0 - eps] };
        let g = gradient(&pos, &neg).unwrap();
        assert!((g.j[0] - eps).abs() < 1e-15);
    }

    #[test]
    fn plain_ascent_step() {
        let mut m = IsingModel::zeros(Graph::complete(2));
        let mut v = Velocity::zeros(&m);
        let g = Gradient { h: vec![0.1, -0.2], j: vec![0.3] };
        assert_eq!(update(&mut m, &g, &cfg_plain(0.5), &mut v), UpdateOutcome::Applied);
        assert_eq!(m.h, vec![0.05, -0.1]);
        assert_eq!(m.j, vec![0.15]);
    }

    #[test]
    fn momentum_accumulates() {
        let cfg = TrainConfig { learning_rate: 0.01, momentum: 0.5, l2: 0.0, ..Default::default() };
        let mut m = IsingModel::zeros(Graph::complete(2));
        let mut v = Velocity::zeros(&m);
        let g = Gradient { h: vec![1.0, 1.0], j: vec![1.0] };
        update(&mut m, &g, &cfg, &mut v);
        let before = m.j[0];
        update(&mut m, &g, &cfg, &mut v);
        assert!((m.j[0] - before - 1.5 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn l2_only_on_couplings() {
        let cfg = TrainConfig { learning_rate: 0.1, momentum: 0.0, l2: 0.5, ..Default::default() };
        let mut m = IsingModel::from_params(Graph::complete(2), vec![0.4, 0.4], vec![0.4]).unwrap();
        let mut v = Velocity::zeros(&m);
        let g = Gradient { h: vec![0.0; 2], j: vec![0.0] };
        update(&mut m, &g, &cfg, &mut v);
        assert_eq!(m.h, vec![0.4, 0.4]);
        assert!((m.j[0] - (0.4 - 0.1 * 0.5 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn range_exit_leaves_model_unchanged() {
        let mut m = IsingModel::from_params(Graph::complete(2), vec![0.0; 2], vec![0.9995]).unwrap();
        let mut v = Velocity::zeros(&m);
        let g = Gradient { h: vec![0.0; 2], j: vec![1.0] };
        let before = (m.clone(), v.clone());
        let out = update(&mut m, &g, &cfg_plain(0.001), &mut v);
        assert_eq!(out, UpdateOutcome::RangeExit(vec![Param::Coupling(0)]));
        assert_eq!((m.clone(), v.clone()), before);

        let cfg = TrainConfig { stop_on_range_exit: false, ..cfg_plain(0.001) };
        assert_eq!(update(&mut m, &g, &cfg, &mut v), UpdateOutcome::Applied);
        assert_eq!(m.j[0], 1.0);
    }

    fn log_likelihood(m: &IsingModel, rows: &[Vec<Spin>]) -> f64 {
        let lz = exact_moments(m, 1.0, &Clamp::new()).unwrap().log_z;
        rows.iter().map(|r| -m.energy(r).unwrap()).sum::<f64>() / rows.len() as f64 - lz
    }

    #[test]
    fn exact_ascent_is_monotone() {
        let hw = HardwareGraph::complete(5);
        let e = Embedding::identity(5);
        let mut r = rng::from_seed(3);
        let rows: Vec<Vec<Spin>> = (0..40)
            .map(|_| (0..5).map(|_| if rand::Rng::random::<f64>(&mut r) < 0.7 { 1 } else { -1 }).collect())
            .collect();
        let data = LogicalDataset::new(5, rows.concat()).unwrap();
        let cfg = TrainConfig {
            max_iters: 200,
            sampler: SamplerConfig::new(SamplerKind::Exact),
            ..cfg_plain(1e-3)
        };
        let mut prev = f64::NEG_INFINITY;
        let mut trainer = Trainer::new(&data, &e, &hw, cfg).unwrap();
        for _ in 0..200 {
            trainer.step().unwrap();
            let ll = log_likelihood(trainer.model(), &rows);
            assert!(ll >= prev - 1e-12, "{ll} < {prev}");
            prev = ll;
        }
        let _ = hw;
    }

    #[test]
    fn minibatches_cover_epoch_with_remainder() {
        let data = LogicalDataset::new(1, vec![1, -1, 1, 1, -1]).unwrap();
        let cfg = TrainConfig { minibatch: 2, sampler: SamplerConfig::new(SamplerKind::Exact), ..Default::default() };
        let mut t = Trainer::new(&data, &Embedding::identity(1), &HardwareGraph::complete(1), cfg).unwrap();
        let sizes: Vec<usize> = (0..6).map(|_| t.next_batch().len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 2, 2, 1]);
        let mut first_epoch: Vec<usize> = Vec::new();
        let mut t2 = Trainer::new(
            &data,
            &Embedding::identity(1),
            &HardwareGraph::complete(1),
            TrainConfig { minibatch: 2, sampler: SamplerConfig::new(SamplerKind::Exact), ..Default::default() },
        )
        .unwrap();
        for _ in 0..3 {
            first_epoch.extend(t2.next_batch());
        }
        first_epoch.sort_unstable();
        assert_eq!(first_epoch, vec![0, 1, 2, 3, 4]);
    }
}
