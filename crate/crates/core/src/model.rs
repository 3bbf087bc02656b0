//! The trainable physical Ising model and its checkpoint format.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::rng;
use crate::spin::Spin;
use crate::topology::{parse_topology, strip_comment, Graph, HardwareGraph, QubitId};

/// Closed interval of allowed parameter values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub const FIELD: ParamRange = ParamRange { lo: -2.0, hi: 2.0 };
    pub const COUPLING: ParamRange = ParamRange { lo: -1.0, hi: 1.0 };
    pub const UNBOUNDED: ParamRange = ParamRange { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    graph: Graph,
    /// Field per vertex.
    pub h: Vec<f64>,
    /// Coupling per edge of `graph`, in edge order.
    pub j: Vec<f64>,
    pub h_range: ParamRange,
    pub j_range: ParamRange,
}

impl IsingModel {
    /// All-zero model with the default device ranges.
    pub fn zeros(graph: Graph) -> IsingModel {
        IsingModel {
            h: vec![0.0; graph.len()],
            j: vec![0.0; graph.num_edges()],
            graph,
            h_range: ParamRange::FIELD,
            j_range: ParamRange::COUPLING,
        }
    }

    pub fn from_params(graph: Graph, h: Vec<f64>, j: Vec<f64>) -> Result<IsingModel> {
        if h.len() != graph.len() {
            return Err(Error::LengthMismatch { expected: graph.len(), got: h.len() });
        }
        if j.len() != graph.num_edges() {
            return Err(Error::LengthMismatch { expected: graph.num_edges(), got: j.len() });
        }
        Ok(IsingModel { graph, h, j, h_range: ParamRange::FIELD, j_range: ParamRange::COUPLING })
    }

    pub fn with_ranges(mut self, h_range: ParamRange, j_range: ParamRange) -> IsingModel {
        self.h_range = h_range;
        self.j_range = j_range;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn coupling(&self, i: usize, j: usize) -> Option<f64> {
        self.graph.edge_index(i, j).map(|k| self.j[k])
    }

    /// `E(z) = -Σ J_ij z_i z_j - Σ h_i z_i`.
    pub fn energy(&self, z: &[Spin]) -> Result<f64> {
        if z.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: z.len() });
        }
        Ok(self.energy_unchecked(z))
    }

    pub(crate) fn energy_unchecked(&self, z: &[Spin]) -> f64 {
        let pair: f64 = self
            .graph
            .edges()
            .iter()
            .zip(&self.j)
            .map(|(&(a, b), &w)| w * f64::from(z[a] * z[b]))
            .sum();
        let field: f64 = self.h.iter().zip(z).map(|(&h, &s)| h * f64::from(s)).sum();
        -pair - field
    }

    /// `h_i + Σ_j J_ij z_j`.
    #[inline]
    pub fn local_field(&self, i: usize, z: &[Spin]) -> f64 {
        self.graph
            .adjacency(i)
            .iter()
            .fold(self.h[i], |acc, &(n, k)| acc + self.j[k] * f64::from(z[n]))
    }

    pub fn max_abs_param(&self) -> f64 {
        self.h.iter().chain(&self.j).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First parameter (by name) outside its range, if any.
    pub fn range_violation(&self) -> Option<Error> {
        let labels = self.graph.labels();
        for (i, &v) in self.h.iter().enumerate() {
            if !self.h_range.contains(v) {
                return Some(Error::Range {
                    param: format!("h({})", labels[i]),
                    value: v,
                    lo: self.h_range.lo,
                    hi: self.h_range.hi,
                });
            }
        }
        for (&(a, b), &v) in self.graph.edges().iter().zip(&self.j) {
            if !self.j_range.contains(v) {
                return Some(Error::Range {
                    param: format!("J({},{})", labels[a], labels[b]),
                    value: v,
                    lo: self.j_range.lo,
                    hi: self.j_range.hi,
                });
            }
        }
        None
    }
}

/// Draw every field and coupling uniformly from `[-1e-6, 1e-6]`.
pub fn init_model(g: &HardwareGraph, e: &Embedding, seed: u64) -> Result<IsingModel> {
    const SCALE: f64 = 1e-6;
    let graph = e.physical_graph(g)?;
    let mut rng = rng::from_seed(seed);
    let mut draw = || rng.random_range(-SCALE..=SCALE);
    let h = (0..graph.len()).map(|_| draw()).collect();
    let j = (0..graph.num_edges()).map(|_| draw()).collect();
    IsingModel::from_params(graph, h, j)
}

/// Momentum state, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub h: Vec<f64>,
    pub j: Vec<f64>,
}

impl Velocity {
    pub fn zeros(model: &IsingModel) -> Velocity {
        Velocity { h: vec![0.0; model.h.len()], j: vec![0.0; model.j.len()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hardware: HardwareGraph,
    pub embedding_digest: String,
    pub seed: u64,
    pub iteration: u64,
    pub model: IsingModel,
    pub velocity: Velocity,
}

const CHECKPOINT_VERSION: &str = "v1";

impl Checkpoint {
    pub fn new(hardware: HardwareGraph, embedding: &Embedding, model: IsingModel, seed: u64) -> Checkpoint {
        let velocity = Velocity::zeros(&model);
        Checkpoint { hardware, embedding_digest: embedding.digest(), seed, iteration: 0, model, velocity }
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let labels = m.graph.labels();
        let mut out = format!("model {CHECKPOINT_VERSION}\n");
        out.push_str(&self.hardware.dump());
        let _ = writeln!(out, "embedding {}", self.embedding_digest);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "iter {}", self.iteration);
        let _ = writeln!(out, "range h {} {}", m.h_range.lo, m.h_range.hi);
        let _ = writeln!(out, "range J {} {}", m.j_range.lo, m.j_range.hi);
        for (q, v) in labels.iter().zip(&m.h) {
            let _ = writeln!(out, "h {q} {v}");
        }
        for (&(a, b), v) in m.graph.edges().iter().zip(&m.j) {
            let _ = writeln!(out, "J {} {} {v}", labels[a], labels[b]);
        }
        for (q, v) in labels.iter().zip(&self.velocity.h) {
            let _ = writeln!(out, "vh {q} {v}");
        }
        for (&(a, b), v) in m.graph.edges().iter().zip(&self.velocity.j) {
            let _ = writeln!(out, "vJ {} {} {v}", labels[a], labels[b]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Checkpoint> {
        let mut p = CheckpointParser::default();
        let mut last = 0;
        for (n, raw) in text.lines().enumerate() {
            last = n + 1;
            let line = strip_comment(raw);
            if !line.is_empty() {
                p.line(n + 1, line)?;
            }
        }
        p.finish(last + 1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::parse(&text)
    }
}

#[derive(Default)]
struct CheckpointParser<'a> {
    version: bool,
    topology: Option<(usize, Vec<&'a str>)>,
    broken: BTreeSet<QubitId>,
    digest: Option<String>,
    seed: Option<u64>,
    iter: Option<u64>,
    h_range: Option<ParamRange>,
    j_range: Option<ParamRange>,
    h: Vec<(QubitId, f64)>,
    j: Vec<(usize, QubitId, QubitId, f64)>,
    vh: Vec<(QubitId, f64)>,
    vj: Vec<(QubitId, QubitId, f64)>,
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(line, format!("bad number `{tok}`")))
}

impl<'a> CheckpointParser<'a> {
    fn line(&mut self, n: usize, line: &'a str) -> Result<()> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !self.version {
            return match toks.as_slice() {
                ["model", CHECKPOINT_VERSION] => {
                    self.version = true;
                    Ok(())
                }
                ["model", v] => Err(Error::Version(v.to_string())),
                _ => Err(Error::parse(n, "expected `model v1` header")),
            };
        }
        match toks.as_slice() {
            ["chimera", ..] | ["complete", ..] if self.topology.is_none() => {
                self.topology = Some((n, toks));
            }
            ["broken", q] => {
                self.broken.insert(num(n, q)?);
            }
            ["embedding", d] => self.digest = Some(d.to_string()),
            ["seed", s] => self.seed = Some(num(n, s)?),
            ["iter", s] => self.iter = Some(num(n, s)?),
            ["range", which, lo, hi] => {
                let r = ParamRange { lo: num(n, lo)?, hi: num(n, hi)? };
                match *which {
                    "h" => self.h_range = Some(r),
                    "J" => self.j_range = Some(r),
                    _ => return Err(Error::parse(n, format!("unknown range `{which}`"))),
                }
            }
            ["h", q, v] => self.h.push((num(n, q)?, num(n, v)?)),
            ["J", a, b, v] => self.j.push((n, num(n, a)?, num(n, b)?, num(n, v)?)),
            ["vh", q, v] => self.vh.push((num(n, q)?, num(n, v)?)),
            ["vJ", a, b, v] => self.vj.push((num(n, a)?, num(n, b)?, num(n, v)?)),
            _ => return Err(Error::parse(n, format!("unexpected line `{line}`"))),
        }
        Ok(())
    }

    fn finish(self, end: usize) -> Result<Checkpoint> {
        let missing = |what: &str| Error::parse(end, format!("truncated checkpoint: missing {what}"));
        if !self.version {
            return Err(missing("`model v1` header"));
        }
        let (tline, toks) = self.topology.ok_or_else(|| missing("topology line"))?;
        let hardware = parse_topology(tline, &toks, self.broken)?;
        let labels: Vec<QubitId> = self.h.iter().map(|&(q, _)| q).collect();
        let graph = hardware.induced(&labels)?;
        if self.j.len() != graph.num_edges() {
            return Err(missing(&format!(
                "couplings ({} of {})",
                self.j.len(),
                graph.num_edges()
            )));
        }
        if self.vh.len() != graph.len() || self.vj.len() != graph.num_edges() {
            return Err(missing("velocity lines"));
        }
        let index: HashMap<QubitId, usize> = labels.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let edge = |line: usize, a: QubitId, b: QubitId| -> Result<usize> {
            let (i, j) = match (index.get(&a), index.get(&b)) {
                (Some(&i), Some(&j)) => (i, j),
                _ => return Err(Error::parse(line, format!("coupling {a}-{b} names unknown qubit"))),
            };
            graph
                .edge_index(i, j)
                .ok_or_else(|| Error::parse(line, format!("{a}-{b} is not a hardware edge")))
        };
        let mut j = vec![f64::NAN; graph.num_edges()];
        for &(line, a, b, v) in &self.j {
            j[edge(line, a, b)?] = v;
        }
        if j.iter().any(|v| v.is_nan()) {
            return Err(missing("a coupling (duplicate J line)"));
        }
        let mut vj = vec![0.0; graph.num_edges()];
        for &(a, b, v) in &self.vj {
            vj[edge(end, a, b)?] = v;
        }
        let mut vh = vec![0.0; graph.len()];
        for &(q, v) in &self.vh {
            let i = *index.get(&q).ok_or(Error::UnknownQubit(q))?;
            vh[i] = v;
        }
        let h = self.h.iter().map(|&(_, v)| v).collect();
        let model = IsingModel::from_params(graph, h, j)?.with_ranges(
            self.h_range.unwrap_or(ParamRange::FIELD),
            self.j_range.unwrap_or(ParamRange::COUPLING),
        );
        if let Some(err) = model.range_violation() {
            return Err(err);
        }
        Ok(Checkpoint {
            hardware,
            embedding_digest: self.digest.ok_or_else(|| missing("embedding digest"))?,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            iteration: self.iter.ok_or_else(|| missing("iteration"))?,
            model,
            velocity: Velocity { h: vh, j: vj },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_chimera, ChimeraSpec};
    use proptest::prelude::*;

    fn pair_model(j: f64) -> IsingModel {
        IsingModel::from_params(Graph::complete(2), vec![0.0, 0.0], vec![j]).unwrap()
    }

    #[test]
    fn zero_model_energy() {
        let m = IsingModel::zeros(Graph::complete(4));
        assert_eq!(m.energy(&[1, -1, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn single_term_energy() {
        assert_eq!(pair_model(0.5).energy(&[1, 1]).unwrap(), -0.5);
        assert!(pair_model(0.5).energy(&[1]).is_err());
    }

    #[test]
    fn energy_matches_term_by_term_sum() {
        let g = build_chimera(ChimeraSpec::new(1, 2, 4).with_broken([0, 9, 14, 15, 3, 11])).unwrap();
        let e = Embedding::new(&g, g.vertices().iter().map(|&q| vec![q]).collect()).unwrap();
        let m = init_model(&g, &e, 3).unwrap();
        let m = IsingModel {
            h: m.h.iter().map(|v| v * 1e6).collect(),
            j: m.j.iter().map(|v| v * 1e6).collect(),
            ..m
        };
        assert_eq!(m.len(), 10);
        let mut r = rng::from_seed(11);
        for _ in 0..20 {
            let z: Vec<Spin> = (0..10).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
            let mut oracle = 0.0;
            for a in 0..10 {
                oracle -= m.h[a] * z[a] as f64;
                for b in a + 1..10 {
                    if let Some(w) = m.coupling(a, b) {
                        oracle -= w * (z[a] * z[b]) as f64;
                    }
                }
            }
            assert!((m.energy(&z).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn init_is_small_and_seeded() {
        let g = build_chimera(ChimeraSpec::new(2, 2, 4)).unwrap();
        let e = crate::embedding::clique_embed(&g, 8).unwrap();
        let a = init_model(&g, &e, 1).unwrap();
        assert!(a.max_abs_param() <= 1e-6);
        assert_eq!(a, init_model(&g, &e, 1).unwrap());
        assert_ne!(a, init_model(&g, &e, 2).unwrap());
    }

    fn sample_checkpoint() -> Checkpoint {
        let g = build_chimera(ChimeraSpec::new(2, 2, 4).with_broken([31])).unwrap();
        let e = crate::embedding::clique_embed(&build_chimera(ChimeraSpec::new(2, 2, 4)).unwrap(), 6).unwrap();
        let m = init_model(&g, &e, 5).unwrap();
        let mut c = Checkpoint::new(g, &e, m, 5);
        c.iteration = 17;
        c.velocity.h[2] = 0.1 + 0.2;
        c.velocity.j[3] = -1.0 / 3.0;
        c
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn checkpoint_range_error_names_edge() {
        let text = sample_checkpoint().to_text();
        let line = text.lines().find(|l| l.starts_with("J ")).unwrap().to_string();
        let toks: Vec<&str> = line.split(' ').collect();
        let bad = text.replacen(&line, &format!("J {} {} 1.5", toks[1], toks[2]), 1);
        match Checkpoint::parse(&bad) {
            Err(Error::Range { param, value, .. }) => {
                assert_eq!(param, format!("J({},{})", toks[1], toks[2]));
                assert_eq!(value, 1.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_truncated() {
        let text = sample_checkpoint().to_text();
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() / 2].join("\n");
        assert!(matches!(Checkpoint::parse(&cut), Err(Error::Parse { .. })));
        let partial = format!("{}\nJ 3", lines[..12].join("\n"));
        match Checkpoint::parse(&partial) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Checkpoint::parse("model v9\n"), Err(Error::Version(_))));
    }

    proptest! {
        #[test]
        fn flip_symmetry_without_fields(js in prop::collection::vec(-1.0f64..1.0, 6), bits in 0u8..16) {
            let m = IsingModel::from_params(Graph::complete(4), vec![0.0; 4], js).unwrap();
            let z: Vec<Spin> = (0..4).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let flipped: Vec<Spin> = z.iter().map(|s| -s).collect();
            prop_assert!((m.energy(&z).unwrap() - m.energy(&flipped).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn energy_linear_in_params(
            a in prop::collection::vec(-1.0f64..1.0, 9),
            b in prop::collection::vec(-1.0f64..1.0, 9),
            bits in 0u8..8,
        ) {
            let mk = |p: &[f64]| IsingModel::from_params(Graph::complete(3), p[..3].to_vec(), p[3..6].to_vec()).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let z: Vec<Spin> = (0..3).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let lhs = mk(&sum).energy(&z).unwrap();
            let rhs = mk(&a).energy(&z).unwrap() + mk(&b).energy(&z).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
