//! Logical variables as qubit chains.
//!
//! A data point over `N` logical variables is replicated onto every qubit of
//! its chain (`encode`) and physical samples are mapped back by a majority
//! vote over each chain (`decode`). The physical vector layout is chain-major:
//! all qubits of chain 0 in listed order, then chain 1, and so on.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{EmbeddingError, Error, Result};
use crate::spin::{check_spins, Spin};
use crate::topology::{strip_comment, Graph, HardwareGraph, QubitId, Topology};

/// Decoded logical value; even chains can split evenly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logical {
    Up,
    Down,
    Tie,
}

impl Logical {
    pub fn from_sum(sum: i64) -> Logical {
        match sum.signum() {
            1 => Logical::Up,
            -1 => Logical::Down,
            _ => Logical::Tie,
        }
    }

    pub fn spin(self) -> Option<Spin> {
        match self {
            Logical::Up => Some(1),
            Logical::Down => Some(-1),
            Logical::Tie => None,
        }
    }

    /// Resolve ties to `fallback`.
    pub fn or(self, fallback: Spin) -> Spin {
        self.spin().unwrap_or(fallback)
    }
}

impl From<Spin> for Logical {
    fn from(s: Spin) -> Self {
        if s > 0 {
            Logical::Up
        } else {
            Logical::Down
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    chains: Vec<Vec<QubitId>>,
    offsets: Vec<usize>,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStats {
    pub logical: usize,
    pub physical: usize,
    pub min_chain: usize,
    pub max_chain: usize,
    /// Physical qubits over active qubits.
    pub chip_usage: f64,
    pub logical_params: usize,
    pub physical_params: usize,
}

impl EmbeddingStats {
    pub fn header() -> &'static str {
        "logical\tphysical\tmin\tmax\tusage\tlogical_params\tphysical_params"
    }

    pub fn row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.0}%\t{}\t{}",
            self.logical,
            self.physical,
            self.min_chain,
            self.max_chain,
            100.0 * self.chip_usage,
            self.logical_params,
            self.physical_params
        )
    }
}

impl Embedding {
    /// Validate `chains` against `g`.
    pub fn new(g: &HardwareGraph, chains: Vec<Vec<QubitId>>) -> Result<Embedding, EmbeddingError> {
        let mut owner: HashMap<QubitId, usize> = HashMap::new();
        for (i, chain) in chains.iter().enumerate() {
            if chain.is_empty() {
                return Err(EmbeddingError::EmptyChain { chain: i });
            }
            for &q in chain {
                if q as usize >= g.id_bound() {
                    return Err(EmbeddingError::OutOfRange { chain: i, qubit: q });
                }
                if !g.is_active(q) {
                    return Err(EmbeddingError::BrokenQubit { chain: i, qubit: q });
                }
                if let Some(first) = owner.insert(q, i) {
                    return Err(EmbeddingError::Overlap { qubit: q, first, second: i });
                }
            }
        }
        for (i, chain) in chains.iter().enumerate() {
            if !is_connected(g, chain) {
                return Err(EmbeddingError::Disconnected { chain: i });
            }
        }
        let mut offsets = Vec::with_capacity(chains.len() + 1);
        offsets.push(0);
        for chain in &chains {
            offsets.push(offsets.last().unwrap() + chain.len());
        }
        Ok(Embedding { chains, offsets, source: g.topology_line() })
    }

    /// One single-qubit chain per variable on the complete graph `K_n`.
    pub fn identity(n: usize) -> Embedding {
        let g = HardwareGraph::complete(n);
        Embedding::new(&g, (0..n as QubitId).map(|q| vec![q]).collect())
            .expect("identity layout is valid")
    }

    pub fn num_logical(&self) -> usize {
        self.chains.len()
    }

    pub fn num_physical(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn chains(&self) -> &[Vec<QubitId>] {
        &self.chains
    }

    pub fn chain(&self, i: usize) -> &[QubitId] {
        &self.chains[i]
    }

    /// Positions of chain `i` inside a physical vector.
    pub fn chain_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Topology line of the graph the embedding was validated against.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// All qubits in physical-vector order.
    pub fn qubits(&self) -> Vec<QubitId> {
        self.chains.iter().flatten().copied().collect()
    }

    /// Interaction graph of the embedded model: the subgraph of `g` induced
    /// by the chain qubits, in physical-vector order.
    pub fn physical_graph(&self, g: &HardwareGraph) -> Result<Graph> {
        g.induced(&self.qubits())
    }

    pub fn encode(&self, logical: &[Spin]) -> Result<Vec<Spin>> {
        if logical.len() != self.num_logical() {
            return Err(Error::LengthMismatch { expected: self.num_logical(), got: logical.len() });
        }
        check_spins(logical)?;
        let mut out = Vec::with_capacity(self.num_physical());
        self.encode_into(logical, &mut out);
        Ok(out)
    }

    pub(crate) fn encode_into(&self, logical: &[Spin], out: &mut Vec<Spin>) {
        for (chain, &s) in self.chains.iter().zip(logical) {
            out.extend(std::iter::repeat_n(s, chain.len()));
        }
    }

    pub fn decode(&self, physical: &[Spin]) -> Result<Vec<Logical>> {
        if physical.len() != self.num_physical() {
            return Err(Error::LengthMismatch { expected: self.num_physical(), got: physical.len() });
        }
        check_spins(physical)?;
        Ok(self.decode_unchecked(physical))
    }

    pub(crate) fn decode_unchecked(&self, physical: &[Spin]) -> Vec<Logical> {
        (0..self.num_logical()).map(|i| self.decode_chain(physical, i)).collect()
    }

    pub(crate) fn decode_chain(&self, physical: &[Spin], i: usize) -> Logical {
        let sum: i64 = physical[self.chain_range(i)].iter().map(|&z| z as i64).sum();
        Logical::from_sum(sum)
    }

    pub fn stats(&self, g: &HardwareGraph) -> Result<EmbeddingStats> {
        let sizes = self.chains.iter().map(Vec::len);
        let n = self.num_logical();
        let m = self.num_physical();
        let couplers = self.physical_graph(g)?.num_edges();
        Ok(EmbeddingStats {
            logical: n,
            physical: m,
            min_chain: sizes.clone().min().unwrap_or(0),
            max_chain: sizes.max().unwrap_or(0),
            chip_usage: m as f64 / g.num_active() as f64,
            logical_params: n * n.saturating_sub(1) / 2 + n,
            physical_params: couplers + m,
        })
    }

    /// True when every pair of chains is joined by at least one coupler.
    pub fn covers_all_pairs(&self, g: &HardwareGraph) -> bool {
        let n = self.num_logical();
        let mut owner = HashMap::new();
        for (i, chain) in self.chains.iter().enumerate() {
            for &q in chain {
                owner.insert(q, i);
            }
        }
        let mut seen = vec![false; n * n];
        for &(a, b) in g.edges() {
            if let (Some(&i), Some(&j)) = (owner.get(&a), owner.get(&b)) {
                if i != j {
                    seen[i * n + j] = true;
                    seen[j * n + i] = true;
                }
            }
        }
        (0..n).all(|i| (i + 1..n).all(|j| seen[i * n + j]))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# embedding for {}\n", self.source);
        for (i, chain) in self.chains.iter().enumerate() {
            let _ = write!(out, "chain {i}:");
            for q in chain {
                let _ = write!(out, " {q}");
            }
            out.push('\n');
        }
        out
    }

    /// Short content hash used to tie checkpoints to their embedding.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for chain in &self.chains {
            for q in chain {
                h.update(q.to_le_bytes());
            }
            h.update(u32::MAX.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

fn is_connected(g: &HardwareGraph, chain: &[QubitId]) -> bool {
    let mut seen = vec![false; chain.len()];
    let pos: HashMap<QubitId, usize> = chain.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for nb in g.neighbors(chain[i]).unwrap_or(&[]) {
            if let Some(&j) = pos.get(nb) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
    }
    count == chain.len()
}

/// Triangular clique layout of `K_n` on an ideal Chimera graph.
///
/// Variable `b * t + k` owns the shore-0 qubits at position `k` in column `b`,
/// rows `0..=b`, and the shore-1 qubits at position `k` in row `b`, columns
/// `b..m`. Segments meet in cell `(b, b)`, and any two chains with blocks
/// `a <= b` meet in cell `(a, b)`. Chains have `m + 1` qubits.
pub fn clique_embed(g: &HardwareGraph, n_logical: usize) -> Result<Embedding, EmbeddingError> {
    let spec = match g.topology() {
        Topology::Chimera(spec) => spec,
        Topology::Complete(_) => {
            return Err(EmbeddingError::TooLarge {
                n: n_logical,
                reason: "clique layout needs a Chimera graph".into(),
            })
        }
    };
    if !spec.is_ideal() {
        return Err(EmbeddingError::BrokenGraph(spec.broken.len()));
    }
    let m = spec.rows.min(spec.cols);
    let t = spec.shore;
    if n_logical > m * t {
        return Err(EmbeddingError::TooLarge {
            n: n_logical,
            reason: format!("C({},{},{}) holds at most {}", spec.rows, spec.cols, t, m * t),
        });
    }
    let chains = (0..n_logical)
        .map(|v| {
            let (b, k) = (v / t, v % t);
            let vertical = (0..=b).map(|r| spec.qubit(r, b, 0, k));
            let horizontal = (b..m).map(|c| spec.qubit(b, c, 1, k));
            vertical.chain(horizontal).collect()
        })
        .collect();
    Embedding::new(g, chains)
}

/// Parse an embedding file (`chain <i>: <q1> <q2> ...`, `#` comments).
pub fn load_embedding(g: &HardwareGraph, text: &str) -> Result<Embedding> {
    let mut chains = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse(n + 1, format!("expected `chain <i>: <qubits>`, got `{line}`"));
        let rest = line.strip_prefix("chain").ok_or_else(bad)?;
        let (idx, qubits) = rest.split_once(':').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        if idx != chains.len() {
            return Err(EmbeddingError::ChainOrder { expected: chains.len(), found: idx }.into());
        }
        let chain = qubits
            .split_whitespace()
            .map(|t| t.parse::<QubitId>().map_err(|_| Error::parse(n + 1, format!("bad qubit id `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        chains.push(chain);
    }
    Ok(Embedding::new(g, chains)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_chimera, ChimeraSpec};

    fn chimera(m: usize, n: usize, t: usize) -> HardwareGraph {
        build_chimera(ChimeraSpec::new(m, n, t)).unwrap()
    }

    #[test]
    fn encode_replicates() {
        let g = chimera(1, 1, 4);
        let e = Embedding::new(&g, vec![vec![0, 4], vec![1, 5, 2]]).unwrap();
        assert_eq!(e.encode(&[1, -1]).unwrap(), vec![1, 1, -1, -1, -1]);
        assert_eq!(e.encode(&[1, 1]).unwrap(), vec![1; 5]);
        assert!(matches!(e.encode(&[1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn decode_majority_and_ties() {
        let g = chimera(1, 1, 4);
        let e = Embedding::new(&g, vec![vec![0, 4, 1], vec![5, 2]]).unwrap();
        assert_eq!(e.decode(&[1, 1, -1, 1, -1]).unwrap(), vec![Logical::Up, Logical::Tie]);
        assert_eq!(e.decode(&[-1, -1, -1, 1, 1]).unwrap(), vec![Logical::Down, Logical::Up]);
        assert_eq!(Logical::Tie.or(-1), -1);
        assert!(e.decode(&[1, 1]).is_err());
    }

    #[test]
    fn round_trip_exhaustive() {
        let g = chimera(3, 3, 4);
        let e = clique_embed(&g, 10).unwrap();
        for bits in 0u32..1 << 10 {
            let s: Vec<Spin> = (0..10).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let z = e.encode(&s).unwrap();
            let back: Vec<Spin> = e.decode(&z).unwrap().iter().map(|l| l.spin().unwrap()).collect();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn clique_single_cell() {
        let g = chimera(1, 1, 4);
        let e = clique_embed(&g, 4).unwrap();
        assert!(e.chains().iter().all(|c| c.len() <= 2));
        // Brute force: every pair of chains shares a hardware edge.
        for i in 0..4 {
            for j in i + 1..4 {
                let joined = e.chain(i).iter().any(|&a| e.chain(j).iter().any(|&b| g.has_edge(a, b)));
                assert!(joined, "chains {i} and {j}");
            }
        }
    }

    #[test]
    fn clique_one_variable() {
        let g = chimera(2, 2, 4);
        let e = clique_embed(&g, 1).unwrap();
        assert_eq!(e.num_logical(), 1);
        assert!(e.covers_all_pairs(&g));
    }

    #[test]
    fn clique_k48_on_device() {
        let g = chimera(12, 12, 4);
        let e = clique_embed(&g, 48).unwrap();
        assert!(e.covers_all_pairs(&g));
        assert!(e.chains().iter().all(|c| c.len() == 13));
        assert!(matches!(clique_embed(&g, 49), Err(EmbeddingError::TooLarge { .. })));
    }

    #[test]
    fn clique_rejects_broken_graph() {
        let g = build_chimera(ChimeraSpec::new(2, 2, 4).with_broken([0])).unwrap();
        assert_eq!(clique_embed(&g, 4), Err(EmbeddingError::BrokenGraph(1)));
    }

    #[test]
    fn load_errors_are_distinct() {
        let g = build_chimera(ChimeraSpec::new(2, 2, 4).with_broken([7])).unwrap();
        let err = |text: &str| match load_embedding(&g, text) {
            Err(Error::Embedding(e)) => e,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(
            err("chain 0: 0 4\nchain 1: 4 1\n"),
            EmbeddingError::Overlap { qubit: 4, first: 0, second: 1 }
        );
        assert_eq!(err("chain 0: 0 1\n"), EmbeddingError::Disconnected { chain: 0 });
        assert_eq!(err("chain 0: 0 7\n"), EmbeddingError::BrokenQubit { chain: 0, qubit: 7 });
        assert_eq!(err("chain 0: 0 99\n"), EmbeddingError::OutOfRange { chain: 0, qubit: 99 });
        assert_eq!(err("chain 1: 0\n"), EmbeddingError::ChainOrder { expected: 0, found: 1 });
        assert!(matches!(load_embedding(&g, "chain 0 0 4"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn text_round_trip() {
        let g = chimera(2, 2, 4);
        let e = clique_embed(&g, 8).unwrap();
        let back = load_embedding(&g, &e.to_text()).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.digest(), e.digest());
    }

    #[test]
    fn full_cell_usage() {
        let g = chimera(1, 1, 4);
        let e = Embedding::new(&g, vec![(0..8).collect()]).unwrap();
        let s = e.stats(&g).unwrap();
        assert_eq!(s.chip_usage, 1.0);
        assert_eq!(s.physical_params, 16 + 8);
        assert_eq!(s.logical_params, 1);
    }

    #[test]
    fn physical_params_exceed_logical() {
        let g = chimera(4, 4, 4);
        let e = clique_embed(&g, 16).unwrap();
        let s = e.stats(&g).unwrap();
        assert_eq!(s.logical_params, 16 * 15 / 2 + 16);
        assert!(s.physical_params > s.logical_params);
        let id = Embedding::identity(16);
        let s = id.stats(&HardwareGraph::complete(16)).unwrap();
        assert_eq!(s.physical_params, s.logical_params);
    }
}
