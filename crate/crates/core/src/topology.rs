//! Chimera hardware graphs and the dense interaction graphs derived from them.
//!
//! Qubit ids are flattened as `((row * cols + col) * 2 + shore) * t + k`, where
//! shore 0 holds the vertically coupled qubits of a unit cell and shore 1 the
//! horizontally coupled ones. Broken qubits keep their ids; they simply have
//! no edges and are absent from the vertex list.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type QubitId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChimeraSpec {
    pub rows: usize,
    pub cols: usize,
    pub shore: usize,
    pub broken: BTreeSet<QubitId>,
}

impl ChimeraSpec {
    pub fn new(rows: usize, cols: usize, shore: usize) -> Self {
        ChimeraSpec { rows, cols, shore, broken: BTreeSet::new() }
    }

    pub fn with_broken(mut self, broken: impl IntoIterator<Item = QubitId>) -> Self {
        self.broken.extend(broken);
        self
    }

    /// Number of qubit ids, broken ones included.
    pub fn total_qubits(&self) -> usize {
        self.rows * self.cols * 2 * self.shore
    }

    pub fn active_qubits(&self) -> usize {
        self.total_qubits() - self.broken.len()
    }

    pub fn is_ideal(&self) -> bool {
        self.broken.is_empty()
    }

    pub fn qubit(&self, row: usize, col: usize, shore: usize, k: usize) -> QubitId {
        (((row * self.cols + col) * 2 + shore) * self.shore + k) as QubitId
    }

    /// Inverse of [`ChimeraSpec::qubit`]: `(row, col, shore, k)`.
    pub fn coords(&self, q: QubitId) -> (usize, usize, usize, usize) {
        let q = q as usize;
        let k = q % self.shore;
        let rest = q / self.shore;
        let u = rest % 2;
        let cell = rest / 2;
        (cell / self.cols, cell % self.cols, u, k)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.shore == 0 {
            return Err(Error::input(format!(
                "chimera dimensions must be positive, got {}x{}x{}",
                self.rows, self.cols, self.shore
            )));
        }
        let total = self.total_qubits() as QubitId;
        if let Some(&q) = self.broken.iter().find(|&&q| q >= total) {
            return Err(Error::input(format!(
                "broken qubit {q} is out of range for {total} qubits"
            )));
        }
        Ok(())
    }
}

/// Which family a hardware graph comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    Chimera(ChimeraSpec),
    /// Fully connected graph; used for logical (non-embedded) models.
    Complete(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardwareGraph {
    topology: Topology,
    vertices: Vec<QubitId>,
    edges: Vec<(QubitId, QubitId)>,
    adjacency: Vec<Vec<QubitId>>,
    active: Vec<bool>,
}

/// Build the Chimera graph described by `spec`.
pub fn build_chimera(spec: ChimeraSpec) -> Result<HardwareGraph> {
    spec.validate()?;
    let total = spec.total_qubits();
    let active: Vec<bool> = (0..total as QubitId).map(|q| !spec.broken.contains(&q)).collect();
    let mut edges = Vec::new();
    let mut push = |a: QubitId, b: QubitId| {
        if active[a as usize] && active[b as usize] {
            edges.push((a.min(b), a.max(b)));
        }
    };
    let t = spec.shore;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            for k in 0..t {
                for k2 in 0..t {
                    push(spec.qubit(r, c, 0, k), spec.qubit(r, c, 1, k2));
                }
                if r + 1 < spec.rows {
                    push(spec.qubit(r, c, 0, k), spec.qubit(r + 1, c, 0, k));
                }
                if c + 1 < spec.cols {
                    push(spec.qubit(r, c, 1, k), spec.qubit(r, c + 1, 1, k));
                }
            }
        }
    }
    Ok(HardwareGraph::from_edges(Topology::Chimera(spec), active, edges))
}

impl HardwareGraph {
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n as QubitId {
            for j in i + 1..n as QubitId {
                edges.push((i, j));
            }
        }
        HardwareGraph::from_edges(Topology::Complete(n), vec![true; n], edges)
    }

    fn from_edges(topology: Topology, active: Vec<bool>, mut edges: Vec<(QubitId, QubitId)>) -> Self {
        edges.sort_unstable();
        let mut adjacency = vec![Vec::new(); active.len()];
        for &(a, b) in &edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let vertices = (0..active.len() as QubitId).filter(|&q| active[q as usize]).collect();
        HardwareGraph { topology, vertices, edges, adjacency, active }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn chimera_spec(&self) -> Option<&ChimeraSpec> {
        match &self.topology {
            Topology::Chimera(spec) => Some(spec),
            Topology::Complete(_) => None,
        }
    }

    pub fn vertices(&self) -> &[QubitId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(QubitId, QubitId)] {
        &self.edges
    }

    pub fn num_active(&self) -> usize {
        self.vertices.len()
    }

    /// One past the largest qubit id, broken qubits included.
    pub fn id_bound(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, q: QubitId) -> bool {
        self.active.get(q as usize).copied().unwrap_or(false)
    }

    /// Sorted neighbours of an active qubit.
    pub fn neighbors(&self, q: QubitId) -> Result<&[QubitId]> {
        if !self.is_active(q) {
            return Err(Error::UnknownQubit(q));
        }
        Ok(&self.adjacency[q as usize])
    }

    pub fn has_edge(&self, a: QubitId, b: QubitId) -> bool {
        self.is_active(a) && self.adjacency[a as usize].binary_search(&b).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Dense graph on `qubits` (in the given order) with every hardware edge
    /// between them.
    pub fn induced(&self, qubits: &[QubitId]) -> Result<Graph> {
        let mut index = HashMap::with_capacity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            if !self.is_active(q) {
                return Err(Error::UnknownQubit(q));
            }
            if index.insert(q, i).is_some() {
                return Err(Error::input(format!("qubit {q} listed twice")));
            }
        }
        let mut edges = Vec::new();
        for (i, &q) in qubits.iter().enumerate() {
            for p in &self.adjacency[q as usize] {
                if let Some(&j) = index.get(p) {
                    if j > i {
                        edges.push((i, j));
                    }
                }
            }
        }
        Graph::new(qubits.to_vec(), edges)
    }

    /// Header line naming the topology, e.g. `chimera 12 12 4`.
    pub fn topology_line(&self) -> String {
        match &self.topology {
            Topology::Chimera(s) => format!("chimera {} {} {}", s.rows, s.cols, s.shore),
            Topology::Complete(n) => format!("complete {n}"),
        }
    }

    /// Text dump: topology line followed by one `broken <id>` line per broken qubit.
    pub fn dump(&self) -> String {
        let mut out = self.topology_line();
        out.push('\n');
        if let Topology::Chimera(s) = &self.topology {
            for q in &s.broken {
                let _ = writeln!(out, "broken {q}");
            }
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<HardwareGraph> {
        let mut header: Option<(usize, Vec<&str>)> = None;
        let mut broken = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "chimera" | "complete" if header.is_none() => header = Some((n + 1, toks)),
                "broken" if toks.len() == 2 => {
                    let q = toks[1]
                        .parse()
                        .map_err(|_| Error::parse(n + 1, format!("bad qubit id `{}`", toks[1])))?;
                    if !broken.insert(q) {
                        return Err(Error::parse(n + 1, format!("qubit {q} listed as broken twice")));
                    }
                }
                _ => return Err(Error::parse(n + 1, format!("unexpected line `{line}`"))),
            }
        }
        let (line, toks) = header.ok_or_else(|| Error::parse(1, "missing topology line"))?;
        parse_topology(line, &toks, broken)
    }
}

/// Parse `chimera r c t` / `complete n` tokens into a graph.
pub(crate) fn parse_topology(
    line: usize,
    toks: &[&str],
    broken: BTreeSet<QubitId>,
) -> Result<HardwareGraph> {
    let nums: Vec<usize> = toks[1..]
        .iter()
        .map(|t| t.parse().map_err(|_| Error::parse(line, format!("bad number `{t}`"))))
        .collect::<Result<_>>()?;
    match (toks[0], nums.as_slice()) {
        ("chimera", &[r, c, t]) => build_chimera(ChimeraSpec::new(r, c, t).with_broken(broken)),
        ("complete", &[n]) if broken.is_empty() => Ok(HardwareGraph::complete(n)),
        _ => Err(Error::parse(line, format!("bad topology line `{}`", toks.join(" ")))),
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Dense interaction graph: vertices are indices `0..n` carrying qubit labels,
/// edges are `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<QubitId>,
    edges: Vec<(usize, usize)>,
    /// Per vertex: `(neighbour, edge index)`, sorted by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
    index: HashMap<QubitId, usize>,
}

impl Graph {
    pub fn new(labels: Vec<QubitId>, mut edges: Vec<(usize, usize)>) -> Result<Graph> {
        let n = labels.len();
        let mut index = HashMap::with_capacity(n);
        for (i, &q) in labels.iter().enumerate() {
            if index.insert(q, i).is_some() {
                return Err(Error::input(format!("duplicate vertex label {q}")));
            }
        }
        for e in &mut edges {
            if e.0 == e.1 || e.0 >= n || e.1 >= n {
                return Err(Error::input(format!("invalid edge {:?} for {n} vertices", e)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("duplicate edge"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph { labels, edges, adjacency, index })
    }

    pub fn complete(n: usize) -> Graph {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Graph::new((0..n as QubitId).collect(), edges).expect("complete graph is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn index_of(&self, q: QubitId) -> Option<usize> {
        self.index.get(&q).copied()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let list = self.adjacency.get(i)?;
        list.binary_search_by_key(&j, |&(n, _)| n).ok().map(|p| list[p].1)
    }
}
