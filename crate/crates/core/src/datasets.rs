//! Data sets: bars and stripes, SK spin-glass samples, OptDigits, and
//! corrupted copies with their masks.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{IsingModel, ParamRange};
use crate::rng;
use crate::samplers::Enumeration;
use crate::samplers::EXACT_CAP;
use crate::spin::{check_spins, format_spins, parse_spin, Spin};
use crate::topology::{strip_comment, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    Train,
    Test,
    #[default]
    All,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            _ => Err(Error::input(format!("unknown split `{s}`"))),
        }
    }
}

/// Rows of ±1 vectors with optional class labels and image shape.
///
/// The image shape, when present, covers the leading `rows * cols`
/// variables in row-major order; any trailing variables (class one-hots)
/// are not part of the picture.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalDataset {
    n: usize,
    data: Vec<Spin>,
    labels: Option<Vec<usize>>,
    shape: Option<(usize, usize)>,
    split: Split,
}

impl LogicalDataset {
    pub fn new(n: usize, data: Vec<Spin>) -> Result<LogicalDataset> {
        if n == 0 {
            return Err(Error::input("data set needs at least one variable"));
        }
        if !data.len().is_multiple_of(n) {
            return Err(Error::input(format!("{} values do not fill rows of length {n}", data.len())));
        }
        check_spins(&data)?;
        Ok(LogicalDataset { n, data, labels: None, shape: None, split: Split::All })
    }

    pub fn from_rows(n: usize, rows: &[Vec<Spin>]) -> Result<LogicalDataset> {
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch { expected: n, got: r.len() });
        }
        LogicalDataset::new(n, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<LogicalDataset> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_shape(mut self, rows: usize, cols: usize) -> Result<LogicalDataset> {
        if rows == 0 || cols == 0 || rows * cols > self.n {
            return Err(Error::input(format!("shape {rows}x{cols} does not fit {} variables", self.n)));
        }
        self.shape = Some((rows, cols));
        Ok(self)
    }

    pub fn with_split(mut self, split: Split) -> LogicalDataset {
        self.split = split;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Spin] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, Spin> {
        self.data.chunks_exact(self.n)
    }

    pub fn data(&self) -> &[Spin] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Number of picture variables: the image area if a shape is set,
    /// every variable otherwise.
    pub fn pixels(&self) -> usize {
        self.shape.map_or(self.n, |(r, c)| r * c)
    }

    /// The rows at `indices`, in that order, keeping labels and shape.
    pub fn select(&self, indices: &[usize]) -> LogicalDataset {
        let mut data = Vec::with_capacity(indices.len() * self.n);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        LogicalDataset {
            n: self.n,
            data,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            shape: self.shape,
            split: self.split,
        }
    }

    pub(crate) fn replace_data(&self, data: Vec<Spin>) -> LogicalDataset {
        debug_assert_eq!(data.len(), self.data.len());
        LogicalDataset { data, ..self.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dataset v1 n={}", self.n);
        if let Some((r, c)) = self.shape {
            out.push_str(&format!(" shape={r}x{c}"));
        }
        out.push_str(&format!(" split={}\n", self.split));
        for (i, row) in self.rows().enumerate() {
            out.push_str(&format_spins(row));
            if let Some(l) = &self.labels {
                out.push_str(&format!(" | {}", l[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<LogicalDataset> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l).trim()));
        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| Error::parse(1, "empty data set file"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.first() != Some(&"dataset") {
            return Err(Error::parse(hline, "expected `dataset v1` header"));
        }
        if toks.get(1) != Some(&"v1") {
            return Err(Error::Version(toks.get(1).unwrap_or(&"").to_string()));
        }
        let (mut n, mut shape, mut split) = (None, None, Split::All);
        for tok in &toks[2..] {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(hline, format!("malformed header field `{tok}`")))?;
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|_| Error::parse(hline, format!("bad n `{v}`")))?),
                "shape" => {
                    let (r, c) = v
                        .split_once('x')
                        .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                        .ok_or_else(|| Error::parse(hline, format!("bad shape `{v}`")))?;
                    shape = Some((r, c));
                }
                "split" => split = v.parse().map_err(|_| Error::parse(hline, format!("bad split `{v}`")))?,
                _ => return Err(Error::parse(hline, format!("unknown header field `{k}`"))),
            }
        }
        let n = n.ok_or_else(|| Error::parse(hline, "header lacks n="))?;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut labelled = None;
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (values, label) = match line.split_once('|') {
                Some((v, l)) => (v, Some(l.trim())),
                None => (line, None),
            };
            match (labelled, label.is_some()) {
                (None, has) => labelled = Some(has),
                (Some(a), b) if a != b => return Err(Error::parse(ln, "labels must be on every row or none")),
                _ => {}
            }
            if let Some(l) = label {
                labels.push(l.parse::<usize>().map_err(|_| Error::parse(ln, format!("bad label `{l}`")))?);
            }
            let before = data.len();
            for tok in values.split_whitespace() {
                data.push(parse_spin(tok).ok_or_else(|| Error::parse(ln, format!("`{tok}` is not a spin")))?);
            }
            if data.len() - before != n {
                return Err(Error::parse(ln, format!("expected {n} values, found {}", data.len() - before)));
            }
        }
        let mut ds = LogicalDataset::new(n, data)?.with_split(split);
        if labelled == Some(true) {
            ds = ds.with_labels(labels)?;
        }
        if let Some((r, c)) = shape {
            ds = ds.with_shape(r, c)?;
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LogicalDataset> {
        LogicalDataset::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Per-row flags marking unknown (corrupted) variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    n: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Mask> {
        if n == 0 || !bits.len().is_multiple_of(n) {
            return Err(Error::input(format!("{} mask bits do not fill rows of length {n}", bits.len())));
        }
        Ok(Mask { n, bits })
    }

    pub fn empty(n: usize, rows: usize) -> Mask {
        Mask { n, bits: vec![false; n * rows] }
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.bits.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.n..(i + 1) * self.n]
    }

    pub fn masked_in_row(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    pub fn total_masked(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn check_matches(&self, ds: &LogicalDataset) -> Result<()> {
        if self.n != ds.n_vars() {
            return Err(Error::LengthMismatch { expected: ds.n_vars(), got: self.n });
        }
        if self.len() != ds.len() {
            return Err(Error::input(format!("mask has {} rows for {} pictures", self.len(), ds.len())));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.bits.len() * 2);
        for row in self.bits.chunks_exact(self.n) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Mask> {
        let mut n = None;
        let mut bits = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let before = bits.len();
            for tok in line.split_whitespace() {
                bits.push(match tok {
                    "0" => false,
                    "1" => true,
                    _ => return Err(Error::parse(i + 1, format!("`{tok}` is not 0 or 1"))),
                });
            }
            let width = bits.len() - before;
            match n {
                None => n = Some(width),
                Some(w) if w != width => {
                    return Err(Error::parse(i + 1, format!("expected {w} values, found {width}")))
                }
                _ => {}
            }
        }
        Mask::new(n.ok_or_else(|| Error::parse(1, "empty mask file"))?, bits)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Mask> {
        Mask::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// All `2^rows` row patterns followed by all `2^cols` column patterns, so
/// the uniform pictures appear twice each. The list is shuffled with `seed`
/// and split into equal halves (train first).
pub fn gen_bas(rows: usize, cols: usize, seed: u64) -> Result<(LogicalDataset, LogicalDataset)> {
    if rows == 0 || cols == 0 || rows > 20 || cols > 20 {
        return Err(Error::input(format!("bars and stripes needs 1..=20 rows and columns, got {rows}x{cols}")));
    }
    let n = rows * cols;
    let mut pictures: Vec<Vec<Spin>> = Vec::with_capacity((1 << rows) + (1 << cols));
    for bits in 0..1usize << rows {
        pictures.push((0..n).map(|p| if bits >> (p / cols) & 1 == 1 { 1 } else { -1 }).collect());
    }
    for bits in 0..1usize << cols {
        pictures.push((0..n).map(|p| if bits >> (p % cols) & 1 == 1 { 1 } else { -1 }).collect());
    }
    pictures.shuffle(&mut rng::from_seed(seed));
    let half = pictures.len() / 2;
    let make = |rows_: &[Vec<Spin>], split| -> Result<LogicalDataset> {
        Ok(LogicalDataset::from_rows(n, rows_)?.with_shape(rows, cols)?.with_split(split))
    };
    Ok((make(&pictures[..half], Split::Train)?, make(&pictures[half..], Split::Test)?))
}

/// True when the picture is constant along every row or along every column.
pub fn is_bas(picture: &[Spin], rows: usize, cols: usize) -> bool {
    let by_rows = (0..rows).all(|r| (0..cols).all(|c| picture[r * cols + c] == picture[r * cols]));
    let by_cols = (0..cols).all(|c| (0..rows).all(|r| picture[r * cols + c] == picture[c]));
    by_rows || by_cols
}

/// Sherrington-Kirkpatrick instance: Gaussian couplings of standard
/// deviation `zeta / sqrt(n)` on every pair, zero fields, `beta = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SKInstance {
    pub n: usize,
    pub zeta: f64,
    pub seed: u64,
    pub beta: f64,
    /// Pair couplings in `Graph::complete(n)` edge order.
    pub j: Vec<f64>,
}

pub fn gen_sk(n: usize, zeta: f64, seed: u64) -> Result<SKInstance> {
    if n < 2 {
        return Err(Error::input(format!("an SK instance needs at least 2 spins, got {n}")));
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(Error::input(format!("zeta must be finite and non-negative, got {zeta}")));
    }
    let normal = Normal::new(0.0, zeta / (n as f64).sqrt()).map_err(|e| Error::input(e.to_string()))?;
    let mut r = rng::from_seed(seed);
    let j = (0..n * (n - 1) / 2).map(|_| normal.sample(&mut r)).collect();
    Ok(SKInstance { n, zeta, seed, beta: 1.0, j })
}

impl SKInstance {
    /// The generating model on the complete graph, with unbounded ranges.
    pub fn to_model(&self) -> IsingModel {
        IsingModel::from_params(Graph::complete(self.n), vec![0.0; self.n], self.j.clone())
            .expect("instance sizes agree")
            .with_ranges(ParamRange::UNBOUNDED, ParamRange::UNBOUNDED)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("sk v1 n={} zeta={} seed={} beta={}\n", self.n, self.zeta, self.seed, self.beta);
        for (&(a, b), v) in Graph::complete(self.n).edges().iter().zip(&self.j) {
            out.push_str(&format!("J {a} {b} {v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<SKInstance> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l).trim()));
        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| Error::parse(1, "empty instance file"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.first() != Some(&"sk") {
            return Err(Error::parse(hline, "expected `sk v1` header"));
        }
        if toks.get(1) != Some(&"v1") {
            return Err(Error::Version(toks.get(1).unwrap_or(&"").to_string()));
        }
        let field = |key: &str| -> Result<&str> {
            toks[2..]
                .iter()
                .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::parse(hline, format!("header lacks {key}=")))
        };
        let bad = |key: &str| Error::parse(hline, format!("bad {key}"));
        let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
        let zeta: f64 = field("zeta")?.parse().map_err(|_| bad("zeta"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;
        let beta: f64 = field("beta")?.parse().map_err(|_| bad("beta"))?;
        let graph = Graph::complete(n);
        let mut j = vec![None; graph.num_edges()];
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            let parsed = match t.as_slice() {
                ["J", a, b, v] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()).zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((a, b), v) = parsed.ok_or_else(|| Error::parse(ln, format!("malformed line `{line}`")))?;
            let k = graph
                .edge_index(a, b)
                .ok_or_else(|| Error::parse(ln, format!("no pair ({a}, {b}) among {n} spins")))?;
            if j[k].replace(v).is_some() {
                return Err(Error::parse(ln, format!("duplicate coupling ({a}, {b})")));
            }
        }
        let j = j
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                v.ok_or_else(|| {
                    let (a, b) = graph.edges()[k];
                    Error::input(format!("coupling ({a}, {b}) missing"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(SKInstance { n, zeta, seed, beta, j })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SKInstance> {
        SKInstance::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `d` i.i.d. exact samples from the instance's Boltzmann distribution.
pub fn sk_sample(inst: &SKInstance, d: usize, seed: u64) -> Result<LogicalDataset> {
    let en = Enumeration::new(&inst.to_model(), inst.beta, &[], EXACT_CAP)?;
    let (data, _) = en.draw(d, seed);
    Ok(LogicalDataset::new(inst.n, data)?.with_split(Split::Train))
}

pub const OPTDIGITS_CLASSES: [u8; 4] = [1, 2, 3, 4];
pub const OPTDIGITS_SHAPE: (usize, usize) = (7, 6);
const OPTDIGITS_SIDE: usize = 8;
const OPTDIGITS_THRESHOLD: u8 = 8;

/// Parse UCI OptDigits rows (64 pixels of 0..=16 and a digit), keep the
/// digits 1-4, crop to 7x6 and binarise at 8 (inclusive).
///
/// With `one_hot`, four class variables follow the 42 pixels; label `k`
/// stands for digit `k + 1`.
pub fn parse_optdigits(text: &str, split: Split, one_hot: bool) -> Result<LogicalDataset> {
    let n = OPTDIGITS_SHAPE.0 * OPTDIGITS_SHAPE.1 + if one_hot { OPTDIGITS_CLASSES.len() } else { 0 };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != OPTDIGITS_SIDE * OPTDIGITS_SIDE + 1 {
            return Err(Error::parse(ln, format!("expected 65 fields, found {}", fields.len())));
        }
        let values = fields
            .iter()
            .map(|f| f.trim().parse::<u8>().map_err(|_| Error::parse(ln, format!("`{f}` is not an integer"))))
            .collect::<Result<Vec<u8>>>()?;
        if let Some(p) = values[..64].iter().find(|&&p| p > 16) {
            return Err(Error::parse(ln, format!("pixel value {p} exceeds 16")));
        }
        let digit = values[64];
        if digit > 9 {
            return Err(Error::parse(ln, format!("unknown class {digit}")));
        }
        let Some(class) = OPTDIGITS_CLASSES.iter().position(|&c| c == digit) else {
            continue;
        };
        for r in 0..OPTDIGITS_SHAPE.0 {
            for c in 1..=OPTDIGITS_SHAPE.1 {
                data.push(if values[r * OPTDIGITS_SIDE + c] >= OPTDIGITS_THRESHOLD { 1 } else { -1 });
            }
        }
        if one_hot {
            data.extend((0..OPTDIGITS_CLASSES.len()).map(|k| if k == class { 1 } else { -1 }));
        }
        labels.push(class);
    }
    LogicalDataset::new(n, data)?
        .with_labels(labels)?
        .with_shape(OPTDIGITS_SHAPE.0, OPTDIGITS_SHAPE.1)
        .map(|d| d.with_split(split))
}

pub fn load_optdigits(train: &Path, test: &Path, one_hot: bool) -> Result<(LogicalDataset, LogicalDataset)> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
    Ok((
        parse_optdigits(&read(train)?, Split::Train, one_hot)?,
        parse_optdigits(&read(test)?, Split::Test, one_hot)?,
    ))
}

/// Replace `floor(fraction * pixels)` uniformly chosen pixels of each
/// picture with random spins. Picture `i` uses stream `(seed, i)`.
pub fn corrupt_salt_pepper(ds: &LogicalDataset, fraction: f64, seed: u64) -> Result<(LogicalDataset, Mask)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::input(format!("noise fraction must lie in [0, 1], got {fraction}")));
    }
    let pixels = ds.pixels();
    let count = (fraction * pixels as f64).floor() as usize;
    let mut data = ds.data().to_vec();
    let mut bits = vec![false; ds.data().len()];
    for (i, (row, mrow)) in data.chunks_exact_mut(ds.n_vars()).zip(bits.chunks_exact_mut(ds.n_vars())).enumerate() {
        let mut r = rng::stream(seed, i as u64);
        for p in rand::seq::index::sample(&mut r, pixels, count) {
            row[p] = if r.random_bool(0.5) { 1 } else { -1 };
            mrow[p] = true;
        }
    }
    Ok((ds.replace_data(data), Mask::new(ds.n_vars(), bits)?))
}

/// Black out (`+1`) the same `block_rows x block_cols` rectangle, with top
/// left corner `anchor`, in every picture.
pub fn corrupt_block(
    ds: &LogicalDataset,
    block_rows: usize,
    block_cols: usize,
    anchor: (usize, usize),
) -> Result<(LogicalDataset, Mask)> {
    let (rows, cols) = ds.shape().ok_or_else(|| Error::input("block corruption needs an image shape"))?;
    if block_rows == 0 || block_cols == 0 || anchor.0 + block_rows > rows || anchor.1 + block_cols > cols {
        return Err(Error::input(format!(
            "{block_rows}x{block_cols} block at ({}, {}) does not fit a {rows}x{cols} image",
            anchor.0, anchor.1
        )));
    }
    let mut pattern = vec![false; ds.n_vars()];
    for r in anchor.0..anchor.0 + block_rows {
        for c in anchor.1..anchor.1 + block_cols {
            pattern[r * cols + c] = true;
        }
    }
    let mut data = ds.data().to_vec();
    for row in data.chunks_exact_mut(ds.n_vars()) {
        for (v, &m) in row.iter_mut().zip(&pattern) {
            if m {
                *v = 1;
            }
        }
    }
    let bits = pattern.repeat(ds.len());
    Ok((ds.replace_data(data), Mask::new(ds.n_vars(), bits)?))
}
