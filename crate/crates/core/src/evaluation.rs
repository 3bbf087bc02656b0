//! Evaluation protocols: the average log-likelihood proxy, reconstruction
//! and classification by clamped sampling, relative entropies, and image
//! grids.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datasets::{LogicalDataset, Mask, SKInstance};
use crate::embedding::{Embedding, Logical};
use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng;
use crate::samplers::Enumeration;
use crate::samplers::gibbs_state;
use crate::samplers::{sample, Clamp, SamplerConfig, EXACT_CAP, QUANTUM_CAP};
use crate::spin::Spin;

/// Average log-likelihood of `rows` under a fully known generating model:
/// `-β mean E(s) - ln Z(β)`. Caches `ln Z` for repeated use.
#[derive(Debug, Clone)]
pub struct LambdaAv {
    model: IsingModel,
    beta: f64,
    log_z: f64,
}

impl LambdaAv {
    pub fn new(model: IsingModel, beta: f64) -> Result<LambdaAv> {
        let log_z = Enumeration::new(&model, beta, &[], EXACT_CAP)?.log_z;
        Ok(LambdaAv { model, beta, log_z })
    }

    pub fn for_instance(inst: &SKInstance) -> Result<LambdaAv> {
        LambdaAv::new(inst.to_model(), inst.beta)
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn eval<'a>(&self, rows: impl IntoIterator<Item = &'a [Spin]>) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for row in rows {
            total += self.model.energy(row)?;
            count += 1;
        }
        if count == 0 {
            return Err(Error::input("cannot average over zero samples"));
        }
        Ok(-self.beta * total / count as f64 - self.log_z)
    }
}

pub fn lambda_av(inst: &SKInstance, samples: &LogicalDataset) -> Result<f64> {
    LambdaAv::for_instance(inst)?.eval(samples.rows())
}

/// Draw `n_samples` from `model` with `cfg`, decode through `e` (ties to
/// `-1`) and score them with `target`.
pub fn model_lambda_av(
    target: &LambdaAv,
    model: &IsingModel,
    e: &Embedding,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<f64> {
    let samples = sample(model, &SamplerConfig { n_samples, ..cfg.clone() })?;
    target.eval(decode_rows(e, samples.rows(), -1)?.rows())
}

/// Decode physical sample rows to logical rows, ties resolved to `fallback`.
pub fn decode_rows<'a>(
    e: &Embedding,
    rows: impl IntoIterator<Item = &'a [Spin]>,
    fallback: Spin,
) -> Result<LogicalDataset> {
    let mut data = Vec::new();
    for row in rows {
        data.extend(e.decode(row)?.into_iter().map(|l| l.or(fallback)));
    }
    LogicalDataset::new(e.num_logical(), data)
}

/// Clamp every chain qubit of logical variable `i` to `values[i]` wherever
/// `known[i]` holds.
fn chain_clamp(e: &Embedding, values: &[Spin], known: impl Fn(usize) -> bool) -> Clamp {
    let mut clamp = Clamp::new();
    for (i, &v) in values.iter().enumerate() {
        if known(i) {
            for &q in e.chain(i) {
                clamp.insert(q, v);
            }
        }
    }
    clamp
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub values: Vec<Spin>,
    /// Unknown pixels whose vote ended level and took the `-1` fallback.
    pub ties: usize,
}

/// Fill the masked pixels of `picture` by a majority over `votes` clamped
/// samples. Samples whose chain is itself tied abstain for that pixel.
pub fn reconstruct(
    m: &IsingModel,
    e: &Embedding,
    picture: &[Spin],
    mask: &[bool],
    cfg: &SamplerConfig,
    votes: usize,
) -> Result<Reconstruction> {
    if picture.len() != e.num_logical() {
        return Err(Error::LengthMismatch { expected: e.num_logical(), got: picture.len() });
    }
    if mask.len() != picture.len() {
        return Err(Error::LengthMismatch { expected: picture.len(), got: mask.len() });
    }
    if !mask.iter().any(|&b| b) {
        return Ok(Reconstruction { values: picture.to_vec(), ties: 0 });
    }
    let cfg = SamplerConfig { clamp: chain_clamp(e, picture, |i| !mask[i]), n_samples: votes, ..cfg.clone() };
    let samples = sample(m, &cfg)?;
    let mut tally = vec![0i64; picture.len()];
    for row in samples.rows() {
        for (i, t) in tally.iter_mut().enumerate() {
            if mask[i] {
                if let Some(s) = e.decode_chain(row, i).spin() {
                    *t += i64::from(s);
                }
            }
        }
    }
    let mut ties = 0;
    let values = picture
        .iter()
        .zip(mask)
        .zip(&tally)
        .map(|((&v, &masked), &t)| {
            if !masked {
                v
            } else {
                if t == 0 {
                    ties += 1;
                }
                Logical::from_sum(t).or(-1)
            }
        })
        .collect();
    Ok(Reconstruction { values, ties })
}

/// Reconstruct every picture; picture `i` samples with seed `(cfg.seed, i)`.
pub fn reconstruct_all(
    m: &IsingModel,
    e: &Embedding,
    corrupted: &LogicalDataset,
    mask: &Mask,
    cfg: &SamplerConfig,
    votes: usize,
) -> Result<(LogicalDataset, usize)> {
    mask.check_matches(corrupted)?;
    let results = (0..corrupted.len())
        .into_par_iter()
        .map(|i| {
            let c = SamplerConfig { seed: rng::derive_seed(cfg.seed, i as u64), ..cfg.clone() };
            reconstruct(m, e, corrupted.row(i), mask.row(i), &c, votes)
        })
        .collect::<Result<Vec<_>>>()?;
    let ties = results.iter().map(|r| r.ties).sum();
    let data = results.into_iter().flat_map(|r| r.values).collect();
    Ok((corrupted_like(corrupted, data)?, ties))
}

fn corrupted_like(template: &LogicalDataset, data: Vec<Spin>) -> Result<LogicalDataset> {
    let mut ds = LogicalDataset::new(template.n_vars(), data)?.with_split(template.split());
    if let Some(l) = template.labels() {
        ds = ds.with_labels(l.to_vec())?;
    }
    if let Some((r, c)) = template.shape() {
        ds = ds.with_shape(r, c)?;
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MistakeStats {
    pub mistakes: usize,
    pub masked: usize,
    pub pictures: usize,
}

impl MistakeStats {
    pub fn per_picture(&self) -> f64 {
        if self.pictures == 0 {
            0.0
        } else {
            self.mistakes as f64 / self.pictures as f64
        }
    }

    /// Mistakes over masked pixels; zero when nothing was masked.
    pub fn rate(&self) -> f64 {
        if self.masked == 0 {
            0.0
        } else {
            self.mistakes as f64 / self.masked as f64
        }
    }
}

/// Count reconstruction errors on masked pixels only.
pub fn mistake_rate(truth: &LogicalDataset, recon: &LogicalDataset, mask: &Mask) -> Result<MistakeStats> {
    if truth.n_vars() != recon.n_vars() || truth.len() != recon.len() {
        return Err(Error::input(format!(
            "truth is {}x{} but reconstruction is {}x{}",
            truth.len(),
            truth.n_vars(),
            recon.len(),
            recon.n_vars()
        )));
    }
    mask.check_matches(truth)?;
    let mut stats = MistakeStats { mistakes: 0, masked: 0, pictures: truth.len() };
    for i in 0..truth.len() {
        for ((t, r), &b) in truth.row(i).iter().zip(recon.row(i)).zip(mask.row(i)) {
            if b {
                stats.masked += 1;
                stats.mistakes += usize::from(t != r);
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Class(usize),
    /// No vote had exactly one active class variable.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// Valid votes per class.
    pub counts: Vec<usize>,
    pub discarded: usize,
}

/// Plurality over valid one-hot votes; level counts go to the lower index.
pub fn tally_votes(votes: &[Vec<Logical>]) -> Classification {
    let k = votes.first().map_or(0, |v| v.len());
    let mut counts = vec![0usize; k];
    let mut discarded = 0;
    for v in votes {
        let on: Vec<usize> = v.iter().enumerate().filter(|(_, &l)| l == Logical::Up).map(|(c, _)| c).collect();
        let valid = on.len() == 1 && v.iter().all(|&l| l != Logical::Tie);
        if valid {
            counts[on[0]] += 1;
        } else {
            discarded += 1;
        }
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    let verdict = if best == 0 {
        Verdict::Indeterminate
    } else {
        Verdict::Class(counts.iter().position(|&c| c == best).expect("maximum exists"))
    };
    Classification { verdict, counts, discarded }
}

/// Clamp every non-class variable to `picture` and vote on the class
/// variables `class_vars` (logical indices, in class order).
pub fn classify(
    m: &IsingModel,
    e: &Embedding,
    picture: &[Spin],
    class_vars: &[usize],
    cfg: &SamplerConfig,
    votes: usize,
) -> Result<Classification> {
    if picture.len() != e.num_logical() {
        return Err(Error::LengthMismatch { expected: e.num_logical(), got: picture.len() });
    }
    if class_vars.is_empty() {
        return Err(Error::input("no class variables given"));
    }
    if let Some(&c) = class_vars.iter().find(|&&c| c >= picture.len()) {
        return Err(Error::input(format!("class variable {c} out of range")));
    }
    let cfg = SamplerConfig {
        clamp: chain_clamp(e, picture, |i| !class_vars.contains(&i)),
        n_samples: votes,
        ..cfg.clone()
    };
    let samples = sample(m, &cfg)?;
    let decoded: Vec<Vec<Logical>> =
        samples.rows().map(|row| class_vars.iter().map(|&c| e.decode_chain(row, c)).collect()).collect();
    Ok(tally_votes(&decoded))
}

/// Classify every picture; picture `i` samples with seed `(cfg.seed, i)`.
pub fn classify_all(
    m: &IsingModel,
    e: &Embedding,
    pictures: &LogicalDataset,
    class_vars: &[usize],
    cfg: &SamplerConfig,
    votes: usize,
) -> Result<Vec<Classification>> {
    (0..pictures.len())
        .into_par_iter()
        .map(|i| {
            let c = SamplerConfig { seed: rng::derive_seed(cfg.seed, i as u64), ..cfg.clone() };
            classify(m, e, pictures.row(i), class_vars, &c, votes)
        })
        .collect()
}

/// Accuracy and confusion counts against `labels`. Indeterminate verdicts
/// count as wrong and land in the extra last column.
pub fn confusion(results: &[Classification], labels: &[usize], classes: usize) -> Result<(f64, Vec<Vec<usize>>)> {
    if results.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), got: results.len() });
    }
    let mut table = vec![vec![0usize; classes + 1]; classes];
    let mut right = 0;
    for (r, &l) in results.iter().zip(labels) {
        if l >= classes {
            return Err(Error::input(format!("label {l} out of range for {classes} classes")));
        }
        match r.verdict {
            Verdict::Class(c) => {
                table[l][c.min(classes)] += 1;
                right += usize::from(c == l);
            }
            Verdict::Indeterminate => table[l][classes] += 1,
        }
    }
    let acc = if labels.is_empty() { 0.0 } else { right as f64 / labels.len() as f64 };
    Ok((acc, table))
}

/// `Σ p ln p - Σ p ln q` between the empirical distribution of `data` and
/// the model: classical Boltzmann when `gamma` is `None`, the transverse
/// field Gibbs state otherwise.
pub fn relative_entropy(data: &LogicalDataset, m: &IsingModel, beta: f64, gamma: Option<f64>) -> Result<f64> {
    if data.n_vars() != m.len() {
        return Err(Error::LengthMismatch { expected: m.len(), got: data.n_vars() });
    }
    if data.is_empty() {
        return Err(Error::input("relative entropy of an empty data set"));
    }
    let mut freq = std::collections::BTreeMap::<u64, usize>::new();
    for row in data.rows() {
        let key = row.iter().enumerate().fold(0u64, |k, (i, &s)| if s > 0 { k | 1 << i } else { k });
        *freq.entry(key).or_default() += 1;
    }
    let total = data.len() as f64;
    let log_q: Box<dyn Fn(u64) -> f64> = match gamma {
        None => {
            if m.len() > EXACT_CAP {
                return Err(Error::SizeLimit { what: "classical relative entropy", n: m.len(), cap: EXACT_CAP });
            }
            let log_z = Enumeration::new(m, beta, &[], EXACT_CAP)?.log_z;
            Box::new(move |key| {
                let z: Vec<Spin> = (0..m.len()).map(|i| crate::spin::spin_of(key, i)).collect();
                -beta * m.energy_unchecked(&z) - log_z
            })
        }
        Some(g) => {
            let st = gibbs_state(m, beta, g, &[], QUANTUM_CAP)?;
            // With nothing clamped the free qubits are 0..n in order, so
            // the basis index equals the bit key.
            Box::new(move |key| st.log_rho_diag(key as usize))
        }
    };
    Ok(freq
        .iter()
        .map(|(&key, &c)| {
            let p = c as f64 / total;
            p * (p.ln() - log_q(key))
        })
        .sum())
}

/// Cell of a rendered picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    White,
    Black,
    /// Ties are white in the bitmap and mid-grey in a companion PGM.
    Gray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub pbm: String,
    pub pgm: Option<String>,
}

/// Lay pictures out row-major on a grid `ceil(sqrt(count))` wide with one
/// white pixel between cells. `+1` is black.
pub fn render_grid(pictures: &[Vec<Logical>], shape: (usize, usize), policy: TiePolicy) -> Result<Rendered> {
    let (r, c) = shape;
    if r == 0 || c == 0 {
        return Err(Error::input("image shape must be non-empty"));
    }
    if let Some(p) = pictures.iter().find(|p| p.len() < r * c) {
        return Err(Error::LengthMismatch { expected: r * c, got: p.len() });
    }
    let count = pictures.len().max(1);
    let gcols = (1..).find(|k| k * k >= count).expect("square bound");
    let grows = count.div_ceil(gcols);
    let width = gcols * c + gcols - 1;
    let height = grows * r + grows - 1;
    // 0 white, 1 black, 2 tie
    let mut canvas = vec![0u8; width * height];
    let mut any_tie = false;
    for (k, pic) in pictures.iter().enumerate() {
        let (y0, x0) = ((k / gcols) * (r + 1), (k % gcols) * (c + 1));
        for y in 0..r {
            for x in 0..c {
                canvas[(y0 + y) * width + x0 + x] = match pic[y * c + x] {
                    Logical::Up => 1,
                    Logical::Down => 0,
                    Logical::Tie => {
                        any_tie = true;
                        2
                    }
                };
            }
        }
    }
    let bit = |v: u8| match (v, policy) {
        (1, _) | (2, TiePolicy::Black) => '1',
        _ => '0',
    };
    let mut pbm = format!("P1\n{width} {height}\n");
    for row in canvas.chunks_exact(width) {
        let line: Vec<String> = row.iter().map(|&v| bit(v).to_string()).collect();
        let _ = writeln!(pbm, "{}", line.join(" "));
    }
    let pgm = (any_tie && policy == TiePolicy::Gray).then(|| {
        let mut s = format!("P2\n{width} {height}\n2\n");
        for row in canvas.chunks_exact(width) {
            let line: Vec<&str> = row
                .iter()
                .map(|&v| match v {
                    1 => "0",
                    2 => "1",
                    _ => "2",
                })
                .collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    });
    Ok(Rendered { pbm, pgm })
}

/// Write the grid for `ds` to `path`, plus `path` with a `.pgm` extension
/// when the policy asks for one and ties are present. Returns the files
/// written.
pub fn render_pbm(pictures: &[Vec<Logical>], shape: (usize, usize), path: &Path, policy: TiePolicy) -> Result<Vec<PathBuf>> {
    let r = render_grid(pictures, shape, policy)?;
    fs::write(path, &r.pbm).map_err(|e| Error::io(path, e))?;
    let mut written = vec![path.to_path_buf()];
    if let Some(pgm) = r.pgm {
        let p = path.with_extension("pgm");
        fs::write(&p, pgm).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

pub fn dataset_pictures(ds: &LogicalDataset) -> Vec<Vec<Logical>> {
    ds.rows().map(|r| r[..ds.pixels()].iter().map(|&s| Logical::from(s)).collect()).collect()
}

/// Parse a plain PBM into `(width, height, bits)`, `true` meaning black.
pub fn parse_pbm(text: &str) -> Result<(usize, usize, Vec<bool>)> {
    let mut toks = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
    if toks.next() != Some("P1") {
        return Err(Error::parse(1, "not a plain PBM (P1) file"));
    }
    let mut dim = || -> Result<usize> {
        toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(2, "bad PBM dimensions"))
    };
    let (w, h) = (dim()?, dim()?);
    let bits = toks
        .flat_map(|t| t.chars())
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::input(format!("`{ch}` is not a PBM bit"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    if bits.len() != w * h {
        return Err(Error::input(format!("PBM holds {} bits, expected {}", bits.len(), w * h)));
    }
    Ok((w, h, bits))
}

/// Recover `count` pictures of `shape` from a grid written by
/// [`render_grid`].
pub fn parse_grid(text: &str, shape: (usize, usize), count: usize) -> Result<Vec<Vec<Spin>>> {
    let (w, h, bits) = parse_pbm(text)?;
    let (r, c) = shape;
    let gcols = (1..).find(|k| k * k >= count.max(1)).expect("square bound");
    if w != gcols * c + gcols - 1 || h != count.max(1).div_ceil(gcols) * (r + 1) - 1 {
        return Err(Error::input(format!("{w}x{h} grid does not hold {count} pictures of {r}x{c}")));
    }
    Ok((0..count)
        .map(|k| {
            let (y0, x0) = ((k / gcols) * (r + 1), (k % gcols) * (c + 1));
            (0..r * c).map(|p| if bits[(y0 + p / c) * w + x0 + p % c] { 1 } else { -1 }).collect()
        })
        .collect())
}

/// Summary of an evaluation run. Absent entries are omitted from output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub lambda_av_samples: Option<f64>,
    pub lambda_av_train: Option<f64>,
    pub mistakes_per_picture: Option<f64>,
    pub mistake_rate: Option<f64>,
    pub vote_ties: Option<usize>,
    pub accuracy: Option<f64>,
    pub confusion: Option<Vec<Vec<usize>>>,
    pub moment_max_abs_diff: Option<f64>,
    pub relative_entropy: Option<f64>,
}

impl EvalReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("lambda_av_samples", self.lambda_av_samples.map(|v| format!("{v:.9}")));
        put("lambda_av_train", self.lambda_av_train.map(|v| format!("{v:.9}")));
        put("mistakes_per_picture", self.mistakes_per_picture.map(|v| format!("{v:.6}")));
        put("mistake_rate", self.mistake_rate.map(|v| format!("{v:.6}")));
        put("vote_ties", self.vote_ties.map(|v| v.to_string()));
        put("accuracy", self.accuracy.map(|v| format!("{v:.6}")));
        put(
            "confusion",
            self.confusion.as_ref().map(|t| {
                t.iter()
                    .map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join(";")
            }),
        );
        put("moment_max_abs_diff", self.moment_max_abs_diff.map(|v| format!("{v:.9e}")));
        put("relative_entropy", self.relative_entropy.map(|v| format!("{v:.9}")));
        out
    }

    /// Header line and one value line, tab separated.
    pub fn to_tsv(&self) -> String {
        let e = self.entries();
        let keys: Vec<&str> = e.iter().map(|(k, _)| *k).collect();
        let vals: Vec<&str> = e.iter().map(|(_, v)| v.as_str()).collect();
        format!("{}\n{}\n", keys.join("\t"), vals.join("\t"))
    }

    pub fn to_kv(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_sk;
    use crate::samplers::SamplerKind;
    use crate::topology::Graph;

    fn pair(jv: f64) -> IsingModel {
        IsingModel::from_params(Graph::complete(2), vec![0.0; 2], vec![jv]).unwrap()
    }

    #[test]
    fn lambda_uniform() {
        let inst = gen_sk(15, 0.0, 0).unwrap();
        let d = crate::datasets::sk_sample(&inst, 10, 1).unwrap();
        assert!((lambda_av(&inst, &d).unwrap() + 15.0 * 2f64.ln()).abs() < 1e-9);
        assert!((15.0 * 2f64.ln() - 10.397_207_708_4).abs() < 1e-9);
    }

    #[test]
    fn lambda_ferromagnet_ground_state() {
        let l = LambdaAv::new(pair(1.0), 1.0).unwrap();
        let v = l.eval([&[1i8, 1][..]]).unwrap();
        let e = std::f64::consts::E;
        assert!((v - (1.0 - (2.0 * e + 2.0 / e).ln())).abs() < 1e-12);
        assert!((v + 0.820_075_191_6).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_is_identity() {
        let m = pair(0.0);
        let e = Embedding::identity(2);
        let r = reconstruct(&m, &e, &[1, -1], &[false, false], &SamplerConfig::default(), 10).unwrap();
        assert_eq!(r.values, vec![1, -1]);
    }

    #[test]
    fn toy_conditional() {
        // P(s2 = +1 | s1 = +1) = e^{J} / (e^{J} + e^{-J}) at J = 3.
        let m = pair(3.0);
        let p = 3f64.exp() / (3f64.exp() + (-3f64).exp());
        assert!(p > 0.99);
        let cfg = SamplerConfig::new(SamplerKind::Exact);
        let clamp: Clamp = [(0, 1)].into_iter().collect();
        let s = sample(&m, &SamplerConfig { clamp, n_samples: 10_000, ..cfg.clone() }).unwrap();
        let up = s.rows().filter(|r| r[1] == 1).count() as f64 / 10_000.0;
        assert!((up - p).abs() < 3.0 * (p * (1.0 - p) / 1e4).sqrt() + 1e-9);
        let r = reconstruct(&m, &Embedding::identity(2), &[1, -1], &[false, true], &cfg, 100).unwrap();
        assert_eq!(r.values, vec![1, 1]);
    }

    #[test]
    fn untrained_model_guesses() {
        let m = IsingModel::zeros(Graph::complete(10));
        let e = Embedding::identity(10);
        let truth = LogicalDataset::new(10, vec![1; 10 * 200]).unwrap();
        let (corrupted, mask) = crate::datasets::corrupt_salt_pepper(&truth, 0.5, 3).unwrap();
        let cfg = SamplerConfig { seed: 4, ..SamplerConfig::new(SamplerKind::Exact) };
        let (recon, _) = reconstruct_all(&m, &e, &corrupted, &mask, &cfg, 101).unwrap();
        let stats = mistake_rate(&truth, &recon, &mask).unwrap();
        assert!((stats.rate() - 0.5).abs() < 0.1, "{}", stats.rate());
        for i in 0..truth.len() {
            for ((a, b), &k) in corrupted.row(i).iter().zip(recon.row(i)).zip(mask.row(i)) {
                if !k {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn mistakes_counted_on_mask_only() {
        let truth = LogicalDataset::new(3, vec![1, 1, 1]).unwrap();
        let mask = Mask::new(3, vec![true, true, false]).unwrap();
        let perfect = mistake_rate(&truth, &truth, &mask).unwrap();
        assert_eq!((perfect.mistakes, perfect.rate()), (0, 0.0));
        let flipped = LogicalDataset::new(3, vec![-1, -1, -1]).unwrap();
        let s = mistake_rate(&truth, &flipped, &mask).unwrap();
        assert_eq!((s.mistakes, s.rate()), (2, 1.0));
        assert!(mistake_rate(&truth, &LogicalDataset::new(1, vec![1]).unwrap(), &mask).is_err());
    }

    fn vote(c: usize) -> Vec<Logical> {
        (0..4).map(|k| if k == c { Logical::Up } else { Logical::Down }).collect()
    }

    #[test]
    fn plurality_votes() {
        let all: Vec<_> = (0..100).map(|_| vote(2)).collect();
        assert_eq!(tally_votes(&all).verdict, Verdict::Class(2));
        let mut mixed: Vec<_> = (0..40).map(|_| vote(1)).chain((0..60).map(|_| vote(2))).collect();
        assert_eq!(tally_votes(&mixed).verdict, Verdict::Class(2));
        mixed.reverse();
        assert_eq!(tally_votes(&mixed).verdict, Verdict::Class(2));
        let invalid = vec![vec![Logical::Up, Logical::Up, Logical::Down, Logical::Down], vec![Logical::Down; 4]];
        let t = tally_votes(&invalid);
        assert_eq!((t.verdict, t.discarded), (Verdict::Indeterminate, 2));
        let tied = vec![vec![Logical::Up, Logical::Tie, Logical::Down, Logical::Down]];
        assert_eq!(tally_votes(&tied).verdict, Verdict::Indeterminate);
    }

    #[test]
    fn identical_distributions_have_zero_entropy() {
        let m = IsingModel::from_params(Graph::complete(3), vec![0.3, -0.2, 0.1], vec![0.5, -0.4, 0.2]).unwrap();
        let en = Enumeration::new(&m, 1.0, &[], EXACT_CAP).unwrap();
        // Weighted data set realising the model distribution exactly at a
        // resolution of 1e6 rows per unit probability is too large; use the
        // rational approximation error bound instead.
        let scale = 1_000_000.0;
        let mut data = Vec::new();
        let mut counts = Vec::new();
        for s in 0..en.num_states() {
            let c = (en.probabilities()[s] * scale).round() as usize;
            counts.push(c);
            for _ in 0..c {
                data.extend(en.state(s));
            }
        }
        let ds = LogicalDataset::new(3, data).unwrap();
        let kl = relative_entropy(&ds, &m, 1.0, None).unwrap();
        let total: usize = counts.iter().sum();
        let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let oracle: f64 = p_hat
            .iter()
            .zip(en.probabilities())
            .map(|(p, q)| if *p > 0.0 { p * (p / q).ln() } else { 0.0 })
            .sum();
        assert!((kl - oracle).abs() < 1e-12);
        assert!(kl.abs() < 1e-10);
    }

    #[test]
    fn free_model_single_point() {
        for n in [1, 4, 8] {
            let m = IsingModel::zeros(Graph::complete(n));
            let ds = LogicalDataset::new(n, vec![1; n * 5]).unwrap();
            let want = n as f64 * 2f64.ln();
            assert!((relative_entropy(&ds, &m, 1.0, None).unwrap() - want).abs() < 1e-10);
            assert!((relative_entropy(&ds, &m, 1.0, Some(0.0)).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn quantum_path_at_zero_gamma_matches_classical() {
        let mut r = rng::from_seed(12);
        for _ in 0..5 {
            let g = Graph::complete(4);
            let h: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            let j: Vec<f64> = (0..6).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            let m = IsingModel::from_params(g, h, j).unwrap();
            let data: Vec<Spin> =
                (0..4 * 30).map(|_| if rand::Rng::random_bool(&mut r, 0.5) { 1 } else { -1 }).collect();
            let ds = LogicalDataset::new(4, data).unwrap();
            let a = relative_entropy(&ds, &m, 1.0, None).unwrap();
            let b = relative_entropy(&ds, &m, 1.0, Some(0.0)).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn quantum_entropy_size_limit() {
        let m = IsingModel::zeros(Graph::complete(13));
        let ds = LogicalDataset::new(13, vec![1; 13]).unwrap();
        assert!(matches!(relative_entropy(&ds, &m, 1.0, Some(1.0)), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn white_picture_renders_zeros() {
        let r = render_grid(&[vec![Logical::Down; 6]], (2, 3), TiePolicy::Gray).unwrap();
        assert_eq!(r.pbm, "P1\n3 2\n0 0 0\n0 0 0\n");
        assert!(r.pgm.is_none());
    }

    #[test]
    fn grid_layout_row_major() {
        let pics: Vec<Vec<Spin>> = (0..36).map(|k| (0..4).map(|p| if (k >> p) & 1 == 1 { 1 } else { -1 }).collect()).collect();
        let cells: Vec<Vec<Logical>> = pics.iter().map(|p| p.iter().map(|&s| Logical::from(s)).collect()).collect();
        let r = render_grid(&cells, (2, 2), TiePolicy::White).unwrap();
        let (w, h, bits) = parse_pbm(&r.pbm).unwrap();
        assert_eq!((w, h), (17, 17));
        // picture 7 sits in grid row 1, column 1
        let (y0, x0) = (3, 3);
        let got: Vec<bool> = (0..4).map(|p| bits[(y0 + p / 2) * w + x0 + p % 2]).collect();
        assert_eq!(got, vec![true, true, true, false]);
        assert_eq!(parse_grid(&r.pbm, (2, 2), 36).unwrap(), pics);
    }

    #[test]
    fn ties_go_to_pgm() {
        let r = render_grid(&[vec![Logical::Tie, Logical::Up]], (1, 2), TiePolicy::Gray).unwrap();
        assert_eq!(r.pbm, "P1\n2 1\n0 1\n");
        assert_eq!(r.pgm.as_deref(), Some("P2\n2 1\n2\n1 0\n"));
        let b = render_grid(&[vec![Logical::Tie, Logical::Up]], (1, 2), TiePolicy::Black).unwrap();
        assert_eq!(b.pbm, "P1\n2 1\n1 1\n");
        assert!(b.pgm.is_none());
    }

    #[test]
    fn report_formats() {
        let r = EvalReport { mistake_rate: Some(0.25), vote_ties: Some(3), ..Default::default() };
        assert_eq!(r.to_kv(), "mistake_rate = 0.250000\nvote_ties = 3\n");
        assert_eq!(r.to_tsv(), "mistake_rate\tvote_ties\n0.250000\t3\n");
    }
}
