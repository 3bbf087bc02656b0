use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use qmaxent::datasets::{
    corrupt_block, corrupt_salt_pepper, gen_bas, gen_sk, parse_optdigits, sk_sample, LogicalDataset, Mask,
    SKInstance, Split,
};
use qmaxent::embedding::{clique_embed, load_embedding};
use qmaxent::evaluation::{
    classify_all, confusion, dataset_pictures, decode_rows, mistake_rate, model_lambda_av, reconstruct_all,
    relative_entropy, render_pbm, EvalReport, LambdaAv, TiePolicy, Verdict,
};
use qmaxent::model::{init_model, Velocity};
use qmaxent::rng::derive_seed;
use qmaxent::samplers::{model_moments, sample, ClampMode, Schedule, EXACT_CAP, QUANTUM_CAP};
use qmaxent::topology::Topology;
use qmaxent::training::{self, LogLine, StopReason, Trainer};
use qmaxent::{
    build_chimera, Checkpoint, ParamRange, ChimeraSpec, Embedding, HardwareGraph, SamplerConfig, SamplerKind, TrainConfig,
};

use crate::args::*;
use crate::run::{invalid, Run};

pub enum Status {
    Done,
    RangeExit { iteration: u64, detail: String },
}

/// What a command produced: its status and the file the manifest sits next to.
pub struct Finished {
    pub status: Status,
    pub primary: PathBuf,
}

fn done(primary: PathBuf) -> anyhow::Result<Finished> {
    Ok(Finished { status: Status::Done, primary })
}

const NOISE_STREAM: u64 = 0x4e4f_4953;
const EVAL_STREAM: u64 = 0x4556_414c;

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_list<const K: usize>(text: &str, what: &str) -> anyhow::Result<[usize; K]> {
    let parts: Vec<usize> = text
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("bad {what} `{text}`")))?;
    parts.try_into().map_err(|_| invalid(format!("{what} `{text}` needs {K} numbers")))
}

fn parse_shape(text: &str) -> anyhow::Result<(usize, usize)> {
    let [r, c] = parse_list::<2>(text, "shape")?;
    Ok((r, c))
}

fn load_hardware(run: &mut Run, hw: &HardwareArgs) -> anyhow::Result<Option<HardwareGraph>> {
    if let Some(path) = &hw.hardware {
        return Ok(Some(HardwareGraph::parse_dump(&run.read(path)?)?));
    }
    let Some(dims) = run.cfg.get_opt::<String>("chimera", hw.chimera.clone())? else {
        if hw.broken.is_some() {
            return Err(invalid("--broken needs --chimera"));
        }
        return Ok(None);
    };
    let [m, n, t] = parse_list::<3>(&dims, "chimera dimensions")?;
    let mut spec = ChimeraSpec::new(m, n, t);
    if let Some(path) = &hw.broken {
        let text = run.read(path)?;
        let ids = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .filter(|t| *t != "broken")
            .map(|t| t.parse::<u32>().map_err(|_| invalid(format!("bad qubit id `{t}` in {}", path.display()))))
            .collect::<anyhow::Result<Vec<u32>>>()?;
        spec = spec.with_broken(ids);
    }
    Ok(Some(build_chimera(spec)?))
}

fn resolve_sampler(run: &mut Run, a: &SamplerArgs, default: SamplerKind) -> anyhow::Result<SamplerConfig> {
    let d = SamplerConfig::new(default);
    let kind = run.cfg.get(
        "sampler",
        a.sampler.map(|s| match s {
            SamplerArg::Exact => SamplerKind::Exact,
            SamplerArg::Sa => SamplerKind::Sa,
            SamplerArg::Quantum => SamplerKind::Quantum,
        }),
        d.kind,
    )?;
    let schedule = run.cfg.get(
        "schedule",
        a.schedule.map(|s| match s {
            ScheduleArg::Linear => "linear".to_string(),
            ScheduleArg::Constant => "constant".to_string(),
        }),
        "linear".to_string(),
    )?;
    let schedule = match schedule.as_str() {
        "linear" => Schedule::Linear,
        "constant" => Schedule::Constant,
        other => return Err(invalid(format!("unknown schedule `{other}`"))),
    };
    let clamp_mode = run.cfg.get_opt(
        "clamp-mode",
        a.clamp_mode.map(|c| match c {
            ClampArg::Freeze => ClampMode::Freeze,
            ClampArg::StrongField => ClampMode::StrongField,
        }),
    )?;
    Ok(SamplerConfig {
        kind,
        beta: run.cfg.get("beta", a.beta, d.beta)?,
        gamma: run.cfg.get("gamma", a.gamma, d.gamma)?,
        t_max: run.cfg.get("t-max", a.t_max, d.t_max)?,
        schedule,
        clamp_mode,
        h_max: run.cfg.get("h-max", a.h_max, d.h_max)?,
        exact_cap: run.cfg.get("exact-cap", a.exact_cap, EXACT_CAP)?,
        quantum_cap: run.cfg.get("quantum-cap", a.quantum_cap, QUANTUM_CAP)?,
        ..d
    })
}

/// Embedding for a checkpoint: the given file, or the identity for
/// logical checkpoints. The digest must match.
fn embedding_for(run: &mut Run, ckpt: &Checkpoint, path: Option<&Path>) -> anyhow::Result<Embedding> {
    let e = match (path, ckpt.hardware.topology()) {
        (Some(p), _) => load_embedding(&ckpt.hardware, &run.read(p)?)?,
        (None, Topology::Complete(n)) => Embedding::identity(*n),
        (None, Topology::Chimera(_)) => return Err(invalid("embedded checkpoint needs --embedding")),
    };
    if e.digest() != ckpt.embedding_digest {
        return Err(invalid(format!(
            "embedding digest {} does not match the checkpoint's {}",
            e.digest(),
            ckpt.embedding_digest
        )));
    }
    Ok(e)
}

fn load_model(run: &mut Run, m: &ModelArgs) -> anyhow::Result<(Checkpoint, Embedding)> {
    let ckpt = Checkpoint::parse(&run.read(&m.checkpoint)?)
        .with_context(|| format!("loading {}", m.checkpoint.display()))?;
    let e = embedding_for(run, &ckpt, m.embedding.as_deref())?;
    Ok((ckpt, e))
}

fn load_dataset(run: &mut Run, path: &Path) -> anyhow::Result<LogicalDataset> {
    LogicalDataset::parse(&run.read(path)?).with_context(|| format!("loading {}", path.display()))
}

pub fn gen_data(run: &mut Run, g: &GenData) -> anyhow::Result<Finished> {
    match &g.kind {
        DataKind::Bas { rows, cols, seed, out_dir } => {
            let rows = run.cfg.get("rows", *rows, 7)?;
            let cols = run.cfg.get("cols", *cols, 6)?;
            let seed = run.cfg.get("seed", *seed, 0)?;
            let (train, test) = gen_bas(rows, cols, seed)?;
            info!("bars and stripes {rows}x{cols}: {} pictures, {}/{}", train.len() + test.len(), train.len(), test.len());
            run.write(&out_dir.join("bas_train.txt"), train.to_text())?;
            run.write(&out_dir.join("bas_test.txt"), test.to_text())?;
        }
        DataKind::Sk { n, zeta, samples, instances, seed, out_dir } => {
            let n = run.cfg.get("n", *n, 15)?;
            let zeta = run.cfg.get("zeta", *zeta, 2.0)?;
            let samples = run.cfg.get("samples", *samples, 150)?;
            let instances = run.cfg.get("instances", *instances, 10)?;
            let seed = run.cfg.get("seed", *seed, 0)?;
            for i in 0..instances {
                let inst = gen_sk(n, zeta, derive_seed(seed, 2 * i as u64))?;
                let data = sk_sample(&inst, samples, derive_seed(seed, 2 * i as u64 + 1))?;
                run.write(&out_dir.join(format!("sk_{i:02}.inst")), inst.to_text())?;
                run.write(&out_dir.join(format!("sk_{i:02}.txt")), data.to_text())?;
            }
            info!("{instances} SK instances with {samples} samples each");
        }
        DataKind::Optdigits { train, test, one_hot, out_dir } => {
            let one_hot = run.cfg.flag("one-hot", *one_hot)?;
            let tr = parse_optdigits(&run.read(train)?, Split::Train, one_hot)?;
            let te = parse_optdigits(&run.read(test)?, Split::Test, one_hot)?;
            for ds in [&tr, &te] {
                let labels = ds.labels().unwrap_or(&[]);
                let counts: Vec<usize> = (0..4).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
                info!("{} split: {} rows, {} variables, class counts {counts:?}", ds.split(), ds.len(), ds.n_vars());
            }
            run.write(&out_dir.join("optdigits_train.txt"), tr.to_text())?;
            run.write(&out_dir.join("optdigits_test.txt"), te.to_text())?;
        }
    }
    let dir = match &g.kind {
        DataKind::Bas { out_dir, .. } | DataKind::Sk { out_dir, .. } | DataKind::Optdigits { out_dir, .. } => out_dir,
    };
    done(dir.join("manifest.txt"))
}

pub fn embed(run: &mut Run, a: &EmbedArgs) -> anyhow::Result<Finished> {
    let hw = load_hardware(run, &a.hw)?.ok_or_else(|| invalid("embed needs --chimera or --hardware"))?;
    let e = match (a.n_logical, &a.load) {
        (Some(n), None) => clique_embed(&hw, n)?,
        (None, Some(p)) => load_embedding(&hw, &run.read(p)?)?,
        _ => return Err(invalid("give exactly one of --n-logical and --load")),
    };
    if !e.covers_all_pairs(&hw) {
        warn!("embedding does not couple every pair of chains");
    }
    let stats = e.stats(&hw)?;
    info!("{}", stats.row());
    if let Some(out) = &a.out {
        run.write(out, e.to_text())?;
    }
    let stats_path = a
        .stats
        .clone()
        .or_else(|| a.out.as_deref().map(|o| with_suffix(o, "stats")))
        .or_else(|| a.load.as_deref().map(|l| with_suffix(l, "stats")))
        .expect("one of --out and --load is present");
    run.write(&stats_path, format!("{}\n{}\n", stats_header(), stats.row()))?;
    done(with_suffix(a.out.as_deref().unwrap_or(&stats_path), "manifest"))
}

fn stats_header() -> &'static str {
    qmaxent::EmbeddingStats::header()
}

pub fn train(run: &mut Run, a: &TrainArgs) -> anyhow::Result<Finished> {
    let data = load_dataset(run, &a.data)?;
    let seed = run.cfg.get("seed", a.seed, 0)?;
    let (hw, e, resume) = if let Some(path) = &a.resume {
        let ckpt = Checkpoint::parse(&run.read(path)?)?;
        let e = embedding_for(run, &ckpt, a.embedding.as_deref())?;
        (ckpt.hardware.clone(), e, Some(ckpt))
    } else if let Some(path) = &a.embedding {
        let hw = load_hardware(run, &a.hw)?.ok_or_else(|| invalid("--embedding needs --chimera or --hardware"))?;
        let e = load_embedding(&hw, &run.read(path)?)?;
        (hw, e, None)
    } else if a.clique {
        let hw = load_hardware(run, &a.hw)?.ok_or_else(|| invalid("--clique needs --chimera or --hardware"))?;
        let e = clique_embed(&hw, data.n_vars())?;
        (hw, e, None)
    } else {
        if load_hardware(run, &a.hw)?.is_some() {
            return Err(invalid("hardware given without --embedding or --clique"));
        }
        (HardwareGraph::complete(data.n_vars()), Embedding::identity(data.n_vars()), None)
    };

    let mut sampler = resolve_sampler(run, &a.sampler, SamplerKind::Sa)?;
    sampler.n_samples = run.cfg.get("neg-samples", a.neg_samples, sampler.n_samples)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: run.cfg.get("lr", a.lr, d.learning_rate)?,
        momentum: run.cfg.get("momentum", a.momentum, d.momentum)?,
        l2: run.cfg.get("l2", a.l2, d.l2)?,
        minibatch: run.cfg.get("minibatch", a.minibatch, d.minibatch)?,
        max_iters: run.cfg.get("iters", a.iters, d.max_iters)?,
        stop_on_range_exit: !run.cfg.flag("no-range-stop", a.no_range_stop)?,
        record_wall_time: run.cfg.flag("wall-time", a.wall_time)?,
        sampler,
        seed,
    };
    let hook_kind = run.cfg.get(
        "eval",
        a.eval.map(|h| match h {
            EvalHook::None => "none".to_string(),
            EvalHook::LambdaAv => "lambda-av".to_string(),
        }),
        "none".to_string(),
    )?;
    let unbounded = run.cfg.flag("unbounded", a.unbounded)?;
    let eval_every = run.cfg.get("eval-every", a.eval_every, 1u64)?.max(1);
    let eval_samples = run.cfg.get("eval-samples", a.eval_samples, 150usize)?;
    let target = match hook_kind.as_str() {
        "none" => None,
        "lambda-av" => {
            let p = a.instance.as_deref().ok_or_else(|| invalid("--eval lambda-av needs --instance"))?;
            Some(LambdaAv::for_instance(&SKInstance::parse(&run.read(p)?)?)?)
        }
        other => return Err(invalid(format!("unknown eval hook `{other}`"))),
    };

    let trainer = match resume {
        Some(ckpt) => Trainer::resume(&data, &e, ckpt.model, ckpt.velocity, ckpt.iteration, cfg.clone())?,
        None if unbounded => {
            let model = init_model(&hw, &e, seed)?.with_ranges(ParamRange::UNBOUNDED, ParamRange::UNBOUNDED);
            let velocity = Velocity::zeros(&model);
            Trainer::resume(&data, &e, model, velocity, 0, cfg.clone())?
        }
        None => Trainer::new(&data, &e, &hw, cfg.clone())?,
    };
    info!(
        "training {} logical / {} physical variables on {} rows, {} sampler",
        e.num_logical(),
        e.num_physical(),
        data.len(),
        cfg.sampler.kind
    );
    let eval_cfg = cfg.sampler.clone();
    let outcome = training::run(trainer, |iter, model| {
        let Some(t) = &target else { return Ok(None) };
        if iter % eval_every != 0 {
            return Ok(None);
        }
        let c = SamplerConfig { seed: derive_seed(derive_seed(seed, EVAL_STREAM), iter), ..eval_cfg.clone() };
        model_lambda_av(t, model, &e, &c, eval_samples).map(Some)
    })?;

    let mut log = String::new();
    if let Some(t) = &target {
        log.push_str(&format!("# lambda_av_train\t{:.9}\n", t.eval(data.rows())?));
    }
    log.push_str(LogLine::HEADER);
    log.push('\n');
    for l in &outcome.log {
        log.push_str(&format!("{l}\n"));
    }
    let ckpt = Checkpoint {
        hardware: hw,
        embedding_digest: e.digest(),
        seed,
        iteration: outcome.iterations,
        model: outcome.model,
        velocity: outcome.velocity,
    };
    run.write(&a.checkpoint, ckpt.to_text())?;
    if a.clique {
        run.write(&with_suffix(&a.checkpoint, "emb"), e.to_text())?;
    }
    run.write(&a.log.clone().unwrap_or_else(|| with_suffix(&a.checkpoint, "log")), log)?;
    let status = match outcome.stop {
        StopReason::MaxIterations => {
            info!("finished {} iterations", outcome.iterations);
            Status::Done
        }
        StopReason::RangeExit { iteration, params } => {
            let names: Vec<String> = params
                .iter()
                .take(5)
                .map(|p| match *p {
                    training::Param::Field(i) => format!("h({})", ckpt.model.graph().labels()[i]),
                    training::Param::Coupling(k) => {
                        let (x, y) = ckpt.model.graph().edges()[k];
                        let l = ckpt.model.graph().labels();
                        let kind = if training::is_intra_chain(&e, ckpt.model.graph(), k) { "chain" } else { "inter" };
                        format!("J({},{}) [{kind}]", l[x], l[y])
                    }
                })
                .collect();
            Status::RangeExit { iteration, detail: format!("{} parameter(s) would leave the range: {}", params.len(), names.join(", ")) }
        }
    };
    Ok(Finished { status, primary: with_suffix(&a.checkpoint, "manifest") })
}

pub fn reconstruct(run: &mut Run, a: &ReconstructArgs) -> anyhow::Result<Finished> {
    let (ckpt, e) = load_model(run, &a.model)?;
    let data = load_dataset(run, &a.data)?;
    let seed = run.cfg.get("seed", a.seed, 0)?;
    let (truth, corrupted, mask) = if let Some(mp) = &a.mask {
        let mask = Mask::parse(&run.read(mp)?)?;
        let truth = match &a.truth {
            Some(t) => Some(load_dataset(run, t)?),
            None => None,
        };
        (truth, data, mask)
    } else {
        let noise = run.cfg.get(
            "noise",
            a.noise.map(|n| match n {
                NoiseArg::SaltPepper => "salt-pepper".to_string(),
                NoiseArg::Block => "block".to_string(),
            }),
            String::new(),
        )?;
        let (c, m) = match noise.as_str() {
            "salt-pepper" => {
                let f = run.cfg.get("fraction", a.fraction, 0.5)?;
                corrupt_salt_pepper(&data, f, derive_seed(seed, NOISE_STREAM))?
            }
            "block" => {
                let r = run.cfg.get("rows", a.rows, 5)?;
                let c = run.cfg.get("cols", a.cols, 4)?;
                let anchor = run.cfg.get("anchor", a.anchor.clone(), "0,0".to_string())?;
                let [ar, ac] = parse_list::<2>(&anchor, "anchor")?;
                corrupt_block(&data, r, c, (ar, ac))?
            }
            "" => return Err(invalid("give --noise or --mask")),
            other => return Err(invalid(format!("unknown noise `{other}`"))),
        };
        run.write(&with_suffix(&a.out, "mask"), m.to_text())?;
        run.write(&with_suffix(&a.out, "corrupted"), c.to_text())?;
        (Some(data), c, m)
    };
    let votes = run.cfg.get("votes", a.votes, 100usize)?;
    let mut cfg = resolve_sampler(run, &a.sampler, SamplerKind::Sa)?;
    cfg.seed = seed;
    let (recon, ties) = reconstruct_all(&ckpt.model, &e, &corrupted, &mask, &cfg, votes)?;
    if ties > 0 {
        info!("{ties} pixel vote(s) ended level and took -1");
    }
    run.write(&a.out, recon.to_text())?;
    let mut report = EvalReport { vote_ties: Some(ties), ..Default::default() };
    if let Some(t) = &truth {
        let s = mistake_rate(t, &recon, &mask)?;
        info!("{} mistakes over {} masked pixels ({:.2}%)", s.mistakes, s.masked, 100.0 * s.rate());
        report.mistakes_per_picture = Some(s.per_picture());
        report.mistake_rate = Some(s.rate());
    }
    run.write(&a.report.clone().unwrap_or_else(|| with_suffix(&a.out, "report")), report.to_kv())?;
    if let Some(p) = &a.render {
        render_to(run, &dataset_pictures(&recon), recon.shape(), p)?;
    }
    done(with_suffix(&a.out, "manifest"))
}

fn render_to(
    run: &mut Run,
    pictures: &[Vec<qmaxent::Logical>],
    shape: Option<(usize, usize)>,
    path: &Path,
) -> anyhow::Result<()> {
    let shape = shape.ok_or_else(|| invalid("rendering needs an image shape"))?;
    let policy = match run.cfg.get("tie-policy", None, "gray".to_string())?.as_str() {
        "white" => TiePolicy::White,
        "black" => TiePolicy::Black,
        "gray" => TiePolicy::Gray,
        other => return Err(invalid(format!("unknown tie policy `{other}`"))),
    };
    for p in render_pbm(pictures, shape, path, policy)? {
        run.note_output(&p);
    }
    Ok(())
}

pub fn classify(run: &mut Run, a: &ClassifyArgs) -> anyhow::Result<Finished> {
    let (ckpt, e) = load_model(run, &a.model)?;
    let data = load_dataset(run, &a.data)?;
    let classes = run.cfg.get("classes", a.classes, 4usize)?;
    if classes == 0 || classes >= data.n_vars() {
        return Err(invalid(format!("{classes} classes do not fit {} variables", data.n_vars())));
    }
    let class_vars: Vec<usize> = (data.n_vars() - classes..data.n_vars()).collect();
    let votes = run.cfg.get("votes", a.votes, 100usize)?;
    let mut cfg = resolve_sampler(run, &a.sampler, SamplerKind::Sa)?;
    cfg.seed = run.cfg.get("seed", a.seed, 0)?;
    let results = classify_all(&ckpt.model, &e, &data, &class_vars, &cfg, votes)?;
    let mut out = String::new();
    for r in &results {
        match r.verdict {
            Verdict::Class(c) => out.push_str(&format!("{c}\n")),
            Verdict::Indeterminate => out.push_str("indeterminate\n"),
        }
    }
    run.write(&a.out, out)?;
    let mut report = EvalReport::default();
    if let Some(labels) = data.labels() {
        let (acc, table) = confusion(&results, labels, classes)?;
        info!("accuracy {:.2}%", 100.0 * acc);
        report.accuracy = Some(acc);
        report.confusion = Some(table);
    }
    run.write(&a.report.clone().unwrap_or_else(|| with_suffix(&a.out, "report")), report.to_kv())?;
    done(with_suffix(&a.out, "manifest"))
}

pub fn sample_cmd(run: &mut Run, a: &SampleArgs) -> anyhow::Result<Finished> {
    let (ckpt, e) = load_model(run, &a.model)?;
    let mut cfg = resolve_sampler(run, &a.sampler, SamplerKind::Sa)?;
    cfg.n_samples = run.cfg.get("n", a.n, 100usize)?;
    cfg.seed = run.cfg.get("seed", a.seed, 0)?;
    let shape = match run.cfg.get_opt("shape", a.shape.clone())? {
        Some(s) => Some(parse_shape(&s)?),
        None => None,
    };
    if let Some(t) = a.tie_policy {
        run.cfg.record(
            "tie-policy",
            match t {
                TieArg::White => "white",
                TieArg::Black => "black",
                TieArg::Gray => "gray",
            },
        );
    }
    let samples = sample(&ckpt.model, &cfg)?;
    if let Some(p) = &a.physical_out {
        run.write(p, samples.to_text())?;
    }
    let mut logical = decode_rows(&e, samples.rows(), -1)?.with_split(Split::All);
    if let Some((r, c)) = shape {
        logical = logical.with_shape(r, c)?;
    }
    run.write(&a.out, logical.to_text())?;
    if let Some(p) = &a.render {
        let pictures = samples
            .rows()
            .map(|row| e.decode(row).map(|d| d[..r_c(shape, e.num_logical())].to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        render_to_with_policy(run, &pictures, shape, p, a.tie_policy)?;
    }
    done(with_suffix(&a.out, "manifest"))
}

fn r_c(shape: Option<(usize, usize)>, n: usize) -> usize {
    shape.map_or(n, |(r, c)| (r * c).min(n))
}

fn render_to_with_policy(
    run: &mut Run,
    pictures: &[Vec<qmaxent::Logical>],
    shape: Option<(usize, usize)>,
    path: &Path,
    flag: Option<TieArg>,
) -> anyhow::Result<()> {
    let shape = shape.ok_or_else(|| invalid("rendering needs --shape"))?;
    let policy = match flag {
        Some(TieArg::White) => TiePolicy::White,
        Some(TieArg::Black) => TiePolicy::Black,
        Some(TieArg::Gray) => TiePolicy::Gray,
        None => return render_to(run, pictures, Some(shape), path),
    };
    for p in render_pbm(pictures, shape, path, policy)? {
        run.note_output(&p);
    }
    Ok(())
}

pub fn eval(run: &mut Run, a: &EvalArgs) -> anyhow::Result<Finished> {
    let mut report = EvalReport::default();
    if let Some(ip) = &a.instance {
        let target = LambdaAv::for_instance(&SKInstance::parse(&run.read(ip)?)?)?;
        if let Some(s) = &a.samples {
            report.lambda_av_samples = Some(target.eval(load_dataset(run, s)?.rows())?);
        }
        if let Some(t) = &a.train {
            report.lambda_av_train = Some(target.eval(load_dataset(run, t)?.rows())?);
        }
        if a.samples.is_none() && a.train.is_none() {
            return Err(invalid("--instance needs --samples or --train"));
        }
    }
    if let Some(cp) = &a.checkpoint {
        let (ckpt, e) = load_model(run, &ModelArgs { checkpoint: cp.clone(), embedding: a.embedding.clone() })?;
        let dp = a.data.as_deref().ok_or_else(|| invalid("--checkpoint needs --data"))?;
        let data = load_dataset(run, dp)?;
        let mut physical = Vec::with_capacity(data.len() * e.num_physical());
        for row in data.rows() {
            physical.extend(e.encode(row)?);
        }
        let physical = LogicalDataset::new(e.num_physical(), physical)?;
        let beta = run.cfg.get("beta", a.beta, 1.0)?;
        let gamma = run.cfg.get_opt("gamma", a.gamma)?;
        report.relative_entropy = Some(relative_entropy(&physical, &ckpt.model, beta, gamma)?);
        let pos = training::positive_phase(physical.rows(), ckpt.model.graph())?;
        let kind = if gamma.is_some() { SamplerKind::Quantum } else { SamplerKind::Exact };
        let cfg = SamplerConfig {
            beta,
            gamma: gamma.unwrap_or(0.0),
            ..SamplerConfig::new(kind)
        };
        let (neg, _) = model_moments(&ckpt.model, &cfg)?;
        report.moment_max_abs_diff = Some(pos.max_abs_diff(&neg));
    }
    if a.instance.is_none() && a.checkpoint.is_none() {
        return Err(invalid("eval needs --instance or --checkpoint"));
    }
    run.write(&a.report, report.to_kv())?;
    if let Some(t) = &a.tsv {
        run.write(t, report.to_tsv())?;
    }
    done(with_suffix(&a.report, "manifest"))
}

pub fn render(run: &mut Run, a: &RenderArgs) -> anyhow::Result<Finished> {
    let data = load_dataset(run, &a.data)?;
    let shape = match run.cfg.get_opt("shape", a.shape.clone())? {
        Some(s) => Some(parse_shape(&s)?),
        None => data.shape(),
    };
    let n = r_c(shape, data.n_vars());
    let pictures: Vec<Vec<qmaxent::Logical>> =
        data.rows().map(|r| r[..n].iter().map(|&s| qmaxent::Logical::from(s)).collect()).collect();
    render_to(run, &pictures, shape, &a.out)?;
    done(with_suffix(&a.out, "manifest"))
}
