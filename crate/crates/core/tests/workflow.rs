use qmaxent::datasets::{corrupt_salt_pepper, gen_bas, LogicalDataset, Split};
use qmaxent::embedding::{clique_embed, load_embedding};
use qmaxent::evaluation::reconstruct_all;
use qmaxent::model::{init_model, Velocity};
use qmaxent::samplers::{model_moments, sample};
use qmaxent::training::{positive_phase, train, Trainer};
use qmaxent::{build_chimera, Checkpoint, ChimeraSpec, Embedding, HardwareGraph, ParamRange, SamplerConfig, SamplerKind, TrainConfig};

fn small_sa(n_samples: usize) -> SamplerConfig {
    SamplerConfig { n_samples, t_max: 400, ..SamplerConfig::new(SamplerKind::Sa) }
}

#[test]
fn exact_training_matches_data_moments() {
    let rows = vec![vec![1, 1, -1], vec![1, -1, -1], vec![-1, -1, 1], vec![1, 1, 1], vec![-1, 1, -1]];
    let data = LogicalDataset::from_rows(3, &rows).unwrap();
    let hw = HardwareGraph::complete(3);
    let e = Embedding::identity(3);
    let model = init_model(&hw, &e, 1).unwrap().with_ranges(ParamRange::UNBOUNDED, ParamRange::UNBOUNDED);
    let cfg = TrainConfig {
        learning_rate: 0.2,
        momentum: 0.5,
        l2: 0.0,
        max_iters: 3000,
        sampler: SamplerConfig::new(SamplerKind::Exact),
        ..TrainConfig::default()
    };
    let velocity = Velocity::zeros(&model);
    let trainer = Trainer::resume(&data, &e, model, velocity, 0, cfg.clone()).unwrap();
    let out = qmaxent::training::run(trainer, |_, _| Ok(None)).unwrap();
    let target = positive_phase(data.rows(), out.model.graph()).unwrap();
    let (reached, _) = model_moments(&out.model, &cfg.sampler).unwrap();
    assert!(target.max_abs_diff(&reached) < 1e-6);
}

#[test]
fn embedded_workflow_round_trips_and_respects_known_pixels() {
    let hw = build_chimera(ChimeraSpec::new(3, 3, 4)).unwrap();
    let (train_set, test_set) = gen_bas(3, 3, 5).unwrap();
    let e = clique_embed(&hw, train_set.n_vars()).unwrap();
    let reloaded = load_embedding(&hw, &e.to_text()).unwrap();
    assert_eq!(reloaded.digest(), e.digest());

    let cfg = TrainConfig { max_iters: 20, sampler: small_sa(24), seed: 2, ..TrainConfig::default() };
    let out = train(&train_set, &e, &hw, &cfg, |_, _| Ok(None)).unwrap();
    assert!(out.iterations <= 20);

    let mut ckpt = Checkpoint::new(hw.clone(), &e, out.model.clone(), cfg.seed);
    ckpt.iteration = out.iterations;
    ckpt.velocity = out.velocity.clone();
    assert_eq!(Checkpoint::parse(&ckpt.to_text()).unwrap(), ckpt);

    let samples = sample(&out.model, &small_sa(8)).unwrap();
    assert_eq!(samples.n_vars(), e.num_physical());
    assert!(samples.rows().all(|r| e.decode(r).unwrap().len() == 9));

    let (corrupted, mask) = corrupt_salt_pepper(&test_set, 0.5, 3).unwrap();
    let (recon, _) = reconstruct_all(&out.model, &e, &corrupted, &mask, &small_sa(1), 5).unwrap();
    assert_eq!(recon.split(), Split::Test);
    for i in 0..recon.len() {
        for (p, (&got, &known)) in recon.row(i).iter().zip(corrupted.row(i)).enumerate() {
            if !mask.row(i)[p] {
                assert_eq!(got, known);
            }
        }
    }
}
