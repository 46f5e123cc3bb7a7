use super::*;
use crate::network::NetConfig;
use crate::synth::{glyph_corpus, GlyphCorpusConfig};

pub(crate) fn tiny_corpus(n: usize) -> (Vec<LoadedSample>, Charset) {
    let items = glyph_corpus(&GlyphCorpusConfig {
        samples: n,
        min_len: 1,
        max_len: 3,
        scales: (1, 1),
        space_prob: 0.0,
        seed: 5,
    });
    let charset = Charset::build_from_labels(items.iter().map(|(l, _)| l.as_str())).unwrap();
    let samples = items
        .into_iter()
        .enumerate()
        .map(|(i, (l, img))| LoadedSample::new(format!("{i}"), img, &l, &charset))
        .collect();
    (samples, charset)
}

fn small_net(vocab: usize, hidden: usize) -> Network {
    let mut cfg = NetConfig::tiny(vocab);
    cfg.input_height = 16;
    cfg.input_width = 32;
    cfg.stages = vec![
        crate::network::ConvStage::new(8, 3, 2, 1),
        crate::network::ConvStage::new(16, 3, 2, 2),
    ];
    cfg.neck_hidden = hidden;
    cfg.neck_layers = 1;
    Network::build(cfg).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        total_epochs: 4,
        restart_period_epochs: 4.0,
        batch_size: 4,
        augment: false,
        ..TrainConfig::default()
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = TrainConfig {
        multi_scale: Some(MultiScale::default()),
        ..TrainConfig::default()
    };
    let back: TrainConfig = cfg.to_toml().parse().unwrap();
    assert_eq!(back, cfg);
    assert!("bogus = 1".parse::<TrainConfig>().is_err());
}

#[test]
fn validation_rejects_bad_values() {
    let net = small_net(5, 4);
    let mut cfg = quick_config();
    cfg.initial_lr = 0.0;
    assert!(cfg.validate(&net).is_err());
    let mut cfg = quick_config();
    cfg.restart_period_epochs = 10.0;
    assert!(cfg.validate(&net).is_err());
    let mut cfg = quick_config();
    cfg.multi_scale = Some(MultiScale {
        scales: vec![(15, 32)],
        switch_every: 8,
    });
    assert!(cfg.validate(&net).is_err());
}

#[test]
fn same_seed_same_trajectory() {
    let (data, cs) = tiny_corpus(8);
    let run = || {
        let mut net = small_net(cs.vocab_size(), 6);
        let mut cfg = quick_config();
        cfg.augment = true;
        cfg.augmentation.target_height = 16;
        cfg.augmentation.target_width = 32;
        let o = train(&mut net, &data, &data[..2], &cs, &cfg, &TrainOutputs::default(), &mut |_| {}).unwrap();
        (o, net.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    assert_eq!(a.epochs.len(), 4);
    assert_eq!(a.iterations, 8);
}

#[test]
fn infeasible_samples_are_skipped() {
    let (mut data, cs) = tiny_corpus(4);
    // 16 output steps cannot hold a 40-character label.
    let long: String = std::iter::repeat_n(data[0].label.chars().next().unwrap(), 40).collect();
    data[0] = LoadedSample::new("long", data[0].image.clone(), &long, &cs);
    let mut net = small_net(cs.vocab_size(), 4);
    let o = train(&mut net, &data, &[], &cs, &quick_config(), &TrainOutputs::default(), &mut |_| {}).unwrap();
    assert!(o.epochs.iter().all(|e| e.skipped_infeasible == 1));
}

#[test]
fn vocab_mismatch_is_reported() {
    let (data, cs) = tiny_corpus(4);
    let mut net = small_net(cs.vocab_size() + 1, 4);
    let err = train(&mut net, &data, &[], &cs, &quick_config(), &TrainOutputs::default(), &mut |_| {}).unwrap_err();
    assert!(matches!(err, TrainError::VocabMismatch { .. }));
}

#[test]
fn writes_artifacts() {
    let (data, cs) = tiny_corpus(4);
    let dir = tempfile::tempdir().unwrap();
    let mut net = small_net(cs.vocab_size(), 4);
    train(&mut net, &data, &data[..1], &cs, &quick_config(), &TrainOutputs::in_dir(dir.path()), &mut |_| {}).unwrap();
    let log = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(log.lines().count(), 4);
    for name in [BEST_CHECKPOINT, LAST_CHECKPOINT, RESOLVED_CONFIG, NET_CONFIG] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let last = crate::network::load_checkpoint(&dir.path().join(LAST_CHECKPOINT)).unwrap();
    assert_eq!(last.params(), net.params());
}

#[test]
fn multiscale_rotates_every_window() {
    let net = small_net(5, 4);
    let cfg = TrainConfig {
        multi_scale: Some(MultiScale {
            scales: vec![(16, 32), (32, 64), (8, 16)],
            switch_every: 8,
        }),
        ..quick_config()
    };
    let picks: Vec<_> = (0..64).map(|i| scale_for(&cfg, &net, i)).collect();
    for w in picks.chunks(8) {
        assert!(w.iter().all(|s| *s == w[0]));
    }
    assert!(picks.iter().any(|s| *s != picks[0]));
}

#[test]
fn multiscale_training_runs() {
    let (data, cs) = tiny_corpus(8);
    let mut net = small_net(cs.vocab_size(), 4);
    let cfg = TrainConfig {
        multi_scale: Some(MultiScale {
            scales: vec![(16, 32), (32, 64), (8, 16)],
            switch_every: 1,
        }),
        augment: true,
        ..quick_config()
    };
    let o = train(&mut net, &data, &[], &cs, &cfg, &TrainOutputs::default(), &mut |_| {}).unwrap();
    assert!(o.step_losses.iter().all(|l| l.is_finite()));
}

#[test]
fn single_sample_loss_decreases() {
    let (data, cs) = tiny_corpus(1);
    let mut net = small_net(cs.vocab_size(), 8);
    let cfg = TrainConfig {
        total_epochs: 500,
        restart_period_epochs: 500.0,
        batch_size: 1,
        augment: false,
        train_eval_every: 0,
        ..TrainConfig::default()
    };
    let o = train(&mut net, &data, &[], &cs, &cfg, &TrainOutputs::default(), &mut |_| {}).unwrap();
    let windows: Vec<f64> = o.step_losses.chunks(10).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for pair in windows.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "{windows:?}");
    }
    assert!(*o.step_losses.last().unwrap() < 1e-2, "{:?}", o.step_losses.last());
}

#[test]
fn overfit_ladder_reports() {
    let (data, cs) = tiny_corpus(8);
    let vocab = cs.vocab_size();
    let plan = OverfitPlan {
        rungs: vec![
            Rung {
                name: "single".into(),
                size: RungSize::Count(1),
                threshold: 1.0,
                max_loss: std::f64::consts::LN_2,
                max_iterations: 300,
            },
            Rung {
                name: "pair".into(),
                size: RungSize::Count(2),
                threshold: 1.0,
                max_loss: std::f64::consts::LN_2,
                max_iterations: 300,
            },
        ],
    };
    let base = TrainConfig {
        initial_lr: 1e-2,
        ..quick_config()
    };
    let report = run_overfit_ladder(&|| Ok(small_net(vocab, 8)), &data, &cs, &plan, &base).unwrap();
    assert_eq!(report.rungs.len(), 2, "{report:?}");
    assert!(report.all_passed());

    let empty = run_overfit_ladder(&|| Ok(small_net(vocab, 8)), &data, &cs, &OverfitPlan::default(), &base).unwrap();
    assert!(empty.rungs.is_empty());

    let broken = TrainConfig {
        initial_lr: 10.0,
        restart_period_epochs: 50.0,
        ..base
    };
    // A diverging step size can still memorise one sample by saturating the
    // output, so the failure shows up on the first multi-sample rung.
    let report = run_overfit_ladder(&|| Ok(small_net(vocab, 8)), &data, &cs, &plan, &broken).unwrap();
    assert!(!report.all_passed());
    assert!(!report.rungs.last().unwrap().passed);
}

#[test]
fn plan_sizes_must_increase() {
    let plan = OverfitPlan {
        rungs: vec![
            Rung {
                name: "a".into(),
                size: RungSize::Count(4),
                threshold: 1.0,
                max_loss: std::f64::consts::LN_2,
                max_iterations: 1,
            },
            Rung {
                name: "b".into(),
                size: RungSize::Fraction(0.1),
                threshold: 1.0,
                max_loss: std::f64::consts::LN_2,
                max_iterations: 1,
            },
        ],
    };
    assert!(plan.resolve(20).is_err());
    assert_eq!(OverfitPlan::standard(8, 10).resolve(200).unwrap(), vec![1, 8, 20, 200]);
}
