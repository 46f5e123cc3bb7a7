use super::*;
use crate::ctc::ctc_loss;

fn image(cfg: &NetConfig, seed: u64) -> ImageBuffer {
    let mut rng = Rng::new(seed);
    let n = cfg.input_height * cfg.input_width * cfg.input_channels;
    let data = (0..n).map(|_| rng.int_inclusive(0, 255) as u8).collect();
    ImageBuffer::new(cfg.input_height, cfg.input_width, cfg.input_channels, data).unwrap()
}

fn ctc_objective(net: &Network, img: &ImageBuffer, mask: Option<&[f64]>, label: &[usize]) -> (f64, Vec<f64>, SampleCache) {
    let (logits, cache) = net.forward_sample(normalize_image(img), img.height(), img.width(), mask);
    let lp = logits.log_probs().unwrap();
    let r = ctc_loss(&lp, label).unwrap();
    (r.loss, r.grad, cache)
}

/// Denominator floor for relative errors. Central differences on an O(1)
/// loss carry about 1e-12 of rounding noise at h = 1e-4, so gradients far
/// below 1e-6 cannot be resolved relatively.
const FD_FLOOR: f64 = 1e-6;

/// Central differences on every parameter; returns the worst relative error.
fn worst_fd_error(net: &mut Network, img: &ImageBuffer, mask: Option<&[f64]>, label: &[usize], h: f64) -> f64 {
    let (_, grad, cache) = ctc_objective(net, img, mask, label);
    let analytic = net.backward_sample(&cache, &grad);
    let mut worst: f64 = 0.0;
    for ti in 0..net.params.tensors.len() {
        for j in 0..net.params.tensors[ti].data.len() {
            let orig = net.params.tensors[ti].data[j];
            net.params.tensors[ti].data[j] = orig + h;
            let plus = ctc_objective(net, img, mask, label).0;
            net.params.tensors[ti].data[j] = orig - h;
            let minus = ctc_objective(net, img, mask, label).0;
            net.params.tensors[ti].data[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors[ti][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn width_stride_plan_sets_steps() {
    let mut cfg = NetConfig::tiny(5);
    cfg.input_height = 8;
    cfg.input_width = 320;
    cfg.stages = vec![ConvStage::new(2, 3, 2, 1), ConvStage::new(2, 3, 2, 2), ConvStage::new(2, 3, 2, 2)];
    let net = Network::build(cfg.clone()).unwrap();
    assert_eq!(cfg.output_steps(), 80);
    let logits = net.infer(&[image(&cfg, 0)]).unwrap();
    assert_eq!((logits[0].steps, logits[0].vocab), (80, 5));

    // Changing stage 1 from (2,1) to (2,2) halves the steps.
    let mut wider = cfg.clone();
    wider.stages[0] = ConvStage::new(2, 3, 2, 2);
    assert_eq!(wider.output_steps(), 40);
}

#[test]
fn bad_stride_plan_fails_at_build() {
    let mut cfg = NetConfig::tiny(3);
    cfg.input_height = 10;
    assert!(matches!(Network::build(cfg), Err(NetError::InvalidConfig(_))));
    let mut cfg = NetConfig::tiny(3);
    cfg.dropout_keep_prob = 0.0;
    assert!(Network::build(cfg).is_err());
    let mut cfg = NetConfig::tiny(3);
    cfg.stages[0].kernel = 2;
    assert!(Network::build(cfg).is_err());
}

#[test]
fn same_seed_same_parameters() {
    let a = Network::build(NetConfig::tiny(4)).unwrap();
    let b = Network::build(NetConfig::tiny(4)).unwrap();
    assert_eq!(a.params(), b.params());
    let mut cfg = NetConfig::tiny(4);
    cfg.seed = 2;
    let c = Network::build(cfg).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn parameters_are_f32_exact() {
    let net = Network::build(NetConfig::tiny(4)).unwrap();
    for t in &net.params().tensors {
        assert!(t.data.iter().all(|&v| v == v as f32 as f64), "{}", t.name);
    }
}

#[test]
fn forget_bias_starts_at_one() {
    let net = Network::build(NetConfig::tiny(4)).unwrap();
    let b = &net.params().get("neck.layer0.fwd.b").unwrap().data;
    let h = 3;
    assert!(b[h..2 * h].iter().all(|&v| v == 1.0));
    assert!(b[..h].iter().chain(&b[2 * h..]).all(|&v| v == 0.0));
}

#[test]
fn keep_one_makes_train_equal_eval() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg.clone()).unwrap();
    let batch = vec![image(&cfg, 1), image(&cfg, 2)];
    let train = net.forward(&batch, Mode::Train).unwrap();
    let eval = net.forward(&batch, Mode::Eval).unwrap();
    assert_eq!(train, eval);
}

#[test]
fn eval_is_deterministic() {
    let mut cfg = NetConfig::tiny(4);
    cfg.dropout_keep_prob = 0.5;
    let mut net = Network::build(cfg.clone()).unwrap();
    let batch = vec![image(&cfg, 3)];
    let a = net.forward(&batch, Mode::Eval).unwrap();
    let b = net.forward(&batch, Mode::Eval).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, net.infer(&batch).unwrap());
}

#[test]
fn dropout_zeroes_about_one_channel_in_ten() {
    let mut rng = Rng::new(17);
    let (draws, channels) = (10_000, 16);
    let mut zeros = 0;
    for _ in 0..draws {
        let m = spatial_dropout_mask(&mut rng, channels, 0.9);
        zeros += m.iter().filter(|&&v| v == 0.0).count();
        assert!(m.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.9).abs() < 1e-15));
    }
    let frac = zeros as f64 / (draws * channels) as f64;
    assert!((frac - 0.1).abs() <= 0.01, "{frac}");
}

#[test]
fn shape_mismatch_is_an_error() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg).unwrap();
    let wrong = ImageBuffer::filled(8, 32, 1, 0);
    assert!(matches!(net.forward(std::slice::from_ref(&wrong), Mode::Eval), Err(NetError::ShapeMismatch { .. })));
    // Still a compatible scale.
    assert_eq!(net.forward_multiscale(&[wrong], Mode::Eval).unwrap()[0].steps, 16);
    let rgb = ImageBuffer::filled(8, 16, 3, 0);
    assert!(net.forward_multiscale(&[rgb], Mode::Eval).is_err());
}

#[test]
fn backward_requires_train_forward() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg.clone()).unwrap();
    assert!(matches!(net.backward(&[]), Err(NetError::NoForwardCache)));
    net.forward(&[image(&cfg, 0)], Mode::Eval).unwrap();
    assert!(matches!(net.backward(&[vec![0.0; 32]]), Err(NetError::NoForwardCache)));
    net.forward(&[image(&cfg, 0)], Mode::Train).unwrap();
    assert!(matches!(net.backward(&[vec![0.0; 3]]), Err(NetError::BadUpstream(_))));
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg.clone()).unwrap();
    let logits = net.forward(&[image(&cfg, 0)], Mode::Train).unwrap();
    let g = net.backward(&[vec![0.0; logits[0].values.len()]]).unwrap();
    assert!(g.is_zero());
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg.clone()).unwrap();
    let img = image(&cfg, 5);
    let worst = worst_fd_error(&mut net, &img, None, &[1, 2, 2], 1e-4);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn gradients_match_with_dropout_mask() {
    let mut cfg = NetConfig::tiny(4);
    cfg.dropout_keep_prob = 0.5;
    let mut net = Network::build(cfg.clone()).unwrap();
    let img = image(&cfg, 6);
    let mask = vec![2.0, 0.0, 2.0, 2.0];
    let worst = worst_fd_error(&mut net, &img, Some(&mask), &[3, 1], 1e-4);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");

    // The dropped channel's filter receives no gradient.
    let (_, grad, cache) = ctc_objective(&net, &img, Some(&mask), &[3, 1]);
    let g = net.backward_sample(&cache, &grad);
    let last = net.layout.convs.last().unwrap();
    let per_filter = last.in_channels * last.kernel * last.kernel;
    assert!(g.tensors[last.weight][per_filter..2 * per_filter].iter().all(|&v| v == 0.0));
    assert_eq!(g.tensors[last.bias][1], 0.0);
    assert!(g.tensors[last.weight][..per_filter].iter().any(|&v| v != 0.0));
}

#[test]
fn batch_gradient_is_sum_of_samples() {
    let cfg = NetConfig::tiny(4);
    let mut net = Network::build(cfg.clone()).unwrap();
    let batch = vec![image(&cfg, 1), image(&cfg, 2)];
    let logits = net.forward(&batch, Mode::Train).unwrap();
    let ups: Vec<Vec<f64>> = logits
        .iter()
        .map(|l| ctc_loss(&l.log_probs().unwrap(), &[1, 2]).unwrap().grad)
        .collect();
    let total = net.backward(&ups).unwrap();
    let mut manual = net.params().zeros_like();
    for (img, up) in batch.iter().zip(&ups) {
        let (_, cache) = net.forward_sample(normalize_image(img), 8, 16, None);
        manual.add_assign(&net.backward_sample(&cache, up));
    }
    assert_eq!(total, manual);
}

#[test]
fn head_parameter_count() {
    let cfg = NetConfig::tiny(7);
    let net = Network::build(cfg.clone()).unwrap();
    let h = cfg.neck_hidden;
    let head: usize = net
        .params()
        .tensors
        .iter()
        .filter(|t| t.group == Group::Head)
        .map(Tensor::len)
        .sum();
    assert_eq!(head, 2 * h * 7 + 7);
    let (n, bytes) = net.param_count();
    assert_eq!(bytes, 4 * n);
}

#[test]
fn smaller_multiplier_has_fewer_parameters() {
    let mut cfg = NetConfig::desk(41);
    let full = Network::build(cfg.clone()).unwrap().param_count().0;
    cfg.width_multiplier /= 2.0;
    let half = Network::build(cfg).unwrap().param_count().0;
    assert!(half < full);
}

#[test]
fn desk_count_matches_shape_walk() {
    // Independent walk over the architecture description.
    let vocab = 41;
    let cfg = NetConfig::desk(vocab);
    let mut total = 0;
    let mut in_c = cfg.input_channels;
    for st in &cfg.stages {
        let out_c = ((st.out_channels as f64 * cfg.width_multiplier).round() as usize).max(1);
        total += out_c * in_c * st.kernel * st.kernel + out_c;
        in_c = out_c;
    }
    let h = cfg.neck_hidden;
    let mut dim = in_c;
    for _ in 0..cfg.neck_layers {
        total += 2 * (4 * h * dim + 4 * h * h + 4 * h);
        dim = 2 * h;
    }
    total += vocab * dim + vocab;
    let net = Network::build(cfg).unwrap();
    assert_eq!(net.param_count().0, total);
    // 8·9+8, 16·72+16, 24·144+24, 32·216+32; two BiLSTM layers; head.
    assert_eq!(total, 80 + 1168 + 3480 + 6944 + 2 * (4 * 48 * 32 + 4 * 48 * 48 + 192) + 2 * (4 * 48 * 96 + 4 * 48 * 48 + 192) + 96 * 41 + 41);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = NetConfig::tiny(5);
    cfg.dropout_keep_prob = 0.9;
    let net = Network::build(cfg.clone()).unwrap();
    let path = dir.path().join("net.ckpt");
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config(), net.config());
    assert_eq!(back.params(), net.params());
    let img = image(&cfg, 9);
    assert_eq!(back.infer(std::slice::from_ref(&img)).unwrap(), net.infer(&[img]).unwrap());
    assert_eq!(checkpoint::checkpoint_bytes(&back), std::fs::read(&path).unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::build(NetConfig::tiny(5)).unwrap();
    let bytes = checkpoint::checkpoint_bytes(&net);
    let path = dir.path().join("cut.ckpt");
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_checkpoint(&path).err().unwrap();
    assert!(err.to_string().starts_with("corrupt checkpoint"), "{err}");

    let mut flipped = bytes.clone();
    let mid = flipped.len() - 20;
    flipped[mid] ^= 1;
    assert!(matches!(checkpoint::network_from_bytes(&flipped), Err(NetError::CorruptCheckpoint(_))));

    let mut versioned = bytes;
    versioned[4] = 9;
    assert!(matches!(checkpoint::network_from_bytes(&versioned), Err(NetError::CheckpointVersion(9))));
}

#[test]
fn checkpoint_vocab_must_match_charset() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::build(NetConfig::tiny(5)).unwrap();
    let path = dir.path().join("net.ckpt");
    save_checkpoint(&net, &path).unwrap();
    let four = crate::charset::Charset::from_chars("abcd".chars());
    assert!(load_checkpoint_for(&path, &four).is_ok());
    let three = crate::charset::Charset::from_chars("abc".chars());
    assert!(matches!(load_checkpoint_for(&path, &three), Err(NetError::VocabMismatch { .. })));
}
