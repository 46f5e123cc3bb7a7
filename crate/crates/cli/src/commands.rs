use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tinyrec::augment::{apply_pipeline, AugmentConfig};
use tinyrec::charset::Charset;
use tinyrec::ctc::LogProbMatrix;
use tinyrec::dataset::{load_samples, read_annotations, LoadFailure, Sample};
use tinyrec::datastats::{corpus_report, export_label_audit_sample};
use tinyrec::evalmetrics::{
    decode_text, evaluate, evaluate_tta, predictions_tsv, DecodeMode, EvalReport, TtaStrategy, DEFAULT_TTA_SCALES,
};
use tinyrec::imaging::{load_image, save_image, ResizePolicy};
use tinyrec::network::{load_checkpoint_for, NetConfig, Network};
use tinyrec::rng::derive_seed;
use tinyrec::synth::{glyph_corpus, write_corpus, GlyphCorpusConfig};
use tinyrec::trainer::{self, run_overfit_ladder, MultiScale, OverfitPlan, TrainConfig, TrainOutputs};

use crate::manifest::write_manifest;

const DEFAULT_SEED: u64 = 42;

/// Scene-text recognition toolkit: corpus statistics, charset building,
/// augmentation previews, CTC training, evaluation and decoding.
#[derive(Debug, Parser)]
#[command(name = "tinyrec", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOptions,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Seed for every random draw (splits, shuffles, augmentation,
    /// initialization). Overrides seeds in config files; default 42.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus report: distinct characters, frequency buckets, text lengths
    /// and image geometry, as JSON, CSV and SVG.
    Stats(StatsArgs),
    /// Build the character set from an annotation file.
    Charset(CharsetArgs),
    /// Augmentation tools.
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Train a network.
    Train(TrainArgs),
    /// Evaluate a checkpoint with exact-match sequence accuracy.
    Eval(EvalArgs),
    /// Decode a serialized log-probability matrix.
    Decode(DecodeArgs),
    /// Run the over-fit ladder: single sample, one batch, 10%, everything.
    Overfit(OverfitArgs),
    /// Write a synthetic glyph-pattern corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Annotation file (`path<TAB>label` per line).
    #[arg(long)]
    pub data: PathBuf,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Train fraction for the seeded train/val split; 0 disables it.
    #[arg(long, default_value_t = 0.9)]
    pub split_ratio: f64,
    /// Skip reading images (no geometry section).
    #[arg(long)]
    pub no_images: bool,
    /// Also export this many random samples to `<out>/audit` for manual
    /// label inspection.
    #[arg(long)]
    pub audit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CharsetArgs {
    /// Annotation file; characters are ordered by first occurrence.
    #[arg(long)]
    pub data: PathBuf,
    /// Charset file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AugmentCommand {
    /// Write augmented variants of one image plus an SVG contact sheet.
    Preview(PreviewArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ImageFormat {
    Png,
    Pnm,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Augmentation config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of variants.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Output image format.
    #[arg(long, value_enum, default_value = "png")]
    pub format: ImageFormat,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training config (TOML). Flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network config (JSON); defaults to the desk-scale network.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Training annotations.
    #[arg(long)]
    pub data: PathBuf,
    /// Validation annotations.
    #[arg(long, conflicts_with = "split_ratio")]
    pub val: Option<PathBuf>,
    /// Split `--data` into train/val with this train fraction.
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// Character set file, one symbol per line after the blank.
    #[arg(long)]
    pub charset: PathBuf,
    /// Run directory for metrics, checkpoints and resolved configs.
    #[arg(long)]
    pub out: PathBuf,
    /// Total epochs; also caps the restart period.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hard cap on optimizer steps.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Head weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Disable the augmentation chain.
    #[arg(long)]
    pub no_augment: bool,
    /// Rotate input scales 32x320 / 48x480 / 64x640 every 8 iterations.
    #[arg(long)]
    pub multi_scale: bool,
    /// Stop once validation accuracy reaches this value.
    #[arg(long)]
    pub target_val_accuracy: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TtaArg {
    BestScore,
    AvgProb,
}

impl From<TtaArg> for TtaStrategy {
    fn from(t: TtaArg) -> Self {
        match t {
            TtaArg::BestScore => TtaStrategy::BestScore,
            TtaArg::AvgProb => TtaStrategy::AvgProb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyArg {
    PadRight,
    Stretch,
}

impl From<PolicyArg> for ResizePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::PadRight => ResizePolicy::PadRight,
            PolicyArg::Stretch => ResizePolicy::Stretch,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub charset: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for `eval.json` and the run manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Report greedy decoding (the default when no beam width is given).
    #[arg(long)]
    pub greedy: bool,
    /// Report prefix beam search with this width.
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Multi-scale test-time augmentation strategy.
    #[arg(long, value_enum)]
    pub tta: Option<TtaArg>,
    /// TTA scales as `HxW`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_scale)]
    pub tta_scales: Option<Vec<(usize, usize)>>,
    #[arg(long, value_enum, default_value = "pad-right")]
    pub resize_policy: PolicyArg,
    /// Write `path<TAB>truth<TAB>pred<TAB>correct` lines for the first
    /// report.
    #[arg(long)]
    pub dump_preds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Binary matrix: u32 LE steps, u32 LE vocab, then f64 LE log-probs.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub charset: PathBuf,
    /// Greedy best-path decoding (default).
    #[arg(long, conflicts_with = "beam_width")]
    pub greedy: bool,
    /// Prefix beam search with this width.
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Directory for the run manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OverfitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub charset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training config (TOML) used as the base for every rung.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network config (JSON); defaults to the desk-scale network.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Iteration budget per rung.
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub min_len: usize,
    #[arg(long, default_value_t = 10)]
    pub max_len: usize,
}

fn parse_scale(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s}"))?;
    Ok((
        h.trim().parse().map_err(|e| format!("{s}: {e}"))?,
        w.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    ))
}

pub enum Outcome {
    Success,
    /// Finished, but some inputs could not be used.
    Partial(String),
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Stats(a) => stats(g, a),
        Command::Charset(a) => charset(g, a),
        Command::Augment(AugmentCommand::Preview(a)) => preview(g, a),
        Command::Train(a) => train(g, a),
        Command::Eval(a) => eval(g, a),
        Command::Decode(a) => decode(g, a),
        Command::Overfit(a) => overfit(g, a),
        Command::Synth(a) => synth(g, a),
    }
}

fn seed(g: &GlobalOptions) -> u64 {
    g.seed.unwrap_or(DEFAULT_SEED)
}

fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    read_annotations(path).with_context(|| format!("reading annotations {}", path.display()))
}

fn read_charset(path: &Path) -> Result<Charset> {
    Charset::load(path).with_context(|| format!("reading charset {}", path.display()))
}

fn partial_if(failures: &[LoadFailure]) -> Outcome {
    if failures.is_empty() {
        Outcome::Success
    } else {
        let mut msg = format!("{} unreadable image(s):", failures.len());
        for f in failures.iter().take(10) {
            let _ = write!(msg, "\n  {}: {}", f.rel, f.error);
        }
        Outcome::Partial(msg)
    }
}

fn stats(g: &GlobalOptions, a: &StatsArgs) -> Result<Outcome> {
    let seed = seed(g);
    let samples = read_samples(&a.data)?;
    let ratio = (a.split_ratio > 0.0).then_some(a.split_ratio);
    let report = corpus_report(&samples, ratio, seed, !a.no_images)?;
    let files = report.write(&a.out)?;
    if let Some(n) = a.audit {
        export_label_audit_sample(&samples, n, seed, &a.out.join("audit"))?;
    }
    let all = &report.splits["all"];
    println!(
        "{} samples, {} distinct characters, max length {}",
        all.samples, all.distinct_chars, all.lengths.max
    );
    if g.verbose > 0 {
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    let config = json!({
        "data": a.data,
        "split_ratio": ratio,
        "images": !a.no_images,
        "audit": a.audit,
    });
    write_manifest(&a.out, "stats", seed, &config)?;
    let unreadable = report.splits["all"].unreadable();
    Ok(if unreadable > 0 {
        Outcome::Partial(format!("{unreadable} unreadable image(s) listed in report.json"))
    } else {
        Outcome::Success
    })
}

fn charset(g: &GlobalOptions, a: &CharsetArgs) -> Result<Outcome> {
    let samples = read_samples(&a.data)?;
    let cs = Charset::build(&samples)?;
    cs.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{} characters", cs.len());
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_manifest(dir, "charset", seed(g), &json!({ "data": a.data, "out": a.out }))?;
    Ok(Outcome::Success)
}

fn preview(g: &GlobalOptions, a: &PreviewArgs) -> Result<Outcome> {
    let seed = seed(g);
    let cfg = match &a.config {
        Some(p) => AugmentConfig::load(p)?,
        None => AugmentConfig::default(),
    };
    let img = load_image(&a.image)?;
    fs::create_dir_all(&a.out)?;
    let ext = match a.format {
        ImageFormat::Png => "png",
        ImageFormat::Pnm if img.channels() == 1 => "pgm",
        ImageFormat::Pnm => "ppm",
    };
    let mut names = Vec::new();
    for i in 0..a.count {
        let out = apply_pipeline(&img, &cfg, derive_seed(seed, &[i as u64]))?;
        let name = format!("variant_{i:03}.{ext}");
        save_image(&out.image, &a.out.join(&name))?;
        if g.verbose > 0 {
            let stages: Vec<_> = out.applied.iter().map(|s| s.name()).collect();
            eprintln!("{name}: {}", stages.join(" -> "));
        }
        names.push(name);
    }
    fs::write(a.out.join("contact.svg"), contact_sheet(&names, cfg.target_height, cfg.target_width))?;
    let config = json!({ "image": a.image, "count": a.count, "augment": cfg });
    write_manifest(&a.out, "augment preview", seed, &config)?;
    println!("wrote {} variants to {}", a.count, a.out.display());
    Ok(Outcome::Success)
}

fn contact_sheet(names: &[String], h: usize, w: usize) -> String {
    let cols = 2;
    let rows = names.len().div_ceil(cols);
    let (cw, ch) = (w + 10, h + 24);
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        cols * cw + 10,
        rows * ch + 10
    );
    s.push('\n');
    for (i, n) in names.iter().enumerate() {
        let (x, y) = (10 + (i % cols) * cw, 10 + (i / cols) * ch);
        let _ = writeln!(s, r#"<image href="{n}" x="{x}" y="{y}" width="{w}" height="{h}"/>"#);
        let _ = writeln!(s, r#"<text x="{x}" y="{}">{n}</text>"#, y + h + 14);
    }
    s.push_str("</svg>\n");
    s
}

fn load_net_config(path: Option<&Path>, charset: &Charset) -> Result<NetConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let cfg: NetConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            ensure!(
                cfg.vocab == charset.vocab_size(),
                "network vocab {} does not match charset ({} characters + blank)",
                cfg.vocab,
                charset.len()
            );
            Ok(cfg)
        }
        None => Ok(NetConfig::desk(charset.vocab_size())),
    }
}

fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => Ok(TrainConfig::load(p)?),
        None => Ok(TrainConfig::default()),
    }
}

fn report_failures(g: &GlobalOptions, what: &str, failures: &[LoadFailure]) {
    if g.verbose > 0 {
        for f in failures {
            eprintln!("{what}: cannot read {}: {}", f.rel, f.error);
        }
    }
}

fn train(g: &GlobalOptions, a: &TrainArgs) -> Result<Outcome> {
    let charset = read_charset(&a.charset)?;
    let mut net_cfg = load_net_config(a.net.as_deref(), &charset)?;
    let mut cfg = load_train_config(a.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
        net_cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.total_epochs = e;
        cfg.restart_period_epochs = cfg.restart_period_epochs.min(e as f64);
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.initial_lr = lr;
    }
    if let Some(m) = a.max_iterations {
        cfg.max_iterations = Some(m);
    }
    if let Some(wd) = a.weight_decay {
        cfg.weight_decay_head = wd;
    }
    if a.no_augment {
        cfg.augment = false;
    }
    if a.multi_scale {
        cfg.multi_scale = Some(MultiScale::default());
    }
    if let Some(t) = a.target_val_accuracy {
        cfg.stop_at_val_accuracy = Some(t);
    }
    cfg.augmentation.target_height = net_cfg.input_height;
    cfg.augmentation.target_width = net_cfg.input_width;

    let all = read_samples(&a.data)?;
    let (train_samples, val_samples) = match (&a.val, a.split_ratio) {
        (Some(v), _) => (all, read_samples(v)?),
        (None, Some(r)) => tinyrec::datastats::split_train_val(&all, r, cfg.seed)?,
        (None, None) => (all, Vec::new()),
    };
    let mut net = Network::build(net_cfg.clone())?;
    let channels = net_cfg.input_channels;
    let (train_set, train_fail) = load_samples(&train_samples, &charset, channels);
    let (val_set, val_fail) = load_samples(&val_samples, &charset, channels);
    report_failures(g, "train", &train_fail);
    report_failures(g, "val", &val_fail);

    let config = json!({
        "data": a.data,
        "val": a.val,
        "split_ratio": a.split_ratio,
        "charset": a.charset,
        "train": cfg,
        "net": net_cfg,
    });
    write_manifest(&a.out, "train", cfg.seed, &config)?;
    let verbose = g.verbose;
    let outcome = trainer::train(
        &mut net,
        &train_set,
        &val_set,
        &charset,
        &cfg,
        &TrainOutputs::in_dir(&a.out),
        &mut |m| {
            if verbose > 0 {
                eprintln!(
                    "epoch {:>4}  it {:>6}  lr {:.2e}  loss {:.4}  train {}  val {}",
                    m.epoch,
                    m.iterations,
                    m.lr,
                    m.train_loss,
                    fmt_acc(m.train_accuracy),
                    fmt_acc(m.val_accuracy)
                );
            }
        },
    )?;
    println!(
        "epochs {}, iterations {}, train accuracy {}, best val accuracy {}",
        outcome.epochs.len(),
        outcome.iterations,
        fmt_acc(outcome.last_train_accuracy()),
        fmt_acc(outcome.best_val_accuracy)
    );
    let failures: Vec<LoadFailure> = train_fail.into_iter().chain(val_fail).collect();
    Ok(partial_if(&failures))
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn eval(g: &GlobalOptions, a: &EvalArgs) -> Result<Outcome> {
    let charset = read_charset(&a.charset)?;
    let net = load_checkpoint_for(&a.checkpoint, &charset)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let samples = read_samples(&a.data)?;
    let (set, failures) = load_samples(&samples, &charset, net.config().input_channels);
    report_failures(g, "eval", &failures);
    let mut modes = Vec::new();
    if a.greedy || a.beam_width.is_none() {
        modes.push(DecodeMode::Greedy);
    }
    if let Some(w) = a.beam_width {
        ensure!(w >= 1, "beam width must be at least 1");
        modes.push(DecodeMode::Beam { width: w });
    }
    let policy: ResizePolicy = a.resize_policy.into();
    let reports: Vec<EvalReport> = match a.tta {
        None => evaluate(&net, &set, &failures, &charset, &modes, policy)?,
        Some(t) => {
            let scales = a.tta_scales.clone().unwrap_or_else(|| DEFAULT_TTA_SCALES.to_vec());
            modes
                .iter()
                .map(|&m| evaluate_tta(&net, &set, &failures, &charset, &scales, t.into(), m, policy))
                .collect::<Result<_, _>>()?
        }
    };
    for r in &reports {
        print!("{}", r.table());
    }
    fs::create_dir_all(&a.out)?;
    let json = serde_json::to_string_pretty(&reports)? + "\n";
    fs::write(a.out.join("eval.json"), json)?;
    if let Some(p) = &a.dump_preds {
        fs::write(p, predictions_tsv(&reports[0])).with_context(|| format!("writing {}", p.display()))?;
    }
    let config = json!({
        "checkpoint": a.checkpoint,
        "charset": a.charset,
        "data": a.data,
        "modes": modes,
        "tta": a.tta.map(TtaStrategy::from),
        "tta_scales": a.tta_scales,
        "resize_policy": policy,
    });
    write_manifest(&a.out, "eval", seed(g), &config)?;
    Ok(partial_if(&failures))
}

fn decode(g: &GlobalOptions, a: &DecodeArgs) -> Result<Outcome> {
    let charset = read_charset(&a.charset)?;
    let bytes = fs::read(&a.matrix).with_context(|| format!("reading {}", a.matrix.display()))?;
    let m = LogProbMatrix::from_bytes(&bytes).with_context(|| format!("parsing {}", a.matrix.display()))?;
    if m.vocab() != charset.vocab_size() {
        bail!(
            "matrix vocab {} does not match charset ({} characters + blank)",
            m.vocab(),
            charset.len()
        );
    }
    let mode = match a.beam_width {
        Some(w) => {
            ensure!(w >= 1, "beam width must be at least 1");
            DecodeMode::Beam { width: w }
        }
        None => DecodeMode::Greedy,
    };
    let text = decode_text(&m, mode, &charset)?;
    println!("{text}");
    let config = json!({ "matrix": a.matrix, "charset": a.charset, "mode": mode });
    write_manifest(&a.out, "decode", seed(g), &config)?;
    Ok(Outcome::Success)
}

fn overfit(g: &GlobalOptions, a: &OverfitArgs) -> Result<Outcome> {
    let charset = read_charset(&a.charset)?;
    let mut net_cfg = load_net_config(a.net.as_deref(), &charset)?;
    let mut cfg = load_train_config(a.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
        net_cfg.seed = s;
    }
    let samples = read_samples(&a.data)?;
    let (set, failures) = load_samples(&samples, &charset, net_cfg.input_channels);
    report_failures(g, "overfit", &failures);
    let plan = OverfitPlan::standard(cfg.batch_size, a.max_iterations);
    let report = run_overfit_ladder(&|| Network::build(net_cfg.clone()), &set, &charset, &plan, &cfg)?;
    for r in &report.rungs {
        println!(
            "{:<8} size {:>6}  iterations {:>6}  train accuracy {:.4}  final loss {:.4}  {}",
            r.name,
            r.size,
            r.iterations,
            r.train_accuracy,
            r.final_loss,
            if r.passed { "pass" } else { "FAIL" }
        );
        if let Some(e) = &r.error {
            println!("  error: {e}");
        }
        if !r.passed {
            for (truth, pred) in &r.sample_predictions {
                println!("  truth {truth:?}  pred {pred:?}");
            }
        }
    }
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("overfit.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let config = json!({ "data": a.data, "charset": a.charset, "train": cfg, "net": net_cfg, "plan": plan });
    write_manifest(&a.out, "overfit", cfg.seed, &config)?;
    Ok(partial_if(&failures))
}

fn synth(g: &GlobalOptions, a: &SynthArgs) -> Result<Outcome> {
    ensure!(a.min_len >= 1 && a.min_len <= a.max_len, "need 1 <= min-len <= max-len");
    let seed = seed(g);
    let cfg = GlyphCorpusConfig {
        samples: a.samples,
        min_len: a.min_len,
        max_len: a.max_len,
        seed,
        ..GlyphCorpusConfig::default()
    };
    let items = glyph_corpus(&cfg);
    let ann = write_corpus(&a.out, &items, "annotations.tsv")?;
    println!("wrote {} samples, annotations at {}", items.len(), ann.display());
    let config = json!({
        "samples": cfg.samples,
        "min_len": cfg.min_len,
        "max_len": cfg.max_len,
        "scales": cfg.scales,
        "space_prob": cfg.space_prob,
    });
    write_manifest(&a.out, "synth", seed, &config)?;
    Ok(Outcome::Success)
}
