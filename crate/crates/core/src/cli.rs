//! The `mmtsm` command line: dataset generation, training, weight
//! averaging, evaluation, ensembles and sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::data::{gen_synthetic, load_index, read_clip, ClipSplit, RawClip, SynthParams};
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, load_pretrained_backbone, save_checkpoint, TsmModel};
use crate::plot::{confusion_heatmap, line_plot, Series};
use crate::scoring::{
    evaluate, recompute_bn_stats, swa_average, sweep, CheckpointSet, EvalResult, Member, SweepAxis, SweepRow,
    SweepTable,
};
use crate::train::{stratified_split, train, TrainReport};

pub const RUNS_ENV: &str = "MMTSM_RUNS";
pub const CONFIG_FILE: &str = "config.toml";
pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Parser)]
#[command(name = "mmtsm", version, about = "Multimodal temporal-shift action recognition")]
pub struct Cli {
    /// Root under which run directories are created.
    #[arg(long, env = RUNS_ENV, default_value = "runs", global = true)]
    pub runs_root: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic moving-square dataset.
    GenData(GenDataArgs),
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Average the best checkpoints of a run.
    Swa(SwaArgs),
    /// Evaluate a checkpoint, a run, or an ensemble of runs.
    Eval(EvalArgs),
    /// Evaluate an ensemble of runs (same as `eval --ensemble`).
    EnsembleEval(EnsembleArgs),
    /// Re-evaluate (or retrain) across one configuration axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 30)]
    pub clips: usize,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..=8))]
    pub classes: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(8..))]
    pub frames: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(32..))]
    pub size: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Additional clips tagged with the test split.
    #[arg(long, default_value_t = 0)]
    pub test_clips: usize,
    /// Replace DEPTH with uniform noise.
    #[arg(long)]
    pub depth_noise: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Experiment TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path edit such as `train.epochs=2`; repeatable.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Run directory; defaults to `<runs-root>/<config hash>-<unix time>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SwaArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    /// Keep the averaged running statistics instead of recomputing them.
    #[arg(long)]
    pub no_bn_refresh: bool,
    /// Output file; defaults to `<run>/swa.bin`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    /// Held-out part of the training split.
    Val,
    /// Clips tagged `test` in the index.
    Test,
    /// The whole training split.
    Train,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Training run whose final (or averaged) weights are evaluated.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Further runs averaged in as ensemble members.
    #[arg(long, num_args = 1..)]
    pub ensemble: Vec<PathBuf>,
    /// One weight per member, in order; defaults to equal weights.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f32>,
    /// Add the horizontally flipped view.
    #[arg(long)]
    pub tta: bool,
    /// Temporal sampling passes per clip.
    #[arg(long)]
    pub passes: Option<usize>,
    /// Network input side at test time.
    #[arg(long)]
    pub size: Option<usize>,
    /// Average the best K checkpoints of every run member.
    #[arg(long)]
    pub swa_top: Option<usize>,
    #[arg(long, value_enum, default_value_t = SplitChoice::Val)]
    pub split: SplitChoice,
    /// Output directory; defaults to `<runs-root>/<config hash>-<unix time>-eval`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub eval: EnsembleRest,
}

#[derive(Debug, Args)]
pub struct EnsembleRest {
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f32>,
    #[arg(long)]
    pub tta: bool,
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub swa_top: Option<usize>,
    #[arg(long, value_enum, default_value_t = SplitChoice::Val)]
    pub split: SplitChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// alpha, segments, input_size or epochs.
    #[arg(long)]
    pub axis: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Train one model per value instead of re-evaluating one model.
    #[arg(long)]
    pub retrain: bool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParam(_) | Error::OutputExists { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a, &cli.runs_root).map(|_| ()),
        Command::Swa(a) => cmd_swa(a),
        Command::Eval(a) => cmd_eval(a, &cli.runs_root).map(|_| ()),
        Command::EnsembleEval(a) => {
            let (first, rest) = a.runs.split_first().expect("clap enforces one run");
            let e = &a.eval;
            let args = EvalArgs {
                cfg: ConfigArgs::default(),
                ckpt: None,
                run: Some(first.clone()),
                ensemble: rest.to_vec(),
                weights: e.weights.clone(),
                tta: e.tta,
                passes: e.passes,
                size: e.size,
                swa_top: e.swa_top,
                split: e.split,
                out: e.out.clone(),
                force: e.force,
            };
            cmd_eval(&args, &cli.runs_root).map(|_| ())
        }
        Command::Sweep(a) => cmd_sweep(a, &cli.runs_root).map(|_| ()),
    }
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// `<root>/<hash>-<unix time><suffix>`, with `-2`, `-3`, ... appended when
/// that name is already taken within the same second.
fn default_dir(root: &Path, hash: &str, suffix: &str) -> PathBuf {
    let stem = format!("{hash}-{}{suffix}", unix_time());
    let first = root.join(&stem);
    if !first.exists() {
        return first;
    }
    (2..)
        .map(|n| root.join(format!("{stem}-{n}")))
        .find(|p| !p.exists())
        .expect("unbounded search")
}

/// Creates an empty directory at `dir`, refusing to touch existing content
/// unless `force` is set.
fn fresh_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let empty = dir.is_dir() && fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if !empty {
            if !force {
                return Err(Error::OutputExists { path: dir.to_path_buf() });
            }
            if dir.is_dir() {
                fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            } else {
                fs::remove_file(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_config(args: &ConfigArgs, fallback: Option<&Path>) -> Result<ExperimentConfig> {
    let base = match (&args.config, fallback) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(p)) => ExperimentConfig::load(p)?,
        (None, None) => ExperimentConfig::default(),
    };
    base.with_overrides(&args.overrides)
}

/// Clips of one dataset split, decoded into memory, plus the class table.
pub fn load_clips(cfg: &ExperimentConfig, split: ClipSplit) -> Result<(Vec<String>, Vec<RawClip>)> {
    let index = load_index(&cfg.dataset.root, split)?;
    let policy = cfg.dataset.channel_policy()?;
    let clips = index.clips.iter().map(|c| read_clip(c, policy)).collect::<Result<Vec<_>>>()?;
    Ok((index.classes, clips))
}

/// Training split divided into (train, validation) per the config.
pub fn split_train_val(cfg: &ExperimentConfig, clips: Vec<RawClip>) -> (Vec<RawClip>, Vec<RawClip>) {
    let labels: Vec<usize> = clips.iter().map(|c| c.label).collect();
    let (tr, va) = stratified_split(&labels, cfg.train.val_fraction, cfg.seed);
    let mut slots: Vec<Option<RawClip>> = clips.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| idx.iter().map(|&i| slots[i].take().expect("indices are disjoint")).collect::<Vec<_>>();
    let train_part = take(&tr);
    let val_part = take(&va);
    (train_part, val_part)
}

fn print_class_table(classes: &[String]) {
    for (k, name) in classes.iter().enumerate() {
        println!("  {k:>2}  {name}");
    }
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let mut p = SynthParams::new(a.clips, a.classes as usize, a.frames as usize, a.size as usize, a.seed);
    p.test_clips = a.test_clips;
    p.depth_noise_only = a.depth_noise;
    p.validate()?;
    fresh_dir(&a.out, a.force)?;
    let root = gen_synthetic(&p, &a.out)?;
    println!("{}", root.display());
    print_class_table(&p.class_names());
    Ok(())
}

pub fn training_curves(report: &TrainReport) -> String {
    let pts = |f: &dyn Fn(&crate::train::EpochRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        report.epochs.iter().filter_map(|r| f(r).map(|v| (r.epoch as f64, v))).collect()
    };
    let mut series = vec![Series {
        name: "train top1",
        points: pts(&|r| Some(r.train_top1)),
    }];
    let val = pts(&|r| r.val_top1);
    if !val.is_empty() {
        series.push(Series { name: "val top1", points: val });
    }
    line_plot("Training accuracy", "epoch", "top-1", &series, Some((0.0, 1.0)))
}

/// Returns the run directory.
pub fn cmd_train(a: &TrainArgs, runs_root: &Path) -> Result<PathBuf> {
    let cfg = load_config(&a.cfg, None)?;
    let (classes, clips) = load_clips(&cfg, ClipSplit::Train)?;
    let (train_clips, val_clips) = split_train_val(&cfg, clips);
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| default_dir(runs_root, &cfg.hash(), ""));
    fresh_dir(&dir, a.force)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml())?;

    let mut model = TsmModel::new(cfg.model_config(classes.len())?, cfg.seed)?;
    if !cfg.model.pretrained.is_empty() {
        let r = load_pretrained_backbone(&mut model, Path::new(&cfg.model.pretrained))?;
        if !a.quiet {
            println!(
                "pretrained: {} copied, {} adapted {:?}, {} head tensors fresh, {} ignored",
                r.copied,
                r.adapted.len(),
                r.adapted,
                r.fresh_head,
                r.ignored.len()
            );
        }
    }
    if !a.quiet {
        println!(
            "training on {} clips ({} held out), {} classes -> {}",
            train_clips.len(),
            val_clips.len(),
            classes.len(),
            dir.display()
        );
    }
    let quiet = a.quiet;
    let outcome = train(&mut model, &train_clips, &val_clips, &cfg.augment, &cfg.train, cfg.seed, Some(&dir), |r| {
        if !quiet {
            let v = r.val_top1.map_or("-".to_string(), |v| format!("{v:.3}"));
            println!(
                "epoch {:>3}  lr {:.5}  loss {:.4}  train top1 {:.3}  val top1 {v}",
                r.epoch, r.lr, r.train_loss, r.train_top1
            );
        }
    })?;
    write_file(&dir.join("report.md"), outcome.report.summary_table())?;
    write_file(&dir.join("curves.svg"), training_curves(&outcome.report))?;
    println!("{}", dir.display());
    Ok(dir)
}

fn run_config(run: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&run.join(CONFIG_FILE))
}

/// Training clips of a run, as seen by its training loop.
fn run_training_clips(cfg: &ExperimentConfig) -> Result<Vec<RawClip>> {
    let (_, clips) = load_clips(cfg, ClipSplit::Train)?;
    Ok(split_train_val(cfg, clips).0)
}

/// SWA over the best `top` checkpoints of `run`, with statistics refreshed
/// on the run's training clips unless `refresh` is false.
pub fn swa_for_run(run: &Path, top: usize, refresh: bool) -> Result<(TsmModel, Vec<crate::scoring::CheckpointEntry>)> {
    let set = CheckpointSet::load(run)?;
    let (mut model, picked) = swa_average(&set, top)?;
    if refresh {
        let cfg = run_config(run)?;
        let clips = run_training_clips(&cfg)?;
        recompute_bn_stats(&mut model, &clips, &cfg.augment, cfg.train.batch_size, cfg.seed)?;
    }
    Ok((model, picked))
}

pub fn cmd_swa(a: &SwaArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| a.run.join("swa.bin"));
    if out.exists() && !a.force {
        return Err(Error::OutputExists { path: out });
    }
    let (model, picked) = swa_for_run(&a.run, a.top, !a.no_bn_refresh)?;
    let epoch = picked.iter().map(|e| e.epoch).max().unwrap_or(0);
    let score = picked.iter().map(|e| e.score).sum::<f64>() / picked.len() as f64;
    save_checkpoint(&model, &out, epoch, score)?;
    for e in &picked {
        println!("  epoch {:>3}  score {:.4}", e.epoch, e.score);
    }
    println!("{}", out.display());
    Ok(())
}

/// The model a run contributes: its last checkpoint, or an SWA average.
fn run_member(run: &Path, swa_top: usize) -> Result<TsmModel> {
    if swa_top > 0 {
        return swa_for_run(run, swa_top, true).map(|(m, _)| m);
    }
    let set = CheckpointSet::load(run)?;
    let last = set
        .entries
        .iter()
        .max_by_key(|e| e.epoch)
        .ok_or_else(|| Error::Config(format!("run {} has no checkpoints", run.display())))?;
    load_checkpoint(&set.resolve(last)).map(|(m, _)| m)
}

/// Finds `config.toml` next to a checkpoint or in one of its two parents.
fn config_near(path: &Path) -> Option<PathBuf> {
    path.ancestors().skip(1).take(3).map(|d| d.join(CONFIG_FILE)).find(|p| p.is_file())
}

#[derive(Debug, Serialize)]
struct ResultsFile<'a> {
    config: &'a ExperimentConfig,
    split: SplitChoice,
    members: Vec<MemberInfo>,
    clips: usize,
    top1: f64,
    top5: f64,
    per_class: &'a [Option<f64>],
    confusion: &'a [Vec<usize>],
}

#[derive(Debug, Serialize)]
struct MemberInfo {
    source: PathBuf,
    weight: f32,
    config_hash: String,
}

struct Resolved {
    cfg: ExperimentConfig,
    models: Vec<(PathBuf, TsmModel)>,
    weights: Vec<f32>,
    classes: Vec<String>,
    clips: Vec<RawClip>,
}

fn resolve_eval(a: &EvalArgs) -> Result<Resolved> {
    let fallback = a
        .ckpt
        .as_deref()
        .and_then(config_near)
        .or_else(|| a.run.iter().chain(&a.ensemble).map(|r| r.join(CONFIG_FILE)).find(|p| p.is_file()));
    let mut cfg = load_config(&a.cfg, fallback.as_deref())?;
    let mut extra = Vec::new();
    if a.tta {
        extra.push("eval.tta_flip=true".to_string());
    }
    if let Some(p) = a.passes {
        extra.push(format!("sampler.passes={p}"));
    }
    if let Some(s) = a.size {
        extra.push(format!("eval.input_size={s}"));
    }
    if let Some(k) = a.swa_top {
        extra.push(format!("eval.swa_top={k}"));
    }
    cfg = cfg.with_overrides(&extra)?;

    let mut models = Vec::new();
    if let Some(ckpt) = &a.ckpt {
        models.push((ckpt.clone(), load_checkpoint(ckpt)?.0));
    }
    for run in a.run.iter().chain(&a.ensemble) {
        models.push((run.clone(), run_member(run, cfg.eval.swa_top)?));
    }
    if models.is_empty() {
        return Err(Error::Config("nothing to evaluate: pass --ckpt, --run or --ensemble".into()));
    }
    let weights = if a.weights.is_empty() {
        vec![1.0; models.len()]
    } else if a.weights.len() == models.len() {
        a.weights.clone()
    } else {
        return Err(Error::Config(format!(
            "{} weights given for {} ensemble members",
            a.weights.len(),
            models.len()
        )));
    };

    let (classes, clips) = match a.split {
        SplitChoice::Test => load_clips(&cfg, ClipSplit::Test)?,
        SplitChoice::Train => load_clips(&cfg, ClipSplit::Train)?,
        SplitChoice::Val => {
            let (classes, clips) = load_clips(&cfg, ClipSplit::Train)?;
            (classes, split_train_val(&cfg, clips).1)
        }
    };
    if clips.is_empty() {
        return Err(Error::EmptyDataset(format!("the {:?} split has no clips", a.split)));
    }
    Ok(Resolved {
        cfg,
        models,
        weights,
        classes,
        clips,
    })
}

fn out_dir(requested: &Option<PathBuf>, runs_root: &Path, hash: &str, suffix: &str, force: bool) -> Result<PathBuf> {
    let dir = requested
        .clone()
        .unwrap_or_else(|| default_dir(runs_root, hash, &format!("-{suffix}")));
    fresh_dir(&dir, force)?;
    Ok(dir)
}

/// Returns the output directory and the metrics.
pub fn cmd_eval(a: &EvalArgs, runs_root: &Path) -> Result<(PathBuf, EvalResult)> {
    let r = resolve_eval(a)?;
    let members: Vec<Member<'_>> = r
        .models
        .iter()
        .zip(&r.weights)
        .map(|((_, m), &w)| Member { model: m, weight: w })
        .collect();
    let result = evaluate(&members, &r.clips, &r.cfg.eval_config())?;
    let dir = out_dir(&a.out, runs_root, &r.cfg.hash(), "eval", a.force)?;
    let file = ResultsFile {
        config: &r.cfg,
        split: a.split,
        members: r
            .models
            .iter()
            .zip(&r.weights)
            .map(|((p, m), &w)| MemberInfo {
                source: p.clone(),
                weight: w,
                config_hash: m.config().hash(),
            })
            .collect(),
        clips: result.clips,
        top1: result.top1,
        top5: result.top5,
        per_class: &result.per_class,
        confusion: &result.confusion,
    };
    write_file(&dir.join(RESULTS_FILE), serde_json::to_string_pretty(&file)? + "\n")?;
    write_file(
        &dir.join("confusion.svg"),
        confusion_heatmap("Confusion matrix", &r.classes, &result.confusion),
    )?;
    println!("top1 {:.4}  top5 {:.4}  ({} clips)", result.top1, result.top5, result.clips);
    println!("{}", dir.display());
    Ok((dir, result))
}

fn retrain_override(axis: SweepAxis, v: f64) -> Vec<String> {
    match axis {
        SweepAxis::Alpha => vec![format!("train.fusion.depth={v}")],
        SweepAxis::Segments => vec![format!("model.segments={}", v as usize)],
        SweepAxis::InputSize => {
            let s = v as usize;
            vec![format!("augment.input_size={s}"), format!("eval.input_size={s}")]
        }
        SweepAxis::Epochs => vec![format!("train.epochs={}", v as usize)],
    }
}

/// Returns the output directory and the table.
pub fn cmd_sweep(a: &SweepArgs, runs_root: &Path) -> Result<(PathBuf, SweepTable)> {
    if a.retrain {
        return sweep_retrain(a, runs_root);
    }
    let r = resolve_eval(&a.eval)?;
    let members: Vec<Member<'_>> = r
        .models
        .iter()
        .zip(&r.weights)
        .map(|((_, m), &w)| Member { model: m, weight: w })
        .collect();
    let run = a.eval.run.clone();
    let load_epoch = move |epoch: usize| -> Result<TsmModel> {
        let run = run.as_ref().ok_or_else(|| Error::Config("the epochs axis needs --run".into()))?;
        let set = CheckpointSet::load(run)?;
        let e = set
            .entries
            .iter()
            .find(|e| e.epoch == epoch)
            .ok_or_else(|| Error::Config(format!("run {} has no checkpoint for epoch {epoch}", run.display())))?;
        load_checkpoint(&set.resolve(e)).map(|(m, _)| m)
    };
    let table = sweep(a.axis, &a.values, &members, &r.clips, &r.cfg.eval_config(), Some(&load_epoch))?;
    let dir = out_dir(&a.eval.out, runs_root, &r.cfg.hash(), "sweep", a.eval.force)?;
    write_sweep(&dir, &table)?;
    Ok((dir, table))
}

/// One training run per value, each evaluated with the sweep's eval flags.
fn sweep_retrain(a: &SweepArgs, runs_root: &Path) -> Result<(PathBuf, SweepTable)> {
    let base = load_config(&a.eval.cfg, None)?;
    let dir = out_dir(&a.eval.out, runs_root, &base.hash(), "sweep", a.eval.force)?;
    let mut rows = Vec::new();
    for (i, &v) in a.values.iter().enumerate() {
        let start = std::time::Instant::now();
        let mut overrides = a.eval.cfg.overrides.clone();
        overrides.extend(retrain_override(a.axis, v));
        let cfg = ConfigArgs {
            config: a.eval.cfg.config.clone(),
            overrides,
        };
        let train_args = TrainArgs {
            cfg,
            out: Some(dir.join(format!("run_{i}"))),
            force: true,
            quiet: true,
        };
        let run = cmd_train(&train_args, runs_root)?;
        let eval = EvalArgs {
            cfg: ConfigArgs {
                config: Some(run.join(CONFIG_FILE)),
                overrides: Vec::new(),
            },
            ckpt: None,
            run: Some(run.clone()),
            ensemble: Vec::new(),
            out: Some(run.join("eval")),
            force: true,
            ..a.eval.clone()
        };
        let (_, res) = cmd_eval(&eval, runs_root)?;
        rows.push(SweepRow {
            value: v,
            top1: res.top1,
            top5: res.top5,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let table = SweepTable { axis: a.axis, rows };
    write_sweep(&dir, &table)?;
    Ok((dir, table))
}

fn write_sweep(dir: &Path, table: &SweepTable) -> Result<()> {
    write_file(&dir.join("sweep.md"), table.to_markdown())?;
    write_file(&dir.join("sweep.json"), serde_json::to_string_pretty(table)? + "\n")?;
    write_file(&dir.join("sweep.svg"), table.to_svg())?;
    print!("{}", table.to_markdown());
    println!("{}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run_cli(["mmtsm", "gen-data", "--classes", "1", "--out", "x"]), 1);
        assert_eq!(run_cli(["mmtsm", "no-such-command"]), 1);
        assert_eq!(run_cli(["mmtsm", "--help"]), 0);
    }

    #[test]
    fn fresh_dir_protects_existing_output() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("out");
        fresh_dir(&d, false).unwrap();
        fresh_dir(&d, false).unwrap();
        fs::write(d.join("f"), "x").unwrap();
        assert!(matches!(fresh_dir(&d, false), Err(Error::OutputExists { .. })));
        fresh_dir(&d, true).unwrap();
        assert!(!d.join("f").exists());
    }

    #[test]
    fn default_dirs_do_not_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let a = default_dir(tmp.path(), "h", "-eval");
        fs::create_dir_all(&a).unwrap();
        let b = default_dir(tmp.path(), "h", "-eval");
        assert_ne!(a, b);
        assert!(b.file_name().unwrap().to_str().unwrap().starts_with("h-"));
    }

    #[test]
    fn split_partitions_clips() {
        let p = SynthParams::new(12, 3, 8, 32, 1);
        let clips: Vec<_> = (0..12).map(|i| crate::data::synth_clip(&p, i % 3, i as u64)).collect();
        let mut cfg = ExperimentConfig::default();
        cfg.train.val_fraction = 0.25;
        let (tr, va) = split_train_val(&cfg, clips);
        assert_eq!((tr.len(), va.len()), (9, 3));
        let mut ids: Vec<_> = tr.iter().chain(&va).map(|c| c.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 12);
    }
}
