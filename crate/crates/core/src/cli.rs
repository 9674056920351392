//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::autodiff::Primitive;
use crate::data::{generate_xor_fusion, load_dataset, split_dataset, write_dataset, Dataset, Manifest, WriteOptions, XorFusionParams};
use crate::error::{Error, Result};
use crate::model::TransModality;
use crate::training::{build_model, evaluate, run_ablation, train, EvalReport, TrainConfig};
use crate::verify::{gradient_report, toy_model_config, TOLERANCE};

/// Environment variable holding the log filter (`error`, `info`, `debug`...).
pub const LOG_ENV: &str = "TRANSMODALITY_LOG";

#[derive(Debug, Parser)]
#[command(name = "transmodality", version, about = "Cross-modal translation fusion for utterance-level sentiment analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable. Takes precedence over --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Modalities to fuse, e.g. `t,v,a` or `t,a`.
    #[arg(long)]
    pub modalities: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self, base: TrainConfig) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::load(path)?,
            None => base,
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(m) = &self.modalities {
            cfg.set("modalities", m)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    #[value(name = "xor_fusion")]
    XorFusion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes checkpoint, history CSV and test report.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on one split of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every layer and the full models.
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Train with and without backward translation over several seeds.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        /// Generator parameter: num_videos, utterances, d_t, d_a,
        /// separation, noise or split; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Gzip the per-video files.
        #[arg(long)]
        gzip: bool,
    },
    /// Summarize a dataset manifest or a checkpoint.
    Inspect {
        #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn to_json<T: serde::Serialize>(value: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::json(format!("serializing {what}"), e))
}

/// Loads a dataset, splitting the training videos by the config's ratios
/// when the manifest lists no validation or test videos.
fn load(manifest: &Path, cfg: &TrainConfig) -> Result<Dataset> {
    let mut ds = load_dataset(manifest)?;
    if ds.valid.is_empty() && ds.test.is_empty() {
        let parts = split_dataset(&ds.train, cfg.split, cfg.seed)?;
        log::info!("split {} videos into {}/{}/{}", ds.train.len(), parts.train.len(), parts.valid.len(), parts.test.len());
        ds.train = parts.train;
        ds.valid = parts.valid;
        ds.test = parts.test;
    }
    Ok(ds)
}

fn print_report(title: &str, r: &EvalReport) {
    println!("{title}: {} utterances, accuracy {:.4}, weighted accuracy {:.4}", r.num_utterances, r.accuracy, r.weighted_accuracy);
    println!("  class  support  precision  recall");
    for c in &r.per_class {
        println!("  {:>5}  {:>7}  {:>9.4}  {:>6.4}", c.class, c.support, c.precision, c.recall);
    }
}

fn cmd_train(config: &ConfigArgs, manifest: &Path, out: &Path) -> Result<()> {
    let cfg = config.resolve(TrainConfig::default())?;
    let ds = load(manifest, &cfg)?;
    create_dir(out)?;
    let model = build_model(&cfg, &ds.schema)?;
    let started = Instant::now();
    let outcome = train(model, &ds.train, &ds.valid, &cfg)?;
    write(&out.join("config.txt"), &cfg.to_text())?;
    write(&out.join("history.csv"), &outcome.history.to_csv())?;
    outcome.model.save(&out.join("checkpoint.json"))?;
    let (name, videos) = [("test", &ds.test), ("valid", &ds.valid), ("train", &ds.train)]
        .into_iter()
        .find(|(_, v)| !v.is_empty())
        .expect("training split is non-empty");
    let report = evaluate(&outcome.model, videos)?;
    write(&out.join("report.json"), &to_json(&report, "report")?)?;
    println!(
        "trained {} epochs in {:.1}s (best epoch {})",
        outcome.history.records.len(),
        started.elapsed().as_secs_f64(),
        outcome.history.best_epoch
    );
    print_report(name, &report);
    Ok(())
}

fn cmd_eval(checkpoint: &Path, manifest: &Path, split: SplitName, out: Option<&Path>) -> Result<()> {
    let model = TransModality::load(checkpoint)?;
    let ds = load_dataset(manifest)?;
    let videos = match split {
        SplitName::Train => &ds.train,
        SplitName::Valid => &ds.valid,
        SplitName::Test => &ds.test,
    };
    let report = evaluate(&model, videos)?;
    if let Some(path) = out {
        write(path, &to_json(&report, "report")?)?;
    }
    print_report(&format!("{split:?}").to_lowercase(), &report);
    Ok(())
}

fn cmd_gradcheck(config: &ConfigArgs, fault: Option<&str>) -> Result<()> {
    let base = TrainConfig { model: toy_model_config(), ..TrainConfig::default() };
    let cfg = config.resolve(base)?;
    let fault = fault.map(str::parse::<Primitive>).transpose()?;
    let started = Instant::now();
    let report = gradient_report(&cfg.model, cfg.seed, fault)?;
    println!("{:<36} {:>8} {:>14}  status", "group", "params", "max rel error");
    for g in &report {
        let status = if g.passed() { "ok" } else { "FAIL" };
        println!("{:<36} {:>8} {:>14.3e}  {status}", g.group, g.parameters, g.max_relative_error);
    }
    println!("checked {} groups in {:.1}s (tolerance {TOLERANCE:e})", report.len(), started.elapsed().as_secs_f64());
    let failed: Vec<&str> = report.iter().filter(|g| !g.passed()).map(|g| g.group.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn cmd_ablate(config: &ConfigArgs, manifest: &Path, out: &Path) -> Result<()> {
    let cfg = config.resolve(TrainConfig::default())?;
    let ds = load(manifest, &cfg)?;
    create_dir(out)?;
    let seeds: Vec<u64> = (0..cfg.ablation_seeds as u64).map(|i| cfg.seed + i).collect();
    let report = run_ablation(&ds, &cfg, &seeds)?;
    write(&out.join("ablation.md"), &report.markdown())?;
    write(&out.join("ablation_runs.csv"), &report.runs_csv())?;
    write(&out.join("ablation_summary.csv"), &report.summary_csv())?;
    write(&out.join("ablation.json"), &to_json(&report, "ablation report")?)?;
    print!("{}", report.markdown());
    if report.summary.iter().all(|s| s.completed == 0) {
        return Err(Error::Training("every ablation run failed".into()));
    }
    if report.partial {
        log::warn!("some ablation runs failed; see ablation_runs.csv");
    }
    Ok(())
}

fn cmd_synth(kind: SynthKind, out: &Path, params: &[String], seed: Option<u64>, gzip: bool) -> Result<()> {
    let SynthKind::XorFusion = kind;
    let mut p = XorFusionParams::default();
    let mut split = [0.7, 0.1, 0.2];
    for pair in params {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("parameter `{pair}` is not of the form key=value")))?;
        let num = |v: &str| -> Result<f64> {
            v.trim().parse::<f64>().map_err(|_| Error::Config(format!("invalid value `{v}` for `{k}`")))
        };
        let count = |v: &str| -> Result<usize> {
            v.trim().parse::<usize>().map_err(|_| Error::Config(format!("invalid value `{v}` for `{k}`")))
        };
        match k.trim() {
            "num_videos" => p.num_videos = count(v)?,
            "utterances" => p.utterances = count(v)?,
            "d_t" => p.d_t = count(v)?,
            "d_a" => p.d_a = count(v)?,
            "separation" => p.separation = num(v)?,
            "noise" => p.noise = num(v)?,
            "seed" => p.seed = count(v)? as u64,
            "split" => {
                let parts: Vec<f64> = v.split(',').map(num).collect::<Result<_>>()?;
                split = parts.try_into().map_err(|_| Error::Config(format!("`split` needs three ratios, got `{v}`")))?;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown xor_fusion parameter `{other}`; valid: num_videos, utterances, d_t, d_a, separation, noise, seed, split"
                )))
            }
        }
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    if p.num_videos == 0 {
        return Err(Error::Config("num_videos must be positive".into()));
    }
    if !(p.noise >= 0.0 && p.separation.is_finite() && p.noise.is_finite()) {
        return Err(Error::Config("separation and noise must be finite, noise nonnegative".into()));
    }
    let videos = generate_xor_fusion(&p)?;
    let parts = split_dataset(&videos, split, p.seed)?;
    let opts = WriteOptions { name: Some("xor_fusion".into()), num_classes: Some(2), declare_counts: true, gzip };
    let manifest = write_dataset(out, &parts.train, &parts.valid, &parts.test, &opts)?;
    println!(
        "wrote {} videos ({} train / {} valid / {} test) to {}",
        videos.len(),
        parts.train.len(),
        parts.valid.len(),
        parts.test.len(),
        manifest.display()
    );
    Ok(())
}

fn cmd_inspect(manifest: Option<&Path>, checkpoint: Option<&Path>) -> Result<()> {
    if let Some(path) = manifest {
        let m = Manifest::read(path)?;
        let ds = load_dataset(path)?;
        println!("dataset {}", m.name.as_deref().unwrap_or("(unnamed)"));
        for (name, split) in [("train", &ds.train), ("valid", &ds.valid), ("test", &ds.test)] {
            let utts: usize = split.iter().map(|v| v.n()).sum();
            println!("  {name:<5} {:>6} videos {:>7} utterances", split.len(), utts);
        }
        let dims: Vec<String> = ds.schema.dims.iter().map(|(m, d)| format!("{m}={d}")).collect();
        println!("  modalities {}  classes {}", dims.join(" "), ds.schema.num_classes);
    }
    if let Some(path) = checkpoint {
        let model = TransModality::load(path)?;
        let mods: Vec<&str> = model.config.modalities.iter().map(|m| m.key()).collect();
        println!("checkpoint {}", path.display());
        println!(
            "  modalities {}  d_model {}  heads {}  layers {}  backward {}",
            mods.join(","),
            model.config.d_model,
            model.config.heads,
            model.config.layers,
            model.config.backward
        );
        println!(
            "  {} tensors, {} scalars, {} classes, classifier input {}",
            model.params.len(),
            model.params.num_scalars(),
            model.num_classes,
            model.classifier_input_width()
        );
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, manifest, out } => cmd_train(&config, &manifest, &out),
        Command::Eval { checkpoint, manifest, split, out } => cmd_eval(&checkpoint, &manifest, split, out.as_deref()),
        Command::Gradcheck { config, inject_fault } => cmd_gradcheck(&config, inject_fault.as_deref()),
        Command::Ablate { config, manifest, out } => cmd_ablate(&config, &manifest, &out),
        Command::Synth { kind, out, params, seed, gzip } => cmd_synth(kind, &out, &params, seed, gzip),
        Command::Inspect { manifest, checkpoint } => cmd_inspect(manifest.as_deref(), checkpoint.as_deref()),
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 ok, 1 bad input, 2 numeric failure, 3 failed verification.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
