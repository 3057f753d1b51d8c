use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alpd_core::baseline::{BaselineKind, FcnBaseline, LstmBaseline};
use alpd_core::experiment::{
    evaluate, fit, run_ablation, run_baseline, run_sweep, simulate_sessions, train_classifier, train_encoders,
    AblationArm, ComparisonRow, Dataset, ExperimentConfig, FitConfig, PairSelection, SweepAxis,
};
use alpd_core::online::{OnlinePredictor, Prediction};
use alpd_core::persist::{
    emit_comparison, emit_report, emit_scae_loss, emit_sweep, emit_train_loss, write_atomic, ArchiveMetadata,
    Checkpoint, CheckpointKind, DatasetArchive,
};
use alpd_core::sim::{simulate_session, ScenarioScript, StateTag};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alpd", version, about = "Through-the-wall presence detection from WiFi CSI amplitudes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that builds an experiment configuration.
/// Flags override values from the `--config` file.
#[derive(Args, Clone, Debug)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults to the desk-scale grid.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["1", "2", "both"])]
    pairs: Option<String>,
    #[arg(long)]
    no_static: bool,
    #[arg(long)]
    no_dynamic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Stage {
    Scae,
    Full,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Fcn,
    LstmOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training and test recordings and write them as dataset archives.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Record a single session from a scenario script instead.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train cluster encoders, the full network, or both.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Training archive (a directory written by `simulate`).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        stage: Stage,
        /// Encoder checkpoint for `--stage full`; defaults to `<out>/encoders.ckpt`.
        #[arg(long)]
        encoders: Option<PathBuf>,
        /// Train a comparison model instead of the full network.
        #[arg(long, value_enum, conflicts_with = "stage")]
        baseline: Option<Baseline>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset archive and write the report files.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Only score windows recorded under this condition.
        #[arg(long, value_parser = ["normal", "static", "interference"])]
        state: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain and evaluate over a list of values for one hyperparameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// lag, lambda, latent or data_amount.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every ablation arm and both baselines on one simulated dataset.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream the frames of an archive through a checkpoint, one JSON line per prediction.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            ExperimentConfig::from_toml(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.pairs {
        cfg.pairs = PairSelection::parse(p).ok_or_else(|| anyhow!("unknown pair selection {p}"))?;
    }
    if args.no_static {
        cfg.use_static = false;
    }
    if args.no_dynamic {
        cfg.use_dynamic = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Makes the configuration describe the archive's dimensions.
fn adopt_dims(cfg: &mut ExperimentConfig, meta: &ArchiveMetadata) -> Result<()> {
    cfg.scene.num_pairs = meta.num_pairs;
    cfg.scene.num_subcarriers = meta.num_subcarriers;
    cfg.scene.num_antenna_pairs = meta.num_antenna_pairs;
    cfg.scene.sample_rate = meta.sample_rate;
    cfg.class_count = meta.label_map.len();
    cfg.validate().context("configuration does not fit the dataset")?;
    Ok(())
}

fn simulate(args: &ConfigArgs, script: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = load_config(args)?;
    if let Some(path) = script {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read script {}", path.display()))?;
        let script = ScenarioScript::from_toml(&text)?;
        let scene = cfg.scene.clone().with_seed(cfg.scene.seed ^ cfg.seed);
        let session = simulate_session(&scene, &script)?;
        DatasetArchive::from_session(&session, cfg.class_count)?.write(out)?;
        eprintln!("wrote {} frames to {}", session.len(), out.display());
        return Ok(());
    }
    let (train, test) = simulate_sessions(&cfg)?;
    DatasetArchive::from_session(&train, cfg.class_count)?.write(&out.join("train"))?;
    DatasetArchive::from_session(&test, cfg.class_count)?.write(&out.join("test"))?;
    write_atomic(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    eprintln!("wrote {} training and {} test frames to {}", train.len(), test.len(), out.display());
    Ok(())
}

fn train(
    args: &ConfigArgs,
    data: &Path,
    stage: Stage,
    encoders: Option<&Path>,
    baseline: Option<Baseline>,
    out: &Path,
) -> Result<()> {
    let mut cfg = load_config(args)?;
    let archive = DatasetArchive::read(data).with_context(|| format!("dataset {}", data.display()))?;
    adopt_dims(&mut cfg, &archive.meta)?;
    let set = archive.window_set(cfg.lag)?;
    fs::create_dir_all(out)?;

    if let Some(kind) = baseline {
        let fit_cfg = FitConfig { epochs: cfg.epochs, batch_size: cfg.batch_size, lr: cfg.lr, seed: cfg.seed };
        let (ckpt, loss) = match kind {
            Baseline::Fcn => {
                let mut m = FcnBaseline::<f32>::new(cfg.baseline_config());
                let loss = fit(&mut m, &set, None, &fit_cfg)?;
                (Checkpoint::from_fcn(&m), loss)
            }
            Baseline::LstmOnly => {
                let mut m = LstmBaseline::<f32>::new(cfg.baseline_config());
                let loss = fit(&mut m, &set, None, &fit_cfg)?;
                (Checkpoint::from_lstm(&m), loss)
            }
        };
        ckpt.write(&out.join("model.ckpt"))?;
        emit_train_loss(out, &loss)?;
        eprintln!("final training loss {:.4}", loss.last().copied().unwrap_or(f64::NAN));
        return Ok(());
    }

    let needs_encoders = cfg.use_static || cfg.fine_tune_encoders;
    let enc = if stage == Stage::Scae || (stage == Stage::All && needs_encoders) {
        let (enc, hist) = train_encoders(&set, &cfg.pairs.indices(), &cfg.scae_config())?;
        Checkpoint::from_encoders(&enc, cfg.lag, cfg.lambda)?.write(&out.join("encoders.ckpt"))?;
        emit_scae_loss(out, &hist)?;
        for h in &hist {
            if let Some(last) = h.last() {
                eprintln!("pair {} autoencoder loss {:.6}", h.pair + 1, last.l_total);
            }
        }
        enc
    } else if needs_encoders {
        let path = encoders.map(Path::to_path_buf).unwrap_or_else(|| out.join("encoders.ckpt"));
        let ckpt = Checkpoint::read(&path).with_context(|| format!("encoders {}", path.display()))?;
        ckpt.check_dataset(&archive.meta)?;
        let all = ckpt.encoders::<f32>()?;
        cfg.pairs
            .indices()
            .iter()
            .map(|&p| {
                all.iter().find(|e| e.pair == p).cloned().ok_or_else(|| anyhow!("no encoder for pair {} in {}", p + 1, path.display()))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    if stage == Stage::Scae {
        return Ok(());
    }
    let (model, loss) = train_classifier(&set, &cfg, enc)?;
    Checkpoint::from_alpd(&model, cfg.lambda).write(&out.join("model.ckpt"))?;
    emit_train_loss(out, &loss)?;
    eprintln!("final training loss {:.4}", loss.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn eval(model: &Path, data: &Path, state: Option<&str>, out: &Path) -> Result<()> {
    let started = Instant::now();
    let ckpt = Checkpoint::read(model).with_context(|| format!("model {}", model.display()))?;
    let archive = DatasetArchive::read(data).with_context(|| format!("dataset {}", data.display()))?;
    ckpt.check_dataset(&archive.meta)?;
    let clf = ckpt.classifier::<f32>()?;
    let set = archive.window_set(clf.lag())?;
    let filter = state.map(|s| StateTag::parse(s).ok_or_else(|| anyhow!("unknown state {s}"))).transpose()?;
    let mut report = evaluate(clf.as_classifier(), &set, None, filter)?;
    report.wall_clock_s = started.elapsed().as_secs_f64();
    fs::create_dir_all(out)?;
    emit_report(out, &report)?;
    println!("accuracy {:.4} on {} windows", report.accuracy, report.samples);
    Ok(())
}

fn sweep(args: &ConfigArgs, axis: &str, values: &[f64], out: &Path) -> Result<()> {
    let cfg = load_config(args)?;
    let axis = SweepAxis::parse(axis).ok_or_else(|| anyhow!("unknown sweep axis {axis}"))?;
    let curve = run_sweep::<f32>(&cfg, axis, values)?;
    fs::create_dir_all(out)?;
    emit_sweep(out, &curve)?;
    for p in &curve.points {
        println!("{}={} accuracy {:.4}", axis.as_str(), p.value, p.accuracy);
    }
    Ok(())
}

fn ablate(args: &ConfigArgs, out: &Path) -> Result<()> {
    let cfg = load_config(args)?;
    let data = Dataset::<f32>::simulate(&cfg)?;
    let mut rows = run_ablation(&data, &cfg, &AblationArm::ALL)?;
    for kind in [BaselineKind::Fcn, BaselineKind::LstmOnly] {
        rows.push(ComparisonRow::new(kind.as_str(), &run_baseline(&data, &cfg, kind)?));
    }
    fs::create_dir_all(out)?;
    emit_comparison(out, "ablation", &rows)?;
    for r in &rows {
        println!("{} accuracy {:.4}", r.name, r.accuracy);
    }
    Ok(())
}

fn predict(model: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::read(model).with_context(|| format!("model {}", model.display()))?;
    if ckpt.kind() == CheckpointKind::Encoders {
        bail!("{} holds cluster encoders only; pass a trained model", model.display());
    }
    let archive = DatasetArchive::read(input).with_context(|| format!("input {}", input.display()))?;
    ckpt.check_dataset(&archive.meta)?;
    let clf = ckpt.classifier::<f32>()?;
    let mut online = OnlinePredictor::new(archive.raw.dims, clf.lag());
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let (mut emitted, mut correct) = (0usize, 0usize);
    for t in 0..archive.raw.len {
        let frame: Vec<&[f32]> = (0..archive.raw.dims.num_pairs).map(|p| archive.raw.vector(p, t)).collect();
        if let Prediction::Ready(rec) = online.push(clf.as_classifier(), &frame)? {
            emitted += 1;
            correct += usize::from(rec.label == archive.labels[t].index());
            serde_json::to_writer(&mut sink, &rec)?;
            sink.write_all(b"\n")?;
        }
    }
    sink.flush()?;
    if emitted > 0 {
        eprintln!("{emitted} predictions, {:.4} agree with the archive labels", correct as f64 / emitted as f64);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { cfg, script, out } => simulate(&cfg, script.as_deref(), &out),
        Command::Train { cfg, data, stage, encoders, baseline, out } => {
            train(&cfg, &data, stage, encoders.as_deref(), baseline, &out)
        }
        Command::Eval { model, data, state, out } => eval(&model, &data, state.as_deref(), &out),
        Command::Sweep { cfg, axis, values, out } => sweep(&cfg, &axis, &values, &out),
        Command::Ablate { cfg, out } => ablate(&cfg, &out),
        Command::Predict { model, input, out } => predict(&model, &input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
