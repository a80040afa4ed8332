//! `reprforge` command line: train, evaluate, generate synthetic data and
//! render Grad-CAM overlays.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reprforge::data::{generate, read_png, write_dord, Split, SyntheticSpec};
use reprforge::explain::{gradcam, render_heatmap};
use reprforge::train::{evaluate, load_config, write_jsonl, Checkpoint, RunConfig, TrainError, Trainer};
use reprforge::Tensor;

const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
const METRICS_FILE: &str = "metrics.jsonl";

#[derive(Parser)]
#[command(name = "reprforge", version, about = "Config-driven representation learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a YAML run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Output directory for the checkpoint and metrics log.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint; prints one JSON record per line.
    Eval {
        /// Run config; defaults to the snapshot stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Write train.dord and test.dord from a synthetic dataset spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a Grad-CAM overlay for one PNG image.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Target class; defaults to the predicted class.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with its process exit code: 2 for usage/config, 1 for runtime.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl ToString) -> Self {
        Self { code: 2, msg: msg.to_string() }
    }

    fn runtime(msg: impl ToString) -> Self {
        Self { code: 1, msg: msg.to_string() }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        if e.is_config_error() {
            Failure::usage(e)
        } else {
            Failure::runtime(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REPRFORGE_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, resume, out } => train(&config, resume.as_deref(), &out),
        Command::Eval {
            config,
            checkpoint,
            split,
        } => eval(config.as_deref(), &checkpoint, &split),
        Command::GenData { spec, out } => gen_data(&spec, &out),
        Command::Explain {
            checkpoint,
            input,
            class,
            out,
        } => explain(&checkpoint, &input, class, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} not found", path.display())))
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    require_file(path, "checkpoint")?;
    Checkpoint::load(path).map_err(Failure::runtime)
}

fn load_run_config(path: &Path) -> Result<RunConfig, Failure> {
    require_file(path, "config")?;
    Ok(load_config(path)?)
}

fn train(config: &Path, resume: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let cfg = load_run_config(config)?;
    let mut trainer: Trainer = match resume {
        Some(path) => Trainer::from_checkpoint(cfg, load_checkpoint(path)?)?,
        None => Trainer::new(cfg)?,
    };
    fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let metrics_path = out.join(METRICS_FILE);
    let mut metrics = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(resume.is_some())
        .truncate(resume.is_none())
        .open(&metrics_path)
        .map_err(|e| Failure::runtime(format!("{}: {e}", metrics_path.display())))?;
    let target = trainer.config().train.epochs;
    while trainer.epoch() < target {
        match trainer.train_epoch() {
            Ok(records) => write_jsonl(&mut metrics, &records)
                .map_err(|e| Failure::runtime(format!("{}: {e}", metrics_path.display())))?,
            Err(e @ TrainError::NumericalDivergence { .. }) => {
                trainer.checkpoint().save(&ckpt_path).map_err(Failure::runtime)?;
                log::error!("last good checkpoint written to {}", ckpt_path.display());
                return Err(Failure::runtime(e));
            }
            Err(e) => return Err(e.into()),
        }
    }
    metrics.flush().map_err(Failure::runtime)?;
    trainer.checkpoint().save(&ckpt_path).map_err(Failure::runtime)?;
    log::info!("wrote {} and {}", ckpt_path.display(), metrics_path.display());
    Ok(())
}

fn eval(config: Option<&Path>, checkpoint: &Path, split: &str) -> Result<(), Failure> {
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = match config {
        Some(path) => load_run_config(path)?,
        None => ckpt.config.clone(),
    };
    let records = evaluate(&cfg, &ckpt, split)?;
    let stdout = std::io::stdout();
    write_jsonl(&mut stdout.lock(), &records).map_err(Failure::runtime)
}

fn gen_data(spec_path: &Path, out: &Path) -> Result<(), Failure> {
    require_file(spec_path, "spec")?;
    let text = fs::read_to_string(spec_path).map_err(|e| Failure::usage(format!("{}: {e}", spec_path.display())))?;
    let spec: SyntheticSpec =
        serde_yaml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", spec_path.display())))?;
    spec.validate()
        .map_err(|(key, msg)| Failure::usage(format!("invalid spec at `{key}`: {msg}")))?;
    fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    for split in [Split::Train, Split::Test] {
        let data = generate(&spec, split).map_err(Failure::runtime)?;
        let path = out.join(format!("{}.dord", split.as_str()));
        write_dord(&path, &data).map_err(Failure::runtime)?;
        log::info!("wrote {} ({} samples)", path.display(), data.len());
    }
    Ok(())
}

fn explain(checkpoint: &Path, input: &Path, class: Option<usize>, out: &Path) -> Result<(), Failure> {
    let ckpt = load_checkpoint(checkpoint)?;
    require_file(input, "input image")?;
    let (shape, pixels) = read_png(input).map_err(Failure::runtime)?;
    if shape != ckpt.model.encoder.input_shape {
        return Err(Failure::usage(format!(
            "input image is {shape:?}, model expects {:?}",
            ckpt.model.encoder.input_shape
        )));
    }
    let x: Tensor = Tensor::new(shape.to_vec(), pixels.iter().map(|&p| f64::from(p)).collect())
        .map_err(Failure::runtime)?;
    let target = match class {
        Some(c) => c,
        None => predicted_class(&ckpt, &x)?,
    };
    let hm = gradcam(&ckpt.model, &x, target, None).map_err(|e| match e {
        reprforge::explain::ExplainError::WrongEncoderKind(_)
        | reprforge::explain::ExplainError::ClassOutOfRange { .. } => Failure::usage(e),
        e => Failure::runtime(e),
    })?;
    render_heatmap(&hm, &x, out).map_err(Failure::runtime)?;
    log::info!("class {target} heatmap written to {}", out.display());
    Ok(())
}

fn predicted_class(ckpt: &Checkpoint, x: &Tensor) -> Result<usize, Failure> {
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    let batch = x.reshape(&shape).map_err(Failure::runtime)?;
    let logits = ckpt.model.logits(&batch).map_err(Failure::usage)?;
    let row = logits.data();
    Ok((0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best }))
}
