use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use roadcascade::cascade::{train_cascade_with_progress, StageReport};
use roadcascade::config::{RunConfig, TrainCount};
use roadcascade::dataset::{load_dataset, read_image, split_dataset, write_image, Frame};
use roadcascade::evaluation::{confusion, held_out_samples, render_mask, roc_sweep};
use roadcascade::model_io::{parse_model, serialize_model};
use roadcascade::sampler::FrameSplit;
use roadcascade::synthdata::{generate_corpus, SceneRanges};
use roadcascade::CascadeModel;

/// Road detection with a cascade of boosted depth-2 trees.
#[derive(Parser)]
#[command(name = "roadcascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated corpus.
    Synth {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a cascade on the training split of a corpus.
    Train {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Plain-text training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// ROC and confusion counts on random ROIs from the held-out split.
    Eval {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// ROC CSV output.
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Random ROIs per class per held-out frame.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Render a road mask for one image.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 5)]
        stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Corpus directory holding annotations.xml.
    #[arg(long)]
    data: Option<PathBuf>,
    /// key = value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training frame count, or a fraction such as 0.6.
    #[arg(long)]
    n_train: Option<String>,
    #[arg(long)]
    split_seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { n, seed, out } => {
            let frames = generate_corpus(&out, n, seed, &SceneRanges::default())?;
            println!("wrote {} frames to {}", frames.len(), out.display());
            Ok(())
        }
        Command::Train { split, model, report } => {
            let cfg = load_config(&split)?;
            let model_path = model.or(cfg.model.clone()).context("no model path given (--model)")?;
            let report_path = report.or(cfg.report.clone());
            train(&cfg, &model_path, report_path.as_deref())
        }
        Command::Eval {
            split,
            model,
            roc,
            samples,
        } => {
            let mut cfg = load_config(&split)?;
            if let Some(s) = samples {
                cfg.eval_samples_per_class = s;
            }
            let model_path = model.or(cfg.model.clone()).context("no model path given (--model)")?;
            let roc_path = roc.or(cfg.roc.clone());
            eval(&cfg, &model_path, roc_path.as_deref())
        }
        Command::Classify {
            model,
            image,
            stride,
            out,
        } => {
            let model = read_model(&model)?;
            let img = read_image(&image)?;
            let mask = render_mask(&model, &img, stride)?;
            write_image(&out, &mask)?;
            Ok(())
        }
    }
}

fn load_config(args: &SplitArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(n) = &args.n_train {
        cfg.n_train = n
            .parse::<TrainCount>()
            .map_err(|_| anyhow::anyhow!("invalid --n-train {n:?}"))?;
    }
    if let Some(s) = args.split_seed {
        cfg.split_seed = s;
    }
    cfg.cascade.validate()?;
    Ok(cfg)
}

fn load_split(cfg: &RunConfig) -> Result<(Vec<Frame>, Vec<Frame>)> {
    let dir = cfg.data.as_deref().context("no corpus given (--data)")?;
    let frames = load_dataset(dir)?;
    let plan = FrameSplit {
        seed: cfg.split_seed,
        n_train: cfg.n_train.resolve(frames.len()),
    };
    Ok(split_dataset(frames, plan)?)
}

fn read_model(path: &Path) -> Result<CascadeModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model(&text).with_context(|| format!("loading {}", path.display()))
}

fn stage_line(i: usize, r: &StageReport) -> String {
    format!(
        "stage {}: trees {} positives {} negatives {} DR {:.6} FPR {:.6} threshold {:.6} train_error {:.6} bound {:.6} mined {}",
        i + 1,
        r.trees,
        r.positives,
        r.negatives,
        r.rates.dr,
        r.rates.fpr,
        r.threshold,
        r.training_error,
        r.bound(),
        r.mined
    )
}

fn train(cfg: &RunConfig, model_path: &Path, report_path: Option<&Path>) -> Result<()> {
    let start = Instant::now();
    let (train_frames, _) = load_split(cfg)?;
    if train_frames.is_empty() {
        bail!("training split is empty");
    }
    eprintln!("training on {} frames", train_frames.len());
    let training = train_cascade_with_progress(&train_frames, &cfg.cascade, |i, r| {
        eprintln!("{}", stage_line(i, r));
    })?;
    for (i, r) in training.stages.iter().enumerate() {
        if !r.bound_holds() {
            bail!(
                "stage {}: training error {} exceeds the boosting bound {}",
                i + 1,
                r.training_error,
                r.bound()
            );
        }
    }
    fs::write(model_path, serialize_model(&training.model))
        .with_context(|| format!("writing {}", model_path.display()))?;

    let (dr_t, fpr_t) = training.model.overall_rates();
    let mut report = String::new();
    report.push_str(&format!("training_frames {}\n", train_frames.len()));
    report.push_str(&format!("stages {}\n", training.stages.len()));
    report.push_str(&format!("stop {}\n", training.stop.as_str()));
    for (i, r) in training.stages.iter().enumerate() {
        report.push_str(&stage_line(i, r));
        report.push('\n');
    }
    report.push_str(&format!("DR_t {dr_t:.6}\nFPR_t {fpr_t:.6}\n"));
    report.push_str(&format!("wall_time_s {:.3}\n", start.elapsed().as_secs_f64()));
    match report_path {
        Some(p) => fs::write(p, &report).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{report}"),
    }
    Ok(())
}

fn eval(cfg: &RunConfig, model_path: &Path, roc_path: Option<&Path>) -> Result<()> {
    let model = read_model(model_path)?;
    let (_, test_frames) = load_split(cfg)?;
    if test_frames.is_empty() {
        bail!("held-out split is empty");
    }
    let (roi_w, roi_h) = model.roi_size();
    if roi_w != roi_h {
        bail!("model ROI {roi_w}x{roi_h} is not square");
    }
    let samples = held_out_samples(&test_frames, roi_w, cfg.eval_samples_per_class, cfg.eval_seed)?;
    let counts = confusion(&model, &samples)?;
    let roc = roc_sweep(&model, &samples)?;
    if let Some(p) = roc_path {
        fs::write(p, roc.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("held_out_frames {}", test_frames.len());
    println!("positives {} negatives {}", counts.positives(), counts.negatives());
    println!("tp {} fp {} tn {} fn {}", counts.tp, counts.fp, counts.tn, counts.fn_);
    println!("DR {:.6} FPR {:.6}", counts.dr(), counts.fpr());
    for max_fpr in [0.1, 0.198, 0.25] {
        if let Some(p) = roc.best_dr_at_fpr(max_fpr) {
            println!(
                "roc_best fpr<={max_fpr} DR {:.6} FPR {:.6} threshold {:.6}",
                p.dr, p.fpr, p.threshold
            );
        }
    }
    Ok(())
}
