use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tcof::classify::{Classifier, Metric, SvmConfig};
use tcof::ingest::FrameSubset;
use tcof::pipeline::{
    cmd_eval, cmd_extract, cmd_lbptop, cmd_synth, format_reports, Descriptor, EvalConfig, ExtractConfig, LbpConfig,
    MeanSource, PipelineError, SynthConfig, WeightSource, CACHE_ENV,
};
use tcof::pooling::TcofVariant;

#[derive(Parser)]
#[command(name = "tcof", version, about = "Temporal ConvNet-feature video descriptors with leave-one-out evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute spatial, temporal or both descriptors for every manifest video.
    Extract(ExtractArgs),
    /// Leave-one-out evaluation over cached descriptors.
    Eval(EvalArgs),
    /// Compute LBP-TOP descriptors for every manifest video.
    Lbptop(LbpArgs),
    /// Write a seeded synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Print accuracy report CSVs side by side.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Tab-separated `<video dir>\t<class>` file; directories are relative to it.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, env = CACHE_ENV, default_value = "tcof-cache")]
    cache_dir: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    /// `alexnet`, `test`, or a network spec file.
    #[arg(long, default_value = "alexnet")]
    network: String,
    /// TNSR weight container.
    #[arg(long, conflicts_with = "weight_seed", required_unless_present = "weight_seed")]
    weights: Option<PathBuf>,
    /// Use seeded random weights instead of a weight file.
    #[arg(long)]
    weight_seed: Option<u64>,
    #[arg(long, default_value = "spatial")]
    variant: TcofVariant,
    /// Frame-difference lag for the temporal variant [default: 3].
    #[arg(long)]
    tau: Option<usize>,
    /// first, n/8, n/4, n/2 or all.
    #[arg(long, default_value = "all")]
    subset: FrameSubset,
    /// `dataset` or a TNSR file holding a [C, H, W] mean image.
    #[arg(long, default_value = "dataset")]
    mean_image: String,
}

#[derive(Args)]
struct LbpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "all")]
    subset: FrameSubset,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ClassifierKind {
    Nn,
    Svm,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// spatial, temporal, combined or lbptop.
    #[arg(long, default_value = "spatial")]
    descriptor: String,
    #[arg(long, value_enum, default_value = "svm")]
    classifier: ClassifierKind,
    /// NN distance: euclidean or chi2 [default: chi2 for lbptop, else euclidean].
    #[arg(long)]
    metric: Option<Metric>,
    /// SVM soft-margin constant.
    #[arg(long = "c", default_value_t = 40.0)]
    c: f64,
    /// SVM stopping tolerance on the maximal KKT violation.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// SVM iteration cap per binary problem, in multiples of its sample count.
    #[arg(long, default_value_t = 10_000)]
    max_passes: usize,
    /// Accuracy CSV path [default: <cache-dir>/report_<descriptor>_<classifier>.csv].
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    videos_per_class: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn extract_config(a: ExtractArgs) -> Result<ExtractConfig, PipelineError> {
    if a.tau.is_some() && a.variant == TcofVariant::Spatial {
        return Err(PipelineError::Usage(
            "--tau applies only to the temporal and combined variants".into(),
        ));
    }
    let weights = match (a.weights, a.weight_seed) {
        (Some(p), None) => WeightSource::File(p),
        (None, Some(s)) => WeightSource::Random(s),
        _ => return Err(PipelineError::Usage("give exactly one of --weights or --weight-seed".into())),
    };
    let mean = match a.mean_image.as_str() {
        "dataset" => MeanSource::Dataset,
        path => MeanSource::File(PathBuf::from(path)),
    };
    Ok(ExtractConfig {
        workers: a.common.workers(),
        manifest: a.common.manifest,
        network: a.network,
        weights,
        variant: a.variant,
        tau: a.tau.unwrap_or(3),
        subset: a.subset,
        mean,
        cache_dir: a.common.cache_dir,
    })
}

fn eval_config(a: EvalArgs) -> Result<EvalConfig, PipelineError> {
    let descriptor = match a.descriptor.as_str() {
        "lbptop" => Descriptor::LbpTop,
        other => Descriptor::Tcof(other.parse().map_err(PipelineError::Usage)?),
    };
    let classifier = match a.classifier {
        ClassifierKind::Nn => Classifier::Nn(a.metric.unwrap_or(match descriptor {
            Descriptor::LbpTop => Metric::Chi2,
            Descriptor::Tcof(_) => Metric::Euclidean,
        })),
        ClassifierKind::Svm => {
            if a.metric.is_some() {
                return Err(PipelineError::Usage("--metric applies only to --classifier nn".into()));
            }
            Classifier::Svm(SvmConfig {
                c: a.c,
                tolerance: a.tolerance,
                max_passes: a.max_passes,
            })
        }
    };
    Ok(EvalConfig {
        workers: a.common.workers(),
        manifest: a.common.manifest,
        descriptor,
        classifier,
        cache_dir: a.common.cache_dir,
        output: a.output,
    })
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Extract(a) => {
            let s = cmd_extract(&extract_config(a)?)?;
            println!("computed {} descriptor files, {} up to date", s.computed.len(), s.skipped.len());
        }
        Command::Lbptop(a) => {
            let cfg = LbpConfig {
                workers: a.common.workers(),
                manifest: a.common.manifest,
                subset: a.subset,
                cache_dir: a.common.cache_dir,
            };
            let s = cmd_lbptop(&cfg)?;
            println!("computed {} descriptor files, {} up to date", s.computed.len(), s.skipped.len());
        }
        Command::Eval(a) => {
            let out = cmd_eval(&eval_config(a)?)?;
            println!(
                "overall accuracy {:.2}%; report {} and {}",
                out.report.overall_accuracy(),
                out.report_path.display(),
                out.confusion_path.display()
            );
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                out_dir: a.out_dir,
                classes: a.classes,
                videos_per_class: a.videos_per_class,
                frames: a.frames,
                height: a.height,
                width: a.width,
                seed: a.seed,
                force: a.force,
            };
            println!("{}", cmd_synth(&cfg)?.display());
        }
        Command::Report(a) => print!("{}", format_reports(&a.reports)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
