//! `sufficiency`: the pipeline stages as subcommands sharing one configuration.
//!
//! Exit status is 0 on success, 2 for usage errors (bad flags, invalid configuration,
//! missing inputs that a flag should have named) and 1 when a stage fails.

mod config;
mod stages;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sufficiency_core::classifier::VariantKind;
use sufficiency_core::generator::GenerationVariant;
use sufficiency_core::metrics::Level;

use config::{ConfigLayer, PipelineConfig, WORK_DIR_ENV};

/// Error the user can fix by changing the invocation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "sufficiency", version, about = "Argument sufficiency assessment through conclusion generation")]
#[command(arg_required_else_help = true, subcommand_required = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory under which stage outputs are placed by default.
    #[arg(long, global = true, env = WORK_DIR_ENV)]
    work_dir: Option<PathBuf>,
    /// Master seed of every stochastic component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Hyperparameter trials per fold.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Maximum number of parallel jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Shrunken matrix (2 runs by default) with the tiny stand-in models.
    #[arg(long, global = true)]
    desk_scale: bool,
    /// Replace existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the essays, attach labels, build masked pairs and fold plans.
    BuildCorpus {
        #[arg(long)]
        essays: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Folds per run.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train (or, for the unsupervised variant, only prepare) one generator per fold.
    TrainGenerator {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Fold plans written by build-corpus.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long, value_parser = parse_generation_variant)]
        variant: Option<GenerationVariant>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a conclusion for every pair with the generator of the fold testing it.
    Generate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one classifier per fold for one input variant.
    TrainClassifier {
        #[arg(long)]
        arguments: Option<PathBuf>,
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant_kind)]
        variant: VariantKind,
        /// Fold plans written by build-corpus.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict sufficiency for serialized variant inputs with a trained fold model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the (variant, run, fold) matrix, aggregate and test significance.
    Evaluate {
        /// TOML file describing the experiment matrix.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Output directory of build-corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Folds per run.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement, majority and rank analysis of an annotation study.
    AnalyzeAnnotations {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "ordinal", value_parser = parse_level)]
        level: Level,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an evaluation.
    Report {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

fn parse_generation_variant(s: &str) -> Result<GenerationVariant, String> {
    s.parse().map_err(|e: sufficiency_core::generator::GeneratorError| e.to_string())
}

fn parse_variant_kind(s: &str) -> Result<VariantKind, String> {
    s.parse().map_err(|e: sufficiency_core::classifier::ClassifierError| e.to_string())
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildCorpus { .. } => "build-corpus",
            Command::TrainGenerator { .. } => "train-generator",
            Command::Generate { .. } => "generate",
            Command::TrainClassifier { .. } => "train-classifier",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::AnalyzeAnnotations { .. } => "analyze-annotations",
            Command::Report { .. } => "report",
        }
    }
}

impl GlobalArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            work_dir: self.work_dir.clone(),
            seed: self.seed,
            runs: self.runs,
            trials: self.trials,
            desk_scale: self.desk_scale.then_some(true),
            jobs: self.jobs,
            ..Default::default()
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let file = g.config.as_deref().map(ConfigLayer::read).transpose()?;
    let mut flags = g.layer();
    match &cli.command {
        Command::BuildCorpus { essays, labels, folds, .. } => {
            flags.essays = essays.clone();
            flags.labels = labels.clone();
            flags.folds = *folds;
        }
        Command::Evaluate { folds, .. } => flags.folds = *folds,
        Command::TrainGenerator { variant, .. } => flags.generator_variant = *variant,
        _ => {}
    }
    let config = PipelineConfig::resolve(file, flags)?;
    rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build_global().ok();
    let ctx = stages::Context { config, force: g.force };
    match cli.command {
        Command::BuildCorpus { out, .. } => stages::build_corpus(&ctx, out),
        Command::TrainGenerator { pairs, folds, out, .. } => stages::train_generator(&ctx, pairs, folds, out),
        Command::Generate { model, pairs, out } => stages::generate(&ctx, model, pairs, out),
        Command::TrainClassifier { arguments, generated, variant, folds, out } => {
            stages::train_classifier(&ctx, variant, arguments, generated, folds, out)
        }
        Command::Predict { model, inputs, out } => stages::predict(&ctx, &model, &inputs, out),
        Command::Evaluate { matrix, corpus, generated, out, .. } => {
            stages::evaluate(&ctx, matrix, corpus, generated, out)
        }
        Command::AnalyzeAnnotations { records, level, out } => stages::analyze_annotations(&ctx, &records, level, out),
        Command::Report { input, format, out } => stages::report(&ctx, input, format == Format::Records, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stage = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error in stage {stage}: {e:#}");
            ExitCode::from(1)
        }
    }
}
