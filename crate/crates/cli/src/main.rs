use clap::{Parser, Subcommand};
use conceptspace::model::{ModelError, ModelState};
use conceptspace::train::{evaluate, run_experiment, train, write_predictions, ExperimentPlan, TrainConfig, TrainError};
use conceptspace::world::{build_split, Dataset, Experiment, SplitSpec, World, WorldConfig, WorldError, WorldPreset};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conceptspace", version, about = "Visual concepts and metaconcepts in a Gaussian embedding space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world (ontology, scenes, pools).
    GenWorld {
        #[arg(long)]
        preset: WorldPreset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of scenes (pool A for clevr-cogent).
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Build the train/test partitions of one experiment.
    GenSplit {
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Defaults to `<world>/<experiment>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total training visual questions.
        #[arg(long)]
        questions: Option<usize>,
    },
    /// Train a model on the `train` partition of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Flat JSON of training options.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "train")]
        partition: String,
    },
    /// Evaluate a checkpoint on one partition.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        partition: String,
        #[arg(long)]
        report: PathBuf,
        /// Per-item predictions; defaults to the report path with a
        /// `.predictions.jsonl` extension.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Replicate an experiment over several seeds.
    Experiment {
        #[arg(long)]
        preset: Experiment,
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        #[arg(long)]
        ablate_metaconcepts: bool,
        /// Comma-separated k values (biased_same_kind only).
        #[arg(long, value_delimiter = ',')]
        sweep_k: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        questions: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => Failure::Numerical(e.to_string()),
            TrainError::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenWorld { preset, seed, out, scenes } => {
            let mut config = WorldConfig::preset(preset, seed);
            if let Some(n) = scenes {
                config.n_scenes = n;
            }
            let world = World::generate(&config)?;
            world.save(&out)?;
            eprintln!("wrote {} scenes to {}", world.scenes.len(), out.display());
        }
        Command::GenSplit { experiment, world, k, out, seed, questions } => {
            let w = World::load(&world)?;
            let mut spec = SplitSpec::preset(experiment);
            if let Some(k) = k {
                spec.k = k;
            }
            if questions.is_some() {
                spec.visual_budget = questions;
            }
            let data = build_split(&spec, &w, seed)?;
            data.validate()?;
            let out = out.unwrap_or_else(|| world.join(experiment.as_str()));
            data.save(&out)?;
            for (name, idx) in &data.partitions {
                eprintln!("{name}: {} items", idx.len());
            }
        }
        Command::Train { data, config, out, partition } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            let config = TrainConfig::from_json(&text)?;
            let dataset = Dataset::load(&data)?;
            let run = train(&dataset, &partition, &config)?;
            for (i, l) in run.epoch_losses.iter().enumerate() {
                eprintln!("epoch {i}: mean loss {l:.6}");
            }
            run.model.save(&out)?;
        }
        Command::Eval { ckpt, data, partition, report, predictions } => {
            let model = ModelState::load(&ckpt)?;
            let dataset = Dataset::load(&data)?;
            if !dataset.partitions.contains_key(&partition) {
                return Err(Failure::Usage(format!("no partition named `{partition}`")));
            }
            let r = evaluate(&model, &dataset, &partition)?;
            write(&report, &serde_json::to_string_pretty(&r).expect("report serializes"))?;
            let pred = predictions.unwrap_or_else(|| report.with_extension("predictions.jsonl"));
            write_predictions(&pred, &r.predictions)?;
            for (m, v) in r.metrics() {
                println!("{m}\t{v}");
            }
        }
        Command::Experiment { preset, seeds, ablate_metaconcepts, sweep_k, out, questions, epochs } => {
            if seeds == 0 {
                return Err(Failure::Usage("--seeds must be at least 1".into()));
            }
            if sweep_k.is_some() && preset != Experiment::BiasedSameKind {
                return Err(Failure::Usage("--sweep-k applies to biased_same_kind only".into()));
            }
            let mut plan = ExperimentPlan::preset(preset);
            plan.ablate_metaconcepts = ablate_metaconcepts;
            plan.sweep_k = sweep_k;
            if questions.is_some() {
                plan.split.visual_budget = questions;
            }
            if let Some(e) = epochs {
                plan.train.epochs = e;
            }
            let report = run_experiment(&plan, seeds, |line| eprintln!("{line}"))?;
            report.write(&out)?;
            print!("{}", report.metrics_csv());
        }
    }
    Ok(())
}

fn exit_code(result: &Result<(), Failure>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(_)) => 1,
        Err(Failure::Data(_)) => 2,
        Err(Failure::Numerical(_)) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = run(cli.command);
    if let Err(Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m)) = &result {
        eprintln!("error: {m}");
    }
    ExitCode::from(exit_code(&result))
}
