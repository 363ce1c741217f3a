//! Command-line front end: data generation, training, evaluation, ensemble
//! diversity, and standalone clustering metrics.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use concurl::config::{Mode, TrainConfig};
use concurl::dataset::{self, Manifest, ManifestPaths};
use concurl::ensemble::TransformEnsemble;
use concurl::error::{Error, Result};
use concurl::metrics::evaluate_clustering;
use concurl::trainer;

#[derive(Parser)]
#[command(name = "concurl", version, about = "Consensus clustering trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic blob dataset (CSV plus manifest).
    GenerateData(GenerateDataArgs),
    /// Train a model from a JSON config, with optional flag overrides.
    Train(TrainArgs),
    /// Score a checkpoint against a labeled dataset.
    Eval(EvalArgs),
    /// Measure pairwise agreement of the transform ensemble's assignments.
    Diversity(DiversityArgs),
    /// Compare two label files with ACC, NMI, and ARI.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct GenerateDataArgs {
    /// Number of Gaussian clusters.
    #[arg(long)]
    clusters: usize,
    /// Feature dimension.
    #[arg(long)]
    dim: usize,
    /// Points drawn per cluster.
    #[arg(long)]
    points_per_cluster: usize,
    /// Half-width of the cube the centers are drawn from.
    #[arg(long, default_value_t = 5.0)]
    center_scale: f64,
    /// Standard deviation of the per-point noise.
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for data.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON file with the full training configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// concurl, byol, soft, or byol_soft.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Manifest of the dataset to score on.
    #[arg(long)]
    manifest: PathBuf,
    /// Optional path for the full report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DiversityArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Ensemble file; defaults to ensemble.ccrl beside the checkpoint.
    #[arg(long)]
    ensemble: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Predicted labels, one integer per line.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth labels, one integer per line.
    #[arg(long)]
    truth: PathBuf,
}

fn load_labels(path: &PathBuf) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        labels.push(trimmed.parse::<usize>().map_err(|_| {
            Error::Data(format!(
                "{}: line {} is not a non-negative integer label: '{trimmed}'",
                path.display(),
                i + 1
            ))
        })?);
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{}: no labels found", path.display())));
    }
    Ok(labels)
}

fn print_report(report: &concurl::metrics::ClusterReport) {
    println!("acc {:.6}", report.acc);
    println!("nmi {:.6}", report.nmi);
    println!("ari {:.6}", report.ari);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData(args) => {
            let ds = dataset::generate_blobs(
                args.clusters,
                args.dim,
                args.points_per_cluster,
                args.center_scale,
                args.noise_sigma,
                args.seed,
            )?;
            std::fs::create_dir_all(&args.out)?;
            let csv_path = args.out.join("data.csv");
            let label_column = dataset::save_csv(&ds, &csv_path)?;
            let manifest = Manifest {
                kind: "vector".into(),
                k: args.clusters,
                paths: ManifestPaths::Csv { csv: PathBuf::from("data.csv"), label_column },
                seed: args.seed,
            };
            let manifest_path = args.out.join("manifest.json");
            manifest.save(&manifest_path)?;
            println!(
                "wrote {} points ({} clusters, dim {}) to {}",
                ds.len(),
                args.clusters,
                args.dim,
                csv_path.display()
            );
            println!("manifest {}", manifest_path.display());
            Ok(())
        }
        Command::Train(args) => {
            let mut config = TrainConfig::from_json_file(&args.config)?;
            if let Some(epochs) = args.epochs {
                config.epochs = epochs;
            }
            if let Some(batch_size) = args.batch_size {
                config.batch_size = batch_size;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(mode) = args.mode {
                config.mode = mode;
            }
            if let Some(lr) = args.learning_rate {
                config.learning_rate = lr;
            }
            if let Some(dir) = args.output_dir {
                config.output_dir = dir;
            }
            config.validate()?;
            let artifacts = trainer::train(&config)?;
            println!("checkpoint {}", artifacts.checkpoint.display());
            println!("metrics {}", artifacts.metrics_csv.display());
            println!("eval {}", artifacts.eval_csv.display());
            if let Some(d) = &artifacts.diversity_csv {
                println!("diversity {}", d.display());
            }
            println!("report {}", artifacts.report_json.display());
            print_report(&artifacts.final_report);
            Ok(())
        }
        Command::Eval(args) => {
            let ds = Manifest::load(&args.manifest)?.load_dataset(&args.manifest)?;
            let report = trainer::evaluate(&args.checkpoint, &ds)?;
            print_report(&report);
            if let Some(path) = args.report {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Data(format!("report serialization: {e}")))?;
                std::fs::write(path, text + "\n")?;
            }
            Ok(())
        }
        Command::Diversity(args) => {
            let ds = Manifest::load(&args.manifest)?.load_dataset(&args.manifest)?;
            let (model, config) = trainer::load_checkpoint(&args.checkpoint)?;
            let ensemble_path = args.ensemble.unwrap_or_else(|| {
                args.checkpoint.with_file_name("ensemble.ccrl")
            });
            let transforms = TransformEnsemble::load(&ensemble_path)?;
            let record =
                trainer::measure_diversity(&model, &ds, &transforms, config.temperature, 0)?;
            println!("mean_pairwise_nmi {:.6}", record.mean_pairwise_nmi);
            println!("std_pairwise_nmi {:.6}", record.std_pairwise_nmi);
            println!("num_pairs {}", record.num_pairs);
            Ok(())
        }
        Command::Metrics(args) => {
            let pred = load_labels(&args.pred)?;
            let truth = load_labels(&args.truth)?;
            let report = evaluate_clustering(&pred, &truth)?;
            print_report(&report);
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
