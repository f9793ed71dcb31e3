use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use odbench_core::data::{read_manifest, write_dataset_csv};
use odbench_core::fixtures::reference_auc;
use odbench_core::harness::{load_dataset, run_benchmark, RunConfig, DEFAULT_REPEATS};
use odbench_core::report::{emit_report, write_clustermap, write_stats, ReportFormat};
use odbench_core::synth::generation_metadata;
use odbench_core::{generate_archetype, Algorithm, Archetype, ArchetypeSpec, AucMatrix};

#[derive(Parser)]
#[command(
    name = "odbench",
    version,
    about = "Benchmark unsupervised anomaly detectors on tabular data"
)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "ODBENCH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-average every selected detector on every manifest dataset.
    Run(RunArgs),
    /// Friedman ranks, Iman-Davenport, Nemenyi and the significance table.
    Stats(MatrixArgs),
    /// Two-way clustering of an AUC matrix.
    Clustermap(MatrixArgs),
    /// Generate a labelled synthetic dataset of one anomaly archetype.
    Synth(SynthArgs),
    /// Boxplots and statistics for a finished run.
    Report(ReportArgs),
    /// Load and preprocess every manifest entry without running detectors.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated detector names; all detectors when omitted.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeats per grid point for randomized detectors.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Drop near-chance datasets and invert below-chance ones.
    #[arg(long)]
    apply_diagnostics: bool,
    /// Record failing datasets and tasks as gaps instead of aborting.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// AUC matrix CSV; the bundled reference matrix when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    archetype: Archetype,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.05)]
    contamination: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a previous `run`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_algorithms(names: &[String]) -> Result<Vec<Algorithm>> {
    if names.is_empty() {
        return Ok(Algorithm::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            Algorithm::from_name(n.trim()).with_context(|| {
                let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm `{n}` (known: {})", known.join(", "))
            })
        })
        .collect()
}

fn read_matrix(input: Option<&Path>) -> Result<AucMatrix> {
    Ok(match input {
        Some(path) => AucMatrix::read_csv(path)?,
        None => reference_auc()?,
    })
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// Returns whether the run finished without gaps.
fn run(args: RunArgs) -> Result<bool> {
    let config = RunConfig {
        manifest: args.manifest,
        out_dir: args.out,
        algorithms: parse_algorithms(&args.algorithms)?,
        seed: args.seed,
        apply_diagnostics: args.apply_diagnostics,
        repeats: args.repeats,
        keep_going: args.keep_going,
    };
    let outcome = run_benchmark(&config)?;
    println!(
        "{} algorithms x {} datasets written to {}",
        outcome.auc.n_algorithms(),
        outcome.auc.n_datasets(),
        config.out_dir.display()
    );
    for gap in &outcome.gaps {
        let alg = gap.algorithm.as_deref().unwrap_or("(load)");
        eprintln!("gap: {alg} on {}: {}", gap.dataset, gap.message);
    }
    Ok(outcome.gaps.is_empty())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = ArchetypeSpec {
        archetype: args.archetype,
        n: args.n,
        d: args.d,
        contamination: args.contamination,
        seed: args.seed,
    };
    let dataset = generate_archetype(&spec)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let csv = args.out.join(format!("{}.csv", dataset.name));
    let sidecar = args.out.join(format!("{}.json", dataset.name));
    write_dataset_csv(&dataset, &csv)?;
    std::fs::write(
        &sidecar,
        serde_json::to_string_pretty(&generation_metadata(&spec))?,
    )
    .with_context(|| format!("writing {}", sidecar.display()))?;
    print_written(&[csv, sidecar]);
    Ok(())
}

/// Returns whether every entry loaded.
fn validate(args: ValidateArgs) -> Result<bool> {
    let mut ok = true;
    for entry in read_manifest(&args.manifest)? {
        match load_dataset(&entry.path, &entry.name, entry.invert_labels, entry.exclude) {
            Ok(l) => {
                let ds = &l.dataset;
                println!(
                    "ok {}: {} samples, {} features, {} anomalies, {} duplicates removed, {} constant columns dropped",
                    ds.name,
                    ds.n_samples(),
                    ds.n_features(),
                    ds.anomaly_count().unwrap_or(0),
                    l.report.duplicates_removed,
                    l.report.columns_dropped.len()
                );
                if ds.labels.is_none() {
                    println!("   {} has no label column and cannot be scored", ds.name);
                    ok = false;
                }
            }
            Err(e) => {
                println!("error {}: {e}", entry.name);
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn dispatch(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    match cli.command {
        Command::Run(args) => run(args),
        Command::Stats(args) => {
            let auc = read_matrix(args.input.as_deref())?;
            print_written(&write_stats(&auc, &args.out)?);
            Ok(true)
        }
        Command::Clustermap(args) => {
            let auc = read_matrix(args.input.as_deref())?;
            print_written(&write_clustermap(&auc, &args.out)?);
            Ok(true)
        }
        Command::Synth(args) => synth(args).map(|_| true),
        Command::Report(args) => {
            let format = match args.format {
                Format::Csv => ReportFormat::Csv,
                Format::Svg => ReportFormat::Svg,
            };
            print_written(&emit_report(&args.out, format)?);
            Ok(true)
        }
        Command::Validate(args) => validate(args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
