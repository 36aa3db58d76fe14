use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dcrbm::data::{write_dataset, FileFormat};
use dcrbm::trainers::match_budget;
use dcrbm::{AisBase, AisConfig, AtllKind, DEFAULT_ENUMERATION_CAP};
use dcrbm_bench::dataset::{load_file, parse_source_arg, resolve_format, FileSpec, GeneratorSpec};
use dcrbm_bench::evaluate::{evaluate, EvaluateArgs};
use dcrbm_bench::experiment::{write_json, Experiment};
use dcrbm_bench::failure::{CliResult, Failure};
use dcrbm_bench::oracle_suite::{self, Suite};
use dcrbm_bench::spec::ExperimentSpec;

#[derive(Parser)]
#[command(name = "dcrbm", version, about = "RBM training benchmarks: S-DCP, CS-DCP, CD, PCD, CG")]
struct Cli {
    /// Seed override (trial seed base for `train`, binarization for
    /// `generate binarize`, AIS for `evaluate`, models for `oracle`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "DCRBM_THREADS")]
    threads: Option<usize>,
    /// Output path: a directory for `train`, a file otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset file plus its manifest.
    Generate {
        #[command(subcommand)]
        what: Generate,
    },
    /// Run every arm and trial of an experiment spec.
    Train {
        spec: PathBuf,
        /// No per-run progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// ATLL of a checkpoint or parameter file on a dataset.
    Evaluate {
        model: PathBuf,
        /// Dataset file, `shifting-bar:N,B` or `bars-stripes:D`.
        #[arg(long)]
        data: String,
        #[arg(long)]
        data_format: Option<Format>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 100)]
        particles: usize,
        #[arg(long, default_value_t = 10_000)]
        temps: usize,
        #[arg(long, value_enum, default_value_t = Base::Target)]
        base: Base,
        /// Largest min(m, n) evaluated exactly.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Check the library against brute-force references; exit 3 on failure.
    Oracle {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// List the (d, K') splits with d*K' = K.
    MatchBudget { k: usize },
}

#[derive(Subcommand)]
enum Generate {
    ShiftingBar {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    BarsStripes {
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Statistically binarize a grayscale file (e.g. MNIST IDX).
    Binarize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        input_format: Option<Format>,
        /// Keep only the first rows.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Idx,
    Csv,
    Json,
}

impl From<Format> for FileFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Idx => FileFormat::Idx,
            Format::Csv => FileFormat::Csv,
            Format::Json => FileFormat::Json,
        }
    }
}

fn extension(f: Format) -> &'static str {
    match f {
        Format::Idx => "idx",
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Exact,
    Ais,
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Target,
    Uniform,
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn generate(what: Generate, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let (data, format, generator) = match what {
        Generate::ShiftingBar { n, b, format } => {
            let g = GeneratorSpec::ShiftingBar { n, b };
            (g.build()?, format, serde_json::to_value(&g)?)
        }
        Generate::BarsStripes { d, format } => {
            let g = GeneratorSpec::BarsStripes { d };
            (g.build()?, format, serde_json::to_value(&g)?)
        }
        Generate::Binarize { input, input_format, limit, format } => {
            resolve_format(&input, input_format.map(Into::into))?;
            let seed = seed.unwrap_or(0);
            let spec = FileSpec {
                file: input.clone(),
                format: input_format.map(Into::into),
                limit,
                binarize_seed: Some(seed),
                dim: None,
            };
            let generator = serde_json::json!({
                "generator": "binarize",
                "input": input.file_name().map(|f| f.to_string_lossy().into_owned()),
                "limit": limit,
                "seed": seed,
            });
            (load_file(&spec)?, format, generator)
        }
    };
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", data.name(), extension(format))));
    let manifest = write_dataset(&data, &path, format.into(), Some(generator))?;
    eprintln!("wrote {} ({} rows x {} units)", path.display(), manifest.rows, manifest.dim);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::validation("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate { what } => generate(what, cli.seed, out),
        Command::Train { spec, quiet } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let exp = Experiment::prepare(spec, cli.seed, out)?;
            let summary = exp.run(!quiet)?;
            for arm in &summary.arms {
                println!(
                    "{:<16} final ATLL {:>9.4} ± {:.4} over {} trials",
                    arm.label,
                    arm.final_mean,
                    arm.final_std,
                    arm.final_per_trial.len()
                );
            }
            eprintln!("results in {}", exp.out_dir.display());
            Ok(())
        }
        Command::Evaluate { model, data, data_format, mode, particles, temps, base, cap } => {
            let mut source = parse_source_arg(&data)?;
            if let (dcrbm_bench::dataset::DataSource::File(f), Some(fmt)) = (&mut source, data_format) {
                f.format = Some(fmt.into());
            }
            let args = EvaluateArgs {
                model,
                data: source,
                mode: match mode {
                    Mode::Auto => None,
                    Mode::Exact => Some(AtllKind::Exact),
                    Mode::Ais => Some(AtllKind::Ais),
                },
                ais: AisConfig {
                    num_particles: particles,
                    num_temps: temps,
                    base: match base {
                        Base::Target => AisBase::TargetVisibleBiases,
                        Base::Uniform => AisBase::Uniform,
                    },
                    ..AisConfig::default()
                },
                cap,
                seed: cli.seed.unwrap_or(0),
            };
            let report = evaluate(&args)?;
            if let Some(path) = out {
                write_json(path, &report)?;
            }
            print_json(&report)
        }
        Command::Oracle { suite } => {
            let checks = oracle_suite::run(suite, cli.seed.unwrap_or(0));
            for c in &checks {
                println!(
                    "{} [{}] {}: measured {:.3e}, tolerance {:.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.suite,
                    c.name,
                    c.measured,
                    c.tolerance
                );
            }
            if let Some(path) = out {
                write_json(path, &checks)?;
            }
            match checks.iter().filter(|c| !c.pass).count() {
                0 => Ok(()),
                n => Err(Failure::Oracle(n)),
            }
        }
        Command::MatchBudget { k } => {
            if k == 0 {
                return Err(Failure::validation("K must be >= 1"));
            }
            for (d, kp) in match_budget(k) {
                println!("d={d} k_prime={kp}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dcrbm: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
