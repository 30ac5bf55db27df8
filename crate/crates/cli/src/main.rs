//! `chromaclust` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use chromaclust::harness::bench::{bench_table, run_bench, BenchCase, BenchOptions};
use chromaclust::harness::generate::{generate, GenerateSpec};
use chromaclust::harness::io::{read_instance_file, ReportFile};
use chromaclust::harness::{exit_code, run_solver, Algorithm};
use chromaclust::lemma_lab::{run_all, LabSizes};
use chromaclust::peeling::PeelingConfig;
use chromaclust::{Error, Result};

/// Exit code of `verify-lemmas` when a check fails.
const EXIT_CHECK_FAILED: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "chromaclust", version, about = "Chromatic k-means / k-medians clustering")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a planted-cluster instance.
    Generate(GenerateArgs),
    /// Solve one instance and print a report.
    Solve(SolveArgs),
    /// Run solvers over instances and emit a tab-separated table.
    Bench(BenchArgs),
    /// Run the randomized lemma checks.
    VerifyLemmas(LemmaArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    k: usize,
    /// Number of groups.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    /// One point per cluster in every group.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sample_cap: Option<usize>,
    #[arg(long)]
    subset_cap: Option<usize>,
    /// Keep this many partial paths per level (heuristic).
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    delta_steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Most grid points per simplex in the means search.
    #[arg(long)]
    grid_cap: Option<usize>,
    /// Skip the final local refinement.
    #[arg(long)]
    no_polish: bool,
    /// Number of clusters for CSV/TSV input.
    #[arg(long)]
    k: Option<usize>,
}

impl SolverArgs {
    fn config(&self) -> PeelingConfig {
        let d = PeelingConfig::default();
        PeelingConfig {
            epsilon: self.epsilon,
            seed: self.seed,
            sample_size_cap: self.sample_cap.unwrap_or(d.sample_size_cap),
            subset_cap: self.subset_cap.unwrap_or(d.subset_cap),
            beam_width: self.beam,
            delta_steps: self.delta_steps,
            runs: self.runs,
            max_nodes: self.max_nodes.unwrap_or(d.max_nodes),
            grid_cap: self.grid_cap.unwrap_or(d.grid_cap),
            polish: !self.no_polish,
            ..d
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file (.json, .csv or .tsv).
    instance: PathBuf,
    #[arg(long, default_value = "peel-means")]
    algo: Algorithm,
    #[command(flatten)]
    solver: SolverArgs,
    /// Leave the wall-clock time out of the report.
    #[arg(long)]
    omit_timing: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Instance files.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    /// Comma-separated algorithms (default: all).
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Number of seeds per solver, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Add a wall-clock column (otherwise "n/a").
    #[arg(long)]
    timing: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier on the default trial counts.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    let inst = read_instance_file(&args.instance, args.solver.k)?.to_instance()?;
    let cfg = args.solver.config();
    info!("solving {} with {}", args.instance.display(), args.algo);
    let rep = run_solver(&inst, args.algo, &cfg)?;
    let config = serde_json::to_value(&cfg).map_err(|e| Error::Io(e.to_string()))?;
    emit(&ReportFile::new(&rep, config, !args.omit_timing).to_json(), args.output.as_deref())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let cases = args
        .instances
        .iter()
        .map(|path| {
            let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok(BenchCase { name, instance: read_instance_file(path, args.solver.k)?.to_instance()? })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = args.solver.config();
    config.validate()?;
    let opts = BenchOptions {
        algorithms: if args.algo.is_empty() { Algorithm::ALL.to_vec() } else { args.algo.clone() },
        seeds: (0..args.seeds).map(|i| config.seed + i).collect(),
        config,
        timing: args.timing,
    };
    emit(&bench_table(&run_bench(&cases, &opts)), args.output.as_deref())
}

fn verify(args: &LemmaArgs) -> Result<bool> {
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {}", args.scale)));
    }
    let d = LabSizes::default();
    let scaled = |n: usize| ((n as f64 * args.scale).round() as usize).max(1);
    let sizes = LabSizes {
        identity: scaled(d.identity),
        probabilistic: scaled(d.probabilistic),
        median: scaled(d.median),
        simplex: scaled(d.simplex),
    };
    let checks = run_all(&sizes, args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate(a) => {
            let spec = GenerateSpec {
                k: a.k,
                n: a.n,
                d: a.d,
                sigma: a.sigma,
                separation: a.separation,
                full: a.full,
                seed: a.seed,
            };
            emit(&generate(&spec)?.to_json(), a.output.as_deref())?;
        }
        Command::Solve(a) => solve(a)?,
        Command::Bench(a) => bench(a)?,
        Command::VerifyLemmas(a) => {
            if !verify(a)? {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CHROMACLUST_LOG")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::BudgetExceeded { .. }) {
                eprintln!("hint: try --beam, or a smaller --sample-cap or --grid-cap");
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
