use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wismc_cli::commands::{self, Options};
use wismc_cli::{CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "wismc", version, about = "Weighted-indexed semi-Markov models of high-frequency returns")]
struct Cli {
    /// Worker threads for per-symbol and per-replication work.
    #[arg(long, global = true, env = "WISMC_JOBS")]
    jobs: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample tick files onto a common grid and write returns.
    Ingest(RunArgs),
    /// Estimate a kernel per symbol and a follower kernel per pair.
    Estimate(RunArgs),
    /// Simulate synthetic series from the estimated models.
    Simulate(RunArgs),
    /// ACF reports and real-vs-synthetic cross-correlation comparison.
    Analyze(RunArgs),
    /// Ingest, estimate, simulate and analyze in one go.
    Run(RunArgs),
    /// Compare two cross-correlation matrix CSVs.
    Compare {
        /// Real correlation matrix CSV.
        #[arg(long)]
        real: PathBuf,
        /// Synthetic correlation matrix CSV.
        #[arg(long)]
        synth: PathBuf,
        /// Also write comparison.csv and comparison.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic length in minutes.
    #[arg(long)]
    horizon: Option<usize>,
    /// Synthetic series per symbol.
    #[arg(long)]
    replications: Option<usize>,
    /// Minutes discarded before each synthetic series.
    #[arg(long)]
    warmup: Option<usize>,
    /// Largest ACF lag reported.
    #[arg(long)]
    max_lag: Option<usize>,
    /// Use artifacts produced under a different configuration.
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if self.warmup.is_some() {
            cfg.warmup = self.warmup;
        }
        if let Some(l) = self.max_lag {
            cfg.max_lag = l;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let opts = |a: &RunArgs| Options {
        force: a.force,
        jobs: cli.jobs,
    };
    match &cli.command {
        Command::Ingest(a) => {
            let m = commands::ingest(&a.load()?, &opts(a))?;
            for s in &m.symbols {
                println!("{}: {} ticks -> {} prices -> {} returns", s.symbol, s.ticks, s.prices, s.returns);
            }
        }
        Command::Estimate(a) => print_estimate(&commands::estimate(&a.load()?, &opts(a))?),
        Command::Simulate(a) => print_simulate(&commands::simulate(&a.load()?, &opts(a))?),
        Command::Analyze(a) => print_analyze(&commands::analyze(&a.load()?, &opts(a))?),
        Command::Run(a) => {
            let cfg = a.load()?;
            let o = opts(a);
            commands::ingest(&cfg, &o)?;
            print_estimate(&commands::estimate(&cfg, &o)?);
            print_simulate(&commands::simulate(&cfg, &o)?);
            print_analyze(&commands::analyze(&cfg, &o)?);
        }
        Command::Compare { real, synth, out } => {
            print!("{}", commands::compare(real, synth, out.as_deref())?);
        }
    }
    Ok(())
}

fn print_estimate(r: &commands::EstimateReport) {
    for s in &r.symbols {
        println!("{}: lambda {} from {} minutes, {} transitions", s.symbol, s.lambda, s.sample_len, s.transitions);
    }
    for f in &r.followers {
        println!("{} follows {}: {} contexts", f.symbol, f.leader, f.contexts);
    }
}

fn print_simulate(m: &commands::SimulateManifest) {
    println!(
        "{} series, {} minutes each, seed {}",
        m.series.len(),
        m.horizon,
        m.seed
    );
}

fn print_analyze(s: &commands::AnalyzeSummary) {
    for a in &s.acf {
        println!(
            "{}: squared-return ACF lag 1 real {:.3} synth {:.3}, L2 distance {:.3}",
            a.symbol, a.real_acf_squared_lag1, a.synth_acf_squared_lag1, a.acf_squared_distance
        );
    }
    if let Some(r) = &s.ratios {
        match r.median {
            Some(m) => println!("median reproduction ratio {m:.2}"),
            None => println!("no pair above the noise floor {}", r.noise_floor),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
