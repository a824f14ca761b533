use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idfield::bench::suites::{run_suite, SUITES};
use idfield::bench::{self, estimate_csv, ExperimentConfig, Method, MethodSetup};
use idfield::simulate::{sample_field, seeded_rng, GridSample, DEFAULT_MAX_CELLS};
use idfield::{Error, Result};

#[derive(Parser)]
#[command(name = "idfield", version, about = "Lévy density recovery for ID moving-average fields")]
struct Cli {
    /// Print info-level messages as well as warnings.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one field sample to CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Replication stream.
        #[arg(long, default_value_t = 0)]
        rep: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate g₀ = h·v₀ from a sample CSV.
    Estimate {
        #[arg(long)]
        method: String,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Omit the g0_true column.
        #[arg(long)]
        no_truth: bool,
    },
    /// Monte Carlo MSE benchmark.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Record per-replication runtimes (makes outputs run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Run a validation suite.
    Validate {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

struct StderrLogger {
    level: log::LevelFilter,
}

impl log::Log for StderrLogger {
    fn enabled(&self, meta: &log::Metadata) -> bool {
        meta.level() <= self.level
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate { config, seed, rep, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let kernel = cfg.kernel_model()?;
            let law = cfg.jump_law.build()?;
            let mut rng = seeded_rng(seed.unwrap_or(cfg.master_seed), rep);
            let sample = sample_field(&kernel, &law, &cfg.window, cfg.mesh, &mut rng, DEFAULT_MAX_CELLS)?;
            sample.write_csv(&out)
        }
        Cmd::Estimate { method, sample, config, out, no_truth } => {
            let cfg = ExperimentConfig::load(&config)?;
            let method = Method::parse(&method)?;
            let data = GridSample::read_csv(&sample, cfg.mesh)?;
            let setup = MethodSetup::new(&cfg, method)?;
            let est = setup.estimate(&data)?;
            let truth = (!no_truth).then_some(&setup.g0_true);
            bench::write_file(&out, &estimate_csv(&est, truth))
        }
        Cmd::Bench { config, reps, seed, out, threads, timing } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let reps = reps.unwrap_or(cfg.reps);
            cfg.reps = reps;
            let records = bench::run_bench(&cfg, reps, threads)?;
            bench::emit_outputs(&cfg, reps, &records, &out, timing)?;
            for s in bench::summarize(&records) {
                println!("{} {}: mean MSE {:.6e}, sd {:.6e} over {} reps", s.method.name(), s.law, s.mean, s.sd, s.reps);
            }
            Ok(())
        }
        Cmd::Validate { suite, config, reps } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Error::Config(format!("unknown suite {suite:?}; expected one of {SUITES:?}")));
            }
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let report = run_suite(&suite, &cfg, reps)?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Precondition(format!("suite {suite} has failing checks")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let logger: &'static StderrLogger = Box::leak(Box::new(StderrLogger { level }));
    if log::set_logger(logger).is_ok() {
        log::set_max_level(level);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
