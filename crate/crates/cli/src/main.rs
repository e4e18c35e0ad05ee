use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exact_multinom_cli::bench::{self, BenchConfig, BenchShape};
use exact_multinom_cli::request::{InferRequest, Overrides};
use exact_multinom_cli::simulate::{self, Scenario};
use exact_multinom_cli::{run_infer, stability, CliError};

#[derive(Parser)]
#[command(name = "exact-multinom", version, about = "Exact inference for functions of multinomial probabilities")]
struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Input JSON file, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of candidate chunks.
    #[arg(long)]
    maxit: Option<usize>,
    /// Candidates per chunk.
    #[arg(long)]
    chunksize: Option<usize>,
    /// Early-stop threshold for the reported p-value.
    #[arg(long)]
    threshold: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            alpha: self.alpha,
            maxit: self.maxit,
            chunksize: self.chunksize,
            threshold: self.threshold,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate, p-value and/or confidence interval for one dataset (JSON out).
    Infer {
        #[command(flatten)]
        common: Common,
        /// Include the running p-value trace.
        #[arg(long)]
        trace: bool,
    },
    /// Coverage simulation for a scenario file (CSV out).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides the scenario's replicate count.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Running p-value traces for one dataset at several null values (CSV out).
    Stability {
        #[command(flatten)]
        common: Common,
        /// Null values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        psi0: Vec<f64>,
    },
    /// Enumeration and p-value timings (CSV out).
    Bench {
        #[command(flatten)]
        common: Common,
        /// Shape as `k,d,n`; repeatable.
        #[arg(long = "shape", required = true)]
        shapes: Vec<BenchShape>,
        /// Timed runs per shape; the median is reported.
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
}

fn read_input(path: &str) -> Result<String, CliError> {
    let mut text = String::new();
    let result = if path == "-" {
        io::stdin().read_to_string(&mut text)
    } else {
        File::open(path).and_then(|mut f| f.read_to_string(&mut text))
    };
    result.map_err(|source| CliError::Input(format!("cannot read {path}: {source}")))?;
    Ok(text)
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Infer { common, trace } => {
            let mut request = InferRequest::from_json(&read_input(&common.input)?)?;
            request.apply(&common.overrides());
            let result = run_infer(&request, trace)?;
            let mut out = open_output(&common.output)?;
            let text = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Internal(format!("json output failed: {e}")))?;
            writeln!(out, "{text}")
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "output".into(), source })
        }
        Command::Simulate { common, replicates } => {
            let mut scenario = Scenario::from_json(&read_input(&common.input)?)?;
            if let Some(seed) = common.seed {
                scenario.seed = seed;
            }
            if let Some(alpha) = common.alpha {
                scenario.alpha = alpha;
            }
            if let Some(maxit) = common.maxit {
                scenario.maxit = maxit;
            }
            if let Some(chunksize) = common.chunksize {
                scenario.chunksize = chunksize;
            }
            if let Some(r) = replicates {
                scenario.replicates = r;
            }
            let rows = scenario.prepare()?.run()?;
            simulate::write_csv(open_output(&common.output)?, &rows)
        }
        Command::Stability { common, psi0 } => {
            let mut request = InferRequest::from_json(&read_input(&common.input)?)?;
            request.apply(&common.overrides());
            let traces = stability::stability_traces(&request, &psi0)?;
            stability::write_csv(open_output(&common.output)?, &traces)
        }
        Command::Bench { common, shapes, runs } => {
            let defaults = BenchConfig::default();
            let config = BenchConfig {
                runs,
                maxit: common.maxit.unwrap_or(defaults.maxit),
                chunksize: common.chunksize.unwrap_or(defaults.chunksize),
                seed: common.seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let rows = shapes
                .into_iter()
                .map(|s| bench::bench_shape(s, &config))
                .collect::<Result<Vec<_>, _>>()?;
            bench::write_csv(open_output(&common.output)?, &rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
