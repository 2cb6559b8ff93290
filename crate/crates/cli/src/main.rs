mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, ThetaArg};
use gelation::mdpcheck::{AnRule, ScanStatistic};
use gelation::simulate::Statistic;
use output::Format;

/// Exact and Monte Carlo computations for the component structure of G(n, c/n).
#[derive(Debug, Parser)]
#[command(name = "gelation", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GELATION_THREADS")]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default depends on the command).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve T e^{-T} = c e^{-c}.
    Duality {
        #[arg(long)]
        c: f64,
    },
    /// Connectivity probabilities μ_k(c/n) with sandwich bounds.
    Mu {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        #[arg(long = "k-max")]
        k_max: usize,
        #[arg(long = "exact-rational")]
        exact_rational: bool,
    },
    /// Truncated jump law and its moments.
    Jumplaw {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "auto")]
        theta: ThetaArg,
    },
    /// Exact conditional laws from the Panjer recursion.
    Panjer {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "auto")]
        theta: ThetaArg,
        /// hit, max, count:<k>, N, fra:<m> or knbeta:<beta>.
        #[arg(long)]
        what: String,
        /// Speed for knbeta: pow:<rho> or sqrt_log.
        #[arg(long, default_value = "pow:0.25")]
        an: AnRule,
    },
    /// Exact component-profile law by partition enumeration.
    Exact {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        /// Enumerate all graphs instead (n <= 6).
        #[arg(long = "brute-force")]
        brute_force: bool,
    },
    /// Monte Carlo samples of component statistics.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        replicas: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "cmax,cn,t:1,t:2")]
        track: Vec<Statistic>,
        /// Emit mean and variance summaries instead of raw samples.
        #[arg(long)]
        summary: bool,
    },
    /// Rate functions: mdp, grand, ldp:<x>, thresholds:<kmax>, empirical:<file>.
    Rates {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        what: String,
        /// Largest k for the per-size rates.
        #[arg(long = "k-max", default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value = "auto")]
        theta: ThetaArg,
    },
    /// Exact window probabilities along an n-grid, scaled by a_n².
    MdpScan {
        #[arg(long)]
        c: f64,
        /// max, count:<k>, N or grand_sum.
        #[arg(long)]
        stat: ScanStatistic,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value = "pow:0.25")]
        an: AnRule,
        #[arg(long, default_value_t = gelation::mdpcheck::DEFAULT_DELTA)]
        delta: f64,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.to_string()))?;
    let (meta, body, default_format) = pool.install(|| commands::dispatch(&cli.cmd))?;
    let text = output::render(&meta, &body, cli.format.unwrap_or(default_format));
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
