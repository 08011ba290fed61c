//! `bellscope`: Bell-test tables, audits and simulations from the command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 computation error, 4 input-file
//! error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bellscope::chsh::{LeakConvention, PartyVariant};
use output::Format;

#[derive(Parser)]
#[command(
    name = "bellscope",
    version,
    about = "CHSH and CGLMP Bell operators, fair-sampling audits and witness bounds"
)]
struct Cli {
    /// Output format. Pretty and CSV print 6 significant digits; JSON keeps
    /// full precision.
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    /// Classically correlated four-level state probed in different subspaces.
    Separable4,
    /// Four-level state measured with leakage states.
    AnomalousR,
    /// Two-qubit test at the standard angles.
    Standard,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Convention {
    /// `r` is the amplitude on the leakage subspace.
    Leakage,
    /// `r` is the amplitude on the intended subspace.
    Target,
}

impl From<Convention> for LeakConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Leakage => LeakConvention::Leakage,
            Convention::Target => LeakConvention::Target,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    Symmetric,
    Asymmetric,
}

impl From<Variant> for PartyVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Symmetric => PartyVariant::Symmetric,
            Variant::Asymmetric => PartyVariant::Asymmetric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact and postselected CHSH values plus the fair-sampling verdict.
    ChshDemo {
        #[arg(long, value_enum)]
        scenario: Scenario,
        /// Leakage parameter for `anomalous-r`; defaults to the maximiser.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_enum, default_value_t = Convention::Leakage)]
        convention: Convention,
        #[arg(long, value_enum, default_value_t = Variant::Symmetric)]
        variant: Variant,
    },
    /// s1, s2, S_me and S_bound for a range of d.
    CglmpTable {
        #[arg(long, default_value_t = 2)]
        dmin: usize,
        #[arg(long, default_value_t = 32)]
        dmax: usize,
        /// Allow d beyond the validated range.
        #[arg(long)]
        unchecked: bool,
    },
    /// Is a measured S_d above the (d-1)-dimensional bound?
    Certify {
        #[arg(long)]
        d: usize,
        #[arg(long = "S", allow_negative_numbers = true)]
        s: f64,
        #[arg(long)]
        sigma: f64,
    },
    /// Fair-sampling audit of a JSON measurement set.
    Audit {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value_t = bellscope::measurements::DEFAULT_AUDIT_TOL)]
        tol: f64,
    },
    /// Monte Carlo counts for a JSON experiment plan.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Postselected S as a function of the leakage parameter.
    ScanR {
        /// Grid points across [lo, hi].
        #[arg(long, default_value_t = 141)]
        steps: usize,
        #[arg(long, default_value_t = 0.005)]
        lo: f64,
        #[arg(long, default_value_t = 0.705)]
        hi: f64,
        #[arg(long, value_enum, default_value_t = Convention::Leakage)]
        convention: Convention,
        #[arg(long, value_enum, default_value_t = Variant::Symmetric)]
        variant: Variant,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn compute(message: impl std::fmt::Display) -> Self {
        CliError { code: 3, message: message.to_string() }
    }

    /// Unreadable, unwritable or malformed files.
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BELLSCOPE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("BELLSCOPE_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::compute(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (out, status) = match cli.command {
        Command::ChshDemo { scenario, r, convention, variant } => {
            (commands::chsh_demo(scenario, r, convention.into(), variant.into())?, Ok(()))
        }
        Command::CglmpTable { dmin, dmax, unchecked } => commands::cglmp_table(dmin, dmax, unchecked)?,
        Command::Certify { d, s, sigma } => (commands::certify(d, s, sigma)?, Ok(())),
        Command::Audit { measurements, tol } => (commands::audit(&measurements, tol)?, Ok(())),
        Command::Simulate { plan } => (commands::simulate(&plan)?, Ok(())),
        Command::ScanR { steps, lo, hi, convention, variant } => {
            (commands::scan_r(steps, lo, hi, convention.into(), variant.into())?, Ok(()))
        }
    };
    let text = out.render(cli.format);
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    status
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
