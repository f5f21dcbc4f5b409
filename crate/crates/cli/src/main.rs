//! `qkr`: run recycling sessions, sweep the security bound and rate, and
//! replay simple attacks. Output is JSON or CSV.

mod options;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qkr_core::analysis::{self, SecurityBudget};
use qkr_core::primitives::{Encoding, RandomSource};
use qkr_core::protocol::{self, MessageSource, SessionConfig};
use qkr_core::qsim;
use qkr_core::Error;

use options::{Options, Resolved};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Exhausted(String),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ReservoirExhausted { .. } => CliError::Exhausted(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qkr", version, about = "Quantum key recycling laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a session and print its summary as JSON
    Run {
        #[command(flatten)]
        options: Options,
        /// Write one JSON line per round here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate rate, correction probability and bound terms as CSV
    Sweep {
        #[command(flatten)]
        options: Options,
        #[arg(long, value_enum)]
        variable: SweepVariable,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        /// Number of rows, at least 2
        #[arg(long)]
        steps: usize,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the security bound and key-expenditure figures for one budget
    Bound {
        #[command(flatten)]
        options: Options,
    },
    /// Measure the effect of an attack
    Attack {
        #[arg(value_enum)]
        kind: AttackKind,
        #[command(flatten)]
        options: Options,
        /// Qubits sent through the channel for the error-rate estimate
        #[arg(long, default_value_t = 100_000)]
        qubits: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepVariable {
    Gamma,
    N,
    #[value(name = "q-bits", alias = "q_bits")]
    QBits,
}

impl SweepVariable {
    fn column(self) -> &'static str {
        match self {
            SweepVariable::Gamma => "gamma",
            SweepVariable::N => "n",
            SweepVariable::QBits => "q_bits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackKind {
    #[value(name = "intercept-resend", alias = "intercept_resend")]
    InterceptResend,
    #[value(name = "tamper-fuzz", alias = "tamper_fuzz")]
    TamperFuzz,
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn session_config(r: &Resolved) -> Result<SessionConfig, CliError> {
    Ok(SessionConfig {
        params: r.params,
        code: r.code,
        channel: r.channel()?,
        rounds: r.rounds,
        seed: r.seed,
        reservoir_capacity: r.reservoir_capacity,
        messages: MessageSource::Uniform,
    })
}

fn cmd_run(options: &Options, out: Option<&PathBuf>) -> Result<(), CliError> {
    let config = session_config(&options.resolve()?)?;
    let mut log = match out {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut write_error = None;
    let result = protocol::run_session_with(&config, |round| {
        if let Some(w) = log.as_mut() {
            let line = serde_json::to_string(round).map_err(io::Error::from);
            if let Err(e) = line.and_then(|l| writeln!(w, "{l}")) {
                write_error.get_or_insert(e);
            }
        }
    });
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    if let Some(e) = write_error {
        return Err(e.into());
    }
    write_json(&mut io::stdout().lock(), &result?)
}

fn sweep_values(variable: SweepVariable, start: f64, stop: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 {
        return Err(CliError::Usage(format!("steps must be at least 2, got {steps}")));
    }
    if !start.is_finite() || !stop.is_finite() {
        return Err(CliError::Usage("start and stop must be finite".into()));
    }
    let values = (0..steps).map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64);
    Ok(match variable {
        SweepVariable::Gamma => values.collect(),
        SweepVariable::N | SweepVariable::QBits => {
            if start < 0.0 || stop < 0.0 {
                return Err(CliError::Usage(format!("{} must be non-negative", variable.column())));
            }
            values.map(f64::round).collect()
        }
    })
}

/// Budget for one sweep row. Unless given explicitly, `q_bits` follows
/// `min_q_bits(n, alpha)` and `kappa` takes whatever the asymptotic
/// error-correction redundancy `n h(gamma)` leaves beside `ell`.
fn sweep_budget(r: &Resolved, variable: SweepVariable, value: f64) -> Result<SecurityBudget, Error> {
    let mut n = r.params.n;
    let mut gamma = r.gamma;
    let mut q_bits = r.params.q_bits;
    match variable {
        SweepVariable::Gamma => gamma = value,
        SweepVariable::N => n = value as usize,
        SweepVariable::QBits => q_bits = value as usize,
    }
    if variable == SweepVariable::N && !r.q_bits_given {
        q_bits = analysis::min_q_bits(n, r.alpha) as usize;
    }
    let kappa = if r.kappa_given {
        r.params.kappa
    } else {
        let redundancy = analysis::required_redundancy(n, gamma)?.ceil() as usize;
        n.saturating_sub(redundancy).saturating_sub(r.params.ell)
    };
    Ok(SecurityBudget {
        alpha: r.alpha as f64,
        lambda: r.params.lambda,
        n,
        kappa,
        gamma,
        beta: r.params.beta,
        q_bits,
    })
}

fn sweep_row(variable: SweepVariable, value: f64, budget: &SecurityBudget) -> Result<String, Error> {
    let report = analysis::diamond_bound(budget)?;
    let rate = analysis::asymptotic_rate_6state(budget.gamma)?;
    let p_corr = analysis::p_corr(budget.n, budget.beta, budget.gamma);
    let key = match variable {
        SweepVariable::Gamma => value.to_string(),
        SweepVariable::N | SweepVariable::QBits => (value as u64).to_string(),
    };
    Ok(format!(
        "{key},{rate},{p_corr},{},{},{},{}",
        report.log2_total, report.log2_tag, report.log2_reject, report.log2_accept
    ))
}

fn cmd_sweep(
    options: &Options,
    variable: SweepVariable,
    start: f64,
    stop: f64,
    steps: usize,
    out: Option<&PathBuf>,
) -> Result<(), CliError> {
    let resolved = options.resolve()?;
    let values = sweep_values(variable, start, stop, steps)?;
    let mut w = output(out)?;
    writeln!(
        w,
        "{},rate,p_corr,log2_bound_total,log2_term_tag,log2_term_reject,log2_term_accept",
        variable.column()
    )?;
    for value in values {
        match sweep_budget(&resolved, variable, value).and_then(|b| sweep_row(variable, value, &b)) {
            Ok(row) => writeln!(w, "{row}")?,
            Err(e) => eprintln!("skipping {}={value}: {e}", variable.column()),
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BoundOutput {
    budget: SecurityBudget,
    report: analysis::BoundReport,
    rate: Option<f64>,
    p_corr: f64,
    min_q_bits: u64,
    reject_expenditure: u64,
    reject_expenditure_closed_form: f64,
    required_redundancy: f64,
}

fn cmd_bound(options: &Options) -> Result<(), CliError> {
    let r = options.resolve()?;
    let p = r.params;
    let budget = SecurityBudget {
        alpha: r.alpha as f64,
        lambda: p.lambda,
        n: p.n,
        kappa: p.kappa,
        gamma: r.gamma,
        beta: p.beta,
        q_bits: p.q_bits,
    };
    let result = BoundOutput {
        budget,
        report: analysis::diamond_bound(&budget)?,
        rate: analysis::asymptotic_rate(p.encoding, r.gamma).ok(),
        p_corr: analysis::p_corr(p.n, p.beta, r.gamma),
        min_q_bits: analysis::min_q_bits(p.n, r.alpha),
        reject_expenditure: analysis::reject_expenditure(p.n, p.lambda, p.q_bits),
        reject_expenditure_closed_form: analysis::reject_expenditure_closed_form(p.n, p.lambda, r.alpha),
        required_redundancy: analysis::required_redundancy(p.n, r.gamma)?,
    };
    write_json(&mut io::stdout().lock(), &result)
}

#[derive(Serialize)]
struct InterceptReport {
    kind: &'static str,
    encoding: Encoding,
    eta: f64,
    gamma: f64,
    qubits: usize,
    errors: usize,
    induced_error_rate: f64,
    /// `eta e + gamma - 2 eta e gamma` with `e` the full-attack error rate.
    expected_error_rate: f64,
    rounds: u64,
    rejects: u64,
    reject_rate: f64,
}

#[derive(Serialize)]
struct TamperReport {
    kind: &'static str,
    lambda: usize,
    #[serde(flatten)]
    report: protocol::FuzzReport,
}

fn cmd_attack(kind: AttackKind, options: &Options, qubits: usize, out: Option<&PathBuf>) -> Result<(), CliError> {
    let r = options.resolve()?;
    let mut w = output(out)?;
    match kind {
        AttackKind::InterceptResend => {
            let encoding = r.params.encoding;
            let channel = r.channel()?;
            let mut src = RandomSource::new(r.seed, "attack/intercept-resend");
            let (errors, induced) = qsim::measure_error_rate(&channel, encoding, qubits, &mut src);
            let e = r.eta * qsim::intercept_resend_error_rate(encoding);
            let summary = protocol::run_session_with(&session_config(&r)?, |_| {})?;
            let report = InterceptReport {
                kind: "intercept_resend",
                encoding,
                eta: r.eta,
                gamma: r.gamma,
                qubits,
                errors,
                induced_error_rate: induced,
                expected_error_rate: e + r.gamma - 2.0 * e * r.gamma,
                rounds: summary.rounds,
                rejects: summary.rounds - summary.accepts,
                reject_rate: 1.0 - summary.accept_rate,
            };
            write_json(&mut w, &report)
        }
        AttackKind::TamperFuzz => {
            let report = protocol::tamper_fuzz(&r.params, r.rounds, r.seed)?;
            write_json(
                &mut w,
                &TamperReport {
                    kind: "tamper_fuzz",
                    lambda: r.params.lambda,
                    report,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { options, out } => cmd_run(options, out.as_ref()),
        Command::Sweep {
            options,
            variable,
            start,
            stop,
            steps,
            out,
        } => cmd_sweep(options, *variable, *start, *stop, *steps, out.as_ref()),
        Command::Bound { options } => cmd_bound(options),
        Command::Attack {
            kind,
            options,
            qubits,
            out,
        } => cmd_attack(*kind, options, *qubits, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Exhausted(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
