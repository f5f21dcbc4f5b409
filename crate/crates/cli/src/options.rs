//! Protocol and budget options shared by every subcommand.
//!
//! The same struct is parsed from flags and from a JSON config file; flags
//! win over the file, the file wins over the defaults.

use std::path::Path;

use clap::Args;
use serde::Deserialize;

use qkr_core::analysis;
use qkr_core::ecc::CodeKind;
use qkr_core::primitives::{Encoding, ProtocolParams};
use qkr_core::qsim::{ChannelKind, ChannelModel};

use crate::CliError;

pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_ELL: usize = 256;
pub const DEFAULT_KAPPA: usize = 256;
pub const DEFAULT_LAMBDA: usize = 64;
pub const DEFAULT_ALPHA: u32 = 64;
pub const DEFAULT_BETA: f64 = 0.125;
pub const DEFAULT_ROUNDS: u64 = 100;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// JSON file with any of the options below (keys use underscores)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<std::path::PathBuf>,

    /// Qubits per round
    #[arg(long)]
    pub n: Option<usize>,
    /// Augmented message length |mu| + 2 lambda
    #[arg(long)]
    pub ell: Option<usize>,
    /// Privacy-amplification padding bits
    #[arg(long)]
    pub kappa: Option<usize>,
    /// MAC tag length: 8, 16, 32, 64 or 128
    #[arg(long)]
    pub lambda: Option<usize>,
    /// Correctable error fraction
    #[arg(long)]
    pub beta: Option<f64>,
    /// Channel bit error rate
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fraction of qubits intercepted and resent
    #[arg(long)]
    pub eta: Option<f64>,
    /// Target security level in bits
    #[arg(long)]
    pub alpha: Option<u32>,
    /// Bits of basis randomness drawn per Reject [default: smallest safe value]
    #[arg(long = "q-bits")]
    #[serde(alias = "q-bits")]
    pub q_bits: Option<usize>,
    /// Qubit encoding: bb84 or six-state
    #[arg(long)]
    pub encoding: Option<Encoding>,
    /// Error-correcting code: identity, repetition3 or oracle
    #[arg(long)]
    pub code: Option<CodeKind>,
    /// Protocol rounds
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Seed for every random stream
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reservoir size in bits [default: unlimited]
    #[arg(long = "reservoir-capacity")]
    #[serde(alias = "reservoir-capacity")]
    pub reservoir_capacity: Option<u64>,
}

/// Options with every default filled in.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub params: ProtocolParams,
    pub code: CodeKind,
    pub gamma: f64,
    pub eta: f64,
    pub alpha: u32,
    pub rounds: u64,
    pub seed: u64,
    pub reservoir_capacity: Option<u64>,
    /// Whether `kappa` and `q_bits` were given explicitly.
    pub kappa_given: bool,
    pub q_bits_given: bool,
}

impl Options {
    fn load(path: &Path) -> Result<Options, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    fn or(self, other: Options) -> Options {
        Options {
            config: self.config,
            n: self.n.or(other.n),
            ell: self.ell.or(other.ell),
            kappa: self.kappa.or(other.kappa),
            lambda: self.lambda.or(other.lambda),
            beta: self.beta.or(other.beta),
            gamma: self.gamma.or(other.gamma),
            eta: self.eta.or(other.eta),
            alpha: self.alpha.or(other.alpha),
            q_bits: self.q_bits.or(other.q_bits),
            encoding: self.encoding.or(other.encoding),
            code: self.code.or(other.code),
            rounds: self.rounds.or(other.rounds),
            seed: self.seed.or(other.seed),
            reservoir_capacity: self.reservoir_capacity.or(other.reservoir_capacity),
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let merged = match &self.config {
            Some(path) => self.clone().or(Options::load(path)?),
            None => self.clone(),
        };
        let n = merged.n.unwrap_or(DEFAULT_N);
        let alpha = merged.alpha.unwrap_or(DEFAULT_ALPHA);
        let q_bits = match merged.q_bits {
            Some(q) => q,
            None => usize::try_from(analysis::min_q_bits(n, alpha))
                .map_err(|_| CliError::Usage("q_bits does not fit in memory".into()))?,
        };
        Ok(Resolved {
            params: ProtocolParams {
                n,
                ell: merged.ell.unwrap_or(DEFAULT_ELL),
                kappa: merged.kappa.unwrap_or(DEFAULT_KAPPA),
                lambda: merged.lambda.unwrap_or(DEFAULT_LAMBDA),
                beta: merged.beta.unwrap_or(DEFAULT_BETA),
                encoding: merged.encoding.unwrap_or(Encoding::SixState),
                q_bits,
            },
            code: merged.code.unwrap_or(CodeKind::OracleBdd),
            gamma: merged.gamma.unwrap_or(0.0),
            eta: merged.eta.unwrap_or(0.0),
            alpha,
            rounds: merged.rounds.unwrap_or(DEFAULT_ROUNDS),
            seed: merged.seed.unwrap_or(0),
            reservoir_capacity: merged.reservoir_capacity,
            kappa_given: merged.kappa.is_some(),
            q_bits_given: merged.q_bits.is_some(),
        })
    }
}

impl Resolved {
    /// Intercept-resend when `eta > 0`, otherwise i.i.d. flips.
    pub fn channel(&self) -> Result<ChannelModel, CliError> {
        let kind = if self.eta > 0.0 {
            ChannelKind::InterceptResend
        } else {
            ChannelKind::IidFlip
        };
        Ok(ChannelModel::new(kind, self.gamma, self.eta)?)
    }
}
