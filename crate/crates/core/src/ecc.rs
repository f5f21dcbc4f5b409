//! Linear error-correcting codes `Enc: {0,1}^k -> {0,1}^n` and their decoders.
//!
//! All codes are systematic: the first `k_in` codeword bits are the payload.
//! [`CodeKind::OracleBdd`] is a test double for an ideal bounded-distance
//! decoder: it succeeds exactly when at most `t = floor(n * beta)` bits were
//! flipped, which it checks against the transmitted codeword handed over by
//! the simulation harness through an [`OracleReference`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::primitives::{correctable_errors, BitString};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeKind {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "repetition3")]
    Repetition3,
    #[serde(rename = "oracle")]
    OracleBdd,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::Identity => "identity",
            CodeKind::Repetition3 => "repetition3",
            CodeKind::OracleBdd => "oracle",
        })
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CodeKind::Identity),
            "repetition3" => Ok(CodeKind::Repetition3),
            "oracle" => Ok(CodeKind::OracleBdd),
            other => Err(Error::Parse(format!("unknown code `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub k_in: usize,
    pub n_out: usize,
    /// Number of bit errors the decoder is guaranteed to correct.
    pub t: usize,
    pub kind: CodeKind,
}

impl CodeSpec {
    pub fn new(kind: CodeKind, k_in: usize, n_out: usize, beta: f64) -> Result<Self> {
        if k_in > n_out {
            return Err(Error::param(
                "code",
                format!("payload length {k_in} exceeds codeword length {n_out}"),
            ));
        }
        let t = match kind {
            CodeKind::Identity => {
                if k_in != n_out {
                    return Err(Error::param(
                        "code",
                        format!("identity code needs k_in = n_out, got {k_in} and {n_out}"),
                    ));
                }
                0
            }
            CodeKind::Repetition3 => {
                if n_out != 3 * k_in {
                    return Err(Error::param(
                        "code",
                        format!("repetition3 needs n_out = 3 * k_in, got {n_out} and {k_in}"),
                    ));
                }
                usize::from(k_in > 0)
            }
            CodeKind::OracleBdd => {
                if !(0.0..=0.5).contains(&beta) {
                    return Err(Error::param("beta", format!("{beta} is not in [0, 1/2]")));
                }
                correctable_errors(n_out, beta)
            }
        };
        Ok(Self { k_in, n_out, t, kind })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded(BitString),
    Failure,
}

impl DecodeOutcome {
    pub fn payload(&self) -> Option<&BitString> {
        match self {
            DecodeOutcome::Decoded(p) => Some(p),
            DecodeOutcome::Failure => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, DecodeOutcome::Failure)
    }
}

/// The transmitted codeword, visible only to the oracle decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReference(BitString);

impl OracleReference {
    pub fn new(codeword: BitString) -> Self {
        Self(codeword)
    }

    pub fn codeword(&self) -> &BitString {
        &self.0
    }
}

pub fn encode(spec: &CodeSpec, payload: &BitString) -> Result<BitString> {
    if payload.len() != spec.k_in {
        return Err(Error::LengthMismatch {
            expected: spec.k_in,
            actual: payload.len(),
        });
    }
    Ok(match spec.kind {
        CodeKind::Identity => payload.clone(),
        CodeKind::Repetition3 => payload.concat(payload).concat(payload),
        // Redundancy bit j repeats payload bit j mod k_in.
        CodeKind::OracleBdd => {
            let k = spec.k_in;
            let parity = (0..spec.n_out - k).map(|j| k > 0 && payload.get(j % k));
            payload.iter().chain(parity).collect()
        }
    })
}

pub fn decode(
    spec: &CodeSpec,
    received: &BitString,
    reference: Option<&OracleReference>,
) -> Result<DecodeOutcome> {
    if received.len() != spec.n_out {
        return Err(Error::LengthMismatch {
            expected: spec.n_out,
            actual: received.len(),
        });
    }
    Ok(match spec.kind {
        CodeKind::Identity => DecodeOutcome::Decoded(received.clone()),
        CodeKind::Repetition3 => {
            let k = spec.k_in;
            DecodeOutcome::Decoded(
                (0..k)
                    .map(|i| {
                        let votes = [i, i + k, i + 2 * k]
                            .iter()
                            .filter(|&&j| received.get(j))
                            .count();
                        votes >= 2
                    })
                    .collect(),
            )
        }
        CodeKind::OracleBdd => {
            let reference = reference.ok_or_else(|| {
                Error::param("code", "oracle decoder needs the transmitted codeword")
            })?;
            let codeword = reference.codeword();
            if received.hamming_distance(codeword)? <= spec.t {
                DecodeOutcome::Decoded(codeword.slice(0..spec.k_in))
            } else {
                DecodeOutcome::Failure
            }
        }
    })
}
