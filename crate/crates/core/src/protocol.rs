//! One round of quantum key recycling and multi-round sessions.
//!
//! Round structure:
//!
//! 1. Alice draws `r` and `k'`, tags `mu || k'` under `xi`, encodes
//!    `m || r` with `m = mu || k' || tau`, masks the codeword with `z` and
//!    prepares qubit `i` as payload `x_i` in basis `b_i`.
//! 2. Bob measures in `b`, unmasks, decodes and checks the tag.
//! 3. Bob returns `omega` with `tau_fb = Gamma(k, omega)`.
//! 4. On Accept both sides hash `x || b || r` into the next `z, b` and take
//!    `k'` as the next `k`. On Reject they draw `z`, `k` and `q` from the
//!    reservoir and set the next basis to `G_v(b || q)`. `xi`, `u` and `v`
//!    are reused either way.

use serde::{Deserialize, Serialize};

use crate::ecc::{self, CodeKind, CodeSpec, DecodeOutcome, OracleReference};
use crate::hashing::{self, FSeed, MacKey, ToeplitzSeed};
use crate::primitives::{BasisString, BitString, ProtocolParams, RandomSource};
use crate::qsim::{self, ChannelModel, QubitSymbol};
use crate::{Error, Result};

/// Protocol parameters together with the agreed code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub params: ProtocolParams,
    pub code: CodeSpec,
}

impl Setup {
    pub fn new(params: ProtocolParams, code: CodeKind) -> Result<Self> {
        params.validate()?;
        let code = CodeSpec::new(code, params.ell + params.kappa, params.n, params.beta)?;
        Ok(Self { params, code })
    }
}

/// Secrets shared by Alice and Bob at the start of a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyState {
    pub z: BitString,
    pub b: BasisString,
    pub xi: MacKey,
    pub k: MacKey,
    pub u: FSeed,
    pub v: ToeplitzSeed,
}

impl KeyState {
    pub fn random(params: &ProtocolParams, src: &mut RandomSource) -> Result<Self> {
        let n = params.n;
        Ok(Self {
            z: src.bits(n),
            b: src.basis(params.encoding, n),
            xi: MacKey::new(src.bits(params.lambda))?,
            k: MacKey::new(src.bits(params.lambda))?,
            u: FSeed::random(n, params.kappa, params.encoding, src),
            v: hashing::random_g_seed(n, params.q_bits, params.encoding, src),
        })
    }

    pub fn check(&self, params: &ProtocolParams) -> Result<()> {
        let expect = |expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::LengthMismatch { expected, actual })
            }
        };
        expect(params.n, self.z.len())?;
        expect(params.n, self.b.len())?;
        expect(params.lambda, self.xi.lambda())?;
        expect(params.lambda, self.k.lambda())?;
        expect(params.n, self.u.mask.out_len())?;
        expect(params.n, self.v.out_len())?;
        if self.b.encoding() != params.encoding {
            return Err(Error::param("b", "basis string uses a different encoding"));
        }
        Ok(())
    }
}

/// Spare key material, tapped only on Reject.
#[derive(Debug)]
pub struct Reservoir {
    stream: RandomSource,
    consumed_bits: u64,
    capacity: Option<u64>,
}

impl Reservoir {
    /// `capacity = None` models an unbounded supply.
    pub fn new(stream: RandomSource, capacity: Option<u64>) -> Self {
        Self {
            stream,
            consumed_bits: 0,
            capacity,
        }
    }

    pub fn consumed_bits(&self) -> u64 {
        self.consumed_bits
    }

    pub fn remaining(&self) -> Option<u64> {
        self.capacity.map(|c| c - self.consumed_bits)
    }

    pub fn draw(&mut self, len: usize) -> Result<BitString> {
        let requested = len as u64;
        if let Some(remaining) = self.remaining() {
            if requested > remaining {
                return Err(Error::ReservoirExhausted {
                    requested,
                    remaining,
                });
            }
        }
        self.consumed_bits += requested;
        Ok(self.stream.bits(len))
    }
}

/// Alice's per-round values. Never leaves Alice's side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliceRoundSecrets {
    pub r: BitString,
    pub k_prime: BitString,
    pub tau: BitString,
    /// Augmented message `mu || k' || tau`.
    pub m: BitString,
    pub c: BitString,
    pub x: BitString,
}

/// The values an Accept update hashes: `x`, `r` and the next feedback key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptMaterial {
    pub x: BitString,
    pub r: BitString,
    pub k_prime: BitString,
}

impl AliceRoundSecrets {
    pub fn accept_material(&self) -> AcceptMaterial {
        AcceptMaterial {
            x: self.x.clone(),
            r: self.r.clone(),
            k_prime: self.k_prime.clone(),
        }
    }
}

pub fn alice_encrypt(
    setup: &Setup,
    keys: &KeyState,
    mu: &BitString,
    src: &mut RandomSource,
) -> Result<(Vec<QubitSymbol>, AliceRoundSecrets)> {
    let params = &setup.params;
    keys.check(params)?;
    if mu.len() != params.mu_len() {
        return Err(Error::LengthMismatch {
            expected: params.mu_len(),
            actual: mu.len(),
        });
    }
    let r = src.bits(params.kappa);
    let k_prime = src.bits(params.lambda);
    let tau = hashing::mac_tag(&keys.xi, &mu.concat(&k_prime));
    let m = mu.concat(&k_prime).concat(&tau);
    let c = ecc::encode(&setup.code, &m.concat(&r))?;
    let x = c.xor(&keys.z)?;
    let qubits = (0..params.n)
        .map(|i| QubitSymbol::new(keys.b.get(i), x.get(i)))
        .collect();
    Ok((
        qubits,
        AliceRoundSecrets {
            r,
            k_prime,
            tau,
            m,
            c,
            x,
        },
    ))
}

/// Bob's decoder output, split into message fields, before the tag check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedRound {
    pub mu_hat: BitString,
    pub k_hat_prime: BitString,
    pub tau_hat: BitString,
    pub r_hat: BitString,
}

/// Measures `qubits` in `keys.b`, removes the mask and runs the decoder.
/// `None` means the decoder reported failure.
pub fn bob_decode(
    setup: &Setup,
    keys: &KeyState,
    qubits: &[QubitSymbol],
    reference: Option<&OracleReference>,
) -> Result<Option<DecodedRound>> {
    let params = &setup.params;
    keys.check(params)?;
    if qubits.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            actual: qubits.len(),
        });
    }
    if qubits.iter().zip(keys.b.as_slice()).any(|(q, &b)| q.basis != b) {
        return Err(Error::param("qubits", "basis labels differ from the shared basis string"));
    }
    let x_prime: BitString = qubits.iter().map(|q| q.payload).collect();
    let c_prime = x_prime.xor(&keys.z)?;
    match ecc::decode(&setup.code, &c_prime, reference)? {
        DecodeOutcome::Failure => Ok(None),
        DecodeOutcome::Decoded(payload) => {
            let lambda = params.lambda;
            let parts = payload.split(&[params.mu_len(), lambda, lambda, params.kappa])?;
            let [mu_hat, k_hat_prime, tau_hat, r_hat]: [BitString; 4] =
                parts.try_into().expect("four parts");
            Ok(Some(DecodedRound {
                mu_hat,
                k_hat_prime,
                tau_hat,
                r_hat,
            }))
        }
    }
}

/// Bob's reconstruction after an Accept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobAccepted {
    pub mu_hat: BitString,
    pub k_hat_prime: BitString,
    pub r_hat: BitString,
    pub x_hat: BitString,
}

impl BobAccepted {
    pub fn accept_material(&self) -> AcceptMaterial {
        AcceptMaterial {
            x: self.x_hat.clone(),
            r: self.r_hat.clone(),
            k_prime: self.k_hat_prime.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobOutcome {
    pub omega: bool,
    /// Present exactly when `omega` is Accept.
    pub accepted: Option<BobAccepted>,
}

impl BobOutcome {
    pub fn mu_hat(&self) -> Option<&BitString> {
        self.accepted.as_ref().map(|a| &a.mu_hat)
    }
}

/// Accept iff decoding succeeded and `tau_hat` verifies; recomputes `x_hat`.
pub fn bob_verify(setup: &Setup, keys: &KeyState, decoded: Option<DecodedRound>) -> Result<BobOutcome> {
    let Some(d) = decoded else {
        return Ok(BobOutcome {
            omega: false,
            accepted: None,
        });
    };
    let tagged = d.mu_hat.concat(&d.k_hat_prime);
    if !hashing::mac_verify(&keys.xi, &tagged, &d.tau_hat) {
        return Ok(BobOutcome {
            omega: false,
            accepted: None,
        });
    }
    let m_hat = tagged.concat(&d.tau_hat);
    let c_hat = ecc::encode(&setup.code, &m_hat.concat(&d.r_hat))?;
    let x_hat = c_hat.xor(&keys.z)?;
    Ok(BobOutcome {
        omega: true,
        accepted: Some(BobAccepted {
            mu_hat: d.mu_hat,
            k_hat_prime: d.k_hat_prime,
            r_hat: d.r_hat,
            x_hat,
        }),
    })
}

pub fn bob_decrypt(
    setup: &Setup,
    keys: &KeyState,
    qubits: &[QubitSymbol],
    reference: Option<&OracleReference>,
) -> Result<BobOutcome> {
    let decoded = bob_decode(setup, keys, qubits, reference)?;
    bob_verify(setup, keys, decoded)
}

fn omega_message(omega: bool) -> BitString {
    BitString::new(vec![omega])
}

/// `tau_fb = Gamma(k, omega)`.
pub fn feedback(keys: &KeyState, omega: bool) -> BitString {
    hashing::mac_tag(&keys.k, &omega_message(omega))
}

pub fn alice_check_feedback(keys: &KeyState, omega: bool, tau_fb: &BitString) -> bool {
    hashing::mac_verify(&keys.k, &omega_message(omega), tau_fb)
}

/// Next round's keys. `material` must be present on Accept (Alice's
/// `x, r, k'` or Bob's `x_hat, r_hat, k_hat'`); the reservoir is touched only
/// on Reject, for exactly `n + lambda + q_bits` bits.
pub fn key_update(
    params: &ProtocolParams,
    keys: &KeyState,
    omega: bool,
    material: Option<&AcceptMaterial>,
    reservoir: &mut Reservoir,
) -> Result<KeyState> {
    if omega {
        let material =
            material.ok_or_else(|| Error::param("omega", "Accept update needs the round's x, r and k'"))?;
        let (z, b) = hashing::hash_f(&keys.u, &material.x, &keys.b, &material.r)?;
        Ok(KeyState {
            z,
            b,
            k: MacKey::new(material.k_prime.clone())?,
            ..keys.clone()
        })
    } else {
        let requested = (params.n + params.lambda + params.q_bits) as u64;
        if let Some(remaining) = reservoir.remaining() {
            if requested > remaining {
                return Err(Error::ReservoirExhausted {
                    requested,
                    remaining,
                });
            }
        }
        let z = reservoir.draw(params.n)?;
        let k = MacKey::new(reservoir.draw(params.lambda)?)?;
        let q = reservoir.draw(params.q_bits)?;
        let b = hashing::hash_g(&keys.v, &keys.b, &q)?;
        Ok(KeyState { z, b, k, ..keys.clone() })
    }
}

/// Everything Eve observes in one round: the qubits after her channel and
/// the authenticated feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub qubits: Vec<QubitSymbol>,
    pub omega: bool,
    pub tau_fb: BitString,
}

/// Outcome of one session round, as written to the JSON-lines log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: u64,
    pub omega: bool,
    pub mu_hat: Option<BitString>,
    pub tau_fb: BitString,
    /// Reservoir bits spent by the key update of this round.
    pub consumed_bits: u64,
    /// Payload flips introduced by the channel.
    pub errors_injected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSource {
    /// A fresh uniform plaintext every round.
    Uniform,
    /// The same plaintext every round.
    Fixed(BitString),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub params: ProtocolParams,
    pub code: CodeKind,
    pub channel: ChannelModel,
    pub rounds: u64,
    pub seed: u64,
    pub reservoir_capacity: Option<u64>,
    pub messages: MessageSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub rounds: u64,
    pub accepts: u64,
    pub accept_rate: f64,
    pub consumed_bits: u64,
    /// Rounds with `omega = 1` whose `mu_hat` differs from `mu`.
    pub mismatches: u64,
    /// Rounds after which Alice's and Bob's key states differ.
    pub desynchronized: u64,
}

/// A running session: both parties' keys and reservoirs plus the channel.
#[derive(Debug)]
pub struct Session {
    setup: Setup,
    channel: ChannelModel,
    messages: MessageSource,
    alice_keys: KeyState,
    bob_keys: KeyState,
    alice_reservoir: Reservoir,
    bob_reservoir: Reservoir,
    alice_rng: RandomSource,
    channel_rng: RandomSource,
    message_rng: RandomSource,
    round: u64,
}

impl Session {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        let setup = Setup::new(config.params, config.code)?;
        if let MessageSource::Fixed(mu) = &config.messages {
            if mu.len() != config.params.mu_len() {
                return Err(Error::LengthMismatch {
                    expected: config.params.mu_len(),
                    actual: mu.len(),
                });
            }
        }
        let root = RandomSource::new(config.seed, "session");
        let keys = KeyState::random(&config.params, &mut root.fork("initial-keys"))?;
        Ok(Self {
            setup,
            channel: config.channel,
            messages: config.messages.clone(),
            alice_keys: keys.clone(),
            bob_keys: keys,
            alice_reservoir: Reservoir::new(root.fork("reservoir"), config.reservoir_capacity),
            bob_reservoir: Reservoir::new(root.fork("reservoir"), config.reservoir_capacity),
            alice_rng: root.fork("alice"),
            channel_rng: root.fork("channel"),
            message_rng: root.fork("messages"),
            round: 0,
        })
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }

    pub fn alice_keys(&self) -> &KeyState {
        &self.alice_keys
    }

    pub fn bob_keys(&self) -> &KeyState {
        &self.bob_keys
    }

    pub fn consumed_bits(&self) -> u64 {
        self.alice_reservoir.consumed_bits()
    }

    /// Runs one round and returns the result with the plaintext Alice sent.
    pub fn step(&mut self) -> Result<(RoundResult, BitString)> {
        let params = self.setup.params;
        let mu = match &self.messages {
            MessageSource::Uniform => self.message_rng.bits(params.mu_len()),
            MessageSource::Fixed(mu) => mu.clone(),
        };
        let (sent, secrets) = alice_encrypt(&self.setup, &self.alice_keys, &mu, &mut self.alice_rng)?;
        let received = qsim::transmit(&self.channel, params.encoding, &sent, &mut self.channel_rng);
        let errors_injected = sent
            .iter()
            .zip(&received)
            .filter(|(a, b)| a.payload != b.payload)
            .count();

        let reference = OracleReference::new(secrets.c.clone());
        let outcome = bob_decrypt(&self.setup, &self.bob_keys, &received, Some(&reference))?;
        let omega = outcome.omega;
        let tau_fb = feedback(&self.bob_keys, omega);
        if !alice_check_feedback(&self.alice_keys, omega, &tau_fb) {
            return Err(Error::FeedbackRejected { round: self.round });
        }

        let before = self.alice_reservoir.consumed_bits();
        let alice_material = secrets.accept_material();
        let bob_material = outcome.accepted.as_ref().map(BobAccepted::accept_material);
        let alice_next = key_update(
            &params,
            &self.alice_keys,
            omega,
            Some(&alice_material),
            &mut self.alice_reservoir,
        )?;
        let bob_next = key_update(
            &params,
            &self.bob_keys,
            omega,
            bob_material.as_ref(),
            &mut self.bob_reservoir,
        )?;
        self.alice_keys = alice_next;
        self.bob_keys = bob_next;

        let result = RoundResult {
            round: self.round,
            omega,
            mu_hat: outcome.mu_hat().cloned(),
            tau_fb,
            consumed_bits: self.alice_reservoir.consumed_bits() - before,
            errors_injected,
        };
        self.round += 1;
        Ok((result, mu))
    }
}

/// Runs `config.rounds` rounds, handing every result to `sink`.
pub fn run_session_with(
    config: &SessionConfig,
    mut sink: impl FnMut(&RoundResult),
) -> Result<SessionSummary> {
    if config.rounds == 0 {
        return Err(Error::param("rounds", "must be at least 1"));
    }
    let mut session = Session::new(config)?;
    let mut summary = SessionSummary {
        rounds: config.rounds,
        accepts: 0,
        accept_rate: 0.0,
        consumed_bits: 0,
        mismatches: 0,
        desynchronized: 0,
    };
    for _ in 0..config.rounds {
        let (result, mu) = session.step()?;
        if result.omega {
            summary.accepts += 1;
            if result.mu_hat.as_ref() != Some(&mu) {
                summary.mismatches += 1;
            }
        }
        if session.alice_keys() != session.bob_keys() {
            summary.desynchronized += 1;
        }
        sink(&result);
    }
    summary.consumed_bits = session.consumed_bits();
    summary.accept_rate = summary.accepts as f64 / config.rounds as f64;
    Ok(summary)
}

pub fn run_session(config: &SessionConfig) -> Result<(Vec<RoundResult>, SessionSummary)> {
    let mut results = Vec::with_capacity(config.rounds as usize);
    let summary = run_session_with(config, |r| results.push(r.clone()))?;
    Ok((results, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub rounds: u64,
    /// Rounds where the decoder returned a message different from Alice's,
    /// leaving the tag check as the only defence.
    pub forgery_attempts: u64,
    /// Accepted rounds whose `mu_hat` or `k_hat'` differ from Alice's.
    pub false_accepts: u64,
    pub rejects: u64,
}

/// Active tampering against the tag check.
///
/// Uses the repetition code, whose decoder never reports failure: each round
/// Eve overwrites a random subset of payload positions in two of the three
/// copies, so Bob decodes a corrupted `mu || k' || tau` and only the MAC can
/// catch it. Keys are fixed for the whole run (`xi` is reused by the
/// protocol anyway) and no key update is performed.
pub fn tamper_fuzz(params: &ProtocolParams, rounds: u64, seed: u64) -> Result<FuzzReport> {
    let k_in = params.ell + params.kappa;
    let params = ProtocolParams { n: 3 * k_in, ..*params };
    let setup = Setup::new(params, CodeKind::Repetition3)?;
    let root = RandomSource::new(seed, "tamper-fuzz");
    let keys = KeyState::random(&params, &mut root.fork("keys"))?;
    let mut alice = root.fork("alice");
    let mut eve = root.fork("eve");
    let mut report = FuzzReport {
        rounds,
        forgery_attempts: 0,
        false_accepts: 0,
        rejects: 0,
    };
    for _ in 0..rounds {
        let mu = alice.bits(params.mu_len());
        let (mut qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut alice)?;
        // Corrupt between one and all payload positions, chosen per round.
        let density = (eve.below(k_in) + 1) as f64 / k_in as f64;
        for i in 0..k_in {
            if eve.bernoulli(density) {
                let keep = eve.below(3);
                for copy in (0..3).filter(|&c| c != keep) {
                    qubits[i + copy * k_in].payload ^= true;
                }
            }
        }
        let decoded = bob_decode(&setup, &keys, &qubits, None)?;
        let tampered = decoded.as_ref().is_some_and(|d| {
            d.mu_hat != mu || d.k_hat_prime != secrets.k_prime || d.tau_hat != secrets.tau
        });
        if tampered {
            report.forgery_attempts += 1;
        }
        let outcome = bob_verify(&setup, &keys, decoded)?;
        match &outcome.accepted {
            Some(acc) if acc.mu_hat != mu || acc.k_hat_prime != secrets.k_prime => {
                report.false_accepts += 1;
            }
            Some(_) => {}
            None => report.rejects += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::Encoding;

    fn small_params() -> ProtocolParams {
        ProtocolParams {
            n: 64,
            ell: 24,
            kappa: 8,
            lambda: 8,
            beta: 0.125,
            encoding: Encoding::SixState,
            q_bits: 16,
        }
    }

    fn flip(qubits: &mut [QubitSymbol], positions: &[usize]) {
        for &p in positions {
            qubits[p].payload ^= true;
        }
    }

    #[test]
    fn encrypt_layout() {
        let params = small_params();
        let setup = Setup::new(params, CodeKind::OracleBdd).unwrap();
        let keys = KeyState::random(&params, &mut RandomSource::new(1, "keys")).unwrap();
        let mu = RandomSource::new(1, "mu").bits(params.mu_len());
        let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(1, "alice")).unwrap();
        assert_eq!(qubits.len(), params.n);
        assert!(qubits.iter().zip(keys.b.as_slice()).all(|(q, &b)| q.basis == b));
        assert_eq!(secrets.m.len(), params.ell);
        assert_eq!(secrets.m.slice(0..8), mu);
        assert_eq!(secrets.tau, hashing::mac_tag(&keys.xi, &mu.concat(&secrets.k_prime)));
        assert!(alice_encrypt(&setup, &keys, &mu.slice(0..7), &mut RandomSource::new(1, "alice")).is_err());
    }

    #[test]
    fn zero_mask_identity_code_sends_plain_payload() {
        let params = ProtocolParams {
            n: 32,
            ell: 24,
            kappa: 8,
            ..small_params()
        };
        let setup = Setup::new(params, CodeKind::Identity).unwrap();
        let mut keys = KeyState::random(&params, &mut RandomSource::new(2, "keys")).unwrap();
        keys.z = BitString::zeros(params.n);
        let mu = BitString::from_u128(0xa5, 8);
        let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(2, "alice")).unwrap();
        let payload: BitString = qubits.iter().map(|q| q.payload).collect();
        assert_eq!(payload, secrets.m.concat(&secrets.r));
    }

    #[test]
    fn noiseless_round_trip() {
        for code in [CodeKind::OracleBdd, CodeKind::Repetition3] {
            let mut params = small_params();
            if code == CodeKind::Repetition3 {
                params.n = 96;
            }
            let setup = Setup::new(params, code).unwrap();
            let keys = KeyState::random(&params, &mut RandomSource::new(3, "keys")).unwrap();
            let mu = BitString::from_u128(0x3c, 8);
            let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(3, "alice")).unwrap();
            let reference = OracleReference::new(secrets.c.clone());
            let out = bob_decrypt(&setup, &keys, &qubits, Some(&reference)).unwrap();
            assert!(out.omega);
            let acc = out.accepted.unwrap();
            assert_eq!(acc.mu_hat, mu);
            assert_eq!(acc.x_hat, secrets.x);
            assert_eq!(acc.r_hat, secrets.r);
            assert_eq!(acc.k_hat_prime, secrets.k_prime);
        }
    }

    #[test]
    fn oracle_threshold_rejects() {
        let params = small_params();
        let setup = Setup::new(params, CodeKind::OracleBdd).unwrap();
        let keys = KeyState::random(&params, &mut RandomSource::new(4, "keys")).unwrap();
        let mu = BitString::zeros(8);
        let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(4, "alice")).unwrap();
        let reference = OracleReference::new(secrets.c.clone());
        let t = setup.code.t;
        let mut at_t = qubits.clone();
        flip(&mut at_t, &(0..t).collect::<Vec<_>>());
        assert!(bob_decrypt(&setup, &keys, &at_t, Some(&reference)).unwrap().omega);
        let mut over = qubits;
        flip(&mut over, &(0..=t).collect::<Vec<_>>());
        let out = bob_decrypt(&setup, &keys, &over, Some(&reference)).unwrap();
        assert!(!out.omega);
        assert!(out.mu_hat().is_none());
    }

    #[test]
    fn corrupted_tag_after_decoding_rejects() {
        let params = small_params();
        let setup = Setup::new(params, CodeKind::OracleBdd).unwrap();
        let keys = KeyState::random(&params, &mut RandomSource::new(5, "keys")).unwrap();
        let mu = BitString::from_u128(0x81, 8);
        let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(5, "alice")).unwrap();
        let reference = OracleReference::new(secrets.c.clone());
        for bit in 0..params.lambda {
            let mut decoded = bob_decode(&setup, &keys, &qubits, Some(&reference)).unwrap().unwrap();
            let mut tag = decoded.tau_hat.as_slice().to_vec();
            tag[bit] ^= true;
            decoded.tau_hat = BitString::new(tag);
            assert!(!bob_verify(&setup, &keys, Some(decoded)).unwrap().omega);
        }
    }

    #[test]
    fn mismatched_basis_labels_are_a_contract_violation() {
        let params = small_params();
        let setup = Setup::new(params, CodeKind::OracleBdd).unwrap();
        let keys = KeyState::random(&params, &mut RandomSource::new(6, "keys")).unwrap();
        let (mut qubits, _) =
            alice_encrypt(&setup, &keys, &BitString::zeros(8), &mut RandomSource::new(6, "alice")).unwrap();
        qubits[0].basis = (qubits[0].basis + 1) % 3;
        assert!(bob_decode(&setup, &keys, &qubits, None).is_err());
    }

    #[test]
    fn feedback_binding() {
        let params = small_params();
        let keys = KeyState::random(&params, &mut RandomSource::new(7, "keys")).unwrap();
        for omega in [false, true] {
            let tag = feedback(&keys, omega);
            assert!(alice_check_feedback(&keys, omega, &tag));
            // A flipped omega with the original tag verifies only on a key collision.
            let collide = hashing::mac_tag(&keys.k, &BitString::new(vec![!omega])) == tag;
            assert_eq!(alice_check_feedback(&keys, !omega, &tag), collide);
        }
    }

    #[test]
    fn feedback_forgery_fraction_exhaustive() {
        // Substituting omega under the honest tag succeeds for at most 2 of 256 keys.
        for omega in [false, true] {
            let wins = (0..256u128)
                .filter(|&k| {
                    let honest = hashing::poly_mac(8, k, &BitString::new(vec![omega])).unwrap();
                    hashing::poly_mac(8, k, &BitString::new(vec![!omega])).unwrap() == honest
                })
                .count();
            assert!(wins <= 2, "{wins}");
        }
    }

    #[test]
    fn key_update_paths() {
        let params = ProtocolParams {
            n: 1024,
            ell: 256,
            kappa: 256,
            lambda: 64,
            beta: 0.125,
            encoding: Encoding::SixState,
            q_bits: 427,
        };
        let setup = Setup::new(params, CodeKind::OracleBdd).unwrap();
        let keys = KeyState::random(&params, &mut RandomSource::new(8, "keys")).unwrap();
        let mu = RandomSource::new(8, "mu").bits(params.mu_len());
        let (qubits, secrets) = alice_encrypt(&setup, &keys, &mu, &mut RandomSource::new(8, "alice")).unwrap();
        let out = bob_decrypt(&setup, &keys, &qubits, Some(&OracleReference::new(secrets.c.clone()))).unwrap();
        let mut alice_res = Reservoir::new(RandomSource::new(8, "reservoir"), None);
        let mut bob_res = Reservoir::new(RandomSource::new(8, "reservoir"), None);

        let a = key_update(&params, &keys, true, Some(&secrets.accept_material()), &mut alice_res).unwrap();
        let b_material = out.accepted.unwrap().accept_material();
        let b = key_update(&params, &keys, true, Some(&b_material), &mut bob_res).unwrap();
        assert_eq!(a, b);
        assert_eq!(alice_res.consumed_bits(), 0);
        assert_eq!(a.xi, keys.xi);
        assert_eq!(a.u, keys.u);
        assert_eq!(a.v, keys.v);
        assert_eq!(a.k.bits(), &secrets.k_prime);

        let a = key_update(&params, &keys, false, None, &mut alice_res).unwrap();
        let b = key_update(&params, &keys, false, None, &mut bob_res).unwrap();
        assert_eq!(a, b);
        assert_eq!(alice_res.consumed_bits(), 1515);
        assert_eq!(a.xi, keys.xi);
        assert!(key_update(&params, &keys, true, None, &mut alice_res).is_err());
    }

    #[test]
    fn reservoir_exhaustion_is_terminal_and_exact() {
        let params = small_params();
        let keys = KeyState::random(&params, &mut RandomSource::new(9, "keys")).unwrap();
        let per_reject = (params.n + params.lambda + params.q_bits) as u64;
        let mut res = Reservoir::new(RandomSource::new(9, "reservoir"), Some(2 * per_reject + 5));
        key_update(&params, &keys, false, None, &mut res).unwrap();
        key_update(&params, &keys, false, None, &mut res).unwrap();
        assert_eq!(
            key_update(&params, &keys, false, None, &mut res),
            Err(Error::ReservoirExhausted {
                requested: per_reject,
                remaining: 5
            })
        );
        assert_eq!(res.consumed_bits(), 2 * per_reject);
    }

    fn config(gamma: f64, rounds: u64) -> SessionConfig {
        SessionConfig {
            params: small_params(),
            code: CodeKind::OracleBdd,
            channel: ChannelModel::iid_flip(gamma).unwrap(),
            rounds,
            seed: 17,
            reservoir_capacity: None,
            messages: MessageSource::Uniform,
        }
    }

    #[test]
    fn noiseless_session() {
        let (results, summary) = run_session(&config(0.0, 200)).unwrap();
        assert_eq!(summary.accepts, 200);
        assert_eq!(summary.consumed_bits, 0);
        assert_eq!(summary.mismatches, 0);
        assert_eq!(summary.desynchronized, 0);
        assert!(results.iter().all(|r| r.consumed_bits == 0 && r.errors_injected == 0));
    }

    #[test]
    fn noisy_session_accounting() {
        let (results, summary) = run_session(&config(0.3, 200)).unwrap();
        let per_reject = 64 + 8 + 16;
        for r in &results {
            if r.omega {
                assert_eq!(r.consumed_bits, 0);
                assert!(r.mu_hat.is_some());
            } else {
                assert_eq!(r.consumed_bits, per_reject);
            }
        }
        assert!(summary.accept_rate < 0.01);
        assert_eq!(summary.consumed_bits, (summary.rounds - summary.accepts) * per_reject);
        assert_eq!(summary.desynchronized, 0);
    }

    #[test]
    fn session_is_deterministic_per_seed() {
        let a = run_session(&config(0.05, 50)).unwrap();
        let b = run_session(&config(0.05, 50)).unwrap();
        assert_eq!(a, b);
        let mut other = config(0.05, 50);
        other.seed = 18;
        assert_ne!(run_session(&other).unwrap().0, a.0);
    }

    #[test]
    fn session_reports_reservoir_exhaustion() {
        let mut cfg = config(0.5, 10);
        cfg.reservoir_capacity = Some(100);
        assert!(matches!(run_session(&cfg), Err(Error::ReservoirExhausted { .. })));
        assert!(run_session(&SessionConfig { rounds: 0, ..config(0.0, 1) }).is_err());
    }

    #[test]
    fn transcript_exposes_only_channel_output_and_feedback() {
        let t = Transcript {
            qubits: vec![QubitSymbol::new(1, true)],
            omega: true,
            tau_fb: BitString::zeros(8),
        };
        let value = serde_json::to_value(&t).unwrap();
        let mut keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["omega", "qubits", "tau_fb"]);
    }

    #[test]
    fn tamper_fuzz_small_run() {
        let params = ProtocolParams {
            n: 0,
            ell: 24,
            kappa: 4,
            lambda: 8,
            beta: 0.0,
            encoding: Encoding::SixState,
            q_bits: 8,
        };
        let report = tamper_fuzz(&ProtocolParams { n: 84, ..params }, 2000, 3).unwrap();
        assert_eq!(report.rounds, 2000);
        assert!(report.forgery_attempts > 1900);
        // lambda = 8 leaves a visible forgery rate, bounded by 3 / 256 per attempt.
        assert!(report.false_accepts as f64 <= 3.0 * (report.forgery_attempts as f64 * 3.0 / 256.0) + 5.0);
    }
}
