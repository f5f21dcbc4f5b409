//! Fixed-length strings over the bit and basis alphabets, protocol
//! parameters, and the seeded randomness contract.
//!
//! Bit order: index 0 is the leftmost (most significant) bit in every
//! serialization, hex included.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Qubit encoding, i.e. the basis alphabet `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// Two conjugate bases `{+, x}`.
    Bb84,
    /// Three mutually unbiased bases `{x, y, z}`, symbols 0, 1, 2 in that order.
    SixState,
}

impl Encoding {
    pub fn alphabet_size(self) -> u8 {
        match self {
            Encoding::Bb84 => 2,
            Encoding::SixState => 3,
        }
    }

    /// Bits used to write one basis symbol in binary.
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Encoding::Bb84 => 1,
            Encoding::SixState => 2,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Bb84 => "bb84",
            Encoding::SixState => "six-state",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bb84" => Ok(Encoding::Bb84),
            "six-state" | "sixstate" | "6-state" => Ok(Encoding::SixState),
            other => Err(Error::Parse(format!("unknown encoding `{other}`"))),
        }
    }
}

/// A fixed-length string over `{0,1}`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    /// Big-endian bits of the low `len` bits of `value`.
    pub fn from_u128(value: u128, len: usize) -> Self {
        assert!(len <= 128);
        Self {
            bits: (0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        xor(self, other)
    }

    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        Ok(self.xor(other)?.weight())
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = Vec::with_capacity(self.len() + other.len());
        bits.extend_from_slice(&self.bits);
        bits.extend_from_slice(&other.bits);
        Self { bits }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> BitString {
        Self {
            bits: self.bits[range].to_vec(),
        }
    }

    /// Splits into consecutive pieces of the given lengths, which must sum to `len()`.
    pub fn split(&self, lengths: &[usize]) -> Result<Vec<BitString>> {
        let total: usize = lengths.iter().sum();
        if total != self.len() {
            return Err(Error::LengthMismatch {
                expected: total,
                actual: self.len(),
            });
        }
        let mut start = 0;
        Ok(lengths
            .iter()
            .map(|&l| {
                let piece = self.slice(start..start + l);
                start += l;
                piece
            })
            .collect())
    }

    pub fn permute(&self, perm: &[usize]) -> BitString {
        Self {
            bits: perm.iter().map(|&p| self.bits[p]).collect(),
        }
    }

    /// Value of the (at most 128) bits, first bit most significant.
    pub fn to_u128(&self) -> u128 {
        assert!(self.len() <= 128);
        self.bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128)
    }

    pub fn to_trits(&self) -> TritString {
        TritString {
            trits: self.bits.iter().map(|&b| b as u8).collect(),
        }
    }

    /// Hex text, left-padded with zero bits to a multiple of four.
    pub fn to_hex(&self) -> String {
        let pad = (4 - self.len() % 4) % 4;
        let padded: Vec<bool> = std::iter::repeat_n(false, pad)
            .chain(self.bits.iter().copied())
            .collect();
        padded
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<BitString> {
        let pad = (4 - len % 4) % 4;
        if hex.len() * 4 != len + pad {
            return Err(Error::Parse(format!(
                "hex string of {} digits cannot hold exactly {len} bits",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit `{c}`")))?;
            bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
        }
        if bits[..pad].iter().any(|&b| b) {
            return Err(Error::Parse("nonzero padding bits in hex string".into()));
        }
        Ok(Self {
            bits: bits.split_off(pad),
        })
    }
}

pub(crate) fn pack_plane(bits: impl Iterator<Item = bool>, len: usize) -> Vec<u64> {
    let mut words = vec![0u64; len.div_ceil(64)];
    for (i, b) in bits.enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    /// Parses a string of `0`/`1` characters.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::new)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self {
            bits: iter.into_iter().collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HexForm {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        HexForm {
            len: self.len(),
            hex: self.to_hex(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let form = HexForm::deserialize(deserializer)?;
        BitString::from_hex(&form.hex, form.len).map_err(serde::de::Error::custom)
    }
}

/// Elementwise exclusive-or of two equal-length strings.
pub fn xor(a: &BitString, b: &BitString) -> Result<BitString> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.bits.iter().zip(&b.bits).map(|(x, y)| x ^ y).collect())
}

/// A fixed-length string over `{0,1,2}`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct TritString {
    trits: Vec<u8>,
}

impl TritString {
    pub fn new(trits: Vec<u8>) -> Result<Self> {
        if let Some(&t) = trits.iter().find(|&&t| t > 2) {
            return Err(Error::param("trit", format!("{t} is not in {{0,1,2}}")));
        }
        Ok(Self { trits })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            trits: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.trits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trits.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.trits
    }

    pub fn concat(&self, other: &TritString) -> TritString {
        let mut trits = self.trits.clone();
        trits.extend_from_slice(&other.trits);
        Self { trits }
    }
}

impl fmt::Display for TritString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &t in &self.trits {
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TritString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TritString({self})")
    }
}

impl FromStr for TritString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trits = s
            .chars()
            .map(|c| match c {
                '0'..='2' => Ok(c as u8 - b'0'),
                other => Err(Error::Parse(format!("invalid trit `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trits })
    }
}

/// A sequence of basis labels for one encoding.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BasisString {
    symbols: Vec<u8>,
    encoding: Encoding,
}

impl BasisString {
    pub fn new(symbols: Vec<u8>, encoding: Encoding) -> Result<Self> {
        let size = encoding.alphabet_size();
        if let Some(&s) = symbols.iter().find(|&&s| s >= size) {
            return Err(Error::param(
                "basis",
                format!("symbol {s} outside the {encoding} alphabet"),
            ));
        }
        Ok(Self { symbols, encoding })
    }

    pub fn parse(s: &str, encoding: Encoding) -> Result<Self> {
        let trits: TritString = s.parse()?;
        Self::new(trits.trits, encoding)
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.symbols[i]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.symbols
    }

    pub fn to_trits(&self) -> TritString {
        basis_to_trits(self)
    }

    /// Binary form: each symbol written on `bits_per_symbol` bits, MSB first.
    pub fn to_bits(&self) -> BitString {
        let width = self.encoding.bits_per_symbol();
        self.symbols
            .iter()
            .flat_map(|&s| (0..width).rev().map(move |i| (s >> i) & 1 == 1))
            .collect()
    }

    pub fn permute(&self, perm: &[usize]) -> BasisString {
        Self {
            symbols: perm.iter().map(|&p| self.symbols[p]).collect(),
            encoding: self.encoding,
        }
    }
}

impl fmt::Display for BasisString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BasisString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BasisString({}, {self})", self.encoding)
    }
}

/// Injective map from basis labels to trits (identity on the symbol values).
pub fn basis_to_trits(b: &BasisString) -> TritString {
    TritString {
        trits: b.symbols.clone(),
    }
}

/// Seeded, counter-based random stream.
///
/// Each protocol role draws from its own substream: the seed fixes the
/// ChaCha20 key and the role label selects the stream number, so
/// experiments reproduce bit for bit and roles never overlap.
pub struct RandomSource {
    seed: u64,
    label: String,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64, role: &str) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(label_stream_id(role));
        Self {
            seed,
            label: role.to_owned(),
            rng,
        }
    }

    /// Independent substream labelled `<own label>/<role>`, starting fresh.
    pub fn fork(&self, role: &str) -> Self {
        Self::new(self.seed, &format!("{}/{role}", self.label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bits(&mut self, len: usize) -> BitString {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let word = self.rng.next_u64();
            let take = (len - out.len()).min(64);
            out.extend((0..take).map(|i| (word >> (63 - i)) & 1 == 1));
        }
        BitString::new(out)
    }

    pub fn basis(&mut self, encoding: Encoding, len: usize) -> BasisString {
        let size = encoding.alphabet_size();
        BasisString {
            symbols: (0..len).map(|_| self.rng.gen_range(0..size)).collect(),
            encoding,
        }
    }

    pub fn trits(&mut self, len: usize) -> TritString {
        TritString {
            trits: (0..len).map(|_| self.rng.gen_range(0..3u8)).collect(),
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.rng.gen_bool(p)
        }
    }

    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniformly random permutation of `0..len` (Fisher-Yates).
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            let j = self.rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        perm
    }
}

impl fmt::Debug for RandomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomSource")
            .field("seed", &self.seed)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

// FNV-1a, 64 bit.
fn label_stream_id(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn random_bits(src: &mut RandomSource, len: usize) -> BitString {
    src.bits(len)
}

/// Sizes of one protocol instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of qubits per round.
    pub n: usize,
    /// Augmented message length `|mu| + 2 * lambda`.
    pub ell: usize,
    /// Privacy-amplification padding bits.
    pub kappa: usize,
    /// MAC tag length.
    pub lambda: usize,
    /// Correctable fraction of bit errors.
    pub beta: f64,
    pub encoding: Encoding,
    /// `log2 |Q|`, bits of fresh basis randomness per Reject.
    pub q_bits: usize,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.ell + self.kappa > self.n {
            return Err(Error::param(
                "ell",
                format!(
                    "ell + kappa = {} exceeds n = {}",
                    self.ell + self.kappa,
                    self.n
                ),
            ));
        }
        if self.ell <= 2 * self.lambda {
            return Err(Error::param(
                "ell",
                format!("ell = {} must exceed 2 * lambda = {}", self.ell, 2 * self.lambda),
            ));
        }
        if !(0.0..=0.5).contains(&self.beta) {
            return Err(Error::param("beta", format!("{} is not in [0, 1/2]", self.beta)));
        }
        if self.q_bits == 0 {
            return Err(Error::param("q_bits", "must be at least 1"));
        }
        crate::hashing::reduction_polynomial(self.lambda)?;
        Ok(())
    }

    /// Plaintext length `ell - 2 lambda`.
    pub fn mu_len(&self) -> usize {
        self.ell - 2 * self.lambda
    }

    /// Guaranteed-correctable error count `floor(n * beta)`.
    pub fn correctable(&self) -> usize {
        correctable_errors(self.n, self.beta)
    }
}

/// `floor(n * beta)`, tolerant of representation error in `beta`
/// (e.g. `3 * (1/3)` counts as 1).
pub fn correctable_errors(n: usize, beta: f64) -> usize {
    (n as f64 * beta + 1e-9).floor().max(0.0) as usize
}
