//! Pairwise-independent hash families and the polynomial MAC.
//!
//! Both `F_u` and `G_v` are affine Toeplitz maps `y = T x + o` over a prime
//! field, with the diagonal of `T` and the offset `o` uniform. For every pair
//! of distinct inputs this family hits every pair of outputs with probability
//! exactly `|range|^-2`.
//!
//! `F_u` produces a mask in `{0,1}^n` and a basis string in `B^n`. Because
//! `|B|^n` is not a power of two for six-state encoding, `u` holds two
//! independent seeds: a GF(2) seed for the mask and a GF(|B|) seed for the
//! basis string, each hashing an injective encoding of the whole input.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::primitives::{pack_plane, BasisString, BitString, Encoding, RandomSource, TritString};
use crate::{Error, Result};

/// Prime field a Toeplitz seed works over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Gf2,
    Gf3,
}

impl Field {
    pub fn order(self) -> u8 {
        match self {
            Field::Gf2 => 2,
            Field::Gf3 => 3,
        }
    }

    /// Field used for basis symbols of the given encoding.
    pub fn for_basis(encoding: Encoding) -> Field {
        match encoding {
            Encoding::Bb84 => Field::Gf2,
            Encoding::SixState => Field::Gf3,
        }
    }
}

/// Seed of one affine Toeplitz hash `F^in -> F^out`.
///
/// Row `i` of the matrix reads `diagonal[out - 1 - i .. out - 1 - i + in]`,
/// so entry `(i, j)` depends only on `j - i`.
#[derive(Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    field: Field,
    in_len: usize,
    out_len: usize,
    diagonal: Vec<u8>,
    offset: Vec<u8>,
    // Bit planes of the diagonal: symbol == 1 and symbol == 2.
    plane_one: Vec<u64>,
    plane_two: Vec<u64>,
}

impl ToeplitzSeed {
    pub fn from_parts(
        field: Field,
        in_len: usize,
        out_len: usize,
        diagonal: Vec<u8>,
        offset: Vec<u8>,
    ) -> Result<Self> {
        let diag_len = diagonal_len(in_len, out_len);
        if diagonal.len() != diag_len {
            return Err(Error::LengthMismatch {
                expected: diag_len,
                actual: diagonal.len(),
            });
        }
        if offset.len() != out_len {
            return Err(Error::LengthMismatch {
                expected: out_len,
                actual: offset.len(),
            });
        }
        let q = field.order();
        if diagonal.iter().chain(&offset).any(|&s| s >= q) {
            return Err(Error::param("seed", format!("symbol outside GF({q})")));
        }
        let plane_one = pack_plane(diagonal.iter().map(|&s| s == 1), diag_len);
        let plane_two = pack_plane(diagonal.iter().map(|&s| s == 2), diag_len);
        Ok(Self {
            field,
            in_len,
            out_len,
            diagonal,
            offset,
            plane_one,
            plane_two,
        })
    }

    pub fn random(field: Field, in_len: usize, out_len: usize, src: &mut RandomSource) -> Self {
        let total = diagonal_len(in_len, out_len) + out_len;
        let symbols: Vec<u8> = match field {
            Field::Gf2 => src.bits(total).iter().map(|b| b as u8).collect(),
            Field::Gf3 => src.trits(total).as_slice().to_vec(),
        };
        let (diagonal, offset) = symbols.split_at(total - out_len);
        Self::from_parts(field, in_len, out_len, diagonal.to_vec(), offset.to_vec())
            .expect("lengths are consistent by construction")
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn diagonal(&self) -> &[u8] {
        &self.diagonal
    }

    pub fn offset(&self) -> &[u8] {
        &self.offset
    }

    /// Seed size in field symbols.
    pub fn symbol_count(&self) -> usize {
        self.diagonal.len() + self.offset.len()
    }

    /// `T x + o` over the seed's field. Input symbols must be `< order`.
    pub fn apply(&self, input: &[u8]) -> Result<Vec<u8>> {
        if input.len() != self.in_len {
            return Err(Error::LengthMismatch {
                expected: self.in_len,
                actual: input.len(),
            });
        }
        let q = self.field.order();
        if input.iter().any(|&s| s >= q) {
            return Err(Error::param("input", format!("symbol outside GF({q})")));
        }
        let x_one = pack_plane(input.iter().map(|&s| s == 1), self.in_len);
        let x_two = pack_plane(input.iter().map(|&s| s == 2), self.in_len);
        let words = self.in_len.div_ceil(64);
        let mut w_one = vec![0u64; words];
        let mut w_two = vec![0u64; words];

        let mut out = Vec::with_capacity(self.out_len);
        for i in 0..self.out_len {
            let start = self.out_len - 1 - i;
            window(&self.plane_one, start, self.in_len, &mut w_one);
            let y = match self.field {
                Field::Gf2 => {
                    let ones: u32 = w_one
                        .iter()
                        .zip(&x_one)
                        .map(|(a, x)| (a & x).count_ones())
                        .sum();
                    (ones % 2) as u8
                }
                Field::Gf3 => {
                    window(&self.plane_two, start, self.in_len, &mut w_two);
                    let mut ones = 0u32;
                    let mut twos = 0u32;
                    for k in 0..words {
                        ones += ((w_one[k] & x_one[k]) | (w_two[k] & x_two[k])).count_ones();
                        twos += ((w_one[k] & x_two[k]) | (w_two[k] & x_one[k])).count_ones();
                    }
                    ((ones + 2 * twos) % 3) as u8
                }
            };
            out.push((y + self.offset[i]) % q);
        }
        Ok(out)
    }
}

fn diagonal_len(in_len: usize, out_len: usize) -> usize {
    (in_len + out_len).saturating_sub(1)
}

/// Copies bits `[start, start + len)` of `src` into `dst`, zeroing the tail.
fn window(src: &[u64], start: usize, len: usize, dst: &mut [u64]) {
    let shift = start % 64;
    let base = start / 64;
    for (k, slot) in dst.iter_mut().enumerate() {
        let lo = src.get(base + k).copied().unwrap_or(0);
        *slot = if shift == 0 {
            lo
        } else {
            let hi = src.get(base + k + 1).copied().unwrap_or(0);
            (lo >> shift) | (hi << (64 - shift))
        };
    }
    let tail = len % 64;
    if tail != 0 {
        if let Some(last) = dst.last_mut() {
            *last &= (1u64 << tail) - 1;
        }
    }
}

impl fmt::Debug for ToeplitzSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzSeed")
            .field("field", &self.field)
            .field("in_len", &self.in_len)
            .field("out_len", &self.out_len)
            .finish_non_exhaustive()
    }
}

/// Text form: hex for GF(2) parts, digit strings for GF(3) parts.
#[derive(Serialize, Deserialize)]
struct SeedForm {
    field: Field,
    in_len: usize,
    out_len: usize,
    diagonal: String,
    offset: String,
}

fn symbols_to_text(field: Field, symbols: &[u8]) -> String {
    match field {
        Field::Gf2 => symbols.iter().map(|&s| s == 1).collect::<BitString>().to_hex(),
        Field::Gf3 => symbols.iter().map(|s| char::from(b'0' + s)).collect(),
    }
}

fn symbols_from_text(field: Field, text: &str, len: usize) -> Result<Vec<u8>> {
    match field {
        Field::Gf2 => Ok(BitString::from_hex(text, len)?
            .iter()
            .map(|b| b as u8)
            .collect()),
        Field::Gf3 => {
            let trits: TritString = text.parse()?;
            if trits.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: trits.len(),
                });
            }
            Ok(trits.as_slice().to_vec())
        }
    }
}

impl Serialize for ToeplitzSeed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeedForm {
            field: self.field,
            in_len: self.in_len,
            out_len: self.out_len,
            diagonal: symbols_to_text(self.field, &self.diagonal),
            offset: symbols_to_text(self.field, &self.offset),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ToeplitzSeed {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let form = SeedForm::deserialize(d)?;
        let diag_len = diagonal_len(form.in_len, form.out_len);
        let diagonal = symbols_from_text(form.field, &form.diagonal, diag_len).map_err(D::Error::custom)?;
        let offset = symbols_from_text(form.field, &form.offset, form.out_len).map_err(D::Error::custom)?;
        ToeplitzSeed::from_parts(form.field, form.in_len, form.out_len, diagonal, offset)
            .map_err(D::Error::custom)
    }
}

/// Seed `u` of `F_u`: independent mask and basis components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FSeed {
    pub mask: ToeplitzSeed,
    pub basis: ToeplitzSeed,
}

impl FSeed {
    pub fn random(n: usize, kappa: usize, encoding: Encoding, src: &mut RandomSource) -> Self {
        let mask = ToeplitzSeed::random(Field::Gf2, f_input_len(Field::Gf2, n, kappa, encoding), n, src);
        let field = Field::for_basis(encoding);
        let basis = ToeplitzSeed::random(field, f_input_len(field, n, kappa, encoding), n, src);
        Self { mask, basis }
    }
}

/// Length of the encoded `x || b || r` input over `field`.
pub fn f_input_len(field: Field, n: usize, kappa: usize, encoding: Encoding) -> usize {
    match field {
        Field::Gf2 => n + n * encoding.bits_per_symbol() + kappa,
        Field::Gf3 => n + n + kappa,
    }
}

/// Length of the encoded `b || q` input over `field`.
pub fn g_input_len(field: Field, n: usize, q_bits: usize, encoding: Encoding) -> usize {
    match field {
        Field::Gf2 => n * encoding.bits_per_symbol() + q_bits,
        Field::Gf3 => n + q_bits,
    }
}

// Injective encodings: bits stay bits (or become trits 0/1), basis symbols
// become `bits_per_symbol` bits (or stay trits).
fn encode_symbols(field: Field, bits: &[&BitString], basis: &BasisString, basis_at: usize) -> Vec<u8> {
    let basis_part: Vec<u8> = match field {
        Field::Gf2 => basis.to_bits().iter().map(|b| b as u8).collect(),
        Field::Gf3 => basis.to_trits().as_slice().to_vec(),
    };
    let mut out = Vec::new();
    for (i, part) in bits.iter().enumerate() {
        if i == basis_at {
            out.extend_from_slice(&basis_part);
        }
        out.extend(part.iter().map(|b| b as u8));
    }
    if basis_at >= bits.len() {
        out.extend_from_slice(&basis_part);
    }
    out
}

fn basis_from_symbols(symbols: Vec<u8>, encoding: Encoding) -> Result<BasisString> {
    BasisString::new(symbols, encoding)
}

/// `z~ || b~ = F_u(x || b || r)`.
pub fn hash_f(
    u: &FSeed,
    x: &BitString,
    b: &BasisString,
    r: &BitString,
) -> Result<(BitString, BasisString)> {
    let n = x.len();
    if b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if u.mask.out_len() != n || u.basis.out_len() != n {
        return Err(Error::LengthMismatch {
            expected: u.mask.out_len(),
            actual: n,
        });
    }
    if u.mask.field() != Field::Gf2 || u.basis.field() != Field::for_basis(b.encoding()) {
        return Err(Error::param("u", "seed fields do not match the encoding"));
    }
    let mask_in = encode_symbols(Field::Gf2, &[x, r], b, 1);
    let z = u.mask.apply(&mask_in)?.into_iter().map(|s| s == 1).collect();
    let basis_in = encode_symbols(u.basis.field(), &[x, r], b, 1);
    let basis = basis_from_symbols(u.basis.apply(&basis_in)?, b.encoding())?;
    Ok((z, basis))
}

pub fn random_g_seed(n: usize, q_bits: usize, encoding: Encoding, src: &mut RandomSource) -> ToeplitzSeed {
    let field = Field::for_basis(encoding);
    ToeplitzSeed::random(field, g_input_len(field, n, q_bits, encoding), n, src)
}

/// `b~ = G_v(b || q)`.
pub fn hash_g(v: &ToeplitzSeed, b: &BasisString, q: &BitString) -> Result<BasisString> {
    if v.field() != Field::for_basis(b.encoding()) {
        return Err(Error::param("v", "seed field does not match the encoding"));
    }
    if v.out_len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: v.out_len(),
            actual: b.len(),
        });
    }
    let input = encode_symbols(v.field(), &[q], b, 0);
    basis_from_symbols(v.apply(&input)?, b.encoding())
}

/// Low coefficients of the GF(2^lambda) reduction polynomial (the
/// `x^lambda` term is implicit).
pub fn reduction_polynomial(lambda: usize) -> Result<u128> {
    match lambda {
        8 => Ok(0x1b),         // x^8 + x^4 + x^3 + x + 1
        16 => Ok(0x2b),        // x^16 + x^5 + x^3 + x + 1
        32 => Ok(0x8d),        // x^32 + x^7 + x^3 + x^2 + 1
        64 => Ok(0x1b),        // x^64 + x^4 + x^3 + x + 1
        128 => Ok(0x87),       // x^128 + x^7 + x^2 + x + 1
        other => Err(Error::UnsupportedTagLength(other)),
    }
}

fn field_mask(lambda: usize) -> u128 {
    if lambda == 128 {
        u128::MAX
    } else {
        (1u128 << lambda) - 1
    }
}

/// Product in GF(2^lambda).
pub fn gf_mul(a: u128, b: u128, lambda: usize) -> Result<u128> {
    let low = reduction_polynomial(lambda)?;
    let mask = field_mask(lambda);
    let mut acc = 0u128;
    for i in (0..lambda).rev() {
        let carry = (acc >> (lambda - 1)) & 1 == 1;
        acc = (acc << 1) & mask;
        if carry {
            acc ^= low;
        }
        if (b >> i) & 1 == 1 {
            acc ^= a;
        }
    }
    Ok(acc)
}

/// A MAC key of `lambda` bits.
///
/// Every `lambda`-bit value is accepted, zero included: the forgery bound is
/// taken over uniformly random keys, and the protocol draws `k'` and the
/// reservoir keys from all of `{0,1}^lambda`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacKey {
    key: BitString,
}

impl MacKey {
    pub fn new(key: BitString) -> Result<Self> {
        reduction_polynomial(key.len())?;
        Ok(Self { key })
    }

    pub fn lambda(&self) -> usize {
        self.key.len()
    }

    pub fn bits(&self) -> &BitString {
        &self.key
    }

    fn value(&self) -> u128 {
        self.key.to_u128()
    }
}

impl fmt::Debug for MacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacKey(lambda = {})", self.lambda())
    }
}

/// Message blocks for the polynomial MAC: the message split into
/// `lambda`-bit blocks (the last one zero-padded on the right), followed by
/// a block holding the message bit length mod `2^lambda`.
pub fn mac_blocks(lambda: usize, message: &BitString) -> Vec<u128> {
    let mut blocks: Vec<u128> = message
        .as_slice()
        .chunks(lambda)
        .map(|chunk| {
            let v = chunk.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128);
            v << (lambda - chunk.len())
        })
        .collect();
    blocks.push(message.len() as u128 & field_mask(lambda));
    blocks
}

/// `sum_i m_i * key^i` over GF(2^lambda), with `key` given as a field element.
pub fn poly_mac(lambda: usize, key: u128, message: &BitString) -> Result<u128> {
    let mut power = key;
    let mut tag = 0u128;
    for block in mac_blocks(lambda, message) {
        tag ^= gf_mul(block, power, lambda)?;
        power = gf_mul(power, key, lambda)?;
    }
    Ok(tag)
}

pub fn mac_tag(key: &MacKey, message: &BitString) -> BitString {
    let lambda = key.lambda();
    let tag = poly_mac(lambda, key.value(), message).expect("tag length checked by MacKey::new");
    BitString::from_u128(tag, lambda)
}

pub fn mac_verify(key: &MacKey, message: &BitString, tag: &BitString) -> bool {
    tag.len() == key.lambda() && mac_tag(key, message) == *tag
}
