//! Symbolic qubit transport and a small density-matrix toolkit.
//!
//! Qubits travel as `(basis, payload)` pairs. Bob always measures in the
//! preparation basis, so a channel is fully described by the distribution of
//! payload flips it induces. Density matrices only appear in the
//! verification utilities (trace distance, Pauli twirl).

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::primitives::{Encoding, RandomSource};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitSymbol {
    pub basis: u8,
    pub payload: bool,
    /// Always false for the channels implemented here.
    pub erased: bool,
}

impl QubitSymbol {
    pub fn new(basis: u8, payload: bool) -> Self {
        Self {
            basis,
            payload,
            erased: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    IidFlip,
    InterceptResend,
}

/// Channel between Alice and Bob.
///
/// `InterceptResend` attacks each qubit with probability `eta` and then
/// applies the same i.i.d. flip noise `gamma` as the honest channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub gamma: f64,
    pub eta: f64,
}

impl ChannelModel {
    pub fn iid_flip(gamma: f64) -> Result<Self> {
        Self::new(ChannelKind::IidFlip, gamma, 0.0)
    }

    pub fn intercept_resend(eta: f64, gamma: f64) -> Result<Self> {
        Self::new(ChannelKind::InterceptResend, gamma, eta)
    }

    pub fn new(kind: ChannelKind, gamma: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::OutOfDomain {
                name: "gamma",
                value: gamma,
                domain: "[0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::OutOfDomain {
                name: "eta",
                value: eta,
                domain: "[0, 1]",
            });
        }
        Ok(Self { kind, gamma, eta })
    }
}

/// Sends `qubits` through `channel`. Lengths and basis labels are preserved;
/// each output payload is what Bob reads when measuring in the label's basis.
pub fn transmit(
    channel: &ChannelModel,
    encoding: Encoding,
    qubits: &[QubitSymbol],
    src: &mut RandomSource,
) -> Vec<QubitSymbol> {
    let bases = encoding.alphabet_size() as usize;
    qubits
        .iter()
        .map(|q| {
            let mut payload = q.payload;
            if channel.kind == ChannelKind::InterceptResend && src.bernoulli(channel.eta) {
                let eve_basis = src.below(bases) as u8;
                if eve_basis != q.basis {
                    // Eve's outcome is uniform and so is Bob's measurement of
                    // her conjugate-basis resend.
                    payload = src.bernoulli(0.5);
                }
            }
            if src.bernoulli(channel.gamma) {
                payload = !payload;
            }
            QubitSymbol { payload, ..*q }
        })
        .collect()
}

/// One line of the intercept-resend case table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptCase {
    pub eve_matches_basis: bool,
    /// Probability of this case given that Eve attacks.
    pub probability: f64,
    /// Probability Bob's outcome differs from Alice's payload in this case.
    pub error_probability: f64,
}

/// Case table for a single attacked qubit, enumerated over Eve's basis choice.
pub fn intercept_resend_cases(encoding: Encoding) -> Vec<InterceptCase> {
    let bases = encoding.alphabet_size() as u32;
    let alice = 0u32;
    (0..bases)
        .map(|eve| InterceptCase {
            eve_matches_basis: eve == alice,
            probability: 1.0 / bases as f64,
            error_probability: if eve == alice { 0.0 } else { 0.5 },
        })
        .collect()
}

/// Error rate induced on an attacked qubit: 1/4 for BB84, 1/3 for six-state.
pub fn intercept_resend_error_rate(encoding: Encoding) -> f64 {
    intercept_resend_cases(encoding)
        .iter()
        .map(|c| c.probability * c.error_probability)
        .sum()
}

/// Dense square complex matrix, row major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix("rows of unequal length".into()));
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_real(dim: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), dim * dim);
        Self {
            dim,
            data: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// `|psi><psi|`.
    pub fn outer(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        let dim = self.dim * other.dim;
        let mut m = Self::zeros(dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        m[(i * other.dim + k, j * other.dim + l)] = self[(i, j)] * other[(k, l)];
                    }
                }
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    sum += self[(i, j)].norm_sqr();
                }
            }
        }
        sum.sqrt()
    }

    /// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations,
    /// sorted ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        const HERMITIAN_TOL: f64 = 1e-12;
        if self.hermiticity_defect() > HERMITIAN_TOL {
            return Err(Error::InvalidMatrix(format!(
                "not Hermitian (defect {:e})",
                self.hermiticity_defect()
            )));
        }
        let mut a = self.clone();
        for _sweep in 0..100 {
            if a.off_diagonal_norm() < 1e-14 {
                break;
            }
            for p in 0..a.dim {
                for q in p + 1..a.dim {
                    a.jacobi_rotate(p, q);
                }
            }
        }
        let mut eig: Vec<f64> = (0..a.dim).map(|i| a[(i, i)].re).collect();
        eig.sort_by(|x, y| x.total_cmp(y));
        Ok(eig)
    }

    // Zeroes entry (p, q): first a phase change makes it real, then a real
    // plane rotation annihilates it.
    fn jacobi_rotate(&mut self, p: usize, q: usize) {
        let apq = self[(p, q)];
        let r = apq.norm();
        if r < 1e-300 {
            return;
        }
        let phase = apq / r;
        let app = self[(p, p)].re;
        let aqq = self[(q, q)].re;
        let theta = 0.5 * (2.0 * r).atan2(aqq - app);
        let (s, c) = theta.sin_cos();
        let mut u = CMatrix::identity(self.dim);
        // u = diag(1, conj(phase)) on (p, q), then rotation [[c, s], [-s, c]].
        u[(p, p)] = Complex64::new(c, 0.0);
        u[(p, q)] = Complex64::new(s, 0.0);
        u[(q, p)] = -phase.conj() * s;
        u[(q, q)] = phase.conj() * c;
        let rotated = &(&u.adjoint() * &*self) * &u;
        *self = rotated;
        // Clean rounding residue so the diagonal stays real.
        self[(p, q)] = Complex64::new(0.0, 0.0);
        self[(q, p)] = Complex64::new(0.0, 0.0);
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    m[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        m
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != 2 && matrix.dim() != 4 {
            return Err(Error::InvalidMatrix(format!("dimension {} not in {{2, 4}}", matrix.dim())));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidMatrix(format!("trace {tr} is not 1")));
        }
        let eig = matrix.hermitian_eigenvalues()?;
        if eig[0] < -1e-10 {
            return Err(Error::InvalidMatrix(format!("negative eigenvalue {:e}", eig[0])));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Self::new(CMatrix::outer(&psi))
    }

    /// `(|01> - |10>) / sqrt 2`.
    pub fn singlet() -> Self {
        Self::pure(&bell_basis()[3]).expect("singlet is a valid state")
    }

    /// `G G^dagger / tr(G G^dagger)` for a matrix `G` of uniform entries.
    pub fn random(dim: usize, src: &mut RandomSource) -> Result<Self> {
        let mut g = CMatrix::zeros(dim);
        let mut uniform = || (src.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] = Complex64::new(uniform(), uniform());
            }
        }
        let m = &g * &g.adjoint();
        let tr = m.trace().re;
        let mut m = m.scale(1.0 / tr);
        // Exact Hermiticity after rounding.
        let adj = m.adjoint();
        m = (&m + &adj).scale(0.5);
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// The four Pauli matrices `[I, X, Y, Z]`.
pub fn paulis() -> [CMatrix; 4] {
    let c = |re, im| Complex64::new(re, im);
    [
        CMatrix::identity(2),
        CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]),
        CMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]])
            .unwrap(),
        CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0]),
    ]
}

/// Bell states `[Phi+, Phi-, Psi+, Psi-]` in the computational basis.
pub fn bell_basis() -> [Vec<Complex64>; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: f64, b: f64, c: f64, d: f64| {
        vec![
            Complex64::new(a * h, 0.0),
            Complex64::new(b * h, 0.0),
            Complex64::new(c * h, 0.0),
            Complex64::new(d * h, 0.0),
        ]
    };
    [
        v(1.0, 0.0, 0.0, 1.0),
        v(1.0, 0.0, 0.0, -1.0),
        v(0.0, 1.0, 1.0, 0.0),
        v(0.0, 1.0, -1.0, 0.0),
    ]
}

/// `B^dagger M B` where the columns of `B` are the Bell states.
pub fn to_bell_basis(m: &CMatrix) -> CMatrix {
    assert_eq!(m.dim(), 4);
    let bell = bell_basis();
    let mut b = CMatrix::zeros(4);
    for (col, state) in bell.iter().enumerate() {
        for (row, &amp) in state.iter().enumerate() {
            b[(row, col)] = amp;
        }
    }
    &(&b.adjoint() * m) * &b
}

/// `delta(rho, sigma) = 1/2 ||rho - sigma||_1`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidMatrix(format!(
            "dimension mismatch: {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    // Fixed operand order makes the result exactly symmetric.
    let (a, b) = if lex_le(rho.matrix(), sigma.matrix()) {
        (rho, sigma)
    } else {
        (sigma, rho)
    };
    let diff = a.matrix() - b.matrix();
    let eig = diff.hermitian_eigenvalues()?;
    let d = 0.5 * eig.iter().map(|e| e.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

fn lex_le(a: &CMatrix, b: &CMatrix) -> bool {
    for (x, y) in a.data.iter().zip(&b.data) {
        match (x.re, x.im).partial_cmp(&(y.re, y.im)) {
            Some(std::cmp::Ordering::Less) => return true,
            Some(std::cmp::Ordering::Greater) => return false,
            _ => {}
        }
    }
    true
}

/// Counts payload errors over `count` random qubits sent through `channel`.
pub fn measure_error_rate(
    channel: &ChannelModel,
    encoding: Encoding,
    count: usize,
    src: &mut RandomSource,
) -> (usize, f64) {
    let basis = src.basis(encoding, count);
    let payload = src.bits(count);
    let qubits: Vec<QubitSymbol> = (0..count)
        .map(|i| QubitSymbol::new(basis.get(i), payload.get(i)))
        .collect();
    let mut channel_src = src.fork("channel");
    let out = transmit(channel, encoding, &qubits, &mut channel_src);
    let errors = out.iter().zip(&qubits).filter(|(a, b)| a.payload != b.payload).count();
    let rate = if count == 0 { 0.0 } else { errors as f64 / count as f64 };
    (errors, rate)
}

/// `1/4 sum_alpha (sigma_alpha (x) sigma_alpha) rho (sigma_alpha (x) sigma_alpha)`.
pub fn pauli_twirl(rho_ab: &DensityMatrix) -> Result<DensityMatrix> {
    if rho_ab.dim() != 4 {
        return Err(Error::InvalidMatrix(format!(
            "twirl needs a two-qubit state, got dimension {}",
            rho_ab.dim()
        )));
    }
    let mut acc = CMatrix::zeros(4);
    for p in paulis() {
        let pp = p.kron(&p);
        acc = &acc + &(&(&pp * rho_ab.matrix()) * &pp);
    }
    DensityMatrix::new(acc.scale(0.25))
}
