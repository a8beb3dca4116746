//! Dense statevector engine.
//!
//! Qubit 0 is the most significant bit of the basis index, so the ket
//! `|q0 q1 ... q(m-1)>` is stored at index `q0·2^(m-1) + ... + q(m-1)`.
//! States are immutable values; every operation returns a new state.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{invalid, QpcError, Result};

/// Largest joint system the engine will allocate.
pub const MAX_QUBITS: usize = 20;

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

/// Tolerance for unitarity of caller-supplied matrices.
pub const UNITARY_TOL: f64 = 1e-10;

// Marginals this close to 0 or 1 are treated as certain outcomes so that
// eigenstates measure deterministically despite rounding.
const CERTAINTY_TOL: f64 = 1e-12;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Computational basis `{|0>, |1>}`.
    Z,
    /// Hadamard basis `{|+>, |->}`; `|+>` reads as 0 and `|->` as 1.
    X,
}

impl Basis {
    pub fn conjugate(self) -> Self {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Sign of a canonical GHZ state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// The four single-qubit states used as decoy photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoyKind {
    Zero,
    One,
    Plus,
    Minus,
}

impl DecoyKind {
    pub const ALL: [DecoyKind; 4] = [DecoyKind::Zero, DecoyKind::One, DecoyKind::Plus, DecoyKind::Minus];

    pub fn basis(self) -> Basis {
        match self {
            DecoyKind::Zero | DecoyKind::One => Basis::Z,
            DecoyKind::Plus | DecoyKind::Minus => Basis::X,
        }
    }

    /// Outcome bit an honest measurement in [`DecoyKind::basis`] returns.
    pub fn bit(self) -> bool {
        matches!(self, DecoyKind::One | DecoyKind::Minus)
    }

    pub fn from_basis_bit(basis: Basis, bit: bool) -> Self {
        match (basis, bit) {
            (Basis::Z, false) => DecoyKind::Zero,
            (Basis::Z, true) => DecoyKind::One,
            (Basis::X, false) => DecoyKind::Plus,
            (Basis::X, true) => DecoyKind::Minus,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..4)]
    }
}

/// A normalized pure state of `qubit_count` qubits.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

/// Result of measuring one qubit. The measured qubit stays in the state,
/// collapsed onto the observed eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleQubitOutcome {
    pub bit: bool,
    pub collapsed: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductSplit {
    pub leading: StateVector,
    pub trailing: StateVector,
    pub residual: f64,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector[{}](", self.qubits)?;
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > EXACT_TOL {
                if !first {
                    f.write_str(" + ")?;
                }
                first = false;
                write!(f, "({:.4}{:+.4}i)|{}>", a.re, a.im, BitString::from_u64_msb(i as u64, self.qubits))?;
            }
        }
        f.write_str(")")
    }
}

fn check_qubit_count(qubits: usize) -> Result<()> {
    if qubits == 0 {
        return Err(invalid("a state needs at least one qubit"));
    }
    if qubits > MAX_QUBITS {
        return Err(QpcError::TooManyQubits { requested: qubits, max: MAX_QUBITS });
    }
    Ok(())
}

impl StateVector {
    /// Builds a state from raw amplitudes, rejecting unnormalized input.
    pub fn from_amplitudes(qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(qubits)?;
        if amps.len() != 1 << qubits {
            return Err(invalid(format!(
                "{} amplitudes supplied for a {qubits}-qubit state",
                amps.len()
            )));
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > UNITARY_TOL {
            return Err(QpcError::NotNormalized { norm_sqr });
        }
        Ok(Self { qubits, amps })
    }

    /// The computational basis state `|index>`.
    pub fn basis_state(qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(qubits)?;
        if index >= 1 << qubits {
            return Err(invalid(format!("basis index {index} out of range for {qubits} qubits")));
        }
        let mut amps = vec![ZERO; 1 << qubits];
        amps[index] = ONE;
        Ok(Self { qubits, amps })
    }

    /// `(|0 b> + |1 ~b>)/√2` for an `n`-bit string `b`; the result has `n + 1` qubits.
    pub fn make_ghz(bits: &BitString) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("GHZ carrier needs at least one data bit"));
        }
        let qubits = bits.len() + 1;
        check_qubit_count(qubits)?;
        let low = bits.to_u64_msb() as usize;
        let high = (1usize << qubits) - 1 - low;
        let mut amps = vec![ZERO; 1 << qubits];
        amps[low] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[high] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(Self { qubits, amps })
    }

    /// Canonical GHZ state `(|B(k)> ± |B(2^m - k - 1)>)/√2` for `0 <= k < 2^(m-1)`.
    pub fn canonical_ghz(k: usize, sign: Sign, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("canonical GHZ family needs m >= 2, got {m}")));
        }
        check_qubit_count(m)?;
        if k >= 1 << (m - 1) {
            return Err(invalid(format!("k = {k} out of range 0..{} for m = {m}", 1usize << (m - 1))));
        }
        let partner = (1usize << m) - k - 1;
        let s = match sign {
            Sign::Plus => FRAC_1_SQRT_2,
            Sign::Minus => -FRAC_1_SQRT_2,
        };
        let mut amps = vec![ZERO; 1 << m];
        amps[k] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[partner] = Complex64::new(s, 0.0);
        Ok(Self { qubits: m, amps })
    }

    pub fn prepare_decoy(kind: DecoyKind) -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let amps = match kind {
            DecoyKind::Zero => vec![ONE, ZERO],
            DecoyKind::One => vec![ZERO, ONE],
            DecoyKind::Plus => vec![h, h],
            DecoyKind::Minus => vec![h, -h],
        };
        Self { qubits: 1, amps }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.qubits != other.qubits {
            return Err(QpcError::DimensionMismatch { left: self.qubits, right: other.qubits });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `self ⊗ other`; the qubits of `other` follow those of `self`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let qubits = self.qubits + other.qubits;
        check_qubit_count(qubits)?;
        let mut amps = Vec::with_capacity(1 << qubits);
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(StateVector { qubits, amps })
    }

    fn mask(&self, index: usize) -> Result<usize> {
        if index >= self.qubits {
            return Err(QpcError::QubitOutOfRange { index, qubits: self.qubits });
        }
        Ok(1 << (self.qubits - 1 - index))
    }

    /// Born-rule sample of all qubits in the Z basis, qubit 0 first.
    pub fn measure_all_z<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_nonzero = 0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = i;
            }
            acc += p;
            if r < acc {
                chosen = Some(i);
                break;
            }
        }
        let index = chosen.unwrap_or(last_nonzero);
        BitString::from_u64_msb(index as u64, self.qubits)
    }

    /// Probability that measuring qubit `index` in `basis` yields `bit`.
    pub fn outcome_probability(&self, index: usize, basis: Basis, bit: bool) -> Result<f64> {
        let mask = self.mask(index)?;
        let mut p = 0.0;
        for i in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[i], self.amps[i | mask]);
            p += match basis {
                Basis::Z => {
                    if bit {
                        a1.norm_sqr()
                    } else {
                        a0.norm_sqr()
                    }
                }
                Basis::X => {
                    let c = if bit { a0 - a1 } else { a0 + a1 };
                    0.5 * c.norm_sqr()
                }
            };
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Projects qubit `index` onto the `bit` eigenvector of `basis` and renormalizes.
    pub fn project(&self, index: usize, basis: Basis, bit: bool) -> Result<StateVector> {
        let p = self.outcome_probability(index, basis, bit)?;
        if p <= 0.0 {
            return Err(invalid(format!("outcome {} in {basis} basis has zero probability", u8::from(bit))));
        }
        let mask = self.mask(index)?;
        let scale = 1.0 / p.sqrt();
        let mut amps = vec![ZERO; self.amps.len()];
        for i in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[i], self.amps[i | mask]);
            let (b0, b1) = match (basis, bit) {
                (Basis::Z, false) => (a0, ZERO),
                (Basis::Z, true) => (ZERO, a1),
                (Basis::X, false) => {
                    let c = 0.5 * (a0 + a1);
                    (c, c)
                }
                (Basis::X, true) => {
                    let c = 0.5 * (a0 - a1);
                    (c, -c)
                }
            };
            amps[i] = b0 * scale;
            amps[i | mask] = b1 * scale;
        }
        Ok(StateVector { qubits: self.qubits, amps })
    }

    /// Measures one qubit in `basis`, leaving it in the collapsed state.
    pub fn measure_qubit<R: Rng + ?Sized>(
        &self,
        index: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<SingleQubitOutcome> {
        let p0 = self.outcome_probability(index, basis, false)?;
        let bit = if p0 >= 1.0 - CERTAINTY_TOL {
            false
        } else if p0 <= CERTAINTY_TOL {
            true
        } else {
            rng.random::<f64>() >= p0
        };
        let collapsed = self.project(index, basis, bit)?;
        Ok(SingleQubitOutcome { bit, collapsed })
    }

    /// Applies a 2×2 matrix to one qubit. The matrix is not checked for unitarity.
    pub fn apply_single_qubit(&self, index: usize, m: &Matrix2) -> Result<StateVector> {
        let mask = self.mask(index)?;
        let mut amps = self.amps.clone();
        for i in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[i], self.amps[i | mask]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(StateVector { qubits: self.qubits, amps })
    }

    /// Applies `u` to the ordered pair (`data`, `ancilla`), identity elsewhere.
    pub fn apply_two_qubit_unitary(
        &self,
        data: usize,
        ancilla: usize,
        u: &TwoQubitUnitary,
    ) -> Result<StateVector> {
        let dmask = self.mask(data)?;
        let amask = self.mask(ancilla)?;
        if data == ancilla {
            return Err(invalid("data and ancilla must be distinct qubits"));
        }
        let mut amps = self.amps.clone();
        for i in (0..self.amps.len()).filter(|i| i & (dmask | amask) == 0) {
            let idx = [i, i | amask, i | dmask, i | dmask | amask];
            let input = idx.map(|k| self.amps[k]);
            let out = u.apply(&input);
            for (k, v) in idx.iter().zip(out) {
                amps[*k] = v;
            }
        }
        Ok(StateVector { qubits: self.qubits, amps })
    }

    /// Best rank-one split of the state into its first `leading` qubits and the rest.
    ///
    /// `residual` is the norm distance between the state and the tensor product of
    /// the two returned factors; it is zero exactly when the state is a product
    /// across that cut.
    pub fn split_product(&self, leading: usize) -> Result<ProductSplit> {
        if leading == 0 || leading >= self.qubits {
            return Err(invalid(format!(
                "cut after {leading} qubits is not inside a {}-qubit state",
                self.qubits
            )));
        }
        let rows = 1usize << leading;
        let cols = 1usize << (self.qubits - leading);
        let entry = |r: usize, c: usize| self.amps[r * cols + c];
        let col_norm = |c: usize| (0..rows).map(|r| entry(r, c).norm_sqr()).sum::<f64>();
        let pivot = (0..cols)
            .max_by(|&a, &b| col_norm(a).total_cmp(&col_norm(b)))
            .unwrap_or(0);
        let pivot_norm = col_norm(pivot).sqrt();
        let left: Vec<Complex64> = (0..rows).map(|r| entry(r, pivot) / pivot_norm).collect();
        let right: Vec<Complex64> = (0..cols)
            .map(|c| (0..rows).map(|r| left[r].conj() * entry(r, c)).sum())
            .collect();
        let mut residual = 0.0;
        for (r, l) in left.iter().enumerate() {
            for (c, rt) in right.iter().enumerate() {
                residual += (entry(r, c) - l * rt).norm_sqr();
            }
        }
        let right_norm = right.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let right: Vec<Complex64> = right.into_iter().map(|x| x / right_norm).collect();
        Ok(ProductSplit {
            leading: StateVector { qubits: leading, amps: left },
            trailing: StateVector { qubits: self.qubits - leading, amps: right },
            residual: residual.sqrt(),
        })
    }

    /// `|<self|other>|² >= 1 - tol`, i.e. equal up to a global phase.
    pub fn approx_eq_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        match self.inner_product(other) {
            Ok(ip) => (1.0 - ip.norm()).abs() <= tol,
            Err(_) => false,
        }
    }
}

/// A 4×4 unitary acting on a (data, ancilla) qubit pair.
///
/// Row and column indices are `2·data_bit + ancilla_bit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[Complex64; 4]; 4]", into = "[[Complex64; 4]; 4]")]
pub struct TwoQubitUnitary {
    matrix: [[Complex64; 4]; 4],
}

impl TwoQubitUnitary {
    pub fn new(matrix: [[Complex64; 4]; 4]) -> Result<Self> {
        let u = Self { matrix };
        let deviation = u.unitarity_deviation();
        if deviation.is_nan() || deviation > UNITARY_TOL {
            return Err(QpcError::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self { matrix: m }
    }

    /// Controlled-NOT with the data qubit as control.
    pub fn cnot() -> Self {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][1] = ONE;
        m[2][3] = ONE;
        m[3][2] = ONE;
        Self { matrix: m }
    }

    /// `a ⊗ b` with `a` on the data qubit.
    pub fn kron(a: &Matrix2, b: &Matrix2) -> Result<Self> {
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r >> 1][c >> 1] * b[r & 1][c & 1];
            }
        }
        Self::new(m)
    }

    /// Haar-distributed random unitary.
    pub fn random_haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cols = random_unitary_columns(4, rng);
        let mut m = [[ZERO; 4]; 4];
        for (c, col) in cols.iter().enumerate() {
            for r in 0..4 {
                m[r][c] = col[r];
            }
        }
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.matrix
    }

    /// Largest entry-wise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let v: Complex64 = (0..4).map(|k| m[k][i].conj() * m[k][j]).sum();
                let target = if i == j { ONE } else { ZERO };
                let d = (v - target).norm();
                if d.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn apply(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [ZERO; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|c| self.matrix[r][c] * v[c]).sum();
        }
        out
    }

    /// Column `2·data_bit + ancilla_bit`, i.e. `U|data_bit, ancilla_bit>`.
    pub fn column(&self, index: usize) -> [Complex64; 4] {
        [0, 1, 2, 3].map(|r| self.matrix[r][index])
    }
}

impl TryFrom<[[Complex64; 4]; 4]> for TwoQubitUnitary {
    type Error = QpcError;

    fn try_from(matrix: [[Complex64; 4]; 4]) -> Result<Self> {
        Self::new(matrix)
    }
}

impl From<TwoQubitUnitary> for [[Complex64; 4]; 4] {
    fn from(u: TwoQubitUnitary) -> Self {
        u.matrix
    }
}

/// Haar-random 2×2 unitary.
pub fn random_matrix2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2 {
    let cols = random_unitary_columns(2, rng);
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

pub fn hadamard() -> Matrix2 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn random_complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Gram-Schmidt on a complex Ginibre matrix. The resulting columns are
/// Haar-distributed because the implied R factor has a positive real diagonal.
fn random_unitary_columns<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| random_complex_gaussian(rng)).collect();
        for q in &cols {
            let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, qa) in v.iter_mut().zip(q) {
                *x -= proj * qa;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn assert_two_term(state: &StateVector, a: usize, b: usize, sign_b: f64) {
        for (i, amp) in state.amplitudes().iter().enumerate() {
            let expected = if i == a {
                FRAC_1_SQRT_2
            } else if i == b {
                sign_b * FRAC_1_SQRT_2
            } else {
                0.0
            };
            assert!((amp - Complex64::new(expected, 0.0)).norm() < EXACT_TOL, "index {i}: {amp}");
        }
    }

    #[test]
    fn make_ghz_examples() {
        assert_two_term(&StateVector::make_ghz(&bits("01")).unwrap(), 0b001, 0b110, 1.0);
        assert_two_term(&StateVector::make_ghz(&bits("00")).unwrap(), 0b000, 0b111, 1.0);
        assert_two_term(&StateVector::make_ghz(&bits("101")).unwrap(), 0b0101, 0b1010, 1.0);
        assert!(StateVector::make_ghz(&BitString::default()).is_err());
    }

    #[test]
    fn canonical_ghz_examples() {
        assert_two_term(&StateVector::canonical_ghz(0, Sign::Plus, 3).unwrap(), 0, 7, 1.0);
        assert_two_term(&StateVector::canonical_ghz(0, Sign::Minus, 3).unwrap(), 0, 7, -1.0);
        assert_two_term(&StateVector::canonical_ghz(3, Sign::Plus, 3).unwrap(), 0b011, 0b100, 1.0);
        assert!(StateVector::canonical_ghz(4, Sign::Plus, 3).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g0p = StateVector::canonical_ghz(0, Sign::Plus, 3).unwrap();
        let g0m = StateVector::canonical_ghz(0, Sign::Minus, 3).unwrap();
        let g1p = StateVector::canonical_ghz(1, Sign::Plus, 3).unwrap();
        let g2p = StateVector::canonical_ghz(2, Sign::Plus, 3).unwrap();
        assert!((g0p.inner_product(&g0p).unwrap() - ONE).norm() < EXACT_TOL);
        assert!(g0p.inner_product(&g0m).unwrap().norm() < EXACT_TOL);
        assert!(g1p.inner_product(&g2p).unwrap().norm() < EXACT_TOL);
        let one = StateVector::prepare_decoy(DecoyKind::Zero);
        assert!(matches!(g0p.inner_product(&one), Err(QpcError::DimensionMismatch { .. })));
    }

    #[test]
    fn measure_all_z_only_returns_ghz_branches() {
        let state = StateVector::make_ghz(&bits("01")).unwrap();
        let mut rng = rng();
        let trials = 10_000;
        let mut low = 0;
        for _ in 0..trials {
            let out = state.measure_all_z(&mut rng).to_string();
            match out.as_str() {
                "001" => low += 1,
                "110" => {}
                other => panic!("impossible outcome {other}"),
            }
        }
        let freq = low as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 3.0 * 0.005, "frequency {freq}");
        let zero = StateVector::prepare_decoy(DecoyKind::Zero);
        for _ in 0..100 {
            assert_eq!(zero.measure_all_z(&mut rng).to_string(), "0");
        }
    }

    #[test]
    fn measure_qubit_examples() {
        let mut rng = rng();
        let plus = StateVector::prepare_decoy(DecoyKind::Plus);
        for _ in 0..100 {
            assert!(!plus.measure_qubit(0, Basis::X, &mut rng).unwrap().bit);
        }
        assert!((plus.outcome_probability(0, Basis::Z, true).unwrap() - 0.5).abs() < EXACT_TOL);

        let bell = StateVector::make_ghz(&bits("0")).unwrap();
        for _ in 0..50 {
            let out = bell.measure_qubit(0, Basis::Z, &mut rng).unwrap();
            let second = out.collapsed.measure_qubit(1, Basis::Z, &mut rng).unwrap();
            assert_eq!(out.bit, second.bit);
            assert!((out.collapsed.norm_sqr() - 1.0).abs() < EXACT_TOL);
            let again = out.collapsed.measure_qubit(0, Basis::Z, &mut rng).unwrap();
            assert_eq!(again.bit, out.bit);
        }
        assert!(matches!(
            bell.measure_qubit(2, Basis::Z, &mut rng),
            Err(QpcError::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn x_basis_collapse_is_eigenstate() {
        let mut rng = rng();
        let zero = StateVector::prepare_decoy(DecoyKind::Zero);
        let out = zero.measure_qubit(0, Basis::X, &mut rng).unwrap();
        let expected = StateVector::prepare_decoy(DecoyKind::from_basis_bit(Basis::X, out.bit));
        assert!(out.collapsed.approx_eq_up_to_phase(&expected, EXACT_TOL));
    }

    #[test]
    fn decoy_states() {
        let h = FRAC_1_SQRT_2;
        let plus = StateVector::prepare_decoy(DecoyKind::Plus);
        let minus = StateVector::prepare_decoy(DecoyKind::Minus);
        assert_eq!(plus.amplitudes(), &[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]);
        assert_eq!(minus.amplitudes(), &[Complex64::new(h, 0.0), Complex64::new(-h, 0.0)]);
        assert_eq!(StateVector::prepare_decoy(DecoyKind::Zero).amplitudes(), &[ONE, ZERO]);
    }

    #[test]
    fn tensor_examples() {
        let zero = StateVector::prepare_decoy(DecoyKind::Zero);
        let one = StateVector::prepare_decoy(DecoyKind::One);
        let plus = StateVector::prepare_decoy(DecoyKind::Plus);
        assert_eq!(zero.tensor(&one).unwrap(), StateVector::basis_state(2, 0b01).unwrap());
        let pz = plus.tensor(&zero).unwrap();
        assert_two_term(&pz, 0b00, 0b10, 1.0);
    }

    #[test]
    fn two_qubit_unitary_examples() {
        let plus = StateVector::prepare_decoy(DecoyKind::Plus);
        let zero = StateVector::prepare_decoy(DecoyKind::Zero);
        let pz = plus.tensor(&zero).unwrap();
        let bell = pz.apply_two_qubit_unitary(0, 1, &TwoQubitUnitary::cnot()).unwrap();
        assert_two_term(&bell, 0b00, 0b11, 1.0);
        let same = pz.apply_two_qubit_unitary(0, 1, &TwoQubitUnitary::identity()).unwrap();
        assert_eq!(same, pz);
        assert!(pz.apply_two_qubit_unitary(0, 0, &TwoQubitUnitary::cnot()).is_err());
    }

    #[test]
    fn cnot_with_reversed_roles() {
        // data on qubit 1 controls qubit 0
        let state = StateVector::basis_state(2, 0b01).unwrap();
        let out = state.apply_two_qubit_unitary(1, 0, &TwoQubitUnitary::cnot()).unwrap();
        assert_eq!(out, StateVector::basis_state(2, 0b11).unwrap());
    }

    #[test]
    fn split_product_detects_entanglement() {
        let ghz = StateVector::make_ghz(&bits("10")).unwrap();
        let plus = StateVector::prepare_decoy(DecoyKind::Plus);
        let joint = ghz.tensor(&plus).unwrap();
        let split = joint.split_product(3).unwrap();
        assert!(split.residual < EXACT_TOL);
        assert!(split.leading.approx_eq_up_to_phase(&ghz, EXACT_TOL));
        assert!(split.trailing.approx_eq_up_to_phase(&plus, EXACT_TOL));

        let bell = StateVector::make_ghz(&bits("0")).unwrap();
        assert!(bell.split_product(1).unwrap().residual > 0.5);
        assert!(bell.split_product(0).is_err());
    }

    #[test]
    fn non_unitary_rejected() {
        let mut m = *TwoQubitUnitary::identity().matrix();
        m[0][0] = Complex64::new(2.0, 0.0);
        assert!(matches!(TwoQubitUnitary::new(m), Err(QpcError::NotUnitary { .. })));
        m[0][0] = Complex64::new(f64::NAN, 0.0);
        assert!(TwoQubitUnitary::new(m).is_err());
    }

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = rng();
        for _ in 0..50 {
            let u = TwoQubitUnitary::random_haar(&mut rng);
            assert!(u.unitarity_deviation() < 1e-12);
        }
    }

    #[test]
    fn qubit_cap_enforced() {
        assert!(matches!(
            StateVector::basis_state(MAX_QUBITS + 1, 0),
            Err(QpcError::TooManyQubits { .. })
        ));
        let big = StateVector::basis_state(MAX_QUBITS, 0).unwrap();
        let one = StateVector::prepare_decoy(DecoyKind::Zero);
        assert!(big.tensor(&one).is_err());
    }
}
