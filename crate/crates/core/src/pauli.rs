//! Pauli strings in bit-packed symplectic form.
//!
//! A string on `n` qubits is stored as two bit vectors `x` and `z`; the
//! single-qubit factor on qubit `q` is `I` for `(0,0)`, `X` for `(1,0)`,
//! `Z` for `(0,1)` and `Y` for `(1,1)`. Qubit 0 is the leftmost character of
//! the text label and the most significant bit of a computational basis
//! index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

/// Single-qubit Pauli factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A power of the imaginary unit, `i^k` with `k` in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    /// Exponent `k` of `i^k`.
    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// `+1` or `-1` for real phases, `None` for `±i`.
    pub fn as_sign(self) -> Option<Sign> {
        match self.0 {
            0 => Some(Sign::Plus),
            2 => Some(Sign::Minus),
            _ => None,
        }
    }

    /// `(re, im)` of the phase.
    pub fn to_complex_parts(self) -> (i8, i8) {
        match self.0 {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn flipped_if(self, cond: bool) -> Sign {
        if cond {
            self.flip()
        } else {
            self
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Minus
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        self.flipped_if(rhs.is_negative())
    }
}

/// An `n`-qubit Pauli string without phase.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: vec![0; w], z: vec![0; w] }
    }

    /// Build from per-qubit factors, qubit 0 first.
    pub fn from_paulis(factors: &[Pauli]) -> Self {
        let mut p = PauliString::identity(factors.len());
        for (q, &f) in factors.iter().enumerate() {
            p.set(q, f);
        }
        p
    }

    /// The string whose qubit `q` factor is digit `q` (base 4, qubit 0 least
    /// significant) of `index`, with digits `0=I, 1=X, 2=Y, 3=Z`.
    pub fn from_index(n: usize, mut index: u128) -> Self {
        let mut p = PauliString::identity(n);
        for q in 0..n {
            let f = match index % 4 {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            };
            p.set(q, f);
            index /= 4;
        }
        p
    }

    /// Single non-identity factor `f` on qubit `q`.
    pub fn single(n: usize, q: usize, f: Pauli) -> Self {
        let mut p = PauliString::identity(n);
        p.set(q, f);
        p
    }

    pub fn parse(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(Error::PauliLabel { label: label.into(), reason: "empty label".into() });
        }
        let mut factors = Vec::with_capacity(label.len());
        for (pos, c) in label.chars().enumerate() {
            let f = Pauli::from_char(c).ok_or_else(|| Error::PauliLabel {
                label: label.into(),
                reason: format!("illegal character {c:?} at position {pos}"),
            })?;
            factors.push(f);
        }
        Ok(PauliString::from_paulis(&factors))
    }

    pub fn label(&self) -> String {
        (0..self.n).map(|q| self.get(q).as_char()).collect()
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / WORD] >> (q % WORD)) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / WORD] >> (q % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set_x(&mut self, q: usize, v: bool) {
        let mask = 1u64 << (q % WORD);
        if v {
            self.x[q / WORD] |= mask;
        } else {
            self.x[q / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn set_z(&mut self, q: usize, v: bool) {
        let mask = 1u64 << (q % WORD);
        if v {
            self.z[q / WORD] |= mask;
        } else {
            self.z[q / WORD] &= !mask;
        }
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set(&mut self, q: usize, f: Pauli) {
        let (x, z) = f.bits();
        self.set_x(q, x);
        self.set_z(q, z);
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x | z).count_ones() as usize).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// True iff every factor is `I` or `Z`.
    pub fn is_z_diagonal(&self) -> bool {
        self.x.iter().all(|&w| w == 0)
    }

    pub fn count_y(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x & z).count_ones() as usize).sum()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.commutes_unchecked(other))
    }

    /// Commutation test for strings already known to have equal length.
    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        let mut parity = 0u32;
        for w in 0..self.x.len() {
            parity ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones();
        }
        parity & 1 == 0
    }

    /// Operator product `self * other = phase * result`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        self.check_len(other)?;
        Ok(self.multiply_unchecked(other))
    }

    pub(crate) fn multiply_unchecked(&self, other: &PauliString) -> (Phase, PauliString) {
        // Per qubit: XY = iZ, YZ = iX, ZX = iY and the reversed products pick up -i.
        let mut plus = 0i64;
        let mut minus = 0i64;
        let mut out = PauliString::identity(self.n);
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[w], self.z[w], other.x[w], other.z[w]);
            let xy = x1 & !z1 & x2 & z2;
            let yz = x1 & z1 & !x2 & z2;
            let zx = !x1 & z1 & x2 & !z2;
            let yx = x1 & z1 & x2 & !z2;
            let zy = !x1 & z1 & x2 & z2;
            let xz = x1 & !z1 & !x2 & z2;
            plus += (xy | yz | zx).count_ones() as i64;
            minus += (yx | zy | xz).count_ones() as i64;
            out.x[w] = x1 ^ x2;
            out.z[w] = z1 ^ z2;
        }
        (Phase::from_power(plus - minus), out)
    }

    /// Bit masks over computational basis indices: qubit `q` maps to bit
    /// `n - 1 - q`. Returns `(x_mask, z_mask)`.
    pub fn basis_masks(&self) -> (u64, u64) {
        assert!(self.n <= 64, "basis masks need n <= 64");
        let mut xm = 0u64;
        let mut zm = 0u64;
        for q in 0..self.n {
            let bit = 1u64 << (self.n - 1 - q);
            if self.x_bit(q) {
                xm |= bit;
            }
            if self.z_bit(q) {
                zm |= bit;
            }
        }
        (xm, zm)
    }

    #[inline]
    pub(crate) fn x_words(&self) -> &[u64] {
        &self.x
    }

    /// Qubits carrying a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.x_bit(q) || self.z_bit(q)).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({})", self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PauliString::parse(s)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        PauliString::parse(&label).map_err(serde::de::Error::custom)
    }
}

/// A Hermitian Pauli operator with a `±1` sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPauli {
    pub sign: Sign,
    pub pauli: PauliString,
}

impl SignedPauli {
    pub fn new(sign: Sign, pauli: PauliString) -> Self {
        SignedPauli { sign, pauli }
    }

    pub fn plus(pauli: PauliString) -> Self {
        SignedPauli { sign: Sign::Plus, pauli }
    }
}

impl fmt::Display for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign.is_negative() { '-' } else { '+' };
        write!(f, "{s}{}", self.pauli)
    }
}
