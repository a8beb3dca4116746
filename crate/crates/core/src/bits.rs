//! Classical bit strings shared by every layer of the simulator.

use std::fmt;
use std::ops::{BitXor, Index, Not};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QpcError};

/// An ordered string of classical bits.
///
/// Displayed and parsed as a string of `0`/`1` characters in index order,
/// so `"0101"` has bit 0 equal to `false`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    /// The `len` low bits of `value`, most significant bit first.
    pub fn from_u64_msb(value: u64, len: usize) -> Self {
        Self((0..len).rev().map(|k| (value >> k) & 1 == 1).collect())
    }

    /// Interprets the string as an unsigned integer, first bit most significant.
    pub fn to_u64_msb(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&b| !b)
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|&b| !b).collect())
    }

    /// Complements the string when `flip` is set, otherwise returns a copy.
    pub fn flip_if(&self, flip: bool) -> Self {
        if flip {
            self.complement()
        } else {
            self.clone()
        }
    }

    pub fn xor(&self, other: &Self) -> crate::Result<Self> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "bit strings of length {} and {} cannot be combined",
                self.len(),
                other.len()
            )));
        }
        Ok(Self(self.iter().zip(other.iter()).map(|(a, b)| a ^ b).collect()))
    }

    /// Prepends a single bit.
    pub fn with_prefix(&self, bit: bool) -> Self {
        let mut bits = Vec::with_capacity(self.len() + 1);
        bits.push(bit);
        bits.extend_from_slice(&self.0);
        Self(bits)
    }

    pub fn split_first(&self) -> Option<(bool, BitString)> {
        self.0
            .split_first()
            .map(|(&head, tail)| (head, BitString(tail.to_vec())))
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Index<usize> for BitString {
    type Output = bool;

    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl Not for &BitString {
    type Output = BitString;

    fn not(self) -> BitString {
        self.complement()
    }
}

/// Panics on length mismatch; use [`BitString::xor`] for a checked version.
impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of equal-length bit strings")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
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
    type Err = QpcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
