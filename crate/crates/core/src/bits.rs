//! Finite binary strings.
//!
//! `BitString` orders length-lexicographically (shorter first, then `0 < 1`),
//! which is the enumeration order used for target strings. Plain
//! lexicographic order ("leftmost") is available through [`BitString::lex_cmp`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid bit character {0:?}")]
pub struct ParseBitsError(pub char);

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, b: bool) {
        self.bits.push(b);
    }

    pub fn set(&mut self, i: usize, b: bool) {
        self.bits[i] = b;
    }

    pub fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    pub fn child(&self, b: bool) -> Self {
        let mut out = self.clone();
        out.push(b);
        out
    }

    pub fn concat(&self, other: &BitString) -> Self {
        let mut bits = Vec::with_capacity(self.len() + other.len());
        bits.extend_from_slice(&self.bits);
        bits.extend_from_slice(&other.bits);
        Self { bits }
    }

    pub fn extend_from(&mut self, other: &[bool]) {
        self.bits.extend_from_slice(other);
    }

    /// The first `len` bits (the whole string if shorter).
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            bits: self.bits[..len.min(self.len())].to_vec(),
        }
    }

    pub fn suffix_from(&self, start: usize) -> Self {
        Self {
            bits: self.bits[start.min(self.len())..].to_vec(),
        }
    }

    /// `self ⪯ other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.len() <= other.len() && other.bits[..self.len()] == self.bits[..]
    }

    pub fn is_proper_prefix_of(&self, other: &BitString) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    /// One of the two strings is a prefix of the other.
    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// Proper prefixes, shortest first (excludes `self`).
    pub fn proper_prefixes(&self) -> impl Iterator<Item = BitString> + '_ {
        (0..self.len()).map(move |l| self.prefix(l))
    }

    /// Plain lexicographic order: a proper prefix precedes its extensions.
    pub fn lex_cmp(&self, other: &BitString) -> Ordering {
        self.bits.cmp(&other.bits)
    }

    /// Position in the length-lex enumeration; `""` is 0.
    ///
    /// Index of σ is `2^|σ| - 1 + value(σ)`. Panics past 63 bits.
    pub fn length_lex_index(&self) -> u64 {
        assert!(self.len() < 64, "string too long for a u64 index");
        let base = (1u64 << self.len()) - 1;
        let value = self
            .bits
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        base + value
    }

    pub fn from_length_lex_index(index: u64) -> Self {
        // Length l covers indices [2^l - 1, 2^(l+1) - 2].
        let len = 63 - (index + 1).leading_zeros() as usize;
        let value = index + 1 - (1u64 << len);
        let bits = (0..len).rev().map(|k| (value >> k) & 1 == 1).collect();
        Self { bits }
    }

    /// Text form used in line-oriented files: `-` for the empty string.
    pub fn to_token(&self) -> String {
        if self.is_empty() {
            "-".to_string()
        } else {
            self.to_string()
        }
    }

    pub fn from_token(token: &str) -> Result<Self, ParseBitsError> {
        if token == "-" {
            Ok(Self::new())
        } else {
            token.parse()
        }
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
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
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ParseBitsError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }
}

/// Shorthand for literals in tests and fixtures. Panics on bad input.
pub fn bs(s: &str) -> BitString {
    s.parse().expect("bit literal")
}
