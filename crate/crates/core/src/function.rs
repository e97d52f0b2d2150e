//! Approximated functions `f_s(σ)` and declarative synthetic instances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

/// Largest value a synthetic schedule may produce.
pub const MAX_VALUE: u64 = 65_535;

pub trait ApproximatedFunction {
    /// `f_s(σ)`; deterministic.
    fn evaluate(&self, sigma: &BitString, stage: u64) -> u64;

    /// A stage from which `f_s(σ)` no longer changes, when known.
    fn stable_from(&self, _sigma: &BitString) -> Option<u64> {
        None
    }
}

/// `f(σ) = ⌊log₂|σ|⌋`, with `f("") = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FloorLog2Length;

pub fn floor_log2(n: u64) -> u64 {
    if n == 0 {
        0
    } else {
        63 - u64::from(n.leading_zeros())
    }
}

impl ApproximatedFunction for FloorLog2Length {
    fn evaluate(&self, sigma: &BitString, _stage: u64) -> u64 {
        floor_log2(sigma.len() as u64)
    }

    fn stable_from(&self, _sigma: &BitString) -> Option<u64> {
        Some(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Any,
    Exact(BitString),
    Prefix(BitString),
    Length(usize),
}

impl Pattern {
    pub fn matches(&self, sigma: &BitString) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Exact(s) => s == sigma,
            Pattern::Prefix(p) => p.is_prefix_of(sigma),
            Pattern::Length(n) => sigma.len() == *n,
        }
    }

    /// Whether only finitely many strings match.
    pub fn is_finite(&self) -> bool {
        matches!(self, Pattern::Exact(_) | Pattern::Length(_))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad pattern {0:?}; expected any, exact:<bits>, prefix:<bits> or length:<n>")]
pub struct PatternError(pub String);

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PatternError(s.to_string());
        if s == "any" {
            return Ok(Pattern::Any);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(err)?;
        match kind {
            "exact" => Ok(Pattern::Exact(BitString::from_token(arg).map_err(|_| err())?)),
            "prefix" => Ok(Pattern::Prefix(BitString::from_token(arg).map_err(|_| err())?)),
            "length" => Ok(Pattern::Length(arg.parse().map_err(|_| err())?)),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Any => f.write_str("any"),
            Pattern::Exact(s) => write!(f, "exact:{}", s.to_token()),
            Pattern::Prefix(s) => write!(f, "prefix:{}", s.to_token()),
            Pattern::Length(n) => write!(f, "length:{n}"),
        }
    }
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DefaultRule {
    /// `scale·|σ| + offset`
    Length { scale: u64, offset: u64 },
    FloorLog2,
    Constant { value: u64 },
}

impl DefaultRule {
    fn value(&self, sigma: &BitString) -> u64 {
        match self {
            DefaultRule::Length { scale, offset } => scale
                .saturating_mul(sigma.len() as u64)
                .saturating_add(*offset),
            DefaultRule::FloorLog2 => floor_log2(sigma.len() as u64),
            DefaultRule::Constant { value } => *value,
        }
    }

    fn unbounded(&self) -> bool {
        match self {
            DefaultRule::Length { scale, .. } => *scale > 0,
            DefaultRule::FloorLog2 => true,
            DefaultRule::Constant { .. } => false,
        }
    }
}

/// `value` for strings matching `pattern` at stages `from..=until`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub pattern: Pattern,
    pub from: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<u64>,
    pub value: u64,
}

impl ScheduleEntry {
    fn active(&self, sigma: &BitString, stage: u64) -> bool {
        stage >= self.from && self.until.map_or(true, |u| stage <= u) && self.pattern.matches(sigma)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("value {0} exceeds the cap {MAX_VALUE}")]
    ValueTooLarge(u64),
    #[error("schedule entry {0} has an empty stage interval")]
    EmptyInterval(usize),
    #[error("declared finite_to_one = {declared} but the schedule makes it {derived}")]
    FlagMismatch { declared: bool, derived: bool },
}

/// A value schedule: the first active entry wins, otherwise the default.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub default: DefaultRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_to_one: Option<bool>,
}

impl FunctionSpec {
    pub fn length(scale: u64, offset: u64) -> Self {
        Self {
            default: DefaultRule::Length { scale, offset },
            schedule: Vec::new(),
            finite_to_one: None,
        }
    }

    pub fn floor_log2() -> Self {
        Self {
            default: DefaultRule::FloorLog2,
            schedule: Vec::new(),
            finite_to_one: None,
        }
    }

    pub fn constant(value: u64) -> Self {
        Self {
            default: DefaultRule::Constant { value },
            schedule: Vec::new(),
            finite_to_one: None,
        }
    }

    /// Ground truth read off the schedule. An entry affects infinitely many
    /// strings only when its pattern is infinite and its interval unbounded
    /// (a bounded interval is seen by finitely many queried strings).
    pub fn derived_finite_to_one(&self) -> bool {
        self.default.unbounded()
            && self
                .schedule
                .iter()
                .all(|e| e.pattern.is_finite() || e.until.is_some())
    }

    pub fn is_finite_to_one(&self) -> bool {
        self.finite_to_one.unwrap_or_else(|| self.derived_finite_to_one())
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let mut values: Vec<u64> = self.schedule.iter().map(|e| e.value).collect();
        match &self.default {
            DefaultRule::Length { scale, offset } => {
                // Checked at length 64, beyond any string the engine monitors.
                values.push(scale.saturating_mul(64).saturating_add(*offset));
            }
            DefaultRule::Constant { value } => values.push(*value),
            DefaultRule::FloorLog2 => {}
        }
        if let Some(&v) = values.iter().find(|&&v| v > MAX_VALUE) {
            return Err(SpecError::ValueTooLarge(v));
        }
        for (k, e) in self.schedule.iter().enumerate() {
            if e.until.is_some_and(|u| u < e.from) {
                return Err(SpecError::EmptyInterval(k));
            }
        }
        if let Some(declared) = self.finite_to_one {
            let derived = self.derived_finite_to_one();
            if declared != derived {
                return Err(SpecError::FlagMismatch { declared, derived });
            }
        }
        Ok(())
    }
}

impl ApproximatedFunction for FunctionSpec {
    fn evaluate(&self, sigma: &BitString, stage: u64) -> u64 {
        let v = self
            .schedule
            .iter()
            .find(|e| e.active(sigma, stage))
            .map(|e| e.value)
            .unwrap_or_else(|| self.default.value(sigma));
        v.min(MAX_VALUE)
    }

    fn stable_from(&self, sigma: &BitString) -> Option<u64> {
        let last_change = self
            .schedule
            .iter()
            .filter(|e| e.pattern.matches(sigma))
            .map(|e| e.until.map_or(e.from, |u| u + 1))
            .max()
            .unwrap_or(1);
        Some(last_change.max(1))
    }
}
