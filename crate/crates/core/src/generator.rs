//! Seeded synthetic event streams.
//!
//! Every generated event is checked against a scratch enumeration before it
//! is kept: a clash is retried with a fresh program, repeated failures shrink
//! the use, and an event that still fails is dropped.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::oracle::{DescriptionEvent, EnumerationState, EventStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pressure {
    /// No events at all.
    Empty,
    /// Short uses only: every key sits below the first branching level.
    Benign,
    /// Uses that reach past the current branching levels.
    Injurious,
}

impl fmt::Display for Pressure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pressure::Empty => "empty",
            Pressure::Benign => "benign",
            Pressure::Injurious => "injurious",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown profile {0:?}; expected empty, benign or injurious")]
pub struct ProfileError(pub String);

impl FromStr for Pressure {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empty" => Ok(Pressure::Empty),
            "benign" => Ok(Pressure::Benign),
            "injurious" => Ok(Pressure::Injurious),
            _ => Err(ProfileError(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorProfile {
    pub pressure: Pressure,
    /// Longest oracle prefix and output considered.
    pub max_len: usize,
    pub events: usize,
    /// Events fall in stages `1..=window`.
    pub window: u64,
    /// Outputs are drawn from the first `targets` strings.
    pub targets: u64,
    /// Cap on events per stage, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_stage: Option<usize>,
}

impl GeneratorProfile {
    pub fn empty() -> Self {
        Self {
            pressure: Pressure::Empty,
            max_len: 0,
            events: 0,
            window: 1,
            targets: 1,
            per_stage: None,
        }
    }

    /// Defaults for a named pressure level at a given horizon.
    pub fn preset(pressure: Pressure, horizon: u64, max_len: usize) -> Self {
        match pressure {
            Pressure::Empty => Self::empty(),
            Pressure::Benign => Self {
                pressure,
                max_len,
                events: 30,
                window: (horizon / 2).clamp(1, 200),
                targets: 64.min(horizon.max(1)),
                per_stage: None,
            },
            Pressure::Injurious => Self {
                pressure,
                max_len,
                events: 40,
                window: (horizon / 2).clamp(4, 120),
                targets: 32.min(horizon.max(1)),
                per_stage: None,
            },
        }
    }

    pub fn provenance(&self, seed: u64) -> String {
        let per_stage = self.per_stage.map_or("-".to_string(), |p| p.to_string());
        format!(
            "seed={seed} profile={} max_len={} events={} window={} targets={} per_stage={per_stage}",
            self.pressure, self.max_len, self.events, self.window, self.targets
        )
    }
}

/// 0-indexed branching positions of a run whose stream stays out of the way:
/// `n_i = 2i + 3`.
fn predicted_levels(max_len: usize) -> Vec<usize> {
    (0..).map(|i| 2 * i + 3).take_while(|&n| n < max_len).collect()
}

fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.gen()).collect())
}

/// Try to admit `make(attempt)` for a bounded number of attempts.
fn admit_with_retry(
    scratch: &mut EnumerationState,
    mut make: impl FnMut(usize) -> Option<DescriptionEvent>,
) -> Option<DescriptionEvent> {
    for attempt in 0..24 {
        let e = make(attempt)?;
        if let Ok(None) = scratch.check(&e) {
            scratch.admit(e.clone()).expect("checked");
            return Some(e);
        }
    }
    None
}

pub fn generate_adversarial_stream(seed: u64, profile: &GeneratorProfile) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = EventStream {
        provenance: profile.provenance(seed),
        events: Vec::new(),
    };
    if profile.pressure == Pressure::Empty || profile.events == 0 {
        return stream;
    }
    let mut scratch = EnumerationState::new();
    let levels = predicted_levels(profile.max_len + 1);
    let injurious = profile.pressure == Pressure::Injurious;
    // The injurious spike owns stage 3; everything else comes later so that
    // n_0 is still 3 when it lands.
    let first_stage = if injurious { 4 } else { 1 };
    let window = profile.window.max(first_stage);
    let mut stages: Vec<u64> = Vec::with_capacity(profile.events);
    let mut per_stage_count = std::collections::HashMap::new();
    for _ in 0..profile.events {
        for _ in 0..16 {
            let s = rng.gen_range(first_stage..=window);
            let c = per_stage_count.entry(s).or_insert(0usize);
            if profile.per_stage.map_or(true, |cap| *c < cap) {
                *c += 1;
                stages.push(s);
                break;
            }
        }
    }
    stages.sort_unstable();
    if injurious && profile.max_len >= 4 {
        let spike = admit_with_retry(&mut scratch, |_| {
            let len = rng.gen_range(2..6);
            Some(DescriptionEvent {
                stage: 3,
                oracle: BitString::from_bits(vec![false, false, false, true]),
                program: random_bits(&mut rng, len),
                output: BitString::new(),
                use_len: 4,
            })
        });
        stream.events.extend(spike);
    }
    for stage in stages {
        let target = BitString::from_length_lex_index(rng.gen_range(0..profile.targets.max(1)));
        let max_use = if injurious {
            profile.max_len.min(stage as usize + 4)
        } else {
            profile.max_len.min(2)
        };
        let mut use_len = rng.gen_range(0..=max_use);
        let mut oracle = BitString::zeros(use_len + rng.gen_range(0..=2usize));
        for &n in &levels {
            if n < oracle.len() {
                oracle.set(n, rng.gen());
            }
        }
        let (lo, hi) = if injurious {
            (2, profile.max_len + 2)
        } else {
            (3, profile.max_len + 4)
        };
        let kept = admit_with_retry(&mut scratch, |attempt| {
            if attempt > 0 && attempt % 8 == 0 {
                if use_len == 0 {
                    return None;
                }
                use_len -= 1;
            }
            let len = rng.gen_range(lo..=hi.max(lo));
            Some(DescriptionEvent {
                stage,
                oracle: oracle.clone(),
                program: random_bits(&mut rng, len),
                output: target.clone(),
                use_len,
            })
        });
        stream.events.extend(kept);
    }
    stream
}

/// Stream for the dimension application: prefixes `S↾n` of `reals` random
/// sequences, each described without an oracle and, half the time, more
/// cheaply with a short oracle prefix. Returns the stream and the sequences.
pub fn generate_dimension_stream(seed: u64, reals: usize, max_n: usize) -> (EventStream, Vec<BitString>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences: Vec<BitString> = (0..reals).map(|_| random_bits(&mut rng, max_n)).collect();
    let mut jobs: Vec<(u64, BitString)> = Vec::new();
    for s in &sequences {
        for n in 1..=max_n {
            jobs.push((rng.gen_range(1..=20), s.prefix(n)));
        }
    }
    jobs.sort_by_key(|(stage, _)| *stage);
    let mut scratch = EnumerationState::new();
    let mut events = Vec::new();
    for (stage, output) in jobs {
        let plain = admit_with_retry(&mut scratch, |_| {
            Some(DescriptionEvent {
                stage,
                oracle: BitString::new(),
                program: random_bits(&mut rng, 14),
                output: output.clone(),
                use_len: 0,
            })
        });
        events.extend(plain);
        if rng.gen_bool(0.5) {
            let use_len = rng.gen_range(1..=2);
            let relative = admit_with_retry(&mut scratch, |_| {
                Some(DescriptionEvent {
                    stage,
                    oracle: BitString::zeros(use_len),
                    program: random_bits(&mut rng, 12),
                    output: output.clone(),
                    use_len,
                })
            });
            events.extend(relative);
        }
    }
    let stream = EventStream {
        provenance: format!("seed={seed} profile=dimension reals={reals} max_n={max_n}"),
        events,
    };
    (stream, sequences)
}
