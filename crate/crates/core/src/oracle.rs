//! Description events, their admission rules, and relativized complexity.
//!
//! An event says "program τ with oracle α converged to σ by stage s, reading
//! υ oracle bits". Events are stored under the exact key `α↾υ`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BitString, ParseBitsError};
use crate::mass::DyadicMass;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DescriptionEvent {
    pub stage: u64,
    pub oracle: BitString,
    pub program: BitString,
    pub output: BitString,
    pub use_len: usize,
}

impl DescriptionEvent {
    pub fn key(&self) -> BitString {
        self.oracle.prefix(self.use_len)
    }

    pub fn mass(&self) -> DyadicMass {
        DyadicMass::pow2_neg(self.program.len() as u64)
    }
}

impl fmt::Display for DescriptionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.stage,
            self.oracle.to_token(),
            self.program.to_token(),
            self.output.to_token(),
            self.use_len
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventParseError {
    #[error("expected 5 fields `stage oracle program output use`, found {0}")]
    FieldCount(usize),
    #[error("bad integer {0:?}")]
    Integer(String),
    #[error(transparent)]
    Bits(#[from] ParseBitsError),
}

impl FromStr for DescriptionEvent {
    type Err = EventParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(EventParseError::FieldCount(fields.len()));
        }
        let int = |t: &str| t.parse::<u64>().map_err(|_| EventParseError::Integer(t.to_string()));
        Ok(Self {
            stage: int(fields[0])?,
            oracle: BitString::from_token(fields[1])?,
            program: BitString::from_token(fields[2])?,
            output: BitString::from_token(fields[3])?,
            use_len: int(fields[4])? as usize,
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AdmissionError {
    #[error("malformed event: {0}")]
    Malformed(String),
    #[error("program {program} already converged to {existing} on comparable oracle {existing_key}, not {output}")]
    PersistenceViolation {
        program: BitString,
        existing_key: BitString,
        existing: BitString,
        output: BitString,
    },
    #[error("program {program} is prefix-comparable with {existing_program} on comparable oracle {existing_key}")]
    PrefixClash {
        program: BitString,
        existing_key: BitString,
        existing_program: BitString,
    },
    #[error("mass along oracle path {path} would reach {mass}")]
    MassOverflow { path: BitString, mass: DyadicMass },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admission {
    New(usize),
    Duplicate(usize),
}

/// One exact description: `𝕌^key(program) = output` with use `|key|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Description {
    pub key: BitString,
    pub program: BitString,
    pub event: usize,
}

/// For each output σ, every exact description of σ.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComplexityTable {
    by_output: HashMap<BitString, Vec<Description>>,
}

impl ComplexityTable {
    pub fn descriptions(&self, sigma: &BitString) -> &[Description] {
        self.by_output.get(sigma).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outputs(&self) -> impl Iterator<Item = &BitString> {
        self.by_output.keys()
    }

    fn insert(&mut self, output: BitString, d: Description) {
        self.by_output.entry(output).or_default().push(d);
    }
}

/// `K^α(σ)`: least program length over descriptions on prefixes of α.
pub fn k_of(table: &ComplexityTable, alpha: &BitString, sigma: &BitString) -> Option<u64> {
    table
        .descriptions(sigma)
        .iter()
        .filter(|d| d.key.is_prefix_of(alpha))
        .map(|d| d.program.len() as u64)
        .min()
}

/// `K^α_s(σ)`: as [`k_of`] restricted to events admitted by stage `stage`.
pub fn k_of_at(
    state: &EnumerationState,
    alpha: &BitString,
    sigma: &BitString,
    stage: u64,
) -> Option<u64> {
    state
        .table
        .descriptions(sigma)
        .iter()
        .filter(|d| d.key.is_prefix_of(alpha) && state.events[d.event].stage <= stage)
        .map(|d| d.program.len() as u64)
        .min()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnumerationState {
    events: Vec<DescriptionEvent>,
    by_key: BTreeMap<BitString, Vec<usize>>,
    key_mass: HashMap<BitString, DyadicMass>,
    table: ComplexityTable,
}

impl EnumerationState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[DescriptionEvent] {
        &self.events
    }

    pub fn table(&self) -> &ComplexityTable {
        &self.table
    }

    pub fn keys(&self) -> impl Iterator<Item = &BitString> {
        self.by_key.keys()
    }

    pub fn events_at_key(&self, key: &BitString) -> &[usize] {
        self.by_key.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Mass of programs stored exactly at `key`.
    pub fn key_mass(&self, key: &BitString) -> DyadicMass {
        self.key_mass.get(key).cloned().unwrap_or_default()
    }

    /// Total mass of programs on oracle prefixes of `beta`.
    pub fn path_mass(&self, beta: &BitString) -> DyadicMass {
        (0..=beta.len())
            .filter_map(|l| self.key_mass.get(&beta.prefix(l)))
            .sum()
    }

    /// Largest path mass over every stored key.
    pub fn max_path_mass(&self) -> DyadicMass {
        self.by_key
            .keys()
            .map(|k| self.path_mass(k))
            .max()
            .unwrap_or_default()
    }

    fn comparable_keys<'a>(&'a self, key: &'a BitString) -> impl Iterator<Item = &'a BitString> + 'a {
        self.by_key.keys().filter(move |k| k.comparable(key))
    }

    /// Checks the conventions without mutating; `Ok(Some(i))` flags an
    /// identical event already present at index `i`.
    pub fn check(&self, e: &DescriptionEvent) -> Result<Option<usize>, AdmissionError> {
        if e.use_len > e.oracle.len() {
            return Err(AdmissionError::Malformed(format!(
                "use {} exceeds oracle length {}",
                e.use_len,
                e.oracle.len()
            )));
        }
        if e.stage == 0 {
            return Err(AdmissionError::Malformed("stage must be positive".into()));
        }
        let key = e.key();
        for k in self.comparable_keys(&key) {
            for &idx in &self.by_key[k] {
                let old = &self.events[idx];
                if old.program == e.program && old.output != e.output {
                    return Err(AdmissionError::PersistenceViolation {
                        program: e.program.clone(),
                        existing_key: k.clone(),
                        existing: old.output.clone(),
                        output: e.output.clone(),
                    });
                }
            }
        }
        if let Some(&idx) = self
            .events_at_key(&key)
            .iter()
            .find(|&&i| self.events[i].program == e.program)
        {
            return Ok(Some(idx));
        }
        let w = e.mass();
        let mut paths: Vec<&BitString> = self
            .by_key
            .keys()
            .filter(|k| key.is_proper_prefix_of(k))
            .collect();
        paths.push(&key);
        for p in paths {
            let total = &self.path_mass(p) + &w;
            if total > DyadicMass::one() {
                return Err(AdmissionError::MassOverflow {
                    path: p.clone(),
                    mass: total,
                });
            }
        }
        for k in self.comparable_keys(&key) {
            for &idx in &self.by_key[k] {
                let old = &self.events[idx];
                if old.program.comparable(&e.program) {
                    return Err(AdmissionError::PrefixClash {
                        program: e.program.clone(),
                        existing_key: k.clone(),
                        existing_program: old.program.clone(),
                    });
                }
            }
        }
        Ok(None)
    }

    pub fn admit(&mut self, e: DescriptionEvent) -> Result<Admission, AdmissionError> {
        if let Some(idx) = self.check(&e)? {
            return Ok(Admission::Duplicate(idx));
        }
        let idx = self.events.len();
        let key = e.key();
        *self.key_mass.entry(key.clone()).or_default() += &e.mass();
        self.by_key.entry(key.clone()).or_default().push(idx);
        self.table.insert(
            e.output.clone(),
            Description {
                key,
                program: e.program.clone(),
                event: idx,
            },
        );
        self.events.push(e);
        Ok(Admission::New(idx))
    }
}

pub const STREAM_MAGIC: &str = "#lowinfo-stream v1";

/// A replayable event sequence with its provenance header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventStream {
    pub provenance: String,
    pub events: Vec<DescriptionEvent>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Rejected {
        line: usize,
        #[source]
        source: AdmissionError,
    },
}

impl StreamError {
    pub fn line(&self) -> usize {
        match self {
            StreamError::Parse { line, .. } | StreamError::Rejected { line, .. } => *line,
        }
    }
}

impl EventStream {
    pub fn parse(text: &str) -> Result<Self, StreamError> {
        let mut lines = text.lines().enumerate();
        let provenance = match lines.next() {
            Some((_, h)) if h == STREAM_MAGIC => String::new(),
            Some((_, h)) if h.starts_with(&format!("{STREAM_MAGIC} ")) => {
                h[STREAM_MAGIC.len() + 1..].to_string()
            }
            _ => {
                return Err(StreamError::Parse {
                    line: 1,
                    message: format!("missing header `{STREAM_MAGIC}`"),
                })
            }
        };
        let mut events = Vec::new();
        let mut last_stage = 0;
        for (i, line) in lines {
            let e: DescriptionEvent = line.parse().map_err(|err: EventParseError| StreamError::Parse {
                line: i + 1,
                message: err.to_string(),
            })?;
            if e.stage < last_stage {
                return Err(StreamError::Parse {
                    line: i + 1,
                    message: format!("stage {} precedes earlier stage {last_stage}", e.stage),
                });
            }
            last_stage = e.stage;
            events.push(e);
        }
        Ok(Self { provenance, events })
    }

    /// Admits every event into a fresh state, reporting the first rejection.
    pub fn replay(&self) -> Result<EnumerationState, StreamError> {
        let mut state = EnumerationState::new();
        for (i, e) in self.events.iter().enumerate() {
            state
                .admit(e.clone())
                .map_err(|source| StreamError::Rejected { line: i + 2, source })?;
        }
        Ok(state)
    }
}

impl fmt::Display for EventStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.provenance.is_empty() {
            writeln!(f, "{STREAM_MAGIC}")?;
        } else {
            writeln!(f, "{STREAM_MAGIC} {}", self.provenance)?;
        }
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use proptest::prelude::*;

    fn ev(stage: u64, oracle: &str, program: &str, output: &str, use_len: usize) -> DescriptionEvent {
        DescriptionEvent {
            stage,
            oracle: bs(oracle),
            program: bs(program),
            output: bs(output),
            use_len,
        }
    }

    #[test]
    fn first_event_then_clash() {
        let mut st = EnumerationState::new();
        assert_eq!(st.admit(ev(1, "00", "10", "1", 2)), Ok(Admission::New(0)));
        assert_eq!(k_of(st.table(), &bs("00"), &bs("1")), Some(2));
        let err = st.admit(ev(2, "001", "1", "0", 1)).unwrap_err();
        assert!(matches!(err, AdmissionError::PrefixClash { .. }));
    }

    #[test]
    fn mass_overflow_by_exact_arithmetic() {
        let mut st = EnumerationState::new();
        st.admit(ev(1, "0", "0", "1", 1)).unwrap();
        st.admit(ev(1, "01", "10", "1", 2)).unwrap();
        assert_eq!(st.path_mass(&bs("01")), "3/2^2".parse().unwrap());
        assert!(st.admit(ev(2, "", "11", "0", 0)).is_ok());
        assert_eq!(st.path_mass(&bs("01")), DyadicMass::one());
        let mut st2 = EnumerationState::new();
        st2.admit(ev(1, "0", "00", "1", 1)).unwrap();
        st2.admit(ev(1, "01", "01", "1", 2)).unwrap();
        st2.admit(ev(1, "01", "100", "1", 2)).unwrap();
        st2.admit(ev(1, "011", "101", "0", 3)).unwrap();
        assert_eq!(st2.path_mass(&bs("011")), "3/2^2".parse().unwrap());
        let err = st2.admit(ev(2, "011", "1", "0", 3)).unwrap_err();
        match err {
            AdmissionError::MassOverflow { mass, .. } => assert_eq!(mass, "5/2^2".parse().unwrap()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn persistence_and_duplicates() {
        let mut st = EnumerationState::new();
        st.admit(ev(1, "0", "11", "1", 1)).unwrap();
        assert_eq!(st.admit(ev(3, "01", "11", "1", 1)), Ok(Admission::Duplicate(0)));
        let err = st.admit(ev(3, "01", "11", "0", 2)).unwrap_err();
        assert!(matches!(err, AdmissionError::PersistenceViolation { .. }));
        // Incomparable oracles may reuse programs freely.
        assert!(st.admit(ev(3, "1", "11", "0", 1)).is_ok());
        assert!(matches!(st.admit(ev(1, "0", "1", "0", 2)), Err(AdmissionError::Malformed(_))));
    }

    #[test]
    fn k_of_examples() {
        let mut st = EnumerationState::new();
        assert_eq!(k_of(st.table(), &bs("01"), &bs("1")), None);
        st.admit(ev(1, "0", "11", "1", 1)).unwrap();
        assert_eq!(k_of(st.table(), &bs("01"), &bs("1")), Some(2));
        st.admit(ev(1, "0", "00000", "0", 1)).unwrap();
        st.admit(ev(2, "01", "010", "0", 2)).unwrap();
        assert_eq!(k_of(st.table(), &bs("011"), &bs("0")), Some(3));
        assert_eq!(k_of(st.table(), &bs("00"), &bs("0")), Some(5));
        assert_eq!(k_of_at(&st, &bs("011"), &bs("0"), 1), Some(5));
        assert_eq!(k_of(st.table(), &bs(""), &bs("0")), None);
    }

    #[test]
    fn stream_round_trip_and_line_numbers() {
        let text = "#lowinfo-stream v1 seed=3\n1 00 10 1 2\n2 - 0 - 0\n";
        let s = EventStream::parse(text).unwrap();
        assert_eq!(s.to_string(), text);
        assert_eq!(s.provenance, "seed=3");
        let bad = "#lowinfo-stream v1\n1 00 10 1 2\n1 0 1 x 1\n";
        assert_eq!(EventStream::parse(bad).unwrap_err().line(), 3);
        let clash = EventStream::parse("#lowinfo-stream v1\n1 00 10 1 2\n2 001 1 0 1\n").unwrap();
        assert_eq!(clash.replay().unwrap_err().line(), 3);
        assert!(EventStream::parse("1 0 0 0 0\n").is_err());
    }

    fn arb_event() -> impl Strategy<Value = DescriptionEvent> {
        (
            1u64..6,
            proptest::collection::vec(any::<bool>(), 0..4),
            proptest::collection::vec(any::<bool>(), 1..5),
            proptest::collection::vec(any::<bool>(), 0..3),
            0usize..5,
        )
            .prop_map(|(stage, o, p, out, u)| {
                let oracle = BitString::from_bits(o);
                let use_len = u.min(oracle.len());
                DescriptionEvent {
                    stage,
                    oracle,
                    program: BitString::from_bits(p),
                    output: BitString::from_bits(out),
                    use_len,
                }
            })
    }

    fn all_strings(max: usize) -> Vec<BitString> {
        (0..(1u64 << (max + 1)) - 1).map(BitString::from_length_lex_index).collect()
    }

    proptest! {
        #[test]
        fn invariants_hold_after_every_admission(events in proptest::collection::vec(arb_event(), 0..25)) {
            let mut st = EnumerationState::new();
            for e in events {
                let _ = st.admit(e);
                let evs = st.events();
                // Brute force over every path up to length 4.
                for beta in all_strings(4) {
                    let on: Vec<&DescriptionEvent> = evs.iter().filter(|e| e.key().is_prefix_of(&beta)).collect();
                    let m: DyadicMass = on.iter().map(|e| e.mass()).sum();
                    prop_assert!(m <= DyadicMass::one());
                    for (a, x) in on.iter().enumerate() {
                        for y in &on[a + 1..] {
                            prop_assert!(!x.program.comparable(&y.program));
                        }
                    }
                }
            }
        }

        #[test]
        fn k_of_monotone_and_matches_scan(events in proptest::collection::vec(arb_event(), 0..25)) {
            let mut st = EnumerationState::new();
            for e in events { let _ = st.admit(e); }
            let strings = all_strings(4);
            for sigma in all_strings(2) {
                for alpha in &strings {
                    let scan = st.events().iter()
                        .filter(|e| e.output == sigma && e.key().is_prefix_of(alpha))
                        .map(|e| e.program.len() as u64).min();
                    let k = k_of(st.table(), alpha, &sigma);
                    prop_assert_eq!(k, scan);
                    let longer = k_of(st.table(), &alpha.child(true), &sigma);
                    prop_assert!(longer.unwrap_or(u64::MAX) <= k.unwrap_or(u64::MAX));
                }
            }
        }

        #[test]
        fn replay_reproduces_state(events in proptest::collection::vec(arb_event(), 0..25)) {
            let mut st = EnumerationState::new();
            let mut accepted = Vec::new();
            let mut sorted = events;
            sorted.sort_by_key(|e| e.stage);
            for e in sorted {
                if let Ok(Admission::New(_)) = st.admit(e.clone()) { accepted.push(e); }
            }
            let stream = EventStream { provenance: "seed=1".into(), events: accepted };
            let text = stream.to_string();
            let back = EventStream::parse(&text).unwrap();
            prop_assert_eq!(back.to_string(), text);
            prop_assert_eq!(back.replay().unwrap(), st);
        }
    }
}
