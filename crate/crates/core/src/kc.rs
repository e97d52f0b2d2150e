//! Online Kraft-Chaitin allocation.
//!
//! Free space is a left-to-right list of dyadic intervals (named by their
//! prefix) whose sizes strictly increase. A request of length `l` takes the
//! leftmost free `w` with `|w| ≤ l`, receives `w0^(l-|w|)`, and the
//! remainder `w0^j1` (for `j` from `l-|w|-1` down to 0) replaces `w`. The
//! ordering survives each step, so every interval before the one taken is
//! smaller than `2^-l`; a failure would leave less than `2^-l` free, which
//! cannot happen while the total requested mass stays at most 1.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::bits::BitString;
use crate::mass::DyadicMass;
use crate::request::RequestSet;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum KcError {
    #[error("requested mass {0} exceeds 1")]
    MassExceedsOne(DyadicMass),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub target: BitString,
    pub length: u64,
    pub codeword: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixCode {
    shift: u64,
    assignments: Vec<Assignment>,
    free: Vec<BitString>,
    best: HashMap<BitString, u64>,
    used: DyadicMass,
}

/// `Σ 2^-(l+shift)` over the requests in `l`.
pub fn kraft_sum(l: &RequestSet, shift: u64) -> DyadicMass {
    l.ledger().shr(shift)
}

impl PrefixCode {
    pub fn new(shift: u64) -> Self {
        Self {
            shift,
            assignments: Vec::new(),
            free: vec![BitString::new()],
            best: HashMap::new(),
            used: DyadicMass::zero(),
        }
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    /// Mass of all assigned codewords.
    pub fn used(&self) -> &DyadicMass {
        &self.used
    }

    /// Assigns a codeword of length `length + shift`.
    pub fn push(&mut self, target: &BitString, length: u64) -> Result<&BitString, KcError> {
        let l = (length + self.shift) as usize;
        let Some(pos) = self.free.iter().position(|w| w.len() <= l) else {
            let total = &self.used + &DyadicMass::pow2_neg(l as u64);
            return Err(KcError::MassExceedsOne(total));
        };
        let w = self.free[pos].clone();
        let extra = l - w.len();
        let mut codeword = w.clone();
        codeword.extend_from(&vec![false; extra]);
        // Leftover pieces, smallest first: w0^(extra-1)1, ..., w1.
        let pieces = (0..extra).rev().map(|j| {
            let mut p = w.clone();
            p.extend_from(&vec![false; j]);
            p.push(true);
            p
        });
        self.free.splice(pos..=pos, pieces);
        self.used += &DyadicMass::pow2_neg(l as u64);
        self.best
            .entry(target.clone())
            .and_modify(|b| *b = (*b).min(l as u64))
            .or_insert(l as u64);
        self.assignments.push(Assignment {
            target: target.clone(),
            length,
            codeword,
        });
        Ok(&self.assignments.last().expect("just pushed").codeword)
    }

    /// Code dump: `target length codeword`, one line per assignment.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PrefixCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.assignments {
            writeln!(f, "{} {} {}", a.target.to_token(), a.length, a.codeword.to_token())?;
        }
        Ok(())
    }
}

pub fn build_prefix_code(l: &RequestSet, shift: u64) -> Result<PrefixCode, KcError> {
    let total = kraft_sum(l, shift);
    if total > DyadicMass::one() {
        return Err(KcError::MassExceedsOne(total));
    }
    let mut code = PrefixCode::new(shift);
    for r in l.requests() {
        code.push(&r.target, r.length)?;
    }
    Ok(code)
}

/// `K_M(σ)`: shortest codeword for σ.
pub fn machine_complexity(code: &PrefixCode, sigma: &BitString) -> Option<u64> {
    code.best.get(sigma).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::request::{Origin, Request};
    use proptest::prelude::*;

    fn set(items: &[(&str, u64)]) -> RequestSet {
        let mut l = RequestSet::new();
        for (i, &(t, len)) in items.iter().enumerate() {
            l.push(Request {
                target: bs(t),
                length: len,
                stage: i as u64 + 1,
                origin: Origin {
                    oracle: BitString::new(),
                    program: bs("0"),
                },
            });
        }
        l
    }

    fn words(code: &PrefixCode) -> Vec<String> {
        code.assignments().iter().map(|a| a.codeword.to_string()).collect()
    }

    #[test]
    fn kraft_sum_examples() {
        assert!(kraft_sum(&RequestSet::new(), 0).is_zero());
        let l = set(&[("0", 1), ("1", 2), ("00", 2)]);
        assert_eq!(kraft_sum(&l, 0), DyadicMass::one());
        assert_eq!(kraft_sum(&l, 2), DyadicMass::pow2_neg(2));
    }

    #[test]
    fn leftmost_fit_examples() {
        let c = build_prefix_code(&set(&[("0", 1), ("1", 1)]), 0).unwrap();
        assert_eq!(words(&c), ["0", "1"]);
        let c = build_prefix_code(&set(&[("0", 1), ("1", 2), ("00", 2)]), 0).unwrap();
        assert_eq!(words(&c), ["0", "10", "11"]);
        assert!(matches!(
            build_prefix_code(&set(&[("0", 1), ("1", 1), ("00", 1)]), 0),
            Err(KcError::MassExceedsOne(_))
        ));
    }

    #[test]
    fn machine_complexity_examples() {
        let c = build_prefix_code(&set(&[("1", 5), ("1", 3), ("1", 4)]), 2).unwrap();
        assert_eq!(machine_complexity(&c, &bs("1")), Some(5));
        assert_eq!(machine_complexity(&c, &bs("0")), None);
        let c2 = build_prefix_code(&set(&[("1", 5), ("1", 3), ("1", 4), ("1", 2)]), 2).unwrap();
        assert!(machine_complexity(&c2, &bs("1")) < machine_complexity(&c, &bs("1")));
        assert_eq!(c.dump().lines().next(), Some("1 5 0000000"));
    }

    /// Lengths whose Kraft sum is at most 1, found by greedy filtering.
    fn feasible(lengths: Vec<u64>) -> Vec<u64> {
        let mut total = DyadicMass::zero();
        lengths
            .into_iter()
            .filter(|&l| {
                let next = &total + &DyadicMass::pow2_neg(l);
                if next <= DyadicMass::one() {
                    total = next;
                    true
                } else {
                    false
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn succeeds_and_is_prefix_free(raw in proptest::collection::vec(0u64..9, 0..40), shift in 0u64..3) {
            let lengths = feasible(raw.into_iter().map(|l| l + shift).collect());
            let items: Vec<(String, u64)> = lengths.iter().enumerate()
                .map(|(i, &l)| (format!("{:b}", i % 5), l - shift)).collect();
            let refs: Vec<(&str, u64)> = items.iter().map(|(s, l)| (s.as_str(), *l)).collect();
            let l = set(&refs);
            let code = build_prefix_code(&l, shift).unwrap();
            let a = code.assignments();
            for (i, x) in a.iter().enumerate() {
                prop_assert_eq!(x.codeword.len() as u64, x.length + shift);
                for y in &a[i + 1..] {
                    prop_assert!(!x.codeword.comparable(&y.codeword));
                }
            }
            for r in l.requests() {
                prop_assert!(machine_complexity(&code, &r.target).unwrap() <= r.length + shift);
            }
            // Online: a prefix of the requests gets the same codewords.
            let k = a.len() / 2;
            let partial = build_prefix_code(&set(&refs[..k]), shift).unwrap();
            prop_assert_eq!(partial.assignments(), &a[..k]);
        }
    }
}
