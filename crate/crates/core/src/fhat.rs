//! The ladder `c_0 = 0`, `c_i = 4^i` and the rounded approximation `f̂_s`.

use crate::bits::BitString;
use crate::function::ApproximatedFunction;

/// `c_i` for `i ≤ 31`.
pub fn ladder(i: usize) -> u64 {
    assert!(i <= 31, "ladder index out of range");
    if i == 0 {
        0
    } else {
        1u64 << (2 * i)
    }
}

/// `c_i` for `i ≤ 63`, wide enough for exhaustive checks.
pub fn ladder_wide(i: usize) -> u128 {
    assert!(i <= 63, "ladder index out of range");
    if i == 0 {
        0
    } else {
        1u128 << (2 * i)
    }
}

/// The rung of `v`: the least `i` with `v < c_{i+1}`.
pub fn rung(v: u64) -> usize {
    if v < 4 {
        0
    } else {
        (63 - v.leading_zeros() as usize) / 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlTransfer {
    pub sigma: BitString,
    pub from: Option<usize>,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    min_f: u64,
    rung: usize,
    first_seen: u64,
    settled: bool,
}

/// Per-target running minimum of `f_t(σ)` and its rung, indexed by
/// length-lex position.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FhatState {
    entries: Vec<Entry>,
    unsettled: Vec<usize>,
}

impl FhatState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of targets queried so far.
    pub fn monitored(&self) -> usize {
        self.entries.len()
    }

    pub fn is_monitored(&self, sigma: &BitString) -> bool {
        sigma.len() < 63 && (sigma.length_lex_index() as usize) < self.entries.len()
    }

    /// Rung `i` with `f̂_s(σ) = c_i`.
    pub fn rung_of(&self, sigma: &BitString) -> Option<usize> {
        self.entry(sigma).map(|e| e.rung)
    }

    /// `f̂_s(σ)`.
    pub fn value(&self, sigma: &BitString) -> Option<u64> {
        self.rung_of(sigma).map(ladder)
    }

    pub fn first_seen(&self, sigma: &BitString) -> Option<u64> {
        self.entry(sigma).map(|e| e.first_seen)
    }

    pub fn min_f(&self, sigma: &BitString) -> Option<u64> {
        self.entry(sigma).map(|e| e.min_f)
    }

    /// Whether `f` reported σ as constant from some stage already queried.
    pub fn is_settled(&self, sigma: &BitString) -> bool {
        self.entry(sigma).is_some_and(|e| e.settled)
    }

    fn entry(&self, sigma: &BitString) -> Option<&Entry> {
        if sigma.len() >= 63 {
            return None;
        }
        self.entries.get(sigma.length_lex_index() as usize)
    }

    /// Rungs of all monitored targets, by length-lex index.
    pub fn rungs(&self) -> impl Iterator<Item = (BitString, usize)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(|(k, e)| (BitString::from_length_lex_index(k as u64), e.rung))
    }

    /// Query `f_stage` on the first `stage` targets.
    pub fn step(&mut self, f: &dyn ApproximatedFunction, stage: u64) -> Vec<ControlTransfer> {
        let mut transfers = Vec::new();
        let mut still = Vec::with_capacity(self.unsettled.len());
        for k in std::mem::take(&mut self.unsettled) {
            let sigma = BitString::from_length_lex_index(k as u64);
            let v = f.evaluate(&sigma, stage);
            let e = &mut self.entries[k];
            if v < e.min_f {
                e.min_f = v;
                let r = rung(v);
                if r != e.rung {
                    transfers.push(ControlTransfer {
                        sigma: sigma.clone(),
                        from: Some(e.rung),
                        to: r,
                    });
                    e.rung = r;
                }
            }
            if f.stable_from(&sigma).is_some_and(|t| t <= stage) {
                e.settled = true;
            } else {
                still.push(k);
            }
        }
        self.unsettled = still;
        while (self.entries.len() as u64) < stage {
            let k = self.entries.len();
            let sigma = BitString::from_length_lex_index(k as u64);
            let v = f.evaluate(&sigma, stage);
            let settled = f.stable_from(&sigma).is_some_and(|t| t <= stage);
            let r = rung(v);
            self.entries.push(Entry {
                min_f: v,
                rung: r,
                first_seen: stage,
                settled,
            });
            if !settled {
                self.unsettled.push(k);
            }
            transfers.push(ControlTransfer {
                sigma,
                from: None,
                to: r,
            });
        }
        transfers
    }
}
