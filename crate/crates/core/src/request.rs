//! Kraft-Chaitin request sets with an exact running mass ledger.

use std::collections::HashMap;

use crate::bits::BitString;
use crate::mass::DyadicMass;

/// The exact pair whose description triggered a request.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Origin {
    pub oracle: BitString,
    pub program: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub target: BitString,
    pub length: u64,
    pub stage: u64,
    pub origin: Origin,
}

impl Request {
    pub fn mass(&self) -> DyadicMass {
        DyadicMass::pow2_neg(self.length)
    }
}

/// Append-only list of requests `⟨σ, l⟩`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestSet {
    requests: Vec<Request>,
    ledger: DyadicMass,
    min_length: HashMap<BitString, u64>,
}

impl RequestSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, request: Request) {
        self.ledger += &request.mass();
        self.min_length
            .entry(request.target.clone())
            .and_modify(|l| *l = (*l).min(request.length))
            .or_insert(request.length);
        self.requests.push(request);
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Running `Σ 2^-l`.
    pub fn ledger(&self) -> &DyadicMass {
        &self.ledger
    }

    /// `min{l : ⟨σ,l⟩ ∈ L}`, `None` when σ has no request.
    pub fn min_length(&self, sigma: &BitString) -> Option<u64> {
        self.min_length.get(sigma).copied()
    }

    pub fn recomputed_mass(&self) -> DyadicMass {
        self.requests.iter().map(Request::mass).sum()
    }

    /// Requests entered at or before `stage`.
    pub fn prefix_until(&self, stage: u64) -> RequestSet {
        let mut out = RequestSet::new();
        for r in self.requests.iter().take_while(|r| r.stage <= stage) {
            out.push(r.clone());
        }
        out
    }
}
