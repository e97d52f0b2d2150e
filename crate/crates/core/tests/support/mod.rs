//! Test-side oracles written against plain strings and integers, sharing no
//! logic with the engine beyond the input types.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use lowinfo_core::bits::BitString;
use lowinfo_core::function::{ApproximatedFunction, FunctionSpec};
use lowinfo_core::oracle::DescriptionEvent;
use lowinfo_core::tree::TreeRecord;
use num_bigint::BigUint;

pub fn s(b: &BitString) -> String {
    b.bits().iter().map(|&x| if x { '1' } else { '0' }).collect()
}

pub fn b(text: &str) -> BitString {
    BitString::from_bits(text.chars().map(|c| c == '1').collect())
}

/// The `k`-th string in length-lex order.
pub fn ll_string(k: u64) -> String {
    let mut len = 0;
    while k >= (1u64 << (len + 1)) - 1 {
        len += 1;
    }
    let v = k - ((1u64 << len) - 1);
    (0..len).rev().map(|j| if (v >> j) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn ll_index(x: &str) -> u64 {
    let v = x.chars().fold(0u64, |acc, c| 2 * acc + u64::from(c == '1'));
    (1u64 << x.len()) - 1 + v
}

pub fn ladder(i: u32) -> u64 {
    if i == 0 {
        0
    } else {
        4u64.pow(i)
    }
}

pub fn rung(v: u64) -> u32 {
    (0..).find(|&i| v < ladder(i + 1)).unwrap()
}

/// Exact nonnegative dyadic rational `num / 2^exp`.
#[derive(Clone, Debug, Default)]
pub struct Dy {
    num: BigUint,
    exp: u64,
}

impl Dy {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn int(n: u64) -> Self {
        Self {
            num: BigUint::from(n),
            exp: 0,
        }
    }

    pub fn pow2_neg(k: u64) -> Self {
        Self {
            num: BigUint::from(1u32),
            exp: k,
        }
    }

    pub fn times_pow2(&self, k: u64) -> Self {
        Self {
            num: &self.num << k,
            exp: self.exp,
        }
    }

    pub fn over_pow2(&self, k: u64) -> Self {
        Self {
            num: self.num.clone(),
            exp: self.exp + k,
        }
    }

    fn aligned(&self, other: &Self) -> (BigUint, BigUint) {
        let e = self.exp.max(other.exp);
        (&self.num << (e - self.exp), &other.num << (e - other.exp))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        Self {
            num: a + b,
            exp: self.exp.max(other.exp),
        }
    }

    pub fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.aligned(other);
        a.cmp(&b)
    }

    pub fn le(&self, other: &Self) -> bool {
        self.cmp(other) != Ordering::Greater
    }

    pub fn eq_to(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }

    pub fn sum(items: impl IntoIterator<Item = Dy>) -> Self {
        items.into_iter().fold(Self::zero(), |a, x| a.add(&x))
    }

    pub fn from_mass(m: &lowinfo_core::mass::DyadicMass) -> Self {
        Self {
            num: m.numerator().clone(),
            exp: m.exponent(),
        }
    }
}

/// A single-mode tree: one slot per position, fixed bit or free branching bit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Template {
    pub slots: Vec<Option<char>>,
}

impl Template {
    pub fn living(&self, x: &str) -> bool {
        x.len() <= self.slots.len()
            && x.chars().zip(&self.slots).all(|(c, slot)| slot.map_or(true, |f| f == c))
    }

    pub fn levels(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&j| self.slots[j].is_none()).collect()
    }

    /// Branching choices of a living node.
    pub fn eta(&self, x: &str) -> Option<String> {
        if !self.living(x) {
            return None;
        }
        Some(
            x.chars()
                .enumerate()
                .filter(|(j, _)| self.slots[*j].is_none())
                .map(|(_, c)| c)
                .collect(),
        )
    }

    pub fn leftmost_leaf_from(&self, x: &str) -> String {
        let mut out = x.to_string();
        for slot in &self.slots[x.len()..] {
            out.push(slot.unwrap_or('0'));
        }
        out
    }

    pub fn branch(&mut self, level: usize) {
        assert!(level >= self.slots.len());
        self.slots.resize(level, Some('0'));
        self.slots.push(None);
    }

    pub fn prune(&mut self, level: usize, suffix: &str) {
        self.slots.truncate(level);
        self.slots.extend(suffix.chars().map(Some));
    }

    pub fn from_history(history: &[TreeRecord]) -> Self {
        let mut t = Self::default();
        for r in history {
            match r {
                TreeRecord::Branch { level, .. } => t.branch(*level),
                TreeRecord::Prune { family, suffix, .. } => {
                    let n = t.levels()[family.level];
                    t.prune(n, &s(suffix));
                }
            }
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveEvent {
    pub stage: u64,
    pub key: String,
    pub program: String,
    pub output: String,
    pub use_len: usize,
}

impl NaiveEvent {
    pub fn from_event(e: &DescriptionEvent) -> Self {
        let oracle = s(&e.oracle);
        Self {
            stage: e.stage,
            key: oracle[..e.use_len].to_string(),
            program: s(&e.program),
            output: s(&e.output),
            use_len: e.use_len,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveRequest {
    pub target: String,
    pub length: u64,
    pub stage: u64,
    pub key: String,
    pub program: String,
}

/// What the naive engine did in one stage, in a form both sides can render.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NaiveAction {
    Branch { i: usize, level: usize },
    Request { rung: u32, target: String },
    Injury { rung: u32, leaf: String, suffix: String },
}

/// The single-function construction, written directly from its rules.
pub struct NaiveSingle<'a> {
    f: &'a FunctionSpec,
    events: Vec<NaiveEvent>,
    next: usize,
    pub admitted: Vec<NaiveEvent>,
    pub stage: u64,
    pub tree: Template,
    pub max_len: usize,
    pub max_use: usize,
    pub min_f: Vec<u64>,
    pub requests: Vec<NaiveRequest>,
    pub injuries: BTreeMap<usize, u64>,
    pub ever: BTreeSet<String>,
    pub exhaustive_injuries: usize,
}

impl<'a> NaiveSingle<'a> {
    pub fn new(f: &'a FunctionSpec, events: &[DescriptionEvent]) -> Self {
        Self {
            f,
            events: events.iter().map(NaiveEvent::from_event).collect(),
            next: 0,
            admitted: Vec::new(),
            stage: 0,
            tree: Template::default(),
            max_len: 0,
            max_use: 0,
            min_f: Vec::new(),
            requests: Vec::new(),
            injuries: BTreeMap::new(),
            ever: BTreeSet::new(),
            exhaustive_injuries: 0,
        }
    }

    pub fn rung_at(&self, k: usize) -> u32 {
        rung(self.min_f[k])
    }

    pub fn step(&mut self) -> Option<NaiveAction> {
        self.stage += 1;
        let t = self.stage;
        while self.next < self.events.len() && self.events[self.next].stage <= t {
            let e = self.events[self.next].clone();
            self.next += 1;
            self.max_use = self.max_use.max(e.use_len);
            if !self.admitted.iter().any(|a| a.key == e.key && a.program == e.program) {
                self.admitted.push(e);
            }
        }
        for k in 0..t as usize {
            let v = self.f.evaluate(&b(&ll_string(k as u64)), t);
            match self.min_f.get_mut(k) {
                Some(m) => *m = (*m).min(v),
                None => self.min_f.push(v),
            }
        }
        // (rung, σ, key, program, length) of the length-lex least σ per rung.
        let mut attention: BTreeMap<u32, (String, String, String, u64)> = BTreeMap::new();
        let outputs: BTreeSet<String> = self.admitted.iter().map(|e| e.output.clone()).collect();
        for out in outputs {
            let k = ll_index(&out) as usize;
            if k >= self.min_f.len() {
                continue;
            }
            let r = self.rung_at(k);
            let best = self
                .admitted
                .iter()
                .filter(|e| e.output == out && self.tree.living(&e.key))
                .min_by(|x, y| {
                    (x.program.len(), x.key.len(), &x.key, &x.program).cmp(&(
                        y.program.len(),
                        y.key.len(),
                        &y.key,
                        &y.program,
                    ))
                });
            let Some(best) = best else {
                continue;
            };
            let length = best.program.len() as u64 + ladder(r);
            if self.requests.iter().any(|q| q.target == out && q.length <= length) {
                continue;
            }
            let replace = attention.get(&r).map_or(true, |(old, ..)| (out.len(), &out) < (old.len(), old));
            if replace {
                attention.insert(r, (out.clone(), best.key.clone(), best.program.clone(), length));
            }
        }
        let branched = self.tree.levels().len();
        let r_pos = 2 * branched + 1;
        let action = match attention.into_iter().next() {
            Some((r, w)) if (2 * r as usize) < t as usize && (2 * r as usize) < r_pos => Some(self.act(r, w)),
            _ if r_pos < t as usize => {
                let level = 1 + self.max_len.max(self.max_use).max(t as usize);
                self.tree.branch(level);
                self.max_len = self.max_len.max(level + 1);
                Some(NaiveAction::Branch { i: branched, level })
            }
            _ => None,
        };
        self.note_statuses(10);
        action
    }

    fn act(&mut self, r: u32, (sigma, key, program, length): (String, String, String, u64)) -> NaiveAction {
        let eta = self.tree.eta(&key).expect("witness keys live");
        if eta.len() <= r as usize {
            self.requests.push(NaiveRequest {
                target: sigma.clone(),
                length,
                stage: self.stage,
                key,
                program,
            });
            return NaiveAction::Request { rung: r, target: sigma };
        }
        let n = self.tree.levels()[r as usize];
        let keys: BTreeSet<String> = self
            .admitted
            .iter()
            .filter(|e| e.key.len() > n && self.tree.living(&e.key))
            .map(|e| e.key.clone())
            .collect();
        let levels = self.tree.levels();
        let candidates: Vec<String> = if levels.len() <= 12 {
            // Every living leaf.
            self.exhaustive_injuries += 1;
            (0..1u64 << levels.len())
                .map(|v| {
                    let mut leaf: Vec<u8> = self.tree.leftmost_leaf_from("").into_bytes();
                    for (j, &pos) in levels.iter().enumerate() {
                        leaf[pos] = if (v >> (levels.len() - 1 - j)) & 1 == 1 { b'1' } else { b'0' };
                    }
                    String::from_utf8(leaf).expect("ascii")
                })
                .collect()
        } else {
            // Too many leaves: the leftmost leaf above each key, plus the
            // leftmost leaf, contains every maximal one.
            let mut c: Vec<String> = keys.iter().map(|k| self.tree.leftmost_leaf_from(k)).collect();
            c.push(self.tree.leftmost_leaf_from(""));
            c
        };
        let mass = |leaf: &str| {
            Dy::sum(
                self.admitted
                    .iter()
                    .filter(|e| keys.contains(&e.key) && leaf.starts_with(&e.key))
                    .map(|e| Dy::pow2_neg(e.program.len() as u64)),
            )
        };
        let mut best: Option<(Dy, String)> = None;
        for leaf in candidates {
            let m = mass(&leaf);
            let replace = match &best {
                None => true,
                Some((bm, bl)) => m.cmp(bm) == Ordering::Greater || (m.eq_to(bm) && leaf < *bl),
            };
            if replace {
                best = Some((m, leaf));
            }
        }
        let (_, leaf) = best.expect("a candidate");
        let suffix = leaf[n..].to_string();
        self.tree.prune(n, &suffix);
        *self.injuries.entry(r as usize).or_default() += 1;
        NaiveAction::Injury { rung: r, leaf, suffix }
    }

    fn note_statuses(&mut self, cap: usize) {
        for x in all_strings(cap) {
            if self.tree.living(&x) {
                self.ever.insert(x);
            }
        }
    }
}

/// Every string of length at most `cap`.
pub fn all_strings(cap: usize) -> impl Iterator<Item = String> {
    (0..(1u64 << (cap + 1)) - 1).map(ll_string)
}
