//! The universal engine: every approximated function `φ_e` at once on one
//! tree. Paths that agree on even branching choices share levels, and every
//! requirement among the first `s+1` that requires attention acts each stage.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use crate::bits::BitString;
use crate::construction::{Action, ActionKind, Construction, EngineError, Mode, ReqId, RunResult, StageRecord, State};
use crate::function::ApproximatedFunction;
use crate::oracle::DescriptionEvent;
use crate::tree::{FamilyKey, Sharing};

/// Number of `S^e_i` in block `i`: those with `2e+1 ≤ i`.
fn s_count(block: usize) -> usize {
    if block == 0 {
        0
    } else {
        (block + 1) / 2
    }
}

/// Walk the priority order, stopping after `count` requirements or when
/// `visit` returns `false`.
fn walk(count: usize, mut visit: impl FnMut(ReqId) -> bool) {
    let mut left = count;
    for block in 0.. {
        for e in 0..s_count(block) {
            if left == 0 || !visit(ReqId::S { e, i: block }) {
                return;
            }
            left -= 1;
        }
        assert!(block < 63, "requirement block too deep");
        for v in 0..(1u64 << block) {
            if left == 0 {
                return;
            }
            let alpha = BitString::from_bits((0..block).rev().map(|k| (v >> k) & 1 == 1).collect());
            if !visit(ReqId::RAlpha { alpha }) {
                return;
            }
            left -= 1;
        }
    }
}

/// `R^⟨⟩_0, S^0_1, R^⟨0⟩_1, R^⟨1⟩_1, S^0_2, R^⟨00⟩_2, …`
pub fn order_requirements(count: usize) -> Vec<ReqId> {
    let mut out = Vec::with_capacity(count);
    walk(count, |r| {
        out.push(r);
        true
    });
    out
}

/// One stage: Substage 1, then every requirement among the first `stage`
/// that requires attention acts, in priority order, against the state left
/// by the ones before it.
pub fn stage_step_universal(c: &mut Construction<'_>) -> Result<StageRecord, EngineError> {
    let mut record = c.begin_stage()?;
    let functions = c.functions().len();
    let mut failure = None;
    let state = &mut c.state;
    let actions = &mut record.actions;
    walk(record.stage as usize, |req| {
        let result = act_if_needed(state, functions, &req);
        match result {
            Ok(Some(kind)) => {
                actions.push(Action { req, kind });
                true
            }
            Ok(None) => true,
            Err(err) => {
                failure = Some(err);
                false
            }
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    c.finish_stage(record.clone())?;
    Ok(record)
}

fn act_if_needed(state: &mut State, functions: usize, req: &ReqId) -> Result<Option<ActionKind>, EngineError> {
    match req {
        ReqId::S { e, i } => {
            // Indices without a function have nothing to monitor.
            if *e >= functions {
                return Ok(None);
            }
            match state.attention(*e, *i) {
                Some(w) => state.act_on(w).map(Some),
                None => Ok(None),
            }
        }
        ReqId::RAlpha { alpha } => {
            let family = Sharing::EvenBits.family_of(alpha);
            let Some(region) = state.tree.region(&family) else {
                return Err(EngineError::InternalInvariantBreach {
                    stage: state.stage,
                    message: format!("no region for R@{}", alpha.to_token()),
                });
            };
            if region.branch.is_some() {
                return Ok(None);
            }
            let level = state.branch(&family)?;
            Ok(Some(ActionKind::Branch { family, level }))
        }
        ReqId::R { .. } => unreachable!("single-engine requirement in universal order"),
    }
}

pub fn run_universal_with_observer(
    functions: &[&dyn ApproximatedFunction],
    events: &[DescriptionEvent],
    horizon: u64,
    mut observe: impl FnMut(&State, &StageRecord),
) -> Result<RunResult, EngineError> {
    let mut c = Construction::new(Mode::Universal, functions.to_vec(), events);
    for _ in 0..horizon {
        let rec = stage_step_universal(&mut c)?;
        observe(&c.state, &rec);
    }
    Ok(RunResult::from_construction(c, horizon))
}

pub fn run_universal(
    functions: &[&dyn ApproximatedFunction],
    events: &[DescriptionEvent],
    horizon: u64,
) -> Result<RunResult, EngineError> {
    run_universal_with_observer(functions, events, horizon, |_, _| {})
}

/// The family on the correct-guess path at each depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TStar {
    /// `families[j]`: the correct-guess family after `j` branchings.
    pub families: Vec<FamilyKey>,
    /// `levels[j]`: branching level of `families[j]`, for every set one.
    pub levels: Vec<usize>,
    /// Branchings every correct-guess path passes.
    pub depth: usize,
    /// Odd branchings among the first `depth`: each doubles the subtree.
    pub perfect_depth: usize,
    /// Living correct-guess nodes at each set level, as counted.
    pub counts: Vec<BigUint>,
}

impl TStar {
    /// Every set level `n_j` carries exactly `2^(odd branchings below j)` nodes.
    pub fn is_perfect(&self) -> bool {
        self.counts.iter().enumerate().all(|(j, c)| {
            let odd_below = (0..j).filter(|k| k % 2 == 1).count();
            *c == BigUint::from(1u32) << odd_below
        })
    }

    pub fn contains_family(&self, family: &FamilyKey) -> bool {
        self.families.get(family.level) == Some(family)
    }
}

/// Guess bit for function `e`: its ground truth, or 0 past the known ones.
pub fn truth_bit(truth: &[bool], e: usize) -> bool {
    truth.get(e).copied().unwrap_or(false)
}

/// Whether the choices `eta` guess correctly at every even branching.
pub fn follows_truth(eta: &BitString, truth: &[bool]) -> bool {
    (0..eta.len()).step_by(2).all(|j| eta.bit(j) == truth_bit(truth, j / 2))
}

pub fn extract_t_star(result: &RunResult, truth: &[bool]) -> TStar {
    let tree = &result.state.tree;
    let sharing = tree.sharing();
    let mut families = vec![FamilyKey::root()];
    let mut levels = Vec::new();
    loop {
        let family = families.last().expect("root").clone();
        let Some(level) = tree.level(&family) else {
            break;
        };
        levels.push(level);
        let j = family.level;
        // Odd branchings keep both children; the family key ignores the bit.
        let bit = j % 2 == 0 && truth_bit(truth, j / 2);
        families.push(sharing.child(&family, bit));
    }
    let depth = levels.len();
    let perfect_depth = (0..depth).filter(|j| j % 2 == 1).count();
    let counts = levels
        .iter()
        .map(|&n| count_t_star_at(result, truth, n))
        .collect();
    TStar {
        families,
        levels,
        depth,
        perfect_depth,
        counts,
    }
}

/// Living nodes of length `len` whose choices follow the truth.
fn count_t_star_at(result: &RunResult, truth: &[bool], len: usize) -> BigUint {
    let tree = &result.state.tree;
    let sharing = tree.sharing();
    let mut memo: BTreeMap<FamilyKey, BigUint> = BTreeMap::new();
    fn go(
        tree: &crate::tree::ConstructionTree,
        sharing: Sharing,
        truth: &[bool],
        family: &FamilyKey,
        len: usize,
        memo: &mut BTreeMap<FamilyKey, BigUint>,
    ) -> BigUint {
        if let Some(v) = memo.get(family) {
            return v.clone();
        }
        let region = tree.region(family).expect("reachable family");
        let v = if len < region.start {
            BigUint::from(0u32)
        } else if len <= region.end() {
            BigUint::from(1u32)
        } else if region.branch.is_none() {
            BigUint::from(0u32)
        } else {
            let j = family.level;
            let bits: Vec<bool> = if j % 2 == 0 {
                vec![truth_bit(truth, j / 2)]
            } else {
                vec![false, true]
            };
            bits.into_iter()
                .map(|b| go(tree, sharing, truth, &sharing.child(family, b), len, memo))
                .sum()
        };
        memo.insert(family.clone(), v.clone());
        v
    }
    go(tree, sharing, truth, &FamilyKey::root(), len, &mut memo)
}
