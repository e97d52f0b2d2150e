//! Property tests over whole engine runs on generated streams.

use std::collections::{BTreeMap, BTreeSet};

use lowinfo_core::analysis::analyze;
use lowinfo_core::bits::BitString;
use lowinfo_core::config::{RunConfig, RunMode};
use lowinfo_core::construction::{ActionKind, RunResult, StageRecord, State};
use lowinfo_core::function::{ApproximatedFunction, FunctionSpec};
use lowinfo_core::generator::{generate_adversarial_stream, GeneratorProfile, Pressure};
use lowinfo_core::oracle::{k_of_at, EventStream};
use lowinfo_core::runner::{run_config, verify_trace};
use lowinfo_core::single::run_with_observer;
use lowinfo_core::tree::{ConstructionTree, NodeStatus, Sharing};
use lowinfo_core::universal::run_universal_with_observer;
use num_bigint::BigUint;
use proptest::prelude::*;

const NODE_CAP: usize = 20_000;

fn pressure() -> impl Strategy<Value = Pressure> {
    prop_oneof![Just(Pressure::Benign), Just(Pressure::Injurious)]
}

fn stream(seed: u64, p: Pressure, horizon: u64, max_len: usize) -> EventStream {
    generate_adversarial_stream(seed, &GeneratorProfile::preset(p, horizon, max_len))
}

fn function(choice: u8) -> FunctionSpec {
    match choice % 3 {
        0 => FunctionSpec::length(1, 0),
        1 => FunctionSpec::length(3, 1),
        _ => FunctionSpec::floor_log2(),
    }
}

/// Per-stage checks shared by both engines. Returns a description of the
/// first violation.
#[derive(Default)]
struct Watch {
    seen: BTreeSet<BitString>,
    dead: BTreeSet<BitString>,
    min_len: Vec<BTreeMap<BitString, u64>>,
    problem: Option<String>,
}

impl Watch {
    fn fail(&mut self, stage: u64, msg: String) {
        self.problem.get_or_insert(format!("stage {stage}: {msg}"));
    }

    fn observe(&mut self, state: &State, rec: &StageRecord, single: bool) {
        if let Some(living) = state.tree.living_nodes(NODE_CAP) {
            if let Some(x) = living.intersection(&self.dead).next() {
                self.fail(rec.stage, format!("dead node {x:?} is living again"));
            }
            let gone: Vec<BitString> = self.seen.difference(&living).cloned().collect();
            self.dead.extend(gone);
            self.seen.extend(living);
        }
        if self.min_len.len() < state.requests.len() {
            self.min_len.resize(state.requests.len(), BTreeMap::new());
        }
        for a in &rec.actions {
            let ActionKind::Request { e, request } = &a.kind else {
                continue;
            };
            let target = &request.target;
            let Some(f) = state.fhat[*e].value(target) else {
                self.fail(rec.stage, format!("request for unmonitored {target:?}"));
                continue;
            };
            if request.length != request.origin.program.len() as u64 + f {
                self.fail(rec.stage, format!("request length {} is not |τ| + f̂", request.length));
            }
            if let Some(&old) = self.min_len[*e].get(target) {
                if request.length >= old {
                    self.fail(rec.stage, format!("request {} does not improve {old}", request.length));
                }
            }
            self.min_len[*e].insert(target.clone(), request.length);
            if single {
                let key = &request.origin.oracle;
                let Some(alpha) = state.tree.leftmost_leaf_from(key) else {
                    self.fail(rec.stage, format!("origin {key:?} is not living"));
                    continue;
                };
                let k = k_of_at(&state.enumeration, &alpha, target, rec.stage);
                if k != Some(request.origin.program.len() as u64) {
                    self.fail(rec.stage, format!("K on {alpha:?} is {k:?}, program has {}", request.origin.program.len()));
                }
            }
        }
    }
}

fn branching_count_problem(state: &State) -> Option<String> {
    for (j, n) in state.tree.uniform_levels().into_iter().enumerate().take(24) {
        if state.tree.count_living_at(n) != BigUint::from(1u32) << j {
            return Some(format!("level {j} at {n} has {} living nodes", state.tree.count_living_at(n)));
        }
    }
    None
}

/// Branching positions along `leaf`: where some other living leaf splits off.
fn split_positions(leaf: &BitString, leaves: &[BitString]) -> Vec<usize> {
    (0..leaf.len())
        .filter(|&p| {
            leaves
                .iter()
                .any(|y| y.len() > p && y.prefix(p) == leaf.prefix(p) && y.bit(p) != leaf.bit(p))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn single_runs_keep_their_invariants(
        seed in 0u64..10_000,
        p in pressure(),
        choice in 0u8..3,
        horizon in 20u64..90,
        max_len in 3usize..8,
    ) {
        let s = stream(seed, p, horizon, max_len);
        let f = function(choice);
        let mut watch = Watch::default();
        let mut counts = None;
        let mut prev_levels: Vec<usize> = Vec::new();
        let result = run_with_observer(&f, &s.events, horizon, |state, rec| {
            watch.observe(state, rec, true);
            if counts.is_none() {
                counts = branching_count_problem(state);
            }
            // Without an injury, set levels only ever extend.
            let levels = state.tree.uniform_levels();
            let injured = rec.actions.iter().any(|a| matches!(a.kind, ActionKind::Injury(_)));
            if !injured && !levels.starts_with(&prev_levels) {
                watch.fail(rec.stage, format!("levels {prev_levels:?} changed to {levels:?}"));
            }
            prev_levels = levels;
        })
        .expect("engine succeeds");
        prop_assert_eq!(watch.problem, None);
        prop_assert_eq!(counts, None);

        // History replay rebuilds the same tree, and no living node has a
        // dead prefix.
        let tree = &result.state.tree;
        let replayed = ConstructionTree::replay(tree.sharing(), tree.history()).expect("replay");
        prop_assert_eq!(replayed.living_nodes(NODE_CAP), tree.living_nodes(NODE_CAP));
        if let Some(status) = tree.status_map(NODE_CAP) {
            prop_assert_eq!(tree.status_map(NODE_CAP), replayed.status_map(NODE_CAP));
            for (x, st) in &status {
                if *st == NodeStatus::Alive {
                    for q in x.proper_prefixes() {
                        prop_assert_eq!(status.get(&q), Some(&NodeStatus::Alive));
                    }
                }
            }
        }
    }

    #[test]
    fn universal_runs_share_levels_on_even_choices(
        seed in 0u64..10_000,
        p in pressure(),
        horizon in 20u64..120,
    ) {
        let s = stream(seed, p, horizon, 6);
        let f0 = FunctionSpec::length(8, 0);
        let f1 = FunctionSpec::length(16, 0);
        let fs: Vec<&dyn ApproximatedFunction> = vec![&f0, &f1];
        let mut watch = Watch::default();
        let mut shared = None;
        run_universal_with_observer(&fs, &s.events, horizon, |state, rec| {
            watch.observe(state, rec, false);
            if shared.is_some() {
                return;
            }
            let Some(leaves) = state.tree.living_leaves(64) else {
                return;
            };
            let splits: Vec<(BitString, Vec<usize>)> = leaves
                .iter()
                .map(|x| {
                    let pos = split_positions(x, &leaves);
                    (BitString::from_bits(pos.iter().map(|&q| x.bit(q)).collect()), pos)
                })
                .collect();
            for (leaf, (eta, _)) in leaves.iter().zip(&splits) {
                if state.tree.eta(leaf).as_ref() != Some(eta) {
                    shared = Some(format!("stage {}: eta of {leaf:?} is not {eta:?}", rec.stage));
                }
            }
            for (ea, pa) in &splits {
                for (eb, pb) in &splits {
                    for j in 0..pa.len().min(pb.len()) {
                        let even_agree = (0..j).step_by(2).all(|i| ea.bit(i) == eb.bit(i));
                        if even_agree && pa[j] != pb[j] {
                            shared = Some(format!("stage {}: {ea:?} and {eb:?} split apart at {j}", rec.stage));
                        }
                    }
                }
            }
        })
        .expect("engine succeeds");
        prop_assert_eq!(watch.problem, None);
        prop_assert_eq!(shared, None);
    }

    #[test]
    fn even_bit_sharing_ignores_odd_choices(bits in proptest::collection::vec(any::<bool>(), 0..16), flip in 0usize..16) {
        let eta = BitString::from_bits(bits);
        let mut other = eta.clone();
        if flip % 2 == 1 && flip < eta.len() {
            other.set(flip, !eta.bit(flip));
        }
        prop_assert_eq!(Sharing::EvenBits.family_of(&eta), Sharing::EvenBits.family_of(&other));
        if flip % 2 == 0 && flip < eta.len() {
            other.set(flip, !eta.bit(flip));
            prop_assert_ne!(Sharing::EvenBits.family_of(&eta), Sharing::EvenBits.family_of(&other));
        }
    }

    #[test]
    fn analysis_never_mutates_and_is_repeatable(seed in 0u64..10_000, p in pressure(), horizon in 20u64..80) {
        let s = stream(seed, p, horizon, 6);
        let f = FunctionSpec::length(1, 0);
        let result: RunResult = run_with_observer(&f, &s.events, horizon, |_, _| {}).expect("engine succeeds");
        let before = result.clone();
        let (a, _) = analyze(&result, 2);
        let (b, _) = analyze(&result, 2);
        prop_assert_eq!(&result, &before);
        prop_assert_eq!(a.to_string(), b.to_string());
        prop_assert!(a.checks.iter().filter(|l| l.name.starts_with("mass.")).all(|l| l.pass), "{}", a);
    }

    #[test]
    fn traces_verify_to_their_own_reports(
        seed in 0u64..10_000,
        p in pressure(),
        mode in prop_oneof![Just(RunMode::Single), Just(RunMode::Universal)],
        horizon in 10u64..70,
    ) {
        let mut config = RunConfig::new(mode, horizon);
        config.seed = seed;
        config.stream.profile = Some(p);
        let outcome = run_config(&config).expect("run succeeds");
        let report = verify_trace(&outcome.artifacts.trace).expect("trace verifies");
        prop_assert_eq!(report.to_string(), outcome.artifacts.report);
        let parsed = EventStream::parse(&outcome.artifacts.stream).expect("stream parses");
        prop_assert_eq!(parsed.to_string(), outcome.artifacts.stream);
    }
}
