//! State and actions shared by the single-function and universal engines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bits::BitString;
use crate::fhat::{ladder, ControlTransfer, FhatState};
use crate::function::ApproximatedFunction;
use crate::mass::DyadicMass;
use crate::oracle::{AdmissionError, DescriptionEvent, EnumerationState};
use crate::request::{Origin, Request, RequestSet};
use crate::tree::{ConstructionTree, FamilyKey, Sharing, TreeError, TreeRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Single,
    Universal,
}

impl Mode {
    pub fn sharing(self) -> Sharing {
        match self {
            Mode::Single => Sharing::Uniform,
            Mode::Universal => Sharing::EvenBits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReqId {
    /// `S_i` (single) or `S^e_i` (universal).
    S { e: usize, i: usize },
    /// `R_i` of the single engine.
    R { i: usize },
    /// `R^α_{|α|}` of the universal engine.
    RAlpha { alpha: BitString },
}

impl fmt::Display for ReqId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReqId::S { e, i } => write!(f, "S:{e}:{i}"),
            ReqId::R { i } => write!(f, "R:{i}"),
            ReqId::RAlpha { alpha } => write!(f, "R@{}", alpha.to_token()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReqIdError {
    #[error("bad requirement id {0:?}")]
    Bad(String),
}

impl std::str::FromStr for ReqId {
    type Err = ReqIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ReqIdError::Bad(s.to_string());
        if let Some(rest) = s.strip_prefix("R@") {
            return Ok(ReqId::RAlpha {
                alpha: BitString::from_token(rest).map_err(|_| bad())?,
            });
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["S", e, i] => Ok(ReqId::S {
                e: e.parse().map_err(|_| bad())?,
                i: i.parse().map_err(|_| bad())?,
            }),
            ["R", i] => Ok(ReqId::R {
                i: i.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// A shorter description that makes an S-requirement require attention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub e: usize,
    pub rung: usize,
    pub sigma: BitString,
    pub key: BitString,
    pub program: BitString,
    /// `K^α(σ) + f̂(σ)`.
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InjuryRecord {
    pub stage: u64,
    pub e: usize,
    /// Rung `i` of the triggering target: the injured requirements are `R_i`.
    pub control: usize,
    pub family: FamilyKey,
    /// `n_i` before the injury.
    pub level: usize,
    pub sigma: BitString,
    pub trigger_key: BitString,
    pub trigger_program: BitString,
    /// The chosen living leaf `α·γ`.
    pub leaf: BitString,
    /// `γ`.
    pub suffix: BitString,
    /// Mass above level `n_i` on the chosen leaf.
    pub mass: DyadicMass,
    /// Tree history length just before the prune.
    pub history_len: usize,
    /// `|L_e|` for every `e` at injury time.
    pub request_counts: Vec<usize>,
    /// Events admitted by injury time.
    pub events_admitted: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionKind {
    Branch { family: FamilyKey, level: usize },
    Request { e: usize, request: Request },
    Injury(Box<InjuryRecord>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub req: ReqId,
    pub kind: ActionKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: u64,
    pub admitted: usize,
    pub transfers: Vec<(usize, ControlTransfer)>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event {index} rejected at stage {stage}: {source}")]
    Admission {
        stage: u64,
        index: usize,
        #[source]
        source: AdmissionError,
    },
    #[error("stage {stage}: {source}")]
    Tree {
        stage: u64,
        #[source]
        source: TreeError,
    },
    #[error("internal invariant breached at stage {stage}: {message}")]
    InternalInvariantBreach { stage: u64, message: String },
}

/// Everything the construction has built so far.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub mode: Mode,
    pub stage: u64,
    pub tree: ConstructionTree,
    pub enumeration: EnumerationState,
    pub fhat: Vec<FhatState>,
    pub requests: Vec<RequestSet>,
    pub injury_counts: BTreeMap<FamilyKey, u64>,
    /// Exact pairs `(key, program)` that produced a request or an injury, per `e`.
    pub acted: Vec<BTreeSet<(BitString, BitString)>>,
    max_use: usize,
}

impl State {
    pub fn new(mode: Mode, functions: usize) -> Self {
        Self {
            mode,
            stage: 0,
            tree: ConstructionTree::new(mode.sharing()),
            enumeration: EnumerationState::new(),
            fhat: vec![FhatState::new(); functions],
            requests: vec![RequestSet::new(); functions],
            injury_counts: BTreeMap::new(),
            acted: vec![BTreeSet::new(); functions],
            max_use: 0,
        }
    }

    /// Least rung an `S^e` requirement may control.
    pub fn min_rung(&self, e: usize) -> usize {
        match self.mode {
            Mode::Single => 0,
            Mode::Universal => 2 * e + 1,
        }
    }

    /// A fresh branching level: above every length, level, use and stage so far.
    pub fn fresh_level(&self) -> usize {
        1 + self
            .tree
            .max_len()
            .max(self.max_use)
            .max(self.stage as usize)
    }

    pub fn note_use(&mut self, use_len: usize) {
        self.max_use = self.max_use.max(use_len);
    }

    /// Whether an `S^e` witness may sit on the node with choices `eta`.
    pub fn guess_allows(&self, e: usize, eta: &BitString) -> bool {
        match self.mode {
            Mode::Single => true,
            Mode::Universal => eta.len() <= 2 * e || eta.bit(2 * e),
        }
    }

    /// Best qualifying living description of σ for `S^e` at rung `rung`:
    /// least `|τ|`, then shortest key, then leftmost key, then least program.
    pub fn best_witness(&self, e: usize, sigma: &BitString, rung: usize) -> Option<Witness> {
        let mut best: Option<(&BitString, &BitString)> = None;
        for d in self.enumeration.table().descriptions(sigma) {
            let Some(eta) = self.tree.eta(&d.key) else {
                continue;
            };
            if !self.guess_allows(e, &eta) {
                continue;
            }
            // Lengths are compared first, so length-lex order on equal-length
            // strings is plain lexicographic order.
            let better = best.map_or(true, |(k, p)| {
                (d.program.len(), d.key.len(), &d.key, &d.program) < (p.len(), k.len(), k, p)
            });
            if better {
                best = Some((&d.key, &d.program));
            }
        }
        best.map(|(key, program)| Witness {
            e,
            rung,
            sigma: sigma.clone(),
            key: key.clone(),
            program: program.clone(),
            length: program.len() as u64 + ladder(rung),
        })
    }

    /// For each rung, the leftmost σ it controls that requires attention.
    pub fn attention_by_rung(&self, e: usize) -> BTreeMap<usize, Witness> {
        let mut out: BTreeMap<usize, Witness> = BTreeMap::new();
        let fhat = &self.fhat[e];
        for sigma in self.enumeration.table().outputs() {
            let Some(rung) = fhat.rung_of(sigma) else {
                continue;
            };
            if rung < self.min_rung(e) {
                continue;
            }
            let Some(w) = self.best_witness(e, sigma, rung) else {
                continue;
            };
            if self.requests[e].min_length(sigma).is_some_and(|m| w.length >= m) {
                continue;
            }
            match out.get(&rung) {
                Some(old) if old.sigma <= *sigma => {}
                _ => {
                    out.insert(rung, w);
                }
            }
        }
        out
    }

    pub fn attention(&self, e: usize, rung: usize) -> Option<Witness> {
        self.attention_by_rung(e).remove(&rung)
    }

    /// No S-requirement for `e` requires attention, regardless of eligibility.
    pub fn quiescent(&self, e: usize) -> bool {
        self.attention_by_rung(e).is_empty()
    }

    pub fn branch(&mut self, family: &FamilyKey) -> Result<usize, EngineError> {
        let level = self.fresh_level();
        self.tree
            .branch(self.stage, family, level)
            .map_err(|source| EngineError::Tree {
                stage: self.stage,
                source,
            })?;
        Ok(level)
    }

    /// Case 2: append a request or injure, depending on where the witness sits.
    pub fn act_on(&mut self, w: Witness) -> Result<ActionKind, EngineError> {
        let stage = self.stage;
        let eta = self
            .tree
            .eta(&w.key)
            .ok_or_else(|| EngineError::InternalInvariantBreach {
                stage,
                message: format!("witness key {} is not living", w.key),
            })?;
        self.acted[w.e].insert((w.key.clone(), w.program.clone()));
        if eta.len() <= w.rung {
            let request = Request {
                target: w.sigma.clone(),
                length: w.length,
                stage,
                origin: Origin {
                    oracle: w.key.clone(),
                    program: w.program.clone(),
                },
            };
            self.requests[w.e].push(request.clone());
            return Ok(ActionKind::Request { e: w.e, request });
        }
        let family = self.tree.sharing().family_of(&eta.prefix(w.rung));
        let record = self.injure(&family, &w)?;
        Ok(ActionKind::Injury(Box::new(record)))
    }

    /// Living event keys strictly above level `level` on members of `family`.
    pub fn keys_above(&self, family: &FamilyKey, level: usize) -> Vec<BitString> {
        self.enumeration
            .keys()
            .filter(|k| k.len() > level)
            .filter(|k| {
                self.tree
                    .locate(&k.prefix(level))
                    .is_some_and(|loc| &loc.family == family)
                    && self.tree.is_living(k)
            })
            .cloned()
            .collect()
    }

    /// The Injury Subroutine: pick the living leaf above `family`'s level with
    /// the most new mass (leftmost on ties) and keep only its suffix.
    pub fn injure(&mut self, family: &FamilyKey, w: &Witness) -> Result<InjuryRecord, EngineError> {
        let stage = self.stage;
        let tree_err = |source| EngineError::Tree { stage, source };
        let level = self
            .tree
            .level(family)
            .ok_or_else(|| tree_err(TreeError::NotBranching(family.clone())))?;
        let keys = self.keys_above(family, level);
        let mut candidates: Vec<BitString> = keys
            .iter()
            .filter_map(|k| self.tree.leftmost_leaf_from(k))
            .collect();
        let first = self
            .tree
            .member_node(family, &self.tree.leftmost_member_eta(family))
            .and_then(|x| self.tree.leftmost_leaf_from(&x))
            .ok_or_else(|| tree_err(TreeError::MissingFamily(family.clone())))?;
        candidates.push(first);
        let mut best: Option<(DyadicMass, BitString)> = None;
        for leaf in candidates {
            let mass: DyadicMass = keys
                .iter()
                .filter(|k| k.is_prefix_of(&leaf))
                .map(|k| self.enumeration.key_mass(k))
                .sum();
            let replace = match &best {
                None => true,
                Some((m, l)) => mass > *m || (mass == *m && leaf.lex_cmp(l).is_lt()),
            };
            if replace {
                best = Some((mass, leaf));
            }
        }
        let (mass, leaf) = best.expect("at least one candidate");
        let suffix = leaf.suffix_from(level);
        let record = InjuryRecord {
            stage,
            e: w.e,
            control: w.rung,
            family: family.clone(),
            level,
            sigma: w.sigma.clone(),
            trigger_key: w.key.clone(),
            trigger_program: w.program.clone(),
            leaf,
            suffix: suffix.clone(),
            mass,
            history_len: self.tree.history().len(),
            request_counts: self.requests.iter().map(RequestSet::len).collect(),
            events_admitted: self.enumeration.events().len(),
        };
        self.tree.prune(stage, family, &suffix).map_err(tree_err)?;
        *self.injury_counts.entry(family.clone()).or_default() += 1;
        Ok(record)
    }

    /// Full structural check of the tree and, in single mode, of the
    /// ordering of branching levels.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        let stage = self.stage;
        self.tree.validate().map_err(|source| EngineError::Tree { stage, source })?;
        if self.mode == Mode::Single {
            let levels = self.tree.uniform_levels();
            if levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EngineError::InternalInvariantBreach {
                    stage,
                    message: format!("branching levels not increasing: {levels:?}"),
                });
            }
        }
        Ok(())
    }

    /// Checks after a stage: local ones for a fresh branching, the full
    /// check after anything that pruned.
    pub fn check_after(&self, record: &StageRecord) -> Result<(), EngineError> {
        let stage = self.stage;
        if record.actions.iter().any(|a| matches!(a.kind, ActionKind::Injury(_))) {
            return self.check_invariants();
        }
        for a in &record.actions {
            let ActionKind::Branch { family, level } = &a.kind else {
                continue;
            };
            self.tree
                .validate_branch(family)
                .map_err(|source| EngineError::Tree { stage, source })?;
            let below = family.level.checked_sub(1).and_then(|i| match self.mode {
                Mode::Single => self.tree.uniform_level(i),
                Mode::Universal => None,
            });
            if below.is_some_and(|n| n >= *level) {
                return Err(EngineError::InternalInvariantBreach {
                    stage,
                    message: format!("level {level} not above the one below it"),
                });
            }
        }
        Ok(())
    }
}

/// Drives one run: owns the event cursor and the stage log.
pub struct Construction<'a> {
    pub state: State,
    functions: Vec<&'a dyn ApproximatedFunction>,
    events: &'a [DescriptionEvent],
    next_event: usize,
    pub records: Vec<StageRecord>,
}

impl<'a> Construction<'a> {
    pub fn new(mode: Mode, functions: Vec<&'a dyn ApproximatedFunction>, events: &'a [DescriptionEvent]) -> Self {
        Self {
            state: State::new(mode, functions.len()),
            functions,
            events,
            next_event: 0,
            records: Vec::new(),
        }
    }

    pub fn functions(&self) -> &[&'a dyn ApproximatedFunction] {
        &self.functions
    }

    /// Advance the stage counter, admit due events and run Substage 1.
    pub fn begin_stage(&mut self) -> Result<StageRecord, EngineError> {
        let t = self.state.stage + 1;
        self.state.stage = t;
        let mut admitted = 0;
        while let Some(e) = self.events.get(self.next_event) {
            if e.stage > t {
                break;
            }
            self.state
                .enumeration
                .admit(e.clone())
                .map_err(|source| EngineError::Admission {
                    stage: t,
                    index: self.next_event,
                    source,
                })?;
            self.state.note_use(e.use_len);
            self.next_event += 1;
            admitted += 1;
        }
        let mut transfers = Vec::new();
        for (e, f) in self.functions.iter().enumerate() {
            if e as u64 > t {
                continue;
            }
            for tr in self.state.fhat[e].step(*f, t) {
                transfers.push((e, tr));
            }
        }
        Ok(StageRecord {
            stage: t,
            admitted,
            transfers,
            actions: Vec::new(),
        })
    }

    pub fn finish_stage(&mut self, record: StageRecord) -> Result<(), EngineError> {
        self.state.check_after(&record)?;
        self.records.push(record);
        Ok(())
    }

    pub fn injuries(&self) -> Vec<InjuryRecord> {
        self.records
            .iter()
            .flat_map(|r| r.actions.iter())
            .filter_map(|a| match &a.kind {
                ActionKind::Injury(rec) => Some((**rec).clone()),
                _ => None,
            })
            .collect()
    }
}

/// Everything analysis needs from a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub mode: Mode,
    pub horizon: u64,
    pub state: State,
    pub records: Vec<StageRecord>,
    pub injuries: Vec<InjuryRecord>,
    /// Per function: no S-requirement requires attention at the end.
    pub quiescent: Vec<bool>,
    /// Per function: `f` reported every monitored target as settled.
    pub settled: Vec<BTreeSet<BitString>>,
}

impl RunResult {
    pub fn from_construction(c: Construction<'_>, horizon: u64) -> Self {
        let injuries = c.injuries();
        let quiescent = (0..c.state.fhat.len()).map(|e| c.state.quiescent(e)).collect();
        let settled = c
            .state
            .fhat
            .iter()
            .map(|fh| {
                fh.rungs()
                    .map(|(s, _)| s)
                    .filter(|s| fh.is_settled(s))
                    .collect()
            })
            .collect();
        Self {
            mode: c.state.mode,
            horizon,
            state: c.state,
            records: c.records,
            injuries,
            quiescent,
            settled,
        }
    }

    pub fn tree_before(&self, injury: &InjuryRecord) -> ConstructionTree {
        let history: &[TreeRecord] = &self.state.tree.history()[..injury.history_len];
        ConstructionTree::replay(self.state.tree.sharing(), history).expect("recorded history replays")
    }

    pub fn injury_count(&self) -> usize {
        self.injuries.len()
    }
}
