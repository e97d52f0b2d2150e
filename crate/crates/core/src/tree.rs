//! The partially built tree `T_s`.
//!
//! Living paths differ only at branching bits, and every path that makes the
//! same branching choices (up to the sharing rule) has the same bits between
//! branchings. The tree is therefore stored as a map from *families* to
//! *regions*: a region is the run of fixed bits a path follows after its last
//! branching, ending either in a new branching level or in a leaf.
//!
//! * `Sharing::Uniform` puts every path with the same number of branchings
//!   in one family (one level `n_i` for the whole tree).
//! * `Sharing::EvenBits` keys families by the choices made at even
//!   branchings, so paths that agree on even choices share levels.
//!
//! Dead nodes are never stored explicitly. A node is dead when it was in some
//! earlier tree and is no longer living; [`ConstructionTree::status_map`]
//! recovers the full status map from the history for small trees.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::bits::BitString;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sharing {
    Uniform,
    EvenBits,
}

/// A family of paths: `level` branchings passed, `pattern` the choices that
/// matter under the sharing rule (empty for `Uniform`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FamilyKey {
    pub level: usize,
    pub pattern: BitString,
}

impl FamilyKey {
    pub fn root() -> Self {
        Self {
            level: 0,
            pattern: BitString::new(),
        }
    }
}

impl Sharing {
    pub fn family_of(self, eta: &BitString) -> FamilyKey {
        let pattern = match self {
            Sharing::Uniform => BitString::new(),
            Sharing::EvenBits => {
                BitString::from_bits(eta.bits().iter().step_by(2).copied().collect())
            }
        };
        FamilyKey {
            level: eta.len(),
            pattern,
        }
    }

    pub fn child(self, family: &FamilyKey, bit: bool) -> FamilyKey {
        let pattern = match self {
            Sharing::EvenBits if family.level % 2 == 0 => family.pattern.child(bit),
            _ => family.pattern.clone(),
        };
        FamilyKey {
            level: family.level + 1,
            pattern,
        }
    }

    /// Whether a path with choices `eta` belongs to `family`.
    pub fn contains(self, family: &FamilyKey, eta: &BitString) -> bool {
        eta.len() == family.level && self.family_of(eta) == *family
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    /// Absolute position of the first bit of `seg`.
    pub start: usize,
    pub seg: BitString,
    /// Branching level: nodes of this length branch; the bit at this
    /// position is free.
    pub branch: Option<usize>,
}

impl Region {
    pub fn end(&self) -> usize {
        self.start + self.seg.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeRecord {
    /// Leaves of `family` were extended by zeros to `level` and both
    /// one-bit extensions added.
    Branch {
        stage: u64,
        family: FamilyKey,
        level: usize,
    },
    /// Above every member node at the family's level only `suffix` survives.
    Prune {
        stage: u64,
        family: FamilyKey,
        suffix: BitString,
    },
}

impl TreeRecord {
    pub fn stage(&self) -> u64 {
        match self {
            TreeRecord::Branch { stage, .. } | TreeRecord::Prune { stage, .. } => *stage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Alive,
    Dead,
}

/// Where a living node sits: its family region and branching choices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Located {
    pub family: FamilyKey,
    pub eta: BitString,
    pub start: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("family {0:?} has no region")]
    MissingFamily(FamilyKey),
    #[error("family {0:?} already branches")]
    AlreadyBranching(FamilyKey),
    #[error("family {0:?} does not branch")]
    NotBranching(FamilyKey),
    #[error("level {level} is not above the leaves of {family:?}")]
    LevelTooLow { family: FamilyKey, level: usize },
    #[error("suffix {suffix} is not a living extension above {family:?}")]
    BadSuffix { family: FamilyKey, suffix: BitString },
    #[error("tree invariant broken: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug)]
pub struct ConstructionTree {
    sharing: Sharing,
    regions: BTreeMap<FamilyKey, Region>,
    history: Vec<TreeRecord>,
    max_len: usize,
}

impl PartialEq for ConstructionTree {
    fn eq(&self, other: &Self) -> bool {
        self.sharing == other.sharing
            && self.regions == other.regions
            && self.history == other.history
    }
}

impl ConstructionTree {
    /// The tree holding only the empty string.
    pub fn new(sharing: Sharing) -> Self {
        let mut regions = BTreeMap::new();
        regions.insert(
            FamilyKey::root(),
            Region {
                start: 0,
                seg: BitString::new(),
                branch: None,
            },
        );
        Self {
            sharing,
            regions,
            history: Vec::new(),
            max_len: 0,
        }
    }

    pub fn sharing(&self) -> Sharing {
        self.sharing
    }

    pub fn history(&self) -> &[TreeRecord] {
        &self.history
    }

    pub fn regions(&self) -> &BTreeMap<FamilyKey, Region> {
        &self.regions
    }

    pub fn region(&self, family: &FamilyKey) -> Option<&Region> {
        self.regions.get(family)
    }

    /// Length of the longest node ever in the tree.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn level(&self, family: &FamilyKey) -> Option<usize> {
        self.regions.get(family).and_then(|r| r.branch)
    }

    /// `n_i` under uniform sharing.
    pub fn uniform_level(&self, i: usize) -> Option<usize> {
        self.level(&FamilyKey {
            level: i,
            pattern: BitString::new(),
        })
    }

    /// Set uniform levels `n_0 < n_1 < …` (a prefix of the requirements).
    pub fn uniform_levels(&self) -> Vec<usize> {
        (0..).map_while(|i| self.uniform_level(i)).collect()
    }

    pub fn locate(&self, x: &BitString) -> Option<Located> {
        let mut family = FamilyKey::root();
        let mut eta = BitString::new();
        loop {
            let region = self.regions.get(&family)?;
            let end = region.end();
            let upto = x.len().min(end);
            if upto > region.start
                && x.bits()[region.start..upto] != region.seg.bits()[..upto - region.start]
            {
                return None;
            }
            if x.len() <= end {
                return Some(Located {
                    family,
                    eta,
                    start: region.start,
                });
            }
            let n = region.branch?;
            let b = x.bit(n);
            eta.push(b);
            family = self.sharing.child(&family, b);
        }
    }

    pub fn is_living(&self, x: &BitString) -> bool {
        self.locate(x).is_some()
    }

    /// Branching choices a living node has made; `None` if not living.
    pub fn eta(&self, x: &BitString) -> Option<BitString> {
        self.locate(x).map(|l| l.eta)
    }

    pub fn is_living_leaf(&self, x: &BitString) -> bool {
        match self.locate(x) {
            Some(loc) => {
                let region = &self.regions[&loc.family];
                region.branch.is_none() && x.len() == region.end()
            }
            None => false,
        }
    }

    /// The leftmost living leaf extending the living node `x`.
    pub fn leftmost_leaf_from(&self, x: &BitString) -> Option<BitString> {
        let loc = self.locate(x)?;
        let mut out = x.clone();
        let mut family = loc.family;
        loop {
            let region = &self.regions[&family];
            let already = out.len() - region.start;
            out.extend_from(&region.seg.bits()[already..]);
            match region.branch {
                None => return Some(out),
                Some(_) => {
                    out.push(false);
                    family = self.sharing.child(&family, false);
                }
            }
        }
    }

    /// The node at the start of the region reached by choices `eta`.
    pub fn node_for_eta(&self, eta: &BitString) -> Option<BitString> {
        let mut out = BitString::new();
        let mut family = FamilyKey::root();
        for &b in eta.bits() {
            let region = self.regions.get(&family)?;
            region.branch?;
            out.extend_from(region.seg.bits());
            out.push(b);
            family = self.sharing.child(&family, b);
        }
        self.regions.get(&family)?;
        Some(out)
    }

    /// Choices of the leftmost member of `family`: pattern bits at the
    /// positions the sharing rule fixes, zero elsewhere.
    pub fn leftmost_member_eta(&self, family: &FamilyKey) -> BitString {
        match self.sharing {
            Sharing::Uniform => BitString::zeros(family.level),
            Sharing::EvenBits => BitString::from_bits(
                (0..family.level)
                    .map(|j| j % 2 == 0 && family.pattern.bit(j / 2))
                    .collect(),
            ),
        }
    }

    fn free_positions(&self, family: &FamilyKey) -> Vec<usize> {
        (0..family.level)
            .filter(|&j| self.sharing == Sharing::Uniform || j % 2 == 1)
            .collect()
    }

    /// `log2` of the number of member paths of `family`.
    pub fn member_count_log2(&self, family: &FamilyKey) -> usize {
        self.free_positions(family).len()
    }

    /// All choice strings belonging to `family`, in lexicographic order.
    /// Panics past 2^20 members.
    pub fn member_etas(&self, family: &FamilyKey) -> Vec<BitString> {
        let free = self.free_positions(family);
        assert!(free.len() <= 20, "too many members to enumerate");
        let base = self.leftmost_member_eta(family);
        (0..(1u64 << free.len()))
            .map(|mask| {
                let mut eta = base.clone();
                for (k, &pos) in free.iter().enumerate() {
                    eta.set(pos, (mask >> (free.len() - 1 - k)) & 1 == 1);
                }
                eta
            })
            .collect()
    }

    /// The node of length `level(family)` on the path with choices `eta`.
    pub fn member_node(&self, family: &FamilyKey, eta: &BitString) -> Option<BitString> {
        let start = self.node_for_eta(eta)?;
        let region = self.regions.get(family)?;
        region.branch?;
        Some(start.concat(&region.seg))
    }

    /// Extend every leaf of `family` with zeros to length `level`, then add
    /// both one-bit extensions.
    pub fn branch(&mut self, stage: u64, family: &FamilyKey, level: usize) -> Result<(), TreeError> {
        let sharing = self.sharing;
        let region = self
            .regions
            .get_mut(family)
            .ok_or_else(|| TreeError::MissingFamily(family.clone()))?;
        if region.branch.is_some() {
            return Err(TreeError::AlreadyBranching(family.clone()));
        }
        if level < region.end() {
            return Err(TreeError::LevelTooLow {
                family: family.clone(),
                level,
            });
        }
        let pad = level - region.end();
        region.seg.extend_from(&vec![false; pad]);
        region.branch = Some(level);
        for b in [false, true] {
            let child = sharing.child(family, b);
            if self.regions.contains_key(&child) {
                // Under uniform sharing both bits lead to the same family.
                continue;
            }
            self.regions.insert(
                child,
                Region {
                    start: level + 1,
                    seg: BitString::new(),
                    branch: None,
                },
            );
        }
        self.max_len = self.max_len.max(level + 1);
        self.history.push(TreeRecord::Branch {
            stage,
            family: family.clone(),
            level,
        });
        Ok(())
    }

    /// Keep only `suffix` above each member node of `family` (at its level)
    /// and forget the family's branching and everything that hung off it.
    ///
    /// `suffix` starts with the branching bit and must lead from the leftmost
    /// member to a living leaf; the sharing rule makes it valid above every
    /// member.
    pub fn prune(&mut self, stage: u64, family: &FamilyKey, suffix: &BitString) -> Result<(), TreeError> {
        let region = self
            .regions
            .get(family)
            .ok_or_else(|| TreeError::MissingFamily(family.clone()))?;
        if region.branch.is_none() {
            return Err(TreeError::NotBranching(family.clone()));
        }
        let members = if self.member_count_log2(family) <= 6 {
            self.member_etas(family)
        } else {
            vec![self.leftmost_member_eta(family)]
        };
        for eta in members {
            let node = self
                .member_node(family, &eta)
                .ok_or_else(|| TreeError::MissingFamily(family.clone()))?;
            if !self.is_living_leaf(&node.concat(suffix)) {
                return Err(TreeError::BadSuffix {
                    family: family.clone(),
                    suffix: suffix.clone(),
                });
            }
        }
        let doomed = self.descendants(family);
        for f in doomed {
            self.regions.remove(&f);
        }
        let region = self.regions.get_mut(family).expect("checked");
        region.seg.extend_from(suffix.bits());
        region.branch = None;
        self.history.push(TreeRecord::Prune {
            stage,
            family: family.clone(),
            suffix: suffix.clone(),
        });
        Ok(())
    }

    /// Families strictly below `family` in the region tree.
    pub fn descendants(&self, family: &FamilyKey) -> Vec<FamilyKey> {
        let mut out = Vec::new();
        let mut stack = vec![family.clone()];
        let mut seen = BTreeSet::new();
        while let Some(f) = stack.pop() {
            let Some(region) = self.regions.get(&f) else {
                continue;
            };
            if region.branch.is_none() {
                continue;
            }
            for b in [false, true] {
                let c = self.sharing.child(&f, b);
                if self.regions.contains_key(&c) && seen.insert(c.clone()) {
                    out.push(c.clone());
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Number of living nodes of length `len`.
    pub fn count_living_at(&self, len: usize) -> BigUint {
        let mut memo: HashMap<FamilyKey, BigUint> = HashMap::new();
        self.count_from(&FamilyKey::root(), len, &mut memo)
    }

    fn count_from(&self, family: &FamilyKey, len: usize, memo: &mut HashMap<FamilyKey, BigUint>) -> BigUint {
        if let Some(v) = memo.get(family) {
            return v.clone();
        }
        let region = &self.regions[family];
        let v = if len < region.start {
            BigUint::zero()
        } else if len <= region.end() {
            BigUint::one()
        } else {
            match region.branch {
                None => BigUint::zero(),
                Some(_) => {
                    let c0 = self.sharing.child(family, false);
                    let c1 = self.sharing.child(family, true);
                    self.count_from(&c0, len, memo) + self.count_from(&c1, len, memo)
                }
            }
        };
        memo.insert(family.clone(), v.clone());
        v
    }

    /// Every living node, for small trees. `None` when more than `cap` nodes.
    pub fn living_nodes(&self, cap: usize) -> Option<BTreeSet<BitString>> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(BitString::new(), FamilyKey::root())];
        while let Some((prefix, family)) = stack.pop() {
            let region = &self.regions[&family];
            let mut node = prefix;
            out.insert(node.clone());
            for &b in region.seg.bits() {
                node.push(b);
                out.insert(node.clone());
            }
            if out.len() > cap {
                return None;
            }
            if region.branch.is_some() {
                for b in [false, true] {
                    stack.push((node.child(b), self.sharing.child(&family, b)));
                }
            }
        }
        Some(out)
    }

    pub fn living_leaves(&self, cap: usize) -> Option<Vec<BitString>> {
        let nodes = self.living_nodes(cap)?;
        Some(nodes.into_iter().filter(|x| self.is_living_leaf(x)).collect())
    }

    /// Rebuild a tree by applying `records` to the one-node tree.
    pub fn replay(sharing: Sharing, records: &[TreeRecord]) -> Result<Self, TreeError> {
        let mut tree = Self::new(sharing);
        for r in records {
            tree.apply(r)?;
        }
        Ok(tree)
    }

    fn apply(&mut self, record: &TreeRecord) -> Result<(), TreeError> {
        match record {
            TreeRecord::Branch { stage, family, level } => self.branch(*stage, family, *level),
            TreeRecord::Prune { stage, family, suffix } => self.prune(*stage, family, suffix),
        }
    }

    /// Status of every node that was ever in the tree, by replaying the
    /// history. `None` when some intermediate tree exceeds `cap` nodes.
    pub fn status_map(&self, cap: usize) -> Option<BTreeMap<BitString, NodeStatus>> {
        let mut ever: BTreeSet<BitString> = BTreeSet::new();
        let mut tree = Self::new(self.sharing);
        ever.extend(tree.living_nodes(cap)?);
        for r in &self.history {
            tree.apply(r).ok()?;
            ever.extend(tree.living_nodes(cap)?);
        }
        let living = self.living_nodes(cap)?;
        Some(
            ever.into_iter()
                .map(|x| {
                    let s = if living.contains(&x) {
                        NodeStatus::Alive
                    } else {
                        NodeStatus::Dead
                    };
                    (x, s)
                })
                .collect(),
        )
    }

    /// Structural consistency of the region map.
    /// Local form of [`Self::validate`] for a family that just branched:
    /// its level closes its segment and both children start right above it.
    pub fn validate_branch(&self, family: &FamilyKey) -> Result<(), TreeError> {
        let region = self
            .regions
            .get(family)
            .ok_or_else(|| TreeError::MissingFamily(family.clone()))?;
        let n = region.branch.ok_or_else(|| TreeError::NotBranching(family.clone()))?;
        if n != region.end() {
            return Err(TreeError::Invariant(format!(
                "family {family:?} branches at {n} but its segment ends at {}",
                region.end()
            )));
        }
        for b in [false, true] {
            let c = self.sharing.child(family, b);
            let child = self.regions.get(&c).ok_or_else(|| TreeError::MissingFamily(c.clone()))?;
            if child.start != n + 1 || child.branch.is_some() {
                return Err(TreeError::Invariant(format!("child {c:?} of a fresh branching is malformed")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let mut reachable = BTreeSet::new();
        let mut stack = vec![FamilyKey::root()];
        while let Some(f) = stack.pop() {
            let region = self
                .regions
                .get(&f)
                .ok_or_else(|| TreeError::MissingFamily(f.clone()))?;
            reachable.insert(f.clone());
            if let Some(n) = region.branch {
                if n != region.end() {
                    return Err(TreeError::Invariant(format!(
                        "family {f:?} branches at {n} but its segment ends at {}",
                        region.end()
                    )));
                }
                for b in [false, true] {
                    let c = self.sharing.child(&f, b);
                    let child = self.regions.get(&c).ok_or_else(|| TreeError::MissingFamily(c.clone()))?;
                    if child.start != n + 1 {
                        return Err(TreeError::Invariant(format!(
                            "child {c:?} starts at {} instead of {}",
                            child.start,
                            n + 1
                        )));
                    }
                    if !reachable.contains(&c) {
                        stack.push(c);
                    }
                }
            }
        }
        if reachable.len() != self.regions.len() {
            return Err(TreeError::Invariant(format!(
                "{} unreachable regions",
                self.regions.len() - reachable.len()
            )));
        }
        Ok(())
    }
}
