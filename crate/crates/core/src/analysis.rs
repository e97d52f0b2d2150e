//! Post-hoc checks on finished runs: the mass decomposition and its bounds,
//! per-injury charges, the ladder inequalities, the main inequality,
//! coding joins, partial mutual-information sums and the dimension chain.
//!
//! Every function here reads a [`RunResult`] and never mutates it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bits::BitString;
use crate::construction::{Mode, RunResult};
use crate::fhat::{ladder, ladder_wide};
use crate::function::floor_log2;
use crate::kc::{build_prefix_code, machine_complexity, PrefixCode};
use crate::mass::DyadicMass;
use crate::oracle::{k_of, ComplexityTable};
use crate::tree::FamilyKey;

/// A dyadic margin that may be negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Margin {
    pub negative: bool,
    pub value: DyadicMass,
}

impl Margin {
    /// `rhs - lhs`.
    pub fn between(lhs: &DyadicMass, rhs: &DyadicMass) -> Self {
        let (negative, value) = rhs.signed_diff(lhs);
        Self { negative, value }
    }

    pub fn integer(v: i128) -> Self {
        Self {
            negative: v < 0,
            value: DyadicMass::from_integer(v.unsigned_abs() as u64),
        }
    }
}

impl fmt::Display for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative && !self.value.is_zero() {
            f.write_str("-")?;
        }
        write!(f, "{}", self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub margin: Margin,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "check {} {status} margin={}", self.name, self.margin)
    }
}

/// Line-oriented verification report: `check` lines, then free-form `note`s.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<CheckLine>,
    pub notes: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bound violated: {line}; {detail}")]
pub struct BoundViolated {
    pub line: String,
    pub detail: String,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `lhs ≤ rhs`.
    pub fn bound(&mut self, name: impl Into<String>, lhs: &DyadicMass, rhs: &DyadicMass) {
        self.checks.push(CheckLine {
            name: name.into(),
            pass: lhs <= rhs,
            margin: Margin::between(lhs, rhs),
        });
    }

    /// Record `lhs ≤ rhs` on integers.
    pub fn int_bound(&mut self, name: impl Into<String>, lhs: i128, rhs: i128) {
        self.checks.push(CheckLine {
            name: name.into(),
            pass: lhs <= rhs,
            margin: Margin::integer(rhs - lhs),
        });
    }

    pub fn fail(&mut self, name: impl Into<String>) {
        self.checks.push(CheckLine {
            name: name.into(),
            pass: false,
            margin: Margin::integer(0),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The first failing check, as an error.
    pub fn into_result(self) -> Result<Report, BoundViolated> {
        let first = self.failures().next().map(ToString::to_string);
        match first {
            None => Ok(self),
            Some(line) => Err(BoundViolated {
                line,
                detail: self.notes.join("; "),
            }),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        for n in &self.notes {
            writeln!(f, "note {n}")?;
        }
        Ok(())
    }
}

/// One exact pair that acted, with its weight in `Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairContribution {
    pub key: BitString,
    pub program: BitString,
    pub output: BitString,
    /// `2 · 2^(-|τ| - f̂(σ))` with the final `f̂`.
    pub mass: DyadicMass,
    /// Whether the key survives in the final tree.
    pub living: bool,
}

/// Mass converging along the final tree, grouped by branching choices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaAccount {
    /// `α_σ`: the node at the branching level reached by the choices, or the
    /// leaf above them when that level is not set yet.
    pub node: BitString,
    pub resolved: bool,
    pub q: BTreeSet<(BitString, BitString)>,
    pub m: DyadicMass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassDecomposition {
    pub e: usize,
    pub lambda: DyadicMass,
    pub delta: DyadicMass,
    pub delta_prime: DyadicMass,
    pub delta_double_prime: DyadicMass,
    pub pairs: Vec<PairContribution>,
    pub per_sigma: BTreeMap<BitString, SigmaAccount>,
}

impl MassDecomposition {
    /// Largest `Σ_{σ' ⪯ σ} m_σ'` over all indexed σ.
    pub fn max_prefix_m(&self) -> DyadicMass {
        self.per_sigma
            .keys()
            .map(|sigma| {
                self.per_sigma
                    .iter()
                    .filter(|(s, _)| s.is_prefix_of(sigma))
                    .map(|(_, a)| a.m.clone())
                    .sum::<DyadicMass>()
            })
            .max()
            .unwrap_or_default()
    }
}

pub fn decompose_mass(result: &RunResult, e: usize) -> MassDecomposition {
    let state = &result.state;
    let tree = &state.tree;
    let fhat = &state.fhat[e];
    let enumeration = &state.enumeration;
    let mut pairs = Vec::new();
    for (key, program) in &state.acted[e] {
        for &ix in enumeration.events_at_key(key) {
            let ev = &enumeration.events()[ix];
            if &ev.program != program {
                continue;
            }
            let c = fhat.value(&ev.output).expect("acted outputs are monitored");
            pairs.push(PairContribution {
                key: key.clone(),
                program: program.clone(),
                output: ev.output.clone(),
                mass: DyadicMass::pow2_neg(program.len() as u64 + c).shl(1),
                living: tree.is_living(key),
            });
        }
    }
    let delta: DyadicMass = pairs.iter().map(|p| p.mass.clone()).sum();
    let delta_prime: DyadicMass = pairs.iter().filter(|p| p.living).map(|p| p.mass.clone()).sum();
    let delta_double_prime = delta.checked_sub(&delta_prime).expect("subset sum");

    let sharing = tree.sharing();
    let mut per_sigma: BTreeMap<BitString, SigmaAccount> = BTreeMap::new();
    for key in enumeration.keys() {
        let Some(eta) = tree.eta(key) else {
            continue;
        };
        let account = per_sigma.entry(eta.clone()).or_insert_with(|| {
            let family = sharing.family_of(&eta);
            match tree.member_node(&family, &eta) {
                Some(node) => SigmaAccount {
                    node,
                    resolved: true,
                    q: BTreeSet::new(),
                    m: DyadicMass::zero(),
                },
                None => SigmaAccount {
                    node: tree.leftmost_leaf_from(key).expect("living key"),
                    resolved: false,
                    q: BTreeSet::new(),
                    m: DyadicMass::zero(),
                },
            }
        });
        for &ix in enumeration.events_at_key(key) {
            account.q.insert((key.clone(), enumeration.events()[ix].program.clone()));
        }
        account.m += &enumeration.key_mass(key);
    }
    MassDecomposition {
        e,
        lambda: state.requests[e].ledger().clone(),
        delta,
        delta_prime,
        delta_double_prime,
        pairs,
        per_sigma,
    }
}

pub fn verify_mass_bounds(d: &MassDecomposition) -> Report {
    let mut r = Report::new();
    let e = d.e;
    let two = DyadicMass::from_integer(2);
    let four = DyadicMass::from_integer(4);
    r.bound(format!("mass.delta_prime.e{e}"), &d.delta_prime, &two);
    r.bound(format!("mass.delta_double_prime.e{e}"), &d.delta_double_prime, &two);
    r.bound(format!("mass.delta.e{e}"), &d.delta, &four);
    r.bound(format!("mass.lambda_le_delta.e{e}"), &d.lambda, &d.delta);
    r.bound(format!("mass.lambda.e{e}"), &d.lambda, &four);
    r.bound(format!("mass.kraft_shift2.e{e}"), &d.lambda.shr(2), &DyadicMass::one());
    r.bound(format!("mass.prefix_m.e{e}"), &d.max_prefix_m(), &DyadicMass::one());
    r
}

/// `m / 2^(c_i + 1)`.
pub fn injury_bound(m: &DyadicMass, control: usize) -> DyadicMass {
    m.shr(ladder(control) + 1)
}

/// For each injury: `2 · Σ 2^(-l)` over requests made before it whose
/// description sits above the injured level on a member of the injured
/// family, against `m / 2^(c_i + 1)`. Universal runs are checked per `e`.
pub fn verify_injury_charge(result: &RunResult) -> Report {
    let mut r = Report::new();
    for (k, inj) in result.injuries.iter().enumerate() {
        let before = result.tree_before(inj);
        let above = |key: &BitString| {
            key.len() > inj.level
                && before.is_living(key)
                && before
                    .locate(&key.prefix(inj.level))
                    .is_some_and(|loc| loc.family == inj.family)
        };
        let bound = injury_bound(&inj.mass, inj.control);
        for (e, set) in result.state.requests.iter().enumerate() {
            let upto = inj.request_counts.get(e).copied().unwrap_or(0);
            let charge: DyadicMass = set.requests()[..upto]
                .iter()
                .filter(|q| above(&q.origin.oracle))
                .map(|q| DyadicMass::pow2_neg(q.length).shl(1))
                .sum();
            if e > 0 && charge.is_zero() {
                continue;
            }
            r.bound(format!("injury_charge.{k}.stage{}.e{e}", inj.stage), &charge, &bound);
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderReport {
    pub step_failures: Vec<(usize, usize)>,
    pub closure_failures: Vec<usize>,
    pub report: Report,
}

/// `c_{i+l} ≥ c_i + i + 2l + 2` for `0 ≤ i ≤ i_max`, `1 ≤ l ≤ l_max`, and the
/// closure `2^((i²+3i+2)/2) / 2^(c_i+1) ≤ 2^(-i)` for `i ≤ i_max`.
pub fn verify_ladder_inequality(i_max: usize, l_max: usize) -> LadderReport {
    let mut step_failures = Vec::new();
    let mut step_margin = i128::MAX;
    for i in 0..=i_max {
        for l in 1..=l_max {
            let lhs = ladder_wide(i + l) as i128;
            let rhs = ladder_wide(i) as i128 + (i + 2 * l + 2) as i128;
            step_margin = step_margin.min(lhs - rhs);
            if lhs < rhs {
                step_failures.push((i, l));
            }
        }
    }
    let mut closure_failures = Vec::new();
    let mut closure_margin = i128::MAX;
    for i in 0..=i_max {
        let i = i as i128;
        // Compare exponents: (i²+3i+2)/2 − c_i − 1 ≤ −i.
        let lhs = (i * i + 3 * i + 2) / 2 - ladder_wide(i as usize) as i128 - 1;
        closure_margin = closure_margin.min(-i - lhs);
        if lhs > -i {
            closure_failures.push(i as usize);
        }
    }
    let mut report = Report::new();
    report.int_bound("ladder.step", 0, step_margin);
    report.int_bound("ladder.closure", 0, closure_margin);
    LadderReport {
        step_failures,
        closure_failures,
        report,
    }
}

/// Targets whose `f̂_e` is final and at a rung `S^e` may control.
fn checked_targets(result: &RunResult, e: usize) -> Vec<(BitString, u64)> {
    let state = &result.state;
    let fhat = &state.fhat[e];
    state
        .enumeration
        .table()
        .outputs()
        .filter(|s| result.settled[e].contains(*s))
        .filter_map(|s| {
            let rung = fhat.rung_of(s)?;
            (rung >= state.min_rung(e)).then(|| (s.clone(), ladder(rung)))
        })
        .collect()
}

/// `K_M(σ) ≤ K^A(σ) + f̂(σ) + shift` for every living description of every
/// settled target, i.e. for every living path `A`. Meaningful only on
/// quiescent runs; others get a note and no check line.
pub fn verify_main_inequality(result: &RunResult, e: usize, code: &PrefixCode) -> Report {
    let mut r = Report::new();
    if !result.quiescent[e] {
        r.note(format!("main_inequality.e{e} skipped: run not quiescent"));
        return r;
    }
    let state = &result.state;
    let shift = code.shift() as i128;
    let mut margin = i128::MAX;
    let mut checked = 0usize;
    for (sigma, c) in checked_targets(result, e) {
        let km = machine_complexity(code, &sigma);
        for d in state.enumeration.table().descriptions(&sigma) {
            let Some(eta) = state.tree.eta(&d.key) else {
                continue;
            };
            if !state.guess_allows(e, &eta) {
                continue;
            }
            checked += 1;
            let rhs = d.program.len() as i128 + c as i128 + shift;
            match km {
                Some(k) => {
                    let slack = rhs - k as i128;
                    if slack < 0 {
                        r.note(format!(
                            "main_inequality.e{e} violated at sigma={} key={} program={}",
                            sigma, d.key, d.program
                        ));
                    }
                    margin = margin.min(slack);
                }
                None => {
                    r.note(format!("main_inequality.e{e} no codeword for sigma={sigma}"));
                    margin = margin.min(-1);
                }
            }
        }
    }
    if checked == 0 {
        margin = 0;
    }
    r.int_bound(format!("main_inequality.e{e}"), 0, margin);
    r
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("need {needed} branching levels, the tree has {available}")]
    InsufficientDepth { needed: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodingJoin {
    pub path_b: BitString,
    pub path_c: BitString,
    pub reconstruction: BitString,
}

/// Two living paths that split at every coding location: `path_b` follows
/// `target`, `path_c` its complement. The target is read back from `path_b`
/// wherever the two differ. Exact on trees with one level per depth.
pub fn coding_join(result: &RunResult, target: &BitString) -> Result<CodingJoin, CodingError> {
    let tree = &result.state.tree;
    let complement = BitString::from_bits(target.bits().iter().map(|b| !b).collect());
    let reach = |eta: &BitString| {
        (0..=eta.len())
            .take_while(|&k| {
                tree.node_for_eta(&eta.prefix(k)).is_some()
                    && (k == eta.len() || tree.level(&tree.sharing().family_of(&eta.prefix(k))).is_some())
            })
            .last()
            .unwrap_or(0)
    };
    let available = reach(target).min(reach(&complement));
    if available < target.len() {
        return Err(CodingError::InsufficientDepth {
            needed: target.len(),
            available,
        });
    }
    let leaf = |eta: &BitString| {
        let node = tree.node_for_eta(eta).expect("reached");
        tree.leftmost_leaf_from(&node).expect("living")
    };
    let path_b = leaf(target);
    let path_c = leaf(&complement);
    let reconstruction = BitString::from_bits(
        path_b
            .bits()
            .iter()
            .zip(path_c.bits())
            .filter(|(b, c)| b != c)
            .map(|(b, _)| *b)
            .collect(),
    );
    Ok(CodingJoin {
        path_b,
        path_c,
        reconstruction,
    })
}

/// Injective pairing `1^|σ| 0 σ τ`.
pub fn pair_strings(sigma: &BitString, tau: &BitString) -> BitString {
    let mut out = BitString::from_bits(vec![true; sigma.len()]);
    out.push(false);
    out.concat(sigma).concat(tau)
}

/// The first `count` pairs of indices in Cantor order.
pub fn cantor_pairs(count: usize) -> impl Iterator<Item = (u64, u64)> {
    (0u64..)
        .flat_map(|d| (0..=d).map(move |i| (i, d - i)))
        .take(count)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InformationWitness {
    pub sum: DyadicMass,
    pub terms: usize,
    pub cutoff: usize,
}

/// Partial sum of `2^(K(σ) − K^A(σ) + K(τ) − K^B(τ) − K(σ,τ))` over the first
/// `cutoff` pairs of strings, skipping terms with an undefined value. A
/// lower-bound witness at this scale, not a verdict on finiteness.
pub fn self_information_partial(
    table: &ComplexityTable,
    a: &BitString,
    b: &BitString,
    cutoff: usize,
) -> InformationWitness {
    let empty = BitString::new();
    let mut sum = DyadicMass::zero();
    let mut terms = 0;
    for (i, j) in cantor_pairs(cutoff) {
        let sigma = BitString::from_length_lex_index(i);
        let tau = BitString::from_length_lex_index(j);
        let parts = (
            k_of(table, &empty, &sigma),
            k_of(table, a, &sigma),
            k_of(table, &empty, &tau),
            k_of(table, b, &tau),
            k_of(table, &empty, &pair_strings(&sigma, &tau)),
        );
        if let (Some(ks), Some(ka), Some(kt), Some(kb), Some(kp)) = parts {
            let x = ks as i64 - ka as i64 + kt as i64 - kb as i64 - kp as i64;
            sum += &DyadicMass::pow2(x);
            terms += 1;
        }
    }
    InformationWitness { sum, terms, cutoff }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionSample {
    pub sequence: BitString,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionRow {
    pub n: usize,
    /// `min(K_∅, K_M)` as the unrelativized complexity.
    pub k: u64,
    pub k_a: u64,
    pub f: u64,
    /// `⌊log₂ n⌋ / n` as an unreduced fraction.
    pub log_term: (u64, u64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimensionError {
    #[error("sample {index} (n = {n}) unresolved: {reason}")]
    SampleUnresolved { index: usize, n: usize, reason: String },
    #[error("run is not quiescent")]
    NotQuiescent,
}

/// Check `K(S↾n) − f(S↾n) ≤ K^A(S↾n) + shift` and `K^A(S↾n) ≤ K(S↾n) + c_right`
/// at each sample, with `A` the given living path.
pub fn dimension_check(
    result: &RunResult,
    code: &PrefixCode,
    path: &BitString,
    c_right: u64,
    samples: &[DimensionSample],
) -> Result<(Report, Vec<DimensionRow>), DimensionError> {
    if !result.quiescent.first().copied().unwrap_or(false) {
        return Err(DimensionError::NotQuiescent);
    }
    let table = result.state.enumeration.table();
    let empty = BitString::new();
    let mut report = Report::new();
    let mut rows = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let x = s.sequence.prefix(s.n);
        let unresolved = |reason: &str| DimensionError::SampleUnresolved {
            index,
            n: s.n,
            reason: reason.to_string(),
        };
        if !result.settled[0].contains(&x) {
            return Err(unresolved("f̂ not stabilized"));
        }
        let k_plain = k_of(table, &empty, &x);
        let k_machine = machine_complexity(code, &x);
        let k = match (k_plain, k_machine) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(unresolved("K undefined")),
        };
        let k_a = k_of(table, path, &x).ok_or_else(|| unresolved("K^A undefined"))?;
        let f = floor_log2(s.n as u64);
        report.int_bound(
            format!("dimension.{index}.left"),
            k as i128 - f as i128,
            k_a as i128 + code.shift() as i128,
        );
        report.int_bound(format!("dimension.{index}.right"), k_a as i128, (k + c_right) as i128);
        rows.push(DimensionRow {
            n: s.n,
            k,
            k_a,
            f,
            log_term: (floor_log2(s.n as u64), s.n as u64),
        });
    }
    Ok((report, rows))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `p/q` in lowest terms.
pub fn format_fraction((p, q): (u64, u64)) -> String {
    let g = gcd(p, q).max(1);
    format!("{}/{}", p / g, q / g)
}

/// Levels checked by [`verify_branching_counts`].
pub const COUNTED_LEVELS: usize = 64;

/// Each of the first [`COUNTED_LEVELS`] set single-mode levels `n_j` carries
/// `2^j` living nodes.
pub fn verify_branching_counts(result: &RunResult) -> Report {
    let mut r = Report::new();
    if result.mode != Mode::Single {
        return r;
    }
    let tree = &result.state.tree;
    let levels = tree.uniform_levels();
    let bad = levels
        .iter()
        .enumerate()
        .take(COUNTED_LEVELS)
        .filter(|(j, &n)| tree.count_living_at(n) != num_bigint::BigUint::from(1u32) << *j)
        .count();
    r.int_bound("tree.branching_counts", bad as i128, 0);
    r
}

/// Families of the final tree with their injury counts, for the report.
pub fn injury_table(result: &RunResult) -> Vec<(FamilyKey, u64)> {
    result
        .state
        .injury_counts
        .iter()
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

/// The full suite for a run: mass bounds, main inequality and codes per
/// function, injury charges, ladder checks and tree shape.
pub fn analyze(result: &RunResult, shift: u64) -> (Report, Vec<Option<PrefixCode>>) {
    let mut r = Report::new();
    let mut codes = Vec::new();
    for e in 0..result.state.requests.len() {
        let d = decompose_mass(result, e);
        r.extend(verify_mass_bounds(&d));
        match build_prefix_code(&result.state.requests[e], shift) {
            Ok(code) => {
                r.extend(verify_main_inequality(result, e, &code));
                codes.push(Some(code));
            }
            Err(err) => {
                r.fail(format!("prefix_code.e{e}"));
                r.note(format!("prefix_code.e{e}: {err}"));
                codes.push(None);
            }
        }
    }
    r.extend(verify_injury_charge(result));
    r.extend(verify_ladder_inequality(20, 20).report);
    r.extend(verify_branching_counts(result));
    (r, codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;
    use crate::function::FunctionSpec;
    use crate::oracle::{DescriptionEvent, EnumerationState};
    use crate::single::run_construction;

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
    fn empty_run_is_all_zero() {
        let f = FunctionSpec::length(1, 0);
        let r = run_construction(&f, &[], 40).unwrap();
        let d = decompose_mass(&r, 0);
        assert!(d.lambda.is_zero() && d.delta.is_zero() && d.delta_prime.is_zero());
        let rep = verify_mass_bounds(&d);
        assert!(rep.all_pass());
        let m = &rep.check("mass.delta_prime.e0").unwrap().margin;
        assert_eq!(m.value, DyadicMass::from_integer(2));
        assert!(verify_injury_charge(&r).checks.is_empty());
    }

    #[test]
    fn single_pair_on_final_tree() {
        let f = FunctionSpec::constant(16);
        let r = run_construction(&f, &[ev(1, "", "101", "", 0)], 20).unwrap();
        let d = decompose_mass(&r, 0);
        assert_eq!(d.delta_prime, DyadicMass::pow2_neg(18));
        assert!(d.delta_double_prime.is_zero());
        assert_eq!(d.lambda, DyadicMass::pow2_neg(19));
    }

    #[test]
    fn killed_pair_moves_to_double_prime() {
        // |σ| = 1 gives f = 4 (rung 1); the empty string gives rung 0.
        let f = FunctionSpec::length(4, 0);
        let events = [ev(3, "0000", "0101", "0", 4), ev(4, "0001", "11", "", 4)];
        let r = run_construction(&f, &events, 30).unwrap();
        assert_eq!(r.injury_count(), 1);
        assert_eq!(r.injuries[0].leaf, bs("0001"));
        let d = decompose_mass(&r, 0);
        let killed = d.pairs.iter().find(|p| p.key == bs("0000")).unwrap();
        assert!(!killed.living);
        assert_eq!(d.delta_double_prime, killed.mass);
        assert_eq!(killed.mass, DyadicMass::pow2_neg(4 + 4).shl(1));
        assert!(verify_injury_charge(&r).all_pass());
    }

    #[test]
    fn injury_bound_example() {
        assert_eq!(injury_bound(&DyadicMass::pow2_neg(2), 1), DyadicMass::pow2_neg(7));
    }

    #[test]
    fn ladder_checks() {
        let l = verify_ladder_inequality(20, 20);
        assert!(l.step_failures.is_empty() && l.closure_failures.is_empty());
        assert!(l.report.all_pass());
        // i = 0, l = 1 is tight.
        assert_eq!(l.report.check("ladder.step").unwrap().margin, Margin::integer(0));
        assert_eq!(ladder(2), 16);
        assert!(ladder(2) >= 4 + 1 + 2 + 2);
    }

    #[test]
    fn coding_join_examples() {
        let f = FunctionSpec::length(1, 0);
        let r = run_construction(&f, &[], 40).unwrap();
        let j = coding_join(&r, &bs("")).unwrap();
        assert_eq!(j.path_b, j.path_c);
        assert!(j.reconstruction.is_empty());
        let j = coding_join(&r, &bs("1011")).unwrap();
        assert_eq!(j.reconstruction, bs("1011"));
        assert_eq!(
            coding_join(&r, &BitString::zeros(30)),
            Err(CodingError::InsufficientDepth { needed: 30, available: 19 })
        );
    }

    #[test]
    fn information_fixture() {
        let mut st = EnumerationState::new();
        for e in [
            ev(1, "", "000", "", 0),
            ev(1, "", "01", "1", 0),
            ev(1, "", "100", "0", 0),
            ev(1, "", "101", "01", 0),
            ev(1, "", "001", "101", 0),
            ev(1, "1", "11", "", 1),
        ] {
            st.admit(e).unwrap();
        }
        assert!(self_information_partial(EnumerationState::new().table(), &bs(""), &bs(""), 50)
            .sum
            .is_zero());
        // Defined terms among the first ten pairs, with A = B = "1":
        //   ("","")  → "0":   3 − 2 + 3 − 2 − 3 = −1
        //   ("","1") → "01":  3 − 2 + 2 − 2 − 3 = −2
        //   ("1","") → "101": 2 − 2 + 3 − 2 − 3 = −2
        let w = self_information_partial(st.table(), &bs("1"), &bs("1"), 10);
        assert_eq!(w.terms, 3);
        assert_eq!(w.sum, DyadicMass::one());
        let plain = self_information_partial(st.table(), &bs(""), &bs(""), 100);
        assert!(plain.sum <= DyadicMass::one());
    }

    #[test]
    fn dimension_single_event() {
        let f = FunctionSpec::floor_log2();
        let events = [ev(1, "", "1010", "11", 0)];
        let r = run_construction(&f, &events, 20).unwrap();
        let code = build_prefix_code(&r.state.requests[0], 2).unwrap();
        let leaf = r.state.tree.leftmost_leaf_from(&bs("")).unwrap();
        let s = [DimensionSample { sequence: bs("110"), n: 2 }];
        let (rep, rows) = dimension_check(&r, &code, &leaf, 0, &s).unwrap();
        assert!(rep.all_pass());
        assert_eq!(rows[0].k, rows[0].k_a);
        assert_eq!(rep.check("dimension.0.right").unwrap().margin, Margin::integer(0));
        assert_eq!(format_fraction(rows[0].log_term), "1/2");
    }

    #[test]
    fn corrupted_ledger_violates() {
        let f = FunctionSpec::constant(0);
        let r = run_construction(&f, &[ev(1, "", "1", "", 0)], 10).unwrap();
        let mut d = decompose_mass(&r, 0);
        d.delta_prime = DyadicMass::from_integer(3);
        let rep = verify_mass_bounds(&d);
        assert!(!rep.all_pass());
        assert!(rep.into_result().is_err());
    }

    #[test]
    fn report_lines() {
        let mut r = Report::new();
        r.bound("a", &DyadicMass::pow2_neg(1), &DyadicMass::one());
        r.bound("b", &DyadicMass::from_integer(3), &DyadicMass::from_integer(2));
        assert_eq!(r.to_string(), "check a PASS margin=1/2^1\ncheck b FAIL margin=-1/2^0\n");
    }
}
