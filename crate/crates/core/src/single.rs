//! The single-function engine: requirements `S_0, R_0, S_1, R_1, …`, and at
//! each stage only the highest-priority requirement that requires attention
//! acts.

use crate::construction::{Action, ActionKind, Construction, EngineError, Mode, ReqId, RunResult, StageRecord, State};
use crate::function::ApproximatedFunction;
use crate::oracle::DescriptionEvent;
use crate::tree::FamilyKey;

/// Requirement at 0-based priority position `index`.
pub fn requirement_at(index: usize) -> ReqId {
    if index % 2 == 0 {
        ReqId::S { e: 0, i: index / 2 }
    } else {
        ReqId::R { i: index / 2 }
    }
}

pub fn order(count: usize) -> Vec<ReqId> {
    (0..count).map(requirement_at).collect()
}

pub fn uniform_family(i: usize) -> FamilyKey {
    FamilyKey {
        level: i,
        pattern: Default::default(),
    }
}

/// `R_i` requires attention iff `n_i` is unset.
pub fn requires_attention_r(state: &State, i: usize) -> bool {
    state.tree.uniform_level(i).is_none()
}

/// One stage: Substage 1, then the single highest-priority action among the
/// first `stage` requirements.
pub fn stage_step(c: &mut Construction<'_>) -> Result<StageRecord, EngineError> {
    let mut record = c.begin_stage()?;
    let eligible = record.stage as usize;
    let attention = c.state.attention_by_rung(0);
    let s_choice = attention.into_iter().next().map(|(i, w)| (2 * i, w));
    let r_index = c.state.tree.uniform_levels().len();
    let r_pos = 2 * r_index + 1;
    let action = match s_choice {
        Some((pos, w)) if pos < eligible && pos < r_pos => {
            let req = ReqId::S { e: 0, i: w.rung };
            Some(Action {
                req,
                kind: c.state.act_on(w)?,
            })
        }
        _ if r_pos < eligible => {
            let family = uniform_family(r_index);
            let level = c.state.branch(&family)?;
            Some(Action {
                req: ReqId::R { i: r_index },
                kind: ActionKind::Branch { family, level },
            })
        }
        _ => None,
    };
    record.actions.extend(action);
    c.finish_stage(record.clone())?;
    Ok(record)
}

/// Run stages `1..=horizon`, calling `observe` after each stage.
pub fn run_with_observer(
    f: &dyn ApproximatedFunction,
    events: &[DescriptionEvent],
    horizon: u64,
    mut observe: impl FnMut(&State, &StageRecord),
) -> Result<RunResult, EngineError> {
    let mut c = Construction::new(Mode::Single, vec![f], events);
    for _ in 0..horizon {
        let rec = stage_step(&mut c)?;
        observe(&c.state, &rec);
    }
    Ok(RunResult::from_construction(c, horizon))
}

pub fn run_construction(
    f: &dyn ApproximatedFunction,
    events: &[DescriptionEvent],
    horizon: u64,
) -> Result<RunResult, EngineError> {
    run_with_observer(f, events, horizon, |_, _| {})
}
