//! Task approach: declarative success functions evaluated over processes,
//! and a background scan that turns closed trigger/goal pairs into
//! reinforcement events.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::OntoKind;
use crate::store::{eval_conjunction, Literal, ObjectRecord, Store, Timestamp, Truth};
use crate::tfs::{EventSource, ExpectationStatus, Outcome, ReinforcementEvent};

/// Matches records of an optional type whose literals all hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordPattern {
    #[serde(default)]
    pub type_id: Option<String>,
    #[serde(default)]
    pub literals: Vec<Literal>,
}

impl RecordPattern {
    pub fn matches(&self, record: &ObjectRecord) -> bool {
        self.type_id.as_ref().is_none_or(|t| *t == record.type_id)
            && eval_conjunction(&record.assignments, &self.literals) == Truth::True
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardMap {
    #[serde(default = "one")]
    pub achieved: f64,
    #[serde(default)]
    pub missed: f64,
}

impl Default for RewardMap {
    fn default() -> Self {
        RewardMap {
            achieved: 1.0,
            missed: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessFunctionDef {
    pub name: String,
    /// Process type the function is evaluated over.
    pub scope_type: String,
    pub trigger: RecordPattern,
    pub goal: RecordPattern,
    /// Goal must occur in `(trigger time, trigger time + window]`.
    pub window: Timestamp,
    #[serde(default)]
    pub reward_map: RewardMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerOutcome {
    pub action_id: String,
    pub time: Timestamp,
    pub goal_id: Option<String>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub process_id: String,
    pub function: String,
    pub outcomes: Vec<TriggerOutcome>,
    /// Mean reward; `None` when the process has no trigger ("no evidence").
    pub aggregate: Option<f64>,
}

impl fmt::Display for SuccessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} over {}", self.function, self.process_id)?;
        for o in &self.outcomes {
            let goal = o.goal_id.as_deref().unwrap_or("-");
            writeln!(f, "  {} @{} goal {} reward {:.3}", o.action_id, o.time, goal, o.reward)?;
        }
        match self.aggregate {
            Some(a) => writeln!(f, "aggregate {a:.4}"),
            None => writeln!(f, "aggregate: no evidence"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskdError {
    #[error("unknown process {0:?}")]
    UnknownProcess(String),
    #[error("{id:?} has type {actual:?}, expected {expected:?}")]
    TypeMismatch { id: String, expected: String, actual: String },
    #[error("unknown success function {0:?}")]
    UnknownFunction(String),
}

const MAX_DEPTH: usize = 64;

/// True when `record` sits (transitively) inside process `pid`.
fn within(store: &Store, record: &ObjectRecord, pid: &str) -> bool {
    let mut cur = record.parent_process.as_deref();
    for _ in 0..MAX_DEPTH {
        match cur {
            None => return false,
            Some(p) if p == pid => return true,
            Some(p) => cur = store.object(p).and_then(|r| r.parent_process.as_deref()),
        }
    }
    false
}

/// True when some ancestor process of `record` has type `scope`.
fn in_scope(store: &Store, record: &ObjectRecord, scope: &str) -> bool {
    let mut cur = record.parent_process.as_deref().and_then(|p| store.object(p));
    for _ in 0..MAX_DEPTH {
        match cur {
            None => return false,
            Some(p) if p.type_id == scope => return true,
            Some(p) => cur = p.parent_process.as_deref().and_then(|q| store.object(q)),
        }
    }
    false
}

/// First goal match for a trigger, searched among the trigger's siblings.
fn find_goal<'a>(store: &'a Store, f: &SuccessFunctionDef, trigger: &ObjectRecord, t: Timestamp) -> Option<&'a ObjectRecord> {
    store
        .objects()
        .filter(|r| r.id != trigger.id && r.parent_process == trigger.parent_process)
        .filter(|r| r.time_start.is_some_and(|g| g > t && g <= t + f.window))
        .filter(|r| f.goal.matches(r))
        .min_by(|x, y| x.time_start.cmp(&y.time_start).then_with(|| x.id.cmp(&y.id)))
}

fn triggers<'a>(store: &'a Store, f: &'a SuccessFunctionDef, pid: &'a str) -> impl Iterator<Item = (&'a ObjectRecord, Timestamp)> {
    store
        .objects()
        .filter(move |r| f.trigger.matches(r) && within(store, r, pid))
        .filter_map(|r| r.time_start.map(|t| (r, t)))
}

pub fn evaluate(f: &SuccessFunctionDef, process_id: &str, store: &Store) -> Result<SuccessReport, TaskdError> {
    let process = store
        .object(process_id)
        .ok_or_else(|| TaskdError::UnknownProcess(process_id.to_string()))?;
    if process.type_id != f.scope_type {
        return Err(TaskdError::TypeMismatch {
            id: process_id.to_string(),
            expected: f.scope_type.clone(),
            actual: process.type_id.clone(),
        });
    }
    let mut outcomes: Vec<TriggerOutcome> = triggers(store, f, process_id)
        .map(|(r, t)| {
            let goal = find_goal(store, f, r, t);
            TriggerOutcome {
                action_id: r.id.clone(),
                time: t,
                goal_id: goal.map(|g| g.id.clone()),
                reward: if goal.is_some() {
                    f.reward_map.achieved
                } else {
                    f.reward_map.missed
                },
            }
        })
        .collect();
    outcomes.sort_by(|x, y| x.time.cmp(&y.time).then_with(|| x.action_id.cmp(&y.action_id)));
    let aggregate =
        (!outcomes.is_empty()).then(|| outcomes.iter().map(|o| o.reward).sum::<f64>() / outcomes.len() as f64);
    Ok(SuccessReport {
        process_id: process_id.to_string(),
        function: f.name.clone(),
        outcomes,
        aggregate,
    })
}

/// Closes every trigger whose goal has appeared or whose window has passed,
/// logging one success-function event per closed pair. Pairs already in the
/// event log are skipped, so rescanning emits nothing new.
///
/// Achieved pairs are positive with weight `achieved`; missed pairs negative
/// with weight `1 − missed`.
pub fn scan(store: &mut Store, since: u64, fns: &[SuccessFunctionDef]) -> Vec<ReinforcementEvent> {
    let changed = store.objects().any(|r| store.object_revision(&r.id).is_some_and(|v| v > since));
    if !changed {
        return Vec::new();
    }
    let now = store.clock().unwrap_or(Timestamp::MIN);
    let settled: BTreeSet<(String, String)> = store
        .events()
        .filter_map(|e| Some((e.function.clone()?, e.action_id.clone()?)))
        .collect();

    let mut closed: Vec<(String, String, bool)> = Vec::new();
    for f in fns {
        for r in store.objects() {
            if !f.trigger.matches(r) || settled.contains(&(f.name.clone(), r.id.clone())) {
                continue;
            }
            let Some(t) = r.time_start else { continue };
            if !in_scope(store, r, &f.scope_type) {
                continue;
            }
            let achieved = find_goal(store, f, r, t).is_some();
            if achieved || now > t + f.window {
                closed.push((f.name.clone(), r.id.clone(), achieved));
            }
        }
    }

    let mut out = Vec::new();
    for (name, action_id, achieved) in closed {
        let f = fns.iter().find(|f| f.name == name).expect("name from fns");
        let expectation_id = store
            .expectations()
            .find(|e| e.action_id == action_id && e.status == ExpectationStatus::Open)
            .map(|e| e.id.clone());
        let (outcome, weight) = if achieved {
            (Outcome::Positive, f.reward_map.achieved)
        } else {
            (Outcome::Negative, 1.0 - f.reward_map.missed)
        };
        let event = ReinforcementEvent {
            id: store.next_event_id(),
            expectation_id,
            action_id: Some(action_id),
            function: Some(name),
            outcome,
            weight,
            source: EventSource::SuccessFunction,
        };
        store.push_event(event.clone());
        out.push(event);
    }
    out
}

/// All processes of the function's scope type.
pub fn processes<'a>(store: &'a Store, f: &'a SuccessFunctionDef) -> impl Iterator<Item = &'a ObjectRecord> {
    store.objects().filter(move |r| {
        r.type_id == f.scope_type
            && store
                .schema()
                .object_type(&r.type_id)
                .is_some_and(|t| t.onto_kind == OntoKind::Process)
    })
}
