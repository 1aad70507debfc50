//! Acceptor of action results: expectations registered when an action is
//! issued, adjudication against later observations, and conversion of the
//! verdict into reinforcement pseudo-counts on the supporting rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpi::{probability, MiningConfig, Prediction};
use crate::store::{eval_literal, Literal, ObjectRecord, RuleStatus, Store, StoreError, Timestamp, Truth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationStatus {
    Open,
    Achieved,
    Failed,
    Expired,
}

impl ExpectationStatus {
    pub fn is_terminal(self) -> bool {
        self != ExpectationStatus::Open
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub id: String,
    pub action_id: String,
    /// Process the action belongs to; observations outside it are ignored.
    #[serde(default)]
    pub process_id: Option<String>,
    pub expected: Literal,
    pub probability_at_issue: f64,
    pub supporting_rules: Vec<String>,
    pub issued_at: Timestamp,
    pub deadline: Timestamp,
    pub status: ExpectationStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Acceptor,
    SuccessFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReinforcementEvent {
    pub id: String,
    #[serde(default)]
    pub expectation_id: Option<String>,
    /// Action whose result the event adjudicates.
    #[serde(default)]
    pub action_id: Option<String>,
    /// Success function that produced the event, if any.
    #[serde(default)]
    pub function: Option<String>,
    pub outcome: Outcome,
    pub weight: f64,
    pub source: EventSource,
}

#[derive(Debug, Error)]
pub enum TfsError {
    #[error("prediction has no supporting rules")]
    NoSupportingRules,
    #[error("deadline {deadline} is not after action time {action_time}")]
    InvalidDeadline { deadline: Timestamp, action_time: Timestamp },
    #[error("expectation {0:?} is already closed")]
    AlreadyClosed(String),
    #[error("unknown expectation {0:?}")]
    UnknownExpectation(String),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("event weight {0} is not finite and non-negative")]
    BadWeight(f64),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Registers the expected result of `action_id`. The action record must be
/// in the store; its start time is the issue time.
pub fn open_expectation(
    store: &mut Store,
    action_id: &str,
    prediction: &Prediction,
    deadline: Timestamp,
) -> Result<Expectation, TfsError> {
    if prediction.supporting_rules.is_empty() {
        return Err(TfsError::NoSupportingRules);
    }
    let action = store
        .object(action_id)
        .ok_or_else(|| TfsError::UnknownAction(action_id.to_string()))?;
    let issued_at = action.time_start.unwrap_or_default();
    if deadline <= issued_at {
        return Err(TfsError::InvalidDeadline {
            deadline,
            action_time: issued_at,
        });
    }
    let exp = Expectation {
        id: store.next_expectation_id(),
        action_id: action_id.to_string(),
        process_id: action.parent_process.clone(),
        expected: prediction.target.clone(),
        probability_at_issue: prediction.probability,
        supporting_rules: prediction.supporting_rules.clone(),
        issued_at,
        deadline,
        status: ExpectationStatus::Open,
    };
    store.put_expectation(exp.clone());
    Ok(exp)
}

/// Verdict of an observation on an open expectation, `None` if undecided.
pub fn adjudicate(exp: &Expectation, observed: Option<&ObjectRecord>, now: Timestamp) -> Option<ExpectationStatus> {
    let relevant = observed.filter(|o| {
        let in_context = match &exp.process_id {
            None => true,
            Some(p) => o.parent_process.as_deref() == Some(p) || o.id == *p,
        };
        let in_time = o.time_start.is_none_or(|t| t <= exp.deadline);
        in_context && in_time
    });
    match relevant.map(|o| eval_literal(o, &exp.expected)) {
        Some(Truth::True) => Some(ExpectationStatus::Achieved),
        Some(Truth::False) => Some(ExpectationStatus::Failed),
        _ if now >= exp.deadline => Some(ExpectationStatus::Expired),
        _ => None,
    }
}

/// Closes expectation `exp_id` if `observed` (or the clock) decides it, and
/// appends the matching acceptor event. Expiry counts as negative.
pub fn match_outcome(
    store: &mut Store,
    exp_id: &str,
    observed: Option<&ObjectRecord>,
    now: Timestamp,
) -> Result<Option<ReinforcementEvent>, TfsError> {
    let exp = store
        .expectation(exp_id)
        .ok_or_else(|| TfsError::UnknownExpectation(exp_id.to_string()))?;
    if exp.status.is_terminal() {
        return Err(TfsError::AlreadyClosed(exp_id.to_string()));
    }
    let Some(status) = adjudicate(exp, observed, now) else {
        return Ok(None);
    };
    let mut closed = exp.clone();
    closed.status = status;
    let event = ReinforcementEvent {
        id: store.next_event_id(),
        expectation_id: Some(closed.id.clone()),
        action_id: Some(closed.action_id.clone()),
        function: None,
        outcome: if status == ExpectationStatus::Achieved {
            Outcome::Positive
        } else {
            Outcome::Negative
        },
        weight: 1.0,
        source: EventSource::Acceptor,
    };
    store.put_expectation(closed);
    store.push_event(event.clone());
    Ok(Some(event))
}

/// Adds the event's weight to the pseudo-counts of the linked expectation's
/// supporting rules and returns the ids touched. Retired or missing rules
/// are skipped; data counts and p-values are never changed.
pub fn reinforce(store: &mut Store, event: &ReinforcementEvent, cfg: &MiningConfig) -> Result<Vec<String>, TfsError> {
    if !(event.weight.is_finite() && event.weight >= 0.0) {
        return Err(TfsError::BadWeight(event.weight));
    }
    let Some(exp_id) = &event.expectation_id else {
        return Ok(Vec::new());
    };
    let exp = store
        .expectation(exp_id)
        .ok_or_else(|| TfsError::UnknownExpectation(exp_id.clone()))?;
    let mut touched = Vec::new();
    for id in exp.supporting_rules.clone() {
        let Some(rule) = store.rule(&id) else { continue };
        if rule.status == RuleStatus::Retired {
            continue;
        }
        let mut rule = rule.clone();
        match event.outcome {
            Outcome::Positive => rule.r_pos += event.weight,
            Outcome::Negative => rule.r_neg += event.weight,
        }
        let evidence = rule.a as f64 + rule.r_pos + rule.r_neg;
        if probability(&rule) <= 0.5 && evidence >= cfg.min_support_a as f64 {
            rule.status = RuleStatus::Retired;
        }
        store.put_rule(rule);
        touched.push(id);
    }
    Ok(touched)
}

/// Applies an already-logged event: closes its linked expectation if still
/// open (achieved on positive, failed on negative), then reinforces.
pub fn settle(store: &mut Store, event: &ReinforcementEvent, cfg: &MiningConfig) -> Result<Vec<String>, TfsError> {
    if let Some(exp_id) = &event.expectation_id {
        let exp = store
            .expectation(exp_id)
            .ok_or_else(|| TfsError::UnknownExpectation(exp_id.clone()))?;
        if exp.status == ExpectationStatus::Open {
            let mut closed = exp.clone();
            closed.status = match event.outcome {
                Outcome::Positive => ExpectationStatus::Achieved,
                Outcome::Negative => ExpectationStatus::Failed,
            };
            store.put_expectation(closed);
        }
    }
    reinforce(store, event, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{ObjectTypeDef, OntoKind, Schema};
    use crate::store::{Contingency, Provenance, Rule};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn schema() -> Arc<Schema> {
        let c = |id: &str, codes: &[&str]| crate::ontology::ClassifierDef {
            id: id.into(),
            name: id.into(),
            kind: crate::ontology::ClassifierKind::Categorical,
            domain: codes
                .iter()
                .map(|c| crate::ontology::CategoryDef {
                    code: c.to_string(),
                    label: c.to_string(),
                })
                .collect(),
            missing_tokens: vec![String::new()],
            bin_thresholds: None,
            aliases: vec![],
        };
        let ty = |id: &str, kind: OntoKind, attrs: &[&str]| ObjectTypeDef {
            id: id.into(),
            name: id.into(),
            onto_kind: kind,
            attribute_ids: attrs.iter().map(|s| s.to_string()).collect(),
            relation_slots: vec![],
            parent_process_type: None,
        };
        Arc::new(
            Schema::new(
                vec![c("segment", &["a", "b"]), c("subscription", &["yes", "no"])],
                vec![
                    ty("interaction", OntoKind::Process, &["segment", "subscription"]),
                    ty("offer", OntoKind::Action, &[]),
                    ty("response", OntoKind::State, &["subscription"]),
                ],
                vec![],
            )
            .unwrap(),
        )
    }

    fn setup(a: u64, b: u64) -> (Store, Prediction) {
        let mut store = Store::new(schema());
        store.insert(ObjectRecord::new("i1", "interaction").at(0)).unwrap();
        store.insert(ObjectRecord::new("act1", "offer").at(1).in_process("i1")).unwrap();
        let rule = Rule::new(
            vec![Literal::pos("segment", "a")],
            Literal::pos("subscription", "yes"),
            RuleStatus::Confirmed,
            Provenance::Data,
        )
        .with_counts(Contingency { a, b, c: 0, d: 0 });
        let pred = Prediction {
            target: rule.conclusion.clone(),
            probability: probability(&rule),
            p_value: 0.01,
            score: probability(&rule),
            supporting_rules: vec![rule.id.clone()],
        };
        store.put_rule(rule);
        (store, pred)
    }

    fn response(id: &str, answer: &str, t: i64) -> ObjectRecord {
        ObjectRecord::new(id, "response").with("subscription", answer).at(t).in_process("i1")
    }

    #[test]
    fn open_and_validation() {
        let (mut store, pred) = setup(8, 2);
        let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
        assert_eq!(e.status, ExpectationStatus::Open);
        assert_eq!(e.process_id.as_deref(), Some("i1"));
        assert_eq!(store.expectation(&e.id), Some(&e));
        let mut empty = pred.clone();
        empty.supporting_rules.clear();
        assert!(matches!(open_expectation(&mut store, "act1", &empty, 10), Err(TfsError::NoSupportingRules)));
        assert!(matches!(
            open_expectation(&mut store, "act1", &pred, 0),
            Err(TfsError::InvalidDeadline { .. })
        ));
    }

    #[test]
    fn achieved_failed_expired() {
        let cfg = MiningConfig::default();
        for (obs, now, want, outcome) in [
            (Some(response("r", "yes", 3)), 3, ExpectationStatus::Achieved, Outcome::Positive),
            (Some(response("r", "no", 3)), 3, ExpectationStatus::Failed, Outcome::Negative),
            (None, 10, ExpectationStatus::Expired, Outcome::Negative),
            // Late observation does not count.
            (Some(response("r", "yes", 11)), 11, ExpectationStatus::Expired, Outcome::Negative),
        ] {
            let (mut store, pred) = setup(9, 1);
            let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
            let ev = match_outcome(&mut store, &e.id, obs.as_ref(), now).unwrap().unwrap();
            assert_eq!(ev.outcome, outcome);
            assert_eq!(ev.source, EventSource::Acceptor);
            assert_eq!(store.expectation(&e.id).unwrap().status, want);
            assert!(matches!(
                match_outcome(&mut store, &e.id, None, now),
                Err(TfsError::AlreadyClosed(_))
            ));
            let touched = reinforce(&mut store, &ev, &cfg).unwrap();
            assert_eq!(touched.len(), 1);
        }
    }

    #[test]
    fn undecided_stays_open() {
        let (mut store, pred) = setup(9, 1);
        let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
        let other = ObjectRecord::new("x", "response").at(2);
        assert_eq!(match_outcome(&mut store, &e.id, Some(&other), 2).unwrap(), None);
        assert_eq!(store.event_count(), 0);
    }

    #[test]
    fn reinforcement_arithmetic() {
        let cfg = MiningConfig::default();
        for (outcome, want) in [(Outcome::Positive, 11.0 / 13.0), (Outcome::Negative, 10.0 / 13.0)] {
            let (mut store, pred) = setup(9, 1);
            let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
            let ev = ReinforcementEvent {
                id: store.next_event_id(),
                expectation_id: Some(e.id.clone()),
                action_id: Some("act1".into()),
                function: None,
                outcome,
                weight: 1.0,
                source: EventSource::Acceptor,
            };
            let before = store.rule(&pred.supporting_rules[0]).unwrap().clone();
            reinforce(&mut store, &ev, &cfg).unwrap();
            let after = store.rule(&pred.supporting_rules[0]).unwrap();
            assert!((probability(after) - want).abs() < 1e-12);
            assert_eq!(after.counts(), before.counts());
            assert_eq!(after.p_value, before.p_value);
        }
    }

    #[test]
    fn retired_rules_skipped_and_retirement() {
        let cfg = MiningConfig::default();
        let (mut store, pred) = setup(3, 2);
        let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
        let ev = |store: &Store, w: f64| ReinforcementEvent {
            id: store.next_event_id(),
            expectation_id: Some(e.id.clone()),
            action_id: None,
            function: None,
            outcome: Outcome::Negative,
            weight: w,
            source: EventSource::SuccessFunction,
        };
        let first = ev(&store, 3.0);
        assert_eq!(reinforce(&mut store, &first, &cfg).unwrap().len(), 1);
        // (3+1)/(3+2+3+2) = 0.4 with 3+3 ≥ 5 evidence.
        assert_eq!(store.rule(&pred.supporting_rules[0]).unwrap().status, RuleStatus::Retired);
        let second = ev(&store, 1.0);
        assert!(reinforce(&mut store, &second, &cfg).unwrap().is_empty());
        let dangling = ReinforcementEvent {
            expectation_id: Some("nope".into()),
            ..second
        };
        assert!(matches!(
            reinforce(&mut store, &dangling, &cfg),
            Err(TfsError::UnknownExpectation(_))
        ));
    }

    proptest! {
        #[test]
        fn reinforcement_is_monotone(a in 0u64..50, b in 0u64..50, w in 0.01f64..5.0, pos in any::<bool>()) {
            let (mut store, pred) = setup(a, b);
            let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
            let ev = ReinforcementEvent {
                id: store.next_event_id(),
                expectation_id: Some(e.id.clone()),
                action_id: None,
                function: None,
                outcome: if pos { Outcome::Positive } else { Outcome::Negative },
                weight: w,
                source: EventSource::Acceptor,
            };
            let before = probability(store.rule(&pred.supporting_rules[0]).unwrap());
            reinforce(&mut store, &ev, &MiningConfig::default()).unwrap();
            let after = probability(store.rule(&pred.supporting_rules[0]).unwrap());
            if pos { prop_assert!(after >= before) } else { prop_assert!(after <= before) }
        }

        #[test]
        fn reinforcement_commutes(outcomes in prop::collection::vec(any::<bool>(), 1..8)) {
            let run = |seq: &[bool]| {
                let (mut store, pred) = setup(20, 5);
                let e = open_expectation(&mut store, "act1", &pred, 10).unwrap();
                for &pos in seq {
                    let ev = ReinforcementEvent {
                        id: store.next_event_id(),
                        expectation_id: Some(e.id.clone()),
                        action_id: None,
                        function: None,
                        outcome: if pos { Outcome::Positive } else { Outcome::Negative },
                        weight: 1.0,
                        source: EventSource::Acceptor,
                    };
                    reinforce(&mut store, &ev, &MiningConfig::default()).unwrap();
                }
                store.rule(&pred.supporting_rules[0]).unwrap().clone()
            };
            let mut rev = outcomes.clone();
            rev.reverse();
            prop_assert_eq!(run(&outcomes), run(&rev));
        }
    }
}
