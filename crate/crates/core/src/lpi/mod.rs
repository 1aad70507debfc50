//! Logical-probabilistic inference: evidence revision, rule mining,
//! hypothesis generation and explainable prediction.

mod fisher;
mod hypotheses;
mod mining;
mod predict;

pub use fisher::{fisher_p, ln_factorial, ln_fisher_p};
pub use hypotheses::{abduce, deduce, generate_hypotheses, induce, induce_symmetric};
pub use mining::mine;
pub use predict::{predict, predict_with_rules, Prediction};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{Literal, Rule, RuleStatus, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    #[default]
    Probability,
    Significance,
    Combined,
}

impl std::str::FromStr for Ranking {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "probability" => Ok(Ranking::Probability),
            "significance" => Ok(Ranking::Significance),
            "combined" => Ok(Ranking::Combined),
            other => Err(format!("unknown ranking {other:?}")),
        }
    }
}

/// Ranking score of a (probability, p-value) pair.
pub fn score(ranking: Ranking, probability: f64, p_value: f64) -> f64 {
    match ranking {
        Ranking::Probability => probability,
        Ranking::Significance => -p_value.max(f64::MIN_POSITIVE).log10(),
        Ranking::Combined => probability * (1.0 - p_value),
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_max_len() -> usize {
    4
}
fn default_min_support() -> u64 {
    5
}
fn default_beam() -> usize {
    200
}
fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_len")]
    pub max_premise_len: usize,
    #[serde(default = "default_min_support")]
    pub min_support_a: u64,
    #[serde(default = "default_beam")]
    pub beam_width: usize,
    #[serde(default)]
    pub ranking: Ranking,
    /// Restrict counting to records of this object type.
    #[serde(default)]
    pub scope_type: Option<String>,
    /// Restrict the premise vocabulary to these classifiers.
    #[serde(default)]
    pub classifiers: Option<Vec<String>>,
    /// Literals every premise starts from; the search extends them.
    #[serde(default)]
    pub context: Vec<Literal>,
    /// Worker threads for mining; output does not depend on it.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            alpha: default_alpha(),
            max_premise_len: default_max_len(),
            min_support_a: default_min_support(),
            beam_width: default_beam(),
            ranking: Ranking::default(),
            scope_type: None,
            classifiers: None,
            context: Vec::new(),
            jobs: default_jobs(),
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), LpiError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LpiError::InvalidConfig(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if self.max_premise_len == 0 {
            return Err(LpiError::InvalidConfig("max_premise_len must be ≥ 1".into()));
        }
        if self.beam_width == 0 {
            return Err(LpiError::InvalidConfig("beam_width must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LpiError {
    #[error("unknown classifier {0:?}")]
    UnknownClassifier(String),
    #[error("target {0:?} has fewer than two observed categories")]
    DegenerateTarget(String),
    #[error("rules are not chainable: {0}")]
    NotChainable(String),
    #[error("premise mismatch: {0}")]
    PremiseMismatch(String),
    #[error("conclusions differ")]
    ConclusionMismatch,
    #[error("first rule's premise must be a single literal")]
    NonAtomicPremise,
    #[error("target {0:?} is already assigned in the query")]
    TargetAssigned(String),
    #[error("invalid mining config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Laplace estimate over data counts plus reinforcement pseudo-counts.
pub fn probability(rule: &Rule) -> f64 {
    laplace(rule.a as f64 + rule.r_pos, rule.b as f64 + rule.r_neg)
}

pub(crate) fn laplace(hits: f64, misses: f64) -> f64 {
    (hits + 1.0) / (hits + misses + 2.0)
}

/// Recounts a rule against the store and updates its status.
///
/// Hypotheses are confirmed once significant with enough support. Hypotheses
/// and confirmed rules are retired when their probability falls to 0.5 or
/// below with at least `min_support_a` premise-true records.
pub fn revise(rule: &Rule, store: &Store, cfg: &MiningConfig) -> Result<Rule, LpiError> {
    let counts = store.contingency(&rule.premise, &rule.conclusion, cfg.scope_type.as_deref())?;
    let mut out = rule.clone();
    out.set_counts(counts);
    out.p_value = fisher_p(counts.a, counts.b, counts.c, counts.d);
    let p = probability(&out);
    let evidence = counts.a + counts.b;
    match out.status {
        RuleStatus::Hypothesis | RuleStatus::Confirmed if evidence >= cfg.min_support_a && p <= 0.5 => {
            out.status = RuleStatus::Retired;
        }
        RuleStatus::Hypothesis if out.p_value <= cfg.alpha && counts.a >= cfg.min_support_a => {
            out.status = RuleStatus::Confirmed;
        }
        _ => {}
    }
    Ok(out)
}

/// Revises every rule in the store in place.
pub fn revise_all(store: &mut Store, cfg: &MiningConfig) -> Result<(), LpiError> {
    let revised: Vec<Rule> = store
        .rules()
        .map(|r| revise(r, store, cfg))
        .collect::<Result<_, _>>()?;
    for r in revised {
        if store.rule(&r.id) != Some(&r) {
            store.put_rule(r);
        }
    }
    Ok(())
}

/// Adds freshly mined rules, keeping reinforcement pseudo-counts and status
/// of rules already present under the same key.
pub fn merge_mined(store: &mut Store, mined: Vec<Rule>) {
    for mut rule in mined {
        if let Some(existing) = store.rule(&rule.id) {
            rule.r_pos = existing.r_pos;
            rule.r_neg = existing.r_neg;
            rule.status = existing.status;
            rule.provenance = existing.provenance;
            rule.provisional_probability = existing.provisional_probability;
            if existing == &rule {
                continue;
            }
        }
        store.put_rule(rule);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::fixtures::toy_schema;
    use crate::store::{Contingency, ObjectRecord, Provenance};

    fn rule_with(a: u64, b: u64) -> Rule {
        Rule::new(
            vec![Literal::pos("color", "red")],
            Literal::pos("t", "x"),
            RuleStatus::Mined,
            Provenance::Data,
        )
        .with_counts(Contingency { a, b, c: 0, d: 0 })
    }

    #[test]
    fn laplace_values() {
        assert!((probability(&rule_with(9, 1)) - 10.0 / 12.0).abs() < 1e-15);
        assert_eq!(probability(&rule_with(0, 0)), 0.5);
        assert!((probability(&rule_with(100, 0)) - 101.0 / 102.0).abs() < 1e-15);
    }

    #[test]
    fn score_modes() {
        assert_eq!(score(Ranking::Probability, 0.9, 0.01), 0.9);
        assert!((score(Ranking::Significance, 0.9, 0.001) - 3.0).abs() < 1e-12);
        assert!((score(Ranking::Combined, 0.9, 0.1) - 0.81).abs() < 1e-12);
        assert!(score(Ranking::Significance, 0.9, 0.0).is_finite());
    }

    fn nine_of_ten() -> Store {
        let mut store = Store::new(toy_schema());
        for i in 0..10 {
            let t = if i < 9 { "x" } else { "y" };
            store
                .insert(ObjectRecord::new(format!("r{i}"), "thing").with("color", "red").with("t", t))
                .unwrap();
        }
        for i in 0..10 {
            let t = if i < 1 { "x" } else { "y" };
            store
                .insert(ObjectRecord::new(format!("q{i}"), "thing").with("color", "blue").with("t", t))
                .unwrap();
        }
        store
    }

    #[test]
    fn revise_confirms_hypothesis() {
        let store = nine_of_ten();
        let mut h = rule_with(0, 0);
        h.status = RuleStatus::Hypothesis;
        let cfg = MiningConfig::default();
        let r = revise(&h, &store, &cfg).unwrap();
        assert_eq!((r.a, r.b, r.c, r.d), (9, 1, 1, 9));
        // Independent: P(A ≥ 9) with margins 10/10/20.
        let expected = (100.0 + 1.0) / 184756.0;
        assert!((r.p_value - expected).abs() < 1e-12);
        assert_eq!(r.status, RuleStatus::Confirmed);
        assert_eq!(revise(&r, &store, &cfg).unwrap(), r);
    }

    #[test]
    fn revise_on_empty_store() {
        let store = Store::new(toy_schema());
        let mut h = rule_with(3, 3);
        h.status = RuleStatus::Hypothesis;
        let r = revise(&h, &store, &MiningConfig::default()).unwrap();
        assert_eq!(r.counts(), Contingency::default());
        assert_eq!(probability(&r), 0.5);
        assert_eq!(r.status, RuleStatus::Hypothesis);
    }

    #[test]
    fn revise_retires_refuted_hypothesis() {
        let store = nine_of_ten();
        let mut h = Rule::new(
            vec![Literal::pos("color", "blue")],
            Literal::pos("t", "x"),
            RuleStatus::Hypothesis,
            Provenance::Induction,
        );
        h.provisional_probability = Some(0.7);
        let r = revise(&h, &store, &MiningConfig::default()).unwrap();
        assert_eq!(r.status, RuleStatus::Retired);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MiningConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let parsed: MiningConfig = serde_json::from_str(r#"{"alpha": 0.01}"#).unwrap();
        assert_eq!(parsed.max_premise_len, 4);
        assert_eq!(parsed.alpha, 0.01);
    }
}
