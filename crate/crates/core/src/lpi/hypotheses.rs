//! Hypothesis generators. Every generated rule carries zero evidence and
//! `status = hypothesis`; it has to pass [`revise`](super::revise) before
//! it can take part in prediction.

use std::collections::BTreeSet;

use super::{probability, LpiError};
use crate::store::{Literal, Provenance, Rule, RuleStatus};

fn hypothesis(premise: Vec<Literal>, conclusion: Literal, provenance: Provenance, p: f64) -> Rule {
    let mut r = Rule::new(premise, conclusion, RuleStatus::Hypothesis, provenance);
    r.provisional_probability = Some(p);
    r
}

fn one_per_classifier(lits: &[Literal]) -> bool {
    let mut seen = BTreeSet::new();
    lits.iter().all(|l| seen.insert(l.classifier_id.as_str()))
}

/// Chains `r1: P ⇒ x` with `r2: x ∧ Q ⇒ y` into `P ∧ Q ⇒ y`.
pub fn deduce(r1: &Rule, r2: &Rule) -> Result<Rule, LpiError> {
    if !r2.premise.contains(&r1.conclusion) {
        return Err(LpiError::NotChainable(format!(
            "{} does not appear in the premise of {}",
            r1.conclusion, r2.id
        )));
    }
    let concl = &r2.conclusion;
    if r1.premise.iter().any(|l| l.classifier_id == concl.classifier_id) {
        return Err(LpiError::NotChainable(format!(
            "premise of {} mentions {}",
            r1.id, concl.classifier_id
        )));
    }
    let mut premise: Vec<Literal> = r1.premise.clone();
    premise.extend(r2.premise.iter().filter(|l| *l != &r1.conclusion).cloned());
    premise.sort();
    premise.dedup();
    if !one_per_classifier(&premise) {
        return Err(LpiError::NotChainable("combined premise is contradictory".into()));
    }
    Ok(hypothesis(
        premise,
        concl.clone(),
        Provenance::Deduction,
        probability(r1) * probability(r2),
    ))
}

fn check_induction(r1: &Rule, r2: &Rule) -> Result<(), LpiError> {
    if r1.premise != r2.premise {
        return Err(LpiError::PremiseMismatch("rules have different premises".into()));
    }
    if r1.conclusion.classifier_id == r2.conclusion.classifier_id {
        return Err(LpiError::PremiseMismatch(
            "conclusions share a classifier; no hypothesis links them".into(),
        ));
    }
    Ok(())
}

/// From a shared cause `P ⇒ x` and `P ⇒ y`, hypothesizes `y ⇒ x`.
pub fn induce(r1: &Rule, r2: &Rule) -> Result<Rule, LpiError> {
    check_induction(r1, r2)?;
    Ok(hypothesis(
        vec![r2.conclusion.clone()],
        r1.conclusion.clone(),
        Provenance::Induction,
        probability(r1).min(probability(r2)),
    ))
}

/// Both directions of [`induce`].
pub fn induce_symmetric(r1: &Rule, r2: &Rule) -> Result<[Rule; 2], LpiError> {
    Ok([induce(r1, r2)?, induce(r2, r1)?])
}

/// From `x ⇒ z` and `Q ⇒ z`, hypothesizes `Q ⇒ x`.
pub fn abduce(r1: &Rule, r2: &Rule) -> Result<Rule, LpiError> {
    if r1.conclusion != r2.conclusion {
        return Err(LpiError::ConclusionMismatch);
    }
    if r1.premise == r2.premise {
        return Err(LpiError::PremiseMismatch("premises are identical".into()));
    }
    let [cause] = r1.premise.as_slice() else {
        return Err(LpiError::NonAtomicPremise);
    };
    if r2.premise.iter().any(|l| l.classifier_id == cause.classifier_id) {
        return Err(LpiError::PremiseMismatch(format!(
            "premise of {} already constrains {}",
            r2.id, cause.classifier_id
        )));
    }
    Ok(hypothesis(
        r2.premise.clone(),
        cause.clone(),
        Provenance::Abduction,
        probability(r1).min(probability(r2)),
    ))
}

/// Every hypothesis obtainable from ordered pairs of active rules, skipping
/// keys already present in `rules`. Sorted by id, first generator wins.
pub fn generate_hypotheses(rules: &[Rule], symmetric: bool) -> Vec<Rule> {
    let active: Vec<&Rule> = rules.iter().filter(|r| r.is_active()).collect();
    let existing: BTreeSet<&str> = rules.iter().map(|r| r.id.as_str()).collect();
    let mut out: std::collections::BTreeMap<String, Rule> = Default::default();
    let mut add = |r: Rule| {
        if !existing.contains(r.id.as_str()) && !r.premise.is_empty() {
            out.entry(r.id.clone()).or_insert(r);
        }
    };
    for (i, r1) in active.iter().enumerate() {
        for (j, r2) in active.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Ok(h) = deduce(r1, r2) {
                add(h);
            }
            // Without symmetry each unordered pair is induced once.
            if symmetric || i < j {
                if let Ok(h) = induce(r1, r2) {
                    add(h);
                }
            }
            if let Ok(h) = abduce(r1, r2) {
                add(h);
            }
        }
    }
    out.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Contingency;

    fn rule(premise: &[&str], concl: &str, a: u64, b: u64) -> Rule {
        Rule::new(
            premise.iter().map(|p| Literal::pos(*p, "1")).collect(),
            Literal::pos(concl, "1"),
            RuleStatus::Confirmed,
            Provenance::Data,
        )
        .with_counts(Contingency { a, b, c: 0, d: 0 })
    }

    #[test]
    fn deduction_chain() {
        // 7/1 → 0.8 and 8/0 → 0.9 under the Laplace estimate.
        let r1 = rule(&["bad_nutrition"], "weak_immunity", 7, 1);
        let r2 = rule(&["weak_immunity"], "infection_risk", 8, 0);
        let h = deduce(&r1, &r2).unwrap();
        assert_eq!(h.id, "bad_nutrition=1=>infection_risk=1");
        assert_eq!(h.status, RuleStatus::Hypothesis);
        assert_eq!(h.provenance, Provenance::Deduction);
        assert_eq!(h.counts(), Contingency::default());
        assert!((h.provisional_probability.unwrap() - 0.72).abs() < 1e-12);
        assert!(matches!(deduce(&r2, &r1), Err(LpiError::NotChainable(_))));
    }

    #[test]
    fn deduction_keeps_extra_premise() {
        let r1 = rule(&["a"], "b", 3, 0);
        let r2 = rule(&["b", "c"], "d", 3, 0);
        assert_eq!(deduce(&r1, &r2).unwrap().id, "a=1&c=1=>d=1");
    }

    #[test]
    fn induction() {
        let r1 = rule(&["bad_nutrition"], "weak_immunity", 8, 0); // 0.9
        let r2 = rule(&["bad_nutrition"], "hypothermia_risk", 5, 2); // 0.667
        let h = induce(&r1, &r2).unwrap();
        assert_eq!(h.id, "hypothermia_risk=1=>weak_immunity=1");
        assert!((h.provisional_probability.unwrap() - 6.0 / 9.0).abs() < 1e-12);
        let [a, b] = induce_symmetric(&r1, &r2).unwrap();
        assert_eq!(b.id, "weak_immunity=1=>hypothermia_risk=1");
        assert_eq!(a.id, h.id);
        assert!(matches!(induce(&r1, &r1), Err(LpiError::PremiseMismatch(_))));
    }

    #[test]
    fn induction_min_rule() {
        let r1 = rule(&["p"], "x", 8, 0); // 0.9
        let r2 = rule(&["p"], "y", 6, 2); // 0.7
        let h = induce(&r1, &r2).unwrap();
        assert!((h.provisional_probability.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn abduction() {
        let r1 = rule(&["weak_immunity"], "infection", 2, 1); // 0.6
        let r2 = rule(&["hypothermia"], "infection", 7, 1); // 0.8
        let h = abduce(&r1, &r2).unwrap();
        assert_eq!(h.id, "hypothermia=1=>weak_immunity=1");
        assert_eq!(h.provenance, Provenance::Abduction);
        assert!((h.provisional_probability.unwrap() - 0.6).abs() < 1e-12);
        let other = rule(&["hypothermia"], "fever", 7, 1);
        assert!(matches!(abduce(&r1, &other), Err(LpiError::ConclusionMismatch)));
        let wide = rule(&["a", "b"], "infection", 1, 0);
        assert!(matches!(abduce(&wide, &r2), Err(LpiError::NonAtomicPremise)));
    }

    #[test]
    fn generator_skips_known_and_dedups() {
        let rules = vec![
            rule(&["a"], "b", 8, 0),
            rule(&["b"], "c", 8, 0),
            rule(&["a"], "c", 8, 0),
        ];
        let hs = generate_hypotheses(&rules, false);
        assert!(hs.iter().all(|h| h.status == RuleStatus::Hypothesis));
        assert!(!hs.iter().any(|h| h.id == "a=1=>c=1"));
        let ids: BTreeSet<&str> = hs.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(ids.len(), hs.len());
        assert!(!ids.contains("b=1=>c=1"));
    }
}
