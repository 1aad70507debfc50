use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{probability, score, LpiError, MiningConfig, Ranking};
use crate::store::{eval_conjunction, Assignment, Literal, Rule, Store, Truth};

/// A ranked conclusion with the rules that justify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub target: Literal,
    pub probability: f64,
    pub p_value: f64,
    pub score: f64,
    /// Applicable rules for this conclusion, best first.
    pub supporting_rules: Vec<String>,
}

/// Ranks the conclusions on `target` supported by rules whose premise holds
/// on `query`. Hypotheses and retired rules never contribute.
pub fn predict_with_rules<'a>(
    query: &Assignment,
    target: &str,
    rules: impl IntoIterator<Item = &'a Rule>,
    ranking: Ranking,
) -> Vec<Prediction> {
    let mut groups: BTreeMap<&Literal, Vec<(f64, f64, f64, &str)>> = BTreeMap::new();
    for rule in rules {
        if !rule.is_active() || rule.conclusion.classifier_id != target {
            continue;
        }
        if eval_conjunction(query, &rule.premise) != Truth::True {
            continue;
        }
        let p = probability(rule);
        groups
            .entry(&rule.conclusion)
            .or_default()
            .push((score(ranking, p, rule.p_value), p, rule.p_value, &rule.id));
    }
    let mut out: Vec<Prediction> = groups
        .into_iter()
        .map(|(lit, mut support)| {
            support.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.3.cmp(y.3)));
            let (s, p, pv, _) = support[0];
            Prediction {
                target: lit.clone(),
                probability: p,
                p_value: pv,
                score: s,
                supporting_rules: support.iter().map(|x| x.3.to_string()).collect(),
            }
        })
        .collect();
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.target.category_code.cmp(&y.target.category_code))
            .then_with(|| x.target.polarity.cmp(&y.target.polarity))
    });
    out
}

pub fn predict(
    query: &Assignment,
    target: &str,
    store: &Store,
    cfg: &MiningConfig,
) -> Result<Vec<Prediction>, LpiError> {
    if store.schema().classifier(target).is_none() {
        return Err(LpiError::UnknownClassifier(target.to_string()));
    }
    if let Some(c) = query.keys().find(|c| store.schema().classifier(c).is_none()) {
        return Err(LpiError::UnknownClassifier(c.clone()));
    }
    if query.contains_key(target) {
        return Err(LpiError::TargetAssigned(target.to_string()));
    }
    Ok(predict_with_rules(query, target, store.rules(), cfg.ranking))
}
