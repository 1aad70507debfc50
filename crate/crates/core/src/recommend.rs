//! Decisions on top of predictions: act automatically when the best option
//! clears the confidence threshold, otherwise offer a ranked menu.

use serde::{Deserialize, Serialize};

use crate::lpi::{predict, LpiError, MiningConfig, Prediction};
use crate::store::{Assignment, Literal, Store};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommendConfig {
    pub confidence_threshold: f64,
    pub auto_decide: bool,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            confidence_threshold: 0.8,
            auto_decide: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "decision", content = "options")]
pub enum Decision<T> {
    Auto(T),
    Menu(Vec<T>),
    Abstain,
}

/// An action together with the prediction that its goal will be reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionOption {
    pub action: Literal,
    pub expected: Prediction,
}

fn decide<T>(mut ranked: Vec<T>, pred: impl Fn(&T) -> &Prediction, alpha: f64, cfg: &RecommendConfig) -> Decision<T> {
    if ranked.is_empty() {
        return Decision::Abstain;
    }
    let top = pred(&ranked[0]);
    if cfg.auto_decide && top.probability >= cfg.confidence_threshold && top.p_value <= alpha {
        Decision::Auto(ranked.swap_remove(0))
    } else {
        Decision::Menu(ranked)
    }
}

/// Recommends a category of `target` for the query.
pub fn recommend(
    query: &Assignment,
    target: &str,
    store: &Store,
    mining: &MiningConfig,
    cfg: &RecommendConfig,
) -> Result<Decision<Prediction>, LpiError> {
    let preds = predict(query, target, store, mining)?;
    Ok(decide(preds, |p| p, mining.alpha, cfg))
}

/// Chooses a category of `action_classifier` to maximize the chance of
/// `goal`: each candidate is added to the query and scored by the best
/// prediction of the goal literal. Ties go to the lower code.
pub fn recommend_action(
    base: &Assignment,
    action_classifier: &str,
    goal: &Literal,
    store: &Store,
    mining: &MiningConfig,
    cfg: &RecommendConfig,
) -> Result<Decision<ActionOption>, LpiError> {
    let def = store
        .schema()
        .classifier(action_classifier)
        .ok_or_else(|| LpiError::UnknownClassifier(action_classifier.to_string()))?;
    let mut options = Vec::new();
    for cat in &def.domain {
        let mut q = base.clone();
        q.insert(action_classifier.to_string(), cat.code.clone());
        let preds = predict(&q, &goal.classifier_id, store, mining)?;
        if let Some(p) = preds.into_iter().find(|p| p.target == *goal) {
            options.push(ActionOption {
                action: Literal::pos(action_classifier, &cat.code),
                expected: p,
            });
        }
    }
    options.sort_by(|x, y| {
        y.expected
            .score
            .total_cmp(&x.expected.score)
            .then_with(|| x.action.category_code.cmp(&y.action.category_code))
    });
    Ok(decide(options, |o| &o.expected, mining.alpha, cfg))
}
