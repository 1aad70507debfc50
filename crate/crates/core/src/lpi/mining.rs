//! Level-wise beam search for probabilistic laws.
//!
//! A premise is extended one literal at a time. A child survives only if
//! its probability strictly exceeds that of every one-literal
//! generalization, the improvement over each generalization is itself
//! significant, the rule as a whole is significant and it has enough
//! support. Emitted rules are the beam survivors with no surviving child.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;

use super::{fisher_p, laplace, score, LpiError, MiningConfig};
use crate::store::{Contingency, Literal, ObjectRecord, Provenance, Rule, RuleStatus, Store};

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn ones(n: usize) -> Self {
        let mut b = Bits(vec![u64::MAX; n.div_ceil(64)]);
        if !n.is_multiple_of(64) {
            if let Some(last) = b.0.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        b
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and_assign(&mut self, other: &Bits) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x &= y;
        }
    }

    fn count_and(&self, other: &Bits) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(x, y)| (x & y).count_ones() as u64)
            .sum()
    }

    fn count_and3(&self, y: &Bits, z: &Bits) -> u64 {
        self.0
            .iter()
            .zip(&y.0)
            .zip(&z.0)
            .map(|((a, b), c)| (a & b & c).count_ones() as u64)
            .sum()
    }

    fn minus(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(x, y)| x & !y).collect())
    }
}

/// Truth and evaluability columns of one literal over the dataset.
struct Column {
    literal: Literal,
    classifier: usize,
    truth: Bits,
    falsity: Bits,
    evaluable: Bits,
}

fn column(records: &[&ObjectRecord], literal: Literal, classifier: usize) -> Column {
    let n = records.len();
    let mut truth = Bits::zeros(n);
    let mut evaluable = Bits::zeros(n);
    for (i, r) in records.iter().enumerate() {
        if let Some(code) = r.assignments.get(&literal.classifier_id) {
            evaluable.set(i);
            if (code == &literal.category_code) == literal.is_positive() {
                truth.set(i);
            }
        }
    }
    let falsity = evaluable.minus(&truth);
    Column {
        literal,
        classifier,
        truth,
        falsity,
        evaluable,
    }
}

struct Dataset {
    n: usize,
    columns: Vec<Column>,
}

impl Dataset {
    /// (true set, false set) of a conjunction given as column indices.
    fn premise(&self, lits: &[usize]) -> (Bits, Bits) {
        let mut t = Bits::ones(self.n);
        let mut e = Bits::ones(self.n);
        for &l in lits {
            t.and_assign(&self.columns[l].truth);
            e.and_assign(&self.columns[l].evaluable);
        }
        let f = e.minus(&t);
        (t, f)
    }

    fn table(&self, lits: &[usize], conclusion: usize) -> Contingency {
        let (t, f) = self.premise(lits);
        let c = &self.columns[conclusion];
        Contingency {
            a: t.count_and(&c.truth),
            b: t.count_and(&c.falsity),
            c: f.count_and(&c.truth),
            d: f.count_and(&c.falsity),
        }
    }

    /// Table of `added` versus the conclusion inside the records where
    /// `base` holds.
    fn conditional_table(&self, base: &[usize], added: usize, conclusion: usize) -> Contingency {
        let (t, _) = self.premise(base);
        let l = &self.columns[added];
        let c = &self.columns[conclusion];
        Contingency {
            a: t.count_and3(&l.truth, &c.truth),
            b: t.count_and3(&l.truth, &c.falsity),
            c: t.count_and3(&l.falsity, &c.truth),
            d: t.count_and3(&l.falsity, &c.falsity),
        }
    }
}

fn prob(t: &Contingency) -> f64 {
    laplace(t.a as f64, t.b as f64)
}

fn fisher(t: &Contingency) -> f64 {
    fisher_p(t.a, t.b, t.c, t.d)
}

struct Prepared {
    data: Dataset,
    root: Vec<usize>,
    universe: Vec<usize>,
    conclusions: Vec<usize>,
}

fn prepare(target: &str, store: &Store, cfg: &MiningConfig) -> Result<Prepared, LpiError> {
    let schema = store.schema();
    let target_def = schema
        .classifier(target)
        .ok_or_else(|| LpiError::UnknownClassifier(target.to_string()))?;
    for lit in &cfg.context {
        if schema.classifier(&lit.classifier_id).is_none() {
            return Err(LpiError::UnknownClassifier(lit.classifier_id.clone()));
        }
        if lit.classifier_id == target {
            return Err(LpiError::InvalidConfig("context mentions the target".into()));
        }
    }
    if let Some(list) = &cfg.classifiers {
        if let Some(bad) = list.iter().find(|c| schema.classifier(c).is_none()) {
            return Err(LpiError::UnknownClassifier(bad.clone()));
        }
    }

    let records: Vec<&ObjectRecord> = store.scoped(cfg.scope_type.as_deref()).collect();

    // Observed codes per classifier, in domain order.
    let mut observed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &records {
        for (c, v) in &r.assignments {
            observed.entry(c.as_str()).or_default().insert(v.as_str());
        }
    }
    let target_codes: Vec<&str> = target_def
        .domain
        .iter()
        .map(|c| c.code.as_str())
        .filter(|c| observed.get(target).is_some_and(|s| s.contains(c)))
        .collect();
    if target_codes.len() < 2 {
        return Err(LpiError::DegenerateTarget(target.to_string()));
    }

    let context_classifiers: BTreeSet<&str> =
        cfg.context.iter().map(|l| l.classifier_id.as_str()).collect();
    let vocabulary: Vec<&str> = match &cfg.classifiers {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => observed.keys().copied().collect(),
    };

    let mut classifier_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_of = |id: &str| {
        let next = classifier_ids.len();
        *classifier_ids.entry(id.to_string()).or_insert(next)
    };

    let mut literals: Vec<(Literal, usize)> = Vec::new();
    for cid in vocabulary {
        if cid == target || context_classifiers.contains(cid) {
            continue;
        }
        let Some(def) = schema.classifier(cid) else { continue };
        let Some(codes) = observed.get(cid) else { continue };
        let k = class_of(cid);
        for cat in &def.domain {
            if !codes.contains(cat.code.as_str()) {
                continue;
            }
            literals.push((Literal::pos(cid, &cat.code), k));
            // With two categories the negation duplicates the other positive.
            if def.domain.len() > 2 {
                literals.push((Literal::neg(cid, &cat.code), k));
            }
        }
    }
    literals.sort();
    let mut columns: Vec<Column> = literals
        .into_iter()
        .map(|(l, k)| column(&records, l, k))
        .collect();
    let universe: Vec<usize> = (0..columns.len()).collect();

    let mut root = Vec::new();
    let mut ctx: Vec<Literal> = cfg.context.clone();
    ctx.sort();
    ctx.dedup();
    for lit in ctx {
        let k = class_of(&lit.classifier_id);
        root.push(columns.len());
        columns.push(column(&records, lit, k));
    }

    let tk = class_of(target);
    let mut conclusions = Vec::new();
    for code in target_codes {
        conclusions.push(columns.len());
        columns.push(column(&records, Literal::pos(target, code), tk));
    }
    Ok(Prepared {
        data: Dataset {
            n: records.len(),
            columns,
        },
        root,
        universe,
        conclusions,
    })
}

struct Candidate {
    premise: Vec<usize>,
    key: String,
    table: Contingency,
    p_value: f64,
    score: f64,
}

fn sorted_literals(data: &Dataset, premise: &[usize]) -> Vec<Literal> {
    let mut lits: Vec<Literal> = premise
        .iter()
        .map(|&i| data.columns[i].literal.clone())
        .collect();
    lits.sort();
    lits
}

fn search(prep: &Prepared, conclusion: usize, cfg: &MiningConfig) -> Vec<Rule> {
    let data = &prep.data;
    let concl_lit = &data.columns[conclusion].literal;
    let key_of = |p: &[usize]| crate::store::rule_key(&sorted_literals(data, p), concl_lit);

    let mut frontier: Vec<Candidate> = vec![{
        let table = data.table(&prep.root, conclusion);
        Candidate {
            key: key_of(&prep.root),
            premise: prep.root.clone(),
            p_value: fisher(&table),
            score: 0.0,
            table,
        }
    }];
    let mut emitted: Vec<Candidate> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();

    while let Some(first) = frontier.first() {
        if first.premise.len() >= cfg.max_premise_len {
            break;
        }
        let mut kept: Vec<Candidate> = Vec::new();
        for parent in &frontier {
            let used: BTreeSet<usize> = parent
                .premise
                .iter()
                .map(|&i| data.columns[i].classifier)
                .collect();
            for &lit in &prep.universe {
                if used.contains(&data.columns[lit].classifier) {
                    continue;
                }
                let mut child = parent.premise.clone();
                child.push(lit);
                child.sort_unstable();
                if !seen.insert(child.clone()) {
                    continue;
                }
                if let Some(c) = evaluate(data, &child, conclusion, cfg) {
                    kept.push(Candidate {
                        key: key_of(&child),
                        ..c
                    });
                }
            }
        }
        kept.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.key.cmp(&y.key)));
        kept.truncate(cfg.beam_width);

        let improved: HashSet<Vec<usize>> = kept
            .iter()
            .flat_map(|c| {
                (0..c.premise.len()).map(move |i| {
                    let mut g = c.premise.clone();
                    g.remove(i);
                    g
                })
            })
            .collect();
        emitted.extend(
            frontier
                .drain(..)
                .filter(|p| p.premise != prep.root && !improved.contains(&p.premise)),
        );
        frontier = kept;
    }
    emitted.extend(frontier.into_iter().filter(|c| c.premise != prep.root));

    emitted
        .into_iter()
        .map(|c| {
            let mut rule = Rule::new(
                sorted_literals(data, &c.premise),
                concl_lit.clone(),
                RuleStatus::Mined,
                Provenance::Data,
            )
            .with_counts(c.table);
            rule.p_value = c.p_value;
            rule
        })
        .collect()
}

/// Applies every survival gate to a candidate premise.
fn evaluate(data: &Dataset, premise: &[usize], conclusion: usize, cfg: &MiningConfig) -> Option<Candidate> {
    let table = data.table(premise, conclusion);
    if table.a < cfg.min_support_a {
        return None;
    }
    let p_value = fisher(&table);
    if p_value > cfg.alpha {
        return None;
    }
    let probability = prob(&table);
    for i in 0..premise.len() {
        let mut general = premise.to_vec();
        let dropped = general.remove(i);
        if probability <= prob(&data.table(&general, conclusion)) {
            return None;
        }
        if fisher(&data.conditional_table(&general, dropped, conclusion)) > cfg.alpha {
            return None;
        }
    }
    Some(Candidate {
        premise: premise.to_vec(),
        key: String::new(),
        table,
        p_value,
        score: score(cfg.ranking, probability, p_value),
    })
}

/// Mines probabilistic laws concluding each observed category of `target`.
///
/// Output is sorted by rule id and independent of `cfg.jobs`.
pub fn mine(target: &str, store: &Store, cfg: &MiningConfig) -> Result<Vec<Rule>, LpiError> {
    cfg.validate()?;
    let prep = prepare(target, store, cfg)?;
    let run = |&c: &usize| search(&prep, c, cfg);
    let mut rules: Vec<Rule> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| LpiError::InvalidConfig(e.to_string()))?;
        pool.install(|| prep.conclusions.par_iter().flat_map_iter(run).collect())
    } else {
        prep.conclusions.iter().flat_map(run).collect()
    };
    rules.sort_by(|a, b| a.id.cmp(&b.id));
    rules.dedup_by(|a, b| a.id == b.id);
    Ok(rules)
}
