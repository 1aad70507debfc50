//! Probabilistic formal concepts: fixed points of the mined rule system and
//! the invariants ("attractors") obtained by grouping objects on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpi::{self, probability, LpiError, MiningConfig};
use crate::store::{eval_literal, IntentEntry, Invariant, Literal, ObjectRecord, Rule, Store, Truth};

fn default_max_iterations() -> usize {
    100
}
fn default_apply_threshold() -> f64 {
    0.8
}
fn default_min_frequency() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub classifiers: Vec<String>,
    #[serde(default)]
    pub mining: MiningConfig,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_apply_threshold")]
    pub apply_threshold: f64,
    /// Merge fixed points within this many differing classifiers into the
    /// larger group. 0 disables the pass.
    #[serde(default)]
    pub merge_hamming: usize,
}

impl ContextConfig {
    pub fn new(classifiers: Vec<String>) -> Self {
        ContextConfig {
            classifiers,
            mining: MiningConfig::default(),
            max_iterations: default_max_iterations(),
            apply_threshold: default_apply_threshold(),
            merge_hamming: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PfcError> {
        self.mining.validate()?;
        if self.max_iterations == 0 {
            return Err(PfcError::InvalidConfig("max_iterations must be ≥ 1".into()));
        }
        if !(self.apply_threshold > 0.5 && self.apply_threshold <= 1.0) {
            return Err(PfcError::InvalidConfig(format!(
                "apply_threshold {} not in (0.5, 1]",
                self.apply_threshold
            )));
        }
        Ok(())
    }
}

/// A set of literal commitments, at most one per classifier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureState {
    pub literals: BTreeSet<Literal>,
    pub trace: Vec<String>,
}

impl ClosureState {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        ClosureState {
            literals: literals.into_iter().collect(),
            trace: Vec::new(),
        }
    }

    pub fn is_consistent(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.literals.iter().all(|l| seen.insert(l.classifier_id.as_str()))
    }

    pub fn commitment(&self, classifier: &str) -> Option<&Literal> {
        self.literals.iter().find(|l| l.classifier_id == classifier)
    }

    /// Truth of `lit` given the commitments: a positive commitment settles
    /// every literal on its classifier, a negative one only itself.
    pub fn holds(&self, lit: &Literal) -> Truth {
        match self.commitment(&lit.classifier_id) {
            None => Truth::Unevaluable,
            Some(c) if c == lit => Truth::True,
            Some(c) if c.is_positive() => lit.eval_code(Some(&c.category_code)),
            Some(c) if c.negated() == *lit => Truth::False,
            Some(_) => Truth::Unevaluable,
        }
    }

    fn premise_holds(&self, premise: &[Literal]) -> bool {
        premise.iter().all(|l| self.holds(l) == Truth::True)
    }

    /// Canonical `&`-joined rendering of the literal set.
    pub fn key(&self) -> String {
        join(self.literals.iter())
    }
}

fn join<'a>(lits: impl Iterator<Item = &'a Literal>) -> String {
    lits.map(|l| l.to_string()).collect::<Vec<_>>().join("&")
}

#[derive(Debug, Error)]
pub enum PfcError {
    #[error("start state commits a classifier twice")]
    InconsistentStart,
    #[error("no fixed point after {iterations} iterations")]
    NonConvergence { iterations: usize, state: ClosureState },
    #[error("no object has an assignment among the context classifiers")]
    EmptyContext,
    #[error("unknown invariant {0:?}")]
    UnknownInvariant(String),
    #[error("invalid context config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lpi(#[from] LpiError),
}

/// Active rules above the apply threshold in commitment order:
/// probability desc, p-value asc, key asc.
fn ordered(rules: &[Rule], threshold: f64) -> Vec<(&Rule, f64)> {
    let mut out: Vec<(&Rule, f64)> = rules
        .iter()
        .filter(|r| r.is_active())
        .map(|r| (r, probability(r)))
        .filter(|(_, p)| *p >= threshold)
        .collect();
    out.sort_by(|x, y| {
        y.1.total_cmp(&x.1)
            .then(x.0.p_value.total_cmp(&y.0.p_value))
            .then_with(|| x.0.id.cmp(&y.0.id))
    });
    out
}

fn run_closure(mut state: ClosureState, rules: &[(&Rule, f64)], max_iterations: usize) -> Result<ClosureState, PfcError> {
    for _ in 0..max_iterations {
        let applicable: Vec<&Rule> = rules
            .iter()
            .map(|(r, _)| *r)
            .filter(|r| state.commitment(&r.conclusion.classifier_id).is_none())
            .filter(|r| state.premise_holds(&r.premise))
            .collect();
        let mut changed = false;
        for r in applicable {
            // Skip-on-conflict: an earlier commitment this round wins.
            if state.commitment(&r.conclusion.classifier_id).is_none() {
                state.literals.insert(r.conclusion.clone());
                state.trace.push(r.id.clone());
                changed = true;
            }
        }
        if !changed {
            return Ok(state);
        }
    }
    Err(PfcError::NonConvergence {
        iterations: max_iterations,
        state,
    })
}

/// Forward-chains `rules` from `start` until no applicable rule adds a
/// commitment. Monotone: literals are only ever added.
pub fn closure(start: ClosureState, rules: &[Rule], cfg: &ContextConfig) -> Result<ClosureState, PfcError> {
    if !start.is_consistent() {
        return Err(PfcError::InconsistentStart);
    }
    run_closure(start, &ordered(rules, cfg.apply_threshold), cfg.max_iterations)
}

/// Mines every context classifier as a target over the context vocabulary.
/// Targets with a single observed category contribute nothing.
pub fn context_rules(store: &Store, cfg: &ContextConfig) -> Result<Vec<Rule>, PfcError> {
    let mut mining = cfg.mining.clone();
    mining.classifiers = Some(cfg.classifiers.clone());
    let mut rules = Vec::new();
    for target in &cfg.classifiers {
        match lpi::mine(target, store, &mining) {
            Ok(mut r) => rules.append(&mut r),
            Err(LpiError::DegenerateTarget(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    rules.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(rules)
}

/// Net weight of `lit` in `state`: summed probability of applicable rules
/// concluding it, minus that of applicable rules contradicting it.
fn net_support(lit: &Literal, state: &ClosureState, evidence: &[(&Rule, f64)]) -> f64 {
    let mut s = 0.0;
    for (r, p) in evidence {
        if r.conclusion.classifier_id != lit.classifier_id || !state.premise_holds(&r.premise) {
            continue;
        }
        if r.conclusion == *lit {
            s += p;
        } else if ClosureState::new([lit.clone()]).holds(&r.conclusion) == Truth::False {
            s -= p;
        }
    }
    s
}

/// Fixed point reached from one object's observations.
///
/// Observed literals are committed one at a time, strongest net support
/// first, closing after each. Support counts every mined rule, not only
/// those above the apply threshold. An observation the rules contradict on
/// balance is not committed; once the rest is settled, its classifier gets
/// whichever category the applicable rules favour, if any.
fn fixed_point(
    record: &ObjectRecord,
    active: &[(&Rule, f64)],
    evidence: &[(&Rule, f64)],
    cfg: &ContextConfig,
) -> Result<ClosureState, PfcError> {
    let observed: Vec<Literal> = cfg
        .classifiers
        .iter()
        .filter_map(|c| record.assignments.get(c).map(|v| Literal::pos(c, v)))
        .collect();
    let full = ClosureState::new(observed.iter().cloned());
    let mut order: Vec<(&Literal, f64)> = observed.iter().map(|l| (l, net_support(l, &full, evidence))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));

    let mut state = ClosureState::default();
    let mut rejected = Vec::new();
    for (lit, support) in order {
        if state.commitment(&lit.classifier_id).is_some() {
            continue;
        }
        if support < 0.0 {
            rejected.push(lit.classifier_id.clone());
            continue;
        }
        state.literals.insert(lit.clone());
        state = run_closure(state, active, cfg.max_iterations)?;
    }
    for classifier in rejected {
        if state.commitment(&classifier).is_some() {
            continue;
        }
        let mut best: Option<(&Literal, f64)> = None;
        for (r, _) in evidence {
            if r.conclusion.classifier_id != classifier || !r.conclusion.is_positive() {
                continue;
            }
            let s = net_support(&r.conclusion, &state, evidence);
            if s > 0.0 && best.is_none_or(|(l, b)| s > b || (s == b && r.conclusion < *l)) {
                best = Some((&r.conclusion, s));
            }
        }
        if let Some((lit, _)) = best {
            state.literals.insert(lit.clone());
            state = run_closure(state, active, cfg.max_iterations)?;
        }
    }
    Ok(state)
}

fn hamming(a: &BTreeSet<Literal>, b: &BTreeSet<Literal>) -> usize {
    let classes: BTreeSet<&str> = a.iter().chain(b).map(|l| l.classifier_id.as_str()).collect();
    classes
        .into_iter()
        .filter(|c| {
            let x = a.iter().find(|l| l.classifier_id == *c);
            let y = b.iter().find(|l| l.classifier_id == *c);
            x != y
        })
        .count()
}

/// Computes the invariants of the context without touching the store.
pub fn find_invariants(store: &Store, cfg: &ContextConfig) -> Result<Vec<Invariant>, PfcError> {
    cfg.validate()?;
    let members: Vec<&ObjectRecord> = store
        .scoped(cfg.mining.scope_type.as_deref())
        .filter(|r| cfg.classifiers.iter().any(|c| r.assignments.contains_key(c)))
        .collect();
    if members.is_empty() {
        return Err(PfcError::EmptyContext);
    }
    let rules = context_rules(store, cfg)?;
    let active = ordered(&rules, cfg.apply_threshold);
    let evidence = ordered(&rules, 0.0);
    let run = |r: &&ObjectRecord| fixed_point(r, &active, &evidence, cfg).map(|s| (s.literals, r.id.clone()));
    let points: Vec<(BTreeSet<Literal>, String)> = if cfg.mining.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.mining.jobs)
            .build()
            .map_err(|e| PfcError::InvalidConfig(e.to_string()))?;
        pool.install(|| members.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        members.iter().map(run).collect::<Result<_, _>>()?
    };

    let mut groups: BTreeMap<BTreeSet<Literal>, Vec<String>> = BTreeMap::new();
    for (lits, id) in points {
        groups.entry(lits).or_default().push(id);
    }
    let mut groups: Vec<(BTreeSet<Literal>, Vec<String>)> = groups.into_iter().collect();
    let by_size = |g: &mut Vec<(BTreeSet<Literal>, Vec<String>)>| {
        g.sort_by(|x, y| y.1.len().cmp(&x.1.len()).then_with(|| join(x.0.iter()).cmp(&join(y.0.iter()))))
    };
    by_size(&mut groups);

    if cfg.merge_hamming > 0 {
        let mut merged: Vec<(BTreeSet<Literal>, Vec<String>)> = Vec::new();
        for (lits, ids) in groups {
            match merged.iter_mut().find(|(m, _)| hamming(m, &lits) <= cfg.merge_hamming) {
                Some((_, extent)) => extent.extend(ids),
                None => merged.push((lits, ids)),
            }
        }
        groups = merged;
        by_size(&mut groups);
    }

    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, (lits, mut extent))| {
            extent.sort();
            let intent = lits
                .into_iter()
                .map(|lit| {
                    let support = extent
                        .iter()
                        .filter(|id| store.object(id).is_some_and(|r| eval_literal(r, &lit) == Truth::True))
                        .count() as u64;
                    IntentEntry {
                        frequency: support as f64 / extent.len() as f64,
                        support,
                        literal: lit,
                    }
                })
                .collect();
            Invariant {
                id: format!("inv-{:04}", i + 1),
                intent,
                extent,
                label: None,
            }
        })
        .collect())
}

/// Clusters the context and replaces the store's invariant base.
pub fn cluster(store: &mut Store, cfg: &ContextConfig) -> Result<Vec<Invariant>, PfcError> {
    let invariants = find_invariants(store, cfg)?;
    store.replace_invariants(invariants.clone());
    Ok(invariants)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftEntry {
    pub literal: Literal,
    pub frequency: f64,
    pub population_frequency: f64,
    pub lift: f64,
}

/// Human-readable characterization of one invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Description {
    pub invariant_id: String,
    pub extent_size: usize,
    pub characteristic: Vec<LiftEntry>,
    /// Invariants whose intent is a proper subset of this one.
    pub broader: Vec<String>,
    /// Invariants whose intent is a proper superset of this one.
    pub narrower: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescribeConfig {
    pub top_k: usize,
    /// Intent literals below this extent frequency are not characteristic.
    pub min_frequency: f64,
}

impl Default for DescribeConfig {
    fn default() -> Self {
        DescribeConfig {
            top_k: 10,
            min_frequency: default_min_frequency(),
        }
    }
}

pub fn describe(invariant_id: &str, store: &Store, cfg: &DescribeConfig) -> Result<Description, PfcError> {
    let inv = store
        .invariant(invariant_id)
        .ok_or_else(|| PfcError::UnknownInvariant(invariant_id.to_string()))?;
    let types: BTreeSet<&str> = inv
        .extent
        .iter()
        .filter_map(|id| store.object(id))
        .map(|r| r.type_id.as_str())
        .collect();
    let population: Vec<&ObjectRecord> = store.objects().filter(|r| types.contains(r.type_id.as_str())).collect();
    let mut characteristic: Vec<LiftEntry> = inv
        .intent
        .iter()
        .filter(|e| e.frequency >= cfg.min_frequency && e.frequency > 0.0)
        .map(|e| {
            let hits = population
                .iter()
                .filter(|r| eval_literal(r, &e.literal) == Truth::True)
                .count();
            let pop = hits as f64 / population.len().max(1) as f64;
            LiftEntry {
                literal: e.literal.clone(),
                frequency: e.frequency,
                population_frequency: pop,
                lift: if pop > 0.0 { e.frequency / pop } else { 0.0 },
            }
        })
        .collect();
    characteristic.sort_by(|x, y| y.lift.total_cmp(&x.lift).then_with(|| x.literal.cmp(&y.literal)));
    characteristic.truncate(cfg.top_k);

    let own: BTreeSet<&Literal> = inv.intent.iter().map(|e| &e.literal).collect();
    let mut broader = Vec::new();
    let mut narrower = Vec::new();
    for other in store.invariants().filter(|o| o.id != inv.id) {
        let theirs: BTreeSet<&Literal> = other.intent.iter().map(|e| &e.literal).collect();
        if theirs.len() < own.len() && theirs.is_subset(&own) {
            broader.push(other.id.clone());
        } else if own.len() < theirs.len() && own.is_subset(&theirs) {
            narrower.push(other.id.clone());
        }
    }
    Ok(Description {
        invariant_id: inv.id.clone(),
        extent_size: inv.extent.len(),
        characteristic,
        broader,
        narrower,
    })
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invariant {}", self.invariant_id)?;
        writeln!(f, "extent: {} objects", self.extent_size)?;
        if !self.characteristic.is_empty() {
            writeln!(f, "characteristic literals (by lift):")?;
            for e in &self.characteristic {
                writeln!(
                    f,
                    "  {:<24} freq {:.3}  population {:.3}  lift {:.3}",
                    e.literal.to_string(),
                    e.frequency,
                    e.population_frequency,
                    e.lift
                )?;
            }
        }
        if !self.broader.is_empty() {
            writeln!(f, "specializes: {}", self.broader.join(", "))?;
        }
        if !self.narrower.is_empty() {
            writeln!(f, "generalizes: {}", self.narrower.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Contingency, Provenance, RuleStatus};
    use crate::synth;
    use proptest::prelude::*;

    fn lit(s: &str) -> Literal {
        Literal::parse(s).unwrap()
    }

    /// Rule with a given Laplace probability out of 98 premise-true records.
    fn rule(premise: &[&str], concl: &str, p: f64) -> Rule {
        let a = ((p * 100.0 - 1.0).round() as u64).min(98);
        Rule::new(premise.iter().map(|s| lit(s)).collect(), lit(concl), RuleStatus::Mined, Provenance::Data)
            .with_counts(Contingency { a, b: 98 - a, c: 0, d: 0 })
    }

    fn cfg() -> ContextConfig {
        ContextConfig::new(vec![])
    }

    /// Naive oracle: repeatedly scan all rules in order, one commit at a time.
    fn naive(start: &[Literal], rules: &[Rule], threshold: f64) -> BTreeSet<Literal> {
        let order = ordered(rules, threshold);
        let mut state = ClosureState::new(start.iter().cloned());
        loop {
            let snapshot = state.clone();
            let mut any = false;
            for (r, _) in &order {
                if snapshot.commitment(&r.conclusion.classifier_id).is_none()
                    && state.commitment(&r.conclusion.classifier_id).is_none()
                    && snapshot.premise_holds(&r.premise)
                {
                    state.literals.insert(r.conclusion.clone());
                    any = true;
                }
            }
            if !any {
                return state.literals;
            }
        }
    }

    #[test]
    fn two_step_chain() {
        let rules = vec![rule(&["a=1"], "b=1", 0.95), rule(&["b=1"], "c=1", 0.9)];
        let out = closure(ClosureState::new([lit("a=1")]), &rules, &cfg()).unwrap();
        let want: BTreeSet<Literal> = [lit("a=1"), lit("b=1"), lit("c=1")].into();
        assert_eq!(out.literals, want);
        assert_eq!(out.literals, naive(&[lit("a=1")], &rules, 0.8));
        assert_eq!(out.trace, vec!["a=1=>b=1".to_string(), "b=1=>c=1".to_string()]);
    }

    #[test]
    fn empty_rules_identity() {
        let s = ClosureState::new([lit("a=1"), lit("q!=2")]);
        assert_eq!(closure(s.clone(), &[], &cfg()).unwrap(), s);
    }

    #[test]
    fn higher_probability_commitment_wins() {
        let rules = vec![rule(&["a=1"], "b=1", 0.9), rule(&["a=1"], "b!=1", 0.85)];
        let out = closure(ClosureState::new([lit("a=1")]), &rules, &cfg()).unwrap();
        assert_eq!(out.literals, [lit("a=1"), lit("b=1")].into());
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn threshold_and_status_gate() {
        let mut h = rule(&["a=1"], "c=1", 0.95);
        h.status = RuleStatus::Hypothesis;
        let rules = vec![rule(&["a=1"], "b=1", 0.7), h];
        let out = closure(ClosureState::new([lit("a=1")]), &rules, &cfg()).unwrap();
        assert_eq!(out.literals.len(), 1);
    }

    #[test]
    fn inconsistent_start_and_nonconvergence() {
        let bad = ClosureState::new([lit("a=1"), lit("a=2")]);
        assert!(matches!(closure(bad, &[], &cfg()), Err(PfcError::InconsistentStart)));
        let rules = vec![rule(&["a=1"], "b=1", 0.95), rule(&["b=1"], "c=1", 0.95)];
        let mut tight = cfg();
        tight.max_iterations = 1;
        match closure(ClosureState::new([lit("a=1")]), &rules, &tight) {
            Err(PfcError::NonConvergence { state, .. }) => assert_eq!(state.literals.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_commitments_are_semantic() {
        let s = ClosureState::new([lit("a=2"), lit("b!=x")]);
        assert_eq!(s.holds(&lit("a!=1")), Truth::True);
        assert_eq!(s.holds(&lit("a=1")), Truth::False);
        assert_eq!(s.holds(&lit("b=x")), Truth::False);
        assert_eq!(s.holds(&lit("b=y")), Truth::Unevaluable);
        assert_eq!(s.holds(&lit("c=1")), Truth::Unevaluable);
    }

    fn arb_rules() -> impl Strategy<Value = Vec<Rule>> {
        let lit = (0..6usize, 0..3usize, any::<bool>()).prop_map(|(c, v, pos)| {
            if pos {
                Literal::pos(format!("k{c}"), v.to_string())
            } else {
                Literal::neg(format!("k{c}"), v.to_string())
            }
        });
        let r = (prop::collection::vec(lit.clone(), 0..3), lit, 0.5f64..1.0).prop_filter_map(
            "premise overlaps conclusion",
            |(premise, concl, p)| {
                if premise.iter().any(|l| l.classifier_id == concl.classifier_id) {
                    return None;
                }
                let ps: Vec<String> = premise.iter().map(|l| l.to_string()).collect();
                let ps: Vec<&str> = ps.iter().map(String::as_str).collect();
                Some(rule(&ps, &concl.to_string(), p))
            },
        );
        prop::collection::vec(r, 0..12)
    }

    fn arb_start() -> impl Strategy<Value = ClosureState> {
        prop::collection::btree_map(0..6usize, 0..3usize, 0..4).prop_map(|m| {
            ClosureState::new(m.into_iter().map(|(c, v)| Literal::pos(format!("k{c}"), v.to_string())))
        })
    }

    proptest! {
        #[test]
        fn closure_laws(rules in arb_rules(), start in arb_start()) {
            let out = closure(start.clone(), &rules, &cfg()).unwrap();
            prop_assert!(out.is_consistent());
            prop_assert!(start.literals.is_subset(&out.literals));
            prop_assert_eq!(&out.literals, &naive(&start.literals.iter().cloned().collect::<Vec<_>>(), &rules, 0.8));
            let again = closure(out.clone(), &rules, &cfg()).unwrap();
            prop_assert_eq!(again, out);
        }
    }

    #[test]
    fn identical_objects_form_one_invariant() {
        let names: Vec<String> = ["p", "q", "r"].iter().map(|s| s.to_string()).collect();
        let mut store = Store::new(synth::boolean_schema(&names));
        for i in 0..6 {
            store
                .insert(ObjectRecord::new(format!("o{i}"), "row").with("p", "1").with("q", "0").with("r", "1"))
                .unwrap();
        }
        let inv = cluster(&mut store, &ContextConfig::new(names)).unwrap();
        assert_eq!(inv.len(), 1);
        assert_eq!(inv[0].extent.len(), 6);
        assert!(inv[0].intent.iter().all(|e| e.frequency == 1.0));
        assert_eq!(store.invariant("inv-0001"), Some(&inv[0]));
        // Population frequency 1 everywhere: every lift is 1.
        let d = describe("inv-0001", &store, &DescribeConfig::default()).unwrap();
        assert!(d.characteristic.iter().all(|e| (e.lift - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_context() {
        let names: Vec<String> = vec!["p".into()];
        let mut store = Store::new(synth::boolean_schema(&names));
        store.insert(ObjectRecord::new("o", "row")).unwrap();
        assert!(matches!(
            cluster(&mut store, &ContextConfig::new(names)),
            Err(PfcError::EmptyContext)
        ));
        assert!(matches!(
            describe("inv-0009", &store, &DescribeConfig::default()),
            Err(PfcError::UnknownInvariant(_))
        ));
    }

    fn purity(inv: &[Invariant], labels: &BTreeMap<String, usize>) -> (f64, f64) {
        let total = labels.len() as f64;
        let top3: usize = inv.iter().take(3).map(|i| i.extent.len()).sum();
        let mut pure = 0usize;
        for i in inv.iter().take(3) {
            let mut counts = BTreeMap::new();
            for id in &i.extent {
                *counts.entry(labels[id]).or_insert(0usize) += 1;
            }
            pure += counts.values().max().copied().unwrap_or(0);
        }
        (pure as f64 / top3.max(1) as f64, top3 as f64 / total)
    }

    #[test]
    fn planted_clusters_recovered() {
        let planted = synth::planted_clusters(3, 3, 50, 4, 0.1);
        let mut store = planted.store;
        let cfg = ContextConfig::new(planted.classifiers);
        let inv = cluster(&mut store, &cfg).unwrap();
        let (purity, coverage) = purity(&inv, &planted.labels);
        assert!(purity >= 0.95, "purity {purity}");
        assert!(coverage >= 0.95, "coverage {coverage}");

        // Partition and recount.
        let mut seen = BTreeSet::new();
        for i in &inv {
            for id in &i.extent {
                assert!(seen.insert(id.clone()));
            }
            for e in &i.intent {
                let n = i
                    .extent
                    .iter()
                    .filter(|id| eval_literal(store.object(id).unwrap(), &e.literal) == Truth::True)
                    .count();
                assert!((e.frequency - n as f64 / i.extent.len() as f64).abs() < 1e-12);
            }
        }
        assert_eq!(seen.len(), store.len());

        // The largest invariant's top-4 lift literals are its cluster's own attributes.
        let d = describe(&inv[0].id, &store, &DescribeConfig::default()).unwrap();
        let label = planted.labels[&inv[0].extent[0]];
        let top: BTreeSet<String> = d.characteristic.iter().take(4).map(|e| e.literal.to_string()).collect();
        let want: BTreeSet<String> = (0..4).map(|j| format!("a{:02}=1", label * 4 + j)).collect();
        assert_eq!(top, want);

        let again = find_invariants(&store, &cfg).unwrap();
        assert_eq!(again, inv);
        let mut par = cfg.clone();
        par.mining.jobs = 3;
        assert_eq!(find_invariants(&store, &par).unwrap(), inv);
    }

    #[test]
    fn describe_empty_intent() {
        let names: Vec<String> = vec!["p".into()];
        let mut store = Store::new(synth::boolean_schema(&names));
        store.insert(ObjectRecord::new("o", "row").with("p", "1")).unwrap();
        store.replace_invariants(vec![Invariant {
            id: "inv-0001".into(),
            intent: vec![IntentEntry {
                literal: lit("p=0"),
                frequency: 0.0,
                support: 0,
            }],
            extent: vec!["o".into()],
            label: None,
        }]);
        let d = describe("inv-0001", &store, &DescribeConfig::default()).unwrap();
        assert!(d.characteristic.is_empty());
        assert_eq!(d.to_string(), "invariant inv-0001\nextent: 1 objects\n");
    }

    #[test]
    fn lift_one_ranks_last() {
        let names: Vec<String> = vec!["p".into(), "q".into()];
        let mut store = Store::new(synth::boolean_schema(&names));
        for (i, p) in ["1", "1", "0", "0"].iter().enumerate() {
            store.insert(ObjectRecord::new(format!("o{i}"), "row").with("p", p).with("q", "1")).unwrap();
        }
        store.replace_invariants(vec![Invariant {
            id: "inv-0001".into(),
            intent: vec![
                IntentEntry { literal: lit("p=1"), frequency: 1.0, support: 2 },
                IntentEntry { literal: lit("q=1"), frequency: 1.0, support: 2 },
            ],
            extent: vec!["o0".into(), "o1".into()],
            label: None,
        }]);
        let d = describe("inv-0001", &store, &DescribeConfig::default()).unwrap();
        assert_eq!(d.characteristic[0].literal, lit("p=1"));
        assert!((d.characteristic[0].lift - 2.0).abs() < 1e-12);
        assert_eq!(d.characteristic[1].lift, 1.0);
    }
}
