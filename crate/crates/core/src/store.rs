//! Cognitive database: object base, rule base and invariant base.
//!
//! The store is single-writer. Every successful mutation bumps a monotone
//! revision counter; readers clone or borrow a consistent snapshot.
//! Persistence is one canonical JSON Lines file per collection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{OntoKind, Schema};
use crate::tfs::{Expectation, ReinforcementEvent};

pub type Timestamp = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// `classifier = code` (positive) or `classifier != code` (negative).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub classifier_id: String,
    pub category_code: String,
    pub polarity: Polarity,
}

impl Literal {
    pub fn pos(classifier: impl Into<String>, code: impl Into<String>) -> Self {
        Literal {
            classifier_id: classifier.into(),
            category_code: code.into(),
            polarity: Polarity::Positive,
        }
    }

    pub fn neg(classifier: impl Into<String>, code: impl Into<String>) -> Self {
        Literal {
            classifier_id: classifier.into(),
            category_code: code.into(),
            polarity: Polarity::Negative,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    pub fn negated(&self) -> Self {
        Literal {
            polarity: match self.polarity {
                Polarity::Positive => Polarity::Negative,
                Polarity::Negative => Polarity::Positive,
            },
            ..self.clone()
        }
    }

    /// Truth value against a classifier's assigned code (`None` = unassigned).
    pub fn eval_code(&self, assigned: Option<&str>) -> Truth {
        match assigned {
            None => Truth::Unevaluable,
            Some(code) => {
                let eq = code == self.category_code;
                Truth::from(if self.is_positive() { eq } else { !eq })
            }
        }
    }

    /// Parses `c=v` or `c!=v`.
    pub fn parse(text: &str) -> Option<Literal> {
        if let Some((c, v)) = text.split_once("!=") {
            return (!c.is_empty() && !v.is_empty()).then(|| Literal::neg(c.trim(), v.trim()));
        }
        let (c, v) = text.split_once('=')?;
        (!c.is_empty() && !v.is_empty()).then(|| Literal::pos(c.trim(), v.trim()))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.is_positive() { "=" } else { "!=" };
        write!(f, "{}{}{}", self.classifier_id, op, self.category_code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Unevaluable,
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

/// Partial classifier → category assignment.
pub type Assignment = BTreeMap<String, String>;

/// Conjunction semantics: any unevaluable literal makes the whole
/// conjunction unevaluable; otherwise false if any literal is false.
pub fn eval_conjunction<'a>(
    assignment: &Assignment,
    literals: impl IntoIterator<Item = &'a Literal>,
) -> Truth {
    let mut out = Truth::True;
    for lit in literals {
        match lit.eval_code(assignment.get(&lit.classifier_id).map(String::as_str)) {
            Truth::Unevaluable => return Truth::Unevaluable,
            Truth::False => out = Truth::False,
            Truth::True => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub role: String,
    pub target: String,
}

/// An instance or precedent in the object base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub type_id: String,
    #[serde(default)]
    pub assignments: Assignment,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub time_start: Option<Timestamp>,
    #[serde(default)]
    pub time_end: Option<Timestamp>,
    #[serde(default)]
    pub parent_process: Option<String>,
}

impl ObjectRecord {
    pub fn new(id: impl Into<String>, type_id: impl Into<String>) -> Self {
        ObjectRecord {
            id: id.into(),
            type_id: type_id.into(),
            assignments: Assignment::new(),
            relations: Vec::new(),
            time_start: None,
            time_end: None,
            parent_process: None,
        }
    }

    pub fn with(mut self, classifier: &str, code: &str) -> Self {
        self.assignments.insert(classifier.into(), code.into());
        self
    }

    pub fn at(mut self, t: Timestamp) -> Self {
        self.time_start = Some(t);
        self
    }

    pub fn in_process(mut self, parent: &str) -> Self {
        self.parent_process = Some(parent.into());
        self
    }
}

pub fn eval_literal(record: &ObjectRecord, lit: &Literal) -> Truth {
    lit.eval_code(record.assignments.get(&lit.classifier_id).map(String::as_str))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleStatus {
    Mined,
    Hypothesis,
    Confirmed,
    Retired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Data,
    Deduction,
    Induction,
    Abduction,
    Manual,
}

/// 2×2 table of premise × conclusion over evaluable records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contingency {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Contingency {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

/// Canonical rule key: sorted premise literals joined by `&`, then `=>`.
pub fn rule_key(premise: &[Literal], conclusion: &Literal) -> String {
    let mut sorted: Vec<&Literal> = premise.iter().collect();
    sorted.sort();
    let lhs: Vec<String> = sorted.iter().map(|l| l.to_string()).collect();
    format!("{}=>{}", lhs.join("&"), conclusion)
}

/// Conjunctive premise → single literal conclusion, with two evidence
/// ledgers: data counts `a..d` and reinforcement pseudo-counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub premise: Vec<Literal>,
    pub conclusion: Literal,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub r_pos: f64,
    pub r_neg: f64,
    pub p_value: f64,
    pub status: RuleStatus,
    pub provenance: Provenance,
    /// Probability assigned when a hypothesis was generated, before any evidence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provisional_probability: Option<f64>,
}

impl Rule {
    /// A rule with zeroed counters. The premise is sorted and deduplicated.
    pub fn new(
        mut premise: Vec<Literal>,
        conclusion: Literal,
        status: RuleStatus,
        provenance: Provenance,
    ) -> Self {
        premise.sort();
        premise.dedup();
        Rule {
            id: rule_key(&premise, &conclusion),
            premise,
            conclusion,
            a: 0,
            b: 0,
            c: 0,
            d: 0,
            r_pos: 0.0,
            r_neg: 0.0,
            p_value: 1.0,
            status,
            provenance,
            provisional_probability: None,
        }
    }

    pub fn with_counts(mut self, t: Contingency) -> Self {
        self.set_counts(t);
        self
    }

    pub fn set_counts(&mut self, t: Contingency) {
        self.a = t.a;
        self.b = t.b;
        self.c = t.c;
        self.d = t.d;
    }

    pub fn counts(&self) -> Contingency {
        Contingency {
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
        }
    }

    pub fn premise_classifiers(&self) -> BTreeSet<&str> {
        self.premise.iter().map(|l| l.classifier_id.as_str()).collect()
    }

    /// Rules that may take part in prediction and closure.
    pub fn is_active(&self) -> bool {
        matches!(self.status, RuleStatus::Mined | RuleStatus::Confirmed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentEntry {
    pub literal: Literal,
    pub frequency: f64,
    pub support: u64,
}

/// A fixed point shared by a group of objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub id: String,
    pub intent: Vec<IntentEntry>,
    pub extent: Vec<String>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Objects,
    Rules,
    Invariants,
    Expectations,
    Events,
}

impl ExportKind {
    pub const ALL: [ExportKind; 5] = [
        ExportKind::Objects,
        ExportKind::Rules,
        ExportKind::Invariants,
        ExportKind::Expectations,
        ExportKind::Events,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ExportKind::Objects => "objects.jsonl",
            ExportKind::Rules => "rules.jsonl",
            ExportKind::Invariants => "invariants.jsonl",
            ExportKind::Expectations => "expectations.jsonl",
            ExportKind::Events => "events.jsonl",
        }
    }

    pub fn parse(name: &str) -> Option<ExportKind> {
        let stem = name.trim_end_matches(".jsonl");
        ExportKind::ALL
            .into_iter()
            .find(|k| k.file_name().trim_end_matches(".jsonl") == stem)
    }

    /// Infers the kind from a file name such as `.../rules.jsonl`.
    pub fn from_path(path: &Path) -> Option<ExportKind> {
        path.file_name()
            .and_then(|n| n.to_str())
            .and_then(ExportKind::parse)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record {id:?} violates the schema: {reason}")]
    SchemaViolation { id: String, reason: String },
    #[error("premise and conclusion share classifier {0:?}")]
    OverlappingClassifiers(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("unknown {what} {id:?}")]
    Unknown { what: &'static str, id: String },
}

fn violation(id: &str, reason: impl Into<String>) -> StoreError {
    StoreError::SchemaViolation {
        id: id.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    schema: Arc<Schema>,
    objects: BTreeMap<String, ObjectRecord>,
    object_revisions: BTreeMap<String, u64>,
    rules: BTreeMap<String, Rule>,
    invariants: BTreeMap<String, Invariant>,
    expectations: BTreeMap<String, Expectation>,
    events: BTreeMap<String, ReinforcementEvent>,
    revision: u64,
}

impl Store {
    pub fn new(schema: Arc<Schema>) -> Self {
        Store {
            schema,
            objects: BTreeMap::new(),
            object_revisions: BTreeMap::new(),
            rules: BTreeMap::new(),
            invariants: BTreeMap::new(),
            expectations: BTreeMap::new(),
            events: BTreeMap::new(),
            revision: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    // ---- objects ----

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectRecord> {
        self.objects.get(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.objects.values()
    }

    /// Revision at which the record was last written.
    pub fn object_revision(&self, id: &str) -> Option<u64> {
        self.object_revisions.get(id).copied()
    }

    /// Records of the given type, or all records when `scope` is `None`.
    pub fn scoped<'a>(&'a self, scope: Option<&'a str>) -> impl Iterator<Item = &'a ObjectRecord> {
        self.objects
            .values()
            .filter(move |r| scope.is_none_or(|t| r.type_id == t))
    }

    /// Latest timestamp seen on any record.
    pub fn clock(&self) -> Option<Timestamp> {
        self.objects
            .values()
            .flat_map(|r| [r.time_start, r.time_end])
            .flatten()
            .max()
    }

    /// Validates a record against the schema. `pending` holds records being
    /// inserted in the same batch, so references between them resolve.
    fn check(
        &self,
        record: &ObjectRecord,
        pending: &BTreeMap<&str, &ObjectRecord>,
    ) -> Result<(), StoreError> {
        let id = record.id.as_str();
        if id.is_empty() {
            return Err(violation(id, "empty id"));
        }
        let ty = self
            .schema
            .object_type(&record.type_id)
            .ok_or_else(|| violation(id, format!("unknown type {:?}", record.type_id)))?;
        if ty.onto_kind.is_invariant_kind() {
            return Err(violation(
                id,
                format!("type {:?} is an invariant kind", ty.id),
            ));
        }
        for (cid, code) in &record.assignments {
            if !ty.declares(cid) {
                return Err(violation(id, format!("attribute {cid:?} not declared on {:?}", ty.id)));
            }
            let c = self
                .schema
                .classifier(cid)
                .ok_or_else(|| violation(id, format!("unknown classifier {cid:?}")))?;
            if !c.has_code(code) {
                return Err(violation(id, format!("{code:?} outside domain of {cid:?}")));
            }
        }
        if !ty.onto_kind.is_temporal() && (record.time_start.is_some() || record.time_end.is_some())
        {
            return Err(violation(id, "time fields on a non-temporal kind"));
        }
        if let (Some(s), Some(e)) = (record.time_start, record.time_end) {
            if e < s {
                return Err(violation(id, "time_end before time_start"));
            }
        }
        let lookup = |target: &str| {
            pending
                .get(target)
                .copied()
                .or_else(|| self.objects.get(target))
        };
        for rel in &record.relations {
            let slot = ty
                .relation_slots
                .iter()
                .find(|s| s.role == rel.role)
                .ok_or_else(|| violation(id, format!("undeclared relation role {:?}", rel.role)))?;
            let target = lookup(&rel.target)
                .ok_or_else(|| violation(id, format!("relation target {:?} missing", rel.target)))?;
            if target.type_id != slot.target {
                return Err(violation(
                    id,
                    format!("relation {:?} expects type {:?}", rel.role, slot.target),
                ));
            }
        }
        if let Some(parent) = &record.parent_process {
            let p = lookup(parent)
                .ok_or_else(|| violation(id, format!("parent process {parent:?} missing")))?;
            let kind = self.schema.object_type(&p.type_id).map(|t| t.onto_kind);
            if kind != Some(OntoKind::Process) {
                return Err(violation(id, format!("parent {parent:?} is not a process")));
            }
        }
        Ok(())
    }

    /// Upserts a record. Returns the new revision.
    pub fn insert(&mut self, record: ObjectRecord) -> Result<u64, StoreError> {
        self.check(&record, &BTreeMap::new())?;
        let rev = self.bump();
        self.object_revisions.insert(record.id.clone(), rev);
        self.objects.insert(record.id.clone(), record);
        Ok(rev)
    }

    /// Validates the whole batch first and inserts nothing on failure.
    pub fn insert_batch(&mut self, records: Vec<ObjectRecord>) -> Result<u64, StoreError> {
        {
            let pending: BTreeMap<&str, &ObjectRecord> =
                records.iter().map(|r| (r.id.as_str(), r)).collect();
            for r in &records {
                self.check(r, &pending)?;
            }
        }
        for r in records {
            let rev = self.bump();
            self.object_revisions.insert(r.id.clone(), rev);
            self.objects.insert(r.id.clone(), r);
        }
        Ok(self.revision)
    }

    /// Full-scan 2×2 table for `premise ⇒ conclusion`.
    ///
    /// Records where a needed classifier is unassigned are excluded.
    pub fn contingency(
        &self,
        premise: &[Literal],
        conclusion: &Literal,
        scope: Option<&str>,
    ) -> Result<Contingency, StoreError> {
        if let Some(l) = premise
            .iter()
            .find(|l| l.classifier_id == conclusion.classifier_id)
        {
            return Err(StoreError::OverlappingClassifiers(l.classifier_id.clone()));
        }
        let mut t = Contingency::default();
        for record in self.scoped(scope) {
            let p = eval_conjunction(&record.assignments, premise);
            let c = eval_literal(record, conclusion);
            match (p, c) {
                (Truth::True, Truth::True) => t.a += 1,
                (Truth::True, Truth::False) => t.b += 1,
                (Truth::False, Truth::True) => t.c += 1,
                (Truth::False, Truth::False) => t.d += 1,
                _ => {}
            }
        }
        Ok(t)
    }

    // ---- rules ----

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.get(id)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn put_rule(&mut self, rule: Rule) {
        self.bump();
        self.rules.insert(rule.id.clone(), rule);
    }

    pub fn remove_rule(&mut self, id: &str) -> Option<Rule> {
        let removed = self.rules.remove(id);
        if removed.is_some() {
            self.bump();
        }
        removed
    }

    pub fn clear_rules(&mut self) {
        self.bump();
        self.rules.clear();
    }

    // ---- invariants ----

    pub fn invariant(&self, id: &str) -> Option<&Invariant> {
        self.invariants.get(id)
    }

    pub fn invariants(&self) -> impl Iterator<Item = &Invariant> {
        self.invariants.values()
    }

    /// Replaces the whole invariant base.
    pub fn replace_invariants(&mut self, invariants: Vec<Invariant>) {
        self.bump();
        self.invariants = invariants.into_iter().map(|i| (i.id.clone(), i)).collect();
    }

    // ---- acceptor ledgers ----

    pub fn expectation(&self, id: &str) -> Option<&Expectation> {
        self.expectations.get(id)
    }

    pub fn expectations(&self) -> impl Iterator<Item = &Expectation> {
        self.expectations.values()
    }

    pub fn put_expectation(&mut self, exp: Expectation) {
        self.bump();
        self.expectations.insert(exp.id.clone(), exp);
    }

    pub fn events(&self) -> impl Iterator<Item = &ReinforcementEvent> {
        self.events.values()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn push_event(&mut self, event: ReinforcementEvent) {
        self.bump();
        self.events.insert(event.id.clone(), event);
    }

    pub fn next_expectation_id(&self) -> String {
        format!("exp-{:06}", self.expectations.len() + 1)
    }

    pub fn next_event_id(&self) -> String {
        format!("evt-{:06}", self.events.len() + 1)
    }

    // ---- persistence ----

    /// Canonical JSON Lines for one collection, ordered by id.
    pub fn export_string(&self, kind: ExportKind) -> String {
        fn lines<'a, T: Serialize + 'a>(items: impl Iterator<Item = &'a T>) -> String {
            let mut out = String::new();
            for item in items {
                out.push_str(&canonical_json(item));
                out.push('\n');
            }
            out
        }
        match kind {
            ExportKind::Objects => lines(self.objects.values()),
            ExportKind::Rules => lines(self.rules.values()),
            ExportKind::Invariants => lines(self.invariants.values()),
            ExportKind::Expectations => lines(self.expectations.values()),
            ExportKind::Events => lines(self.events.values()),
        }
    }

    pub fn export(&self, kind: ExportKind, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.export_string(kind).as_bytes())?;
        Ok(())
    }

    /// Parses and validates every line before merging anything.
    pub fn import_str(&mut self, kind: ExportKind, text: &str) -> Result<usize, StoreError> {
        match kind {
            ExportKind::Objects => {
                let records: Vec<ObjectRecord> = parse_lines(text)?;
                let n = records.len();
                self.insert_batch(records)?;
                Ok(n)
            }
            ExportKind::Rules => {
                let rules: Vec<Rule> = parse_lines(text)?;
                for (i, r) in rules.iter().enumerate() {
                    let key = rule_key(&r.premise, &r.conclusion);
                    if key != r.id {
                        return Err(StoreError::Format {
                            line: i + 1,
                            reason: format!("rule id {:?} is not canonical ({key:?})", r.id),
                        });
                    }
                }
                let n = rules.len();
                for r in rules {
                    self.put_rule(r);
                }
                Ok(n)
            }
            ExportKind::Invariants => {
                let invs: Vec<Invariant> = parse_lines(text)?;
                let n = invs.len();
                for inv in invs {
                    self.bump();
                    self.invariants.insert(inv.id.clone(), inv);
                }
                Ok(n)
            }
            ExportKind::Expectations => {
                let exps: Vec<Expectation> = parse_lines(text)?;
                let n = exps.len();
                for e in exps {
                    self.put_expectation(e);
                }
                Ok(n)
            }
            ExportKind::Events => {
                let evs: Vec<ReinforcementEvent> = parse_lines(text)?;
                let n = evs.len();
                for e in evs {
                    self.push_event(e);
                }
                Ok(n)
            }
        }
    }

    pub fn import(&mut self, kind: ExportKind, path: impl AsRef<Path>) -> Result<usize, StoreError> {
        let text = fs::read_to_string(path)?;
        self.import_str(kind, &text)
    }

    /// Loads every collection file present in `dir`.
    pub fn open(schema: Arc<Schema>, dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        let mut store = Store::new(schema);
        for kind in ExportKind::ALL {
            let path = dir.as_ref().join(kind.file_name());
            if path.exists() {
                store.import(kind, &path)?;
            }
        }
        Ok(store)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        for kind in ExportKind::ALL {
            self.export(kind, dir.as_ref().join(kind.file_name()))?;
        }
        Ok(())
    }
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("store types serialize");
    serde_json::to_string(&v).expect("json value serializes")
}

fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, StoreError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Format {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
