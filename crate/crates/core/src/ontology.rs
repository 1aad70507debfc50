//! Metadata base: classifiers, object types and the upper-ontology taxonomy.
//!
//! A [`Schema`] is loaded from JSON, validated once and then shared
//! read-only (usually behind an `Arc`). Validation is total: every finding
//! is collected and reported together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::Literal;
use crate::taskd::SuccessFunctionDef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Categorical,
    Boolean,
    BinnedNumeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDef {
    pub code: String,
    pub label: String,
}

fn default_missing_tokens() -> Vec<String> {
    vec![String::new()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierDef {
    pub id: String,
    pub name: String,
    pub kind: ClassifierKind,
    pub domain: Vec<CategoryDef>,
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_thresholds: Option<Vec<f64>>,
    /// Extra CSV header spellings accepted for this classifier.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl ClassifierDef {
    pub fn category(&self, code: &str) -> Option<&CategoryDef> {
        self.domain.iter().find(|c| c.code == code)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.category(code).is_some()
    }
}

/// Upper-ontology kind of an object type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OntoKind {
    Entity,
    State,
    Action,
    Coincidence,
    Process,
    Image,
    Scene,
    Scenario,
    Fork,
    Phenomenon,
}

impl OntoKind {
    /// Events and processes are the only kinds that live in time.
    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            OntoKind::State | OntoKind::Action | OntoKind::Coincidence | OntoKind::Process
        )
    }

    /// Kinds that name abstract invariants rather than recorded instances.
    pub fn is_invariant_kind(self) -> bool {
        matches!(
            self,
            OntoKind::Image
                | OntoKind::Scene
                | OntoKind::Scenario
                | OntoKind::Fork
                | OntoKind::Phenomenon
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSlot {
    pub role: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectTypeDef {
    pub id: String,
    pub name: String,
    pub onto_kind: OntoKind,
    pub attribute_ids: Vec<String>,
    #[serde(default)]
    pub relation_slots: Vec<RelationSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_process_type: Option<String>,
}

impl ObjectTypeDef {
    pub fn declares(&self, classifier_id: &str) -> bool {
        self.attribute_ids.iter().any(|a| a == classifier_id)
    }
}

/// One validation problem. A schema is valid iff it yields no findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    DuplicateId(String),
    DanglingReference(String),
    DuplicateCode { classifier: String, code: String },
    EmptyCode { classifier: String },
    BadBooleanDomain { classifier: String, size: usize },
    BadBinning { classifier: String, reason: String },
    BadParentType { object_type: String, parent: String },
    BadSuccessFunction { name: String, reason: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            Finding::DanglingReference(id) => write!(f, "dangling reference {id:?}"),
            Finding::DuplicateCode { classifier, code } => {
                write!(f, "classifier {classifier:?}: duplicate category code {code:?}")
            }
            Finding::EmptyCode { classifier } => {
                write!(f, "classifier {classifier:?}: empty category code")
            }
            Finding::BadBooleanDomain { classifier, size } => write!(
                f,
                "classifier {classifier:?}: boolean needs exactly 2 categories, has {size}"
            ),
            Finding::BadBinning { classifier, reason } => {
                write!(f, "classifier {classifier:?}: {reason}")
            }
            Finding::BadParentType { object_type, parent } => write!(
                f,
                "object type {object_type:?}: parent process type {parent:?} is not a process"
            ),
            Finding::BadSuccessFunction { name, reason } => {
                write!(f, "success function {name:?}: {reason}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read schema: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema has {} problem(s): {}", .0.len(), join_findings(.0))]
    Invalid(Vec<Finding>),
    #[error("unknown classifier {0:?}")]
    UnknownClassifier(String),
    #[error("value {raw:?} is not in the domain of classifier {classifier:?}")]
    UnknownCategory { classifier: String, raw: String },
    #[error("cannot derive bins from an empty input")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    ZeroBins,
}

fn join_findings(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl OntologyError {
    pub fn findings(&self) -> &[Finding] {
        match self {
            OntologyError::Invalid(f) => f,
            _ => &[],
        }
    }
}

/// Serialized form of a schema file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SchemaFile {
    classifiers: Vec<ClassifierDef>,
    object_types: Vec<ObjectTypeDef>,
    #[serde(default)]
    success_functions: Vec<SuccessFunctionDef>,
}

#[derive(Debug, Clone)]
pub struct Schema {
    pub classifiers: Vec<ClassifierDef>,
    pub object_types: Vec<ObjectTypeDef>,
    pub success_functions: Vec<SuccessFunctionDef>,
    classifier_index: BTreeMap<String, usize>,
    type_index: BTreeMap<String, usize>,
}

impl Schema {
    /// Builds and validates a schema.
    pub fn new(
        classifiers: Vec<ClassifierDef>,
        object_types: Vec<ObjectTypeDef>,
        success_functions: Vec<SuccessFunctionDef>,
    ) -> Result<Self, OntologyError> {
        let mut schema = Schema {
            classifier_index: BTreeMap::new(),
            type_index: BTreeMap::new(),
            classifiers,
            object_types,
            success_functions,
        };
        // First occurrence wins in the index; duplicates are reported by validate.
        for (i, c) in schema.classifiers.iter().enumerate() {
            schema.classifier_index.entry(c.id.clone()).or_insert(i);
        }
        for (i, t) in schema.object_types.iter().enumerate() {
            schema.type_index.entry(t.id.clone()).or_insert(i);
        }
        let findings = schema.validate();
        if findings.is_empty() {
            Ok(schema)
        } else {
            Err(OntologyError::Invalid(findings))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let file: SchemaFile = serde_json::from_str(text)?;
        Schema::new(file.classifiers, file.object_types, file.success_functions)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            classifiers: self.classifiers.clone(),
            object_types: self.object_types.clone(),
            success_functions: self.success_functions.clone(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn classifier(&self, id: &str) -> Option<&ClassifierDef> {
        self.classifier_index.get(id).map(|&i| &self.classifiers[i])
    }

    pub fn object_type(&self, id: &str) -> Option<&ObjectTypeDef> {
        self.type_index.get(id).map(|&i| &self.object_types[i])
    }

    pub fn success_function(&self, name: &str) -> Option<&SuccessFunctionDef> {
        self.success_functions.iter().find(|f| f.name == name)
    }

    /// True when the literal names an existing classifier and category.
    pub fn literal_resolves(&self, lit: &Literal) -> bool {
        self.classifier(&lit.classifier_id)
            .is_some_and(|c| c.has_code(&lit.category_code))
    }

    /// Collects every violation of the schema invariants.
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();

        let mut seen = BTreeSet::new();
        for c in &self.classifiers {
            if !seen.insert(c.id.as_str()) {
                findings.push(Finding::DuplicateId(c.id.clone()));
            }
            validate_classifier(c, &mut findings);
        }

        let mut seen_types = BTreeSet::new();
        for t in &self.object_types {
            if !seen_types.insert(t.id.as_str()) {
                findings.push(Finding::DuplicateId(t.id.clone()));
            }
            for a in &t.attribute_ids {
                if self.classifier(a).is_none() {
                    findings.push(Finding::DanglingReference(a.clone()));
                }
            }
            for slot in &t.relation_slots {
                if self.object_type(&slot.target).is_none() {
                    findings.push(Finding::DanglingReference(slot.target.clone()));
                }
            }
            if let Some(parent) = &t.parent_process_type {
                match self.object_type(parent) {
                    None => findings.push(Finding::DanglingReference(parent.clone())),
                    Some(p) if p.onto_kind != OntoKind::Process => {
                        findings.push(Finding::BadParentType {
                            object_type: t.id.clone(),
                            parent: parent.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }

        let mut seen_fns = BTreeSet::new();
        for f in &self.success_functions {
            if !seen_fns.insert(f.name.as_str()) {
                findings.push(Finding::DuplicateId(f.name.clone()));
            }
            self.validate_success_function(f, &mut findings);
        }
        findings
    }

    fn validate_success_function(&self, f: &SuccessFunctionDef, findings: &mut Vec<Finding>) {
        let bad = |reason: String| Finding::BadSuccessFunction {
            name: f.name.clone(),
            reason,
        };
        match self.object_type(&f.scope_type) {
            None => findings.push(Finding::DanglingReference(f.scope_type.clone())),
            Some(t) if t.onto_kind != OntoKind::Process => {
                findings.push(bad(format!("scope type {:?} is not a process", f.scope_type)))
            }
            Some(_) => {}
        }
        for pattern in [&f.trigger, &f.goal] {
            if let Some(t) = &pattern.type_id {
                if self.object_type(t).is_none() {
                    findings.push(Finding::DanglingReference(t.clone()));
                }
            }
            for lit in &pattern.literals {
                if self.classifier(&lit.classifier_id).is_none() {
                    findings.push(Finding::DanglingReference(lit.classifier_id.clone()));
                } else if !self.literal_resolves(lit) {
                    findings.push(Finding::DanglingReference(format!(
                        "{}={}",
                        lit.classifier_id, lit.category_code
                    )));
                }
            }
        }
        if !(f.window > 0) {
            findings.push(bad("window must be positive".into()));
        }
        for (what, r) in [("achieved", f.reward_map.achieved), ("missed", f.reward_map.missed)] {
            if !(0.0..=1.0).contains(&r) {
                findings.push(bad(format!("{what} reward {r} outside [0,1]")));
            }
        }
    }
}

fn validate_classifier(c: &ClassifierDef, findings: &mut Vec<Finding>) {
    let mut codes = BTreeSet::new();
    for cat in &c.domain {
        if cat.code.is_empty() {
            findings.push(Finding::EmptyCode {
                classifier: c.id.clone(),
            });
        } else if !codes.insert(cat.code.as_str()) {
            findings.push(Finding::DuplicateCode {
                classifier: c.id.clone(),
                code: cat.code.clone(),
            });
        }
    }
    let bad = |reason: &str| Finding::BadBinning {
        classifier: c.id.clone(),
        reason: reason.to_string(),
    };
    match c.kind {
        ClassifierKind::Boolean if c.domain.len() != 2 => {
            findings.push(Finding::BadBooleanDomain {
                classifier: c.id.clone(),
                size: c.domain.len(),
            })
        }
        ClassifierKind::BinnedNumeric => match &c.bin_thresholds {
            None => findings.push(bad("binned_numeric requires bin_thresholds")),
            Some(t) => {
                if c.domain.len() != t.len() + 1 {
                    findings.push(bad("domain size must equal threshold count + 1"));
                }
                if t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[0] > w[1]) {
                    findings.push(bad("bin_thresholds must be finite and ascending"));
                }
            }
        },
        _ if c.bin_thresholds.is_some() => {
            findings.push(bad("bin_thresholds only allowed on binned_numeric"))
        }
        _ => {}
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, OntologyError> {
    let text = std::fs::read_to_string(path)?;
    Schema::from_json(&text)
}

/// Result of [`derive_bins`].
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    /// `k - 1` ascending thresholds.
    pub thresholds: Vec<f64>,
    /// Number of input values landing in each of the `k` bins.
    pub counts: Vec<usize>,
}

impl Binning {
    pub fn bin(&self, x: f64) -> usize {
        bin_index(&self.thresholds, x)
    }

    /// Bins that received no input value.
    pub fn degenerate_bins(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&b| self.counts[b] == 0).collect()
    }

    pub fn effective_bins(&self) -> usize {
        self.counts.iter().filter(|&&n| n > 0).count()
    }
}

/// Bin index of `x`: the number of thresholds strictly below it.
pub fn bin_index(thresholds: &[f64], x: f64) -> usize {
    thresholds.iter().filter(|&&t| t < x).count()
}

/// Empirical quantile with linear interpolation between closest order
/// statistics (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Splits `values` into `k` quantile bins. Non-finite values are ignored.
pub fn derive_bins(values: &[f64], k: usize) -> Result<Binning, OntologyError> {
    if k == 0 {
        return Err(OntologyError::ZeroBins);
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(OntologyError::EmptyInput);
    }
    sorted.sort_by(f64::total_cmp);
    let thresholds: Vec<f64> = (1..k)
        .map(|i| quantile(&sorted, i as f64 / k as f64))
        .collect();
    let mut counts = vec![0; k];
    for &v in &sorted {
        counts[bin_index(&thresholds, v)] += 1;
    }
    Ok(Binning { thresholds, counts })
}

/// Outcome of resolving a raw cell value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Assigned(String),
    Unassigned,
}

/// Maps a raw text value onto a category of `classifier`.
///
/// Missing tokens resolve to [`Resolved::Unassigned`]. Other values match a
/// category code first, then a label; binned classifiers parse numbers and
/// bin them.
pub fn resolve(schema: &Schema, classifier: &str, raw: &str) -> Result<Resolved, OntologyError> {
    let c = schema
        .classifier(classifier)
        .ok_or_else(|| OntologyError::UnknownClassifier(classifier.to_string()))?;
    let value = raw.trim();
    if c.missing_tokens.iter().any(|m| m.trim() == value) {
        return Ok(Resolved::Unassigned);
    }
    if c.kind == ClassifierKind::BinnedNumeric {
        if let (Ok(x), Some(t)) = (value.parse::<f64>(), &c.bin_thresholds) {
            if x.is_finite() {
                let b = bin_index(t, x);
                if let Some(cat) = c.domain.get(b) {
                    return Ok(Resolved::Assigned(cat.code.clone()));
                }
            }
        }
    }
    c.domain
        .iter()
        .find(|cat| cat.code == value)
        .or_else(|| c.domain.iter().find(|cat| cat.label == value))
        .map(|cat| Resolved::Assigned(cat.code.clone()))
        .ok_or_else(|| OntologyError::UnknownCategory {
            classifier: classifier.to_string(),
            raw: raw.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(code: &str) -> CategoryDef {
        CategoryDef {
            code: code.into(),
            label: code.into(),
        }
    }

    fn classifier(id: &str, codes: &[&str]) -> ClassifierDef {
        ClassifierDef {
            id: id.into(),
            name: id.into(),
            kind: ClassifierKind::Categorical,
            domain: codes.iter().map(|c| cat(c)).collect(),
            missing_tokens: vec![String::new()],
            bin_thresholds: None,
            aliases: vec![],
        }
    }

    fn object_type(id: &str, attrs: &[&str]) -> ObjectTypeDef {
        ObjectTypeDef {
            id: id.into(),
            name: id.into(),
            onto_kind: OntoKind::Entity,
            attribute_ids: attrs.iter().map(|a| a.to_string()).collect(),
            relation_slots: vec![],
            parent_process_type: None,
        }
    }

    const THREE: &str = r#"{
        "classifiers": [
            {"id": "color", "name": "Color", "kind": "categorical",
             "domain": [{"code": "red", "label": "Red"}, {"code": "blue", "label": "Blue"}]},
            {"id": "sex", "name": "Sex", "kind": "boolean",
             "domain": [{"code": "1", "label": "F"}, {"code": "2", "label": "M"}],
             "missing_tokens": ["Не указана", ""]},
            {"id": "photos", "name": "Photos", "kind": "binned_numeric",
             "domain": [{"code": "few", "label": "few"}, {"code": "many", "label": "many"}],
             "bin_thresholds": [10]}
        ],
        "object_types": [
            {"id": "user", "name": "User", "onto_kind": "entity",
             "attribute_ids": ["color", "sex", "photos"]}
        ],
        "success_functions": []
    }"#;

    #[test]
    fn loads_valid_schema() {
        let s = Schema::from_json(THREE).unwrap();
        assert_eq!(s.classifiers.len(), 3);
        assert_eq!(s.object_types.len(), 1);
        assert!(s.validate().is_empty());
        // Re-validating a serialized copy is still clean.
        let again = Schema::from_json(&s.to_json()).unwrap();
        assert!(again.validate().is_empty());
    }

    #[test]
    fn duplicate_classifier_id() {
        let err = Schema::new(
            vec![classifier("color", &["a"]), classifier("color", &["b"])],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.findings(), &[Finding::DuplicateId("color".into())]);
    }

    #[test]
    fn dangling_attribute() {
        let err = Schema::new(
            vec![classifier("color", &["a"])],
            vec![object_type("thing", &["colr"])],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.findings(), &[Finding::DanglingReference("colr".into())]);
    }

    #[test]
    fn all_findings_reported() {
        let mut boolean = classifier("flag", &["y"]);
        boolean.kind = ClassifierKind::Boolean;
        let err = Schema::new(
            vec![classifier("c", &["x", "x"]), boolean],
            vec![object_type("t", &["nope", "c"])],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.findings().len(), 3);
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            Schema::from_json("{\"classifiers\": 3"),
            Err(OntologyError::Parse(_))
        ));
    }

    #[test]
    fn binning_shape_checked() {
        let mut c = classifier("n", &["lo", "hi"]);
        c.kind = ClassifierKind::BinnedNumeric;
        c.bin_thresholds = Some(vec![1.0, 2.0]);
        let err = Schema::new(vec![c], vec![], vec![]).unwrap_err();
        assert!(matches!(err.findings()[0], Finding::BadBinning { .. }));
    }

    #[test]
    fn median_of_one_to_hundred() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let b = derive_bins(&values, 2).unwrap();
        assert_eq!(b.thresholds, vec![50.5]);
        assert_eq!(b.counts, vec![50, 50]);
    }

    #[test]
    fn constant_input_collapses() {
        let b = derive_bins(&[7.0; 20], 4).unwrap();
        assert_eq!(b.thresholds, vec![7.0, 7.0, 7.0]);
        assert_eq!(b.effective_bins(), 1);
        assert_eq!(b.degenerate_bins(), vec![1, 2, 3]);
    }

    #[test]
    fn single_bin_has_no_thresholds() {
        let b = derive_bins(&[3.0, 1.0], 1).unwrap();
        assert!(b.thresholds.is_empty());
        assert_eq!(b.counts, vec![2]);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(derive_bins(&[], 3), Err(OntologyError::EmptyInput)));
    }

    #[test]
    fn resolve_cases() {
        let s = Schema::from_json(THREE).unwrap();
        assert_eq!(resolve(&s, "sex", "Не указана").unwrap(), Resolved::Unassigned);
        assert_eq!(resolve(&s, "sex", "2").unwrap(), Resolved::Assigned("2".into()));
        assert_eq!(resolve(&s, "sex", "F").unwrap(), Resolved::Assigned("1".into()));
        assert_eq!(resolve(&s, "photos", "3").unwrap(), Resolved::Assigned("few".into()));
        assert_eq!(resolve(&s, "photos", "10").unwrap(), Resolved::Assigned("few".into()));
        assert_eq!(resolve(&s, "photos", "10.5").unwrap(), Resolved::Assigned("many".into()));
        assert!(matches!(
            resolve(&s, "color", "purple"),
            Err(OntologyError::UnknownCategory { .. })
        ));
        assert!(matches!(
            resolve(&s, "nope", "x"),
            Err(OntologyError::UnknownClassifier(_))
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bins_are_monotone_and_in_range(
                values in prop::collection::vec(-1e6f64..1e6, 1..60),
                k in 1usize..8,
                probes in prop::collection::vec(-2e6f64..2e6, 1..20),
            ) {
                let b = derive_bins(&values, k).unwrap();
                prop_assert_eq!(b.thresholds.len(), k - 1);
                prop_assert!(b.thresholds.windows(2).all(|w| w[0] <= w[1]));
                let mut sorted = probes.clone();
                sorted.sort_by(f64::total_cmp);
                for w in sorted.windows(2) {
                    prop_assert!(b.bin(w[0]) <= b.bin(w[1]));
                }
                for v in &values {
                    prop_assert!(b.bin(*v) < k);
                }
                prop_assert_eq!(b.counts.iter().sum::<usize>(), values.len());
            }
        }
    }
}
