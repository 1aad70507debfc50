//! Seeded synthetic datasets with known ground truth.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ontology::{CategoryDef, ClassifierDef, ClassifierKind, ObjectTypeDef, OntoKind, Schema};
use crate::store::{Literal, ObjectRecord, Store};

/// Entity type `row` over boolean classifiers with codes `0`/`1`.
pub fn boolean_schema(names: &[String]) -> Arc<Schema> {
    let classifiers = names
        .iter()
        .map(|n| ClassifierDef {
            id: n.clone(),
            name: n.clone(),
            kind: ClassifierKind::Boolean,
            domain: ["0", "1"]
                .iter()
                .map(|c| CategoryDef {
                    code: c.to_string(),
                    label: c.to_string(),
                })
                .collect(),
            missing_tokens: vec![String::new()],
            bin_thresholds: None,
            aliases: vec![],
        })
        .collect();
    let ty = ObjectTypeDef {
        id: "row".into(),
        name: "row".into(),
        onto_kind: OntoKind::Entity,
        attribute_ids: names.to_vec(),
        relation_slots: vec![],
        parent_process_type: None,
    };
    Arc::new(Schema::new(classifiers, vec![ty], vec![]).expect("boolean schema is valid"))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// A planted implication `premise ⇒ conclusion` holding with `probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRule {
    pub premise: Literal,
    pub conclusion: Literal,
    pub probability: f64,
}

pub struct PlantedRules {
    pub store: Store,
    pub planted: Vec<PlantedRule>,
}

/// Causes `c1..c3` (P=0.5) drive targets `t1..t3`: P(t=1|c=1) is 0.9, 0.8,
/// 0.95 and P(t=1|c=0) is 0.3. Adds `noise` independent uniform attributes.
pub fn planted_rules(seed: u64, n: usize, noise: usize) -> PlantedRules {
    const STRENGTH: [f64; 3] = [0.9, 0.8, 0.95];
    const BASE: f64 = 0.3;
    let mut names: Vec<String> = Vec::new();
    for k in 1..=3 {
        names.push(format!("c{k}"));
        names.push(format!("t{k}"));
    }
    names.extend((1..=noise).map(|k| format!("n{k}")));
    let mut store = Store::new(boolean_schema(&names));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = ObjectRecord::new(format!("r{i:05}"), "row");
        for (k, s) in STRENGTH.iter().enumerate() {
            let c = rng.gen_bool(0.5);
            let t = rng.gen_bool(if c { *s } else { BASE });
            r = r.with(&format!("c{}", k + 1), bit(c)).with(&format!("t{}", k + 1), bit(t));
        }
        for k in 1..=noise {
            r = r.with(&format!("n{k}"), bit(rng.gen_bool(0.5)));
        }
        records.push(r);
    }
    store.insert_batch(records).expect("generated records are valid");
    let planted = STRENGTH
        .iter()
        .enumerate()
        .map(|(k, s)| PlantedRule {
            premise: Literal::pos(format!("c{}", k + 1), "1"),
            conclusion: Literal::pos(format!("t{}", k + 1), "1"),
            probability: *s,
        })
        .collect();
    PlantedRules { store, planted }
}

/// `attrs` independent fair boolean attributes `n1..`.
pub fn pure_noise(seed: u64, n: usize, attrs: usize) -> Store {
    let names: Vec<String> = (1..=attrs).map(|k| format!("n{k}")).collect();
    let mut store = Store::new(boolean_schema(&names));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            names.iter().fold(ObjectRecord::new(format!("r{i:05}"), "row"), |r, c| {
                r.with(c, bit(rng.gen_bool(0.5)))
            })
        })
        .collect();
    store.insert_batch(records).expect("generated records are valid");
    store
}

pub struct PlantedClusters {
    pub store: Store,
    pub classifiers: Vec<String>,
    /// Object id → true cluster index.
    pub labels: BTreeMap<String, usize>,
}

/// `clusters × per_cluster` objects over `clusters × width` boolean
/// attributes `a00..`. Cluster `k` sets its own `width` attributes to 1 and
/// every other attribute to 0; each cell is then flipped with probability
/// `noise`.
pub fn planted_clusters(seed: u64, clusters: usize, per_cluster: usize, width: usize, noise: f64) -> PlantedClusters {
    let n_attrs = clusters * width;
    let classifiers: Vec<String> = (0..n_attrs).map(|k| format!("a{k:02}")).collect();
    let mut store = Store::new(boolean_schema(&classifiers));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = BTreeMap::new();
    let mut records = Vec::new();
    for i in 0..clusters * per_cluster {
        let k = i % clusters;
        let id = format!("o{i:04}");
        let mut r = ObjectRecord::new(id.clone(), "row");
        for (j, c) in classifiers.iter().enumerate() {
            let on = j / width == k;
            let flip = rng.gen_bool(noise);
            r = r.with(c, bit(on != flip));
        }
        labels.insert(id, k);
        records.push(r);
    }
    store.insert_batch(records).expect("generated records are valid");
    PlantedClusters {
        store,
        classifiers,
        labels,
    }
}

/// Nutrition → immunity → infection chain:
/// P(weak|bad)=0.8, P(weak|¬bad)=0.2, P(infection|weak)=0.9, P(infection|¬weak)=0.1,
/// with P(bad)=0.5. Infection depends on nutrition only through immunity.
pub fn nutrition_chain(seed: u64, n: usize) -> Store {
    let names: Vec<String> = ["bad_nutrition", "weak_immunity", "infection_risk"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut store = Store::new(boolean_schema(&names));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let bad = rng.gen_bool(0.5);
            let weak = rng.gen_bool(if bad { 0.8 } else { 0.2 });
            let inf = rng.gen_bool(if weak { 0.9 } else { 0.1 });
            ObjectRecord::new(format!("p{i:05}"), "row")
                .with("bad_nutrition", bit(bad))
                .with("weak_immunity", bit(weak))
                .with("infection_risk", bit(inf))
        })
        .collect();
    store.insert_batch(records).expect("generated records are valid");
    store
}
