//! Offer recommendation: clients in segments are offered products and either
//! subscribe or not. Feedback goes through the acceptor.

use std::sync::Arc;

use crate::ontology::{ClassifierKind, OntoKind, OntologyError, RelationSlot, Schema};
use crate::store::Literal;
use crate::taskd::{RecordPattern, RewardMap, SuccessFunctionDef};

use super::{classifier, numbered, object_type, Domain, Feedback, LiveEnv, LoopConfig, SimEnvConfig, SimError, SimOutput};

pub fn crm_schema(n_segments: usize, n_products: usize) -> Result<Schema, OntologyError> {
    let yes_no = ["yes".to_string(), "no".to_string()];
    let mut interaction = object_type(
        "interaction",
        OntoKind::Process,
        &["segment", "product", "subscribed"],
        None,
    );
    interaction.relation_slots.push(RelationSlot {
        role: "client".into(),
        target: "client".into(),
    });
    Schema::new(
        vec![
            classifier("segment", "Customer segment", ClassifierKind::Categorical, &numbered("s", n_segments)),
            classifier("product", "Offered product", ClassifierKind::Categorical, &numbered("p", n_products)),
            classifier("subscribed", "Subscribed", ClassifierKind::Boolean, &yes_no),
        ],
        vec![
            object_type("client", OntoKind::Entity, &["segment"], None),
            interaction,
            object_type("offer", OntoKind::Action, &["product"], Some("interaction")),
            object_type("response", OntoKind::Coincidence, &["subscribed"], Some("interaction")),
        ],
        vec![SuccessFunctionDef {
            name: "subscription".into(),
            scope_type: "interaction".into(),
            trigger: RecordPattern {
                type_id: Some("offer".into()),
                literals: vec![],
            },
            goal: RecordPattern {
                type_id: Some("response".into()),
                literals: vec![Literal::pos("subscribed", "yes")],
            },
            window: 1,
            reward_map: RewardMap::default(),
        }],
    )
}

pub fn crm_domain(n_segments: usize, n_products: usize) -> Result<Domain, OntologyError> {
    Ok(Domain {
        schema: Arc::new(crm_schema(n_segments, n_products)?),
        context_classifier: "segment".into(),
        action_classifier: "product".into(),
        outcome_classifier: "subscribed".into(),
        success_code: "yes".into(),
        failure_code: "no".into(),
        episode_type: "interaction".into(),
        action_type: "offer".into(),
        response_type: "response".into(),
        root: None,
        client_type: Some("client".into()),
        feedback: Feedback::Acceptor,
    })
}

fn domain_for(cfg: &SimEnvConfig) -> Result<Domain, SimError> {
    crm_domain(cfg.n_segments, cfg.n_products).map_err(|e| SimError::Config(e.to_string()))
}

pub fn run_crm(cfg: &SimEnvConfig, lc: &LoopConfig) -> Result<SimOutput, SimError> {
    let domain = domain_for(cfg)?;
    super::run(&domain, cfg, lc, &mut LiveEnv::new(cfg))
}

pub fn replay_crm(cfg: &SimEnvConfig, lc: &LoopConfig, log: &str) -> Result<SimOutput, SimError> {
    super::replay(&domain_for(cfg)?, cfg, lc, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ExportKind;

    #[test]
    fn bundled_schema_matches_generator() {
        let text = include_str!("../../data/crm.json");
        let bundled = Schema::from_json(text).unwrap();
        assert_eq!(bundled.to_json(), crm_schema(4, 3).unwrap().to_json());
    }

    #[test]
    fn learns_peaked_matrix() {
        let cfg = SimEnvConfig::peaked(7, 3, 3, 0.85, 0.15, 1500);
        let out = run_crm(&cfg, &LoopConfig::default()).unwrap();
        let s = &out.summary;
        assert!(s.auto > 0, "{s}");
        assert!(s.ratio_to_oracle >= 0.9, "{s}");
    }

    #[test]
    fn replay_is_exact() {
        let cfg = SimEnvConfig::peaked(11, 2, 3, 0.9, 0.2, 700);
        let lc = LoopConfig::default();
        let a = run_crm(&cfg, &lc).unwrap();
        let b = replay_crm(&cfg, &lc, &a.log).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.store.export_string(ExportKind::Rules), b.store.export_string(ExportKind::Rules));
    }

    #[test]
    fn tampered_log_diverges() {
        let cfg = SimEnvConfig::peaked(11, 2, 3, 0.9, 0.2, 700);
        let lc = LoopConfig::default();
        let a = run_crm(&cfg, &lc).unwrap();
        // Flip the action of the first engine-chosen step.
        let mut lines: Vec<String> = a.log.lines().map(str::to_string).collect();
        let i = lines.iter().position(|l| l.contains(",auto,")).unwrap();
        let mut f: Vec<String> = lines[i].split(',').map(str::to_string).collect();
        f[3] = if f[3] == "p1" { "p2".into() } else { "p1".into() };
        lines[i] = f.join(",");
        let tampered = lines.join("\n") + "\n";
        match replay_crm(&cfg, &lc, &tampered) {
            Err(SimError::Replay { step, .. }) => assert_eq!(step, i),
            other => panic!("{:?}", other.map(|o| o.summary)),
        }
    }
}
