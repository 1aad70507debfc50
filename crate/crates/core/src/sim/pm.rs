//! Task assignment: tasks of several kinds are given to executors of several
//! positions. Feedback goes through the `task_done` success function.

use std::sync::Arc;

use crate::ontology::{ClassifierKind, OntoKind, OntologyError, Schema};
use crate::store::Literal;
use crate::taskd::{RecordPattern, RewardMap, SuccessFunctionDef};

use super::{
    classifier, numbered, object_type, Domain, Fallback, Feedback, LiveEnv, LoopConfig, SimEnvConfig, SimError,
    SimOutput,
};

pub const PROJECT_ID: &str = "project-1";

pub fn pm_schema(n_kinds: usize, n_positions: usize) -> Result<Schema, OntologyError> {
    let status = ["done".to_string(), "failed".to_string()];
    Schema::new(
        vec![
            classifier("task_kind", "Task kind", ClassifierKind::Categorical, &numbered("k", n_kinds)),
            classifier("position", "Executor position", ClassifierKind::Categorical, &numbered("pos", n_positions)),
            classifier("status", "Task status", ClassifierKind::Boolean, &status),
        ],
        vec![
            object_type("project", OntoKind::Process, &[], None),
            object_type("task", OntoKind::Process, &["task_kind", "position", "status"], Some("project")),
            object_type("assign", OntoKind::Action, &["position"], Some("task")),
            object_type("report", OntoKind::Coincidence, &["status"], Some("task")),
        ],
        vec![SuccessFunctionDef {
            name: "task_done".into(),
            scope_type: "project".into(),
            trigger: RecordPattern {
                type_id: Some("assign".into()),
                literals: vec![],
            },
            goal: RecordPattern {
                type_id: Some("report".into()),
                literals: vec![Literal::pos("status", "done")],
            },
            window: 1,
            reward_map: RewardMap::default(),
        }],
    )
}

pub fn pm_domain(n_kinds: usize, n_positions: usize) -> Result<Domain, OntologyError> {
    Ok(Domain {
        schema: Arc::new(pm_schema(n_kinds, n_positions)?),
        context_classifier: "task_kind".into(),
        action_classifier: "position".into(),
        outcome_classifier: "status".into(),
        success_code: "done".into(),
        failure_code: "failed".into(),
        episode_type: "task".into(),
        action_type: "assign".into(),
        response_type: "report".into(),
        root: Some(("project".into(), PROJECT_ID.into())),
        client_type: None,
        feedback: Feedback::SuccessFunction,
    })
}

/// Loop defaults for task assignment: a menu is resolved by its top entry;
/// with no applicable rule the task goes to the position used most so far.
pub fn pm_loop() -> LoopConfig {
    LoopConfig {
        on_abstain: Fallback::MostFrequent,
        ..LoopConfig::default()
    }
}

fn domain_for(cfg: &SimEnvConfig) -> Result<Domain, SimError> {
    pm_domain(cfg.n_segments, cfg.n_products).map_err(|e| SimError::Config(e.to_string()))
}

pub fn run_pm(cfg: &SimEnvConfig, lc: &LoopConfig) -> Result<SimOutput, SimError> {
    let domain = domain_for(cfg)?;
    super::run(&domain, cfg, lc, &mut LiveEnv::new(cfg))
}

pub fn replay_pm(cfg: &SimEnvConfig, lc: &LoopConfig, log: &str) -> Result<SimOutput, SimError> {
    super::replay(&domain_for(cfg)?, cfg, lc, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ExportKind;
    use crate::taskd;

    #[test]
    fn bundled_schema_matches_generator() {
        let bundled = Schema::from_json(include_str!("../../data/pm.json")).unwrap();
        assert_eq!(bundled.to_json(), pm_schema(3, 3).unwrap().to_json());
    }

    #[test]
    fn learns_assignment_and_reports_success() {
        let cfg = SimEnvConfig::peaked(5, 3, 3, 0.85, 0.2, 1000);
        let out = run_pm(&cfg, &pm_loop()).unwrap();
        let s = &out.summary;
        assert!(s.ratio_to_oracle >= 0.9, "{s}");
        let f = out.store.schema().success_function("task_done").unwrap().clone();
        let report = taskd::evaluate(&f, PROJECT_ID, &out.store).unwrap();
        let rate = report.aggregate.unwrap();
        assert!((rate - s.overall_rate).abs() < 1e-9, "{rate} vs {}", s.overall_rate);
    }

    #[test]
    fn unreachable_threshold_falls_back() {
        let cfg = SimEnvConfig::peaked(5, 3, 3, 0.85, 0.2, 800);
        let mut lc = pm_loop();
        lc.recommend.confidence_threshold = 1.01;
        lc.recommend.auto_decide = false;
        lc.on_menu = Fallback::MostFrequent;
        let s = run_pm(&cfg, &lc).unwrap().summary;
        assert_eq!(s.auto, 0);
        assert_eq!(s.menu + s.abstain, 800 - lc.warmup);
    }

    #[test]
    fn replay_is_exact() {
        let cfg = SimEnvConfig::peaked(2, 2, 2, 0.9, 0.3, 600);
        let a = run_pm(&cfg, &pm_loop()).unwrap();
        let b = replay_pm(&cfg, &pm_loop(), &a.log).unwrap();
        assert_eq!(a.store.export_string(ExportKind::Rules), b.store.export_string(ExportKind::Rules));
        assert_eq!(a.store.export_string(ExportKind::Events), b.store.export_string(ExportKind::Events));
    }
}
