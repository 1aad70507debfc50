use std::collections::BTreeMap;

use cogcore::pfc::{cluster, describe, ContextConfig, DescribeConfig};
use cogcore::sim::crm::run_crm;
use cogcore::sim::pm::{pm_loop, replay_pm, run_pm};
use cogcore::sim::{LoopConfig, SimEnvConfig};
use cogcore::store::{ExportKind, Literal};
use cogcore::synth::planted_clusters;

#[test]
fn describe_ranks_planted_attributes_first() {
    for seed in 0..5 {
        let mut planted = planted_clusters(seed, 3, 50, 4, 0.1);
        let cfg = ContextConfig::new(planted.classifiers.clone());
        let invs = cluster(&mut planted.store, &cfg).unwrap();
        for inv in invs.iter().filter(|i| i.extent.len() >= 20) {
            let mut votes = BTreeMap::new();
            for id in &inv.extent {
                *votes.entry(planted.labels[id]).or_insert(0) += 1;
            }
            let (&k, _) = votes.iter().max_by_key(|(_, n)| **n).unwrap();
            let d = describe(&inv.id, &planted.store, &DescribeConfig { top_k: 4, min_frequency: 0.5 }).unwrap();
            let mut top: Vec<Literal> = d.characteristic.iter().map(|e| e.literal.clone()).collect();
            top.sort();
            let expected: Vec<Literal> = (4 * k..4 * k + 4).map(|j| Literal::pos(format!("a{j:02}"), "1")).collect();
            assert_eq!(top, expected, "seed {seed}, {}", inv.id);
            assert!(d.characteristic.iter().all(|e| e.lift > 2.0));
        }
    }
}

#[test]
fn uniform_acceptance_has_nothing_to_learn() {
    let cfg = SimEnvConfig::uniform(11, 4, 3, 0.5, 2000);
    let out = run_crm(&cfg, &LoopConfig::default()).unwrap();
    assert!((out.summary.overall_rate - 0.5).abs() <= 0.05, "{}", out.summary);
    assert!((out.summary.ratio_to_oracle - 1.0).abs() <= 0.1, "{}", out.summary);
}

#[test]
fn identical_runs_are_byte_identical() {
    let cfg = SimEnvConfig::peaked(9, 3, 3, 0.85, 0.15, 800);
    let a = run_crm(&cfg, &LoopConfig::default()).unwrap();
    let b = run_crm(&cfg, &LoopConfig::default()).unwrap();
    assert_eq!(a.log, b.log);
    for kind in [ExportKind::Objects, ExportKind::Rules, ExportKind::Expectations, ExportKind::Events] {
        assert_eq!(a.store.export_string(kind), b.store.export_string(kind));
    }
    let other = run_crm(&SimEnvConfig { seed: 10, ..cfg }, &LoopConfig::default()).unwrap();
    assert_ne!(a.log, other.log);
}

#[test]
fn pm_replay_reproduces_store() {
    let cfg = SimEnvConfig::peaked(2, 3, 3, 0.9, 0.1, 700);
    let live = run_pm(&cfg, &pm_loop()).unwrap();
    let again = replay_pm(&cfg, &pm_loop(), &live.log).unwrap();
    assert_eq!(live.log, again.log);
    assert_eq!(live.store.export_string(ExportKind::Rules), again.store.export_string(ExportKind::Rules));
    assert_eq!(live.store.export_string(ExportKind::Events), again.store.export_string(ExportKind::Events));
}
