//! Rank diagnoses for a partial case description and show which rules
//! justify each candidate.

use std::sync::Arc;

use cogcore::lpi::{self, MiningConfig, Ranking};
use cogcore::ontology::load_schema;
use cogcore::store::{Assignment, Store};
use cogcore::{ingest, recommend};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let mut store = Store::new(Arc::new(load_schema(format!("{data}/cbt.json"))?));
    ingest::ingest(format!("{data}/cbt_cases.csv"), &mut store, "case")?;
    let mut cfg = MiningConfig {
        alpha: 0.01,
        max_premise_len: 2,
        ..MiningConfig::default()
    };
    let rules = lpi::mine("diagnosis", &store, &cfg)?;
    println!("{} rules on diagnosis", rules.len());
    lpi::merge_mined(&mut store, rules);

    let mut query = Assignment::new();
    query.insert("emotion".into(), "anxiety".into());
    query.insert("situation".into(), "public".into());
    for ranking in [Ranking::Probability, Ranking::Significance] {
        cfg.ranking = ranking;
        println!("\nemotion=anxiety, situation=public — ranked by {ranking:?}");
        for p in lpi::predict(&query, "diagnosis", &store, &cfg)? {
            println!("  {:<26} p={:.3} pv={:.2e}", p.target.to_string(), p.probability, p.p_value);
            println!("    because {}", p.supporting_rules[0]);
        }
    }

    cfg.ranking = Ranking::Probability;
    query.clear();
    query.insert("emotion".into(), "guilt".into());
    let decision = recommend::recommend(&query, "diagnosis", &store, &cfg, &Default::default())?;
    println!("\nemotion=guilt → {}", serde_json::to_string(&decision)?);
    Ok(())
}
