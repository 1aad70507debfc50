//! Register an expectation for an action, observe the result and watch the
//! supporting rule's reinforcement counts move.

use std::sync::Arc;

use cogcore::lpi::{self, MiningConfig};
use cogcore::sim::crm::crm_schema;
use cogcore::store::{Assignment, Literal, ObjectRecord, Store};
use cogcore::tfs;

fn main() -> anyhow::Result<()> {
    let mut store = Store::new(Arc::new(crm_schema(2, 2)?));
    // History: segment s1 subscribes to p1 nine times out of ten.
    let mut batch = Vec::new();
    for i in 0..40i64 {
        let (seg, prod) = (if i % 2 == 0 { "s1" } else { "s2" }, if i % 4 < 2 { "p1" } else { "p2" });
        let yes = (seg == "s1" && prod == "p1" && i % 20 != 0) || (seg == "s2" && prod == "p2" && i % 3 == 0);
        batch.push(
            ObjectRecord::new(format!("int-{i:03}"), "interaction")
                .with("segment", seg)
                .with("product", prod)
                .with("subscribed", if yes { "yes" } else { "no" })
                .at(i),
        );
    }
    store.insert_batch(batch)?;
    let cfg = MiningConfig {
        scope_type: Some("interaction".into()),
        max_premise_len: 2,
        // Neither segment nor product alone is significant here; search
        // within the segment instead.
        context: vec![Literal::pos("segment", "s1")],
        ..MiningConfig::default()
    };
    let rules = lpi::mine("subscribed", &store, &cfg)?;
    lpi::merge_mined(&mut store, rules);

    let mut query = Assignment::new();
    query.insert("segment".into(), "s1".into());
    query.insert("product".into(), "p1".into());
    let pred = lpi::predict(&query, "subscribed", &store, &cfg)?.remove(0);
    println!("prediction {} p={:.3} via {}", pred.target, pred.probability, pred.supporting_rules[0]);

    for (step, answer) in [(100i64, "yes"), (110, "no"), (120, "yes")] {
        let process = format!("int-live-{step}");
        let offer = format!("offer-{step}");
        store.insert_batch(vec![
            ObjectRecord::new(&process, "interaction").with("segment", "s1").with("product", "p1").at(step),
            ObjectRecord::new(&offer, "offer").with("product", "p1").at(step).in_process(&process),
        ])?;
        let exp = tfs::open_expectation(&mut store, &offer, &pred, step + 5)?;
        let response = ObjectRecord::new(format!("resp-{step}"), "response")
            .with("subscribed", answer)
            .at(step + 1)
            .in_process(&process);
        store.insert(response.clone())?;
        let event = tfs::match_outcome(&mut store, &exp.id, Some(&response), step + 1)?.expect("decided");
        tfs::reinforce(&mut store, &event, &cfg)?;
        let r = store.rule(&pred.supporting_rules[0]).unwrap();
        println!(
            "{} {answer:>3} → {:?}; rule r+={} r-={} p={:.3}",
            exp.id,
            store.expectation(&exp.id).unwrap().status,
            r.r_pos,
            r.r_neg,
            lpi::probability(r)
        );
    }

    // No response before the deadline: expiry counts against the rules.
    store.insert_batch(vec![
        ObjectRecord::new("int-late", "interaction").with("segment", "s1").at(200),
        ObjectRecord::new("offer-late", "offer").with("product", "p1").at(200).in_process("int-late"),
    ])?;
    let exp = tfs::open_expectation(&mut store, "offer-late", &pred, 205)?;
    let event = tfs::match_outcome(&mut store, &exp.id, None, 206)?.expect("expired");
    println!("{} expired → {:?} event", exp.id, event.outcome);
    Ok(())
}
