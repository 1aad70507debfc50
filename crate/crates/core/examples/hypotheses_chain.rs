//! Chain two rules into a hypothesis, then let data confirm or retire it.

use cogcore::lpi::{self, MiningConfig};
use cogcore::store::{Contingency, Literal, Provenance, Rule, RuleStatus};
use cogcore::synth;

fn rule(premise: &str, conclusion: &str, a: u64, b: u64) -> Rule {
    Rule::new(
        vec![Literal::parse(premise).unwrap()],
        Literal::parse(conclusion).unwrap(),
        RuleStatus::Mined,
        Provenance::Manual,
    )
    .with_counts(Contingency { a, b, c: 0, d: 0 })
}

fn main() -> anyhow::Result<()> {
    let nutrition = rule("bad_nutrition=1", "weak_immunity=1", 7, 1);
    let immunity = rule("weak_immunity=1", "infection_risk=1", 17, 1);
    let h = lpi::deduce(&nutrition, &immunity)?;
    println!(
        "deduced {} ({:?}), provisional p = {:.3}",
        h.id,
        h.status,
        h.provisional_probability.unwrap_or_default()
    );

    let store = synth::nutrition_chain(11, 1000);
    let cfg = MiningConfig::default();
    let revised = lpi::revise(&h, &store, &cfg)?;
    println!(
        "on 1000 records: a={} b={} p={:.3} pv={:.1e} → {:?}",
        revised.a,
        revised.b,
        lpi::probability(&revised),
        revised.p_value,
        revised.status
    );

    // A wrong hypothesis is retired once evidence accumulates.
    let wrong = lpi::abduce(&rule("weak_immunity=1", "infection_risk=1", 17, 1), &rule("bad_nutrition=0", "infection_risk=1", 9, 1))?;
    let wrong = lpi::revise(&wrong, &store, &cfg)?;
    println!("abduced {} → p={:.3} {:?}", wrong.id, lpi::probability(&wrong), wrong.status);

    // Mining the same data and generating every chain.
    let mut all = Vec::new();
    for t in ["weak_immunity", "infection_risk"] {
        all.extend(lpi::mine(t, &store, &cfg)?);
    }
    for h in lpi::generate_hypotheses(&all, true) {
        let r = lpi::revise(&h, &store, &cfg)?;
        println!("  {:<40} {:?} from {:?}", r.id, r.status, r.provenance);
    }
    Ok(())
}
