//! Mine rules from synthetic data with three planted implications and
//! compare the estimates with the truth.

use cogcore::lpi::{self, MiningConfig};
use cogcore::synth;

fn main() -> anyhow::Result<()> {
    let data = synth::planted_rules(3, 500, 8);
    let cfg = MiningConfig {
        alpha: 0.001,
        ..MiningConfig::default()
    };
    for planted in &data.planted {
        let rules = lpi::mine(&planted.conclusion.classifier_id, &data.store, &cfg)?;
        println!("target {}: {} rules", planted.conclusion.classifier_id, rules.len());
        for r in &rules {
            let mark = if r.premise == [planted.premise.clone()] { "  <- planted" } else { "" };
            println!(
                "  {:<28} p={:.3} (true {:.2}) pv={:.2e}{mark}",
                r.id,
                lpi::probability(r),
                planted.probability,
                r.p_value
            );
        }
    }

    let noise = synth::pure_noise(3, 500, 9);
    println!("pure noise, target n1: {} rules", lpi::mine("n1", &noise, &cfg)?.len());
    Ok(())
}
