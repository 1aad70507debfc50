//! Recover three planted groups as fixed-point invariants and describe the
//! largest one.

use cogcore::pfc::{self, ContextConfig, DescribeConfig};
use cogcore::synth;
use std::collections::BTreeMap;

fn main() -> anyhow::Result<()> {
    let planted = synth::planted_clusters(1, 3, 50, 4, 0.1);
    let mut store = planted.store;
    let invariants = pfc::cluster(&mut store, &ContextConfig::new(planted.classifiers))?;
    println!("{} invariants over {} objects", invariants.len(), store.len());
    for inv in invariants.iter().take(5) {
        let mut labels = BTreeMap::new();
        for id in &inv.extent {
            *labels.entry(planted.labels[id]).or_insert(0) += 1;
        }
        println!("  {} size {:>3}  true clusters {labels:?}", inv.id, inv.extent.len());
    }
    println!();
    print!("{}", pfc::describe("inv-0001", &store, &DescribeConfig::default())?);
    Ok(())
}
