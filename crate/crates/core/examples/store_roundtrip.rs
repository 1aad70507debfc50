//! Persist a store as JSON Lines, reopen it and check the exports match.

use std::sync::Arc;

use cogcore::lpi::{self, MiningConfig};
use cogcore::ontology::load_schema;
use cogcore::pfc::{self, ContextConfig};
use cogcore::store::{ExportKind, Store};
use cogcore::ingest;

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Arc::new(load_schema(format!("{data}/cbt.json"))?);
    let mut store = Store::new(Arc::clone(&schema));
    ingest::ingest(format!("{data}/cbt_cases.csv"), &mut store, "case")?;
    let rules = lpi::mine("diagnosis", &store, &MiningConfig::default())?;
    lpi::merge_mined(&mut store, rules);
    pfc::cluster(&mut store, &ContextConfig::new(vec!["emotion".into(), "distortion".into(), "diagnosis".into()]))?;

    let dir = std::env::temp_dir().join(format!("cogcore-roundtrip-{}", std::process::id()));
    store.save(&dir)?;
    let reopened = Store::open(schema, &dir)?;
    for kind in ExportKind::ALL {
        let same = store.export_string(kind) == reopened.export_string(kind);
        println!("{:<20} {:>4} lines  identical: {same}", kind.file_name(), store.export_string(kind).lines().count());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
