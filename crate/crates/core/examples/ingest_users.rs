//! Load a CSV of user profiles; "Не указана" cells stay unassigned.

use std::sync::Arc;

use cogcore::ingest;
use cogcore::ontology::load_schema;
use cogcore::store::Store;

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Arc::new(load_schema(format!("{data}/users.json"))?);
    let mut store = Store::new(schema);
    let report = ingest::ingest(format!("{data}/users.csv"), &mut store, "user")?;
    println!("inserted {} of {} rows", report.inserted, report.rows());
    for r in store.objects() {
        let cells: Vec<String> = r.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("  {}  {}", r.id, cells.join(" "));
    }

    // A row with an unknown category is rejected with its line number.
    let extra = "city,religion\nМосква,Ислам\nМосква,нечто\n";
    let report = ingest::ingest_reader(extra.as_bytes(), &mut store, "user")?;
    for r in &report.rejects {
        println!("rejected line {}: {}", r.line, r.reason);
    }
    Ok(())
}
