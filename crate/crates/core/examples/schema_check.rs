//! Validate the bundled schemas and show what a broken one reports.

use cogcore::ontology::{load_schema, Schema};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for name in ["users", "cbt", "crm", "pm"] {
        let s = load_schema(format!("{data}/{name}.json"))?;
        println!(
            "{name:6} {} classifiers, {} types, {} success functions",
            s.classifiers.len(),
            s.object_types.len(),
            s.success_functions.len()
        );
    }

    let broken = r#"{
      "classifiers": [
        {"id": "flag", "name": "Flag", "kind": "boolean",
         "domain": [{"code": "y", "label": "yes"}]},
        {"id": "flag", "name": "Again", "kind": "categorical", "domain": []}
      ],
      "object_types": [
        {"id": "thing", "name": "Thing", "onto_kind": "entity", "attribute_ids": ["flag", "colour"]}
      ]
    }"#;
    match Schema::from_json(broken) {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("broken schema rejected: {e}"),
    }
    Ok(())
}
