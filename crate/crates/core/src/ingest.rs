//! CSV ingestion under the schema.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::ontology::{resolve, OntologyError, Resolved, Schema};
use crate::store::{ObjectRecord, Store};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("header {0:?} maps to no classifier of the target type")]
    HeaderMismatch(String),
    #[error("unknown object type {0:?}")]
    UnknownType(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line in the input, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub inserted: usize,
    pub rejects: Vec<Reject>,
}

impl IngestReport {
    pub fn rows(&self) -> usize {
        self.inserted + self.rejects.len()
    }
}

enum Column {
    Id,
    Classifier(String),
}

/// Header → classifier id, by id, display name or alias.
fn map_header(schema: &Schema, attrs: &[String], header: &str) -> Option<String> {
    attrs
        .iter()
        .filter_map(|a| schema.classifier(a))
        .find(|c| c.id == header || c.name == header || c.aliases.iter().any(|x| x == header))
        .map(|c| c.id.clone())
}

/// Reads CSV rows into records of `type_id`. An `id` column names records;
/// without one they are numbered `<type_id>-<row>`. Rows with an unknown
/// value are rejected with their line number, the rest are inserted.
pub fn ingest_reader<R: Read>(reader: R, store: &mut Store, type_id: &str) -> Result<IngestReport, IngestError> {
    let schema = store.schema_arc();
    let ty = schema
        .object_type(type_id)
        .ok_or_else(|| IngestError::UnknownType(type_id.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns: Vec<Column> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h }.trim();
            if h == "id" {
                return Ok(Column::Id);
            }
            map_header(&schema, &ty.attribute_ids, h)
                .map(Column::Classifier)
                .ok_or_else(|| IngestError::HeaderMismatch(h.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut report = IngestReport::default();
    for (row, result) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                report.rejects.push(Reject {
                    line: e.position().map_or(line, |p| p.line()),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(line, |p| p.line());
        let mut id = None;
        let mut assignments = BTreeMap::new();
        let mut problem = None;
        for (col, cell) in columns.iter().zip(record.iter()) {
            match col {
                Column::Id => id = Some(cell.trim().to_string()),
                Column::Classifier(c) => match resolve(&schema, c, cell) {
                    Ok(Resolved::Assigned(code)) => {
                        assignments.insert(c.clone(), code);
                    }
                    Ok(Resolved::Unassigned) => {}
                    Err(e @ OntologyError::UnknownCategory { .. }) => {
                        problem = Some(e.to_string());
                        break;
                    }
                    Err(e) => problem = Some(e.to_string()),
                },
            }
        }
        if let Some(reason) = problem {
            report.rejects.push(Reject { line, reason });
            continue;
        }
        let id = id
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("{type_id}-{:05}", row + 1));
        let mut rec = ObjectRecord::new(id, type_id);
        rec.assignments = assignments;
        match store.insert(rec) {
            Ok(_) => report.inserted += 1,
            Err(e) => report.rejects.push(Reject {
                line,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}

pub fn ingest(path: impl AsRef<Path>, store: &mut Store, type_id: &str) -> Result<IngestReport, IngestError> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, store, type_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::load_schema;
    use std::sync::Arc;

    fn users() -> Store {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/users.json");
        Store::new(Arc::new(load_schema(path).unwrap()))
    }

    #[test]
    fn fixture_with_unspecified_cells() {
        let mut store = users();
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/users.csv");
        let report = ingest(path, &mut store, "user").unwrap();
        assert_eq!(report.inserted, 5);
        assert!(report.rejects.is_empty());
        let unassigned: usize = store
            .objects()
            .map(|r| 4 - r.assignments.len())
            .sum();
        assert_eq!(unassigned, 3);
    }

    #[test]
    fn unmapped_header() {
        let mut store = users();
        let csv = "bdate,city\n07.04.1983,Москва\n";
        match ingest_reader(csv.as_bytes(), &mut store, "user") {
            Err(IngestError::HeaderMismatch(h)) => assert_eq!(h, "bdate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_only_and_rejects() {
        let mut store = users();
        let r = ingest_reader("religion,city\n".as_bytes(), &mut store, "user").unwrap();
        assert_eq!(r, IngestReport::default());
        let r = ingest_reader("religion\nПравославие\nнечто\nИслам\n".as_bytes(), &mut store, "user").unwrap();
        assert_eq!(r.inserted, 2);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].line, 3);
        assert_eq!(r.rows(), 3);
    }
}
