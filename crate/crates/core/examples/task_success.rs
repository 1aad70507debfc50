//! Evaluate the task-completion success function over a small project and
//! turn closed trigger/goal pairs into reinforcement events.

use std::sync::Arc;

use cogcore::sim::pm::pm_schema;
use cogcore::store::{ObjectRecord, Store};
use cogcore::taskd;

fn main() -> anyhow::Result<()> {
    let mut store = Store::new(Arc::new(pm_schema(2, 2)?));
    let mut batch = vec![ObjectRecord::new("prj", "project").at(0)];
    let plan = [("k1", "pos1", Some("done")), ("k2", "pos2", Some("failed")), ("k1", "pos2", Some("done")), ("k2", "pos1", None)];
    for (i, (kind, pos, status)) in plan.iter().enumerate() {
        let t = 10 * (i as i64 + 1);
        let task = format!("task-{i}");
        batch.push(ObjectRecord::new(&task, "task").with("task_kind", kind).with("position", pos).at(t).in_process("prj"));
        batch.push(ObjectRecord::new(format!("assign-{i}"), "assign").with("position", pos).at(t).in_process(&task));
        if let Some(s) = status {
            batch.push(ObjectRecord::new(format!("report-{i}"), "report").with("status", s).at(t + 1).in_process(&task));
        }
    }
    store.insert_batch(batch)?;

    let f = store.schema().success_function("task_done").unwrap().clone();
    print!("{}", taskd::evaluate(&f, "prj", &store)?);

    let fns = store.schema().success_functions.clone();
    for ev in taskd::scan(&mut store, 0, &fns) {
        println!("{} {} {:?} weight {}", ev.id, ev.action_id.as_deref().unwrap_or("-"), ev.outcome, ev.weight);
    }
    // Nothing changed: a second scan adds nothing.
    let rev = store.revision();
    println!("rescan: {} events", taskd::scan(&mut store, rev, &fns).len());
    Ok(())
}
