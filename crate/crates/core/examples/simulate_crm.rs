//! Closed-loop offer simulation: peaked and uniform acceptance, plus an
//! offline replay of the emitted log.

use cogcore::sim::{crm, LoopConfig, SimEnvConfig};
use cogcore::store::ExportKind;

fn main() -> anyhow::Result<()> {
    let lc = LoopConfig::default();
    let env = SimEnvConfig::peaked(42, 4, 3, 0.9, 0.1, 2000);
    let run = crm::run_crm(&env, &lc)?;
    println!("peaked 4×3\n{}\n", run.summary);

    let replay = crm::replay_crm(&env, &lc, &run.log)?;
    let same = run.store.export_string(ExportKind::Rules) == replay.store.export_string(ExportKind::Rules);
    println!("replayed rule base identical: {same}\n");

    let flat = crm::run_crm(&SimEnvConfig::uniform(42, 4, 3, 0.5, 2000), &lc)?;
    println!("uniform 0.5\n{}", flat.summary);
    Ok(())
}
