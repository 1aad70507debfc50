//! Closed-loop executor assignment scored by the task-completion success
//! function, with and without automatic decisions.

use cogcore::sim::{pm, Fallback, SimEnvConfig};

fn main() -> anyhow::Result<()> {
    let env = SimEnvConfig::peaked(8, 3, 3, 0.85, 0.2, 1000);
    let out = pm::run_pm(&env, &pm::pm_loop())?;
    println!("automatic\n{}\n", out.summary);

    let mut manual = pm::pm_loop();
    manual.recommend.auto_decide = false;
    manual.recommend.confidence_threshold = 1.01;
    manual.on_menu = Fallback::MostFrequent;
    let out = pm::run_pm(&env, &manual)?;
    println!("no automatic decisions, most frequent position\n{}", out.summary);
    Ok(())
}
