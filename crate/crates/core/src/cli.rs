//! Command-line front end. Every command reads the schema and store from
//! disk, does one thing, writes the store back and prints a text report.
//!
//! Exit codes: 0 success, 1 user error (bad arguments, invalid input),
//! 2 internal error (failure writing outputs, panics).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::ingest;
use crate::lpi::{self, MiningConfig, Prediction, Ranking};
use crate::ontology::{load_schema, Schema};
use crate::pfc::{self, ContextConfig, DescribeConfig};
use crate::recommend::{self, Decision, RecommendConfig};
use crate::sim::{self, LoopConfig, SimEnvConfig, SimOutput};
use crate::store::{Assignment, ExportKind, Literal, Rule, Store};
use crate::taskd;
use crate::tfs;

#[derive(Debug, Parser)]
#[command(name = "cogcore", version, about = "Rule mining, clustering and decision support over a categorical knowledge base")]
struct Cli {
    /// Schema JSON file.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Directory holding the JSON Lines store.
    #[arg(long, global = true)]
    store_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Significance level; commands fall back to their own default.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Confidence threshold for automatic decisions.
    #[arg(long, global = true, default_value_t = 0.8)]
    threshold: f64,
    /// probability | significance | combined
    #[arg(long, global = true, default_value = "probability")]
    ranking: Ranking,
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a schema and summarize it.
    Schema,
    /// Load CSV rows as records of one type.
    Ingest {
        csv: PathBuf,
        #[arg(long = "type")]
        type_id: String,
    },
    /// Mine rules concluding on a target classifier.
    Mine {
        #[arg(long)]
        target: String,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        min_support: Option<u64>,
        /// Count only records of this type.
        #[arg(long)]
        scope: Option<String>,
        #[arg(long, value_delimiter = ',')]
        classifiers: Vec<String>,
        /// Literals every premise must contain, e.g. `segment=s1`.
        #[arg(long, value_delimiter = ',')]
        context: Vec<String>,
        /// Also generate and revise chained hypotheses.
        #[arg(long)]
        hypotheses: bool,
    },
    /// Rank categories of a target classifier for a partial description.
    Predict {
        #[arg(long)]
        target: String,
        /// `classifier=code` facts.
        facts: Vec<String>,
    },
    /// Group records into invariants by fixed-point closure.
    Cluster {
        #[arg(long, value_delimiter = ',', required = true)]
        classifiers: Vec<String>,
        #[arg(long)]
        scope: Option<String>,
        #[arg(long, default_value_t = 0)]
        merge_hamming: usize,
    },
    /// Explain an invariant by its most characteristic literals.
    Describe {
        id: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 0.5)]
        min_frequency: f64,
    },
    /// Recommend a category of `--target`, or an `--action` category reaching `--goal`.
    Recommend {
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        action: Option<String>,
        #[arg(long)]
        goal: Option<String>,
        /// Only offer menus.
        #[arg(long)]
        no_auto: bool,
        facts: Vec<String>,
    },
    /// Register the predicted outcome of an action record.
    Expect {
        #[arg(long)]
        action_id: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        deadline: i64,
        /// Extra facts on top of the action record and its process.
        facts: Vec<String>,
    },
    /// Close an expectation against an observed record and reinforce its rules.
    Feedback {
        #[arg(long)]
        expectation: String,
        #[arg(long)]
        observed: Option<String>,
        /// Defaults to the store clock.
        #[arg(long)]
        now: Option<i64>,
    },
    /// Evaluate success functions on records changed since a revision.
    Scan {
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    /// Closed-loop offer simulation.
    SimulateCrm(SimArgs),
    /// Closed-loop task assignment simulation.
    SimulatePm(SimArgs),
    /// Print or write one store collection as JSON Lines.
    Export {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a JSON Lines collection into the store.
    Import {
        path: PathBuf,
        /// Inferred from the file name when omitted.
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Segments (crm) or task kinds (pm).
    #[arg(long, default_value_t = 4)]
    contexts: usize,
    /// Products (crm) or positions (pm).
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Success probability of each context's best action.
    #[arg(long, default_value_t = 0.9)]
    hi: f64,
    #[arg(long, default_value_t = 0.1)]
    lo: f64,
    /// Use one success probability everywhere instead of hi/lo.
    #[arg(long)]
    uniform: Option<f64>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    refresh_every: Option<usize>,
    #[arg(long)]
    no_auto: bool,
    /// Write the per-step log here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drive the loop from this log instead of the live environment.
    #[arg(long)]
    replay: Option<PathBuf>,
}

/// Command failure, split by who is at fault.
#[derive(Debug)]
pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::User(e.into())
    }
}

fn internal<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Internal(e.into()))
}

type CmdResult = Result<String, Failure>;

impl Cli {
    fn schema(&self) -> anyhow::Result<Arc<Schema>> {
        let path = self.schema.as_ref().ok_or_else(|| anyhow!("--schema is required"))?;
        let schema = load_schema(path).with_context(|| format!("loading schema {}", path.display()))?;
        Ok(Arc::new(schema))
    }

    fn store_dir(&self) -> anyhow::Result<&Path> {
        self.store_dir.as_deref().ok_or_else(|| anyhow!("--store-dir is required"))
    }

    fn open(&self) -> anyhow::Result<Store> {
        let dir = self.store_dir()?;
        Store::open(self.schema()?, dir).with_context(|| format!("opening store {}", dir.display()))
    }

    fn mining(&self, default_alpha: f64) -> MiningConfig {
        MiningConfig {
            alpha: self.alpha.unwrap_or(default_alpha),
            ranking: self.ranking,
            jobs: self.jobs,
            ..MiningConfig::default()
        }
    }

    fn recommend_cfg(&self, no_auto: bool) -> anyhow::Result<RecommendConfig> {
        // Values above 1 are accepted: they make automatic decisions unreachable.
        if self.threshold.is_nan() || self.threshold < 0.0 {
            bail!("--threshold must be non-negative");
        }
        Ok(RecommendConfig {
            confidence_threshold: self.threshold,
            auto_decide: !no_auto,
        })
    }
}

fn save(store: &Store, dir: &Path) -> Result<(), Failure> {
    internal(store.save(dir).with_context(|| format!("saving store {}", dir.display())))
}

fn parse_literal(text: &str) -> anyhow::Result<Literal> {
    Literal::parse(text).ok_or_else(|| anyhow!("expected classifier=code or classifier!=code, got {text:?}"))
}

fn parse_facts(facts: &[String], schema: &Schema) -> anyhow::Result<Assignment> {
    let mut out = Assignment::new();
    for f in facts {
        let lit = parse_literal(f)?;
        if !lit.is_positive() {
            bail!("facts must be positive assignments, got {f:?}");
        }
        if !schema.literal_resolves(&lit) {
            bail!("{lit} names no classifier category of the schema");
        }
        out.insert(lit.classifier_id, lit.category_code);
    }
    Ok(out)
}

fn rule_line(r: &Rule) -> String {
    format!(
        "{:<48} a={:<5} b={:<5} p={:.4} pv={:.3e} {}",
        r.id,
        r.a,
        r.b,
        lpi::probability(r),
        r.p_value,
        format!("{:?}", r.status).to_lowercase()
    )
}

fn prediction_line(p: &Prediction) -> String {
    format!(
        "{:<24} p={:.4} pv={:.3e} score={:.4}  via {}",
        p.target.to_string(),
        p.probability,
        p.p_value,
        p.score,
        p.supporting_rules.join("; ")
    )
}

fn run_command(cli: &Cli) -> CmdResult {
    let mut out = String::new();
    match &cli.command {
        Command::Schema => {
            let s = cli.schema()?;
            writeln!(out, "schema ok: {} classifiers, {} object types, {} success functions",
                s.classifiers.len(), s.object_types.len(), s.success_functions.len())?;
            for c in &s.classifiers {
                let codes: Vec<&str> = c.domain.iter().map(|d| d.code.as_str()).collect();
                writeln!(out, "  classifier {} [{}]", c.id, codes.join(", "))?;
            }
            for t in &s.object_types {
                writeln!(out, "  type {} ({:?}): {}", t.id, t.onto_kind, t.attribute_ids.join(", "))?;
            }
            for f in &s.success_functions {
                writeln!(out, "  success function {} over {}", f.name, f.scope_type)?;
            }
        }
        Command::Ingest { csv, type_id } => {
            let mut store = cli.open()?;
            let report = ingest::ingest(csv, &mut store, type_id)?;
            save(&store, cli.store_dir()?)?;
            writeln!(out, "inserted {} of {} rows", report.inserted, report.rows())?;
            for r in &report.rejects {
                writeln!(out, "  rejected line {}: {}", r.line, r.reason)?;
            }
        }
        Command::Mine { target, max_len, min_support, scope, classifiers, context, hypotheses } => {
            let mut store = cli.open()?;
            let mut cfg = cli.mining(0.05);
            if let Some(n) = max_len {
                cfg.max_premise_len = *n;
            }
            if let Some(n) = min_support {
                cfg.min_support_a = *n;
            }
            cfg.scope_type = scope.clone();
            cfg.classifiers = (!classifiers.is_empty()).then(|| classifiers.clone());
            cfg.context = context.iter().map(|c| parse_literal(c)).collect::<Result<_, _>>()?;
            let mined = lpi::mine(target, &store, &cfg)?;
            writeln!(out, "mined {} rules on {target}", mined.len())?;
            for r in &mined {
                writeln!(out, "  {}", rule_line(r))?;
            }
            lpi::merge_mined(&mut store, mined);
            if *hypotheses {
                let rules: Vec<Rule> = store.rules().cloned().collect();
                let hyps = lpi::generate_hypotheses(&rules, false);
                let ids: Vec<String> = hyps.iter().map(|h| h.id.clone()).collect();
                for h in hyps {
                    store.put_rule(h);
                }
                lpi::revise_all(&mut store, &cfg)?;
                writeln!(out, "hypotheses {}", ids.len())?;
                for id in ids {
                    if let Some(r) = store.rule(&id) {
                        writeln!(out, "  {}", rule_line(r))?;
                    }
                }
            }
            save(&store, cli.store_dir()?)?;
        }
        Command::Predict { target, facts } => {
            let store = cli.open()?;
            let query = parse_facts(facts, store.schema())?;
            let preds = lpi::predict(&query, target, &store, &cli.mining(0.05))?;
            if preds.is_empty() {
                writeln!(out, "no applicable rules")?;
            }
            for p in &preds {
                writeln!(out, "{}", prediction_line(p))?;
            }
        }
        Command::Cluster { classifiers, scope, merge_hamming } => {
            let mut store = cli.open()?;
            let mut cfg = ContextConfig::new(classifiers.clone());
            cfg.mining = cli.mining(0.05);
            cfg.mining.scope_type = scope.clone();
            cfg.merge_hamming = *merge_hamming;
            let invs = pfc::cluster(&mut store, &cfg)?;
            save(&store, cli.store_dir()?)?;
            writeln!(out, "{} invariants", invs.len())?;
            for inv in &invs {
                let intent: Vec<String> = inv.intent.iter().map(|e| e.literal.to_string()).collect();
                writeln!(out, "  {} {:>5} objects  {}", inv.id, inv.extent.len(), intent.join(" & "))?;
            }
        }
        Command::Describe { id, top_k, min_frequency } => {
            let store = cli.open()?;
            let cfg = DescribeConfig { top_k: *top_k, min_frequency: *min_frequency };
            write!(out, "{}", pfc::describe(id, &store, &cfg)?)?;
        }
        Command::Recommend { target, action, goal, no_auto, facts } => {
            let store = cli.open()?;
            let query = parse_facts(facts, store.schema())?;
            let mining = cli.mining(0.05);
            let rc = cli.recommend_cfg(*no_auto)?;
            match (target, action, goal) {
                (Some(t), None, None) => match recommend::recommend(&query, t, &store, &mining, &rc)? {
                    Decision::Auto(p) => writeln!(out, "auto {}", prediction_line(&p))?,
                    Decision::Menu(ps) => {
                        writeln!(out, "menu")?;
                        for (i, p) in ps.iter().enumerate() {
                            writeln!(out, "  {}. {}", i + 1, prediction_line(p))?;
                        }
                    }
                    Decision::Abstain => writeln!(out, "abstain: no applicable rules")?,
                },
                (None, Some(a), Some(g)) => {
                    let goal = parse_literal(g)?;
                    match recommend::recommend_action(&query, a, &goal, &store, &mining, &rc)? {
                        Decision::Auto(o) => writeln!(out, "auto {}  {}", o.action, prediction_line(&o.expected))?,
                        Decision::Menu(os) => {
                            writeln!(out, "menu")?;
                            for (i, o) in os.iter().enumerate() {
                                writeln!(out, "  {}. {}  {}", i + 1, o.action, prediction_line(&o.expected))?;
                            }
                        }
                        Decision::Abstain => writeln!(out, "abstain: no applicable rules")?,
                    }
                }
                _ => return Err(anyhow!("give either --target, or --action with --goal").into()),
            }
        }
        Command::Expect { action_id, target, deadline, facts } => {
            let mut store = cli.open()?;
            let action = store
                .object(action_id)
                .ok_or_else(|| anyhow!("unknown action record {action_id:?}"))?;
            let mut query = action
                .parent_process
                .as_deref()
                .and_then(|p| store.object(p))
                .map(|p| p.assignments.clone())
                .unwrap_or_default();
            query.extend(action.assignments.clone());
            query.extend(parse_facts(facts, store.schema())?);
            query.remove(target);
            let preds = lpi::predict(&query, target, &store, &cli.mining(0.05))?;
            let best = preds.first().ok_or_else(|| anyhow!("no rule predicts {target} for {action_id}"))?;
            let exp = tfs::open_expectation(&mut store, action_id, best, *deadline)?;
            save(&store, cli.store_dir()?)?;
            writeln!(out, "{} expects {} (p={:.4}) by t={}", exp.id, exp.expected, exp.probability_at_issue, exp.deadline)?;
        }
        Command::Feedback { expectation, observed, now } => {
            let mut store = cli.open()?;
            let record = match observed {
                Some(id) => Some(store.object(id).cloned().ok_or_else(|| anyhow!("unknown record {id:?}"))?),
                None => None,
            };
            let now = now.or(store.clock()).unwrap_or_default();
            match tfs::match_outcome(&mut store, expectation, record.as_ref(), now)? {
                Some(ev) => {
                    let touched = tfs::reinforce(&mut store, &ev, &cli.mining(0.05))?;
                    writeln!(out, "{} {:?} for {}", ev.id, ev.outcome, expectation)?;
                    for id in touched {
                        if let Some(r) = store.rule(&id) {
                            writeln!(out, "  {}", rule_line(r))?;
                        }
                    }
                }
                None => writeln!(out, "{expectation} still open")?,
            }
            save(&store, cli.store_dir()?)?;
        }
        Command::Scan { since } => {
            let mut store = cli.open()?;
            let fns = store.schema().success_functions.clone();
            let events = taskd::scan(&mut store, *since, &fns);
            let cfg = cli.mining(0.05);
            writeln!(out, "{} new outcomes", events.len())?;
            for ev in &events {
                tfs::settle(&mut store, ev, &cfg)?;
                writeln!(
                    out,
                    "  {} {} {} {:?} weight {}",
                    ev.id,
                    ev.function.as_deref().unwrap_or("-"),
                    ev.action_id.as_deref().unwrap_or("-"),
                    ev.outcome,
                    ev.weight
                )?;
            }
            for f in &fns {
                let ids: Vec<String> = taskd::processes(&store, f).map(|p| p.id.clone()).collect();
                for pid in ids {
                    write!(out, "{}", taskd::evaluate(f, &pid, &store)?)?;
                }
            }
            save(&store, cli.store_dir()?)?;
        }
        Command::SimulateCrm(args) => out = simulate(cli, args, false)?,
        Command::SimulatePm(args) => out = simulate(cli, args, true)?,
        Command::Export { kind, out: path } => {
            let store = cli.open()?;
            let kind = ExportKind::parse(kind).ok_or_else(|| anyhow!("unknown collection {kind:?}"))?;
            let text = store.export_string(kind);
            match path {
                Some(p) => {
                    internal(std::fs::write(p, &text).with_context(|| format!("writing {}", p.display())))?;
                    writeln!(out, "wrote {} lines to {}", text.lines().count(), p.display())?;
                }
                None => out = text,
            }
        }
        Command::Import { path, kind } => {
            let mut store = cli.open()?;
            let kind = match kind {
                Some(k) => ExportKind::parse(k),
                None => ExportKind::from_path(path),
            }
            .ok_or_else(|| anyhow!("cannot tell which collection {} holds; pass --kind", path.display()))?;
            let n = store.import(kind, path)?;
            save(&store, cli.store_dir()?)?;
            writeln!(out, "imported {n} {}", kind.file_name().trim_end_matches(".jsonl"))?;
        }
    }
    Ok(out)
}

fn simulate(cli: &Cli, a: &SimArgs, pm: bool) -> CmdResult {
    let mut env = match a.uniform {
        Some(p) => SimEnvConfig::uniform(cli.seed, a.contexts, a.actions, p, a.steps),
        None => SimEnvConfig::peaked(cli.seed, a.contexts, a.actions, a.hi, a.lo, a.steps),
    };
    if let Some(c) = a.clients {
        env.n_clients = c;
    }
    let mut lc = if pm { sim::pm::pm_loop() } else { LoopConfig::default() };
    if let Some(alpha) = cli.alpha {
        lc.mining.alpha = alpha;
    }
    lc.mining.ranking = cli.ranking;
    lc.mining.jobs = cli.jobs;
    lc.recommend = cli.recommend_cfg(a.no_auto)?;
    if let Some(w) = a.warmup {
        lc.warmup = w;
    }
    if let Some(r) = a.refresh_every {
        lc.refresh_every = r;
    }
    let result: SimOutput = match &a.replay {
        Some(path) => {
            let log = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            if pm {
                sim::pm::replay_pm(&env, &lc, &log)?
            } else {
                sim::crm::replay_crm(&env, &lc, &log)?
            }
        }
        None if pm => sim::pm::run_pm(&env, &lc)?,
        None => sim::crm::run_crm(&env, &lc)?,
    };
    if let Some(path) = &a.out {
        internal(std::fs::write(path, &result.log).with_context(|| format!("writing {}", path.display())))?;
    }
    if let Some(dir) = &cli.store_dir {
        save(&result.store, dir)?;
    }
    Ok(format!("{}\n", result.summary))
}

/// Parses `args` (program name first), runs the command and writes its
/// report to `out`. Errors go to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match run_command(&cli) {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                2
            }
        },
        Err(f) => {
            let (Failure::User(e) | Failure::Internal(e)) = &f;
            let _ = writeln!(err, "error: {e:#}");
            f.exit_code()
        }
    }
}
