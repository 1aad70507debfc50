//! Seeded closed-loop simulations: the engine recommends an action, the
//! environment answers from a hidden probability matrix, and the acceptor or
//! a success function feeds the verdict back into the rule base.
//!
//! Every run writes a per-step log; feeding that log back through
//! [`replay`] instead of the live environment rebuilds the same store.

pub mod crm;
pub mod pm;

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpi::{self, LpiError, MiningConfig};
use crate::ontology::{CategoryDef, ClassifierDef, ClassifierKind, ObjectTypeDef, OntoKind, Schema};
use crate::recommend::{recommend_action, ActionOption, Decision, RecommendConfig};
use crate::store::{Assignment, Literal, ObjectRecord, Relation, RuleStatus, Store, StoreError};
use crate::taskd;
use crate::tfs::{self, TfsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEnvConfig {
    pub seed: u64,
    /// Context categories: customer segments or task kinds.
    pub n_segments: usize,
    pub n_clients: usize,
    /// Action categories: products or executor positions.
    pub n_products: usize,
    /// Hidden success probability per (segment, product).
    pub acceptance: Vec<Vec<f64>>,
    pub episode_length: usize,
}

impl SimEnvConfig {
    /// Each segment has one product at `hi` (segment index mod products);
    /// everything else is at `lo`.
    pub fn peaked(seed: u64, n_segments: usize, n_products: usize, hi: f64, lo: f64, steps: usize) -> Self {
        let acceptance = (0..n_segments)
            .map(|s| (0..n_products).map(|p| if p == s % n_products { hi } else { lo }).collect())
            .collect();
        SimEnvConfig {
            seed,
            n_segments,
            n_clients: n_segments * 25,
            n_products,
            acceptance,
            episode_length: steps,
        }
    }

    pub fn uniform(seed: u64, n_segments: usize, n_products: usize, p: f64, steps: usize) -> Self {
        SimEnvConfig {
            acceptance: vec![vec![p; n_products]; n_segments],
            ..Self::peaked(seed, n_segments, n_products, p, p, steps)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.n_segments == 0 || self.n_products == 0 || self.n_clients == 0 {
            return bad("segments, products and clients must be positive".into());
        }
        if self.acceptance.len() != self.n_segments || self.acceptance.iter().any(|r| r.len() != self.n_products) {
            return bad(format!(
                "acceptance matrix must be {}×{}",
                self.n_segments, self.n_products
            ));
        }
        if self.acceptance.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("acceptance probabilities must lie in [0,1]".into());
        }
        Ok(())
    }

    pub fn segment_of(&self, client: usize) -> usize {
        client % self.n_segments
    }

    /// Success rate of an omniscient policy under uniform client sampling.
    pub fn oracle_rate(&self) -> f64 {
        let total: f64 = (0..self.n_clients)
            .map(|c| {
                self.acceptance[self.segment_of(c)]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .sum();
        total / self.n_clients as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// First item of the ranked menu.
    TopChoice,
    /// Uniform random action from the environment's generator.
    Random,
    /// Action chosen most often so far (lowest code on ties).
    MostFrequent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Uniform-random exploration steps before the engine decides.
    pub warmup: usize,
    /// Re-mine and revise every this many steps after warmup.
    pub refresh_every: usize,
    pub trailing_window: usize,
    pub recommend: RecommendConfig,
    pub mining: MiningConfig,
    pub on_menu: Fallback,
    pub on_abstain: Fallback,
    pub symmetric: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            warmup: 300,
            refresh_every: 100,
            trailing_window: 500,
            recommend: RecommendConfig::default(),
            mining: MiningConfig {
                alpha: 0.01,
                max_premise_len: 2,
                ..MiningConfig::default()
            },
            on_menu: Fallback::TopChoice,
            on_abstain: Fallback::Random,
            symmetric: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("replay diverged at step {step}: {reason}")]
    Replay { step: usize, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Lpi(#[from] LpiError),
    #[error(transparent)]
    Tfs(#[from] TfsError),
    #[error("log error: {0}")]
    Csv(#[from] csv::Error),
}

/// Source of clients, exploration choices and outcomes.
pub trait Environment {
    fn next_client(&mut self, step: usize) -> Result<usize, SimError>;
    fn explore(&mut self, step: usize, n_actions: usize) -> Result<usize, SimError>;
    fn respond(&mut self, step: usize, client: usize, action: usize) -> Result<bool, SimError>;
    /// Called with every action the loop takes; replay checks it against the log.
    fn check_choice(&mut self, _step: usize, _action: usize) -> Result<(), SimError> {
        Ok(())
    }
}

/// Samples everything from one seeded generator.
pub struct LiveEnv {
    rng: ChaCha8Rng,
    cfg: SimEnvConfig,
}

impl LiveEnv {
    pub fn new(cfg: &SimEnvConfig) -> Self {
        LiveEnv {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg: cfg.clone(),
        }
    }
}

impl Environment for LiveEnv {
    fn next_client(&mut self, _step: usize) -> Result<usize, SimError> {
        Ok(self.rng.gen_range(0..self.cfg.n_clients))
    }

    fn explore(&mut self, _step: usize, n_actions: usize) -> Result<usize, SimError> {
        Ok(self.rng.gen_range(0..n_actions))
    }

    fn respond(&mut self, _step: usize, client: usize, action: usize) -> Result<bool, SimError> {
        let p = self.cfg.acceptance[self.cfg.segment_of(client)][action];
        Ok(self.rng.gen_bool(p))
    }
}

/// One line of the per-step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub phase: String,
    pub client: usize,
    pub action: String,
    pub outcome: u8,
    pub trailing_rate: f64,
}

pub const LOG_HEADER: &str = "step,phase,client,action,outcome,trailing_rate";

pub fn parse_log(text: &str) -> Result<Vec<LogRow>, SimError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Drives the loop from a previously written log.
pub struct ReplayEnv {
    rows: Vec<LogRow>,
    actions: Vec<String>,
}

impl ReplayEnv {
    pub fn new(rows: Vec<LogRow>, actions: Vec<String>) -> Self {
        ReplayEnv { rows, actions }
    }

    fn row(&self, step: usize) -> Result<&LogRow, SimError> {
        self.rows
            .get(step - 1)
            .filter(|r| r.step == step)
            .ok_or_else(|| SimError::Replay {
                step,
                reason: "log has no row for this step".into(),
            })
    }

    fn action_index(&self, step: usize) -> Result<usize, SimError> {
        let code = &self.row(step)?.action;
        self.actions
            .iter()
            .position(|a| a == code)
            .ok_or_else(|| SimError::Replay {
                step,
                reason: format!("unknown action {code:?}"),
            })
    }
}

impl Environment for ReplayEnv {
    fn next_client(&mut self, step: usize) -> Result<usize, SimError> {
        Ok(self.row(step)?.client)
    }

    fn explore(&mut self, step: usize, _n_actions: usize) -> Result<usize, SimError> {
        self.action_index(step)
    }

    fn respond(&mut self, step: usize, _client: usize, _action: usize) -> Result<bool, SimError> {
        Ok(self.row(step)?.outcome == 1)
    }

    fn check_choice(&mut self, step: usize, action: usize) -> Result<(), SimError> {
        let logged = self.action_index(step)?;
        if logged != action {
            return Err(SimError::Replay {
                step,
                reason: format!("engine chose {:?}, log has {:?}", self.actions[action], self.actions[logged]),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// Expectations are closed by the acceptor against the response record.
    Acceptor,
    /// The success-function scan closes trigger/goal pairs and settles them.
    SuccessFunction,
}

/// Record layout and vocabulary of one simulated domain.
#[derive(Debug, Clone)]
pub struct Domain {
    pub schema: Arc<Schema>,
    pub context_classifier: String,
    pub action_classifier: String,
    pub outcome_classifier: String,
    pub success_code: String,
    pub failure_code: String,
    /// Process type holding one decision; mining runs over it.
    pub episode_type: String,
    pub action_type: String,
    pub response_type: String,
    /// Enclosing process every episode belongs to, as (type, id).
    pub root: Option<(String, String)>,
    /// Entity type for clients, linked from episodes by role `client`.
    pub client_type: Option<String>,
    pub feedback: Feedback,
}

impl Domain {
    fn codes(&self, classifier: &str) -> Vec<String> {
        self.schema
            .classifier(classifier)
            .map(|c| c.domain.iter().map(|d| d.code.clone()).collect())
            .unwrap_or_default()
    }

    pub fn contexts(&self) -> Vec<String> {
        self.codes(&self.context_classifier)
    }

    pub fn actions(&self) -> Vec<String> {
        self.codes(&self.action_classifier)
    }

    pub fn goal(&self) -> Literal {
        Literal::pos(&self.outcome_classifier, &self.success_code)
    }

    fn client_id(client: usize) -> String {
        format!("client-{client:04}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub steps: usize,
    pub oracle_rate: f64,
    pub overall_rate: f64,
    pub trailing_rate: f64,
    pub ratio_to_oracle: f64,
    pub warmup: usize,
    pub auto: usize,
    pub menu: usize,
    pub abstain: usize,
    pub active_rules: usize,
    pub retired_rules: usize,
    pub expectations: usize,
    pub events: usize,
}

pub struct SimOutput {
    pub log: String,
    pub summary: SimSummary,
    pub store: Store,
}

fn refresh(store: &mut Store, domain: &Domain, cfg: &MiningConfig, symmetric: bool) -> Result<(), SimError> {
    for ctx in domain.contexts() {
        let mut c = cfg.clone();
        c.context = vec![Literal::pos(&domain.context_classifier, &ctx)];
        c.classifiers = Some(vec![domain.action_classifier.clone()]);
        match lpi::mine(&domain.outcome_classifier, store, &c) {
            Ok(rules) => lpi::merge_mined(store, rules),
            Err(LpiError::DegenerateTarget(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let rules: Vec<_> = store.rules().cloned().collect();
    for h in lpi::generate_hypotheses(&rules, symmetric) {
        store.put_rule(h);
    }
    lpi::revise_all(store, cfg)?;
    Ok(())
}

fn most_frequent(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Runs the closed loop against `env`.
pub fn run(
    domain: &Domain,
    cfg: &SimEnvConfig,
    lc: &LoopConfig,
    env: &mut dyn Environment,
) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    lc.mining.validate()?;
    let contexts = domain.contexts();
    let actions = domain.actions();
    if contexts.len() != cfg.n_segments || actions.len() != cfg.n_products {
        return Err(SimError::Config(format!(
            "schema has {}×{} categories, environment {}×{}",
            contexts.len(),
            actions.len(),
            cfg.n_segments,
            cfg.n_products
        )));
    }
    if lc.refresh_every == 0 || lc.trailing_window == 0 {
        return Err(SimError::Config("refresh_every and trailing_window must be positive".into()));
    }
    let mut mining = lc.mining.clone();
    mining.scope_type = Some(domain.episode_type.clone());

    let mut store = Store::new(Arc::clone(&domain.schema));
    let mut setup = Vec::new();
    if let Some((ty, id)) = &domain.root {
        setup.push(ObjectRecord::new(id, ty).at(0));
    }
    if let Some(ty) = &domain.client_type {
        for c in 0..cfg.n_clients {
            setup.push(
                ObjectRecord::new(Domain::client_id(c), ty).with(&domain.context_classifier, &contexts[cfg.segment_of(c)]),
            );
        }
    }
    store.insert_batch(setup)?;

    let goal = domain.goal();
    let mut log = String::from(LOG_HEADER);
    log.push('\n');
    let mut window: VecDeque<bool> = VecDeque::new();
    let mut successes = 0usize;
    let mut chosen = vec![0usize; actions.len()];
    let (mut n_warm, mut n_auto, mut n_menu, mut n_abstain) = (0, 0, 0, 0);

    for step in 1..=cfg.episode_length {
        let t = 2 * step as i64;
        let client = env.next_client(step)?;
        if client >= cfg.n_clients {
            return Err(SimError::Replay {
                step,
                reason: format!("client {client} out of range"),
            });
        }
        let ctx = &contexts[cfg.segment_of(client)];
        let index_of = |o: &ActionOption| {
            actions
                .iter()
                .position(|a| *a == o.action.category_code)
                .expect("option drawn from the action domain")
        };

        let (phase, action, option) = if step <= lc.warmup {
            n_warm += 1;
            ("warmup", env.explore(step, actions.len())?, None)
        } else {
            let mut base = Assignment::new();
            base.insert(domain.context_classifier.clone(), ctx.clone());
            let fallback = |f: Fallback, menu: &[ActionOption], env: &mut dyn Environment| -> Result<usize, SimError> {
                Ok(match f {
                    Fallback::TopChoice if !menu.is_empty() => index_of(&menu[0]),
                    Fallback::MostFrequent => most_frequent(&chosen),
                    _ => env.explore(step, actions.len())?,
                })
            };
            match recommend_action(&base, &domain.action_classifier, &goal, &store, &mining, &lc.recommend)? {
                Decision::Auto(o) => {
                    n_auto += 1;
                    ("auto", index_of(&o), Some(o))
                }
                Decision::Menu(menu) => {
                    n_menu += 1;
                    let a = fallback(lc.on_menu, &menu, env)?;
                    let o = menu.into_iter().find(|o| index_of(o) == a);
                    ("menu", a, o)
                }
                Decision::Abstain => {
                    n_abstain += 1;
                    ("abstain", fallback(lc.on_abstain, &[], env)?, None)
                }
            }
        };
        env.check_choice(step, action)?;
        chosen[action] += 1;
        let act_code = &actions[action];

        let episode_id = format!("{}-{step:05}", domain.episode_type);
        let action_id = format!("{}-{step:05}", domain.action_type);
        let mut episode = ObjectRecord::new(&episode_id, &domain.episode_type)
            .with(&domain.context_classifier, ctx)
            .with(&domain.action_classifier, act_code)
            .at(t);
        if let Some((_, root)) = &domain.root {
            episode = episode.in_process(root);
        }
        if domain.client_type.is_some() {
            episode.relations.push(Relation {
                role: "client".into(),
                target: Domain::client_id(client),
            });
        }
        let since = store.revision();
        store.insert_batch(vec![
            episode.clone(),
            ObjectRecord::new(&action_id, &domain.action_type)
                .with(&domain.action_classifier, act_code)
                .at(t)
                .in_process(&episode_id),
        ])?;
        let expectation = match &option {
            Some(o) => Some(tfs::open_expectation(&mut store, &action_id, &o.expected, t + 1)?),
            None => None,
        };

        let success = env.respond(step, client, action)?;
        let code = if success { &domain.success_code } else { &domain.failure_code };
        let response = ObjectRecord::new(format!("{}-{step:05}", domain.response_type), &domain.response_type)
            .with(&domain.outcome_classifier, code)
            .at(t + 1)
            .in_process(&episode_id);
        store.insert_batch(vec![episode.with(&domain.outcome_classifier, code), response.clone()])?;

        match domain.feedback {
            Feedback::Acceptor => {
                if let Some(exp) = &expectation {
                    if let Some(ev) = tfs::match_outcome(&mut store, &exp.id, Some(&response), t + 1)? {
                        tfs::reinforce(&mut store, &ev, &mining)?;
                    }
                }
            }
            Feedback::SuccessFunction => {
                for ev in taskd::scan(&mut store, since, &domain.schema.success_functions) {
                    tfs::settle(&mut store, &ev, &mining)?;
                }
            }
        }

        if success {
            successes += 1;
        }
        window.push_back(success);
        if window.len() > lc.trailing_window {
            window.pop_front();
        }
        let trailing = window.iter().filter(|&&s| s).count() as f64 / window.len() as f64;
        let _ = writeln!(
            log,
            "{step},{phase},{client},{act_code},{},{trailing:.6}",
            u8::from(success)
        );

        if step >= lc.warmup && (step - lc.warmup).is_multiple_of(lc.refresh_every) {
            refresh(&mut store, domain, &mining, lc.symmetric)?;
        }
    }

    let steps = cfg.episode_length;
    let trailing = if window.is_empty() {
        0.0
    } else {
        window.iter().filter(|&&s| s).count() as f64 / window.len() as f64
    };
    let oracle = cfg.oracle_rate();
    let summary = SimSummary {
        steps,
        oracle_rate: oracle,
        overall_rate: successes as f64 / steps.max(1) as f64,
        trailing_rate: trailing,
        ratio_to_oracle: if oracle > 0.0 { trailing / oracle } else { 0.0 },
        warmup: n_warm,
        auto: n_auto,
        menu: n_menu,
        abstain: n_abstain,
        active_rules: store.rules().filter(|r| r.is_active()).count(),
        retired_rules: store.rules().filter(|r| r.status == RuleStatus::Retired).count(),
        expectations: store.expectations().count(),
        events: store.event_count(),
    };
    Ok(SimOutput { log, summary, store })
}

/// Re-runs the loop from a written log instead of the live environment.
pub fn replay(
    domain: &Domain,
    cfg: &SimEnvConfig,
    lc: &LoopConfig,
    log: &str,
) -> Result<SimOutput, SimError> {
    let rows = parse_log(log)?;
    let mut env = ReplayEnv::new(rows, domain.actions());
    run(domain, cfg, lc, &mut env)
}

impl std::fmt::Display for SimSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "steps            {}", self.steps)?;
        writeln!(f, "oracle rate      {:.4}", self.oracle_rate)?;
        writeln!(f, "overall rate     {:.4}", self.overall_rate)?;
        writeln!(f, "trailing rate    {:.4}", self.trailing_rate)?;
        writeln!(f, "ratio to oracle  {:.4}", self.ratio_to_oracle)?;
        writeln!(
            f,
            "decisions        warmup {} auto {} menu {} abstain {}",
            self.warmup, self.auto, self.menu, self.abstain
        )?;
        writeln!(f, "rules            {} active, {} retired", self.active_rules, self.retired_rules)?;
        write!(f, "ledger           {} expectations, {} events", self.expectations, self.events)
    }
}

pub(crate) fn classifier(id: &str, name: &str, kind: ClassifierKind, codes: &[String]) -> ClassifierDef {
    ClassifierDef {
        id: id.into(),
        name: name.into(),
        kind,
        domain: codes
            .iter()
            .map(|c| CategoryDef {
                code: c.clone(),
                label: c.clone(),
            })
            .collect(),
        missing_tokens: vec![String::new()],
        bin_thresholds: None,
        aliases: vec![],
    }
}

pub(crate) fn object_type(id: &str, kind: OntoKind, attrs: &[&str], parent: Option<&str>) -> ObjectTypeDef {
    ObjectTypeDef {
        id: id.into(),
        name: id.into(),
        onto_kind: kind,
        attribute_ids: attrs.iter().map(|a| a.to_string()).collect(),
        relation_slots: vec![],
        parent_process_type: parent.map(str::to_string),
    }
}

pub(crate) fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
