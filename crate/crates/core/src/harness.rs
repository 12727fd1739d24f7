//! Seeded Monte Carlo runs, treatment/control pairs and scenario scans.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::backend::{BackendError, ChatBackend, ChatBackendParams, HttpBackend, HttpBackendConfig, MockBackend};
use crate::agent::{Agent, DayTrace, Persona, PersonaId};
use crate::env::{sample_price_path, BatteryConfig, EnvError, InterventionSchedule, PriceModel, PricePath};
use crate::policy::{complexity_rho, evaluate_on_path, solve_dp, ComplexityReport, Difficulty, DpPolicy, Greedy, Policy, PolicyError, Rollout};
use crate::storage::{DayRecord, FailureRecord, RunManifest, RunWriter, StorageError, SCHEMA_VERSION};
use crate::units::Cents;

pub const DEFAULT_REPETITIONS: u32 = 40;
pub const DEFAULT_BENCHMARK_REPETITIONS: u32 = 2000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Where the price paths of a run come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Every repetition faces the same path.
    FixedPath(PricePath),
    /// Repetition `i` samples its path with seed `s + i`.
    Sampled(u64),
}

impl Scenario {
    pub fn path_for(&self, model: &PriceModel, horizon: u32, repetition: u32) -> PricePath {
        match self {
            Scenario::FixedPath(p) => p.clone(),
            Scenario::Sampled(s) => sample_price_path(model, horizon, s.wrapping_add(u64::from(repetition))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Scripted offline backend, e.g. `dp` or `reserve-keeper+switch`.
    Mock { script: String },
    /// OpenAI-compatible endpoint; the key comes from the environment.
    Http {
        #[serde(default)]
        base_url: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Dp,
    Greedy,
    Agent { persona: PersonaId, backend: BackendSpec },
}

impl PolicyKind {
    /// Value of the `persona` column in traces and summaries.
    pub fn label(&self) -> String {
        match self {
            PolicyKind::Dp => "dp".into(),
            PolicyKind::Greedy => "greedy".into(),
            PolicyKind::Agent { persona, .. } => persona.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub scenario: Scenario,
    pub policy_kind: PolicyKind,
    pub repetitions: u32,
    pub intervention: InterventionSchedule,
    pub base_seed: u64,
    pub cfg: BatteryConfig,
    pub model: PriceModel,
    #[serde(default)]
    pub backend_params: ChatBackendParams,
    /// Journal entries shown to the agent; `None` shows all.
    #[serde(default)]
    pub memory_window: Option<usize>,
}

impl RunSpec {
    pub fn new(run_id: impl Into<String>, policy_kind: PolicyKind) -> RunSpec {
        RunSpec {
            run_id: run_id.into(),
            scenario: Scenario::Sampled(0),
            policy_kind,
            repetitions: DEFAULT_REPETITIONS,
            intervention: InterventionSchedule::none(),
            base_seed: 0,
            cfg: BatteryConfig::default(),
            model: PriceModel::default(),
            backend_params: ChatBackendParams::default(),
            memory_window: None,
        }
    }

    pub fn seed(&self, repetition: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(repetition))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return Err(HarnessError::InvalidSpec(format!("run_id {:?} is not a plain name", self.run_id)));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::InvalidSpec("repetitions must be at least 1".into()));
        }
        self.cfg.validate_with(&self.model)?;
        self.intervention.validate(self.cfg.horizon)?;
        if let Scenario::FixedPath(p) = &self.scenario {
            p.validate(&self.model, self.cfg.horizon)?;
        }
        self.backend_params.validate()?;
        Ok(())
    }
}

/// Execution settings that are not part of the experiment definition.
#[derive(Clone, Default)]
pub struct RunOptions {
    /// Upper bound on concurrently running repetitions; 0 uses all cores.
    pub workers: usize,
    /// Directory holding one subdirectory per run; `None` keeps results in memory.
    pub out_dir: Option<PathBuf>,
    /// Backend to use instead of the one described by the spec.
    pub backend: Option<Arc<dyn ChatBackend>>,
    pub http: HttpBackendConfig,
}

/// Moments and distributions over the successful repetitions of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub repetitions: u32,
    pub failure_count: u32,
    /// Cents.
    pub mean_terminal_reward: f64,
    /// Sample standard deviation, cents.
    pub sd_terminal_reward: f64,
    /// kWh at the start of days 1..=T+1.
    pub mean_soc_by_day: Vec<f64>,
    pub sd_soc_by_day: Vec<f64>,
    /// Cents earned before days 1..=T+1.
    pub mean_cum_reward_by_day: Vec<f64>,
    pub sd_cum_reward_by_day: Vec<f64>,
    /// Terminal SoC counts indexed by SoC level above the floor.
    pub terminal_soc_histogram: Vec<u64>,
    /// Terminal reward of each successful repetition, in repetition order.
    pub terminal_rewards: Vec<Cents>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl SummaryStats {
    /// Summarizes complete repetitions. Records must be sorted by
    /// (repetition, day) and hold exactly T days per repetition.
    pub fn from_records(records: &[DayRecord], cfg: &BatteryConfig, failure_count: u32) -> SummaryStats {
        let t = cfg.horizon as usize;
        let reps: Vec<&[DayRecord]> = records.chunk_by(|a, b| a.repetition == b.repetition).collect();
        debug_assert!(reps.iter().all(|r| r.len() == t), "incomplete repetition in summary input");

        let mut soc_cols = vec![Vec::with_capacity(reps.len()); t + 1];
        let mut cum_cols = vec![Vec::with_capacity(reps.len()); t + 1];
        let mut histogram = vec![0u64; cfg.soc_levels()];
        let mut terminal_rewards = Vec::with_capacity(reps.len());
        for rep in &reps {
            for (d, r) in rep.iter().enumerate() {
                soc_cols[d].push(r.soc_before_wh as f64 / 1000.0);
                cum_cols[d].push((r.cum_reward_cents - r.reward_cents) as f64);
            }
            let last = rep.last().expect("repetitions are non-empty");
            soc_cols[t].push(last.soc_after_wh as f64 / 1000.0);
            cum_cols[t].push(last.cum_reward_cents as f64);
            histogram[cfg.soc_index(crate::Energy(last.soc_after_wh))] += 1;
            terminal_rewards.push(Cents(last.cum_reward_cents));
        }
        let (mean_soc_by_day, sd_soc_by_day) = soc_cols.iter().map(|c| mean_sd(c)).unzip();
        let (mean_cum_reward_by_day, sd_cum_reward_by_day) = cum_cols.iter().map(|c| mean_sd(c)).unzip();
        let terminal: Vec<f64> = terminal_rewards.iter().map(|c| c.0 as f64).collect();
        let (mean_terminal_reward, sd_terminal_reward) = mean_sd(&terminal);
        SummaryStats {
            repetitions: reps.len() as u32,
            failure_count,
            mean_terminal_reward,
            sd_terminal_reward,
            mean_soc_by_day,
            sd_soc_by_day,
            mean_cum_reward_by_day,
            sd_cum_reward_by_day,
            terminal_soc_histogram: histogram,
            terminal_rewards,
        }
    }

    /// Standard error of the mean terminal reward, cents.
    pub fn standard_error(&self) -> f64 {
        if self.repetitions == 0 {
            return 0.0;
        }
        self.sd_terminal_reward / f64::from(self.repetitions).sqrt()
    }

    /// Terminal SoC histogram normalized to probabilities.
    pub fn terminal_soc_density(&self) -> Vec<f64> {
        let total: u64 = self.terminal_soc_histogram.iter().sum();
        self.terminal_soc_histogram
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect()
    }
}

/// First-order stochastic dominance of `a` over `b` (a tends to be larger):
/// the empirical CDF of `a` never exceeds that of `b`.
pub fn stochastically_dominates(a: &[u64], b: &[u64]) -> bool {
    let (ta, tb) = (a.iter().sum::<u64>(), b.iter().sum::<u64>());
    if ta == 0 || tb == 0 || a.len() != b.len() {
        return false;
    }
    let (mut ca, mut cb) = (0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        // ca/ta <= cb/tb without floating point
        if u128::from(ca) * u128::from(tb) > u128::from(cb) * u128::from(ta) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub stats: SummaryStats,
    /// Records of successful repetitions, sorted by (repetition, day).
    pub records: Vec<DayRecord>,
    pub failures: Vec<FailureRecord>,
    pub run_dir: Option<PathBuf>,
}

enum Decider {
    Benchmark(Arc<dyn Policy>),
    Agent { persona: Persona, backend: Arc<dyn ChatBackend>, model_name: String },
}

pub fn build_backend(spec: &BackendSpec, cfg: &BatteryConfig, model: &PriceModel, http: &HttpBackendConfig) -> Result<Arc<dyn ChatBackend>, HarnessError> {
    match spec {
        BackendSpec::Mock { script } => Ok(Arc::new(MockBackend::from_spec(script, cfg, model)?)),
        BackendSpec::Http { base_url } => {
            let mut config = http.clone();
            if let Some(url) = base_url {
                config.base_url = url.clone();
            }
            Ok(Arc::new(HttpBackend::from_env(config)?))
        }
    }
}

fn decider(spec: &RunSpec, opts: &RunOptions) -> Result<Decider, HarnessError> {
    Ok(match &spec.policy_kind {
        PolicyKind::Dp => Decider::Benchmark(Arc::new(solve_dp(&spec.cfg, &spec.model)?.1)),
        PolicyKind::Greedy => Decider::Benchmark(Arc::new(Greedy::new(spec.cfg, spec.model))),
        PolicyKind::Agent { persona, backend } => {
            let backend = match &opts.backend {
                Some(b) => b.clone(),
                None => build_backend(backend, &spec.cfg, &spec.model, &opts.http)?,
            };
            let model_name = backend.model_name(&spec.backend_params);
            Decider::Agent { persona: Persona::builtin(*persona), backend, model_name }
        }
    })
}

fn rollout_records(spec: &RunSpec, repetition: u32, rollout: &Rollout, path: &PricePath, label: &str) -> Vec<DayRecord> {
    rollout
        .actions
        .iter()
        .enumerate()
        .map(|(i, &action)| {
            let (before, after) = (&rollout.states[i], &rollout.states[i + 1]);
            DayRecord {
                schema_version: SCHEMA_VERSION,
                run_id: spec.run_id.clone(),
                repetition,
                persona: label.to_string(),
                day: before.day,
                price_cents: path.price_on(before.day).0,
                soc_before_wh: before.soc.0,
                soc_after_wh: after.soc.0,
                action,
                reward_cents: rollout.rewards[i].0,
                cum_reward_cents: after.cum_reward.0,
                in_blackout: spec.intervention.is_blackout(before.day),
                thoughts: String::new(),
                reflection: String::new(),
                journal: String::new(),
                backend_model: String::new(),
                seed: spec.seed(repetition),
            }
        })
        .collect()
}

fn trace_record(spec: &RunSpec, repetition: u32, t: &DayTrace, label: &str, model_name: &str) -> DayRecord {
    DayRecord {
        schema_version: SCHEMA_VERSION,
        run_id: spec.run_id.clone(),
        repetition,
        persona: label.to_string(),
        day: t.day,
        price_cents: t.price.0,
        soc_before_wh: t.soc_before.0,
        soc_after_wh: t.soc_after.0,
        action: t.action,
        reward_cents: t.reward.0,
        cum_reward_cents: t.cum_reward.0,
        in_blackout: t.in_blackout,
        thoughts: t.response.thoughts.clone(),
        reflection: t.response.reflection.clone(),
        journal: t.response.journal.clone(),
        backend_model: model_name.to_string(),
        seed: spec.seed(repetition),
    }
}

fn run_repetition(spec: &RunSpec, decider: &Decider, repetition: u32) -> Result<Vec<DayRecord>, FailureRecord> {
    let path = spec.scenario.path_for(&spec.model, spec.cfg.horizon, repetition);
    let label = spec.policy_kind.label();
    let seed = spec.seed(repetition);
    match decider {
        Decider::Benchmark(policy) => match evaluate_on_path(policy.as_ref(), &path, &spec.cfg, &spec.intervention) {
            Ok(rollout) => Ok(rollout_records(spec, repetition, &rollout, &path, &label)),
            Err(e) => Err(FailureRecord { repetition, seed, category: "env".into(), message: e.to_string(), completed: Vec::new() }),
        },
        Decider::Agent { persona, backend, model_name } => {
            let mut agent = Agent::new(persona.clone(), backend.clone(), spec.backend_params.clone(), seed, spec.cfg, spec.model, spec.intervention.clone());
            agent.memory.window = spec.memory_window;
            match agent.run_episode(&path) {
                Ok(ep) => Ok(ep.days.iter().map(|t| trace_record(spec, repetition, t, &label, model_name)).collect()),
                Err(f) => Err(FailureRecord {
                    repetition,
                    seed,
                    category: f.error.category().into(),
                    message: f.error.to_string(),
                    completed: f.completed.iter().map(|t| trace_record(spec, repetition, t, &label, model_name)).collect(),
                }),
            }
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::InvalidSpec(format!("cannot start worker pool: {e}")))
}

/// Runs every repetition of `spec`, persisting traces when an output
/// directory is configured. Failed repetitions are excluded from the
/// statistics and counted.
pub fn run_monte_carlo(spec: &RunSpec, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    spec.validate()?;
    let decider = decider(spec, opts)?;
    let writer = match &opts.out_dir {
        Some(root) => Some(RunWriter::create(root, &spec.run_id, spec.cfg)?),
        None => None,
    };

    let results: Vec<Result<Vec<DayRecord>, FailureRecord>> = pool(opts.workers)?.install(|| {
        (0..spec.repetitions)
            .into_par_iter()
            .map(|rep| {
                let result = run_repetition(spec, &decider, rep);
                if let Some(w) = &writer {
                    match &result {
                        Ok(records) => w.append_batch(records)?,
                        Err(failure) => w.append_failure(failure)?,
                    }
                }
                Ok(result)
            })
            .collect::<Result<_, StorageError>>()
    })?;

    let mut records = Vec::with_capacity(spec.repetitions as usize * spec.cfg.horizon as usize);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(batch) => records.extend(batch),
            Err(f) => failures.push(f),
        }
    }
    let stats = SummaryStats::from_records(&records, &spec.cfg, failures.len() as u32);

    let run_dir = match writer {
        Some(w) => {
            let manifest = RunManifest::new(spec.clone(), w.record_count(), failures.len() as u32);
            Some(w.finish(&manifest, &records)?)
        }
        None => None,
    };
    Ok(RunOutcome { spec: spec.clone(), stats, records, failures, run_dir })
}

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub treatment: RunOutcome,
    pub control: RunOutcome,
}

impl PairOutcome {
    /// Whether every (repetition, day) present in both arms saw the same price.
    pub fn prices_aligned(&self) -> bool {
        let control: BTreeMap<(u32, u32), i64> = self.control.records.iter().map(|r| ((r.repetition, r.day), r.price_cents)).collect();
        self.treatment
            .records
            .iter()
            .all(|r| control.get(&(r.repetition, r.day)).is_none_or(|&p| p == r.price_cents))
    }
}

/// Runs the blackout arm and the uninterrupted arm on identical paths and
/// seeds. The treatment schedule is `spec.intervention`, or the default
/// blackout when that is empty.
pub fn run_intervention_pair(spec: &RunSpec, opts: &RunOptions) -> Result<PairOutcome, HarnessError> {
    let mut treatment = spec.clone();
    treatment.run_id = format!("{}-treatment", spec.run_id);
    if treatment.intervention.is_empty() {
        treatment.intervention = InterventionSchedule::treatment_default();
    }
    let mut control = spec.clone();
    control.run_id = format!("{}-control", spec.run_id);
    control.intervention = InterventionSchedule::none();
    let pair = PairOutcome { treatment: run_monte_carlo(&treatment, opts)?, control: run_monte_carlo(&control, opts)? };
    debug_assert!(pair.prices_aligned());
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScannedPath {
    pub path_seed: u64,
    pub report: ComplexityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneratePath {
    pub path_seed: u64,
    pub r_dp: Cents,
    pub path: PricePath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Sorted by ascending ρ, then by seed.
    pub reports: Vec<ScannedPath>,
    /// Paths on which ρ is undefined.
    pub degenerate: Vec<DegeneratePath>,
}

impl ScanResult {
    pub fn count(&self, label: Difficulty) -> usize {
        self.reports.iter().filter(|r| r.report.label == label).count()
    }

    /// The scanned path whose ρ is closest to `target`.
    pub fn nearest(&self, target: f64) -> Option<&ScannedPath> {
        self.reports.iter().min_by(|a, b| (a.report.rho - target).abs().total_cmp(&(b.report.rho - target).abs()))
    }

    /// Mean number of high-price days among paths with the given label.
    pub fn mean_high_days(&self, label: Difficulty, model: &PriceModel) -> Option<f64> {
        let days: Vec<usize> = self.reports.iter().filter(|r| r.report.label == label).map(|r| r.report.path.high_days(model)).collect();
        (!days.is_empty()).then(|| days.iter().sum::<usize>() as f64 / days.len() as f64)
    }
}

/// Samples `n_paths` paths (seeds `seed..seed+n_paths`) and computes ρ on each.
pub fn scan_scenarios(model: &PriceModel, cfg: &BatteryConfig, n_paths: u32, seed: u64) -> Result<ScanResult, HarnessError> {
    if n_paths == 0 {
        return Err(HarnessError::InvalidSpec("n_paths must be at least 1".into()));
    }
    cfg.validate_with(model)?;
    let (_, dp) = solve_dp(cfg, model)?;
    scan_paths(&dp, model, cfg, (0..n_paths).map(|i| seed.wrapping_add(u64::from(i))).collect())
}

fn scan_paths(dp: &DpPolicy, model: &PriceModel, cfg: &BatteryConfig, seeds: Vec<u64>) -> Result<ScanResult, HarnessError> {
    let outcomes: Vec<(u64, PricePath, Result<ComplexityReport, PolicyError>)> = seeds
        .into_par_iter()
        .map(|s| {
            let path = sample_price_path(model, cfg.horizon, s);
            let r = complexity_rho(dp, &path, cfg, model);
            (s, path, r)
        })
        .collect();
    let mut reports = Vec::new();
    let mut degenerate = Vec::new();
    for (path_seed, path, r) in outcomes {
        match r {
            Ok(report) => reports.push(ScannedPath { path_seed, report }),
            Err(PolicyError::DegenerateScenario(r_dp)) => degenerate.push(DegeneratePath { path_seed, r_dp, path }),
            Err(PolicyError::Env(e)) => return Err(e.into()),
        }
    }
    reports.sort_by(|a, b| a.report.rho.total_cmp(&b.report.rho).then(a.path_seed.cmp(&b.path_seed)));
    Ok(ScanResult { reports, degenerate })
}
