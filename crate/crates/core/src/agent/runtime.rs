//! The daily observe, prompt, parse, act, remember loop.

use std::sync::Arc;

use thiserror::Error;

use super::backend::{BackendError, ChatBackend, ChatBackendParams};
use super::memory::AgentMemory;
use super::parse::{parse_response, AgentResponse, ResponseError};
use super::persona::Persona;
use super::prompt::build_prompt;
use crate::env::{step, Action, BatteryConfig, EnvError, EnvState, InterventionSchedule, PriceModel, PricePath};
use crate::policy::Rollout;
use crate::units::{Cents, Energy};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("backend failure on day {day}: {source}")]
    Backend { day: u32, source: BackendError },
    #[error("response rejected on day {day} after {attempts} attempts: {last}")]
    ResponseRejected { day: u32, attempts: u32, last: ResponseError },
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl AgentError {
    pub fn category(&self) -> &'static str {
        match self {
            AgentError::Backend { source, .. } => source.category(),
            AgentError::ResponseRejected { .. } => "response_rejected",
            AgentError::Env(_) => "env",
        }
    }
}

/// Everything observed and produced on one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayTrace {
    pub day: u32,
    pub price: Cents,
    pub soc_before: Energy,
    pub soc_after: Energy,
    pub action: Action,
    pub reward: Cents,
    pub cum_reward: Cents,
    pub in_blackout: bool,
    pub response: AgentResponse,
    /// Requests made for this day, including corrective retries.
    pub attempts: u32,
}

/// An aborted episode with the days completed before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct EpisodeFailure {
    pub error: AgentError,
    pub completed: Vec<DayTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub rollout: Rollout,
    pub days: Vec<DayTrace>,
}

pub struct Agent {
    pub persona: Persona,
    pub memory: AgentMemory,
    pub backend: Arc<dyn ChatBackend>,
    pub params: ChatBackendParams,
    pub seed: u64,
    pub cfg: BatteryConfig,
    pub model: PriceModel,
    pub schedule: InterventionSchedule,
}

impl Agent {
    pub fn new(
        persona: Persona,
        backend: Arc<dyn ChatBackend>,
        params: ChatBackendParams,
        seed: u64,
        cfg: BatteryConfig,
        model: PriceModel,
        schedule: InterventionSchedule,
    ) -> Agent {
        Agent { persona, memory: AgentMemory::default(), backend, params, seed, cfg, model, schedule }
    }

    /// Obtains a usable response for the day, re-asking with a corrective
    /// message up to `params.max_retries` times. State is untouched until a
    /// response validates.
    fn ask(&self, state: &EnvState, price: Cents) -> Result<(AgentResponse, u32), AgentError> {
        let mut prompt = build_prompt(&self.persona, state, price, &self.memory, &self.schedule, &self.cfg, &self.model);
        prompt.context.seed = self.seed;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let raw = self
                .backend
                .complete(&prompt, &self.params)
                .map_err(|source| AgentError::Backend { day: state.day, source })?;
            match parse_response(&raw, prompt.context.feasible) {
                Ok(resp) => return Ok((resp, attempts)),
                Err(last) if attempts > self.params.max_retries => {
                    return Err(AgentError::ResponseRejected { day: state.day, attempts, last });
                }
                Err(e) => prompt = prompt.with_correction(&e.to_string()),
            }
        }
    }

    pub fn step(&mut self, state: &EnvState, price: Cents) -> Result<(EnvState, DayTrace), AgentError> {
        let (response, attempts) = self.ask(state, price)?;
        let out = step(state, response.action, price, &self.cfg, &self.schedule)?;
        let in_blackout = self.schedule.is_blackout(state.day);
        self.memory.record(state.day, &response.journal, &response.reflection, in_blackout);
        let trace = DayTrace {
            day: state.day,
            price,
            soc_before: state.soc,
            soc_after: out.next_state.soc,
            action: out.applied_action,
            reward: out.reward,
            cum_reward: out.next_state.cum_reward,
            in_blackout,
            response,
            attempts,
        };
        Ok((out.next_state, trace))
    }

    /// Plays a full episode on a realized path, starting from fresh memory.
    pub fn run_episode(&mut self, path: &PricePath) -> Result<Episode, EpisodeFailure> {
        if path.len() != self.cfg.horizon as usize {
            let error = EnvError::InvalidConfig(format!("path has {} days, horizon is {}", path.len(), self.cfg.horizon)).into();
            return Err(EpisodeFailure { error, completed: Vec::new() });
        }
        self.memory = AgentMemory::with_window(self.memory.window);
        let mut state = EnvState::initial(&self.cfg, &self.schedule);
        let mut rollout = Rollout { states: vec![state], actions: Vec::new(), rewards: Vec::new() };
        let mut days = Vec::with_capacity(self.cfg.horizon as usize);
        for day in 1..=self.cfg.horizon {
            let (next, trace) = match self.step(&state, path.price_on(day)) {
                Ok(done) => done,
                Err(error) => return Err(EpisodeFailure { error, completed: days }),
            };
            rollout.actions.push(trace.action);
            rollout.rewards.push(trace.reward);
            rollout.states.push(next);
            days.push(trace);
            state = next;
        }
        Ok(Episode { rollout, days })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::backend::{MockBackend, MockScript};
    use crate::agent::persona::PersonaId;
    use crate::env::sample_price_path;
    use crate::policy::{evaluate_on_path, Greedy};

    fn agent(backend: MockBackend, schedule: InterventionSchedule) -> Agent {
        Agent::new(
            Persona::builtin(PersonaId::Realist),
            Arc::new(backend),
            ChatBackendParams::default(),
            7,
            BatteryConfig::default(),
            PriceModel::default(),
            schedule,
        )
    }

    #[test]
    fn greedy_script_matches_greedy_policy() {
        let cfg = BatteryConfig::default();
        let model = PriceModel::default();
        let path = sample_price_path(&model, cfg.horizon, 11);
        let mut a = agent(MockBackend::new(MockScript::Greedy), InterventionSchedule::none());
        let ep = a.run_episode(&path).unwrap();
        let expected = evaluate_on_path(&Greedy::new(cfg, model), &path, &cfg, &InterventionSchedule::none()).unwrap();
        assert_eq!(ep.rollout, expected);
        assert_eq!(a.memory.len(), 20);
    }

    #[test]
    fn malformed_first_reply_is_retried() {
        let path = sample_price_path(&PriceModel::default(), 20, 3);
        let mut backend = MockBackend::new(MockScript::Hold);
        backend.malformed_attempts = 1;
        let ep = agent(backend, InterventionSchedule::none()).run_episode(&path).unwrap();
        assert!(ep.days.iter().all(|d| d.attempts == 2 && d.action == Action::Hold));
    }

    #[test]
    fn exhausted_retries_reject_without_state_change() {
        let path = sample_price_path(&PriceModel::default(), 20, 3);
        let mut backend = MockBackend::new(MockScript::Hold);
        backend.malformed_attempts = 10;
        let mut a = agent(backend, InterventionSchedule::none());
        let state = EnvState::initial(&a.cfg, &a.schedule);
        let err = a.step(&state, path.price_on(1)).unwrap_err();
        assert!(matches!(err, AgentError::ResponseRejected { attempts: 4, .. }));
        assert!(a.memory.is_empty());
    }

    #[test]
    fn blackout_days_are_remembered() {
        let path = sample_price_path(&PriceModel::default(), 20, 5);
        let mut a = agent(MockBackend::new(MockScript::BlackoutDischarge), InterventionSchedule::treatment_default());
        let ep = a.run_episode(&path).unwrap();
        assert_eq!(a.memory.blackouts_seen, vec![8, 9]);
        assert!(ep.days[7].in_blackout);
    }
}
