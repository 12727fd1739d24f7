//! Rationality benchmarks: the exact DP optimum, the greedy heuristic, exact
//! and path-wise evaluators, and the normalized DP–greedy gap (ρ).

mod complexity;
mod dp;
mod eval;

pub use complexity::{complexity_rho, expected_rho, ComplexityReport, Difficulty, EASY_MAX, MEDIUM_MAX};
pub use dp::{solve_dp, to_f64, DpPolicy, PolicyDocument, ValueTable, DP_SCHEMA};
pub use eval::{evaluate_on_path, exact_expected_reward, probability, Rollout};

use thiserror::Error;

use crate::env::{Action, ActionSet, BatteryConfig, EnvError, PriceModel};
use crate::units::{Cents, Energy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("rho is undefined: DP reward on this path is {0}")]
    DegenerateScenario(Cents),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// What a policy sees before acting on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub day: u32,
    pub soc: Energy,
    pub price: Cents,
    pub feasible: ActionSet,
    pub in_blackout: bool,
}

/// A (possibly state-dependent) decision rule for one episode.
pub trait Policy: Send + Sync {
    fn decide(&self, obs: &Observation) -> Action;

    fn name(&self) -> &str;
}

/// Charge at the low price, discharge at the high price, within bounds.
pub fn greedy_action(price: Cents, soc: Energy, cfg: &BatteryConfig, model: &PriceModel) -> Action {
    if price == model.low_price && soc < cfg.capacity {
        Action::Charge
    } else if price == model.high_price && soc > cfg.floor {
        Action::Discharge
    } else {
        Action::Hold
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Greedy {
    pub cfg: BatteryConfig,
    pub model: PriceModel,
}

impl Greedy {
    pub fn new(cfg: BatteryConfig, model: PriceModel) -> Self {
        Greedy { cfg, model }
    }
}

impl Policy for Greedy {
    /// Holds on blackout days: there is no price to react to.
    fn decide(&self, obs: &Observation) -> Action {
        if obs.in_blackout {
            return Action::Hold;
        }
        greedy_action(obs.price, obs.soc, &self.cfg, &self.model)
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HoldAlways;

impl Policy for HoldAlways {
    fn decide(&self, _obs: &Observation) -> Action {
        Action::Hold
    }

    fn name(&self) -> &str {
        "hold"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_rule_examples() {
        let cfg = BatteryConfig::default();
        let model = PriceModel::default();
        assert_eq!(greedy_action(Cents(500), Energy(5000), &cfg, &model), Action::Charge);
        assert_eq!(greedy_action(Cents(1000), Energy(5000), &cfg, &model), Action::Discharge);
        assert_eq!(greedy_action(Cents(1000), Energy(0), &cfg, &model), Action::Hold);
        assert_eq!(greedy_action(Cents(500), Energy(10_000), &cfg, &model), Action::Hold);
    }
}
