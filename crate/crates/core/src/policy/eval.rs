use num::{BigRational, One, Zero};

use super::{Observation, Policy};
use crate::env::{feasible_actions, step, Action, BatteryConfig, EnvError, EnvState, InterventionSchedule, PriceLevel, PriceModel, PricePath};
use crate::units::{trade_value, Cents};

/// Exact rational value of a probability given as a float.
pub fn probability(p: f64) -> BigRational {
    BigRational::from_float(p).expect("probability is finite")
}

/// Exact expected total reward of `policy` on the blackout-free stochastic
/// model, by propagating the SoC distribution forward day by day.
pub fn exact_expected_reward(policy: &dyn Policy, cfg: &BatteryConfig, model: &PriceModel) -> Result<BigRational, EnvError> {
    cfg.validate_with(model)?;
    let p_high = probability(model.prob_high);
    let p_low = BigRational::one() - &p_high;
    let n = cfg.soc_levels();

    let mut dist = vec![BigRational::zero(); n];
    dist[cfg.soc_index(cfg.initial_soc)] = BigRational::one();
    let mut total = BigRational::zero();
    let none = InterventionSchedule::none();

    for day in 1..=cfg.horizon {
        let mut next = vec![BigRational::zero(); n];
        for (s, mass) in dist.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            let soc = cfg.soc_at(s);
            let state = EnvState { day, soc, cum_reward: Cents::ZERO, in_blackout: false };
            let feasible = feasible_actions(&state, cfg, &none);
            for level in PriceLevel::ALL {
                let p = if level == PriceLevel::High { &p_high } else { &p_low };
                if p.is_zero() {
                    continue;
                }
                let price = model.price(level);
                let action = policy.decide(&Observation { day, soc, price, feasible, in_blackout: false });
                if !feasible.contains(action) {
                    return Err(EnvError::InfeasibleAction { day, action, soc });
                }
                let out = action.energy_out(soc, cfg);
                let reward = trade_value(price, out).ok_or(EnvError::InexactMoney { price, energy: out })?;
                let weight = mass * p;
                total += &weight * BigRational::from_integer(reward.0.into());
                next[cfg.soc_index(soc - out)] += weight;
            }
        }
        dist = next;
    }
    Ok(total)
}

/// Deterministic rollout of a policy on one realized price path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rollout {
    /// States at the start of days 1..=T+1.
    pub states: Vec<EnvState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<Cents>,
}

impl Rollout {
    pub fn total_reward(&self) -> Cents {
        self.states.last().map(|s| s.cum_reward).unwrap_or_default()
    }

    pub fn terminal_state(&self) -> &EnvState {
        self.states.last().expect("rollout has an initial state")
    }
}

pub fn evaluate_on_path(
    policy: &dyn Policy,
    path: &PricePath,
    cfg: &BatteryConfig,
    schedule: &InterventionSchedule,
) -> Result<Rollout, EnvError> {
    if path.len() != cfg.horizon as usize {
        return Err(EnvError::InvalidConfig(format!("path has {} days, horizon is {}", path.len(), cfg.horizon)));
    }
    let mut state = EnvState::initial(cfg, schedule);
    let mut rollout = Rollout {
        states: Vec::with_capacity(cfg.horizon as usize + 1),
        actions: Vec::with_capacity(cfg.horizon as usize),
        rewards: Vec::with_capacity(cfg.horizon as usize),
    };
    rollout.states.push(state);
    for day in 1..=cfg.horizon {
        let price = path.price_on(day);
        let obs = Observation {
            day,
            soc: state.soc,
            price,
            feasible: feasible_actions(&state, cfg, schedule),
            in_blackout: state.in_blackout,
        };
        let out = step(&state, policy.decide(&obs), price, cfg, schedule)?;
        state = out.next_state;
        rollout.actions.push(out.applied_action);
        rollout.rewards.push(out.reward);
        rollout.states.push(state);
    }
    Ok(rollout)
}
