//! Backward induction over the full discrete (day, SoC, price) state space.
//!
//! The decision maker observes today's price before acting, so values are
//! indexed by the current price level and expectations run over tomorrow's
//! price. All values are exact rationals.

use num::{BigRational, Zero};
use serde::{Deserialize, Serialize};

use super::{Observation, Policy};
use crate::env::{Action, BatteryConfig, EnvError, PriceLevel, PriceModel};
use crate::units::{trade_value, Cents, Energy};

use super::eval::probability;

pub const DP_SCHEMA: &str = "agentlab.dp/v1";

/// Expected optimal reward-to-go `V[t][s][price]` for days `1..=T+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: u32,
    soc_levels: usize,
    values: Vec<BigRational>,
}

impl ValueTable {
    fn index(&self, day: u32, soc_index: usize, level: PriceLevel) -> usize {
        debug_assert!((1..=self.horizon + 1).contains(&day));
        ((day as usize - 1) * self.soc_levels + soc_index) * 2 + level.index()
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn soc_levels(&self) -> usize {
        self.soc_levels
    }

    pub fn value(&self, day: u32, soc_index: usize, level: PriceLevel) -> &BigRational {
        &self.values[self.index(day, soc_index, level)]
    }

    /// Expected value before today's price is revealed.
    pub fn expected(&self, day: u32, soc_index: usize, model: &PriceModel) -> BigRational {
        let p_high = probability(model.prob_high);
        let p_low = BigRational::from_integer(1.into()) - &p_high;
        p_low * self.value(day, soc_index, PriceLevel::Low) + p_high * self.value(day, soc_index, PriceLevel::High)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(to_f64).collect()
    }
}

/// Argmax action for every `(t, s, price)` with `t ∈ 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPolicy {
    cfg: BatteryConfig,
    model: PriceModel,
    actions: Vec<Action>,
}

impl DpPolicy {
    fn index(&self, day: u32, soc_index: usize, level: PriceLevel) -> usize {
        ((day as usize - 1) * self.cfg.soc_levels() + soc_index) * 2 + level.index()
    }

    pub fn action(&self, day: u32, soc_index: usize, level: PriceLevel) -> Action {
        self.actions[self.index(day, soc_index, level)]
    }

    pub fn cfg(&self) -> &BatteryConfig {
        &self.cfg
    }

    pub fn model(&self) -> &PriceModel {
        &self.model
    }
}

impl Policy for DpPolicy {
    /// The table is blackout-free; on blackout days (or off-model prices) the
    /// policy holds.
    fn decide(&self, obs: &Observation) -> Action {
        if obs.in_blackout || obs.day < 1 || obs.day > self.cfg.horizon {
            return Action::Hold;
        }
        match self.model.level_of(obs.price) {
            Some(level) => self.action(obs.day, self.cfg.soc_index(obs.soc), level),
            None => Action::Hold,
        }
    }

    fn name(&self) -> &str {
        "dp"
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

fn money(c: Cents) -> BigRational {
    BigRational::from_integer(c.0.into())
}

/// Solves the finite-horizon problem exactly. Ties prefer Discharge, then Hold,
/// then Charge.
pub fn solve_dp(cfg: &BatteryConfig, model: &PriceModel) -> Result<(ValueTable, DpPolicy), EnvError> {
    cfg.validate_with(model)?;
    let n = cfg.soc_levels();
    let horizon = cfg.horizon;
    let p_high = probability(model.prob_high);
    let p_low = BigRational::from_integer(1.into()) - &p_high;

    let mut values = vec![BigRational::zero(); (horizon as usize + 1) * n * 2];
    let mut actions = vec![Action::Hold; horizon as usize * n * 2];
    let slot = |day: u32, s: usize, level: PriceLevel| ((day as usize - 1) * n + s) * 2 + level.index();

    // continuation[s] = E over the next price of V_{t+1}(s, ·); zero after the horizon
    let mut continuation = vec![BigRational::zero(); n];
    for day in (1..=horizon).rev() {
        for s in 0..n {
            let soc = cfg.soc_at(s);
            for level in PriceLevel::ALL {
                let price = model.price(level);
                let mut best: Option<(Action, BigRational)> = None;
                for action in [Action::Discharge, Action::Hold, Action::Charge] {
                    let out = action.energy_out(soc, cfg);
                    let next = soc - out;
                    if next < cfg.floor || next > cfg.capacity {
                        continue;
                    }
                    let reward = trade_value(price, out).ok_or(EnvError::InexactMoney { price, energy: out })?;
                    let q = money(reward) + &continuation[cfg.soc_index(next)];
                    if best.as_ref().is_none_or(|(_, v)| q > *v) {
                        best = Some((action, q));
                    }
                }
                let (action, value) = best.expect("hold is always feasible");
                actions[slot(day, s, level)] = action;
                values[slot(day, s, level)] = value;
            }
        }
        continuation = (0..n)
            .map(|s| &p_low * &values[slot(day, s, PriceLevel::Low)] + &p_high * &values[slot(day, s, PriceLevel::High)])
            .collect();
    }

    Ok((
        ValueTable { horizon, soc_levels: n, values },
        DpPolicy { cfg: *cfg, model: *model, actions },
    ))
}

/// Versioned JSON form of a solved table: index space plus flat arrays in
/// `[day][soc][price]` order (price fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub schema: String,
    pub horizon: u32,
    pub soc_levels: usize,
    pub floor_wh: i64,
    pub unit_wh: i64,
    pub price_levels_cents: [i64; 2],
    pub prob_high: f64,
    pub index_order: [String; 3],
    /// Days 1..=T+1.
    pub values_cents: Vec<f64>,
    /// Exact values as "numerator/denominator" strings, same order.
    pub values_exact: Vec<String>,
    /// Days 1..=T.
    pub actions: Vec<Action>,
    pub expected_reward_cents: f64,
}

impl PolicyDocument {
    pub fn new(table: &ValueTable, policy: &DpPolicy) -> PolicyDocument {
        let cfg = &policy.cfg;
        PolicyDocument {
            schema: DP_SCHEMA.to_string(),
            horizon: table.horizon,
            soc_levels: table.soc_levels,
            floor_wh: cfg.floor.wh(),
            unit_wh: cfg.unit.wh(),
            price_levels_cents: [policy.model.low_price.0, policy.model.high_price.0],
            prob_high: policy.model.prob_high,
            index_order: ["day".into(), "soc".into(), "price".into()],
            values_cents: table.as_f64(),
            values_exact: table.values.iter().map(|v| v.to_string()).collect(),
            actions: policy.actions.clone(),
            expected_reward_cents: to_f64(&table.expected(1, cfg.soc_index(cfg.initial_soc), &policy.model)),
        }
    }

    /// Rebuilds the policy table; values are not needed to act.
    pub fn to_policy(&self, cfg: &BatteryConfig, model: &PriceModel) -> Result<DpPolicy, EnvError> {
        if self.schema != DP_SCHEMA {
            return Err(EnvError::InvalidConfig(format!("unsupported policy schema {}", self.schema)));
        }
        let expected = cfg.horizon as usize * cfg.soc_levels() * 2;
        if self.actions.len() != expected || self.floor_wh != cfg.floor.wh() || self.unit_wh != cfg.unit.wh() {
            return Err(EnvError::InvalidConfig("policy document does not match battery config".into()));
        }
        Ok(DpPolicy { cfg: *cfg, model: *model, actions: self.actions.clone() })
    }
}

impl DpPolicy {
    pub fn soc_of(&self, index: usize) -> Energy {
        self.cfg.soc_at(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dollars(r: &BigRational) -> f64 {
        to_f64(r) / 100.0
    }

    #[test]
    fn last_day_discharges() {
        let cfg = BatteryConfig::default();
        let model = PriceModel::default();
        let (values, policy) = solve_dp(&cfg, &model).unwrap();
        for s in 1..cfg.soc_levels() {
            for level in PriceLevel::ALL {
                assert_eq!(policy.action(20, s, level), Action::Discharge);
                assert_eq!(values.value(20, s, level), &money(model.price(level)));
            }
        }
        assert_eq!(policy.action(20, 0, PriceLevel::Low), Action::Hold);
    }

    #[test]
    fn two_day_values_from_empty() {
        // enumerated by hand over the four price paths
        let cfg = BatteryConfig::default().with_horizon(2).with_initial_soc(Energy(0));
        let (values, policy) = solve_dp(&cfg, &PriceModel::default()).unwrap();
        assert_eq!(dollars(values.value(1, 0, PriceLevel::Low)), 2.5);
        assert_eq!(dollars(values.value(1, 0, PriceLevel::High)), 0.0);
        assert_eq!(policy.action(1, 0, PriceLevel::Low), Action::Charge);
        assert_eq!(policy.action(1, 0, PriceLevel::High), Action::Hold);
        assert!(values.value(3, 4, PriceLevel::High).is_zero());
    }

    #[test]
    fn document_round_trip() {
        let cfg = BatteryConfig::default().with_horizon(4);
        let model = PriceModel::default();
        let (values, policy) = solve_dp(&cfg, &model).unwrap();
        let doc = PolicyDocument::new(&values, &policy);
        assert_eq!(doc.values_cents.len(), 5 * 11 * 2);
        let json = serde_json::to_string(&doc).unwrap();
        let back: PolicyDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_policy(&cfg, &model).unwrap(), policy);
        assert!(back.to_policy(&cfg.with_horizon(5), &model).is_err());
    }
}
