//! Discrete home-battery arbitrage environment.
//!
//! One decision per day: charge one unit, discharge one unit, or hold. On
//! scheduled blackout days the grid is unavailable and the only choices are to
//! hold or to discharge the whole battery into the household (no revenue).
//! Days are 1-based; the episode ends at day `horizon + 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{trade_value, Cents, Energy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("action {action} is infeasible on day {day} with soc {soc}")]
    InfeasibleAction { day: u32, action: Action, soc: Energy },
    #[error("day {day} is outside 1..={horizon}")]
    DayOutOfRange { day: u32, horizon: u32 },
    #[error("trading {energy} at {price} per kWh is not a whole number of cents")]
    InexactMoney { price: Cents, energy: Energy },
}

/// Two-level iid daily price distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub low_price: Cents,
    pub high_price: Cents,
    pub prob_high: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel { low_price: Cents(500), high_price: Cents(1000), prob_high: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceLevel {
    Low,
    High,
}

impl PriceLevel {
    pub const ALL: [PriceLevel; 2] = [PriceLevel::Low, PriceLevel::High];

    pub fn index(self) -> usize {
        match self {
            PriceLevel::Low => 0,
            PriceLevel::High => 1,
        }
    }
}

impl PriceModel {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.low_price.0 > 0 && self.low_price < self.high_price) {
            return Err(EnvError::InvalidConfig(format!(
                "prices must satisfy 0 < low ({}) < high ({})",
                self.low_price, self.high_price
            )));
        }
        if !(0.0..=1.0).contains(&self.prob_high) {
            return Err(EnvError::InvalidConfig(format!(
                "prob_high {} is not a probability",
                self.prob_high
            )));
        }
        Ok(())
    }

    pub fn price(&self, level: PriceLevel) -> Cents {
        match level {
            PriceLevel::Low => self.low_price,
            PriceLevel::High => self.high_price,
        }
    }

    pub fn level_of(&self, price: Cents) -> Option<PriceLevel> {
        if price == self.low_price {
            Some(PriceLevel::Low)
        } else if price == self.high_price {
            Some(PriceLevel::High)
        } else {
            None
        }
    }

    pub fn probability(&self, level: PriceLevel) -> f64 {
        match level {
            PriceLevel::Low => 1.0 - self.prob_high,
            PriceLevel::High => self.prob_high,
        }
    }

    pub fn expected_price(&self) -> f64 {
        self.low_price.0 as f64 * (1.0 - self.prob_high) + self.high_price.0 as f64 * self.prob_high
    }
}

/// Realized daily prices for one episode, in cents per kWh.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PricePath {
    pub prices: Vec<Cents>,
}

impl PricePath {
    pub fn from_levels(model: &PriceModel, levels: &[PriceLevel]) -> PricePath {
        PricePath { prices: levels.iter().map(|&l| model.price(l)).collect() }
    }

    pub fn constant(model: &PriceModel, level: PriceLevel, horizon: u32) -> PricePath {
        PricePath { prices: vec![model.price(level); horizon as usize] }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Price on a 1-based day.
    pub fn price_on(&self, day: u32) -> Cents {
        self.prices[day as usize - 1]
    }

    /// Checks the path length and that every entry is one of the model's levels.
    pub fn validate(&self, model: &PriceModel, horizon: u32) -> Result<(), EnvError> {
        if self.prices.len() != horizon as usize {
            return Err(EnvError::InvalidConfig(format!(
                "price path has {} days, horizon is {horizon}",
                self.prices.len()
            )));
        }
        if let Some(bad) = self.prices.iter().find(|p| model.level_of(**p).is_none()) {
            return Err(EnvError::InvalidConfig(format!("price {bad} is not a model level")));
        }
        Ok(())
    }

    pub fn levels(&self, model: &PriceModel) -> Option<Vec<PriceLevel>> {
        self.prices.iter().map(|&p| model.level_of(p)).collect()
    }

    pub fn high_days(&self, model: &PriceModel) -> usize {
        self.prices.iter().filter(|&&p| p == model.high_price).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub capacity: Energy,
    pub floor: Energy,
    pub initial_soc: Energy,
    pub unit: Energy,
    pub horizon: u32,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            capacity: Energy(10_000),
            floor: Energy(0),
            initial_soc: Energy(5_000),
            unit: Energy(1_000),
            horizon: 20,
        }
    }
}

impl BatteryConfig {
    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_initial_soc(mut self, soc: Energy) -> Self {
        self.initial_soc = soc;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.unit.0 <= 0 {
            return bad(format!("unit {} must be positive", self.unit));
        }
        if self.horizon < 1 {
            return bad("horizon must be at least one day".into());
        }
        if self.floor.0 < 0 || self.floor > self.capacity {
            return bad(format!("floor {} must lie in 0..=capacity {}", self.floor, self.capacity));
        }
        if self.initial_soc < self.floor || self.initial_soc > self.capacity {
            return bad(format!(
                "initial soc {} must lie in [{}, {}]",
                self.initial_soc, self.floor, self.capacity
            ));
        }
        for (name, e) in [("capacity", self.capacity), ("floor", self.floor), ("initial_soc", self.initial_soc)] {
            if e.0 % self.unit.0 != 0 {
                return bad(format!("{name} {e} is not a multiple of the unit {}", self.unit));
            }
        }
        Ok(())
    }

    /// Validates the battery together with the prices it will trade at.
    pub fn validate_with(&self, model: &PriceModel) -> Result<(), EnvError> {
        self.validate()?;
        model.validate()?;
        for price in [model.low_price, model.high_price] {
            if trade_value(price, self.unit).is_none() {
                return Err(EnvError::InexactMoney { price, energy: self.unit });
            }
        }
        Ok(())
    }

    /// Number of reachable SoC levels, floor..=capacity in unit steps.
    pub fn soc_levels(&self) -> usize {
        ((self.capacity.0 - self.floor.0) / self.unit.0) as usize + 1
    }

    pub fn soc_index(&self, soc: Energy) -> usize {
        ((soc.0 - self.floor.0) / self.unit.0) as usize
    }

    pub fn soc_at(&self, index: usize) -> Energy {
        Energy(self.floor.0 + index as i64 * self.unit.0)
    }
}

/// Daily battery decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Charge,
    Discharge,
    Hold,
    #[serde(rename = "discharge_all")]
    BlackoutDischargeAll,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Charge, Action::Discharge, Action::Hold, Action::BlackoutDischargeAll];

    /// Canonical lowercase token, also used on the wire and in traces.
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Charge => "charge",
            Action::Discharge => "discharge",
            Action::Hold => "hold",
            Action::BlackoutDischargeAll => "discharge_all",
        }
    }

    /// Net energy leaving the battery (positive = discharge).
    pub fn energy_out(self, soc: Energy, cfg: &BatteryConfig) -> Energy {
        match self {
            Action::Charge => -cfg.unit,
            Action::Discharge => cfg.unit,
            Action::Hold => Energy::ZERO,
            Action::BlackoutDischargeAll => soc - cfg.floor,
        }
    }

    fn bit(self) -> u8 {
        match self {
            Action::Charge => 1,
            Action::Discharge => 2,
            Action::Hold => 4,
            Action::BlackoutDischargeAll => 8,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown action {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    /// Accepts the canonical tokens plus "nothing" for Hold, case-insensitively.
    fn from_str(s: &str) -> Result<Action, UnknownAction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "charge" => Ok(Action::Charge),
            "discharge" => Ok(Action::Discharge),
            "hold" | "nothing" => Ok(Action::Hold),
            "discharge_all" => Ok(Action::BlackoutDischargeAll),
            _ => Err(UnknownAction(s.to_string())),
        }
    }
}

/// Small set of actions, iterated in `Action::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn insert(&mut self, action: Action) {
        self.0 |= action.bit();
    }

    pub fn contains(&self, action: Action) -> bool {
        self.0 & action.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::empty();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Action::as_str).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

/// Days on which the household is disconnected from the grid.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterventionSchedule {
    pub blackout_days: BTreeSet<u32>,
}

impl InterventionSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn blackout(days: impl IntoIterator<Item = u32>) -> Self {
        InterventionSchedule { blackout_days: days.into_iter().collect() }
    }

    /// The treatment-arm default: blackout on days 8 and 9.
    pub fn treatment_default() -> Self {
        Self::blackout([8, 9])
    }

    pub fn is_blackout(&self, day: u32) -> bool {
        self.blackout_days.contains(&day)
    }

    pub fn is_empty(&self) -> bool {
        self.blackout_days.is_empty()
    }

    pub fn validate(&self, horizon: u32) -> Result<(), EnvError> {
        match self.blackout_days.iter().find(|&&d| d < 1 || d > horizon) {
            Some(&day) => Err(EnvError::DayOutOfRange { day, horizon }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub day: u32,
    pub soc: Energy,
    pub cum_reward: Cents,
    pub in_blackout: bool,
}

impl EnvState {
    pub fn initial(cfg: &BatteryConfig, schedule: &InterventionSchedule) -> EnvState {
        EnvState { day: 1, soc: cfg.initial_soc, cum_reward: Cents::ZERO, in_blackout: schedule.is_blackout(1) }
    }

    pub fn is_terminal(&self, cfg: &BatteryConfig) -> bool {
        self.day > cfg.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: Cents,
    pub applied_action: Action,
}

pub fn feasible_actions(state: &EnvState, cfg: &BatteryConfig, schedule: &InterventionSchedule) -> ActionSet {
    let mut set = ActionSet::empty();
    set.insert(Action::Hold);
    if schedule.is_blackout(state.day) {
        if state.soc > cfg.floor {
            set.insert(Action::BlackoutDischargeAll);
        }
    } else {
        if state.soc + cfg.unit <= cfg.capacity {
            set.insert(Action::Charge);
        }
        if state.soc - cfg.unit >= cfg.floor {
            set.insert(Action::Discharge);
        }
    }
    set
}

/// Applies one day's action. Infeasible actions are rejected, never clamped.
pub fn step(
    state: &EnvState,
    action: Action,
    price: Cents,
    cfg: &BatteryConfig,
    schedule: &InterventionSchedule,
) -> Result<StepOutcome, EnvError> {
    if state.day < 1 || state.day > cfg.horizon {
        return Err(EnvError::DayOutOfRange { day: state.day, horizon: cfg.horizon });
    }
    if !feasible_actions(state, cfg, schedule).contains(action) {
        return Err(EnvError::InfeasibleAction { day: state.day, action, soc: state.soc });
    }
    let out = action.energy_out(state.soc, cfg);
    let reward = match action {
        Action::BlackoutDischargeAll | Action::Hold => Cents::ZERO,
        Action::Charge | Action::Discharge => {
            trade_value(price, out).ok_or(EnvError::InexactMoney { price, energy: out })?
        }
    };
    let day = state.day + 1;
    let next_state = EnvState {
        day,
        soc: state.soc - out,
        cum_reward: state.cum_reward + reward,
        in_blackout: schedule.is_blackout(day),
    };
    Ok(StepOutcome { next_state, reward, applied_action: action })
}

/// Reproducible iid price path: identical seeds give identical paths.
pub fn sample_price_path(model: &PriceModel, horizon: u32, seed: u64) -> PricePath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prices = (0..horizon)
        .map(|_| {
            let high = rng.random::<f64>() < model.prob_high;
            model.price(if high { PriceLevel::High } else { PriceLevel::Low })
        })
        .collect();
    PricePath { prices }
}

/// Leftover energy at the end of the horizon is worth nothing.
pub fn terminal_reward(_state: &EnvState) -> Cents {
    Cents::ZERO
}
