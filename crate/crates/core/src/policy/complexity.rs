use num::BigRational;
use serde::{Deserialize, Serialize};

use super::dp::to_f64;
use super::{evaluate_on_path, exact_expected_reward, DpPolicy, Greedy, PolicyError};
use crate::env::{BatteryConfig, InterventionSchedule, PriceModel, PricePath};
use crate::units::Cents;

/// Upper bound (exclusive) of the easy bucket.
pub const EASY_MAX: f64 = 0.3;
/// Upper bound (exclusive) of the medium bucket.
pub const MEDIUM_MAX: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn classify(rho: f64) -> Difficulty {
        if rho < EASY_MAX {
            Difficulty::Easy
        } else if rho < MEDIUM_MAX {
            Difficulty::Medium
        } else {
            Difficulty::Hard
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub rho: f64,
    pub r_dp: Cents,
    pub r_greedy: Cents,
    pub label: Difficulty,
    /// Set when greedy loses money on the path, so rho may exceed 1.
    pub greedy_negative: bool,
    pub path: PricePath,
}

/// ρ from the realized rewards of the DP and greedy rollouts on a fixed path.
pub fn complexity_rho(dp: &DpPolicy, path: &PricePath, cfg: &BatteryConfig, model: &PriceModel) -> Result<ComplexityReport, PolicyError> {
    let none = InterventionSchedule::none();
    let r_dp = evaluate_on_path(dp, path, cfg, &none)?.total_reward();
    let r_greedy = evaluate_on_path(&Greedy::new(*cfg, *model), path, cfg, &none)?.total_reward();
    if r_dp.0 <= 0 {
        return Err(PolicyError::DegenerateScenario(r_dp));
    }
    let rho = (r_dp.0 - r_greedy.0) as f64 / r_dp.0 as f64;
    Ok(ComplexityReport {
        rho,
        r_dp,
        r_greedy,
        label: Difficulty::classify(rho),
        greedy_negative: r_greedy.0 < 0,
        path: path.clone(),
    })
}

/// ρ on the stochastic model from exact expectations: `(ρ, E[r_dp], E[r_greedy])`.
pub fn expected_rho(dp: &DpPolicy, cfg: &BatteryConfig, model: &PriceModel) -> Result<(f64, BigRational, BigRational), PolicyError> {
    let e_dp = exact_expected_reward(dp, cfg, model)?;
    let e_greedy = exact_expected_reward(&Greedy::new(*cfg, *model), cfg, model)?;
    if e_dp <= BigRational::from_integer(0.into()) {
        return Err(PolicyError::DegenerateScenario(Cents(to_f64(&e_dp).round() as i64)));
    }
    let rho = to_f64(&((&e_dp - &e_greedy) / &e_dp));
    Ok((rho, e_dp, e_greedy))
}
