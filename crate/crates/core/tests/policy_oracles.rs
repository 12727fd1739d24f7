//! Independent checks of the DP solver and exact evaluators against
//! exhaustive enumeration over every price path.

use agentlab_core::env::{Action, BatteryConfig, InterventionSchedule, PriceLevel, PriceModel, PricePath};
use agentlab_core::policy::{evaluate_on_path, exact_expected_reward, solve_dp, Greedy, Policy};
use agentlab_core::units::Energy;
use num::{BigInt, BigRational, Zero};

const LOW: i128 = 500;
const HIGH: i128 = 1000;
const CAP: i128 = 10;

/// Optimal expected reward, scaled by 2^T, via recursion over every price
/// history prefix (no state aggregation across histories). Returns the value
/// vector over SoC before the next price is revealed.
fn optimum_over_histories(remaining: u32) -> Vec<i128> {
    // At a node with `remaining` days left, returns E[value] * 2^remaining
    // for every soc in 0..=CAP. Both children are expanded explicitly.
    if remaining == 0 {
        return vec![0; (CAP + 1) as usize];
    }
    let after_low = optimum_over_histories(remaining - 1);
    let after_high = optimum_over_histories(remaining - 1);
    let mut out = vec![0i128; (CAP + 1) as usize];
    for s in 0..=CAP {
        let mut total = 0;
        for (price, cont) in [(LOW, &after_low), (HIGH, &after_high)] {
            let scale = 1i128 << (remaining - 1);
            let mut best = i128::MIN;
            for u in [-1i128, 0, 1] {
                let next = s - u;
                if !(0..=CAP).contains(&next) {
                    continue;
                }
                best = best.max(price * u * scale + cont[next as usize]);
            }
            total += best;
        }
        out[s as usize] = total;
    }
    out
}

fn all_paths(model: &PriceModel, horizon: u32) -> impl Iterator<Item = PricePath> + '_ {
    (0u32..(1 << horizon)).map(move |bits| {
        let levels: Vec<_> = (0..horizon)
            .map(|d| if bits >> d & 1 == 1 { PriceLevel::High } else { PriceLevel::Low })
            .collect();
        PricePath::from_levels(model, &levels)
    })
}

fn scaled(num: i128, horizon: u32) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(1i128 << horizon))
}

/// Expected realized reward over all 2^T equally likely paths.
fn enumerate_expected(policy: &dyn Policy, cfg: &BatteryConfig, model: &PriceModel) -> BigRational {
    let none = InterventionSchedule::none();
    let sum: i128 = all_paths(model, cfg.horizon)
        .map(|p| evaluate_on_path(policy, &p, cfg, &none).unwrap().total_reward().0 as i128)
        .sum();
    scaled(sum, cfg.horizon)
}

#[test]
fn dp_matches_history_enumeration_up_to_twelve_days() {
    let model = PriceModel::default();
    for horizon in 1..=12 {
        let oracle = optimum_over_histories(horizon);
        for s0 in 0..=10 {
            let cfg = BatteryConfig::default().with_horizon(horizon).with_initial_soc(Energy(s0 * 1000));
            let (values, dp) = solve_dp(&cfg, &model).unwrap();
            let exact = exact_expected_reward(&dp, &cfg, &model).unwrap();
            assert_eq!(exact, scaled(oracle[s0 as usize], horizon), "T={horizon} s0={s0}");
            assert_eq!(values.expected(1, s0 as usize, &model), exact);
        }
    }
}

#[test]
fn exact_evaluator_matches_path_enumeration() {
    let model = PriceModel::default();
    for horizon in [1, 2, 5, 9, 12] {
        for s0 in [0, 3, 5, 10] {
            let cfg = BatteryConfig::default().with_horizon(horizon).with_initial_soc(Energy(s0 * 1000));
            let (_, dp) = solve_dp(&cfg, &model).unwrap();
            let greedy = Greedy::new(cfg, model);
            assert_eq!(exact_expected_reward(&dp, &cfg, &model).unwrap(), enumerate_expected(&dp, &cfg, &model));
            assert_eq!(exact_expected_reward(&greedy, &cfg, &model).unwrap(), enumerate_expected(&greedy, &cfg, &model));
        }
    }
}

#[test]
fn dp_dominates_greedy_everywhere_and_strictly_at_defaults() {
    let model = PriceModel::default();
    for horizon in 1..=20 {
        for s0 in 0..=10 {
            let cfg = BatteryConfig::default().with_horizon(horizon).with_initial_soc(Energy(s0 * 1000));
            let (_, dp) = solve_dp(&cfg, &model).unwrap();
            let e_dp = exact_expected_reward(&dp, &cfg, &model).unwrap();
            let e_g = exact_expected_reward(&Greedy::new(cfg, model), &cfg, &model).unwrap();
            assert!(e_dp >= e_g, "T={horizon} s0={s0}");
        }
    }
    let cfg = BatteryConfig::default();
    let (_, dp) = solve_dp(&cfg, &model).unwrap();
    let e_dp = exact_expected_reward(&dp, &cfg, &model).unwrap();
    let e_g = exact_expected_reward(&Greedy::new(cfg, model), &cfg, &model).unwrap();
    assert!(e_dp > e_g);
}

#[test]
fn bellman_consistency_and_table_shape() {
    let cfg = BatteryConfig::default();
    let model = PriceModel::default();
    let (values, dp) = solve_dp(&cfg, &model).unwrap();
    let half = BigRational::new(1.into(), 2.into());
    for day in 1..=cfg.horizon + 1 {
        for s in 0..cfg.soc_levels() {
            for level in PriceLevel::ALL {
                if day == cfg.horizon + 1 {
                    assert!(values.value(day, s, level).is_zero());
                    continue;
                }
                let action = dp.action(day, s, level);
                let u: i64 = match action {
                    Action::Charge => -1,
                    Action::Discharge => 1,
                    Action::Hold => 0,
                    Action::BlackoutDischargeAll => unreachable!("dp never plans blackout discharge"),
                };
                let next = s as i64 - u;
                assert!((0..=10).contains(&next), "stored action infeasible at ({day},{s},{level:?})");
                let price = model.price(level).0 * u;
                let cont = &half * (values.value(day + 1, next as usize, PriceLevel::Low) + values.value(day + 1, next as usize, PriceLevel::High));
                assert_eq!(values.value(day, s, level), &(BigRational::from_integer(price.into()) + cont));
            }
        }
    }
}

#[test]
fn values_are_monotone_with_bounded_marginal_value() {
    let cfg = BatteryConfig::default();
    let model = PriceModel::default();
    let (values, _) = solve_dp(&cfg, &model).unwrap();
    let bound = BigRational::from_integer(model.high_price.0.into());
    for day in 1..=cfg.horizon {
        for level in PriceLevel::ALL {
            for s in 1..cfg.soc_levels() {
                let diff = values.value(day, s, level) - values.value(day, s - 1, level);
                assert!(diff >= BigRational::zero());
                assert!(diff <= bound);
            }
        }
        // A high price is never worse when the battery is full; elsewhere the
        // two price levels differ by at most the price spread.
        let full = cfg.soc_levels() - 1;
        assert!(values.value(day, full, PriceLevel::High) >= values.value(day, full, PriceLevel::Low));
        let spread = BigRational::from_integer((model.high_price.0 - model.low_price.0).into());
        for s in 0..cfg.soc_levels() {
            let gap = values.value(day, s, PriceLevel::High) - values.value(day, s, PriceLevel::Low);
            assert!(gap.clone() <= spread.clone() && -gap <= spread.clone());
        }
    }
}

#[test]
fn cheap_charging_day_can_beat_a_high_price_day() {
    // Near-empty battery with many days left: buying at the low price is worth
    // more than selling the last unit at the high price.
    let cfg = BatteryConfig::default();
    let model = PriceModel::default();
    let (values, dp) = solve_dp(&cfg, &model).unwrap();
    assert!(values.value(8, 1, PriceLevel::Low) > values.value(8, 1, PriceLevel::High));
    assert_eq!(dp.action(8, 1, PriceLevel::Low), Action::Charge);
}

#[test]
fn single_day_expectation_is_mean_price() {
    let model = PriceModel::default();
    let cfg = BatteryConfig::default().with_horizon(1);
    let (_, dp) = solve_dp(&cfg, &model).unwrap();
    assert_eq!(exact_expected_reward(&dp, &cfg, &model).unwrap(), BigRational::from_integer(750.into()));
    let empty = cfg.with_initial_soc(Energy(0));
    let (_, dp) = solve_dp(&empty, &model).unwrap();
    assert!(exact_expected_reward(&dp, &empty, &model).unwrap().is_zero());
}
