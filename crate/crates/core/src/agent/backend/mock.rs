//! Deterministic offline backend: acts by a scripted policy and writes
//! persona-flavored text from seeded phrase banks.

use std::fmt;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BackendError, ChatBackend, ChatBackendParams};
use crate::agent::persona::PersonaId;
use crate::agent::prompt::{action_token, DailyPrompt, PromptContext};
use crate::env::{Action, EnvError, PriceModel};
use crate::policy::{greedy_action, solve_dp, DpPolicy, Observation, Policy};
use crate::units::Energy;
use crate::BatteryConfig;

/// Decision rule the mock follows.
#[derive(Debug, Clone)]
pub enum MockScript {
    Greedy,
    Hold,
    Dp(Arc<DpPolicy>),
    /// Follows `base`, but once it has lived through a blackout it never
    /// discharges below `reserve`. Holds on blackout days.
    ReserveKeeper { reserve: Energy, base: Arc<MockScript> },
    /// Discharges everything on blackout days, greedy otherwise.
    BlackoutDischarge,
}

impl MockScript {
    pub fn name(&self) -> &'static str {
        match self {
            MockScript::Greedy => "greedy",
            MockScript::Hold => "hold",
            MockScript::Dp(_) => "dp",
            MockScript::ReserveKeeper { base, .. } => match base.as_ref() {
                MockScript::Greedy => "greedy-reserve-keeper",
                _ => "reserve-keeper",
            },
            MockScript::BlackoutDischarge => "blackout-discharge",
        }
    }

    pub fn decide(&self, ctx: &PromptContext) -> Action {
        let greedy = || greedy_action(ctx.price, ctx.soc, &ctx.cfg, &ctx.model);
        match self {
            MockScript::Hold => Action::Hold,
            MockScript::Greedy => {
                if ctx.in_blackout {
                    Action::Hold
                } else {
                    greedy()
                }
            }
            MockScript::Dp(policy) => policy.decide(&Observation {
                day: ctx.day,
                soc: ctx.soc,
                price: ctx.price,
                feasible: ctx.feasible,
                in_blackout: ctx.in_blackout,
            }),
            MockScript::ReserveKeeper { reserve, base } => {
                if ctx.in_blackout {
                    return Action::Hold;
                }
                match base.decide(ctx) {
                    Action::Discharge if !ctx.blackouts_seen.is_empty() && ctx.soc - ctx.cfg.unit < *reserve => Action::Hold,
                    other => other,
                }
            }
            MockScript::BlackoutDischarge => {
                if ctx.in_blackout {
                    if ctx.feasible.contains(Action::BlackoutDischargeAll) {
                        Action::BlackoutDischargeAll
                    } else {
                        Action::Hold
                    }
                } else {
                    greedy()
                }
            }
        }
    }
}

/// Vocabulary family used for generated text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhraseBank {
    Profit,
    Balance,
    Affect,
    Preparedness,
}

impl PhraseBank {
    pub fn for_persona(id: PersonaId) -> PhraseBank {
        match id {
            PersonaId::Thinker => PhraseBank::Profit,
            PersonaId::Realist => PhraseBank::Balance,
            PersonaId::Feeler => PhraseBank::Affect,
        }
    }

    fn thoughts(self) -> &'static [&'static str] {
        match self {
            PhraseBank::Profit => &[
                "The price is {price} per kWh and I hold {soc} kWh. The expected profit of each option is clear, so the optimal move is to {act}.",
                "Comparing the expected value of selling now against later arbitrage, maximizing total earnings means I should {act}.",
                "My strategy is a numbers game: with {soc} kWh stored and a {price} price, the profit calculation favors an order to {act}.",
                "Earnings depend on buying low and selling high; at {price} the optimal strategy is to {act}.",
            ],
            PhraseBank::Balance => &[
                "With {soc} kWh stored and the price at {price}, a practical, balanced choice is to {act} and keep a sensible reserve.",
                "I weigh today's income against a steady reserve; the budget says to {act}.",
                "Years of managing cash flow tell me to stay sensible: {act}, keep some reserve, and stay balanced.",
                "A practical household budget needs both savings and income, so I will {act} today.",
            ],
            PhraseBank::Affect => &[
                "Something feels right about this moment; my heart tells me to {act}.",
                "It feels like the energy wants to flow, and my intuition whispers that I should {act}.",
                "I listen to my feelings rather than numbers, and they gently say: {act}.",
                "Like a quiet tide in a long journey, this feels like the time to {act}.",
            ],
            PhraseBank::Preparedness => &[
                "After the blackout, preparedness matters most; I will {act} and protect my backup reserve for any outage.",
                "Another outage could come, so security and emergency backup guide me to {act}.",
                "The blackout taught me caution: keep a safety reserve, be prepared, and {act}.",
                "Emergency preparedness first; with {soc} kWh in reserve I choose to {act}.",
            ],
        }
    }

    fn reflections(self) -> &'static [&'static str] {
        match self {
            PhraseBank::Profit => &[
                "This action serves my goal of maximizing earnings; the strategy remains optimal.",
                "Pros: locks in profit. Cons: slight opportunity cost. Overall the expected value is positive.",
                "The decision follows a disciplined arbitrage strategy aimed at maximum profit.",
            ],
            PhraseBank::Balance => &[
                "This keeps my budget balanced between income and reserve, which feels practical.",
                "Pros: steady income. Cons: a smaller reserve. A sensible balance overall.",
                "I am balancing earnings and savings the way a careful bookkeeper would.",
            ],
            PhraseBank::Affect => &[
                "This choice feels warm and true to my heart; it is part of the journey.",
                "Acting on intuition brings harmony, like sharing energy with the world.",
                "It feels like giving back and letting the flow of energy guide us.",
            ],
            PhraseBank::Preparedness => &[
                "Keeping a backup reserve protects my household's security during any blackout.",
                "Preparedness for an outage now outweighs short-term income; safety first.",
                "This cautious choice keeps emergency energy ready for the next blackout.",
            ],
        }
    }

    fn journals(self) -> &'static [&'static str] {
        match self {
            PhraseBank::Profit => &[
                "Day {day}: decided to {act} at {price}; strategy on track for maximum earnings.",
                "Day {day}: profit focus, {soc} kWh stored; keep exploiting price spreads.",
                "Day {day}: optimal arbitrage, expected earnings rising.",
            ],
            PhraseBank::Balance => &[
                "Day {day}: chose to {act}; budget balanced, reserve kept sensible.",
                "Day {day}: steady approach, {soc} kWh kept for practical needs.",
                "Day {day}: balanced income and savings again.",
            ],
            PhraseBank::Affect => &[
                "The journey continues; today I chose to {act} because it felt right.",
                "My heart feels calm; the energy flows like a gentle river.",
                "Warmth in the home, harmony in the heart, trust in intuition.",
            ],
            PhraseBank::Preparedness => &[
                "Day {day}: preparedness first, backup reserve of {soc} kWh kept for emergencies.",
                "Day {day}: after the blackout, security and caution guide every choice.",
                "Day {day}: outage readiness maintained; reserve protected.",
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    pub script: MockScript,
    /// Switch to the preparedness bank once a blackout has been experienced.
    pub switch_bank_after_blackout: bool,
    /// Number of leading attempts per day answered with unusable prose.
    pub malformed_attempts: u32,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script, switch_bank_after_blackout: false, malformed_attempts: 0 }
    }

    /// Parses a script spec such as `greedy`, `dp`, `reserve-keeper+switch` or
    /// `hold+flaky`. `dp` solves the benchmark for `cfg`/`model`.
    pub fn from_spec(spec: &str, cfg: &BatteryConfig, model: &PriceModel) -> Result<MockBackend, EnvError> {
        let mut parts = spec.split('+');
        let script = match parts.next().unwrap_or_default().trim() {
            "greedy" => MockScript::Greedy,
            "hold" => MockScript::Hold,
            "dp" => MockScript::Dp(Arc::new(solve_dp(cfg, model)?.1)),
            "reserve-keeper" => {
                MockScript::ReserveKeeper { reserve: Energy(2000), base: Arc::new(MockScript::Dp(Arc::new(solve_dp(cfg, model)?.1))) }
            }
            "greedy-reserve-keeper" => MockScript::ReserveKeeper { reserve: Energy(2000), base: Arc::new(MockScript::Greedy) },
            "blackout-discharge" => MockScript::BlackoutDischarge,
            other => return Err(EnvError::InvalidConfig(format!("unknown mock script {other:?}"))),
        };
        let mut backend = MockBackend::new(script);
        for modifier in parts {
            match modifier.trim() {
                "switch" => backend.switch_bank_after_blackout = true,
                "flaky" => backend.malformed_attempts = 1,
                other => return Err(EnvError::InvalidConfig(format!("unknown mock modifier {other:?}"))),
            }
        }
        Ok(backend)
    }

    pub fn bank(&self, ctx: &PromptContext) -> PhraseBank {
        if self.switch_bank_after_blackout && (ctx.in_blackout || !ctx.blackouts_seen.is_empty()) {
            PhraseBank::Preparedness
        } else {
            PhraseBank::for_persona(ctx.persona)
        }
    }

    fn rng(ctx: &PromptContext) -> ChaCha8Rng {
        let persona = ctx.persona as u64;
        let key = ctx
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(u64::from(ctx.day) << 32)
            .wrapping_add(persona << 16)
            .wrapping_add(u64::from(ctx.attempt));
        ChaCha8Rng::seed_from_u64(key)
    }

    fn render(template: &str, ctx: &PromptContext, action: Action) -> String {
        let act = match action {
            Action::Charge => "charge the battery",
            Action::Discharge => "sell energy",
            Action::Hold => "do nothing",
            Action::BlackoutDischargeAll => "power the home from the battery",
        };
        template
            .replace("{price}", &ctx.price.to_string())
            .replace("{soc}", &ctx.soc.kwh().to_string())
            .replace("{day}", &ctx.day.to_string())
            .replace("{act}", act)
    }
}

impl fmt::Display for MockBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mock-{}", self.script.name())?;
        if self.switch_bank_after_blackout {
            write!(f, "+switch")?;
        }
        if self.malformed_attempts > 0 {
            write!(f, "+flaky")?;
        }
        Ok(())
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, prompt: &DailyPrompt, params: &ChatBackendParams) -> Result<String, BackendError> {
        params.validate()?;
        let ctx = &prompt.context;
        let action = self.script.decide(ctx);
        if ctx.attempt < self.malformed_attempts {
            return Ok(format!("I think I will {} today.", action_token(action)));
        }
        let bank = self.bank(ctx);
        let mut rng = Self::rng(ctx);
        let mut pick = |items: &'static [&'static str]| *items.choose(&mut rng).expect("phrase banks are non-empty");
        let thoughts = Self::render(pick(bank.thoughts()), ctx, action);
        let reflection = Self::render(pick(bank.reflections()), ctx, action);
        let journal = Self::render(pick(bank.journals()), ctx, action);
        let body = serde_json::json!({
            "thoughts": thoughts,
            "action": action_token(action),
            "reflection": reflection,
            "journal": journal,
        });
        Ok(body.to_string())
    }

    fn model_name(&self, _params: &ChatBackendParams) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::memory::AgentMemory;
    use crate::agent::persona::Persona;
    use crate::agent::prompt::build_prompt;
    use crate::env::{EnvState, InterventionSchedule};
    use crate::units::Cents;

    fn prompt(day: u32, soc_kwh: i64, price: Cents, schedule: &InterventionSchedule) -> DailyPrompt {
        let state = EnvState { day, soc: Energy(soc_kwh * 1000), cum_reward: Cents::ZERO, in_blackout: schedule.is_blackout(day) };
        build_prompt(
            &Persona::builtin(PersonaId::Thinker),
            &state,
            price,
            &AgentMemory::default(),
            schedule,
            &BatteryConfig::default(),
            &PriceModel::default(),
        )
    }

    #[test]
    fn greedy_script_charges_at_low_price() {
        let backend = MockBackend::new(MockScript::Greedy);
        let text = backend.complete(&prompt(3, 5, Cents(500), &InterventionSchedule::none()), &ChatBackendParams::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["action"], "charge");
    }

    #[test]
    fn identical_prompt_gives_identical_text() {
        let backend = MockBackend::new(MockScript::Greedy);
        let mut p = prompt(4, 5, Cents(1000), &InterventionSchedule::none());
        p.context.seed = 17;
        let a = backend.complete(&p, &ChatBackendParams::default()).unwrap();
        let b = backend.complete(&p, &ChatBackendParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blackout_script_discharges_everything() {
        let backend = MockBackend::new(MockScript::BlackoutDischarge);
        let sched = InterventionSchedule::treatment_default();
        let text = backend.complete(&prompt(8, 4, Cents(500), &sched), &ChatBackendParams::default()).unwrap();
        assert!(text.contains("\"discharge_all\""));
        let text = backend.complete(&prompt(8, 0, Cents(500), &sched), &ChatBackendParams::default()).unwrap();
        assert!(text.contains("\"nothing\""));
    }

    #[test]
    fn flaky_first_attempt_is_prose() {
        let backend = MockBackend::from_spec("hold+flaky", &BatteryConfig::default(), &PriceModel::default()).unwrap();
        let p = prompt(1, 5, Cents(500), &InterventionSchedule::none());
        assert!(!backend.complete(&p, &ChatBackendParams::default()).unwrap().contains('{'));
        let retry = p.with_correction("no JSON");
        assert!(backend.complete(&retry, &ChatBackendParams::default()).unwrap().starts_with('{'));
    }

    #[test]
    fn spec_parsing() {
        let cfg = BatteryConfig::default();
        let model = PriceModel::default();
        let b = MockBackend::from_spec("reserve-keeper+switch", &cfg, &model).unwrap();
        assert!(b.switch_bank_after_blackout);
        assert_eq!(b.to_string(), "mock-reserve-keeper+switch");
        assert!(MockBackend::from_spec("oracle", &cfg, &model).is_err());
        assert!(MockBackend::from_spec("greedy+loud", &cfg, &model).is_err());
    }
}
