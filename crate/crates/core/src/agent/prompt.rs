//! Daily prompt assembly. Output is a pure function of its inputs.

use std::fmt::Write as _;

use super::memory::AgentMemory;
use super::persona::{Persona, PersonaId};
use crate::env::{feasible_actions, Action, ActionSet, BatteryConfig, EnvState, InterventionSchedule, PriceLevel, PriceModel};
use crate::units::{Cents, Energy};

/// Structured view of what the prompt says, for backends that do not read
/// natural language (the mock) and for trace records. Never sent on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub persona: PersonaId,
    pub day: u32,
    pub price: Cents,
    pub soc: Energy,
    pub cum_reward: Cents,
    pub feasible: ActionSet,
    pub in_blackout: bool,
    pub blackouts_seen: Vec<u32>,
    pub cfg: BatteryConfig,
    pub model: PriceModel,
    /// Repetition seed; drives mock text generation.
    pub seed: u64,
    /// 0 for the first request of a day, incremented on each corrective retry.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyPrompt {
    pub system_text: String,
    pub user_text: String,
    pub context: PromptContext,
}

impl DailyPrompt {
    /// Copy of this prompt with a corrective instruction appended.
    pub fn with_correction(&self, problem: &str) -> DailyPrompt {
        let mut next = self.clone();
        let _ = write!(
            next.user_text,
            "\n\nYour previous reply could not be used: {problem}. Reply again with only the JSON object described above, choosing one of the listed actions."
        );
        next.context.attempt += 1;
        next
    }
}

/// Wire token offered to the model for each action.
pub fn action_token(action: Action) -> &'static str {
    match action {
        Action::Hold => "nothing",
        other => other.as_str(),
    }
}

fn action_description(action: Action, cfg: &BatteryConfig) -> String {
    let unit = cfg.unit.kwh();
    match action {
        Action::Charge => format!("buy {unit} kWh from the grid at today's price and store it"),
        Action::Discharge => format!("sell {unit} kWh from the battery to the grid at today's price"),
        Action::Hold => "take no action and keep the battery as it is".to_string(),
        Action::BlackoutDischargeAll => "discharge the whole battery to power your household (no payment)".to_string(),
    }
}

fn system_text(persona: &Persona, cfg: &BatteryConfig, model: &PriceModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", persona.prompt_text);
    let _ = writeln!(s);
    let _ = writeln!(s, "You are taking part in a {}-day home battery experiment.", cfg.horizon);
    let _ = writeln!(
        s,
        "Your battery holds between {} and {} kWh. Each day you may charge it by {} kWh (buying energy), discharge it by {} kWh (selling energy), or do nothing.",
        cfg.floor.kwh(),
        cfg.capacity.kwh(),
        cfg.unit.kwh(),
        cfg.unit.kwh()
    );
    let _ = writeln!(
        s,
        "Each day's electricity price is either {} or {} per kWh and is announced at the start of the day. Energy left in the battery when the experiment ends earns nothing.",
        model.low_price, model.high_price
    );
    let _ = writeln!(
        s,
        "A power blackout may happen during the experiment. During a blackout your home is cut off from the grid: you cannot buy or sell, but you may discharge the battery fully to supply your household."
    );
    let _ = write!(s, "Every day, think, act, reflect on how the action serves your goals, and write a short journal entry for your future self.");
    s
}

pub fn build_prompt(
    persona: &Persona,
    state: &EnvState,
    price: Cents,
    memory: &AgentMemory,
    schedule: &InterventionSchedule,
    cfg: &BatteryConfig,
    model: &PriceModel,
) -> DailyPrompt {
    let feasible = feasible_actions(state, cfg, schedule);
    let in_blackout = schedule.is_blackout(state.day);
    let mut u = String::new();

    let _ = writeln!(u, "Day {} of {}.", state.day, cfg.horizon);
    if in_blackout {
        let _ = writeln!(u, "BLACKOUT: your household is disconnected from the grid today. Buying and selling energy is not possible.");
    } else {
        let level = match model.level_of(price) {
            Some(PriceLevel::Low) => " (low)",
            Some(PriceLevel::High) => " (high)",
            None => "",
        };
        let _ = writeln!(u, "Today's electricity price: {price} per kWh{level}.");
    }
    let _ = writeln!(u, "Battery state of charge: {} kWh.", state.soc.kwh());
    let _ = writeln!(u, "Earnings so far: {}.", state.cum_reward);
    if !memory.blackouts_seen.is_empty() {
        let days: Vec<_> = memory.blackouts_seen.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(u, "You lived through a blackout on day(s) {}.", days.join(", "));
    }

    let recent = memory.recent_journal();
    if !recent.is_empty() {
        let _ = writeln!(u, "\nYour journal so far:");
        for (day, entry) in recent {
            let _ = writeln!(u, "- Day {day}: {entry}");
        }
    }

    let _ = writeln!(u, "\nOptions available today:");
    for action in feasible.iter() {
        let _ = writeln!(u, "- \"{}\": {}", action_token(action), action_description(action, cfg));
    }
    let tokens: Vec<_> = feasible.iter().map(action_token).collect();
    let _ = writeln!(u, "\nRespond with a single JSON object and nothing else:");
    let _ = write!(
        u,
        "{{\"thoughts\": \"<your reasoning>\", \"action\": \"<one of: {}>\", \"reflection\": \"<how this action serves your goals>\", \"journal\": \"<note for your future self>\"}}",
        tokens.join(", ")
    );

    DailyPrompt {
        system_text: system_text(persona, cfg, model),
        user_text: u,
        context: PromptContext {
            persona: persona.id,
            day: state.day,
            price,
            soc: state.soc,
            cum_reward: state.cum_reward,
            feasible,
            in_blackout,
            blackouts_seen: memory.blackouts_seen.clone(),
            cfg: *cfg,
            model: *model,
            seed: 0,
            attempt: 0,
        },
    }
}
