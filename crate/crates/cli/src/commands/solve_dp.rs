use std::io::Write;

use agentlab_core::policy::{exact_expected_reward, solve_dp, to_f64, Greedy, PolicyDocument};

use super::{dollars, parent_dir};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::SolveDpArgs;

pub fn run(config: &CliConfig, args: &SolveDpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = config.battery_config()?;
    let model = config.price_model()?;
    let (table, dp) = solve_dp(&cfg, &model).map_err(|e| CliError::Config(e.to_string()))?;
    let e_dp = exact_expected_reward(&dp, &cfg, &model).map_err(|e| CliError::Config(e.to_string()))?;
    let e_g = exact_expected_reward(&Greedy::new(cfg, model), &cfg, &model).map_err(|e| CliError::Config(e.to_string()))?;

    let path = args.out.clone().unwrap_or_else(|| config.output_dir.join("dp_policy.json"));
    parent_dir(&path)?;
    let doc = PolicyDocument::new(&table, &dp);
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;

    let (dp_c, g_c) = (to_f64(&e_dp), to_f64(&e_g));
    writeln!(
        out,
        "T={} capacity={}kWh s0={}kWh prices=${}/${} p_high={}",
        cfg.horizon,
        cfg.capacity.kwh(),
        cfg.initial_soc.kwh(),
        dollars(model.low_price.0 as f64),
        dollars(model.high_price.0 as f64),
        model.prob_high
    )?;
    writeln!(out, "E[DP]={} (exact {e_dp} cents)", dollars(dp_c))?;
    writeln!(out, "E[G]={} (exact {e_g} cents)", dollars(g_c))?;
    if dp_c > 0.0 {
        writeln!(out, "rho={:.6}", (dp_c - g_c) / dp_c)?;
    } else {
        writeln!(out, "rho=undefined (E[DP] is not positive)")?;
    }
    writeln!(out, "policy: {}", path.display())?;
    Ok(())
}
