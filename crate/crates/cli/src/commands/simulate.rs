use std::io::Write;
use std::path::Path;

use agentlab_core::harness::{run_intervention_pair, run_monte_carlo, BackendSpec, PolicyKind, RunOptions, RunOutcome, RunSpec, Scenario};
use agentlab_core::{Cents, InterventionSchedule, PricePath};

use super::{create_dir, dollars};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::{PolicyArg, SimulateArgs};

pub fn parse_backend(s: &str) -> Result<BackendSpec, CliError> {
    match s.trim() {
        "http" => Ok(BackendSpec::Http { base_url: None }),
        "mock" => Ok(BackendSpec::Mock { script: "dp".into() }),
        other => match other.strip_prefix("mock:") {
            Some(script) if !script.is_empty() => Ok(BackendSpec::Mock { script: script.into() }),
            _ => Err(CliError::Config(format!("unknown backend {other:?}; expected http or mock:<script>"))),
        },
    }
}

pub fn parse_days(s: &str) -> Result<Vec<u32>, CliError> {
    s.split([',', ' '])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| CliError::Config(format!("invalid blackout day {t:?}"))))
        .collect()
}

/// Dollar prices separated by commas or whitespace, or a JSON price path in cents.
pub fn read_path_file(path: &Path) -> Result<PricePath, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).map_err(|e| CliError::io(path, e));
    }
    let prices = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .and_then(Cents::from_dollars)
                .ok_or_else(|| CliError::Data(format!("{}: invalid price {t:?}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PricePath { prices })
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' }).collect()
}

fn summary_line(out: &mut dyn Write, outcome: &RunOutcome) -> Result<(), CliError> {
    let s = &outcome.stats;
    writeln!(
        out,
        "{}: {} reps ({} failed), mean terminal reward ${} sd ${} se ${}, mean terminal SoC {:.3} kWh",
        outcome.spec.run_id,
        s.repetitions,
        s.failure_count,
        dollars(s.mean_terminal_reward),
        format!("{:.2}", s.sd_terminal_reward / 100.0),
        format!("{:.2}", s.standard_error() / 100.0),
        s.mean_soc_by_day.last().copied().unwrap_or(0.0)
    )?;
    if let Some(dir) = &outcome.run_dir {
        writeln!(out, "  -> {}", dir.display())?;
    }
    Ok(())
}

fn check_outcome(outcome: &RunOutcome) -> Result<(), CliError> {
    if outcome.stats.repetitions == 0 {
        let first = outcome.failures.first().map(|f| format!(": {} ({})", f.message, f.category)).unwrap_or_default();
        return Err(CliError::Backend(format!("all {} repetitions of {} failed{first}", outcome.failures.len(), outcome.spec.run_id)));
    }
    Ok(())
}

/// Builds the run specs for one invocation, one per persona for agents.
pub fn specs(config: &CliConfig, args: &SimulateArgs) -> Result<Vec<RunSpec>, CliError> {
    let cfg = config.battery_config()?;
    let model = config.price_model()?;
    let scenario = match (&args.path_file, args.path_seed) {
        (Some(file), _) => Scenario::FixedPath(read_path_file(file)?),
        (None, seed) => Scenario::Sampled(seed.unwrap_or(config.run.seed)),
    };
    let intervention = match &args.blackout {
        None => InterventionSchedule::none(),
        Some(None) => config.schedule(),
        Some(Some(days)) => InterventionSchedule::blackout(parse_days(days)?),
    };
    let backend = parse_backend(&args.backend)?;
    let kinds: Vec<PolicyKind> = match args.policy {
        PolicyArg::Dp => vec![PolicyKind::Dp],
        PolicyArg::Greedy => vec![PolicyKind::Greedy],
        PolicyArg::Agent => {
            let mut personas = args.persona.clone();
            personas.dedup();
            personas.into_iter().map(|persona| PolicyKind::Agent { persona, backend: backend.clone() }).collect()
        }
    };
    let reps = args.reps.unwrap_or(match args.policy {
        PolicyArg::Agent => config.run.repetitions,
        _ => config.run.benchmark_repetitions,
    });
    let multiple = kinds.len() > 1;
    kinds
        .into_iter()
        .map(|kind| {
            let run_id = match (&args.run_id, &kind) {
                (Some(id), PolicyKind::Agent { persona, .. }) if multiple => format!("{id}-{persona}"),
                (Some(id), _) => id.clone(),
                (None, PolicyKind::Agent { persona, backend: BackendSpec::Mock { script } }) => slug(&format!("{persona}-mock-{script}")),
                (None, PolicyKind::Agent { persona, .. }) => format!("{persona}-http"),
                (None, k) => k.label(),
            };
            let run_id = if args.run_id.is_none() && !args.paired && !intervention.is_empty() { format!("{run_id}-blackout") } else { run_id };
            let mut spec = RunSpec::new(run_id, kind);
            spec.scenario = scenario.clone();
            spec.repetitions = reps;
            spec.intervention = intervention.clone();
            spec.base_seed = args.seed.unwrap_or(config.run.seed);
            spec.cfg = cfg;
            spec.model = model;
            spec.backend_params = config.backend_params();
            spec.memory_window = (config.run.memory_window > 0).then_some(config.run.memory_window);
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

/// Runs the requested simulation(s) and returns every outcome produced.
pub fn run(config: &CliConfig, args: &SimulateArgs, out: &mut dyn Write) -> Result<Vec<RunOutcome>, CliError> {
    let specs = specs(config, args)?;
    create_dir(&config.output_dir)?;
    let opts = RunOptions {
        workers: args.workers.unwrap_or(config.run.workers),
        out_dir: Some(config.output_dir.clone()),
        backend: None,
        http: config.http_config(),
    };
    let mut outcomes = Vec::new();
    for mut spec in specs {
        if args.paired {
            if spec.intervention.is_empty() {
                spec.intervention = config.schedule();
            }
            let pair = run_intervention_pair(&spec, &opts)?;
            for arm in [&pair.treatment, &pair.control] {
                summary_line(out, arm)?;
            }
            writeln!(out, "  arms share price paths: {}", if pair.prices_aligned() { "yes" } else { "NO" })?;
            check_outcome(&pair.treatment)?;
            check_outcome(&pair.control)?;
            outcomes.push(pair.treatment);
            outcomes.push(pair.control);
        } else {
            let outcome = run_monte_carlo(&spec, &opts)?;
            summary_line(out, &outcome)?;
            check_outcome(&outcome)?;
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_strings() {
        assert_eq!(parse_backend("http").unwrap(), BackendSpec::Http { base_url: None });
        assert_eq!(parse_backend("mock:greedy+switch").unwrap(), BackendSpec::Mock { script: "greedy+switch".into() });
        assert!(parse_backend("mock:").is_err());
        assert!(parse_backend("grpc").is_err());
    }

    #[test]
    fn day_lists() {
        assert_eq!(parse_days("8,9").unwrap(), vec![8, 9]);
        assert_eq!(parse_days(" 3 , 4 ").unwrap(), vec![3, 4]);
        assert!(parse_days("x").is_err());
    }

    #[test]
    fn path_files_in_dollars_or_json() {
        let tmp = tempfile::tempdir().unwrap();
        let plain = tmp.path().join("p.txt");
        std::fs::write(&plain, "5, 10\n10 5").unwrap();
        assert_eq!(read_path_file(&plain).unwrap().prices, vec![Cents(500), Cents(1000), Cents(1000), Cents(500)]);
        let json = tmp.path().join("p.json");
        std::fs::write(&json, r#"{"prices":[500,1000]}"#).unwrap();
        assert_eq!(read_path_file(&json).unwrap().prices, vec![Cents(500), Cents(1000)]);
        std::fs::write(&plain, "5, ten").unwrap();
        assert!(matches!(read_path_file(&plain), Err(CliError::Data(_))));
    }
}
