use std::io::Write;

use agentlab_core::harness::{scan_scenarios, ScanResult};
use agentlab_core::{Difficulty, PriceLevel};

use super::{dollars, parent_dir};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::ScanArgs;

/// Reference ρ values of the three difficulty exemplars.
pub const EXEMPLARS: [f64; 3] = [0.067, 0.692, 0.909];

pub fn run(config: &CliConfig, args: &ScanArgs, out: &mut dyn Write) -> Result<ScanResult, CliError> {
    let cfg = config.battery_config()?;
    let model = config.price_model()?;
    let n = args.n_paths.unwrap_or(config.run.benchmark_repetitions);
    let seed = args.seed.unwrap_or(config.run.seed);
    let scan = scan_scenarios(&model, &cfg, n, seed)?;

    let path = args.out.clone().unwrap_or_else(|| config.output_dir.join("scan.csv"));
    parent_dir(&path)?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["path_seed", "rho", "label", "r_dp", "r_greedy", "greedy_negative", "high_days", "levels"])?;
    for s in &scan.reports {
        let r = &s.report;
        let levels: String = r.path.levels(&model).unwrap_or_default().iter().map(|l| if *l == PriceLevel::High { 'H' } else { 'L' }).collect();
        w.write_record([
            s.path_seed.to_string(),
            format!("{:.6}", r.rho),
            r.label.as_str().to_string(),
            dollars(r.r_dp.0 as f64),
            dollars(r.r_greedy.0 as f64),
            r.greedy_negative.to_string(),
            r.path.high_days(&model).to_string(),
            levels,
        ])?;
    }
    for d in &scan.degenerate {
        let levels: String = d.path.levels(&model).unwrap_or_default().iter().map(|l| if *l == PriceLevel::High { 'H' } else { 'L' }).collect();
        w.write_record([d.path_seed.to_string(), String::new(), "degenerate".into(), dollars(d.r_dp.0 as f64), String::new(), String::new(), d.path.high_days(&model).to_string(), levels])?;
    }
    w.flush()?;

    writeln!(out, "scanned {n} paths from seed {seed}")?;
    for label in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
        let mean = scan.mean_high_days(label, &model).map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
        writeln!(out, "{:<6} {:>6} paths, mean high-price days {mean}", label.as_str(), scan.count(label))?;
    }
    writeln!(out, "degenerate {} paths (DP earns nothing)", scan.degenerate.len())?;
    for target in EXEMPLARS {
        if let Some(s) = scan.nearest(target) {
            writeln!(out, "nearest to rho={target}: {:.6} (seed {}, {})", s.report.rho, s.path_seed, s.report.label.as_str())?;
        }
    }
    writeln!(out, "csv: {}", path.display())?;
    Ok(scan)
}
