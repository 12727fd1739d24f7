use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use agentlab_core::harness::{BackendSpec, PolicyKind, SummaryStats};

use super::analyze::{read_points, tsne_figure, POINTS_FILE};
use super::{create_dir, load_runs, LoadedRun};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::svg::{Band, BarSeries, Figure, Panel, PanelBody};
use crate::ReportArgs;

struct View<'a> {
    run: &'a LoadedRun,
    stats: SummaryStats,
}

impl View<'_> {
    fn id(&self) -> &str {
        &self.run.manifest.run_id
    }

    fn kind(&self) -> &PolicyKind {
        &self.run.manifest.spec.policy_kind
    }

    fn policy(&self) -> String {
        match self.kind() {
            PolicyKind::Agent { backend: BackendSpec::Mock { script }, .. } => format!("agent:mock:{script}"),
            PolicyKind::Agent { backend: BackendSpec::Http { .. }, .. } => "agent:http".into(),
            k => k.label(),
        }
    }

    fn persona(&self) -> String {
        match self.kind() {
            PolicyKind::Agent { persona, .. } => persona.to_string(),
            _ => String::new(),
        }
    }

    fn blackout(&self) -> String {
        let days: Vec<String> = self.run.manifest.spec.intervention.blackout_days.iter().map(|d| d.to_string()).collect();
        if days.is_empty() {
            "none".into()
        } else {
            days.join(";")
        }
    }

    fn days(&self) -> Vec<f64> {
        (0..self.stats.mean_soc_by_day.len()).map(|d| d as f64).collect()
    }

    fn soc_band(&self, label: &str) -> Band {
        Band { label: label.into(), x: self.days(), mean: self.stats.mean_soc_by_day.clone(), sd: self.stats.sd_soc_by_day.clone() }
    }

    fn reward_band(&self, label: &str) -> Band {
        let dollars = |v: &[f64]| v.iter().map(|c| c / 100.0).collect();
        Band { label: label.into(), x: self.days(), mean: dollars(&self.stats.mean_cum_reward_by_day), sd: dollars(&self.stats.sd_cum_reward_by_day) }
    }
}

/// Files written by one report invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOutput {
    pub dir: PathBuf,
    pub svgs: Vec<PathBuf>,
    pub csvs: Vec<PathBuf>,
}

fn soc_panel(title: &str, bands: Vec<Band>) -> Panel {
    Panel { title: title.into(), x_label: "day".into(), y_label: "state of charge (kWh)".into(), body: PanelBody::Lines(bands) }
}

fn reward_panel(title: &str, bands: Vec<Band>) -> Panel {
    Panel { title: title.into(), x_label: "day".into(), y_label: "cumulative reward ($)".into(), body: PanelBody::Lines(bands) }
}

fn write_trajectories(path: &Path, views: &[&View]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run_id", "policy", "persona", "blackout_days", "day", "n", "mean_soc_kwh", "sd_soc_kwh", "mean_cum_reward", "sd_cum_reward"])?;
    for v in views {
        let s = &v.stats;
        for d in 0..s.mean_soc_by_day.len() {
            w.write_record([
                v.id().to_string(),
                v.policy(),
                v.persona(),
                v.blackout(),
                d.to_string(),
                s.repetitions.to_string(),
                format!("{:.6}", s.mean_soc_by_day[d]),
                format!("{:.6}", s.sd_soc_by_day[d]),
                format!("{:.6}", s.mean_cum_reward_by_day[d] / 100.0),
                format!("{:.6}", s.sd_cum_reward_by_day[d] / 100.0),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_histograms(path: &Path, views: &[&View]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run_id", "blackout_days", "terminal_soc_kwh", "count", "density"])?;
    for v in views {
        let cfg = &v.run.manifest.spec.cfg;
        for (i, (count, density)) in v.stats.terminal_soc_histogram.iter().zip(v.stats.terminal_soc_density()).enumerate() {
            w.write_record([v.id().to_string(), v.blackout(), format!("{}", cfg.soc_at(i).kwh()), count.to_string(), format!("{density:.6}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_runs(path: &Path, views: &[View]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run_id", "policy", "persona", "blackout_days", "repetitions", "failures", "mean_terminal_reward", "sd_terminal_reward", "se_terminal_reward", "mean_terminal_soc_kwh"])?;
    for v in views {
        let s = &v.stats;
        w.write_record([
            v.id().to_string(),
            v.policy(),
            v.persona(),
            v.blackout(),
            s.repetitions.to_string(),
            v.run.manifest.failure_count.to_string(),
            format!("{:.6}", s.mean_terminal_reward / 100.0),
            format!("{:.6}", s.sd_terminal_reward / 100.0),
            format!("{:.6}", s.standard_error() / 100.0),
            format!("{:.6}", s.mean_soc_by_day.last().copied().unwrap_or(0.0)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns (greedy left, DP right), SoC on top and reward below.
fn benchmark_figure(bench: &[&View]) -> Figure {
    let mut panels: Vec<Panel> = bench.iter().map(|v| soc_panel(&format!("{}: SoC", v.id()), vec![v.soc_band(&v.policy())])).collect();
    panels.extend(bench.iter().map(|v| reward_panel(&format!("{}: cumulative reward", v.id()), vec![v.reward_band(&v.policy())])));
    Figure { title: "Benchmark policies: mean ± 1 sd over repetitions".into(), columns: bench.len(), panels }
}

fn labels(views: &[&View]) -> Vec<String> {
    let personas: Vec<String> = views.iter().map(|v| v.persona()).collect();
    views
        .iter()
        .zip(&personas)
        .map(|(v, p)| if personas.iter().filter(|q| *q == p).count() > 1 { v.id().to_string() } else { p.clone() })
        .collect()
}

fn persona_figure(agents: &[&View]) -> Figure {
    let names = labels(agents);
    let soc = agents.iter().zip(&names).map(|(v, n)| v.soc_band(n)).collect();
    let reward = agents.iter().zip(&names).map(|(v, n)| v.reward_band(n)).collect();
    let terminal = BarSeries {
        label: "mean terminal reward".into(),
        values: agents.iter().map(|v| v.stats.mean_terminal_reward / 100.0).collect(),
        errors: Some(agents.iter().map(|v| v.stats.sd_terminal_reward / 100.0).collect()),
    };
    Figure {
        title: "Agent personas: mean ± 1 sd over repetitions".into(),
        columns: 3,
        panels: vec![
            soc_panel("SoC by day", soc),
            reward_panel("cumulative reward by day", reward),
            Panel { title: "terminal reward".into(), x_label: "persona".into(), y_label: "terminal reward ($)".into(), body: PanelBody::Bars { categories: names, series: vec![terminal] } },
        ],
    }
}

fn pair_figure(base: &str, treatment: &View, control: &View) -> Figure {
    let t_label = format!("treatment (blackout {})", treatment.blackout().replace(';', ","));
    let cfg = &treatment.run.manifest.spec.cfg;
    let categories = (0..treatment.stats.terminal_soc_histogram.len()).map(|i| format!("{}", cfg.soc_at(i).kwh())).collect();
    let hist = |label: &str, v: &View| BarSeries { label: label.into(), values: v.stats.terminal_soc_density(), errors: None };
    Figure {
        title: format!("{base}: treatment vs control, mean ± 1 sd"),
        columns: 3,
        panels: vec![
            soc_panel("SoC by day", vec![treatment.soc_band(&t_label), control.soc_band("control")]),
            reward_panel("cumulative reward by day", vec![treatment.reward_band(&t_label), control.reward_band("control")]),
            Panel {
                title: "terminal SoC distribution".into(),
                x_label: "terminal SoC (kWh)".into(),
                y_label: "share of repetitions".into(),
                body: PanelBody::Bars { categories, series: vec![hist("treatment", treatment), hist("control", control)] },
            },
        ],
    }
}

pub fn run(config: &CliConfig, args: &ReportArgs, out: &mut dyn Write) -> Result<ReportOutput, CliError> {
    let runs = load_runs(&args.runs)?;
    let views: Vec<View> = runs
        .iter()
        .map(|run| {
            let records_failed = run.manifest.failure_count;
            View { run, stats: SummaryStats::from_records(&run.records, &run.manifest.spec.cfg, records_failed) }
        })
        .collect();
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.join("report"));
    create_dir(&dir)?;
    let mut output = ReportOutput { dir: dir.clone(), svgs: Vec::new(), csvs: Vec::new() };
    let emit = |name: &str, figure: Figure, csv_views: &[&View], output: &mut ReportOutput| -> Result<(), CliError> {
        let svg = dir.join(format!("{name}.svg"));
        std::fs::write(&svg, figure.render()).map_err(|e| CliError::io(&svg, e))?;
        let csv = dir.join(format!("{name}.csv"));
        write_trajectories(&csv, csv_views)?;
        output.svgs.push(svg);
        output.csvs.push(csv);
        Ok(())
    };

    let by_id: BTreeMap<&str, &View> = views.iter().map(|v| (v.id(), v)).collect();
    let mut pairs: Vec<(String, &View, &View)> = Vec::new();
    for v in &views {
        if let Some(base) = v.id().strip_suffix("-treatment") {
            if let Some(control) = by_id.get(format!("{base}-control").as_str()) {
                pairs.push((base.to_string(), v, control));
            }
        }
    }

    let mut bench: Vec<&View> = views.iter().filter(|v| !matches!(v.kind(), PolicyKind::Agent { .. }) && v.run.manifest.spec.intervention.is_empty()).collect();
    bench.sort_by_key(|v| (!matches!(v.kind(), PolicyKind::Greedy), v.id().to_string()));
    if !bench.is_empty() {
        emit("fig1_benchmarks", benchmark_figure(&bench), &bench, &mut output)?;
    }

    let agents: Vec<&View> = views.iter().filter(|v| matches!(v.kind(), PolicyKind::Agent { .. }) && v.run.manifest.spec.intervention.is_empty()).collect();
    if !agents.is_empty() {
        emit("fig4_personas", persona_figure(&agents), &agents, &mut output)?;
    }

    for (base, treatment, control) in &pairs {
        let name = format!("fig5_{base}");
        emit(&name, pair_figure(base, treatment, control), &[treatment, control], &mut output)?;
        let hist = dir.join(format!("{name}_terminal_soc.csv"));
        write_histograms(&hist, &[treatment, control])?;
        output.csvs.push(hist);
    }

    if let Some(analysis) = &args.analysis {
        let points = read_points(&analysis.join(POINTS_FILE))?;
        let svg = dir.join("tsne.svg");
        std::fs::write(&svg, tsne_figure(&points).render()).map_err(|e| CliError::io(&svg, e))?;
        output.svgs.push(svg);
    }

    if output.svgs.is_empty() {
        return Err(CliError::Data("no figure applies to these runs (blackout-only benchmark runs have no figure)".into()));
    }
    let runs_csv = dir.join("runs.csv");
    write_runs(&runs_csv, &views)?;
    output.csvs.push(runs_csv);
    let all: Vec<&View> = views.iter().collect();
    let hist = dir.join("terminal_soc.csv");
    write_histograms(&hist, &all)?;
    output.csvs.push(hist);

    writeln!(out, "{} runs, {} figures", views.len(), output.svgs.len())?;
    for f in output.svgs.iter().chain(&output.csvs) {
        writeln!(out, "  {}", f.display())?;
    }
    Ok(output)
}
