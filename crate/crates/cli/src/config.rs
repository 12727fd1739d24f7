//! TOML configuration. Every field has a default, so an empty file (or no
//! file) reproduces the standard 20-day setup.

use std::path::{Path, PathBuf};
use std::time::Duration;

use agentlab_core::agent::backend::{Backoff, ChatBackendParams, HttpBackendConfig};
use agentlab_core::harness::{DEFAULT_BENCHMARK_REPETITIONS, DEFAULT_REPETITIONS};
use agentlab_core::text::{AnalysisOptions, KMeansParams, TsneParams};
use agentlab_core::{BatteryConfig, Cents, Energy, InterventionSchedule, PriceModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub battery: BatterySection,
    pub prices: PriceSection,
    pub backend: BackendSection,
    pub run: RunSection,
    pub analysis: AnalysisSection,
    /// Root directory for run, scan, analysis and report outputs.
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    /// Days per episode.
    pub horizon: u32,
    pub capacity_kwh: f64,
    pub floor_kwh: f64,
    pub initial_soc_kwh: f64,
    /// Energy moved by one charge or discharge.
    pub unit_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceSection {
    /// Dollars per kWh.
    pub low: f64,
    pub high: f64,
    pub prob_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    /// OpenAI-compatible base URL; AGENTLAB_BASE_URL overrides it.
    pub base_url: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Repetitions of an agent run.
    pub repetitions: u32,
    /// Repetitions of a dp or greedy benchmark run.
    pub benchmark_repetitions: u32,
    pub seed: u64,
    /// Concurrent repetitions; 0 uses every core.
    pub workers: usize,
    /// Treatment-arm blackout days.
    pub blackout_days: Vec<u32>,
    /// Journal entries shown to the agent; 0 shows all.
    pub memory_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub k: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub pca_dims: usize,
    pub top_keywords: usize,
    pub seed: u64,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            battery: BatterySection::default(),
            prices: PriceSection::default(),
            backend: BackendSection::default(),
            run: RunSection::default(),
            analysis: AnalysisSection::default(),
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl Default for BatterySection {
    fn default() -> Self {
        BatterySection { horizon: 20, capacity_kwh: 10.0, floor_kwh: 0.0, initial_soc_kwh: 5.0, unit_kwh: 1.0 }
    }
}

impl Default for PriceSection {
    fn default() -> Self {
        PriceSection { low: 5.0, high: 10.0, prob_high: 0.5 }
    }
}

impl Default for BackendSection {
    fn default() -> Self {
        let http = HttpBackendConfig::default();
        BackendSection {
            base_url: http.base_url,
            chat_model: "gpt-4o-mini".into(),
            embedding_model: "text-embedding-3-small".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120.0,
            max_retries: 3,
            max_in_flight: http.max_in_flight,
            backoff_initial_ms: http.backoff.initial_ms,
            backoff_max_ms: http.backoff.max_ms,
        }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            repetitions: DEFAULT_REPETITIONS,
            benchmark_repetitions: DEFAULT_BENCHMARK_REPETITIONS,
            seed: 0,
            workers: 0,
            blackout_days: InterventionSchedule::treatment_default().blackout_days.into_iter().collect(),
            memory_window: 0,
        }
    }
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let opts = AnalysisOptions::default();
        AnalysisSection {
            k: opts.kmeans.k,
            perplexity: opts.tsne.perplexity,
            tsne_iterations: opts.tsne.iterations,
            pca_dims: opts.pca_dims.unwrap_or(0),
            top_keywords: opts.top_m,
            seed: 0,
        }
    }
}

fn energy(name: &str, kwh: f64) -> Result<Energy, CliError> {
    Energy::from_kwh(kwh).ok_or_else(|| CliError::Config(format!("{name} = {kwh} is not a whole number of Wh")))
}

fn cents(name: &str, dollars: f64) -> Result<Cents, CliError> {
    Cents::from_dollars(dollars).ok_or_else(|| CliError::Config(format!("{name} = {dollars} is not a whole number of cents")))
}

impl CliConfig {
    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<CliConfig, CliError> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<CliConfig, CliError> {
        let cfg: CliConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let battery = self.battery_config()?;
        let model = self.price_model()?;
        battery.validate_with(&model).map_err(|e| CliError::Config(e.to_string()))?;
        self.backend_params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.analysis.k == 0 {
            return Err(CliError::Config("analysis.k must be at least 1".into()));
        }
        if !(self.analysis.perplexity > 0.0) {
            return Err(CliError::Config("analysis.perplexity must be positive".into()));
        }
        if self.run.repetitions == 0 || self.run.benchmark_repetitions == 0 {
            return Err(CliError::Config("repetition counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn battery_config(&self) -> Result<BatteryConfig, CliError> {
        let b = &self.battery;
        Ok(BatteryConfig {
            capacity: energy("battery.capacity_kwh", b.capacity_kwh)?,
            floor: energy("battery.floor_kwh", b.floor_kwh)?,
            initial_soc: energy("battery.initial_soc_kwh", b.initial_soc_kwh)?,
            unit: energy("battery.unit_kwh", b.unit_kwh)?,
            horizon: b.horizon,
        })
    }

    pub fn price_model(&self) -> Result<PriceModel, CliError> {
        Ok(PriceModel {
            low_price: cents("prices.low", self.prices.low)?,
            high_price: cents("prices.high", self.prices.high)?,
            prob_high: self.prices.prob_high,
        })
    }

    /// The configured blackout schedule; validated against the horizon where it is used.
    pub fn schedule(&self) -> InterventionSchedule {
        InterventionSchedule::blackout(self.run.blackout_days.iter().copied())
    }

    pub fn backend_params(&self) -> ChatBackendParams {
        let b = &self.backend;
        ChatBackendParams {
            temperature: b.temperature,
            max_tokens: b.max_tokens,
            model_name: b.chat_model.clone(),
            timeout: Duration::try_from_secs_f64(b.timeout_secs).unwrap_or(Duration::ZERO),
            max_retries: b.max_retries,
        }
    }

    pub fn http_config(&self) -> HttpBackendConfig {
        let b = &self.backend;
        HttpBackendConfig {
            base_url: b.base_url.clone(),
            max_in_flight: b.max_in_flight,
            backoff: Backoff { initial_ms: b.backoff_initial_ms, max_ms: b.backoff_max_ms, ..Backoff::default() },
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        let a = &self.analysis;
        AnalysisOptions {
            kmeans: KMeansParams { k: a.k, seed: a.seed, ..KMeansParams::default() },
            top_m: a.top_keywords,
            tsne: TsneParams { perplexity: a.perplexity, iterations: a.tsne_iterations, seed: a.seed, ..TsneParams::default() },
            pca_dims: (a.pca_dims > 0).then_some(a.pca_dims),
            ..AnalysisOptions::default()
        }
    }
}
