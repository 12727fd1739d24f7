//! Boundedly rational battery arbitrage laboratory.
//!
//! - [`env`]: the discrete battery environment and blackout schedule.
//! - [`policy`]: exact DP and greedy benchmarks, exact evaluators, ρ.
//! - [`agent`]: persona-driven generative agents and chat backends.
//! - [`harness`]: seeded Monte Carlo runs and treatment/control pairs.
//! - [`text`]: TF-IDF, PCA, exact t-SNE, k-means and cluster shift reports.
//! - [`storage`]: JSONL traces, run manifests and CSV summaries.

pub mod agent;
pub mod env;
pub mod harness;
pub mod policy;
pub mod storage;
pub mod text;
pub mod units;

pub use env::{Action, ActionSet, BatteryConfig, EnvError, EnvState, InterventionSchedule, PriceLevel, PriceModel, PricePath, StepOutcome};
pub use policy::{ComplexityReport, Difficulty, DpPolicy, Greedy, Policy, ValueTable};
pub use units::{Cents, Energy};
