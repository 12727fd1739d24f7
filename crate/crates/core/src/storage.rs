//! Run directories: `manifest.json`, `records.jsonl`, `summary.csv` and,
//! when repetitions fail, `failed.jsonl`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{step, Action, BatteryConfig, EnvState};
use crate::harness::{RunSpec, SummaryStats};
use crate::units::{trade_value, Cents, Energy};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILED_FILE: &str = "failed.jsonl";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("corrupt record on line {line_no}: {message}")]
    CorruptLine { line_no: usize, message: String },
    #[error("schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// One agent-day. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub repetition: u32,
    /// Persona id for agent runs, `dp` or `greedy` for benchmarks.
    pub persona: String,
    pub day: u32,
    pub price_cents: i64,
    pub soc_before_wh: i64,
    pub soc_after_wh: i64,
    pub action: Action,
    pub reward_cents: i64,
    pub cum_reward_cents: i64,
    pub in_blackout: bool,
    pub thoughts: String,
    pub reflection: String,
    pub journal: String,
    pub backend_model: String,
    pub seed: u64,
}

impl DayRecord {
    /// Checks the record against the battery physics of `cfg`.
    pub fn validate(&self, cfg: &BatteryConfig) -> Result<(), StorageError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StorageError::VersionMismatch { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        let violation = |msg: String| Err(StorageError::SchemaViolation(format!("repetition {} day {}: {msg}", self.repetition, self.day)));
        if self.day < 1 || self.day > cfg.horizon {
            return violation(format!("day outside 1..={}", cfg.horizon));
        }
        let (before, after) = (Energy(self.soc_before_wh), Energy(self.soc_after_wh));
        for soc in [before, after] {
            if soc < cfg.floor || soc > cfg.capacity {
                return violation(format!("soc {soc} outside [{}, {}]", cfg.floor, cfg.capacity));
            }
        }
        let out = self.action.energy_out(before, cfg);
        if after != before - out {
            return violation(format!("soc_after {after} != soc_before {before} - {out} for {}", self.action));
        }
        let expected = match self.action {
            Action::Charge | Action::Discharge => trade_value(Cents(self.price_cents), out),
            Action::Hold | Action::BlackoutDischargeAll => Some(Cents::ZERO),
        };
        if expected != Some(Cents(self.reward_cents)) {
            return violation(format!("reward {} inconsistent with {} at {}", self.reward_cents, self.action, Cents(self.price_cents)));
        }
        Ok(())
    }
}

/// Checks that cumulative rewards chain within each repetition. Records must
/// be sorted by (repetition, day).
fn validate_chain(records: &[DayRecord]) -> Result<(), StorageError> {
    for rep in records.chunk_by(|a, b| a.repetition == b.repetition) {
        let mut cum = 0i64;
        for (i, r) in rep.iter().enumerate() {
            if r.day as usize != i + 1 {
                return Err(StorageError::SchemaViolation(format!("repetition {} has day {} at position {}", r.repetition, r.day, i + 1)));
            }
            if i > 0 && rep[i - 1].soc_after_wh != r.soc_before_wh {
                return Err(StorageError::SchemaViolation(format!("repetition {} day {}: soc does not chain", r.repetition, r.day)));
            }
            cum += r.reward_cents;
            if r.cum_reward_cents != cum {
                return Err(StorageError::SchemaViolation(format!("repetition {} day {}: cum_reward {} != {cum}", r.repetition, r.day, r.cum_reward_cents)));
            }
        }
    }
    Ok(())
}

/// A repetition that aborted, with the days it completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub repetition: u32,
    pub seed: u64,
    pub category: String,
    pub message: String,
    pub completed: Vec<DayRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub spec: RunSpec,
    pub code_version: String,
    pub created_at: String,
    pub record_count: u64,
    pub failure_count: u32,
}

impl RunManifest {
    pub fn new(spec: RunSpec, record_count: u64, failure_count: u32) -> RunManifest {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            run_id: spec.run_id.clone(),
            spec,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            record_count,
            failure_count,
        }
    }
}

fn to_line<T: Serialize>(value: &T) -> Result<String, StorageError> {
    let mut line = serde_json::to_string(value).map_err(|e| StorageError::SchemaViolation(e.to_string()))?;
    line.push('\n');
    Ok(line)
}

struct Sinks {
    records: BufWriter<File>,
    failed: Option<BufWriter<File>>,
    record_count: u64,
}

/// Append-only writer for one run directory. Safe to share across threads;
/// each batch is written contiguously.
pub struct RunWriter {
    dir: PathBuf,
    cfg: BatteryConfig,
    sinks: Mutex<Sinks>,
}

impl RunWriter {
    /// Creates (or truncates) `root/run_id/`.
    pub fn create(root: &Path, run_id: &str, cfg: BatteryConfig) -> Result<RunWriter, StorageError> {
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
            return Err(StorageError::SchemaViolation(format!("run_id {run_id:?} is not a plain name")));
        }
        let dir = root.join(run_id);
        fs::create_dir_all(&dir)?;
        let failed = dir.join(FAILED_FILE);
        if failed.exists() {
            fs::remove_file(failed)?;
        }
        let records = BufWriter::new(File::create(dir.join(RECORDS_FILE))?);
        Ok(RunWriter { dir, cfg, sinks: Mutex::new(Sinks { records, failed: None, record_count: 0 }) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Sinks> {
        self.sinks.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn append_record(&self, record: &DayRecord) -> Result<(), StorageError> {
        self.append_batch(std::slice::from_ref(record))
    }

    /// Validates and appends the records of one repetition in order.
    pub fn append_batch(&self, records: &[DayRecord]) -> Result<(), StorageError> {
        let mut buf = String::new();
        for r in records {
            r.validate(&self.cfg)?;
            buf.push_str(&to_line(r)?);
        }
        let mut sinks = self.lock();
        sinks.records.write_all(buf.as_bytes())?;
        sinks.record_count += records.len() as u64;
        Ok(())
    }

    pub fn append_failure(&self, failure: &FailureRecord) -> Result<(), StorageError> {
        let line = to_line(failure)?;
        let mut sinks = self.lock();
        if sinks.failed.is_none() {
            sinks.failed = Some(BufWriter::new(File::create(self.dir.join(FAILED_FILE))?));
        }
        sinks.failed.as_mut().expect("just opened").write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn record_count(&self) -> u64 {
        self.lock().record_count
    }

    /// Flushes traces, then writes the summary and manifest. `records` are the
    /// successful records sorted by (repetition, day).
    pub fn finish(self, manifest: &RunManifest, records: &[DayRecord]) -> Result<PathBuf, StorageError> {
        let mut sinks = self.sinks.into_inner().unwrap_or_else(|p| p.into_inner());
        sinks.records.flush()?;
        sinks.records.get_ref().sync_all()?;
        if let Some(f) = sinks.failed.as_mut() {
            f.flush()?;
        }
        let rows = summarize_records(&manifest.run_id, records, &manifest.spec.cfg);
        write_summary_csv(&self.dir.join(SUMMARY_FILE), &rows, manifest.spec.cfg.horizon)?;
        let json = serde_json::to_string_pretty(manifest).map_err(|e| StorageError::CorruptManifest(e.to_string()))?;
        fs::write(self.dir.join(MANIFEST_FILE), json + "\n")?;
        Ok(self.dir)
    }
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, StorageError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| StorageError::CorruptManifest(e.to_string()))?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).ok_or_else(|| StorageError::CorruptManifest("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(StorageError::VersionMismatch { found: found as u32, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(|e| StorageError::CorruptManifest(e.to_string()))
}

/// Reads and validates a run directory. Records come back sorted by
/// (repetition, day).
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<DayRecord>), StorageError> {
    let manifest = load_manifest(dir)?;
    let cfg = manifest.spec.cfg;
    let reader = BufReader::new(File::open(dir.join(RECORDS_FILE))?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DayRecord = serde_json::from_str(&line).map_err(|e| StorageError::CorruptLine { line_no, message: e.to_string() })?;
        match record.validate(&cfg) {
            Ok(()) => records.push(record),
            Err(StorageError::SchemaViolation(message)) => return Err(StorageError::CorruptLine { line_no, message }),
            Err(e) => return Err(e),
        }
    }
    records.sort_by_key(|r| (r.repetition, r.day));
    validate_chain(&records)?;
    if records.len() as u64 != manifest.record_count {
        return Err(StorageError::SchemaViolation(format!("manifest lists {} records, found {}", manifest.record_count, records.len())));
    }
    Ok((manifest, records))
}

pub fn load_failures(dir: &Path) -> Result<Vec<FailureRecord>, StorageError> {
    let path = dir.join(FAILED_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| StorageError::CorruptLine { line_no: i + 1, message: e.to_string() })?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayMismatch {
    pub repetition: u32,
    pub day: u32,
    pub field: &'static str,
}

/// Re-simulates each repetition from its recorded prices and actions and
/// lists every field that differs from the trace.
pub fn replay(manifest: &RunManifest, records: &[DayRecord]) -> Vec<ReplayMismatch> {
    let cfg = &manifest.spec.cfg;
    let schedule = &manifest.spec.intervention;
    let mut mismatches = Vec::new();
    for rep in records.chunk_by(|a, b| a.repetition == b.repetition) {
        let mut state = EnvState::initial(cfg, schedule);
        for r in rep {
            let mut miss = |field| mismatches.push(ReplayMismatch { repetition: r.repetition, day: r.day, field });
            if state.day != r.day {
                miss("day");
            }
            if state.soc.0 != r.soc_before_wh {
                miss("soc_before_wh");
            }
            if state.in_blackout != r.in_blackout {
                miss("in_blackout");
            }
            match step(&state, r.action, Cents(r.price_cents), cfg, schedule) {
                Ok(out) => {
                    if out.next_state.soc.0 != r.soc_after_wh {
                        miss("soc_after_wh");
                    }
                    if out.reward.0 != r.reward_cents {
                        miss("reward_cents");
                    }
                    if out.next_state.cum_reward.0 != r.cum_reward_cents {
                        miss("cum_reward_cents");
                    }
                    state = out.next_state;
                }
                Err(_) => {
                    miss("action");
                    break;
                }
            }
        }
    }
    mismatches
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub persona: String,
    /// Dollars.
    pub mean_terminal_reward: f64,
    pub sd: f64,
    /// kWh at the start of days 1..=T+1.
    pub mean_soc: Vec<f64>,
}

/// Summary rows per persona, computed from traces alone.
pub fn summarize_records(run_id: &str, records: &[DayRecord], cfg: &BatteryConfig) -> Vec<SummaryRow> {
    let mut by_persona: BTreeMap<&str, Vec<DayRecord>> = BTreeMap::new();
    for r in records {
        by_persona.entry(r.persona.as_str()).or_default().push(r.clone());
    }
    by_persona
        .into_iter()
        .map(|(persona, mut rs)| {
            rs.sort_by_key(|r| (r.repetition, r.day));
            let stats = SummaryStats::from_records(&rs, cfg, 0);
            SummaryRow {
                run_id: run_id.to_string(),
                persona: persona.to_string(),
                mean_terminal_reward: stats.mean_terminal_reward / 100.0,
                sd: stats.sd_terminal_reward / 100.0,
                mean_soc: stats.mean_soc_by_day,
            }
        })
        .collect()
}

pub fn summary_header(horizon: u32) -> Vec<String> {
    let mut header: Vec<String> = ["run_id", "persona", "mean_terminal_reward", "sd"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=horizon + 1).map(|d| format!("mean_soc_d{d}")));
    header
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow], horizon: u32) -> Result<(), StorageError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header(horizon))?;
    for row in rows {
        let mut fields = vec![row.run_id.clone(), row.persona.clone(), format!("{:.4}", row.mean_terminal_reward), format!("{:.4}", row.sd)];
        fields.extend(row.mean_soc.iter().map(|s| format!("{s:.4}")));
        w.write_record(fields)?;
    }
    w.flush()?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_monte_carlo, PolicyKind, RunOptions, Scenario};

    fn record(day: u32, before: i64, action: Action, price: i64, reward: i64, cum: i64) -> DayRecord {
        let after = before - action.energy_out(Energy(before), &BatteryConfig::default()).0;
        DayRecord {
            schema_version: SCHEMA_VERSION,
            run_id: "r".into(),
            repetition: 0,
            persona: "greedy".into(),
            day,
            price_cents: price,
            soc_before_wh: before,
            soc_after_wh: after,
            action,
            reward_cents: reward,
            cum_reward_cents: cum,
            in_blackout: false,
            thoughts: String::new(),
            reflection: String::new(),
            journal: String::new(),
            backend_model: String::new(),
            seed: 0,
        }
    }

    fn greedy_run(dir: &Path, reps: u32) -> crate::harness::RunOutcome {
        let mut spec = RunSpec::new("greedy-run", PolicyKind::Greedy);
        spec.repetitions = reps;
        spec.scenario = Scenario::Sampled(21);
        run_monte_carlo(&spec, &RunOptions { out_dir: Some(dir.to_path_buf()), ..Default::default() }).unwrap()
    }

    #[test]
    fn record_round_trips_with_fixed_key_order() {
        let r = record(1, 5000, Action::Discharge, 1000, 1000, 1000);
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.starts_with(r#"{"schema_version":1,"run_id":"r","repetition":0,"persona":"greedy","day":1,"price_cents":1000"#));
        assert_eq!(serde_json::from_str::<DayRecord>(&line).unwrap(), r);
    }

    #[test]
    fn inconsistent_soc_is_a_schema_violation() {
        let tmp = tempfile::tempdir().unwrap();
        let w = RunWriter::create(tmp.path(), "bad", BatteryConfig::default()).unwrap();
        let mut r = record(1, 5000, Action::Charge, 500, -500, -500);
        w.append_record(&r).unwrap();
        r.soc_after_wh = 5000;
        assert!(matches!(w.append_record(&r), Err(StorageError::SchemaViolation(_))));
        assert_eq!(w.record_count(), 1);
    }

    #[test]
    fn write_then_load_and_replay() {
        let tmp = tempfile::tempdir().unwrap();
        let out = greedy_run(tmp.path(), 30);
        let (manifest, records) = load_run(out.run_dir.as_ref().unwrap()).unwrap();
        assert_eq!(records, out.records);
        assert_eq!(manifest.record_count, 30 * 20);
        assert!(replay(&manifest, &records).is_empty());
    }

    #[test]
    fn truncated_last_line_is_reported_with_its_index() {
        let tmp = tempfile::tempdir().unwrap();
        let out = greedy_run(tmp.path(), 2);
        let path = out.run_dir.unwrap().join(RECORDS_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() - 20]).unwrap();
        match load_run(path.parent().unwrap()) {
            Err(StorageError::CorruptLine { line_no, .. }) => assert_eq!(line_no, 40),
            other => panic!("expected CorruptLine, got {other:?}"),
        }
    }

    #[test]
    fn newer_schema_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let out = greedy_run(tmp.path(), 1);
        let dir = out.run_dir.unwrap();
        let text = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        fs::write(dir.join(MANIFEST_FILE), text).unwrap();
        assert!(matches!(load_run(&dir), Err(StorageError::VersionMismatch { found: 2, .. })));
    }

    #[test]
    fn summary_csv_is_derivable_from_traces() {
        let tmp = tempfile::tempdir().unwrap();
        let out = greedy_run(tmp.path(), 10);
        let dir = out.run_dir.unwrap();
        let (manifest, records) = load_run(&dir).unwrap();
        let again = tmp.path().join("again.csv");
        write_summary_csv(&again, &summarize_records(&manifest.run_id, &records, &manifest.spec.cfg), 20).unwrap();
        assert_eq!(fs::read(dir.join(SUMMARY_FILE)).unwrap(), fs::read(again).unwrap());
        let header = fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap();
        assert!(header.starts_with("run_id,persona,mean_terminal_reward,sd,mean_soc_d1,"));
        assert!(header.lines().next().unwrap().ends_with("mean_soc_d21"));
    }

    #[test]
    fn replay_detects_tampering() {
        let tmp = tempfile::tempdir().unwrap();
        let out = greedy_run(tmp.path(), 1);
        let (manifest, mut records) = load_run(out.run_dir.as_ref().unwrap()).unwrap();
        records[3].in_blackout = !records[3].in_blackout;
        let m = replay(&manifest, &records);
        assert_eq!(m, vec![ReplayMismatch { repetition: 0, day: 4, field: "in_blackout" }]);
    }
}
