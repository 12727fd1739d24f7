pub mod analyze;
pub mod report;
pub mod scan;
pub mod simulate;
pub mod solve_dp;

use std::fs;
use std::path::{Path, PathBuf};

use agentlab_core::storage::{load_run, DayRecord, RunManifest, MANIFEST_FILE};

use crate::error::CliError;

/// A run directory read back from disk.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<DayRecord>,
}

/// Expands each argument into run directories: a directory with a manifest is
/// a run, otherwise its immediate subdirectories with manifests are. Sorted by
/// run id, duplicates removed.
pub fn discover_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs = Vec::new();
    for p in paths {
        if !p.is_dir() {
            return Err(CliError::Data(format!("{} is not a directory", p.display())));
        }
        if p.join(MANIFEST_FILE).is_file() {
            dirs.push(p.clone());
            continue;
        }
        let mut found: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| CliError::io(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(MANIFEST_FILE).is_file())
            .collect();
        if found.is_empty() {
            return Err(CliError::Data(format!("{} contains no run (no {MANIFEST_FILE})", p.display())));
        }
        dirs.append(&mut found);
    }
    dirs.sort();
    dirs.dedup();
    Ok(dirs)
}

pub fn load_runs(paths: &[PathBuf]) -> Result<Vec<LoadedRun>, CliError> {
    let mut runs = Vec::new();
    for dir in discover_runs(paths)? {
        let (manifest, records) = load_run(&dir).map_err(|e| CliError::io(&dir, e))?;
        runs.push(LoadedRun { dir, manifest, records });
    }
    runs.sort_by(|a, b| a.manifest.run_id.cmp(&b.manifest.run_id));
    if let Some(w) = runs.windows(2).find(|w| w[0].manifest.run_id == w[1].manifest.run_id) {
        return Err(CliError::Data(format!("run id {} appears twice ({} and {})", w[0].manifest.run_id, w[0].dir.display(), w[1].dir.display())));
    }
    Ok(runs)
}

/// Shortest decimal rendering of a cent amount in dollars.
pub fn dollars(cents: f64) -> String {
    let s = format!("{:.6}", cents / 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub(crate) fn parent_dir(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dollars_trim_trailing_zeros() {
        assert_eq!(dollars(750.0), "7.5");
        assert_eq!(dollars(5000.0), "50");
        assert_eq!(dollars(-250.0), "-2.5");
        assert_eq!(dollars(0.0), "0");
        assert_eq!(dollars(1234.5), "12.345");
    }

    #[test]
    fn empty_directory_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(discover_runs(&[tmp.path().to_path_buf()]), Err(CliError::Data(_))));
        assert!(matches!(discover_runs(&[tmp.path().join("missing")]), Err(CliError::Data(_))));
    }
}
