use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use super::{PackageResult, PackagingError};
use crate::corpus::{
    aggregate_stats, render_name, save_corpus, Corpus, CorpusError, DatasetManifest, DatasetName,
};

/// Subdirectory of an emitted dataset holding the selection report.
pub const PACKAGE_REPORT_DIR: &str = "package";

const LOCK_FILE: &str = ".emit.lock";
const LOCK_WAIT: Duration = Duration::from_secs(30);

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, PackagingError> {
        fs::create_dir_all(dir).map_err(|source| CorpusError::IoWrite {
            file: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(LOCK_FILE);
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(DirLock(path)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_WAIT {
                        return Err(PackagingError::Locked(dir.to_path_buf()));
                    }
                    thread::sleep(Duration::from_millis(10));
                }
                Err(source) => return Err(CorpusError::IoWrite { file: path, source }.into()),
            }
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Writes the selected utterances as a four-level dataset under `out` and
/// returns its manifest.
///
/// An unsatisfied result is refused unless `force` is set, in which case the
/// infeasibility report travels with the dataset in `package/report.json`.
/// Emissions into the same directory are serialized through a lock file.
pub fn emit_dataset(
    result: &PackageResult,
    corpus: &Corpus,
    name: &DatasetName,
    out: &Path,
    force: bool,
) -> Result<DatasetManifest, PackagingError> {
    if !result.satisfied() && !force {
        return Err(PackagingError::Infeasible);
    }
    let speechdb_name = render_name(name)?;
    let _lock = DirLock::acquire(out)?;
    let mut sub = corpus.subset(result.selected.iter().map(String::as_str), &speechdb_name)?;
    let mut accents = sub.utterances.values().map(|u| u.accent.as_str());
    if let Some(first) = accents.next() {
        if accents.all(|a| a == first) {
            sub.manifest.accent = first.to_string();
        }
    }
    sub.manifest = aggregate_stats(&sub)?;
    save_corpus(&sub, out)?;
    let report_dir = out.join(PACKAGE_REPORT_DIR);
    let io_err = |file: PathBuf| move |source| CorpusError::IoWrite { file, source };
    fs::create_dir_all(&report_dir).map_err(io_err(report_dir.clone()))?;
    let report = report_dir.join("report.json");
    let text = serde_json::to_string_pretty(result).expect("package result serializes");
    fs::write(&report, text + "\n").map_err(io_err(report.clone()))?;
    Ok(sub.manifest)
}
