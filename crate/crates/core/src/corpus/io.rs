//! On-disk layout: one JSON file per record.
//!
//! ```text
//! root/{speechdb_name}.json
//! root/sessions/{session_id}.json
//! root/utterances/{utterance_id}.json
//! root/speakers/{speaker_id}.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{Corpus, CorpusError, DatasetManifest, SessionRecord, SpeakerRecord, UtteranceRecord};

pub(crate) const SESSIONS_DIR: &str = "sessions";
pub(crate) const UTTERANCES_DIR: &str = "utterances";
pub(crate) const SPEAKERS_DIR: &str = "speakers";

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::IoRead {
        file: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::IoRead {
            file: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn parse_record<T: DeserializeOwned>(file: &Path, required: &[&str]) -> Result<T, CorpusError> {
    let text = fs::read_to_string(file).map_err(|source| CorpusError::IoRead {
        file: file.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CorpusError::MalformedJson {
        file: file.to_path_buf(),
        reason: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| CorpusError::MalformedJson {
            file: file.to_path_buf(),
            reason: "top-level value is not an object".into(),
        })?;
    if let Some(missing) = required.iter().find(|f| !obj.contains_key(**f)) {
        return Err(CorpusError::MissingField {
            file: file.to_path_buf(),
            field: missing.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| CorpusError::MalformedJson {
        file: file.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_level<T: DeserializeOwned>(
    dir: &Path,
    required: &[&str],
    id_of: impl Fn(&T) -> &str,
) -> Result<BTreeMap<String, T>, CorpusError> {
    let mut out = BTreeMap::new();
    for file in json_files(dir)? {
        let rec: T = parse_record(&file, required)?;
        let id = id_of(&rec).to_string();
        if out.insert(id.clone(), rec).is_some() {
            return Err(CorpusError::DuplicateId(id));
        }
    }
    Ok(out)
}

/// Loads a corpus directory and checks referential integrity.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let root = root.as_ref();
    let manifests = json_files(root)?;
    if manifests.len() != 1 {
        return Err(CorpusError::Manifest {
            dir: root.to_path_buf(),
            found: manifests.len(),
        });
    }
    let manifest: DatasetManifest = parse_record(&manifests[0], DatasetManifest::REQUIRED)?;
    let corpus = Corpus {
        manifest,
        sessions: load_level(
            &root.join(SESSIONS_DIR),
            SessionRecord::REQUIRED,
            |s: &SessionRecord| &s.session_id,
        )?,
        utterances: load_level(
            &root.join(UTTERANCES_DIR),
            UtteranceRecord::REQUIRED,
            |u: &UtteranceRecord| &u.utterance_id,
        )?,
        speakers: load_level(
            &root.join(SPEAKERS_DIR),
            SpeakerRecord::REQUIRED,
            |s: &SpeakerRecord| &s.speaker_id,
        )?,
    };
    corpus.check_references()?;
    Ok(corpus)
}

fn write_json<T: Serialize>(file: &Path, value: &T) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CorpusError::IoWrite {
        file: file.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    text.push('\n');
    fs::write(file, text).map_err(|source| CorpusError::IoWrite {
        file: file.to_path_buf(),
        source,
    })
}

fn clear_json(dir: &Path) -> Result<(), CorpusError> {
    for file in json_files(dir).map_err(|e| match e {
        CorpusError::IoRead { file, source } => CorpusError::IoWrite { file, source },
        other => other,
    })? {
        fs::remove_file(&file).map_err(|source| CorpusError::IoWrite { file, source })?;
    }
    Ok(())
}

fn write_level<T: Serialize>(
    root: &Path,
    dir: &str,
    records: &BTreeMap<String, T>,
) -> Result<(), CorpusError> {
    let dir = root.join(dir);
    clear_json(&dir)?;
    if records.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(&dir).map_err(|source| CorpusError::IoWrite {
        file: dir.clone(),
        source,
    })?;
    for (id, rec) in records {
        write_json(&dir.join(format!("{id}.json")), rec)?;
    }
    Ok(())
}

/// Writes the corpus under `root`. Previously present record files in the
/// level directories are replaced so that a reload yields exactly `corpus`.
pub fn save_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<(), CorpusError> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|source| CorpusError::IoWrite {
        file: root.to_path_buf(),
        source,
    })?;
    clear_json(root)?;
    write_json(
        &root.join(format!("{}.json", corpus.manifest.speechdb_name)),
        &corpus.manifest,
    )?;
    write_level(root, SESSIONS_DIR, &corpus.sessions)?;
    write_level(root, UTTERANCES_DIR, &corpus.utterances)?;
    write_level(root, SPEAKERS_DIR, &corpus.speakers)?;
    Ok(())
}
