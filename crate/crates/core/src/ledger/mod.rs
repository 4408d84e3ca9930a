//! Append-only decision ledger. One JSON record per line, each carrying the
//! SHA-256 of its predecessor's hash and its own record body, so any edit to
//! history breaks the chain from that line on.

pub mod report;

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{render_report, render_summary, FoldChoice, GrossNetRow, ReportFormat, RunReport};

pub const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DecisionStatus {
    Open,
    Locked,
}

impl std::str::FromStr for DecisionStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "OPEN" => Ok(DecisionStatus::Open),
            "LOCKED" => Ok(DecisionStatus::Locked),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: String,
    pub text: String,
    pub status: DecisionStatus,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub evidence_refs: Vec<String>,
    /// Earlier record this one re-opens or replaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub record: DecisionRecord,
    pub prev: String,
    pub hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("hash chain broken at line {line}")]
    Chain { line: usize },
    #[error("decision id {0:?} does not match D###")]
    BadId(String),
    #[error("decision {0} already exists")]
    Duplicate(String),
    #[error(
        "decision {0} is LOCKED and cannot be changed; append a new record that supersedes it"
    )]
    Locked(String),
    #[error("superseded decision {0} not found")]
    UnknownReference(String),
}

fn valid_id(id: &str) -> bool {
    id.len() >= 4 && id.starts_with('D') && id[1..].bytes().all(|b| b.is_ascii_digit())
}

pub fn entry_hash(prev: &str, record: &DecisionRecord) -> String {
    let body = serde_json::to_string(record).expect("record serializes");
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(b"\n");
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// Reads all entries without checking the chain. A missing file is empty.
pub fn read_entries(path: &Path) -> Result<Vec<LedgerEntry>, LedgerError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(std::fs::File::open(path)?)
        .lines()
        .enumerate()
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LedgerEntry = serde_json::from_str(&line).map_err(|e| LedgerError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

/// Checks every link; returns the number of records.
pub fn verify(path: &Path) -> Result<usize, LedgerError> {
    let entries = read_entries(path)?;
    let mut prev = GENESIS.to_string();
    for (i, e) in entries.iter().enumerate() {
        if e.prev != prev || entry_hash(&prev, &e.record) != e.hash {
            return Err(LedgerError::Chain { line: i + 1 });
        }
        prev = e.hash.clone();
    }
    Ok(entries.len())
}

/// Appends after verifying the existing chain.
pub fn append(path: &Path, record: DecisionRecord) -> Result<LedgerEntry, LedgerError> {
    if !valid_id(&record.id) {
        return Err(LedgerError::BadId(record.id));
    }
    verify(path)?;
    let entries = read_entries(path)?;
    if let Some(old) = entries.iter().find(|e| e.record.id == record.id) {
        return Err(if old.record.status == DecisionStatus::Locked {
            LedgerError::Locked(record.id)
        } else {
            LedgerError::Duplicate(record.id)
        });
    }
    if let Some(s) = &record.supersedes {
        if !entries.iter().any(|e| &e.record.id == s) {
            return Err(LedgerError::UnknownReference(s.clone()));
        }
    }
    let prev = entries
        .last()
        .map_or_else(|| GENESIS.to_string(), |e| e.hash.clone());
    let hash = entry_hash(&prev, &record);
    let entry = LedgerEntry { record, prev, hash };
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(
        f,
        "{}",
        serde_json::to_string(&entry).expect("entry serializes")
    )?;
    Ok(entry)
}

pub fn list(
    path: &Path,
    status: Option<DecisionStatus>,
) -> Result<Vec<DecisionRecord>, LedgerError> {
    Ok(read_entries(path)?
        .into_iter()
        .map(|e| e.record)
        .filter(|r| status.is_none_or(|s| r.status == s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn rec(id: &str, status: DecisionStatus) -> DecisionRecord {
        DecisionRecord {
            id: id.into(),
            text: format!("decision {id}"),
            status,
            created_at: Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap(),
            evidence_refs: vec!["run-1".into()],
            supersedes: None,
        }
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        append(&p, rec("D001", DecisionStatus::Open)).unwrap();
        assert_eq!(
            list(&p, None).unwrap(),
            vec![rec("D001", DecisionStatus::Open)]
        );
        assert_eq!(verify(&p).unwrap(), 1);
    }

    #[test]
    fn duplicate_and_locked_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        append(&p, rec("D001", DecisionStatus::Open)).unwrap();
        assert!(matches!(
            append(&p, rec("D001", DecisionStatus::Open)),
            Err(LedgerError::Duplicate(_))
        ));
        append(&p, rec("D100", DecisionStatus::Locked)).unwrap();
        assert!(matches!(
            append(&p, rec("D100", DecisionStatus::Open)),
            Err(LedgerError::Locked(_))
        ));
        let mut reopen = rec("D101", DecisionStatus::Open);
        reopen.supersedes = Some("D100".into());
        append(&p, reopen).unwrap();
        let mut dangling = rec("D102", DecisionStatus::Open);
        dangling.supersedes = Some("D999".into());
        assert!(matches!(
            append(&p, dangling),
            Err(LedgerError::UnknownReference(_))
        ));
    }

    #[test]
    fn locked_round_trip_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        let mut d100 = rec("D100", DecisionStatus::Locked);
        d100.text = "MNQ OU mean reversion permanently rejected".into();
        append(&p, rec("D001", DecisionStatus::Open)).unwrap();
        append(&p, d100.clone()).unwrap();
        assert_eq!(list(&p, Some(DecisionStatus::Locked)).unwrap(), vec![d100]);
    }

    #[test]
    fn tampering_detected_at_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        for id in ["D001", "D002", "D003"] {
            append(&p, rec(id, DecisionStatus::Locked)).unwrap();
        }
        let text =
            std::fs::read_to_string(&p)
                .unwrap()
                .replacen("decision D002", "decision D00X", 1);
        std::fs::write(&p, text).unwrap();
        assert!(matches!(verify(&p), Err(LedgerError::Chain { line: 2 })));
        assert!(matches!(
            append(&p, rec("D004", DecisionStatus::Open)),
            Err(LedgerError::Chain { line: 2 })
        ));
    }

    #[test]
    fn bad_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        assert!(matches!(
            append(&p, rec("X1", DecisionStatus::Open)),
            Err(LedgerError::BadId(_))
        ));
        assert!(matches!(
            append(&p, rec("D1a2", DecisionStatus::Open)),
            Err(LedgerError::BadId(_))
        ));
    }
}
