//! SQLite-backed record store for every pipeline stage.
//!
//! Feature vectors and signals are packed as little-endian `f64` blobs.
//! All batch writes run in one transaction and are all-or-nothing.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rusqlite::{params, Connection, ErrorCode, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};

use crate::epoching::SplitTag;
use crate::models::PredictionStream;

pub const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS recordings (
    recording_id TEXT PRIMARY KEY,
    patient_id   TEXT NOT NULL,
    fs           REAL NOT NULL,
    n_channels   INTEGER NOT NULL,
    duration     REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS signals (
    recording_id  TEXT NOT NULL REFERENCES recordings(recording_id),
    stage         TEXT NOT NULL,
    channel_index INTEGER NOT NULL,
    label         TEXT NOT NULL,
    fs            REAL NOT NULL,
    samples       BLOB NOT NULL,
    PRIMARY KEY (recording_id, stage, channel_index)
);
CREATE TABLE IF NOT EXISTS seizure_intervals (
    recording_id TEXT NOT NULL REFERENCES recordings(recording_id),
    start        REAL NOT NULL,
    end          REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS epochs (
    recording_id TEXT NOT NULL REFERENCES recordings(recording_id),
    epoch_index  INTEGER NOT NULL,
    label        INTEGER NOT NULL CHECK (label IN (0, 1)),
    flags        INTEGER NOT NULL,
    split_tag    TEXT,
    PRIMARY KEY (recording_id, epoch_index)
);
CREATE TABLE IF NOT EXISTS manifests (
    manifest_version TEXT PRIMARY KEY,
    names            TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS features (
    recording_id     TEXT NOT NULL,
    epoch_index      INTEGER NOT NULL,
    manifest_version TEXT NOT NULL REFERENCES manifests(manifest_version),
    vals             BLOB NOT NULL,
    PRIMARY KEY (recording_id, epoch_index, manifest_version),
    FOREIGN KEY (recording_id, epoch_index) REFERENCES epochs(recording_id, epoch_index)
);
CREATE TABLE IF NOT EXISTS predictions (
    model_id     TEXT NOT NULL,
    recording_id TEXT NOT NULL,
    epoch_index  INTEGER NOT NULL,
    probability  REAL NOT NULL CHECK (probability >= 0.0 AND probability <= 1.0),
    PRIMARY KEY (recording_id, epoch_index, model_id)
);
CREATE TABLE IF NOT EXISTS models (
    model_id TEXT PRIMARY KEY,
    kind     TEXT NOT NULL,
    fold     INTEGER,
    blob     BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS reports (
    kind    TEXT NOT NULL,
    name    TEXT NOT NULL,
    payload TEXT NOT NULL,
    PRIMARY KEY (kind, name)
);
CREATE TABLE IF NOT EXISTS stages (
    name TEXT PRIMARY KEY,
    seq  INTEGER NOT NULL
);
";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("conflict in table {table}: key {key} already exists or violates a constraint")]
    Conflict { table: &'static str, key: String },
    #[error("unknown table {0:?}; readable tables are epochs, features, predictions")]
    UnknownTable(String),
    #[error("missing stage: {0}")]
    MissingStage(String),
    #[error("corrupt blob in {table}: {len} bytes is not a whole number of f64 values")]
    Blob { table: &'static str, len: usize },
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingRow {
    pub recording_id: String,
    pub patient_id: String,
    pub fs: f64,
    pub n_channels: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub recording_id: String,
    pub epoch_index: usize,
    pub label: u8,
    pub flags: u32,
    pub split_tag: Option<SplitTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub recording_id: String,
    pub epoch_index: usize,
    pub manifest_version: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub model_id: String,
    pub recording_id: String,
    pub epoch_index: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: String,
    pub name: String,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Record {
    Recording(RecordingRow),
    Epoch(EpochRow),
    Feature(FeatureRow),
    Prediction(PredictionRow),
    Report(ReportRow),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredChannel {
    pub label: String,
    pub fs: f64,
    pub samples: Vec<f64>,
}

pub fn pack_f64(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn unpack_f64(bytes: &[u8], table: &'static str) -> Result<Vec<f64>, StoreError> {
    if bytes.len() % 8 != 0 {
        return Err(StoreError::Blob { table, len: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Half-open key range over `(recording_id, epoch_index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyRange {
    pub start: Option<(String, usize)>,
    pub end: Option<(String, usize)>,
}

impl KeyRange {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn recording(id: &str) -> Self {
        Self {
            start: Some((id.to_string(), 0)),
            end: Some((id.to_string(), i64::MAX as usize)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Table {
    Epochs,
    Features,
    Predictions,
}

impl Table {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "epochs" => Some(Table::Epochs),
            "features" => Some(Table::Features),
            "predictions" => Some(Table::Predictions),
            _ => None,
        }
    }

    /// Third key column breaking ties within one epoch.
    fn sql(self) -> &'static str {
        match self {
            Table::Epochs => "SELECT recording_id, epoch_index, '' AS tb, label, flags, split_tag FROM epochs",
            Table::Features => "SELECT recording_id, epoch_index, manifest_version AS tb, vals FROM features",
            Table::Predictions => "SELECT recording_id, epoch_index, model_id AS tb, probability FROM predictions",
        }
    }
}

pub struct Store {
    conn: Connection,
}

/// Streams rows in key order by keyset pagination, holding one page at a time.
pub struct RecordIter<'a> {
    store: &'a Store,
    table: Table,
    after: Option<(String, i64, String)>,
    range: KeyRange,
    filter: Option<String>,
    page: VecDeque<(String, i64, String, Record)>,
    page_size: usize,
    done: bool,
}

impl RecordIter<'_> {
    fn fetch(&mut self) -> Result<(), StoreError> {
        let mut sql = format!("SELECT * FROM ({}) WHERE 1", self.table.sql());
        let mut args: Vec<rusqlite::types::Value> = Vec::new();
        if let Some((r, e, t)) = &self.after {
            sql.push_str(" AND (recording_id, epoch_index, tb) > (?, ?, ?)");
            args.extend([r.clone().into(), (*e).into(), t.clone().into()]);
        } else if let Some((r, e)) = &self.range.start {
            sql.push_str(" AND (recording_id, epoch_index) >= (?, ?)");
            args.extend([r.clone().into(), (*e as i64).into()]);
        }
        if let Some((r, e)) = &self.range.end {
            sql.push_str(" AND (recording_id, epoch_index) < (?, ?)");
            args.extend([r.clone().into(), (*e as i64).into()]);
        }
        if let Some(f) = &self.filter {
            sql.push_str(" AND tb = ?");
            args.push(f.clone().into());
        }
        sql.push_str(&format!(" ORDER BY recording_id, epoch_index, tb LIMIT {}", self.page_size));
        let mut stmt = self.store.conn.prepare_cached(&sql)?;
        let table = self.table;
        let rows = stmt.query_map(rusqlite::params_from_iter(args), |row| {
            let rid: String = row.get(0)?;
            let idx: i64 = row.get(1)?;
            let tb: String = row.get(2)?;
            let rec = match table {
                Table::Epochs => {
                    let tag: Option<String> = row.get(5)?;
                    Ok(Record::Epoch(EpochRow {
                        recording_id: rid.clone(),
                        epoch_index: idx as usize,
                        label: row.get(3)?,
                        flags: row.get(4)?,
                        split_tag: tag.as_deref().and_then(SplitTag::parse),
                    }))
                }
                Table::Features => {
                    let blob: Vec<u8> = row.get(3)?;
                    Err(blob)
                }
                Table::Predictions => Ok(Record::Prediction(PredictionRow {
                    model_id: tb.clone(),
                    recording_id: rid.clone(),
                    epoch_index: idx as usize,
                    probability: row.get(3)?,
                })),
            };
            Ok((rid, idx, tb, rec))
        })?;
        let mut n = 0;
        for row in rows {
            let (rid, idx, tb, rec) = row?;
            let rec = match rec {
                Ok(r) => r,
                Err(blob) => Record::Feature(FeatureRow {
                    recording_id: rid.clone(),
                    epoch_index: idx as usize,
                    manifest_version: tb.clone(),
                    values: unpack_f64(&blob, "features")?,
                }),
            };
            self.page.push_back((rid, idx, tb, rec));
            n += 1;
        }
        if n < self.page_size {
            self.done = true;
        }
        if let Some((r, e, t, _)) = self.page.back() {
            self.after = Some((r.clone(), *e, t.clone()));
        }
        Ok(())
    }
}

impl Iterator for RecordIter<'_> {
    type Item = Result<Record, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.page.is_empty() && !self.done {
            if let Err(e) = self.fetch() {
                self.done = true;
                return Some(Err(e));
            }
        }
        self.page.pop_front().map(|(_, _, _, r)| Ok(r))
    }
}

fn conflict(e: rusqlite::Error, table: &'static str, key: String) -> StoreError {
    match &e {
        rusqlite::Error::SqliteFailure(f, _) if f.code == ErrorCode::ConstraintViolation => StoreError::Conflict { table, key },
        _ => StoreError::Sqlite(e),
    }
}

fn insert(tx: &Transaction, rec: &Record) -> Result<(), StoreError> {
    match rec {
        Record::Recording(r) => tx
            .prepare_cached("INSERT INTO recordings VALUES (?1, ?2, ?3, ?4, ?5)")?
            .execute(params![r.recording_id, r.patient_id, r.fs, r.n_channels as i64, r.duration])
            .map_err(|e| conflict(e, "recordings", r.recording_id.clone()))?,
        Record::Epoch(r) => tx
            .prepare_cached("INSERT INTO epochs VALUES (?1, ?2, ?3, ?4, ?5)")?
            .execute(params![
                r.recording_id,
                r.epoch_index as i64,
                r.label,
                r.flags,
                r.split_tag.map(SplitTag::as_str)
            ])
            .map_err(|e| conflict(e, "epochs", format!("({}, {})", r.recording_id, r.epoch_index)))?,
        Record::Feature(r) => tx
            .prepare_cached("INSERT INTO features VALUES (?1, ?2, ?3, ?4)")?
            .execute(params![r.recording_id, r.epoch_index as i64, r.manifest_version, pack_f64(&r.values)])
            .map_err(|e| {
                conflict(
                    e,
                    "features",
                    format!("({}, {}, {})", r.recording_id, r.epoch_index, r.manifest_version),
                )
            })?,
        Record::Prediction(r) => tx
            .prepare_cached("INSERT INTO predictions VALUES (?1, ?2, ?3, ?4)")?
            .execute(params![r.model_id, r.recording_id, r.epoch_index as i64, r.probability])
            .map_err(|e| {
                conflict(
                    e,
                    "predictions",
                    format!("({}, {}, {})", r.model_id, r.recording_id, r.epoch_index),
                )
            })?,
        Record::Report(r) => tx
            .prepare_cached("INSERT OR REPLACE INTO reports VALUES (?1, ?2, ?3)")?
            .execute(params![r.kind, r.name, r.payload])?,
    };
    Ok(())
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch("PRAGMA foreign_keys = ON; PRAGMA synchronous = NORMAL;")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn })
    }

    /// Inserts the batch in one transaction. Any constraint violation rolls
    /// back the whole batch.
    pub fn write_records(&mut self, batch: &[Record]) -> Result<usize, StoreError> {
        let tx = self.conn.transaction()?;
        for rec in batch {
            insert(&tx, rec)?;
        }
        tx.commit()?;
        Ok(batch.len())
    }

    pub fn count(&self, table: &str) -> Result<usize, StoreError> {
        const TABLES: [&str; 10] = [
            "recordings",
            "signals",
            "seizure_intervals",
            "epochs",
            "manifests",
            "features",
            "predictions",
            "models",
            "reports",
            "stages",
        ];
        if !TABLES.contains(&table) {
            return Err(StoreError::UnknownTable(table.into()));
        }
        let n: i64 = self.conn.query_row(&format!("SELECT COUNT(*) FROM {table}"), [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Rows of `epochs`, `features` or `predictions` within `range`, in
    /// `(recording_id, epoch_index)` order.
    pub fn read_records(&self, table: &str, range: KeyRange) -> Result<RecordIter<'_>, StoreError> {
        self.read_filtered(table, range, None)
    }

    /// As [`Store::read_records`], keeping only rows whose manifest version
    /// (features) or model id (predictions) equals `filter`.
    pub fn read_filtered(&self, table: &str, range: KeyRange, filter: Option<&str>) -> Result<RecordIter<'_>, StoreError> {
        let t = Table::parse(table).ok_or_else(|| StoreError::UnknownTable(table.into()))?;
        Ok(RecordIter {
            store: self,
            table: t,
            after: None,
            range,
            filter: filter.map(str::to_string),
            page: VecDeque::new(),
            page_size: 2048,
            done: false,
        })
    }

    /// Deletes every row of the given tables in one transaction.
    pub fn clear(&mut self, tables: &[&str]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        for t in tables {
            tx.execute(&format!("DELETE FROM {t}"), [])?;
        }
        tx.commit()?;
        Ok(())
    }

    /// Deletes the signals stored under one stage tag.
    pub fn delete_signals(&mut self, stage: &str) -> Result<(), StoreError> {
        self.conn.execute("DELETE FROM signals WHERE stage = ?1", [stage])?;
        Ok(())
    }

    pub fn recordings(&self) -> Result<Vec<RecordingRow>, StoreError> {
        let mut stmt = self.conn.prepare("SELECT * FROM recordings ORDER BY recording_id")?;
        let rows = stmt.query_map([], |r| {
            Ok(RecordingRow {
                recording_id: r.get(0)?,
                patient_id: r.get(1)?,
                fs: r.get(2)?,
                n_channels: r.get::<_, i64>(3)? as usize,
                duration: r.get(4)?,
            })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn put_signals(&mut self, recording_id: &str, stage: &str, channels: &[StoredChannel]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        tx.execute("DELETE FROM signals WHERE recording_id = ?1 AND stage = ?2", params![recording_id, stage])?;
        for (i, c) in channels.iter().enumerate() {
            tx.execute(
                "INSERT INTO signals VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![recording_id, stage, i as i64, c.label, c.fs, pack_f64(&c.samples)],
            )
            .map_err(|e| conflict(e, "signals", format!("({recording_id}, {stage}, {i})")))?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn get_signals(&self, recording_id: &str, stage: &str) -> Result<Vec<StoredChannel>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT label, fs, samples FROM signals WHERE recording_id = ?1 AND stage = ?2 ORDER BY channel_index",
        )?;
        let rows = stmt.query_map(params![recording_id, stage], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, f64>(1)?, r.get::<_, Vec<u8>>(2)?))
        })?;
        rows.map(|row| {
            let (label, fs, blob) = row?;
            Ok(StoredChannel {
                label,
                fs,
                samples: unpack_f64(&blob, "signals")?,
            })
        })
        .collect()
    }

    pub fn put_intervals(&mut self, recording_id: &str, intervals: &[(f64, f64)]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        tx.execute("DELETE FROM seizure_intervals WHERE recording_id = ?1", [recording_id])?;
        for (s, e) in intervals {
            tx.execute("INSERT INTO seizure_intervals VALUES (?1, ?2, ?3)", params![recording_id, s, e])?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn get_intervals(&self, recording_id: &str) -> Result<Vec<(f64, f64)>, StoreError> {
        let mut stmt = self
            .conn
            .prepare("SELECT start, end FROM seizure_intervals WHERE recording_id = ?1 ORDER BY start, end")?;
        let rows = stmt.query_map([recording_id], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn put_manifest(&mut self, version: &str, names: &[String]) -> Result<(), StoreError> {
        self.conn.execute(
            "INSERT OR REPLACE INTO manifests VALUES (?1, ?2)",
            params![version, names.join("\n")],
        )?;
        Ok(())
    }

    pub fn get_manifest(&self, version: &str) -> Result<Option<Vec<String>>, StoreError> {
        let names: Option<String> = self
            .conn
            .query_row("SELECT names FROM manifests WHERE manifest_version = ?1", [version], |r| r.get(0))
            .optional()?;
        Ok(names.map(|n| n.lines().map(str::to_string).collect()))
    }

    pub fn put_model(&mut self, model_id: &str, kind: &str, fold: Option<usize>, blob: &[u8]) -> Result<(), StoreError> {
        self.conn.execute(
            "INSERT OR REPLACE INTO models VALUES (?1, ?2, ?3, ?4)",
            params![model_id, kind, fold.map(|f| f as i64), blob],
        )?;
        Ok(())
    }

    pub fn get_model(&self, model_id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        Ok(self
            .conn
            .query_row("SELECT blob FROM models WHERE model_id = ?1", [model_id], |r| r.get(0))
            .optional()?)
    }

    /// `(model_id, kind, fold)` for every stored model, by id.
    pub fn list_models(&self) -> Result<Vec<(String, String, Option<usize>)>, StoreError> {
        let mut stmt = self.conn.prepare("SELECT model_id, kind, fold FROM models ORDER BY model_id")?;
        let rows = stmt.query_map([], |r| {
            Ok((r.get(0)?, r.get(1)?, r.get::<_, Option<i64>>(2)?.map(|f| f as usize)))
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn put_report(&mut self, kind: &str, name: &str, payload: &str) -> Result<(), StoreError> {
        self.write_records(&[Record::Report(ReportRow {
            kind: kind.into(),
            name: name.into(),
            payload: payload.into(),
        })])?;
        Ok(())
    }

    pub fn get_report(&self, kind: &str, name: &str) -> Result<Option<String>, StoreError> {
        Ok(self
            .conn
            .query_row(
                "SELECT payload FROM reports WHERE kind = ?1 AND name = ?2",
                params![kind, name],
                |r| r.get(0),
            )
            .optional()?)
    }

    /// `(name, payload)` of every report of one kind, by name.
    pub fn reports(&self, kind: &str) -> Result<Vec<(String, String)>, StoreError> {
        let mut stmt = self.conn.prepare("SELECT name, payload FROM reports WHERE kind = ?1 ORDER BY name")?;
        let rows = stmt.query_map([kind], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn delete_reports(&mut self, kind: &str) -> Result<(), StoreError> {
        self.conn.execute("DELETE FROM reports WHERE kind = ?1", [kind])?;
        Ok(())
    }

    pub fn delete_predictions_like(&mut self, pattern: &str) -> Result<(), StoreError> {
        self.conn.execute("DELETE FROM predictions WHERE model_id LIKE ?1", [pattern])?;
        Ok(())
    }

    pub fn mark_stage(&mut self, name: &str) -> Result<(), StoreError> {
        self.conn.execute(
            "INSERT OR REPLACE INTO stages VALUES (?1, (SELECT COALESCE(MAX(seq), 0) + 1 FROM stages))",
            [name],
        )?;
        Ok(())
    }

    pub fn unmark_stages(&mut self, names: &[&str]) -> Result<(), StoreError> {
        for n in names {
            self.conn.execute("DELETE FROM stages WHERE name = ?1", [n])?;
        }
        Ok(())
    }

    pub fn has_stage(&self, name: &str) -> Result<bool, StoreError> {
        Ok(self
            .conn
            .query_row("SELECT 1 FROM stages WHERE name = ?1", [name], |_| Ok(()))
            .optional()?
            .is_some())
    }

    pub fn require_stage(&self, name: &str) -> Result<(), StoreError> {
        if self.has_stage(name)? {
            Ok(())
        } else {
            Err(StoreError::MissingStage(name.into()))
        }
    }

    pub fn write_streams(&mut self, streams: &[PredictionStream]) -> Result<usize, StoreError> {
        let batch: Vec<Record> = streams
            .iter()
            .flat_map(|s| {
                s.probabilities.iter().enumerate().map(|(i, &p)| {
                    Record::Prediction(PredictionRow {
                        model_id: s.model_id.clone(),
                        recording_id: s.recording_id.clone(),
                        epoch_index: s.first_index + i,
                        probability: p,
                    })
                })
            })
            .collect();
        self.write_records(&batch)
    }

    /// Streams for one model id, one per recording, by recording id.
    pub fn read_streams(&self, model_id: &str) -> Result<Vec<PredictionStream>, StoreError> {
        let mut groups: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for rec in self.read_filtered("predictions", KeyRange::all(), Some(model_id))? {
            if let Record::Prediction(p) = rec? {
                groups.entry(p.recording_id).or_default().push((p.epoch_index, p.probability));
            }
        }
        Ok(groups
            .into_iter()
            .map(|(rid, rows)| PredictionStream {
                recording_id: rid,
                model_id: model_id.into(),
                first_index: rows.first().map_or(0, |r| r.0),
                probabilities: rows.into_iter().map(|r| r.1).collect(),
            })
            .collect())
    }

    pub fn model_ids_in_predictions(&self) -> Result<Vec<String>, StoreError> {
        let mut stmt = self.conn.prepare("SELECT DISTINCT model_id FROM predictions ORDER BY model_id")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }
}
