//! Tables, sessions and the query loop behind the HTTP routes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock, PoisonError, RwLock};

use axum::http::StatusCode;
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::value::RawValue;
use tabchain_core::pipeline::{run_chain, run_query, Outcome, QueryResponse};
use tabchain_core::planner::{default_registry, ExemplarStore, MeasureRegistry, PlanContext, Planner, RulePlanner};
use tabchain_core::{load_csv, CsvOptions, Schema, Table};
use tabchain_encoder::{encode, EncoderParams, TableEmbedding};
use thiserror::Error;

use crate::config::Config;
use crate::error::ApiError;
use crate::journal::{read_all, EntryKind, HistoryEntry, Journal, ResultSummary, SessionLog, UploadRecord, TABLES_DIR};

#[derive(Debug, Error)]
pub enum StateError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("measure registry: {0}")]
    Registry(String),
    #[error("encoder parameters: {0}")]
    Encoder(#[from] tabchain_encoder::EncoderError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Upload,
    Derived { parent: String, chain_text: String },
}

type CachedEmbedding = Result<(Arc<TableEmbedding>, Arc<str>), String>;

#[derive(Debug)]
pub struct StoredTable {
    pub id: String,
    pub session_id: String,
    pub table: Table,
    pub origin: Origin,
    embedding: OnceLock<CachedEmbedding>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableInfo {
    pub table_id: String,
    pub session_id: String,
    pub schema: Schema,
    pub row_count: usize,
    pub origin: Origin,
}

impl StoredTable {
    fn new(id: String, session_id: String, table: Table, origin: Origin) -> Self {
        StoredTable {
            id,
            session_id,
            table,
            origin,
            embedding: OnceLock::new(),
        }
    }

    pub fn info(&self) -> TableInfo {
        TableInfo {
            table_id: self.id.clone(),
            session_id: self.session_id.clone(),
            schema: self.table.schema().clone(),
            row_count: self.table.num_rows(),
            origin: self.origin.clone(),
        }
    }
}

#[derive(Debug)]
struct Session {
    journal: Option<Journal>,
    history: Vec<HistoryEntry>,
}

/// Reply to a query or command submission.
#[derive(Debug, Clone)]
pub struct Reply {
    pub response: QueryResponse,
    /// Id of the new table version, when the chain mutated the table.
    pub table_id: Option<String>,
    pub entry: HistoryEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayMismatch {
    pub session_id: String,
    pub seq: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub sessions: usize,
    pub entries: usize,
    pub reproduced: usize,
    pub mismatches: Vec<ReplayMismatch>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty() && self.reproduced == self.entries
    }
}

struct Computed {
    response: QueryResponse,
    json: String,
    summary: ResultSummary,
    new_table: Option<(Table, String)>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn io_error(e: std::io::Error) -> ApiError {
    ApiError::internal(e.to_string())
}

pub struct AppState {
    config: Config,
    registry: MeasureRegistry,
    exemplars: ExemplarStore,
    planner: Arc<dyn Planner>,
    encoder: EncoderParams,
    tables: RwLock<HashMap<String, Arc<StoredTable>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").field("config", &self.config).finish_non_exhaustive()
    }
}

impl AppState {
    /// Empty state using the rule-based planner.
    pub fn new(config: Config) -> Result<Self, StateError> {
        Self::with_planner(config, Arc::new(RulePlanner))
    }

    pub fn with_planner(config: Config, planner: Arc<dyn Planner>) -> Result<Self, StateError> {
        let read = |p: &Path| {
            std::fs::read(p).map_err(|source| StateError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let registry = match &config.planner.registry {
            Some(p) => {
                let text = String::from_utf8(read(p)?).map_err(|e| StateError::Registry(e.to_string()))?;
                MeasureRegistry::from_toml(&text).map_err(|e| StateError::Registry(e.to_string()))?
            }
            None => default_registry(),
        };
        let encoder = match &config.service.encoder_params {
            Some(p) => EncoderParams::from_bytes(&read(p)?)?,
            None => EncoderParams::default_init(config.service.encoder_seed),
        };
        Ok(AppState {
            config,
            registry,
            exemplars: ExemplarStore::seeded(),
            planner,
            encoder,
            tables: RwLock::default(),
            sessions: RwLock::default(),
        })
    }

    /// State restored from the journals under the configured data
    /// directory. Every journaled response is recomputed and compared.
    pub fn open(config: Config) -> Result<(Self, ReplayReport), StateError> {
        let state = Self::new(config)?;
        let dir = state.data_dir().to_path_buf();
        let logs = read_all(&dir).map_err(|source| StateError::Io { path: dir, source })?;
        let report = state.restore(logs, true)?;
        Ok((state, report))
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.service.data_dir
    }

    pub fn table(&self, id: &str) -> Result<Arc<StoredTable>, ApiError> {
        self.tables
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::internal(format!("session {id} is missing")))
    }

    fn insert_table(&self, t: StoredTable) -> Arc<StoredTable> {
        let t = Arc::new(t);
        self.tables
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(t.id.clone(), t.clone());
        t
    }

    fn insert_session(&self, id: &str, journal: Option<Journal>, history: Vec<HistoryEntry>) {
        self.sessions
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(id.to_string(), Arc::new(Mutex::new(Session { journal, history })));
    }

    fn load(&self, bytes: &[u8], name: &str) -> Result<Table, ApiError> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "EmptyBody", "request body is empty"));
        }
        let table = load_csv(bytes, &CsvOptions::named(name))?;
        let schema = self.registry.annotate(table.schema());
        Ok(table.with_schema_synonyms(schema))
    }

    /// Loads a CSV upload, persists it and opens a session for it.
    pub fn upload(&self, bytes: &[u8], name: Option<&str>) -> Result<TableInfo, ApiError> {
        let name = name.filter(|n| !n.trim().is_empty()).unwrap_or("table");
        let table = self.load(bytes, name)?;
        let id = new_id();
        let csv_file = format!("{TABLES_DIR}/{id}.csv");
        let csv_path = self.data_dir().join(&csv_file);
        std::fs::create_dir_all(csv_path.parent().expect("has parent")).map_err(io_error)?;
        std::fs::write(&csv_path, bytes).map_err(io_error)?;
        let record = UploadRecord {
            session_id: id.clone(),
            table_id: id.clone(),
            table_name: name.to_string(),
            csv_file,
            timestamp: now(),
        };
        let journal = Journal::create(self.data_dir(), &record).map_err(io_error)?;
        self.insert_session(&id, Some(journal), Vec::new());
        let stored = self.insert_table(StoredTable::new(id.clone(), id, table, Origin::Upload));
        tracing::info!(table_id = %stored.id, rows = stored.table.num_rows(), "table uploaded");
        Ok(stored.info())
    }

    fn embedding_of<'t>(&self, t: &'t StoredTable) -> &'t CachedEmbedding {
        t.embedding.get_or_init(|| {
            let e = encode(&t.table, &self.encoder).map_err(|e| e.to_string())?;
            #[derive(Serialize)]
            struct Body<'a> {
                global: &'a [f64],
            }
            let json = serde_json::to_string(&Body { global: &e.global }).map_err(|e| e.to_string())?;
            Ok((Arc::new(e), Arc::from(json)))
        })
    }

    /// `{"global": [...]}` for a table, computed once.
    pub fn embedding(&self, id: &str) -> Result<Arc<str>, ApiError> {
        let t = self.table(id)?;
        match self.embedding_of(&t) {
            Ok((_, json)) => Ok(json.clone()),
            Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EncoderError", e.clone())),
        }
    }

    pub fn history(&self, id: &str) -> Result<Vec<HistoryEntry>, ApiError> {
        let t = self.table(id)?;
        let session = self.session(&t.session_id)?;
        let s = session.lock().unwrap_or_else(PoisonError::into_inner);
        Ok(s.history.clone())
    }

    fn compute(&self, t: &StoredTable, kind: EntryKind, input: &str, threshold: f64) -> Result<Computed, ApiError> {
        let outcome = match kind {
            EntryKind::Query => {
                let embedding = self.embedding_of(t).as_ref().ok().map(|(e, _)| e.global.as_slice());
                let ctx = PlanContext {
                    embedding,
                    vagueness_threshold: threshold,
                    ..PlanContext::new(t.table.schema(), &self.registry, &self.exemplars)
                };
                run_query(input, &t.table, self.planner.as_ref(), &ctx).map_err(|e| {
                    tracing::warn!(table_id = %t.id, error = %e, "planned chain was rejected by the runtime");
                    ApiError::from(e)
                })?
            }
            EntryKind::Commands => Outcome::Answered(run_chain(input, &t.table)?),
        };
        let response = outcome.response();
        let json = serde_json::to_string(&response).map_err(|e| ApiError::internal(e.to_string()))?;
        let (summary, new_table) = match &outcome {
            Outcome::Answered(a) => {
                let summary = ResultSummary {
                    status: "answered".into(),
                    rows: Some(a.result.table.num_rows()),
                    columns: Some(a.result.table.num_columns()),
                };
                let mutated = a.chain.iter().any(|c| c.is_mutating());
                (summary, mutated.then(|| (a.result.table.clone(), a.chain_text())))
            }
            Outcome::Clarification { .. } => (
                ResultSummary {
                    status: "clarification".into(),
                    rows: None,
                    columns: None,
                },
                None,
            ),
        };
        Ok(Computed {
            response,
            json,
            summary,
            new_table,
        })
    }

    /// Plans and runs a natural-language query.
    pub fn query(&self, table_id: &str, text: &str) -> Result<Reply, ApiError> {
        self.submit(table_id, EntryKind::Query, text)
    }

    /// Runs chain text directly, bypassing the planner.
    pub fn commands(&self, table_id: &str, chain_text: &str) -> Result<Reply, ApiError> {
        self.submit(table_id, EntryKind::Commands, chain_text)
    }

    fn submit(&self, table_id: &str, kind: EntryKind, input: &str) -> Result<Reply, ApiError> {
        let t = self.table(table_id)?;
        let session = self.session(&t.session_id)?;
        // held for the whole transition so entries of one session never interleave
        let mut s = session.lock().unwrap_or_else(PoisonError::into_inner);
        let threshold = self.config.planner.vagueness_threshold;
        let c = self.compute(&t, kind, input, threshold)?;
        let result_table_id = c.new_table.as_ref().map(|_| new_id());
        let entry = HistoryEntry {
            seq: s.history.len(),
            timestamp: now(),
            kind,
            input: input.to_string(),
            table_id: t.id.clone(),
            result_table_id: result_table_id.clone(),
            vagueness_threshold: (kind == EntryKind::Query).then_some(threshold),
            summary: c.summary,
            outcome: RawValue::from_string(c.json).map_err(|e| ApiError::internal(e.to_string()))?,
        };
        if let Some(j) = &s.journal {
            j.append(&entry).map_err(io_error)?;
        }
        s.history.push(entry.clone());
        if let (Some(id), Some((table, chain_text))) = (&result_table_id, c.new_table) {
            let origin = Origin::Derived {
                parent: t.id.clone(),
                chain_text,
            };
            self.insert_table(StoredTable::new(id.clone(), t.session_id.clone(), table, origin));
        }
        Ok(Reply {
            response: c.response,
            table_id: result_table_id,
            entry,
        })
    }

    /// Rebuilds sessions from journals, re-running every entry and
    /// comparing its response byte for byte with the recorded one.
    pub fn restore(&self, logs: Vec<SessionLog>, attach_journals: bool) -> Result<ReplayReport, StateError> {
        let mut report = ReplayReport::default();
        for log in logs {
            let up = &log.upload;
            let csv_path = self.data_dir().join(&up.csv_file);
            let bytes = std::fs::read(&csv_path).map_err(|source| StateError::Io {
                path: csv_path.clone(),
                source,
            })?;
            let mismatch = |seq: usize, expected: &str, found: String| ReplayMismatch {
                session_id: up.session_id.clone(),
                seq,
                expected: expected.to_string(),
                found,
            };
            let table = match self.load(&bytes, &up.table_name) {
                Ok(t) => t,
                Err(e) => {
                    report.mismatches.push(mismatch(0, "upload", e.body.to_string()));
                    continue;
                }
            };
            report.sessions += 1;
            self.insert_table(StoredTable::new(
                up.table_id.clone(),
                up.session_id.clone(),
                table,
                Origin::Upload,
            ));
            for entry in &log.entries {
                report.entries += 1;
                let expected = entry.outcome.get();
                let t = match self.table(&entry.table_id) {
                    Ok(t) => t,
                    Err(e) => {
                        report.mismatches.push(mismatch(entry.seq, expected, e.body.to_string()));
                        continue;
                    }
                };
                let threshold = entry
                    .vagueness_threshold
                    .unwrap_or(self.config.planner.vagueness_threshold);
                let c = match self.compute(&t, entry.kind, &entry.input, threshold) {
                    Ok(c) => c,
                    Err(e) => {
                        report.mismatches.push(mismatch(entry.seq, expected, e.body.to_string()));
                        continue;
                    }
                };
                if c.json != expected {
                    report.mismatches.push(mismatch(entry.seq, expected, c.json));
                    continue;
                }
                match (&entry.result_table_id, c.new_table) {
                    (Some(id), Some((table, chain_text))) => {
                        let origin = Origin::Derived {
                            parent: t.id.clone(),
                            chain_text,
                        };
                        self.insert_table(StoredTable::new(id.clone(), t.session_id.clone(), table, origin));
                    }
                    (None, None) => {}
                    (recorded, _) => {
                        report.mismatches.push(mismatch(
                            entry.seq,
                            &format!("table version {recorded:?}"),
                            "different versioning".into(),
                        ));
                        continue;
                    }
                }
                report.reproduced += 1;
            }
            let journal = attach_journals.then(|| Journal::open(log.path.clone()));
            self.insert_session(&up.session_id, journal, log.entries);
        }
        Ok(report)
    }
}

/// Replays every journal under `config.service.data_dir` in a fresh state.
pub fn replay(config: Config) -> Result<ReplayReport, StateError> {
    let state = AppState::new(config)?;
    let dir = state.data_dir().to_path_buf();
    let logs = read_all(&dir).map_err(|source| StateError::Io { path: dir, source })?;
    state.restore(logs, false)
}
