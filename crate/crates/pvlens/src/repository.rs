//! Labeled-event repository in a single SQLite file.
//!
//! Schema (also in `docs/repository-schema.md`):
//!
//! ```sql
//! events(substance_id, category, pt_code, substance_name,
//!        first_seen_date, last_seen_date, srlc_date)      -- PK first three
//! provenance(substance_id, category, pt_code,
//!            set_id, doc_version, span_start, span_end)    -- PK all columns
//! runs(run_id, run_date, inserted, updated, not_reconfirmed)
//! ```
//!
//! Merges run inside one `BEGIN IMMEDIATE` transaction, so concurrent
//! writers are serialized by SQLite and readers see either the old or the
//! new state.

use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use pvlens_core::event::{EventKey, EventTable, LabeledEvent, MergeError, MergeReport, Provenance};
use pvlens_core::{Date, SectionCategory, Span};
use rusqlite::{params, Connection, OptionalExtension, TransactionBehavior};

#[derive(Debug, thiserror::Error)]
pub enum RepoError {
    #[error("storage failure: {0}")]
    StorageFailure(#[from] rusqlite::Error),
    #[error("corrupt repository row: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::JsonLines),
            other => Err(format!("unknown export format {other:?} (expected csv or jsonl)")),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "substance_id",
    "substance_name",
    "pt_code",
    "category",
    "first_seen_date",
    "last_seen_date",
    "srlc_date",
];

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS events (
    substance_id    TEXT NOT NULL,
    category        TEXT NOT NULL,
    pt_code         TEXT NOT NULL,
    substance_name  TEXT NOT NULL,
    first_seen_date TEXT NOT NULL,
    last_seen_date  TEXT NOT NULL,
    srlc_date       TEXT,
    PRIMARY KEY (substance_id, category, pt_code),
    CHECK (first_seen_date <= last_seen_date)
);
CREATE TABLE IF NOT EXISTS provenance (
    substance_id TEXT NOT NULL,
    category     TEXT NOT NULL,
    pt_code      TEXT NOT NULL,
    set_id       TEXT NOT NULL,
    doc_version  INTEGER NOT NULL,
    span_start   INTEGER NOT NULL,
    span_end     INTEGER NOT NULL,
    PRIMARY KEY (substance_id, category, pt_code, set_id, doc_version, span_start, span_end),
    FOREIGN KEY (substance_id, category, pt_code) REFERENCES events (substance_id, category, pt_code)
);
CREATE TABLE IF NOT EXISTS runs (
    run_id          INTEGER PRIMARY KEY AUTOINCREMENT,
    run_date        TEXT NOT NULL,
    inserted        INTEGER NOT NULL,
    updated         INTEGER NOT NULL,
    not_reconfirmed INTEGER NOT NULL
);
";

pub struct Repository {
    conn: Connection,
}

impl Repository {
    pub fn open(path: &Path) -> Result<Self, RepoError> {
        let conn = Connection::open(path)?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, RepoError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, RepoError> {
        conn.busy_timeout(std::time::Duration::from_secs(30))?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.query_row("PRAGMA journal_mode = WAL", [], |_| Ok(()))
            .optional()?;
        conn.execute_batch(SCHEMA)?;
        Ok(Repository { conn })
    }

    /// Loads every event with its provenance.
    pub fn events(&self) -> Result<EventTable, RepoError> {
        load_table(&self.conn)
    }

    pub fn run_count(&self) -> Result<usize, RepoError> {
        let n: i64 = self.conn.query_row("SELECT COUNT(*) FROM runs", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Merges one run's events. See [`EventTable::merge_run`] for the rules.
    pub fn merge_run(&mut self, run: Vec<LabeledEvent>, run_date: Date) -> Result<MergeReport, RepoError> {
        let tx = self.conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let mut table = load_table(&tx)?;
        let outcome = table.merge_run(run, run_date)?;
        {
            let mut del = tx.prepare_cached(
                "DELETE FROM provenance WHERE substance_id = ?1 AND category = ?2 AND pt_code = ?3",
            )?;
            for key in &outcome.changed {
                let ev = table.get(key).expect("merged key present");
                upsert_event(&tx, ev)?;
                del.execute(params![key.substance_id, key.category.as_str(), key.pt_code])?;
                insert_provenance(&tx, ev)?;
            }
        }
        let r = &outcome.report;
        tx.execute(
            "INSERT INTO runs (run_date, inserted, updated, not_reconfirmed) VALUES (?1, ?2, ?3, ?4)",
            params![run_date.to_string(), r.inserted as i64, r.updated as i64, r.not_reconfirmed as i64],
        )?;
        tx.commit()?;
        Ok(outcome.report)
    }

    /// Writes the repository in `(substance_id, category, pt_code)` order.
    pub fn export<W: Write>(&self, format: ExportFormat, out: W) -> Result<(), RepoError> {
        let table = self.events()?;
        export_table(&table, format, out)
    }

    /// Loads rows from a JSON-lines export, replacing rows with equal keys.
    pub fn import_jsonl<R: BufRead>(&mut self, input: R) -> Result<usize, RepoError> {
        let tx = self.conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let mut n = 0;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: LabeledEvent =
                serde_json::from_str(&line).map_err(|source| RepoError::Json { line: i + 1, source })?;
            if ev.provenance.is_empty() || ev.first_seen_date > ev.last_seen_date {
                return Err(RepoError::Corrupt(format!("line {}: invalid event", i + 1)));
            }
            upsert_event(&tx, &ev)?;
            tx.execute(
                "DELETE FROM provenance WHERE substance_id = ?1 AND category = ?2 AND pt_code = ?3",
                params![ev.substance_id, ev.category.as_str(), ev.pt_code],
            )?;
            insert_provenance(&tx, &ev)?;
            n += 1;
        }
        tx.commit()?;
        Ok(n)
    }
}

pub fn export_table<W: Write>(table: &EventTable, format: ExportFormat, mut out: W) -> Result<(), RepoError> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for e in table.iter() {
                w.write_record([
                    e.substance_id.as_str(),
                    e.substance_name.as_str(),
                    e.pt_code.as_str(),
                    e.category.as_str(),
                    &e.first_seen_date.to_string(),
                    &e.last_seen_date.to_string(),
                    &e.srlc_date.map(|d| d.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        ExportFormat::JsonLines => {
            for e in table.iter() {
                serde_json::to_writer(&mut out, e).map_err(|source| RepoError::Json { line: 0, source })?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn upsert_event(conn: &Connection, e: &LabeledEvent) -> Result<(), RepoError> {
    conn.prepare_cached(
        "INSERT INTO events (substance_id, category, pt_code, substance_name, first_seen_date, last_seen_date, srlc_date)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)
         ON CONFLICT (substance_id, category, pt_code) DO UPDATE SET
            substance_name = excluded.substance_name,
            first_seen_date = excluded.first_seen_date,
            last_seen_date = excluded.last_seen_date,
            srlc_date = excluded.srlc_date",
    )?
    .execute(params![
        e.substance_id,
        e.category.as_str(),
        e.pt_code,
        e.substance_name,
        e.first_seen_date.to_string(),
        e.last_seen_date.to_string(),
        e.srlc_date.map(|d| d.to_string()),
    ])?;
    Ok(())
}

fn insert_provenance(conn: &Connection, e: &LabeledEvent) -> Result<(), RepoError> {
    let mut stmt = conn.prepare_cached(
        "INSERT OR IGNORE INTO provenance
         (substance_id, category, pt_code, set_id, doc_version, span_start, span_end)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
    )?;
    for p in &e.provenance {
        stmt.execute(params![
            e.substance_id,
            e.category.as_str(),
            e.pt_code,
            p.set_id,
            p.doc_version,
            p.span.start as i64,
            p.span.end as i64,
        ])?;
    }
    Ok(())
}

fn parse_date(s: &str) -> Result<Date, RepoError> {
    s.parse().map_err(|_| RepoError::Corrupt(format!("bad date {s:?}")))
}

fn parse_category(s: &str) -> Result<SectionCategory, RepoError> {
    s.parse().map_err(|_| RepoError::Corrupt(format!("bad category {s:?}")))
}

fn load_table(conn: &Connection) -> Result<EventTable, RepoError> {
    let mut rows: Vec<LabeledEvent> = Vec::new();
    {
        let mut stmt = conn.prepare_cached(
            "SELECT substance_id, category, pt_code, substance_name, first_seen_date, last_seen_date, srlc_date
             FROM events ORDER BY substance_id, category, pt_code",
        )?;
        let mut q = stmt.query([])?;
        while let Some(r) = q.next()? {
            let category: String = r.get(1)?;
            let first: String = r.get(4)?;
            let last: String = r.get(5)?;
            let srlc: Option<String> = r.get(6)?;
            rows.push(LabeledEvent {
                substance_id: r.get(0)?,
                category: parse_category(&category)?,
                pt_code: r.get(2)?,
                substance_name: r.get(3)?,
                first_seen_date: parse_date(&first)?,
                last_seen_date: parse_date(&last)?,
                srlc_date: srlc.as_deref().map(parse_date).transpose()?,
                provenance: Vec::new(),
            });
        }
    }
    let mut stmt = conn.prepare_cached(
        "SELECT substance_id, category, pt_code, set_id, doc_version, span_start, span_end FROM provenance",
    )?;
    let mut q = stmt.query([])?;
    let mut prov: std::collections::BTreeMap<EventKey, Vec<Provenance>> = Default::default();
    while let Some(r) = q.next()? {
        let category: String = r.get(1)?;
        let key = EventKey {
            substance_id: r.get(0)?,
            category: parse_category(&category)?,
            pt_code: r.get(2)?,
        };
        let start: i64 = r.get(5)?;
        let end: i64 = r.get(6)?;
        prov.entry(key).or_default().push(Provenance {
            set_id: r.get(3)?,
            doc_version: r.get(4)?,
            span: Span {
                start: start as usize,
                end: end as usize,
            },
        });
    }
    let mut table = EventTable::new();
    for mut e in rows {
        let mut p = prov.remove(&e.key()).unwrap_or_default();
        p.sort();
        e.provenance = p;
        table.insert_row(e);
    }
    Ok(table)
}
