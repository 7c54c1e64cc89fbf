//! Batch orchestration: parse, resolve, extract and stamp every label of a
//! directory on a worker pool, then merge the run into the repository in a
//! single serialized step.
//!
//! Worker output is collected in input order and the run's events are keyed
//! in a `BTreeMap`, so the merged repository does not depend on the worker
//! count or on scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pvlens_core::event::{EventKey, LabeledEvent, MergeReport, Provenance};
use pvlens_core::ident::{resolve_substances, SubstanceRecord};
use pvlens_core::matcher::{extract_terms, MatchAutomaton, MatchError, TermMatch};
use pvlens_core::srlc::{apply_srlc, SrlcRecord};
use pvlens_core::{Date, SectionCategory, SemanticTypeFilter, StopwordList, TermStore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::repository::{RepoError, Repository};
use crate::spl::{parse_spl, SectionMap, SectionMapError, SplError};
use crate::srlc_io::{load_srlc, SrlcError};
use crate::synth::{write_corpus, SynthConfig};
use crate::terms_io::{default_stopwords, load_semantic_filter, load_stopwords, load_terminology, LoadError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub input_dir: PathBuf,
    pub terminology_dir: PathBuf,
    pub srlc_file: Option<PathBuf>,
    pub repo_path: PathBuf,
    pub worker_count: usize,
    /// Defaults to `stopwords.txt` in the terminology directory.
    pub stopword_file: Option<PathBuf>,
    /// Defaults to the built-in clinical semantic types.
    pub semtype_file: Option<PathBuf>,
    /// Defaults to the three built-in section codes.
    pub section_map_file: Option<PathBuf>,
    pub run_date: Date,
}

impl RunConfig {
    pub fn new(input_dir: impl Into<PathBuf>, terminology_dir: impl Into<PathBuf>, repo_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            input_dir: input_dir.into(),
            terminology_dir: terminology_dir.into(),
            srlc_file: None,
            repo_path: repo_path.into(),
            worker_count: 1,
            stopword_file: None,
            semtype_file: None,
            section_map_file: None,
            run_date: chrono::Local::now().date_naive(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.worker_count == 0 {
            return Err(ConfigError::ZeroWorkers);
        }
        let dirs = [&self.input_dir, &self.terminology_dir];
        for d in dirs {
            if !d.is_dir() {
                return Err(ConfigError::MissingPath(d.clone()));
            }
        }
        let files = [&self.srlc_file, &self.stopword_file, &self.semtype_file, &self.section_map_file];
        for f in files.into_iter().flatten() {
            if !f.is_file() {
                return Err(ConfigError::MissingPath(f.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("worker_count must be at least 1")]
    ZeroWorkers,
    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),
    #[error(transparent)]
    SectionMap(#[from] SectionMapError),
    #[error("filter file: {0}")]
    Filter(LoadError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("terminology: {0}")]
    Terminology(#[from] LoadError),
    #[error("matcher: {0}")]
    Matcher(#[from] MatchError),
    #[error("safety-change records: {0}")]
    Srlc(#[from] SrlcError),
    #[error("repository: {0}")]
    Repository(#[from] RepoError),
    #[error("cannot list {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Why a label did not reach the merge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail")]
pub enum SkipReason {
    Unreadable(String),
    MalformedXml(String),
    MissingSetId,
    DuplicateSection(SectionCategory),
    UnmappedLabel,
    /// A newer version (or the same version in an earlier file) of the same
    /// set id is in the run.
    Superseded { kept: String },
}

impl From<SplError> for SkipReason {
    fn from(e: SplError) -> Self {
        match e {
            SplError::MalformedXml(m) => SkipReason::MalformedXml(m),
            SplError::MissingSetId => SkipReason::MissingSetId,
            SplError::DuplicateSection(c) => SkipReason::DuplicateSection(c),
        }
    }
}

impl SkipReason {
    pub fn kind(&self) -> &'static str {
        match self {
            SkipReason::Unreadable(_) => "Unreadable",
            SkipReason::MalformedXml(_) => "MalformedXml",
            SkipReason::MissingSetId => "MissingSetId",
            SkipReason::DuplicateSection(_) => "DuplicateSection",
            SkipReason::UnmappedLabel => "UnmappedLabel",
            SkipReason::Superseded { .. } => "Superseded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLabel {
    pub file: String,
    #[serde(flatten)]
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input_count: usize,
    pub processed: usize,
    pub skipped: Vec<SkippedLabel>,
    pub distinct_substances: usize,
    pub distinct_pts: usize,
    pub events: usize,
    pub merge: MergeReport,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn skipped_by_kind(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for s in &self.skipped {
            *m.entry(s.reason.kind()).or_insert(0) += 1;
        }
        m
    }
}

/// Read-only structures shared by every worker.
pub struct Resources {
    pub store: TermStore,
    pub automaton: MatchAutomaton,
    pub stopwords: StopwordList,
    pub filter: SemanticTypeFilter,
    pub section_map: SectionMap,
}

impl Resources {
    pub fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let section_map = match &cfg.section_map_file {
            Some(p) => SectionMap::load(p).map_err(ConfigError::from)?,
            None => SectionMap::default(),
        };
        let filter = match &cfg.semtype_file {
            Some(p) => load_semantic_filter(p).map_err(ConfigError::Filter)?,
            None => SemanticTypeFilter::default(),
        };
        let stopwords = match &cfg.stopword_file {
            Some(p) => load_stopwords(p).map_err(ConfigError::Filter)?,
            None => default_stopwords(&cfg.terminology_dir)?,
        };
        let store = load_terminology(&cfg.terminology_dir)?;
        Self::from_parts(store, stopwords, filter, section_map)
    }

    pub fn from_parts(
        store: TermStore,
        stopwords: StopwordList,
        filter: SemanticTypeFilter,
        section_map: SectionMap,
    ) -> Result<Self, PipelineError> {
        let automaton = MatchAutomaton::build(&store)?;
        Ok(Resources {
            store,
            automaton,
            stopwords,
            filter,
            section_map,
        })
    }
}

/// Everything one label contributes to a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelOutcome {
    pub set_id: String,
    pub doc_version: u32,
    pub effective_date: Date,
    pub substances: Vec<SubstanceRecord>,
    pub matches: Vec<TermMatch>,
}

/// Parse, substance resolution, NDC mapping and extraction for one label.
pub fn process_label(xml: &[u8], res: &Resources) -> Result<LabelOutcome, SkipReason> {
    let doc = parse_spl(xml, &res.section_map)?;
    let mut substances =
        resolve_substances(&doc.set_id, &res.store).map_err(|_| SkipReason::UnmappedLabel)?;
    for s in &mut substances {
        s.attach_ndcs(&doc.ndc_codes, &res.store);
    }
    let mut matches = Vec::new();
    for section in &doc.sections {
        // The automaton was built from this store, so a mismatch cannot occur.
        let found = extract_terms(section, &res.automaton, &res.store, &res.stopwords, &res.filter)
            .expect("automaton built from the shared store");
        matches.extend(found);
    }
    Ok(LabelOutcome {
        set_id: doc.set_id,
        doc_version: doc.doc_version,
        effective_date: doc.effective_date,
        substances,
        matches,
    })
}

/// `*.xml` files directly inside `dir`, sorted by name.
pub fn list_labels(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |source| PipelineError::Input {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_xml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("xml"));
        if is_xml && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Result of the parallel phase, before merge.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub input_count: usize,
    pub processed: Vec<LabelOutcome>,
    pub skipped: Vec<SkippedLabel>,
}

/// Runs [`process_label`] over `files` on `workers` threads and keeps only
/// the newest version of each set id.
pub fn extract_all(files: &[PathBuf], res: &Resources, workers: usize) -> Result<Extraction, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::Pool(e.to_string()))?;
    let results: Vec<Result<LabelOutcome, SkipReason>> = pool.install(|| {
        files
            .par_iter()
            .map(|p| match fs::read(p) {
                Ok(bytes) => process_label(&bytes, res),
                Err(e) => Err(SkipReason::Unreadable(e.to_string())),
            })
            .collect()
    });

    let mut skipped = Vec::new();
    // Newest version per set id; ties go to the first file by name.
    let mut newest: BTreeMap<String, (u32, usize)> = BTreeMap::new();
    for (i, r) in results.iter().enumerate() {
        if let Ok(o) = r {
            let slot = newest.entry(o.set_id.clone()).or_insert((o.doc_version, i));
            if o.doc_version > slot.0 {
                *slot = (o.doc_version, i);
            }
        }
    }
    let mut processed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => {
                let (_, kept) = newest[&o.set_id];
                if kept == i {
                    processed.push(o);
                } else {
                    skipped.push(SkippedLabel {
                        file: file_name(&files[i]),
                        reason: SkipReason::Superseded {
                            kept: file_name(&files[kept]),
                        },
                    });
                }
            }
            Err(reason) => skipped.push(SkippedLabel {
                file: file_name(&files[i]),
                reason,
            }),
        }
    }
    Ok(Extraction {
        input_count: files.len(),
        processed,
        skipped,
    })
}

/// Builds the run's events (one per substance, category and PT), sorted by
/// key, with provenance from every supporting mention.
pub fn build_events(outcomes: &[LabelOutcome], run_date: Date) -> Vec<LabeledEvent> {
    let mut events: BTreeMap<EventKey, (String, BTreeSet<Provenance>)> = BTreeMap::new();
    for o in outcomes {
        for s in &o.substances {
            for m in &o.matches {
                let key = EventKey {
                    substance_id: s.substance_id.clone(),
                    category: m.category,
                    pt_code: m.pt_code.clone(),
                };
                let entry = events
                    .entry(key)
                    .or_insert_with(|| (s.substance_name.clone(), BTreeSet::new()));
                entry.1.insert(Provenance {
                    set_id: o.set_id.clone(),
                    doc_version: o.doc_version,
                    span: m.span,
                });
            }
        }
    }
    events
        .into_iter()
        .map(|(k, (name, prov))| LabeledEvent {
            substance_id: k.substance_id,
            substance_name: name,
            pt_code: k.pt_code,
            category: k.category,
            first_seen_date: run_date,
            last_seen_date: run_date,
            srlc_date: None,
            provenance: prov.into_iter().collect(),
        })
        .collect()
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    cfg.validate()?;
    let res = Resources::load(cfg)?;
    let srlc: Vec<SrlcRecord> = match &cfg.srlc_file {
        Some(p) => load_srlc(p)?,
        None => Vec::new(),
    };
    let mut repo = Repository::open(&cfg.repo_path)?;
    let files = list_labels(&cfg.input_dir)?;
    let extraction = extract_all(&files, &res, cfg.worker_count)?;

    let events = apply_srlc(build_events(&extraction.processed, cfg.run_date), &srlc);
    let distinct_substances = extraction
        .processed
        .iter()
        .flat_map(|o| o.substances.iter().map(|s| s.substance_id.as_str()))
        .collect::<BTreeSet<_>>()
        .len();
    let distinct_pts = events.iter().map(|e| e.pt_code.as_str()).collect::<BTreeSet<_>>().len();
    let event_count = events.len();
    let merge = repo.merge_run(events, cfg.run_date)?;

    Ok(RunReport {
        input_count: extraction.input_count,
        processed: extraction.processed.len(),
        skipped: extraction.skipped,
        distinct_substances,
        distinct_pts,
        events: event_count,
        merge,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub labels: usize,
    pub workers: usize,
    pub processed: usize,
    pub events: usize,
    pub elapsed_secs: f64,
    pub labels_per_sec: f64,
}

/// Generates `count` seeded synthetic labels in a scratch directory and
/// times a full run over them, terminology load and merge included. Corpus
/// generation is not timed.
pub fn benchmark(scratch: &Path, count: usize, workers: usize, cfg: SynthConfig) -> Result<BenchReport, PipelineError> {
    let io = |source| PipelineError::Input {
        path: scratch.to_path_buf(),
        source,
    };
    let corpus = write_corpus(scratch, count, cfg).map_err(io)?;
    let repo_path = scratch.join(format!("bench-{workers}.sqlite"));
    let _ = fs::remove_file(&repo_path);
    let mut run = RunConfig::new(&corpus.labels_dir, &corpus.terms_dir, &repo_path);
    run.worker_count = workers;
    let t = Instant::now();
    let report = run_pipeline(&run)?;
    let elapsed = t.elapsed().max(Duration::from_micros(1)).as_secs_f64();
    Ok(BenchReport {
        labels: count,
        workers,
        processed: report.processed,
        events: report.events,
        elapsed_secs: elapsed,
        labels_per_sec: report.input_count as f64 / elapsed,
    })
}
