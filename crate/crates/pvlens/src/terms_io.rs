//! Pipe-delimited terminology directory reader.
//!
//! Layout (see `docs/terminology-format.md`):
//!
//! | file            | columns                                          |
//! |-----------------|--------------------------------------------------|
//! | `concepts.psv`  | code, terminology, level, preferred_name, pt_parent |
//! | `synonyms.psv`  | code, synonym                                    |
//! | `semtypes.psv`  | code, semantic_type                              |
//! | `mthspl.psv`    | set_id, substance_id, substance_name             |
//! | `ndc_map.psv`   | ndc, rxnorm_code, snomed_code                    |
//! | `stopwords.txt` | one entry per line (optional)                    |
//!
//! Blank lines and lines starting with `#` are ignored in every file.

use std::fs;
use std::path::{Path, PathBuf};

use pvlens_core::terms::{ConceptRow, TermError, TermStoreBuilder};
use pvlens_core::{SemanticTypeFilter, StopwordList, TermStore};

pub const CONCEPTS_FILE: &str = "concepts.psv";
pub const SYNONYMS_FILE: &str = "synonyms.psv";
pub const SEMTYPES_FILE: &str = "semtypes.psv";
pub const MTHSPL_FILE: &str = "mthspl.psv";
pub const NDC_MAP_FILE: &str = "ndc_map.psv";
pub const STOPWORDS_FILE: &str = "stopwords.txt";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {reason}")]
    MalformedRow { file: String, line: usize, reason: String },
    #[error("LLT {code} references missing PT {}", parent.as_deref().unwrap_or("<none>"))]
    DanglingLlt { code: String, parent: Option<String> },
    #[error(transparent)]
    Store(TermError),
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            LoadError::MissingFile(path.to_path_buf())
        } else {
            LoadError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

/// Non-comment rows with their 1-based line numbers.
fn rows(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn fields<'a>(file: &str, line: usize, row: &'a str, n: usize) -> Result<Vec<&'a str>, LoadError> {
    let f: Vec<&str> = row.split('|').map(str::trim).collect();
    if f.len() != n {
        return Err(LoadError::MalformedRow {
            file: file.into(),
            line,
            reason: format!("expected {n} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn at<T>(file: &str, line: usize, r: Result<T, TermError>) -> Result<T, LoadError> {
    r.map_err(|e| LoadError::MalformedRow {
        file: file.into(),
        line,
        reason: e.to_string(),
    })
}

/// Loads every terminology file of `dir` into an immutable store.
pub fn load_terminology(dir: &Path) -> Result<TermStore, LoadError> {
    let mut b = TermStoreBuilder::new();

    let src = read(&dir.join(CONCEPTS_FILE))?;
    for (line, row) in rows(&src) {
        let f = fields(CONCEPTS_FILE, line, row, 5)?;
        let terminology = at(CONCEPTS_FILE, line, f[1].parse())?;
        let level = at(CONCEPTS_FILE, line, f[2].parse())?;
        at(
            CONCEPTS_FILE,
            line,
            b.add_concept(ConceptRow {
                code: f[0].into(),
                terminology,
                level,
                preferred_name: f[3].into(),
                pt_parent: (!f[4].is_empty()).then(|| f[4].to_string()),
            }),
        )?;
    }

    let src = read(&dir.join(SYNONYMS_FILE))?;
    for (line, row) in rows(&src) {
        let f = fields(SYNONYMS_FILE, line, row, 2)?;
        at(SYNONYMS_FILE, line, b.add_synonym(f[0], f[1]))?;
    }

    let src = read(&dir.join(SEMTYPES_FILE))?;
    for (line, row) in rows(&src) {
        let f = fields(SEMTYPES_FILE, line, row, 2)?;
        at(SEMTYPES_FILE, line, b.add_semantic_type(f[0], f[1]))?;
    }

    let src = read(&dir.join(MTHSPL_FILE))?;
    for (line, row) in rows(&src) {
        let f = fields(MTHSPL_FILE, line, row, 3)?;
        at(MTHSPL_FILE, line, b.add_label_substance(f[0], f[1], f[2]))?;
    }

    let src = read(&dir.join(NDC_MAP_FILE))?;
    for (line, row) in rows(&src) {
        let f = fields(NDC_MAP_FILE, line, row, 3)?;
        at(NDC_MAP_FILE, line, b.add_ndc(f[0], (!f[1].is_empty()).then_some(f[1]), (!f[2].is_empty()).then_some(f[2])))?;
    }

    b.build().map_err(|e| match e {
        TermError::DanglingLlt { code, parent } => LoadError::DanglingLlt { code, parent },
        other => LoadError::Store(other),
    })
}

/// One entry per line; `#` comments; lowercased and deduplicated.
pub fn load_stopwords(path: &Path) -> Result<StopwordList, LoadError> {
    let src = read(path)?;
    Ok(StopwordList::new(rows(&src).map(|(_, l)| l.trim())))
}

/// Stopwords from `terms_dir/stopwords.txt`, or an empty list when absent.
pub fn default_stopwords(terms_dir: &Path) -> Result<StopwordList, LoadError> {
    match load_stopwords(&terms_dir.join(STOPWORDS_FILE)) {
        Err(LoadError::MissingFile(_)) => Ok(StopwordList::default()),
        other => other,
    }
}

/// Allowed semantic type codes, one per line. Text after the first
/// whitespace or `|` is treated as a label and ignored.
pub fn load_semantic_filter(path: &Path) -> Result<SemanticTypeFilter, LoadError> {
    let src = read(path)?;
    let codes: Vec<&str> = rows(&src)
        .filter_map(|(_, l)| l.split(|c: char| c.is_whitespace() || c == '|').next())
        .collect();
    SemanticTypeFilter::new(codes).map_err(LoadError::Store)
}
