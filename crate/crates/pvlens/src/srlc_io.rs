//! `srlc.jsonl` reader.

use std::fs;
use std::path::Path;

use pvlens_core::srlc::SrlcRecord;

#[derive(Debug, thiserror::Error)]
pub enum SrlcError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

pub fn parse_srlc(src: &str) -> Result<Vec<SrlcRecord>, SrlcError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SrlcRecord = serde_json::from_str(line).map_err(|e| SrlcError::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if rec.set_id.trim().is_empty() {
            return Err(SrlcError::MalformedRecord {
                line: i + 1,
                reason: "empty set_id".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_srlc(path: &Path) -> Result<Vec<SrlcRecord>, SrlcError> {
    let src = fs::read_to_string(path).map_err(|source| SrlcError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_srlc(&src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pvlens_core::SectionCategory;

    const FIXTURE: &str = r#"{"set_id":"G1","category":"AdverseEvent","pt_code":"P1","change_date":"2023-05-01","description":"added"}
{"set_id":"G1","category":"AdverseEvent","pt_code":null,"change_date":"2022-01-01","description":"section"}
{"set_id":"G2","category":"BoxedWarning","change_date":"2021-07-15","description":"boxed"}
{"set_id":"G3","category":"Indication","pt_code":"P9","change_date":"2020-02-29","description":"leap"}
"#;

    #[test]
    fn four_lines_four_records() {
        let recs = parse_srlc(FIXTURE).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[2].category, SectionCategory::BoxedWarning);
        assert_eq!(recs[2].pt_code, None);
    }

    #[test]
    fn invalid_month_reports_line() {
        let src = format!(
            "{}\n{}",
            FIXTURE.lines().next().unwrap(),
            r#"{"set_id":"G1","category":"AdverseEvent","pt_code":null,"change_date":"2024-13-01","description":""}"#
        );
        assert!(matches!(parse_srlc(&src), Err(SrlcError::MalformedRecord { line: 2, .. })));
    }

    #[test]
    fn empty_file() {
        assert!(parse_srlc("").unwrap().is_empty());
    }
}
