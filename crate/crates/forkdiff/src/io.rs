//! File formats: JSON Lines, TSV inputs and atomic output writes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use forkdiff_core::analytics::GeoAnnotation;
use forkdiff_core::stats::YearMonth;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Deduplicated, order-preserving title list, one title per line. Lines
/// starting with `#` are comments (`#` cannot occur in a page title).
pub fn load_title_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = BTreeSet::new();
    let titles: Vec<String> = text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#') && seen.insert(l.clone()))
        .collect();
    if titles.is_empty() {
        return Err(Error::Data(format!("{}: title list is empty", path.display())));
    }
    Ok(titles)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).map_err(|e| Error::Data(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Write via a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// One row of `views.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRow {
    pub title: String,
    pub month: YearMonth,
    pub count: u64,
}

/// Monthly views per title. Repeated (title, month) rows are summed.
pub fn load_views(path: &Path) -> Result<BTreeMap<String, BTreeMap<YearMonth, u64>>> {
    let rows: Vec<ViewRow> = read_jsonl(path)?;
    let mut out: BTreeMap<String, BTreeMap<YearMonth, u64>> = BTreeMap::new();
    for row in rows {
        *out.entry(row.title).or_default().entry(row.month).or_default() += row.count;
    }
    Ok(out)
}

/// `title<TAB>codes` with comma-separated alpha-2 codes. Blank lines and
/// lines starting with `#` are skipped.
pub fn load_geo(path: &Path) -> Result<Vec<GeoAnnotation>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.into(), line: i + 1, message };
        let (title, codes) = line.split_once('\t').ok_or_else(|| parse_err("expected title<TAB>codes".into()))?;
        let codes = codes.split(',').map(str::trim).filter(|c| !c.is_empty());
        let annotation = GeoAnnotation::new(title.trim(), codes).map_err(|e| parse_err(e.to_string()))?;
        out.push(annotation);
    }
    Ok(out)
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Data(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

/// Fixed six-decimal rendering so reports are byte-stable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_list_dedups_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        fs::write(&p, "# list\nA\nB\n\nA\n").unwrap();
        assert_eq!(load_title_list(&p).unwrap(), vec!["A", "B"]);
        fs::write(&p, "").unwrap();
        assert!(matches!(load_title_list(&p), Err(Error::Data(_))));
        assert!(matches!(load_title_list(&dir.path().join("nope")), Err(Error::Io { .. })));
    }

    #[test]
    fn jsonl_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.jsonl");
        fs::write(&p, "{\"title\":\"A\",\"month\":\"2023-01\",\"count\":3}\n\n{\"title\":\"A\",\"month\":\"2023-13\",\"count\":1}\n").unwrap();
        match load_views(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geo_rows_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("geo.tsv");
        fs::write(&p, "# title\tcodes\nKyiv\tUA\nDonetsk\tUA,RU\nNowhere\t\n").unwrap();
        let geo = load_geo(&p).unwrap();
        assert_eq!(geo.len(), 3);
        assert_eq!(geo[1].key(), "RU+UA");
        fs::write(&p, "Bad\tUKR\n").unwrap();
        assert!(matches!(load_geo(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
    }
}
