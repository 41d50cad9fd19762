//! Content-addressed on-disk cache for API and model responses.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{sha256_hex, write_atomic};

pub const CACHE_DIR_ENV: &str = "FORKDIFF_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Canonical request, kept for inspection.
    pub request: String,
    pub fetched_at: DateTime<Utc>,
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskCache { root: root.into() }
    }

    /// `FORKDIFF_CACHE_DIR` if set, else `default`.
    pub fn from_env_or(default: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => DiskCache::new(dir),
            _ => DiskCache::new(default),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, namespace: &str, request: &str) -> PathBuf {
        let hash = sha256_hex(format!("{namespace}\0{request}").as_bytes());
        let ns: String =
            namespace.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect();
        self.root.join(ns).join(&hash[..2]).join(format!("{hash}.json"))
    }

    pub fn get(&self, namespace: &str, request: &str) -> Option<CacheEntry> {
        let bytes = fs::read(self.path(namespace, request)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        // Guard against hash collisions and hand-edited files.
        (entry.request == request).then_some(entry)
    }

    pub fn put(&self, namespace: &str, entry: &CacheEntry) -> Result<()> {
        let bytes = serde_json::to_vec(entry).map_err(|e| Error::Data(e.to_string()))?;
        write_atomic(&self.path(namespace, &entry.request), &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let entry = CacheEntry {
            request: "q=1".into(),
            fetched_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            status: 200,
            body: "{}".into(),
        };
        assert_eq!(cache.get("fork", "q=1"), None);
        cache.put("fork", &entry).unwrap();
        assert_eq!(cache.get("fork", "q=1"), Some(entry));
        assert_eq!(cache.get("upstream", "q=1"), None);
        assert_eq!(cache.get("fork", "q=2"), None);
    }
}
