//! Content-addressed result cache: entries are keyed by the hash of the
//! canonical request JSON plus a code-version tag, so identical requests
//! replay byte-identically and version bumps invalidate everything.

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use critset_core::wire::canonical_json;

/// Bumped whenever computed results could change.
pub const CODE_TAG: &str = concat!(env!("CARGO_PKG_VERSION"), "+r2");

pub fn cache_key(request: &Value) -> String {
    let keyed = json!({"tag": CODE_TAG, "request": request});
    let mut h = Sha256::new();
    h.update(canonical_json(&keyed).as_bytes());
    hex::encode(h.finalize())
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: PathBuf) -> Cache {
        Cache { dir }
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Returns the stored result for the request, when present and intact.
    /// Corrupt entries are reported and treated as misses.
    pub fn lookup(&self, request: &Value) -> Option<Value> {
        let path = self.entry_path(&cache_key(request));
        let raw = fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<Value>(&raw) {
            Ok(entry) => {
                if entry.get("request").map(canonical_json) == Some(canonical_json(request)) {
                    entry.get("result").cloned()
                } else {
                    eprintln!(
                        "warning: cache entry {} does not match its request; recomputing",
                        path.display()
                    );
                    None
                }
            }
            Err(_) => {
                eprintln!("warning: corrupt cache entry {}; recomputing", path.display());
                None
            }
        }
    }

    pub fn store(&self, request: &Value, result: &Value) -> Result<()> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating cache dir {}", self.dir.display()))?;
        let path = self.entry_path(&cache_key(request));
        let entry = json!({"tag": CODE_TAG, "request": request, "result": result});
        fs::write(&path, canonical_json(&entry))
            .with_context(|| format!("writing cache entry {}", path.display()))?;
        Ok(())
    }

    /// Cross-checks a freshly computed result against a stored entry, used
    /// by `--no-cache`; mismatches are reported and overwritten.
    pub fn cross_check(&self, request: &Value, fresh: &Value) {
        if let Some(stored) = self.lookup(request) {
            if canonical_json(&stored) != canonical_json(fresh) {
                eprintln!("warning: recomputed result differs from cache; overwriting");
            }
        }
        let _ = self.store(request, fresh);
    }
}

pub fn resolve_cache_dir(flag: Option<PathBuf>) -> PathBuf {
    if let Some(d) = flag {
        return d;
    }
    if let Ok(env) = std::env::var("CRITSET_CACHE") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    Path::new(".critset-cache").to_path_buf()
}
