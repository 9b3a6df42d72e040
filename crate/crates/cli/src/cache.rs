//! On-disk cache for expensive null simulations, keyed by their full inputs.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use phaseshift::io::{read_json, write_json};
use phaseshift::Result;

pub const CACHE_ENV: &str = "PHASESHIFT_CACHE_DIR";

#[derive(Serialize, Deserialize)]
struct Entry<K, V> {
    key: K,
    value: V,
}

/// Whether a value came from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    Disabled,
}

pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    /// `--cache-dir` wins over the environment; no directory disables caching.
    pub fn new(flag: Option<&Path>) -> Self {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        Self { dir }
    }

    fn path<K: Serialize>(&self, dir: &Path, label: &str, key: &K) -> Result<(PathBuf, serde_json::Value)> {
        let value = serde_json::to_value(key).map_err(|e| phaseshift::Error::Numerical(e.to_string()))?;
        let mut h = DefaultHasher::new();
        value.to_string().hash(&mut h);
        Ok((dir.join(format!("{label}-{:016x}.json", h.finish())), value))
    }

    /// Returns the cached value for `key`, computing and storing it on a miss.
    /// The stored key is compared in full, so hash collisions recompute.
    pub fn get_or<K, V, F>(&self, label: &str, key: &K, compute: F) -> Result<(V, CacheStatus)>
    where
        K: Serialize + DeserializeOwned,
        V: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<V>,
    {
        let Some(dir) = &self.dir else {
            return Ok((compute()?, CacheStatus::Disabled));
        };
        let (path, wanted) = self.path(dir, label, key)?;
        if path.exists() {
            if let Ok(entry) = read_json::<Entry<serde_json::Value, V>>(&path) {
                if entry.key == wanted {
                    return Ok((entry.value, CacheStatus::Hit));
                }
            }
        }
        let value = compute()?;
        write_json(&path, &Entry { key, value: &value })?;
        Ok((value, CacheStatus::Miss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    // field order differs from the sorted order of a JSON map
    #[derive(Serialize, Deserialize)]
    struct Key {
        z: u64,
        a: f64,
    }

    #[test]
    fn second_lookup_hits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(Some(dir.path()));
        let calls = Cell::new(0);
        let compute = || {
            calls.set(calls.get() + 1);
            Ok(vec![1.0, 2.0])
        };
        let (a, s1) = cache.get_or("t", &Key { z: u64::MAX, a: 0.1 }, compute).unwrap();
        let (b, s2) = cache.get_or("t", &Key { z: u64::MAX, a: 0.1 }, compute).unwrap();
        assert_eq!((s1, s2), (CacheStatus::Miss, CacheStatus::Hit));
        assert_eq!(a, b);
        assert_eq!(calls.get(), 1);
        let (_, s3) = cache.get_or::<_, Vec<f64>, _>("t", &Key { z: 4, a: 0.1 }, compute).unwrap();
        assert_eq!(s3, CacheStatus::Miss);
    }
}
