//! On-disk cache of spectral factorizations.
//!
//! Entries are keyed by a SHA-256 digest of the grid parameters, the boundary
//! handling and the exact bytes of the assembled local operator. Each entry
//! is `<key>.bin` (little-endian `f64`: eigenvalues, then eigenvectors in
//! column-major order) plus a `<key>.json` metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::operator::{LocalOperator, SpectralFactorization};

pub const CACHE_DIR_ENV: &str = "FRACDTN_CACHE_DIR";

const BOUNDARY_TAG: &str = "zero-exterior-box";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMetadata {
    pub key: String,
    pub dim: usize,
    pub nodes_per_axis: usize,
    pub half_width: f64,
    pub boundary: String,
    pub size: usize,
    pub layout: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheEntry {
    pub metadata: CacheMetadata,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct FactorizationCache {
    dir: PathBuf,
}

/// Default location: `$FRACDTN_CACHE_DIR`, else `$XDG_CACHE_HOME/fracdtn`,
/// else `$HOME/.cache/fracdtn`, else `./.fracdtn-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(dir).join("fracdtn");
    }
    if let Some(home) = std::env::var_os("HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(home).join(".cache").join("fracdtn");
    }
    PathBuf::from(".fracdtn-cache")
}

pub fn cache_key(grid: &Grid, local: &LocalOperator) -> String {
    let mut h = Sha256::new();
    h.update((grid.dim() as u64).to_le_bytes());
    h.update((grid.nodes_per_axis() as u64).to_le_bytes());
    h.update(grid.half_width().to_bits().to_le_bytes());
    h.update(BOUNDARY_TAG.as_bytes());
    let m = local.matrix();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            h.update(m[(i, j)].to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl FactorizationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FactorizationCache { dir: dir.into() }
    }

    pub fn from_env() -> Self {
        Self::new(default_cache_dir())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.bin")), self.dir.join(format!("{key}.json")))
    }

    pub fn load(&self, key: &str, size: usize) -> Result<Option<SpectralFactorization>> {
        let (bin, json) = self.paths(key);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let meta: CacheMetadata = serde_json::from_str(&fs::read_to_string(json)?)?;
        if meta.size != size || meta.key != key {
            return Ok(None);
        }
        let bytes = fs::read(bin)?;
        if bytes.len() != 8 * size * (size + 1) {
            return Err(Error::numerical(format!("cache entry {key} is truncated")));
        }
        let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let eigenvalues: Vec<f64> = values.by_ref().take(size).collect();
        let flat: Vec<f64> = values.collect();
        let vectors = Mat::<f64>::from_fn(size, size, |i, j| flat[j * size + i]);
        Ok(Some(SpectralFactorization::from_parts(eigenvalues, vectors)?))
    }

    pub fn store(&self, key: &str, grid: &Grid, fac: &SpectralFactorization) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let n = fac.size();
        let mut bytes = Vec::with_capacity(8 * n * (n + 1));
        for v in fac.eigenvalues() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let vecs = fac.eigenvectors();
        for j in 0..n {
            for i in 0..n {
                bytes.extend_from_slice(&vecs[(i, j)].to_le_bytes());
            }
        }
        let meta = CacheMetadata {
            key: key.to_string(),
            dim: grid.dim(),
            nodes_per_axis: grid.nodes_per_axis(),
            half_width: grid.half_width(),
            boundary: BOUNDARY_TAG.to_string(),
            size: n,
            layout: "f64le; eigenvalues[size] then eigenvectors[size*size] column-major".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let (bin, json) = self.paths(key);
        // payload first so a sidecar always points at a complete file
        let tmp = bin.with_extension("bin.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &bin)?;
        fs::write(json, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Cached factorization of `local`, computing and storing it on a miss.
    /// Returns whether the cache was hit.
    pub fn get_or_compute(&self, grid: &Grid, local: &LocalOperator) -> Result<(Arc<SpectralFactorization>, bool)> {
        let key = cache_key(grid, local);
        if let Some(fac) = self.load(&key, local.size())? {
            return Ok((Arc::new(fac), true));
        }
        let fac = SpectralFactorization::new(local)?;
        self.store(&key, grid, &fac)?;
        Ok((Arc::new(fac), false))
    }

    pub fn list(&self) -> Result<Vec<CacheEntry>> {
        let mut out = Vec::new();
        if !self.dir.exists() {
            return Ok(out);
        }
        let mut names: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        names.sort();
        for json in names {
            let Ok(metadata) = serde_json::from_str::<CacheMetadata>(&fs::read_to_string(&json)?) else {
                continue;
            };
            let bytes = fs::metadata(json.with_extension("bin")).map(|m| m.len()).unwrap_or(0);
            out.push(CacheEntry { metadata, bytes });
        }
        Ok(out)
    }

    /// Removes every entry; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        let entries = self.list()?;
        for e in &entries {
            let (bin, json) = self.paths(&e.metadata.key);
            for p in [bin, json] {
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
        }
        Ok(entries.len())
    }
}
