//! On-disk store for the lifted Riccati cache.
//!
//! A cache file is JSON holding a format version, the SHA-256 of the inputs
//! that determine the cache, and the cache itself. A version or hash mismatch
//! forces a rebuild. Building twice from the same inputs gives the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tinysdp::solver::lifted_cache;
use tinysdp::{CostForm, PsdBlock, RiccatiCache};

use crate::error::{BenchError, Result};
use crate::scenario::Scenario;

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Everything the lifted cache depends on. Iteration limits, tolerances of
/// the online solve and the goal do not enter.
#[derive(Serialize)]
struct CacheKey<'a> {
    dim: usize,
    dt: f64,
    q: &'a DMatrix<f64>,
    r: &'a DMatrix<f64>,
    qf: Option<&'a DMatrix<f64>>,
    horizon: usize,
    rho_psd: f64,
    rho_box: f64,
    rho_obs: f64,
    input_cuts: bool,
    psd_block: PsdBlock,
    cost_form: CostForm,
    riccati_tol: f64,
    riccati_max_iter: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CacheFile {
    pub format_version: u32,
    pub config_hash: String,
    pub dim: usize,
    pub dt: f64,
    pub cache: RiccatiCache,
}

/// Hex SHA-256 of the cache inputs of `scn`.
pub fn config_hash(scn: &Scenario) -> String {
    let w = scn.tracking_weights();
    let cfg = scn.solver_config();
    let key = CacheKey {
        dim: scn.dim,
        dt: scn.dt,
        q: &w.q,
        r: &w.r,
        qf: w.qf.as_ref(),
        horizon: cfg.horizon,
        rho_psd: cfg.rho_psd,
        rho_box: cfg.rho_box,
        rho_obs: cfg.rho_obs,
        input_cuts: cfg.input_cuts,
        psd_block: cfg.psd_block,
        cost_form: cfg.cost_form,
        riccati_tol: cfg.riccati_tol,
        riccati_max_iter: cfg.riccati_max_iter,
    };
    let bytes = serde_json::to_vec(&key).expect("cache key serializes");
    hex::encode(Sha256::digest(&bytes))
}

impl CacheFile {
    pub fn build(scn: &Scenario) -> Result<Self> {
        let cache = lifted_cache(&scn.lifted()?, &scn.tracking_weights(), &scn.solver_config())?;
        Ok(Self { format_version: CACHE_FORMAT_VERSION, config_hash: config_hash(scn), dim: scn.dim, dt: scn.dt, cache })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("cache serializes");
        out.push(b'\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read(path)?;
        Ok(serde_json::from_slice(&text)?)
    }

    /// Usable for `scn` without a rebuild.
    pub fn matches(&self, scn: &Scenario) -> bool {
        self.format_version == CACHE_FORMAT_VERSION && self.config_hash == config_hash(scn)
    }
}

/// File name of the cache for `scn` inside a cache directory.
pub fn cache_path(dir: &Path, scn: &Scenario) -> PathBuf {
    dir.join(format!("lifted-{}.json", &config_hash(scn)[..16]))
}

/// Loads the cache for `scn` from `dir`, rebuilding and rewriting it when it
/// is missing, unreadable or stale.
pub fn load_or_build(dir: &Path, scn: &Scenario) -> Result<RiccatiCache> {
    let path = cache_path(dir, scn);
    if let Ok(file) = CacheFile::read(&path) {
        if file.matches(scn) {
            return Ok(file.cache);
        }
    }
    let file = CacheFile::build(scn)?;
    fs::create_dir_all(dir)?;
    file.write(&path)?;
    Ok(file.cache)
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Cache(e.to_string())
    }
}
