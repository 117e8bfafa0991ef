//! On-disk cache of Bessel zero tables.
//!
//! One JSON document per cache directory maps `"ν(12 decimals);K;bits"` to
//! the zeros as full-precision decimal strings. Readers take a shared lock,
//! writers an exclusive one, and the document is replaced atomically.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::{bessel_zeros, Precision, ZeroTable};

/// Environment variable that overrides the cache directory.
pub const CACHE_DIR_ENV: &str = "SINGHEAT_CACHE_DIR";
const FILE_NAME: &str = "bessel_zeros.json";
const LOCK_NAME: &str = "bessel_zeros.lock";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Entry {
    nu: String,
    count: usize,
    mantissa_bits: u32,
    series_tol: f64,
    zeros: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Document {
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone)]
pub struct ZeroCache {
    dir: PathBuf,
}

impl ZeroCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ZeroCache { dir: dir.into() }
    }

    /// Cache at `$SINGHEAT_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).map(ZeroCache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(nu: f64, count: usize, bits: u32) -> String {
        format!("{nu:.12};{count};{bits}")
    }

    fn lock(&self, exclusive: bool) -> Result<File> {
        fs::create_dir_all(&self.dir)?;
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(LOCK_NAME))?;
        if exclusive {
            f.lock()?;
        } else {
            f.lock_shared()?;
        }
        Ok(f)
    }

    fn read_doc(&self) -> Result<Document> {
        match fs::read(self.dir.join(FILE_NAME)) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Document::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Cached table for exactly this ν, count and precision.
    pub fn get<T: Real>(&self, nu: &T, count: usize, prec: &Precision) -> Result<Option<ZeroTable<T>>> {
        let eff = prec.effective::<T>();
        let key = Self::key(nu.to_f64_lossy(), count, eff.mantissa_bits);
        let _guard = self.lock(false)?;
        let doc = self.read_doc()?;
        let Some(entry) = doc.entries.get(&key) else {
            return Ok(None);
        };
        prec.scope(|| {
            if entry.nu != nu.rebase().to_decimal()
                || entry.count != count
                || entry.series_tol != prec.series_tol
            {
                return Ok(None);
            }
            let zeros: Option<Vec<T>> = entry.zeros.iter().map(|z| T::parse_decimal(z)).collect();
            let Some(zeros) = zeros else {
                return Err(Error::Config(format!("corrupt zero cache entry {key}")));
            };
            Ok(Some(ZeroTable {
                nu: nu.rebase(),
                zeros,
                precision: *prec,
            }))
        })
    }

    pub fn put<T: Real>(&self, table: &ZeroTable<T>) -> Result<()> {
        let prec = table.precision;
        let eff = prec.effective::<T>();
        let key = Self::key(table.nu.to_f64_lossy(), table.len(), eff.mantissa_bits);
        let entry = prec.scope(|| Entry {
            nu: table.nu.to_decimal(),
            count: table.len(),
            mantissa_bits: eff.mantissa_bits,
            series_tol: prec.series_tol,
            zeros: table.zeros.iter().map(Real::to_decimal).collect(),
        });
        let _guard = self.lock(true)?;
        let mut doc = self.read_doc()?;
        if doc.entries.get(&key) == Some(&entry) {
            return Ok(());
        }
        doc.entries.insert(key, entry);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut tmp, &doc)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(FILE_NAME)).map_err(|e| e.error)?;
        Ok(())
    }

    /// Cached zeros, computing and storing them on a miss.
    pub fn zeros<T: Real>(&self, nu: &T, count: usize, prec: &Precision) -> Result<ZeroTable<T>> {
        if let Some(t) = self.get(nu, count, prec)? {
            return Ok(t);
        }
        let t = bessel_zeros(nu, count, prec)?;
        self.put(&t)?;
        Ok(t)
    }
}

/// Zeros through `cache` when given, computed directly otherwise.
pub fn zeros_with<T: Real>(
    cache: Option<&ZeroCache>,
    nu: &T,
    count: usize,
    prec: &Precision,
) -> Result<ZeroTable<T>> {
    match cache {
        Some(c) => c.zeros(nu, count, prec),
        None => bessel_zeros(nu, count, prec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mpf;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ZeroCache::new(dir.path());
        let prec = Precision::new(192).unwrap();
        let nu = prec.scope(|| Mpf::lit(0.3));
        let fresh = cache.zeros(&nu, 5, &prec).unwrap();
        let cached = cache.get(&nu, 5, &prec).unwrap().expect("hit");
        assert_eq!(fresh, cached);
        assert!(cache.get(&nu, 6, &prec).unwrap().is_none());
        let other = Precision::new(256).unwrap();
        assert!(cache.get(&nu, 5, &other).unwrap().is_none());
    }
}
