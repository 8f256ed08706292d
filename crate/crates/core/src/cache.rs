//! On-disk cache of kernel matrices keyed by their build parameters.
//!
//! File layout (little-endian): the 16-byte magic `ARRAYCAV-KERNEL\0`, a
//! `u32` format version, a `u32` header length, a JSON header (kind, shape,
//! parameters), then the entries as `(re, im)` `f64` pairs in row-major order.
//! Translation-invariant kernels store their `(2n-1)²` displacement table.

use crate::confined::{KernelKind, KernelMatrix, Provenance, Storage};
use crate::greens::Dipole;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 16] = b"ARRAYCAV-KERNEL\0";
const VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "ARRAYCAV_CACHE_DIR";

#[derive(Serialize, Deserialize, Debug, PartialEq)]
struct Header {
    kind: String,
    storage: String,
    n_side: usize,
    a: f64,
    dipole: Dipole,
    d2z: bool,
    z0: Option<f64>,
    k_cut: Option<f64>,
    w: Option<f64>,
    p_max: Option<usize>,
    removed: Vec<String>,
    entries: usize,
}

#[derive(Clone, Debug)]
pub struct KernelCache {
    dir: PathBuf,
}

/// Outcome of a cache lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KernelCache { dir: dir.into() }
    }

    /// Cache rooted at `$ARRAYCAV_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(KernelCache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stable key for a kernel built from `prov`.
    pub fn key(kind: KernelKind, prov: &Provenance) -> String {
        let text = format!(
            "kind={};n_side={};a={:?};dipole={};d2z={};z0={:?};k_cut={:?};w={:?};p_max={:?};removed={}",
            kind.name(),
            prov.n_side,
            prov.a,
            prov.dipole.name(),
            prov.d2z,
            prov.z0,
            prov.k_cut,
            prov.w,
            prov.p_max,
            prov.removed.join(",")
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.kernel"))
    }

    pub fn load(&self, key: &str) -> Result<Option<KernelMatrix>> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        read_kernel(&path).map(Some)
    }

    pub fn store(&self, key: &str, kernel: &KernelMatrix) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        // Write then rename so concurrent readers never see a partial file.
        let tmp = self.dir.join(format!("{key}.tmp{}", std::process::id()));
        write_kernel(&tmp, kernel)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads the kernel for `(kind, prov)` or builds and stores it.
    pub fn get_or_build(
        &self,
        kind: KernelKind,
        prov: &Provenance,
        build: impl FnOnce() -> Result<KernelMatrix>,
    ) -> Result<(KernelMatrix, CacheStatus)> {
        let key = Self::key(kind, prov);
        if let Some(k) = self.load(&key)? {
            return Ok((k, CacheStatus::Hit));
        }
        let k = build()?;
        self.store(&key, &k)?;
        Ok((k, CacheStatus::Built))
    }
}

pub fn write_kernel(path: &Path, kernel: &KernelMatrix) -> Result<()> {
    let p = &kernel.provenance;
    let (storage, values): (&str, Vec<C64>) = match kernel.storage() {
        Storage::Toeplitz(t) => ("toeplitz", t.clone()),
        Storage::Dense(m) => {
            let mut v = Vec::with_capacity(m.len());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    v.push(m[(r, c)]);
                }
            }
            ("dense", v)
        }
    };
    let header = Header {
        kind: kernel.kind.name().to_string(),
        storage: storage.to_string(),
        n_side: p.n_side,
        a: p.a,
        dipole: p.dipole,
        d2z: p.d2z,
        z0: p.z0,
        k_cut: p.k_cut,
        w: p.w,
        p_max: p.p_max,
        removed: p.removed.clone(),
        entries: values.len(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(24 + json.len() + 16 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for z in &values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_kernel(path: &Path) -> Result<KernelMatrix> {
    let bad = |msg: &str| Error::Cache(format!("{}: {msg}", path.display()));
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..16] != MAGIC {
        return Err(bad("not a kernel cache file"));
    }
    let version = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    let body = 24 + hlen;
    if bytes.len() < body {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[24..body])?;
    if bytes.len() != body + 16 * header.entries {
        return Err(bad("entry count does not match file size"));
    }
    let values: Vec<C64> = bytes[body..]
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    let kind = match header.kind.as_str() {
        "fs" => KernelKind::Fs,
        "confined" => KernelKind::Confined,
        "projected" => KernelKind::Projected,
        other => return Err(bad(&format!("unknown kernel kind {other}"))),
    };
    let prov = Provenance {
        a: header.a,
        n_side: header.n_side,
        dipole: header.dipole,
        d2z: header.d2z,
        z0: header.z0,
        k_cut: header.k_cut,
        w: header.w,
        p_max: header.p_max,
        removed: header.removed,
    };
    match header.storage.as_str() {
        "toeplitz" => KernelMatrix::from_table(kind, prov, values),
        "dense" => {
            let n = header.n_side * header.n_side;
            if values.len() != n * n {
                return Err(bad("dense entry count mismatch"));
            }
            KernelMatrix::from_dense(kind, prov, DMatrix::from_row_slice(n, n, &values))
        }
        other => Err(bad(&format!("unknown storage {other}"))),
    }
}
