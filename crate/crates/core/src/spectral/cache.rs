//! Binary sidecar cache for a spectral basis, keyed by a content hash of
//! the points and the spectral configuration.
//!
//! Layout: 8-byte magic, 32-byte SHA-256 key, N and k as little-endian u64,
//! then little-endian f64 data: eigenvalues, mass, eigenfunctions
//! column-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{SpectralBasis, SpectralConfig};
use crate::error::Result;
use crate::real::{real, Real};

const MAGIC: &[u8; 8] = b"AFTBAS01";

/// Sidecar path: `<cloud file>.basis`.
pub fn sidecar_path(cloud_path: &Path) -> PathBuf {
    let mut os = cloud_path.as_os_str().to_owned();
    os.push(".basis");
    PathBuf::from(os)
}

/// Content hash of (points, config).
pub fn cache_key<T: Real>(points: &[[T; 3]], cfg: &SpectralConfig) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((points.len() as u64).to_le_bytes());
    for p in points {
        for c in p {
            hasher.update(c.to_f64().unwrap().to_le_bytes());
        }
    }
    hasher.update(cfg.cache_tag().as_bytes());
    hasher.finalize().into()
}

pub fn save_basis<T: Real>(path: &Path, key: &[u8; 32], basis: &SpectralBasis<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(key)?;
    let n = basis.len() as u64;
    let k = basis.num_pairs() as u64;
    w.write_u64::<LittleEndian>(n)?;
    w.write_u64::<LittleEndian>(k)?;
    for &l in &basis.eigenvalues {
        w.write_f64::<LittleEndian>(l.to_f64().unwrap())?;
    }
    for &m in &basis.mass {
        w.write_f64::<LittleEndian>(m.to_f64().unwrap())?;
    }
    for col in 0..basis.num_pairs() {
        for row in 0..basis.len() {
            w.write_f64::<LittleEndian>(basis.eigenfunctions[[row, col]].to_f64().unwrap())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a cached basis; `None` when the file is absent, malformed, or keyed
/// by different content.
pub fn load_basis<T: Real>(path: &Path, key: &[u8; 32]) -> Option<SpectralBasis<T>> {
    let mut r = BufReader::new(File::open(path).ok()?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).ok()?;
    if &magic != MAGIC {
        return None;
    }
    let mut stored_key = [0u8; 32];
    r.read_exact(&mut stored_key).ok()?;
    if &stored_key != key {
        return None;
    }
    let n = r.read_u64::<LittleEndian>().ok()? as usize;
    let k = r.read_u64::<LittleEndian>().ok()? as usize;
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        eigenvalues.push(real::<T>(r.read_f64::<LittleEndian>().ok()?));
    }
    let mut mass = Vec::with_capacity(n);
    for _ in 0..n {
        mass.push(real::<T>(r.read_f64::<LittleEndian>().ok()?));
    }
    let mut eigenfunctions = Array2::zeros((n, k));
    for col in 0..k {
        for row in 0..n {
            eigenfunctions[[row, col]] = real::<T>(r.read_f64::<LittleEndian>().ok()?);
        }
    }
    Some(SpectralBasis {
        eigenvalues,
        eigenfunctions,
        mass,
    })
}
