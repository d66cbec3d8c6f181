//! On-disk layout (all little-endian):
//!
//! ```text
//! magic    8 bytes  "GLFBASIS"
//! version  u32      1
//! n        u64      rows (patch vertex count)
//! k        u64      columns (eigenpairs)
//! hash     u64      config_hash(K, m)
//! vectors  n*k f64  row-major
//! values   k f64
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::SpectralBasis;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GLFBASIS";
const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 8 + 8;

/// Identifies the canonical connectivity a basis was computed for.
pub fn config_hash(curves: usize, samples: usize) -> u64 {
    let digest = Sha256::digest(format!("canonical-patch;K={curves};m={samples}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn save_basis(basis: &SpectralBasis, hash: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (n, k) = basis.eigenvectors.shape();
    let mut out = Vec::with_capacity(HEADER + (n * k + k) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.extend_from_slice(&hash.to_le_bytes());
    for i in 0..n {
        for j in 0..k {
            out.extend_from_slice(&basis.eigenvectors[(i, j)].to_le_bytes());
        }
    }
    for v in &basis.eigenvalues {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a basis, refusing one built for a different `(K, m)`.
pub fn load_basis(path: impl AsRef<Path>, expected_hash: u64) -> Result<SpectralBasis> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |at: usize, msg: &str| Error::parse(path.display(), format!("byte {at}"), msg);
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad(0, "not a basis file"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(8, &format!("unsupported version {version}")));
    }
    let n = u64_at(12) as usize;
    let k = u64_at(20) as usize;
    let hash = u64_at(28);
    if hash != expected_hash {
        return Err(Error::Config(format!(
            "basis {} was built for config hash {hash:016x}, expected {expected_hash:016x}",
            path.display()
        )));
    }
    let expected_len = n
        .checked_mul(k)
        .and_then(|nk| nk.checked_add(k))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER))
        .ok_or_else(|| bad(12, "dimensions overflow"))?;
    if bytes.len() != expected_len {
        return Err(bad(bytes.len(), &format!("expected {expected_len} bytes")));
    }
    let mut vals = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let row_major: Vec<f64> = vals.by_ref().take(n * k).collect();
    let eigenvalues: Vec<f64> = vals.collect();
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors: DMatrix::from_row_slice(n, k, &row_major),
    })
}
