//! Versioned binary cache for killed-walk tables, keyed by a model hash.
//!
//! Layout (little endian): magic `LDRCACHE`, format version (u32), model
//! hash (32 bytes), `n_max`, `j_max`, `stored_cols` (u64 each),
//! `leaked_total` (f64), then the `survival`, `pmf`, `killed` and `leaked`
//! columns (`n_max + 1` values each), then `b` row by row
//! (`stored_cols + 1` values per row), and finally a SHA-256 of everything
//! before it.

use std::fs;
use std::path::{Path, PathBuf};

use ladder_core::lattice::KilledWalkTable;
use ladder_core::ModelSpec;
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"LDRCACHE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CacheError {
    #[error("not a table cache file")]
    BadMagic,
    #[error("cache format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("cache belongs to a different model")]
    ModelMismatch,
    #[error("cache file is truncated or corrupt")]
    Corrupt,
}

/// SHA-256 of the model's canonical JSON form.
pub fn model_hash(spec: &ModelSpec) -> [u8; 32] {
    let json = serde_json::to_string(spec).expect("model serializes");
    Sha256::digest(json.as_bytes()).into()
}

pub fn encode(hash: &[u8; 32], t: &KilledWalkTable<f64>) -> Vec<u8> {
    let n_max = t.survival.len() - 1;
    let mut out =
        Vec::with_capacity(96 + 8 * (4 * (n_max + 1) + (n_max + 1) * (t.stored_cols + 1)));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(hash);
    for v in [n_max, t.j_max, t.stored_cols] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&t.leaked_total.to_le_bytes());
    for col in [&t.survival, &t.pmf, &t.killed, &t.leaked] {
        for v in col.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for row in &t.b {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CacheError> {
        let end = self.pos.checked_add(n).ok_or(CacheError::Corrupt)?;
        let s = self.buf.get(self.pos..end).ok_or(CacheError::Corrupt)?;
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<usize, CacheError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| CacheError::Corrupt)
    }
    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn column(&mut self, len: usize) -> Result<Vec<f64>, CacheError> {
        (0..len).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8], expected: &[u8; 32]) -> Result<KilledWalkTable<f64>, CacheError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    if bytes.len() < 12 + 32 + 32 {
        return Err(CacheError::Corrupt);
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if found != FORMAT_VERSION {
        return Err(CacheError::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CacheError::Corrupt);
    }
    if &body[12..44] != expected {
        return Err(CacheError::ModelMismatch);
    }
    let mut r = Reader { buf: body, pos: 44 };
    let n_max = r.u64()?;
    let j_max = r.u64()?;
    let stored_cols = r.u64()?;
    let leaked_total = r.f64()?;
    let rows = n_max.checked_add(1).ok_or(CacheError::Corrupt)?;
    let cells = rows.checked_mul(stored_cols.checked_add(1).ok_or(CacheError::Corrupt)?);
    if cells.is_none_or(|c| {
        c.saturating_add(4 * rows).saturating_mul(8) != body.len() - r.pos
    }) {
        return Err(CacheError::Corrupt);
    }
    let survival = r.column(rows)?;
    let pmf = r.column(rows)?;
    let killed = r.column(rows)?;
    let leaked = r.column(rows)?;
    let b = (0..rows)
        .map(|_| r.column(stored_cols + 1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KilledWalkTable {
        j_max,
        stored_cols,
        b,
        survival,
        pmf,
        killed,
        leaked,
        leaked_total,
    })
}

/// Directory of cached tables, one file per model and shape.
pub struct TableCache {
    dir: PathBuf,
}

impl TableCache {
    pub fn new(dir: &Path) -> Self {
        TableCache {
            dir: dir.to_path_buf(),
        }
    }

    fn path(&self, hash: &[u8; 32], n_max: usize, j_max: usize, stored_cols: usize) -> PathBuf {
        self.dir.join(format!(
            "{}-n{n_max}-j{j_max}-c{stored_cols}.bin",
            hex::encode(hash)
        ))
    }

    /// A cached table, if present and valid.
    pub fn load(
        &self,
        spec: &ModelSpec,
        n_max: usize,
        j_max: usize,
        stored_cols: usize,
    ) -> Option<KilledWalkTable<f64>> {
        let hash = model_hash(spec);
        let bytes = fs::read(self.path(&hash, n_max, j_max, stored_cols)).ok()?;
        decode(&bytes, &hash).ok()
    }

    pub fn store(&self, spec: &ModelSpec, t: &KilledWalkTable<f64>) -> std::io::Result<PathBuf> {
        let hash = model_hash(spec);
        fs::create_dir_all(&self.dir)?;
        let path = self.path(&hash, t.survival.len() - 1, t.j_max, t.stored_cols);
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        fs::write(&tmp, encode(&hash, t))?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ladder_core::lattice::killed_walk;
    use ladder_core::IncrementModel;

    #[test]
    fn round_trip_and_guards() {
        let model = IncrementModel::lazy_walk();
        let t = killed_walk(&model, 30, None, Some(5)).unwrap();
        let hash = model_hash(model.spec());
        let bytes = encode(&hash, &t);
        assert_eq!(decode(&bytes, &hash).unwrap(), t);

        let other = model_hash(IncrementModel::simple_walk().spec());
        assert_eq!(decode(&bytes, &other), Err(CacheError::ModelMismatch));

        let mut bumped = bytes.clone();
        bumped[8] = 9;
        assert!(matches!(
            decode(&bumped, &hash),
            Err(CacheError::Version { found: 9, .. })
        ));

        let mut flipped = bytes.clone();
        flipped[100] ^= 1;
        assert_eq!(decode(&flipped, &hash), Err(CacheError::Corrupt));
        assert_eq!(
            decode(&bytes[..bytes.len() - 1], &hash),
            Err(CacheError::Corrupt)
        );
        assert_eq!(decode(b"nope", &hash), Err(CacheError::BadMagic));
    }
}
