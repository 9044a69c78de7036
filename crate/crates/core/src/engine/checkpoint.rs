//! Binary snapshots of a sweep taken at column boundaries.
//!
//! Layout (little-endian): magic, format version, width, max width, column,
//! configuration hash, moduli, entries sorted by key, harvested lengths, and
//! a SHA-256 trailer over everything before it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{EntryMap, RectangleResult, SweepConfig};
use crate::modular::{Modulus, TruncatedPoly};
use crate::signature::{unpack, PackedSignature};

const MAGIC: &[u8; 8] = b"SAPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint was written for a different run ({0})")]
    Mismatch(String),
}

/// Everything needed to resume a width's sweep after `column`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSnapshot {
    pub width: usize,
    pub max_width: usize,
    pub column: usize,
    pub config_hash: u64,
    pub moduli: Vec<u64>,
    pub entries: Vec<(PackedSignature, TruncatedPoly)>,
    pub harvested: BTreeMap<usize, TruncatedPoly>,
}

impl SweepSnapshot {
    pub(crate) fn capture(
        config: &SweepConfig,
        config_hash: u64,
        column: usize,
        entries: &EntryMap,
        result: &RectangleResult,
    ) -> Self {
        let mut list: Vec<_> = entries.iter().map(|(k, p)| (*k, p.clone())).collect();
        list.sort_by_key(|(k, _)| *k);
        SweepSnapshot {
            width: config.width,
            max_width: config.max_width,
            column,
            config_hash,
            moduli: config.moduli.as_slice().iter().map(|m| m.get()).collect(),
            entries: list,
            harvested: result.per_length.clone(),
        }
    }

    pub fn check_matches(&self, config: &SweepConfig, config_hash: u64) -> Result<(), CheckpointError> {
        let moduli: Vec<u64> = config.moduli.as_slice().iter().map(|m| m.get()).collect();
        let mismatch = if self.width != config.width {
            Some(format!("width {} vs {}", self.width, config.width))
        } else if self.max_width != config.max_width {
            Some(format!("max width {} vs {}", self.max_width, config.max_width))
        } else if self.moduli != moduli {
            Some("moduli differ".to_string())
        } else if self.config_hash != config_hash {
            Some("configuration hash differs".to_string())
        } else if self.column > config.max_length {
            Some(format!(
                "column {} beyond length {}",
                self.column, config.max_length
            ))
        } else {
            None
        };
        match mismatch {
            Some(m) => Err(CheckpointError::Mismatch(m)),
            None => Ok(()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in [
            self.width as u64,
            self.max_width as u64,
            self.column as u64,
            self.config_hash,
        ] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.moduli.len() as u32).to_le_bytes());
        for m in &self.moduli {
            b.extend_from_slice(&m.to_le_bytes());
        }
        b.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (k, p) in &self.entries {
            b.extend_from_slice(&k.0.to_le_bytes());
            write_poly(&mut b, p);
        }
        b.extend_from_slice(&(self.harvested.len() as u64).to_le_bytes());
        for (len, p) in &self.harvested {
            b.extend_from_slice(&(*len as u64).to_le_bytes());
            write_poly(&mut b, p);
        }
        let digest = Sha256::digest(&b);
        b.extend_from_slice(&digest);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(CheckpointError::Truncated);
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        let mut r = Reader {
            buf: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        if Sha256::digest(body).as_slice() != trailer {
            // a short file fails here too; distinguish by re-parsing below
            return Err(match parse_body(&mut r) {
                Err(CheckpointError::Truncated) => CheckpointError::Truncated,
                _ => CheckpointError::Checksum,
            });
        }
        let snap = parse_body(&mut r)?;
        if r.pos != body.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(snap)
    }
}

fn parse_body(r: &mut Reader<'_>) -> Result<SweepSnapshot, CheckpointError> {
    let width = r.u64()? as usize;
    let max_width = r.u64()? as usize;
    let column = r.u64()? as usize;
    let config_hash = r.u64()?;
    let n_moduli = r.u32()? as usize;
    if n_moduli == 0 || n_moduli > 8 {
        return Err(CheckpointError::Corrupt(format!("{n_moduli} moduli")));
    }
    let mut moduli = Vec::with_capacity(n_moduli);
    for _ in 0..n_moduli {
        let m = r.u64()?;
        Modulus::new(m).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        moduli.push(m);
    }
    let n_entries = r.u64()? as usize;
    let mut entries = Vec::with_capacity(n_entries.min(1 << 20));
    let mut previous = None;
    for _ in 0..n_entries {
        let key = PackedSignature(r.u64()?);
        unpack(key, width + 1).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if previous.is_some_and(|p| p >= key) {
            return Err(CheckpointError::Corrupt("entries not sorted".into()));
        }
        previous = Some(key);
        entries.push((key, read_poly(r, &moduli)?));
    }
    let n_harvested = r.u64()? as usize;
    let mut harvested = BTreeMap::new();
    for _ in 0..n_harvested {
        let len = r.u64()? as usize;
        harvested.insert(len, read_poly(r, &moduli)?);
    }
    Ok(SweepSnapshot {
        width,
        max_width,
        column,
        config_hash,
        moduli,
        entries,
        harvested,
    })
}

fn write_poly(b: &mut Vec<u8>, p: &TruncatedPoly) {
    b.extend_from_slice(&p.min_degree().unwrap_or(0).to_le_bytes());
    b.extend_from_slice(&(p.raw().len() as u64).to_le_bytes());
    for c in p.raw() {
        b.extend_from_slice(&c.to_le_bytes());
    }
}

fn read_poly(r: &mut Reader<'_>, moduli: &[u64]) -> Result<TruncatedPoly, CheckpointError> {
    let min_degree = r.u32()?;
    let n = r.u64()? as usize;
    if !n.is_multiple_of(moduli.len()) || n > r.remaining() / 8 {
        return Err(CheckpointError::Truncated);
    }
    let mut coeffs = Vec::with_capacity(n);
    for i in 0..n {
        let c = r.u64()?;
        if c >= moduli[i % moduli.len()] {
            return Err(CheckpointError::Corrupt(format!("unreduced residue {c}")));
        }
        coeffs.push(c);
    }
    if coeffs.is_empty() {
        return Ok(TruncatedPoly::zero(moduli.len()));
    }
    Ok(TruncatedPoly::from_dense(min_degree, moduli.len(), coeffs))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let end = self.pos.checked_add(N).ok_or(CheckpointError::Truncated)?;
        let slice = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(slice.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

/// Writes atomically: a temporary sibling is renamed over `path`.
pub fn checkpoint_save(snapshot: &SweepSnapshot, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&snapshot.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

pub fn checkpoint_load(path: &Path) -> Result<SweepSnapshot, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SweepSnapshot::from_bytes(&bytes)
}
