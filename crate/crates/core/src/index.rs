//! Exact top-k cosine index keyed by schema id.
//!
//! Vectors live in one contiguous buffer ordered by id, so the layout (and
//! every search result) depends only on the final entry set, never on the
//! order of inserts and removes. Search is a linear scan plus a partial sort
//! with a total order: score descending, then id ascending.

use std::cmp::Ordering;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_unchecked, EmbeddingVector};
use crate::exec::{self, ExecMode};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"RMCP";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("snapshot: bad magic")]
    BadMagic,
    #[error("snapshot: unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("snapshot: id is not valid UTF-8")]
    InvalidId,
    #[error("snapshot: id {0:?} longer than 65535 bytes")]
    IdTooLong(String),
    #[error("snapshot: duplicate id {0:?}")]
    DuplicateId(String),
    #[error("snapshot io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub schema_id: String,
    pub score: f64,
}

/// Total ranking order: higher score first, then lexicographically smaller id.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    ids: Vec<String>,
    data: Vec<f32>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        VectorIndex {
            dimension,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Bulk build; later duplicates of an id replace earlier ones.
    pub fn from_entries<I>(dimension: usize, entries: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (String, EmbeddingVector)>,
    {
        let mut entries: Vec<(String, EmbeddingVector)> = entries.into_iter().collect();
        for (_, v) in &entries {
            if v.dimension() != dimension {
                return Err(IndexError::DimensionMismatch {
                    expected: dimension,
                    actual: v.dimension(),
                });
            }
        }
        // stable sort keeps insertion order among equal ids; keep the last one
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut index = VectorIndex::new(dimension);
        index.ids.reserve(entries.len());
        index.data.reserve(entries.len() * dimension);
        for (i, (id, v)) in entries.iter().enumerate() {
            if entries.get(i + 1).is_some_and(|next| next.0 == *id) {
                continue;
            }
            index.ids.push(id.clone());
            index.data.extend_from_slice(v.values());
        }
        Ok(index)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position(id).is_ok()
    }

    pub fn get(&self, id: &str) -> Option<EmbeddingVector> {
        let i = self.position(id).ok()?;
        Some(EmbeddingVector::from_raw(self.row(i).to_vec()))
    }

    fn position(&self, id: &str) -> Result<usize, usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    fn check_dimension(&self, v: &EmbeddingVector) -> Result<(), IndexError> {
        if v.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                actual: v.dimension(),
            });
        }
        Ok(())
    }

    /// Inserts or replaces the vector for `id`. Returns true when an entry was replaced.
    pub fn add(&mut self, id: impl Into<String>, v: &EmbeddingVector) -> Result<bool, IndexError> {
        self.check_dimension(v)?;
        let id = id.into();
        match self.position(&id) {
            Ok(i) => {
                let d = self.dimension;
                self.data[i * d..(i + 1) * d].copy_from_slice(v.values());
                Ok(true)
            }
            Err(i) => {
                let at = i * self.dimension;
                self.data.splice(at..at, v.values().iter().copied());
                self.ids.insert(i, id);
                Ok(false)
            }
        }
    }

    /// Removes `id` if present; absent ids are a no-op.
    pub fn remove(&mut self, id: &str) -> bool {
        match self.position(id) {
            Ok(i) => {
                self.ids.remove(i);
                let d = self.dimension;
                self.data.drain(i * d..(i + 1) * d);
                true
            }
            Err(_) => false,
        }
    }

    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RankedCandidate>, IndexError> {
        self.search_with(ExecMode::default(), query, k)
    }

    /// Top `min(k, len)` entries by cosine score.
    pub fn search_with(
        &self,
        mode: ExecMode,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<RankedCandidate>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        self.check_dimension(query)?;
        let scores = self.scores_with(mode, query);
        let mut ranked: Vec<(f64, usize)> = scores.into_iter().zip(0..).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| rank_order(a.0, &self.ids[a.1], b.0, &self.ids[b.1]);
        let k = k.min(ranked.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, cmp);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(cmp);
        Ok(ranked
            .into_iter()
            .map(|(score, i)| RankedCandidate {
                schema_id: self.ids[i].clone(),
                score,
            })
            .collect())
    }

    /// Cosine score of every entry, in id order.
    pub fn scores_with(&self, mode: ExecMode, query: &EmbeddingVector) -> Vec<f64> {
        if self.dimension == 0 {
            return vec![0.0; self.len()];
        }
        let rows: Vec<&[f32]> = self.data.chunks_exact(self.dimension).collect();
        exec::map_slice_with(mode, &rows, |row| cosine_unchecked(query.values(), row))
    }

    pub fn score(&self, id: &str, query: &EmbeddingVector) -> Option<f64> {
        let i = self.position(id).ok()?;
        Some(cosine_unchecked(query.values(), self.row(i)))
    }

    /// Binary snapshot: magic `RMCP`, version u32, dimension u32, count u64,
    /// then per entry an u16 id length, the id bytes and `dimension` f32s.
    /// All integers and floats little-endian.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), IndexError> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for (i, id) in self.ids.iter().enumerate() {
            let len = u16::try_from(id.len()).map_err(|_| IndexError::IdTooLong(id.clone()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for v in self.row(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(IndexError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(IndexError::UnsupportedVersion(version));
        }
        let dimension = read_u32(&mut r)? as usize;
        let count = read_u64(&mut r)?;
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut row = vec![0f32; dimension];
        let mut buf4 = [0u8; 4];
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|_| IndexError::InvalidId)?;
            for slot in row.iter_mut() {
                r.read_exact(&mut buf4)?;
                *slot = f32::from_le_bytes(buf4);
            }
            if !seen.insert(id.clone()) {
                return Err(IndexError::DuplicateId(id));
            }
            entries.push((id, EmbeddingVector::from_raw(row.clone())));
        }
        VectorIndex::from_entries(dimension, entries)
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
