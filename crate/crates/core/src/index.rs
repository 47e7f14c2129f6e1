//! Storage and retrieval keyed by quadrant code.
//!
//! A quadrant code is the orientation vector binarized with the unit step
//! `Usf(z) = 1` for `z > 0`, else `0`. Records are stored under the code of
//! their point and a probe retrieves every record sharing its code. Coding a
//! probe costs `q·n` multiplications and `q·n` additions.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::engine::SeparationState;
use crate::geometry::{Hyperplane, OpCount, OrientationVector, PointId};

const MAGIC: &[u8; 4] = b"HSIX";
const FORMAT_VERSION: u32 = 1;

/// Unit step: `1` iff `z > 0`.
#[inline]
pub fn usf(z: f64) -> bool {
    z > 0.0
}

/// Binary code of a point against a plane list, plane 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuadrantCode(OrientationVector);

impl QuadrantCode {
    /// The code of an orientation vector: positive sides become `1`.
    pub fn from_ov(ov: &OrientationVector) -> Self {
        Self(ov.clone())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, j: usize) -> bool {
        self.0.is_positive(j)
    }

    /// Packed words, plane 0 in the least significant bit of word 0.
    pub fn words(&self) -> &[u64] {
        self.0.words()
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Option<Self> {
        OrientationVector::from_words(words, len).map(Self)
    }

    fn sort_key(&self) -> impl Ord + '_ {
        (self.0.len(), self.0.words())
    }
}

impl fmt::Display for QuadrantCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_code_string())
    }
}

impl FromStr for QuadrantCode {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OrientationVector::from_code_string(s).map(Self).ok_or_else(|| IndexError::Format(format!("bad quadrant code {s:?}")))
    }
}

/// `Usf` of every plane value at `x`. Boundary values map to `0`.
pub fn code_of(x: &[f64], planes: &[Hyperplane]) -> QuadrantCode {
    let mut ops = OpCount::default();
    code_of_counted(x, planes, &mut ops)
}

/// [`code_of`] with its arithmetic tallied in `ops`.
pub fn code_of_counted(x: &[f64], planes: &[Hyperplane], ops: &mut OpCount) -> QuadrantCode {
    let mut ov = OrientationVector::new();
    for h in planes {
        ov.push(usf(h.value_counted(x, ops)));
    }
    QuadrantCode(ov)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub point_id: PointId,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Inserted,
    /// A record with the same code and point id was overwritten.
    Replaced,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("probe has {found} coordinates, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("code has {found} bits, index has {expected} planes")]
    CodeLength { expected: usize, found: usize },
    #[error("state still has pending pairs or handed-back points")]
    NotFinalized,
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Exact-match repository of records keyed by quadrant code.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantIndex {
    n: usize,
    planes: Vec<Hyperplane>,
    buckets: HashMap<QuadrantCode, Vec<Record>>,
    len: usize,
}

impl QuadrantIndex {
    /// An empty index over a snapshot of `planes` in `n` dimensions.
    pub fn new(n: usize, planes: Vec<Hyperplane>) -> Self {
        Self { n, planes, buckets: HashMap::new(), len: 0 }
    }

    /// One record per separated point of a finished state, with payloads from
    /// `payload`. Synthetic points are skipped.
    pub fn build(state: &SeparationState, mut payload: impl FnMut(PointId) -> Vec<u8>) -> Result<Self, IndexError> {
        if !state.is_finalized() {
            return Err(IndexError::NotFinalized);
        }
        let mut index = Self::new(state.dim(), state.planes().to_vec());
        for s in state.s_points().iter().filter(|s| !s.synthetic) {
            let code = QuadrantCode::from_ov(&s.ov);
            index.store(code, Record { point_id: s.point.id, payload: payload(s.point.id) })?;
        }
        Ok(index)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn planes(&self) -> &[Hyperplane] {
        &self.planes
    }

    pub fn q(&self) -> usize {
        self.planes.len()
    }

    /// Number of stored records.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of occupied codes.
    pub fn occupied(&self) -> usize {
        self.buckets.len()
    }

    pub fn store(&mut self, code: QuadrantCode, record: Record) -> Result<StoreOutcome, IndexError> {
        if code.len() != self.q() {
            return Err(IndexError::CodeLength { expected: self.q(), found: code.len() });
        }
        let bucket = self.buckets.entry(code).or_default();
        if let Some(old) = bucket.iter_mut().find(|r| r.point_id == record.point_id) {
            *old = record;
            return Ok(StoreOutcome::Replaced);
        }
        bucket.push(record);
        self.len += 1;
        Ok(StoreOutcome::Inserted)
    }

    /// Stores `record` under the code of `x`.
    pub fn store_point(&mut self, x: &[f64], record: Record) -> Result<StoreOutcome, IndexError> {
        self.check_dim(x)?;
        self.store(code_of(x, &self.planes), record)
    }

    pub fn code(&self, x: &[f64]) -> Result<QuadrantCode, IndexError> {
        self.check_dim(x)?;
        Ok(code_of(x, &self.planes))
    }

    /// Records in the probe's quadrant; empty when it is unoccupied.
    pub fn query(&self, x: &[f64]) -> Result<&[Record], IndexError> {
        let mut ops = OpCount::default();
        self.query_counted(x, &mut ops).map(|(_, r)| r)
    }

    /// [`QuadrantIndex::query`] returning the probe's code and tallying the
    /// arithmetic spent coding it.
    pub fn query_counted(&self, x: &[f64], ops: &mut OpCount) -> Result<(QuadrantCode, &[Record]), IndexError> {
        self.check_dim(x)?;
        let code = code_of_counted(x, &self.planes, ops);
        let records = self.get(&code);
        Ok((code, records))
    }

    pub fn get(&self, code: &QuadrantCode) -> &[Record] {
        self.buckets.get(code).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every (code, record) pair, ordered by code then point id.
    pub fn entries(&self) -> Vec<(&QuadrantCode, &Record)> {
        let mut all: Vec<_> = self.buckets.iter().flat_map(|(c, rs)| rs.iter().map(move |r| (c, r))).collect();
        all.sort_by(|a, b| a.0.sort_key().cmp(&b.0.sort_key()).then(a.1.point_id.cmp(&b.1.point_id)));
        all
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), IndexError> {
        if x.len() != self.n {
            return Err(IndexError::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(())
    }

    /// Writes the index as a flat little-endian file.
    ///
    /// Layout: magic `HSIX`, version, `n`, `q`, each plane as its constant
    /// followed by `n` coefficients, the record count, the table sorted by
    /// code then point id (code words, point id, payload offset, payload
    /// length), and finally the payload blob.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        put_u64(&mut w, self.n as u64)?;
        put_u64(&mut w, self.q() as u64)?;
        for h in &self.planes {
            w.write_all(&h.constant.to_le_bytes())?;
            w.write_all(&[u8::from(h.saturated)])?;
            for a in &h.coeffs {
                w.write_all(&a.to_le_bytes())?;
            }
        }
        let entries = self.entries();
        put_u64(&mut w, entries.len() as u64)?;
        let mut offset = 0u64;
        for (code, r) in &entries {
            for word in code.words() {
                put_u64(&mut w, *word)?;
            }
            put_u64(&mut w, r.point_id)?;
            put_u64(&mut w, offset)?;
            put_u64(&mut w, r.payload.len() as u64)?;
            offset += r.payload.len() as u64;
        }
        put_u64(&mut w, offset)?;
        for (_, r) in &entries {
            w.write_all(&r.payload)?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexError::Format("not an index file".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported version {version}")));
        }
        let n = get_len(&mut r)?;
        let q = get_len(&mut r)?;
        let mut planes = Vec::with_capacity(q.min(1 << 16));
        for j in 0..q {
            let constant = get_f64(&mut r)?;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let coeffs = (0..n).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>, _>>()?;
            if coeffs.iter().all(|&a| a == 0.0) {
                return Err(IndexError::Format(format!("plane {j} has a zero normal")));
            }
            planes.push(Hyperplane { constant, coeffs, index: j, saturated: flag[0] != 0 });
        }
        let count = get_len(&mut r)?;
        let words = q.div_ceil(64);
        let mut table = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let code_words = (0..words).map(|_| get_u64(&mut r)).collect::<Result<Vec<_>, _>>()?;
            let code = QuadrantCode::from_words(code_words, q).ok_or_else(|| IndexError::Format("code has bits past its length".into()))?;
            let (id, offset, len) = (get_u64(&mut r)?, get_u64(&mut r)?, get_u64(&mut r)?);
            table.push((code, id, offset, len));
        }
        let blob_len = get_len(&mut r)?;
        let mut blob = Vec::new();
        r.take(blob_len as u64).read_to_end(&mut blob)?;
        if blob.len() != blob_len {
            return Err(IndexError::Format("payload blob is truncated".into()));
        }
        let mut index = Self::new(n, planes);
        for (code, point_id, offset, len) in table {
            let end = offset.checked_add(len).filter(|&e| e <= blob_len as u64).ok_or_else(|| IndexError::Format(format!("payload of point {point_id} is out of range")))?;
            let payload = blob[offset as usize..end as usize].to_vec();
            if index.store(code, Record { point_id, payload })? == StoreOutcome::Replaced {
                return Err(IndexError::Format(format!("point {point_id} is stored twice under one code")));
            }
        }
        Ok(index)
    }
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_len<R: Read>(r: &mut R) -> Result<usize, IndexError> {
    usize::try_from(get_u64(r)?).map_err(|_| IndexError::Format("length overflows".into()))
}

fn get_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    get_u64(r).map(f64::from_bits)
}
