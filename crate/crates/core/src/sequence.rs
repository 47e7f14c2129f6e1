//! World lines: a sequence `c(1)..c(s)` becomes the chain of points
//! `(c(1), 0, ..., 0)`, `(c(1), c(2), 0, ..., 0)`, ... in `horizon · m`
//! dimensions, where `m` is the size of one observation block.
//!
//! Historical sequences are stored in a [`QuadrantIndex`] under each of their
//! prefix points. A live prefix of length `s` is coded the same way, and every
//! history owning a prefix point in its quadrant is returned along with the
//! values it took after step `s`.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineConfig, EngineError, SeparationState};
use crate::geometry::{Point, PointId};
use crate::index::{IndexError, QuadrantIndex};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("prefix length {k} is outside 1..={len}")]
    PrefixOutOfRange { k: usize, len: usize },
    #[error("sequence {id}: {len} values do not form whole blocks of {block}")]
    RaggedBlocks { id: PointId, len: usize, block: usize },
    #[error("sequence {id}: {steps} steps exceed the horizon {horizon}")]
    TooLong { id: PointId, steps: usize, horizon: usize },
    #[error("sequence {0} is empty")]
    Empty(PointId),
    #[error("sequence {0} has a non-finite value")]
    NonFinite(PointId),
    #[error("block size and horizon must be positive")]
    Shape,
    #[error("history id {0} appears twice")]
    DuplicateHistory(PointId),
    #[error("stored payload is not a history list: {0}")]
    Payload(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// An observed sequence of `steps` blocks of `block` scalars each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLine {
    pub id: PointId,
    /// Observations in order, blocks concatenated.
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub block: usize,
    pub horizon: usize,
}

fn one() -> usize {
    1
}

impl WorldLine {
    /// A scalar sequence.
    pub fn new(id: PointId, values: Vec<f64>, horizon: usize) -> Result<Self, SequenceError> {
        Self::with_blocks(id, values, 1, horizon)
    }

    pub fn with_blocks(id: PointId, values: Vec<f64>, block: usize, horizon: usize) -> Result<Self, SequenceError> {
        let w = Self { id, values, block, horizon };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.block == 0 || self.horizon == 0 {
            return Err(SequenceError::Shape);
        }
        if self.values.is_empty() {
            return Err(SequenceError::Empty(self.id));
        }
        if self.values.len() % self.block != 0 {
            return Err(SequenceError::RaggedBlocks { id: self.id, len: self.values.len(), block: self.block });
        }
        if self.steps() > self.horizon {
            return Err(SequenceError::TooLong { id: self.id, steps: self.steps(), horizon: self.horizon });
        }
        if self.values.iter().any(|x| !x.is_finite()) {
            return Err(SequenceError::NonFinite(self.id));
        }
        Ok(())
    }

    /// Number of observed blocks `s`.
    pub fn steps(&self) -> usize {
        self.values.len() / self.block
    }

    /// Dimension of the encoded points.
    pub fn dim(&self) -> usize {
        self.horizon * self.block
    }
}

/// The first `k` blocks followed by zeros, as a point with the given id.
pub fn encode_prefix(seq: &WorldLine, k: usize, id: PointId) -> Result<Point, SequenceError> {
    if k == 0 || k > seq.steps() {
        return Err(SequenceError::PrefixOutOfRange { k, len: seq.steps() });
    }
    let mut coords = vec![0.0; seq.dim()];
    let used = k * seq.block;
    coords[..used].copy_from_slice(&seq.values[..used]);
    Ok(Point::new(id, coords))
}

/// Every prefix of `seq`, `k = 1..=s`, with ids `first_id + k - 1`.
pub fn encode_all(seq: &WorldLine, first_id: PointId) -> Vec<Point> {
    (1..=seq.steps()).map(|k| encode_prefix(seq, k, first_id + (k - 1) as PointId).expect("k in range")).collect()
}

/// Histories that own a prefix point, stored as the record payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixOwner {
    pub history: PointId,
    /// Length of the owned prefix.
    pub k: usize,
}

/// A stored history matched by a live prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Continuation {
    pub history: PointId,
    /// Prefix length of the matched stored point.
    pub matched_k: usize,
    /// The whole stored sequence, blocks concatenated.
    pub sequence: Vec<f64>,
    /// Values after the live prefix; empty when the history is no longer.
    pub tail: Vec<f64>,
}

/// A quadrant index over the prefix points of a set of histories.
#[derive(Debug, Clone)]
pub struct SequenceIndex {
    pub index: QuadrantIndex,
    pub state: SeparationState,
    histories: HashMap<PointId, WorldLine>,
    block: usize,
    horizon: usize,
}

impl SequenceIndex {
    /// Separates the prefix points of `histories` and indexes them.
    ///
    /// Histories sharing a prefix share its point: the stored payload lists
    /// every owner. Point ids are assigned in input order.
    pub fn build<R: Rng + ?Sized>(histories: Vec<WorldLine>, config: EngineConfig, seed: u64, rng: &mut R) -> Result<Self, SequenceError> {
        let Some(first) = histories.first() else {
            return Err(SequenceError::Shape);
        };
        let (block, horizon) = (first.block, first.horizon);
        let mut owners: Vec<Vec<PrefixOwner>> = Vec::new();
        let mut points: Vec<Point> = Vec::new();
        let mut by_coords: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut seen = HashMap::new();
        for h in &histories {
            h.validate()?;
            if h.block != block || h.horizon != horizon {
                return Err(SequenceError::Shape);
            }
            if seen.insert(h.id, ()).is_some() {
                return Err(SequenceError::DuplicateHistory(h.id));
            }
            for k in 1..=h.steps() {
                let p = encode_prefix(h, k, points.len() as PointId)?;
                let key: Vec<u64> = p.coords.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }).collect();
                let slot = *by_coords.entry(key).or_insert_with(|| {
                    points.push(p);
                    owners.push(Vec::new());
                    owners.len() - 1
                });
                owners[slot].push(PrefixOwner { history: h.id, k });
            }
        }
        let mut state = SeparationState::new(block * horizon, config, seed)?;
        state.run(points, rng)?;
        let index = QuadrantIndex::build(&state, |id| serde_json::to_vec(&owners[id as usize]).expect("serializable"))?;
        let histories = histories.into_iter().map(|h| (h.id, h)).collect();
        Ok(Self { index, state, histories, block, horizon })
    }

    pub fn history(&self, id: PointId) -> Option<&WorldLine> {
        self.histories.get(&id)
    }

    /// Stored histories whose prefix points share the quadrant of the live
    /// prefix of length `s`, ordered by history id.
    pub fn predict(&self, live: &WorldLine, s: usize) -> Result<Vec<Continuation>, SequenceError> {
        predict_continuation(&self.index, live, s, |id| self.histories.get(&id).cloned())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block(&self) -> usize {
        self.block
    }
}

/// Queries `index` with the live prefix of length `s` and expands each
/// matched record through `lookup` into its full history and tail.
pub fn predict_continuation(index: &QuadrantIndex, live: &WorldLine, s: usize, mut lookup: impl FnMut(PointId) -> Option<WorldLine>) -> Result<Vec<Continuation>, SequenceError> {
    let probe = encode_prefix(live, s, 0)?;
    let mut found: BTreeSet<(PointId, usize)> = BTreeSet::new();
    for rec in index.query(&probe.coords)? {
        let owners: Vec<PrefixOwner> = serde_json::from_slice(&rec.payload).map_err(|e| SequenceError::Payload(e.to_string()))?;
        found.extend(owners.into_iter().map(|o| (o.history, o.k)));
    }
    let mut out: Vec<Continuation> = Vec::new();
    for (history, matched_k) in found {
        if out.last().is_some_and(|c| c.history == history) {
            continue;
        }
        let Some(h) = lookup(history) else {
            return Err(SequenceError::Payload(format!("history {history} is not available")));
        };
        let from = (s * h.block).min(h.values.len());
        out.push(Continuation { history, matched_k, tail: h.values[from..].to_vec(), sequence: h.values });
    }
    Ok(out)
}
