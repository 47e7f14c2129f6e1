//! The incremental separation state machine.
//!
//! Points are drawn one at a time. A point whose orientation vector is not yet
//! held by any separated point joins S. A point that shares the vector of some
//! `a` in S waits in T as a neighbor of `a`; the first neighbor `b` of each
//! anchor contributes the midpoint of `ab`. Once `n` such midpoints exist a new
//! plane is solved through them, which splits every pair at once, and the
//! first neighbors move into S.

mod bootstrap;
mod config;
mod flush;
mod run;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compute_ov, manhattan_distance, midpoint, GeometryError, Hyperplane, OrientationVector, Point, PointId, Side};

pub use config::{Endgame, EngineConfig};
pub use bootstrap::initial_plane_count;
pub use flush::FlushOutcome;
pub use run::RunReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("point {id}: expected {expected} coordinates, found {found}")]
    DimensionMismatch { id: PointId, expected: usize, found: usize },
    #[error("point id {0} is already in use")]
    DuplicateId(PointId),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(PointId),
    #[error("{0}")]
    Usage(String),
    #[error("bootstrap failed after {trials} trials over {points} points")]
    BootstrapFailed { trials: u32, points: usize },
    #[error("degenerate geometry while solving plane {plane}: {reason} (points {ids:?})")]
    DegenerateGeometry { plane: usize, ids: Vec<PointId>, reason: String },
}

/// Why a point was set aside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DustReason {
    /// Same coordinates as a point already seen.
    Duplicate,
    /// Within `delta_th` of a quadrant-mate.
    TooClose { neighbor: PointId },
    /// Handed back from a full quadrant too many times.
    OverCrowded,
    /// Lies on an existing plane.
    Incident { plane: usize },
}

impl fmt::Display for DustReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DustReason::Duplicate => f.write_str("duplicate"),
            DustReason::TooClose { neighbor } => write!(f, "within delta_th of point {neighbor}"),
            DustReason::OverCrowded => f.write_str("over-crowded quadrant"),
            DustReason::Incident { plane } => write!(f, "incident on plane {plane}"),
        }
    }
}

impl FromStr for DustReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "duplicate" => return Ok(DustReason::Duplicate),
            "over-crowded quadrant" => return Ok(DustReason::OverCrowded),
            _ => {}
        }
        if let Some(id) = s.strip_prefix("within delta_th of point ") {
            return id.parse().map(|neighbor| DustReason::TooClose { neighbor }).map_err(|_| format!("bad point id in reason {s:?}"));
        }
        if let Some(j) = s.strip_prefix("incident on plane ") {
            return j.parse().map(|plane| DustReason::Incident { plane }).map_err(|_| format!("bad plane index in reason {s:?}"));
        }
        Err(format!("unknown dust-bin reason {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DustEntry {
    pub point: Point,
    pub reason: DustReason,
}

/// A separated point and its orientation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SPoint {
    pub point: Point,
    pub ov: OrientationVector,
    /// Fabricated by the synthetic endgame.
    pub synthetic: bool,
}

/// An anchor in S with up to three quadrant-mates waiting in T.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingPair {
    pub anchor: PointId,
    pub first: Point,
    pub second: Option<Point>,
    pub third: Option<Point>,
    /// Midpoint of the anchor and `first`.
    pub midpoint: Vec<f64>,
}

impl PendingPair {
    pub fn members(&self) -> impl Iterator<Item = &Point> {
        std::iter::once(&self.first).chain(self.second.as_ref()).chain(self.third.as_ref())
    }
}

/// A point handed back from a full quadrant, waiting for the next plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Parked {
    pub point: Point,
    /// Times the point has been handed back.
    pub retries: u32,
    /// Flush count when it was handed back; it is retried only after a later flush.
    pub epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    PlacedInS,
    PairedFirst { anchor: PointId },
    PairedSecond { anchor: PointId },
    PairedThird { anchor: PointId },
    DustBinned,
    ReturnedToG,
    TriggeredFlush { plane: usize },
}

/// Bookkeeping for one added plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlushEvent {
    pub plane: usize,
    pub q_before: usize,
    /// `|S|` right after the previous flush (or bootstrap).
    pub n_prev_stage: usize,
    /// Points placed directly in S since then.
    pub k_fresh: usize,
    /// First neighbors moved from T into S by this flush.
    pub n_moved: usize,
    pub old_bits: u64,
    pub new_bits: u64,
    /// Number of points the plane was solved through.
    pub defining_points: usize,
    pub rank: usize,
    pub residual: f64,
    pub residual_scale: f64,
    /// Shift-and-resolve rounds spent clearing incidences.
    pub repairs: u32,
    pub synthetic: usize,
}

#[derive(Debug, Clone)]
pub struct SeparationState {
    pub(crate) n: usize,
    pub(crate) planes: Vec<Hyperplane>,
    pub(crate) s_points: Vec<SPoint>,
    pub(crate) s_index: HashMap<PointId, usize>,
    pub(crate) ov_lookup: HashMap<OrientationVector, usize>,
    pub(crate) pending: Vec<PendingPair>,
    pub(crate) pair_of_anchor: HashMap<PointId, usize>,
    pub(crate) dustbin: Vec<DustEntry>,
    pub(crate) parked: Vec<Parked>,
    pub(crate) events: Vec<FlushEvent>,
    pub(crate) config: EngineConfig,
    pub(crate) seed: u64,
    /// Completed `run` calls; selects the random stream of the next one.
    pub(crate) runs: u64,
    pub(crate) stage_base: usize,
    pub(crate) stage_fresh: usize,
    pub(crate) bits_at_last_flush: u64,
    pub(crate) synthetic_count: u64,
    /// Synthetic points not yet separated.
    pub(crate) synthetic_pending: HashSet<PointId>,
    pub(crate) known_ids: HashSet<PointId>,
    pub(crate) coord_keys: HashSet<Box<[u64]>>,
    pub(crate) reinsert: VecDeque<(Point, u32)>,
    /// Input of the current run not yet drawn; planes must avoid it too.
    pub(crate) queue: VecDeque<(Point, u32)>,
}

pub(crate) fn coord_key(coords: &[f64]) -> Box<[u64]> {
    coords.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }).collect()
}

impl SeparationState {
    /// An empty state in `n` dimensions with no planes.
    pub fn new(n: usize, config: EngineConfig, seed: u64) -> Result<Self, EngineError> {
        if n == 0 {
            return Err(EngineError::Usage("dimension must be positive".into()));
        }
        config.validate().map_err(EngineError::Usage)?;
        Ok(Self {
            n,
            planes: Vec::new(),
            s_points: Vec::new(),
            s_index: HashMap::new(),
            ov_lookup: HashMap::new(),
            pending: Vec::new(),
            pair_of_anchor: HashMap::new(),
            dustbin: Vec::new(),
            parked: Vec::new(),
            events: Vec::new(),
            config,
            seed,
            runs: 0,
            stage_base: 0,
            stage_fresh: 0,
            bits_at_last_flush: 0,
            synthetic_count: 0,
            synthetic_pending: HashSet::new(),
            known_ids: HashSet::new(),
            coord_keys: HashSet::new(),
            reinsert: VecDeque::new(),
            queue: VecDeque::new(),
        })
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

    pub fn s_points(&self) -> &[SPoint] {
        &self.s_points
    }

    /// `|S|`.
    pub fn len(&self) -> usize {
        self.s_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_points.is_empty()
    }

    pub fn s_point(&self, id: PointId) -> Option<&SPoint> {
        self.s_index.get(&id).map(|&i| &self.s_points[i])
    }

    /// The separated point holding `ov`, if any.
    pub fn holder_of(&self, ov: &OrientationVector) -> Option<&SPoint> {
        self.ov_lookup.get(ov).map(|&i| &self.s_points[i])
    }

    pub fn pending(&self) -> &[PendingPair] {
        &self.pending
    }

    /// Pending pairs with a first neighbor, which is every pending pair.
    pub fn counter(&self) -> usize {
        self.pending.len()
    }

    pub fn t_points(&self) -> impl Iterator<Item = &Point> {
        self.pending.iter().flat_map(PendingPair::members)
    }

    /// Every point of the current run not yet in S or the dust-bin. A new
    /// plane must miss all of them.
    pub(crate) fn outstanding(&self) -> impl Iterator<Item = &Point> {
        self.t_points()
            .chain(self.parked.iter().map(|p| &p.point))
            .chain(self.reinsert.iter().map(|(p, _)| p))
            .chain(self.queue.iter().map(|(p, _)| p))
    }

    pub fn dustbin(&self) -> &[DustEntry] {
        &self.dustbin
    }

    pub fn parked(&self) -> &[Parked] {
        &self.parked
    }

    pub fn events(&self) -> &[FlushEvent] {
        &self.events
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn flush_count(&self) -> u64 {
        self.events.len() as u64
    }

    /// Points placed directly in S since the last flush.
    pub fn stage_fresh(&self) -> usize {
        self.stage_fresh
    }

    /// Stored orientation bits summed over S.
    pub fn total_bits(&self) -> u64 {
        self.s_points.iter().map(|s| s.ov.len() as u64).sum()
    }

    pub fn synthetic_count(&self) -> usize {
        self.s_points.iter().filter(|s| s.synthetic).count()
    }

    /// No pending pairs and no handed-back points.
    pub fn is_finalized(&self) -> bool {
        self.pending.is_empty() && self.parked.is_empty()
    }

    fn validate_new(&self, p: &Point) -> Result<(), EngineError> {
        if p.dim() != self.n {
            return Err(EngineError::DimensionMismatch { id: p.id, expected: self.n, found: p.dim() });
        }
        if p.coords.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFinite(p.id));
        }
        if self.known_ids.contains(&p.id) {
            return Err(EngineError::DuplicateId(p.id));
        }
        Ok(())
    }

    /// Inserts one new point, performing any flush it triggers.
    pub fn insert_point<R: Rng + ?Sized>(&mut self, p: Point, rng: &mut R) -> Result<InsertOutcome, EngineError> {
        self.validate_new(&p)?;
        let outcome = self.admit(p, 0, rng)?;
        self.drain_reinserts(rng)?;
        Ok(outcome)
    }

    /// First contact with a point: registers its id and screens duplicates.
    pub(crate) fn admit<R: Rng + ?Sized>(&mut self, p: Point, retries: u32, rng: &mut R) -> Result<InsertOutcome, EngineError> {
        self.known_ids.insert(p.id);
        if !self.coord_keys.insert(coord_key(&p.coords)) {
            self.dust(p, DustReason::Duplicate);
            return Ok(InsertOutcome::DustBinned);
        }
        self.place(p, retries, rng)
    }

    pub(crate) fn dust(&mut self, point: Point, reason: DustReason) {
        self.dustbin.push(DustEntry { point, reason });
    }

    pub(crate) fn push_s(&mut self, point: Point, ov: OrientationVector, synthetic: bool) {
        let i = self.s_points.len();
        let fresh = self.ov_lookup.insert(ov.clone(), i).is_none();
        assert!(fresh, "orientation vector of point {} already held", point.id);
        self.s_index.insert(point.id, i);
        self.s_points.push(SPoint { point, ov, synthetic });
    }

    /// Routes a point already registered with the state.
    pub(crate) fn place<R: Rng + ?Sized>(&mut self, p: Point, retries: u32, rng: &mut R) -> Result<InsertOutcome, EngineError> {
        let ov = match compute_ov(&p, &self.planes, self.config.side_rule()) {
            Ok(ov) => ov,
            Err(GeometryError::Incident { plane, .. }) => {
                self.dust(p, DustReason::Incident { plane });
                return Ok(InsertOutcome::DustBinned);
            }
            Err(e) => return Err(EngineError::Usage(e.to_string())),
        };
        let Some(&holder) = self.ov_lookup.get(&ov) else {
            let synthetic = self.synthetic_pending.remove(&p.id);
            self.push_s(p, ov, synthetic);
            self.stage_fresh += 1;
            return Ok(InsertOutcome::PlacedInS);
        };
        let anchor = &self.s_points[holder].point;
        let anchor_id = anchor.id;
        let delta_th = self.config.delta_th;
        let Some(&pi) = self.pair_of_anchor.get(&anchor_id) else {
            let d = manhattan_distance(&p.coords, &anchor.coords).expect("dimensions checked");
            if d < delta_th {
                self.dust(p, DustReason::TooClose { neighbor: anchor_id });
                return Ok(InsertOutcome::DustBinned);
            }
            let m = midpoint(&anchor.coords, &p.coords).expect("dimensions checked");
            self.pair_of_anchor.insert(anchor_id, self.pending.len());
            self.pending.push(PendingPair { anchor: anchor_id, first: p, second: None, third: None, midpoint: m });
            if self.pending.len() >= self.n {
                if let FlushOutcome::Flushed(plane) = self.flush(flush::FlushMode::Regular, rng)? {
                    return Ok(InsertOutcome::TriggeredFlush { plane });
                }
            }
            return Ok(InsertOutcome::PairedFirst { anchor: anchor_id });
        };
        let pair = &self.pending[pi];
        let (nearest, d) = std::iter::once(anchor)
            .chain(pair.members())
            .map(|q| (q.id, manhattan_distance(&p.coords, &q.coords).expect("dimensions checked")))
            .fold((anchor_id, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        if d < delta_th {
            self.dust(p, DustReason::TooClose { neighbor: nearest });
            return Ok(InsertOutcome::DustBinned);
        }
        let pair = &mut self.pending[pi];
        if pair.second.is_none() {
            pair.second = Some(p);
            Ok(InsertOutcome::PairedSecond { anchor: anchor_id })
        } else if pair.third.is_none() {
            pair.third = Some(p);
            Ok(InsertOutcome::PairedThird { anchor: anchor_id })
        } else if retries >= self.config.max_retries {
            self.dust(p, DustReason::OverCrowded);
            Ok(InsertOutcome::DustBinned)
        } else {
            let epoch = self.flush_count();
            self.parked.push(Parked { point: p, retries: retries + 1, epoch });
            Ok(InsertOutcome::ReturnedToG)
        }
    }

    /// Re-inserts points released by flushes until none are left.
    pub(crate) fn drain_reinserts<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), EngineError> {
        while let Some((p, retries)) = self.reinsert.pop_front() {
            self.place(p, retries, rng)?;
        }
        Ok(())
    }

    /// Full consistency check by recomputation; returns the first problem found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let q = self.planes.len();
        let rule = self.config.side_rule();
        if self.ov_lookup.len() != self.s_points.len() {
            return Err(format!("{} distinct vectors for {} separated points", self.ov_lookup.len(), self.s_points.len()));
        }
        for (i, s) in self.s_points.iter().enumerate() {
            if s.ov.len() != q {
                return Err(format!("point {} has {} bits for {q} planes", s.point.id, s.ov.len()));
            }
            if self.ov_lookup.get(&s.ov) != Some(&i) || self.s_index.get(&s.point.id) != Some(&i) {
                return Err(format!("lookup tables disagree at point {}", s.point.id));
            }
            let ov = compute_ov(&s.point, &self.planes, rule).map_err(|e| e.to_string())?;
            if ov != s.ov {
                return Err(format!("stored vector of point {} differs from recomputation", s.point.id));
            }
        }
        for (pi, pair) in self.pending.iter().enumerate() {
            let Some(a) = self.s_point(pair.anchor) else {
                return Err(format!("anchor {} is not separated", pair.anchor));
            };
            if self.pair_of_anchor.get(&pair.anchor) != Some(&pi) {
                return Err(format!("anchor {} has two pairs", pair.anchor));
            }
            if pair.second.is_none() && pair.third.is_some() {
                return Err(format!("anchor {} has a third neighbor without a second", pair.anchor));
            }
            for m in pair.members() {
                if self.s_index.contains_key(&m.id) {
                    return Err(format!("pending point {} is also separated", m.id));
                }
                let ov = compute_ov(m, &self.planes, rule).map_err(|e| e.to_string())?;
                if ov != a.ov {
                    return Err(format!("pending point {} is not in the quadrant of anchor {}", m.id, pair.anchor));
                }
            }
        }
        if self.pair_of_anchor.len() != self.pending.len() {
            return Err("pair table out of step with pending pairs".into());
        }
        Ok(())
    }
}

pub(crate) fn side_bit(side: Side) -> bool {
    match side {
        Side::Positive => true,
        Side::Negative => false,
        Side::OnPlane => unreachable!("incidences are repaired before bits are assigned"),
    }
}
