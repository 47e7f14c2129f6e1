//! JSON state files.
//!
//! Coordinates and plane coefficients are written with 17 significant digits
//! so that every double reads back exactly; writing a state that was just read
//! reproduces the file byte for byte.
//!
//! Loading checks shapes and ids but not geometry: a state whose stored codes
//! disagree with its coordinates loads fine and fails
//! [`SeparationState::check_invariants`].

use std::collections::{HashMap, HashSet, VecDeque};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::engine::{DustEntry, DustReason, EngineConfig, FlushEvent, Parked, PendingPair, SPoint, SeparationState};
use crate::geometry::{midpoint, Hyperplane, OrientationVector, Point, PointId, TauMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("state file is not valid JSON for this schema: {0}")]
    Json(#[from] serde_json::Error),
    #[error("state schema {0} is not supported (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid state: {0}")]
    Invalid(String),
}

/// A double written as `{:.16e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if !x.is_finite() {
            return Err(D::Error::custom("non-finite number"));
        }
        Ok(Num(x))
    }
}

fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().map(|&x| Num(x)).collect()
}

fn floats(xs: Vec<Num>) -> Vec<f64> {
    xs.into_iter().map(|n| n.0).collect()
}

#[derive(Serialize, Deserialize)]
struct PointRec {
    id: PointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    coords: Vec<Num>,
}

impl From<&Point> for PointRec {
    fn from(p: &Point) -> Self {
        Self { id: p.id, label: p.label.clone(), coords: nums(&p.coords) }
    }
}

impl From<PointRec> for Point {
    fn from(r: PointRec) -> Self {
        Point { id: r.id, coords: floats(r.coords), label: r.label }
    }
}

#[derive(Serialize, Deserialize)]
struct SRec {
    #[serde(flatten)]
    point: PointRec,
    code: String,
    #[serde(default, skip_serializing_if = "is_false")]
    synthetic: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct PairRec {
    anchor: PointId,
    first: PointRec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    second: Option<PointRec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    third: Option<PointRec>,
}

#[derive(Serialize, Deserialize)]
struct ParkedRec {
    #[serde(flatten)]
    point: PointRec,
    retries: u32,
    epoch: u64,
}

#[derive(Serialize, Deserialize)]
struct DustRec {
    #[serde(flatten)]
    point: PointRec,
    reason: String,
}

#[derive(Serialize, Deserialize)]
struct StageRec {
    base: usize,
    fresh: usize,
    bits: u64,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    schema: u32,
    n: usize,
    tau: TauMode,
    seed: u64,
    runs: u64,
    config: EngineConfig,
    planes: Vec<Vec<Num>>,
    saturated: Vec<bool>,
    points: Vec<SRec>,
    pending: Vec<PairRec>,
    parked: Vec<ParkedRec>,
    dustbin: Vec<DustRec>,
    stage: StageRec,
    synthetic_count: u64,
    synthetic_pending: Vec<PointId>,
    events: Vec<FlushEvent>,
}

/// Serializes a state as a single-line JSON document ending in a newline.
pub fn to_json(state: &SeparationState) -> String {
    let mut synthetic_pending: Vec<PointId> = state.synthetic_pending.iter().copied().collect();
    synthetic_pending.sort_unstable();
    let file = StateFile {
        schema: SCHEMA_VERSION,
        n: state.n,
        tau: state.config.tau,
        seed: state.seed,
        runs: state.runs,
        config: state.config,
        planes: state.planes.iter().map(|h| nums(&h.coeffs)).collect(),
        saturated: state.planes.iter().map(|h| h.saturated).collect(),
        points: state.s_points.iter().map(|s| SRec { point: (&s.point).into(), code: s.ov.to_code_string(), synthetic: s.synthetic }).collect(),
        pending: state
            .pending
            .iter()
            .map(|p| PairRec { anchor: p.anchor, first: (&p.first).into(), second: p.second.as_ref().map(Into::into), third: p.third.as_ref().map(Into::into) })
            .collect(),
        parked: state.parked.iter().map(|p| ParkedRec { point: (&p.point).into(), retries: p.retries, epoch: p.epoch }).collect(),
        dustbin: state.dustbin.iter().map(|d| DustRec { point: (&d.point).into(), reason: d.reason.to_string() }).collect(),
        stage: StageRec { base: state.stage_base, fresh: state.stage_fresh, bits: state.bits_at_last_flush },
        synthetic_count: state.synthetic_count,
        synthetic_pending,
        events: state.events.clone(),
    };
    let mut out = serde_json::to_string(&file).expect("state serializes");
    out.push('\n');
    out
}

/// Reads a state written by [`to_json`].
pub fn from_json(text: &str) -> Result<SeparationState, PersistError> {
    #[derive(Deserialize)]
    struct Probe {
        schema: u32,
    }
    let probe: Probe = serde_json::from_str(text)?;
    if probe.schema != SCHEMA_VERSION {
        return Err(PersistError::Schema(probe.schema));
    }
    let f: StateFile = serde_json::from_str(text)?;
    let bad = |msg: String| PersistError::Invalid(msg);
    if f.tau != f.config.tau {
        return Err(bad("tau disagrees with config".into()));
    }
    if f.planes.len() != f.saturated.len() {
        return Err(bad(format!("{} planes but {} saturation flags", f.planes.len(), f.saturated.len())));
    }
    let mut state = SeparationState::new(f.n, f.config, f.seed).map_err(|e| bad(e.to_string()))?;
    let n = f.n;
    let q = f.planes.len();
    for (j, (coeffs, sat)) in f.planes.into_iter().zip(f.saturated).enumerate() {
        let coeffs = floats(coeffs);
        if coeffs.len() != n {
            return Err(bad(format!("plane {j} has {} coefficients, expected {n}", coeffs.len())));
        }
        if coeffs.iter().all(|&a| a == 0.0) {
            return Err(bad(format!("plane {j} has a zero normal")));
        }
        state.planes.push(Hyperplane::new(j, coeffs, sat));
    }

    let mut ids = HashSet::new();
    let mut check = |p: &Point| -> Result<(), PersistError> {
        if p.coords.len() != n {
            return Err(bad(format!("point {} has {} coordinates, expected {n}", p.id, p.coords.len())));
        }
        if !ids.insert(p.id) {
            return Err(bad(format!("point id {} appears twice", p.id)));
        }
        Ok(())
    };

    for (i, r) in f.points.into_iter().enumerate() {
        let p: Point = r.point.into();
        check(&p)?;
        let ov = OrientationVector::from_code_string(&r.code).ok_or_else(|| bad(format!("point {}: bad code {:?}", p.id, r.code)))?;
        if ov.len() != q {
            return Err(bad(format!("point {}: code has {} bits for {q} planes", p.id, ov.len())));
        }
        // tolerated here; check_invariants reports the collision
        state.ov_lookup.entry(ov.clone()).or_insert(i);
        state.s_index.insert(p.id, i);
        state.s_points.push(SPoint { point: p, ov, synthetic: r.synthetic });
    }
    for (pi, r) in f.pending.into_iter().enumerate() {
        let Some(&ai) = state.s_index.get(&r.anchor) else {
            return Err(bad(format!("pending anchor {} is not a separated point", r.anchor)));
        };
        if state.pair_of_anchor.insert(r.anchor, pi).is_some() {
            return Err(bad(format!("anchor {} has two pending pairs", r.anchor)));
        }
        let first: Point = r.first.into();
        let second: Option<Point> = r.second.map(Into::into);
        let third: Option<Point> = r.third.map(Into::into);
        for p in std::iter::once(&first).chain(&second).chain(&third) {
            check(p)?;
        }
        let m = midpoint(&state.s_points[ai].point.coords, &first.coords).map_err(|e| bad(e.to_string()))?;
        state.pending.push(PendingPair { anchor: r.anchor, first, second, third, midpoint: m });
    }
    for r in f.parked {
        let point: Point = r.point.into();
        check(&point)?;
        state.parked.push(Parked { point, retries: r.retries, epoch: r.epoch });
    }
    for r in f.dustbin {
        let point: Point = r.point.into();
        check(&point)?;
        let reason: DustReason = r.reason.parse().map_err(bad)?;
        state.dustbin.push(DustEntry { point, reason });
    }
    for &id in &f.synthetic_pending {
        if !state.pending.iter().any(|p| p.first.id == id) {
            return Err(bad(format!("synthetic point {id} is not pending")));
        }
    }
    state.runs = f.runs;
    state.stage_base = f.stage.base;
    state.stage_fresh = f.stage.fresh;
    state.bits_at_last_flush = f.stage.bits;
    state.synthetic_count = f.synthetic_count;
    state.synthetic_pending = f.synthetic_pending.into_iter().collect();
    state.events = f.events;
    state.known_ids = ids;
    state.reinsert = VecDeque::new();
    state.rebuild_coord_keys();
    Ok(state)
}

/// Stored codes by point id, for callers that only need the table.
pub fn codes(state: &SeparationState) -> HashMap<PointId, String> {
    state.s_points.iter().map(|s| (s.point.id, s.ov.to_code_string())).collect()
}
