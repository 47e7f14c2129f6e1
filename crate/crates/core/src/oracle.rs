//! Brute-force checks that share no evaluation code with the engine.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{FlushEvent, SeparationState};
use crate::geometry::{Hyperplane, Point, PointId, TauMode};

/// Relative incidence band, matching the engine's default.
pub const ORACLE_BAND_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// No plane puts the two points on strictly opposite sides.
    Unseparated { a: PointId, b: PointId },
    /// The point lies on the plane.
    Incident { point: PointId, plane: usize },
    DimensionMismatch { point: PointId },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub ok: bool,
    pub violation: Option<Violation>,
    pub pairs_checked: u64,
    /// For each plane, the number of pairs it is the first to separate.
    pub planes_used_histogram: Vec<u64>,
}

/// `+1`, `-1`, or `0` for on-plane, computed directly from coordinates.
fn sign(point: &[f64], coeffs: &[f64], constant: f64, tau: TauMode) -> i8 {
    let mut sum = constant;
    let mut mag = 1.0 + constant.abs();
    for i in 0..coeffs.len() {
        let t = coeffs[i] * point[i];
        sum += t;
        mag += t.abs();
    }
    let band = ORACLE_BAND_REL * mag;
    if sum > band {
        1
    } else if sum < -band {
        -1
    } else if tau == TauMode::PiRatio {
        1
    } else {
        0
    }
}

/// Signs of `x` against every plane, `0` marking incidence.
pub fn side_signs(x: &[f64], planes: &[Hyperplane], tau: TauMode) -> Option<Vec<i8>> {
    planes.iter().map(|h| (h.coeffs.len() == x.len()).then(|| sign(x, &h.coeffs, h.constant, tau))).collect()
}

/// Sign matrix of `points × planes`, or the first incidence.
fn sign_rows(points: &[&Point], planes: &[Hyperplane], tau: TauMode) -> Result<Vec<Vec<i8>>, Violation> {
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let mut row = Vec::with_capacity(planes.len());
        for (j, h) in planes.iter().enumerate() {
            if p.coords.len() != h.coeffs.len() {
                return Err(Violation::DimensionMismatch { point: p.id });
            }
            let s = sign(&p.coords, &h.coeffs, h.constant, tau);
            if s == 0 {
                return Err(Violation::Incident { point: p.id, plane: j });
            }
            row.push(s);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Checks every pair of `points` for a plane with strictly opposite signs.
pub fn verify_all_separated(points: &[&Point], planes: &[Hyperplane], tau: TauMode) -> SeparationReport {
    let mut hist = vec![0u64; planes.len()];
    let rows = match sign_rows(points, planes, tau) {
        Ok(r) => r,
        Err(v) => return SeparationReport { ok: false, violation: Some(v), pairs_checked: 0, planes_used_histogram: hist },
    };
    let mut checked = 0u64;
    for i in 0..rows.len() {
        for k in i + 1..rows.len() {
            checked += 1;
            match (0..planes.len()).find(|&j| rows[i][j] != rows[k][j]) {
                Some(j) => hist[j] += 1,
                None => {
                    return SeparationReport {
                        ok: false,
                        violation: Some(Violation::Unseparated { a: points[i].id, b: points[k].id }),
                        pairs_checked: checked,
                        planes_used_histogram: hist,
                    }
                }
            }
        }
    }
    SeparationReport { ok: true, violation: None, pairs_checked: checked, planes_used_histogram: hist }
}

/// Same verdict as [`verify_all_separated`] in `O(N log N · q)`: the sign
/// rows are sorted and only neighbors compared, since two rows without an
/// opposite sign are equal. `pairs_checked` counts those comparisons and the
/// histogram is left empty.
pub fn verify_sorted(points: &[&Point], planes: &[Hyperplane], tau: TauMode) -> SeparationReport {
    let rows = match sign_rows(points, planes, tau) {
        Ok(r) => r,
        Err(v) => return SeparationReport { ok: false, violation: Some(v), pairs_checked: 0, planes_used_histogram: Vec::new() },
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &k| rows[i].cmp(&rows[k]));
    let mut checked = 0u64;
    for w in order.windows(2) {
        checked += 1;
        if rows[w[0]] == rows[w[1]] {
            let (a, b) = (points[w[0]].id.min(points[w[1]].id), points[w[0]].id.max(points[w[1]].id));
            return SeparationReport { ok: false, violation: Some(Violation::Unseparated { a, b }), pairs_checked: checked, planes_used_histogram: Vec::new() };
        }
    }
    SeparationReport { ok: true, violation: None, pairs_checked: checked, planes_used_histogram: Vec::new() }
}

/// [`verify_all_separated`] over the separated points of a state.
pub fn verify_state(state: &SeparationState) -> SeparationReport {
    let pts: Vec<&Point> = state.s_points().iter().map(|s| &s.point).collect();
    verify_all_separated(&pts, state.planes(), state.config().tau)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitLedger {
    pub ok: bool,
    pub stored_bits: u64,
    pub expected_bits: u64,
    pub flushes_checked: usize,
    /// Description of the first imbalance.
    pub failure: Option<String>,
}

/// Checks a single flush: `new == old + N_old + (k + n_moved)(q + 1)`.
pub fn check_flush(e: &FlushEvent) -> Result<(), String> {
    let q1 = e.q_before as u64 + 1;
    let rhs = e.old_bits + e.n_prev_stage as u64 + (e.k_fresh + e.n_moved) as u64 * q1;
    if e.new_bits != rhs {
        return Err(format!("plane {}: {} bits after flush, ledger expects {rhs}", e.plane, e.new_bits));
    }
    if e.old_bits != e.n_prev_stage as u64 * e.q_before as u64 {
        return Err(format!("plane {}: {} bits before the stage, expected {}·{}", e.plane, e.old_bits, e.n_prev_stage, e.q_before));
    }
    Ok(())
}

/// Stored bits against `|S|·q`, and every recorded flush replayed through
/// the ledger identity.
pub fn audit_bits(state: &SeparationState) -> BitLedger {
    let stored: u64 = state.s_points().iter().map(|s| s.ov.len() as u64).sum();
    let expected = state.s_points().len() as u64 * state.planes().len() as u64;
    let mut failure = (stored != expected).then(|| format!("{stored} stored bits, expected {expected}"));
    let events = state.events();
    for (i, e) in events.iter().enumerate() {
        if failure.is_some() {
            break;
        }
        if let Err(msg) = check_flush(e) {
            failure = Some(msg);
        } else if i > 0 && events[i - 1].new_bits != e.old_bits {
            failure = Some(format!("plane {}: stage starts at {} bits, previous flush ended at {}", e.plane, e.old_bits, events[i - 1].new_bits));
        }
    }
    BitLedger { ok: failure.is_none(), stored_bits: stored, expected_bits: expected, flushes_checked: events.len(), failure }
}

/// Occupancy of each quadrant code (plane 0 first). Points on a plane count
/// on the `0` side.
pub fn quadrant_census(points: &[&Point], planes: &[Hyperplane]) -> BTreeMap<String, usize> {
    let mut census = BTreeMap::new();
    for p in points {
        let code: String = planes
            .iter()
            .map(|h| {
                let z = h.constant + h.coeffs.iter().zip(&p.coords).map(|(a, x)| a * x).sum::<f64>();
                if z > 0.0 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect();
        *census.entry(code).or_insert(0) += 1;
    }
    census
}
