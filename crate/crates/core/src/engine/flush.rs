//! Adding a plane through the pending midpoints.

use rand::Rng;

use super::{side_bit, EngineError, FlushEvent, SeparationState};
use crate::geometry::{classify, Hyperplane, PointId, Side};
use crate::solver::{solve_plane_through, solve_through, MidpointMatrix, SolveError, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FlushMode {
    /// Triggered by the counter; rank-deficient midpoints may wait for more pairs.
    Regular,
    /// Input exhausted; always produce a plane.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushOutcome {
    Flushed(usize),
    /// The midpoints are rank deficient and more pairs may still arrive.
    Deferred,
    /// No pending pairs.
    Empty,
}

/// The plane chosen for a flush, with the side of every affected point.
struct Solved {
    report: SolveReport,
    s_bits: Vec<bool>,
    /// Side of each selected pair's first neighbor.
    b_bits: Vec<bool>,
    repairs: u32,
    defining_points: usize,
}

impl SeparationState {
    /// Solves a plane through the pending midpoints and commits it, then
    /// re-inserts the points it releases.
    pub fn flush_plane<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<FlushOutcome, EngineError> {
        let out = self.flush(FlushMode::Final, rng)?;
        self.drain_reinserts(rng)?;
        Ok(out)
    }

    pub(crate) fn flush<R: Rng + ?Sized>(&mut self, mode: FlushMode, rng: &mut R) -> Result<FlushOutcome, EngineError> {
        if self.pending.is_empty() {
            return Ok(FlushOutcome::Empty);
        }
        let n = self.n;
        let k = self.pending.len();
        let tol = self.config.solver_tolerances();
        let rows: Vec<Vec<f64>> = self.pending.iter().map(|p| p.midpoint.clone()).collect();
        let m = MidpointMatrix::new(n, rows.clone()).map_err(|e| self.degenerate(e.to_string(), Vec::new()))?;
        let all = if k == n {
            match solve_plane_through(&m, 1.0, tol) {
                Err(SolveError::RankDeficient { consistent: true, .. }) => solve_through(&m, 1.0, rng, tol),
                other => other,
            }
        } else {
            solve_through(&m, 1.0, rng, tol)
        };
        let from_all = all.is_ok();
        let (selected, defining, initial) = match all {
            Ok(report) => {
                if report.rank < n && mode == FlushMode::Regular && k < self.config.pair_cap_for(n) {
                    return Ok(FlushOutcome::Deferred);
                }
                ((0..k).collect(), rows, Some(report))
            }
            Err(_) => {
                let (sel, def) = self.greedy_subset(rng);
                (sel, def, None)
            }
        };
        if selected.is_empty() {
            let ids = self.pending.iter().map(|p| p.first.id).collect();
            return Err(self.degenerate("no pending midpoint admits a plane".into(), ids));
        }
        let solved = match self.solve_and_repair(&selected, defining, initial, rng) {
            Ok(solved) => solved,
            // every pair at once can force a plane along a line of points
            Err(e) if selected.len() > 1 && from_all => {
                let (sel, def) = self.greedy_subset(rng);
                if sel.is_empty() {
                    return Err(e);
                }
                let solved = self.solve_and_repair(&sel, def, None, rng)?;
                self.commit(sel, solved);
                return Ok(FlushOutcome::Flushed(self.planes.len() - 1));
            }
            Err(e) => return Err(e),
        };
        self.commit(selected, solved);
        Ok(FlushOutcome::Flushed(self.planes.len() - 1))
    }

    fn degenerate(&self, reason: String, ids: Vec<PointId>) -> EngineError {
        EngineError::DegenerateGeometry { plane: self.planes.len(), ids, reason }
    }

    /// Pairs whose defining points can share one plane, taken in order. A
    /// midpoint that conflicts is replaced by other interior points of its
    /// segment before the pair is given up.
    fn greedy_subset<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<Vec<f64>>) {
        let n = self.n;
        let tol = self.config.solver_tolerances();
        let mut selected = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rank = 0;
        for (pi, pair) in self.pending.iter().enumerate() {
            if rank == n {
                break;
            }
            let a = &self.s_points[self.s_index[&pair.anchor]].point.coords;
            let b = &pair.first.coords;
            let mut candidates = vec![pair.midpoint.clone()];
            for _ in 0..4 {
                let t: f64 = rng.random_range(0.25..=0.75);
                candidates.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
            }
            for c in candidates {
                rows.push(c);
                let m = MidpointMatrix::new(n, rows.clone()).expect("finite rows");
                match solve_through(&m, 1.0, rng, tol) {
                    Ok(r) if self.splits_all(&r.coeffs, selected.iter().copied().chain([pi])) => {
                        rank = r.rank;
                        selected.push(pi);
                        break;
                    }
                    _ => {
                        rows.pop();
                    }
                }
            }
        }
        (selected, rows)
    }

    /// Whether the plane `1 + coeffs·x` puts each listed pair's anchor and
    /// first neighbor strictly on opposite sides.
    fn splits_all(&self, coeffs: &[f64], pairs: impl Iterator<Item = usize>) -> bool {
        let plane = Hyperplane::new(self.planes.len(), coeffs.to_vec(), true);
        let rel = self.config.on_plane_rel;
        let side = |x: &[f64]| {
            let (v, mag) = plane.value_and_magnitude(x);
            classify(v, rel * mag, self.config.tau)
        };
        pairs.into_iter().all(|pi| {
            let pair = &self.pending[pi];
            let a = side(&self.s_points[self.s_index[&pair.anchor]].point.coords);
            let b = side(&pair.first.coords);
            a != Side::OnPlane && b != Side::OnPlane && a != b
        })
    }

    /// Solves through `defining`, shifting the defining points along the
    /// normal and re-solving while any point is incident or a selected pair
    /// is not split.
    fn solve_and_repair<R: Rng + ?Sized>(&self, selected: &[usize], defining: Vec<Vec<f64>>, initial: Option<SolveReport>, rng: &mut R) -> Result<Solved, EngineError> {
        let n = self.n;
        let tol = self.config.solver_tolerances();
        let rel = self.config.on_plane_rel;
        let tau = self.config.tau;
        let mut report = initial;
        let mut offenders: Vec<PointId> = Vec::new();
        for attempt in 0..=self.config.max_repair_attempts {
            let rows = if attempt == 0 { defining.clone() } else { shifted(&defining, report.as_ref(), attempt, &offenders, self) };
            let rep = match report.take().filter(|_| attempt == 0) {
                Some(r) => r,
                None => {
                    let m = MidpointMatrix::new(n, rows).map_err(|e| self.degenerate(e.to_string(), Vec::new()))?;
                    match solve_through(&m, 1.0, rng, tol) {
                        Ok(r) => r,
                        Err(e) if attempt == 0 => return Err(self.degenerate(e.to_string(), Vec::new())),
                        Err(_) => continue,
                    }
                }
            };
            let plane = Hyperplane::new(self.planes.len(), rep.coeffs.clone(), true);
            offenders.clear();
            let mut s_bits = Vec::with_capacity(self.s_points.len());
            for s in &self.s_points {
                let (v, mag) = plane.value_and_magnitude(&s.point.coords);
                match classify(v, rel * mag, tau) {
                    Side::OnPlane => {
                        offenders.push(s.point.id);
                        s_bits.push(false);
                    }
                    side => s_bits.push(side_bit(side)),
                }
            }
            for p in self.outstanding() {
                let (v, mag) = plane.value_and_magnitude(&p.coords);
                if classify(v, rel * mag, tau) == Side::OnPlane {
                    offenders.push(p.id);
                }
            }
            let mut b_bits = Vec::with_capacity(selected.len());
            for &pi in selected {
                let pair = &self.pending[pi];
                let (v, mag) = plane.value_and_magnitude(&pair.first.coords);
                let b_side = classify(v, rel * mag, tau);
                let a_bit = s_bits[self.s_index[&pair.anchor]];
                if b_side == Side::OnPlane || side_bit(b_side) == a_bit {
                    offenders.push(pair.first.id);
                    b_bits.push(false);
                } else {
                    b_bits.push(side_bit(b_side));
                }
            }
            if offenders.is_empty() {
                return Ok(Solved { report: rep, s_bits, b_bits, repairs: attempt, defining_points: selected.len() });
            }
            report = Some(rep);
        }
        offenders.sort_unstable();
        offenders.dedup();
        Err(self.degenerate(format!("incidences persist after {} shifts", self.config.max_repair_attempts), offenders))
    }

    fn commit(&mut self, selected: Vec<usize>, solved: Solved) {
        let n = self.n;
        let q_before = self.planes.len();
        let Solved { report, s_bits, b_bits, repairs, defining_points } = solved;
        let saturated = report.rank == n;
        let (rank, residual, residual_scale) = (report.rank, report.residual, report.residual_scale);
        self.planes.push(Hyperplane::new(q_before, report.coeffs, saturated));
        for (s, bit) in self.s_points.iter_mut().zip(s_bits) {
            s.ov.push(bit);
        }
        self.ov_lookup.clear();
        self.ov_lookup.extend(self.s_points.iter().enumerate().map(|(i, s)| (s.ov.clone(), i)));
        assert_eq!(self.ov_lookup.len(), self.s_points.len(), "a new plane cannot merge quadrants");

        let pending = std::mem::take(&mut self.pending);
        self.pair_of_anchor.clear();
        let mut is_selected = vec![None; pending.len()];
        for (j, &pi) in selected.iter().enumerate() {
            is_selected[pi] = Some(b_bits[j]);
        }
        let mut moved = 0;
        let mut synthetic = 0;
        for (pair, sel) in pending.into_iter().zip(is_selected) {
            let rest = pair.second.into_iter().chain(pair.third);
            match sel {
                Some(bit) => {
                    let mut ov = self.s_points[self.s_index[&pair.anchor]].ov.clone();
                    ov.set(q_before, bit);
                    let syn = self.synthetic_pending.remove(&pair.first.id);
                    synthetic += usize::from(syn);
                    self.push_s(pair.first, ov, syn);
                    moved += 1;
                }
                None => self.reinsert.push_back((pair.first, 0)),
            }
            self.reinsert.extend(rest.map(|p| (p, 0)));
        }

        let new_bits = self.total_bits();
        let event = FlushEvent {
            plane: q_before,
            q_before,
            n_prev_stage: self.stage_base,
            k_fresh: self.stage_fresh,
            n_moved: moved,
            old_bits: self.bits_at_last_flush,
            new_bits,
            defining_points,
            rank,
            residual,
            residual_scale,
            repairs,
            synthetic,
        };
        debug_assert_eq!(
            event.new_bits,
            event.old_bits + event.n_prev_stage as u64 + ((event.k_fresh + event.n_moved) * (q_before + 1)) as u64
        );
        self.events.push(event);
        self.stage_base = self.s_points.len();
        self.stage_fresh = 0;
        self.bits_at_last_flush = new_bits;
    }
}

/// Defining points translated along the unit normal of the last plane by
/// `±16 · rel · mag / ‖α‖ · 2^attempt`, where `mag` is the largest band
/// magnitude among the offending points.
fn shifted(defining: &[Vec<f64>], last: Option<&SolveReport>, attempt: u32, offenders: &[PointId], state: &SeparationState) -> Vec<Vec<f64>> {
    let Some(last) = last else { return defining.to_vec() };
    let plane = Hyperplane::new(state.planes.len(), last.coeffs.clone(), true);
    let norm = plane.normal_norm();
    let mut mag = 1.0f64;
    for p in state
        .s_points
        .iter()
        .map(|s| &s.point)
        .chain(state.outstanding())
        .filter(|p| offenders.contains(&p.id))
    {
        mag = mag.max(plane.value_and_magnitude(&p.coords).1);
    }
    let sign = if attempt % 2 == 1 { 1.0 } else { -1.0 };
    let delta = sign * 16.0 * state.config.on_plane_rel * mag / norm * f64::powi(2.0, attempt as i32);
    defining.iter().map(|r| r.iter().zip(&plane.coeffs).map(|(x, a)| x + delta * a / norm).collect()).collect()
}
