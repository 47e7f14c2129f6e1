//! Driving a batch of points to completion, restarts and dimension lifting.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::flush::FlushMode;
use super::{coord_key, Endgame, EngineError, FlushOutcome, PendingPair, SeparationState};
use crate::geometry::{compute_ov, manhattan_distance, midpoint, Point};

/// What one [`SeparationState::run`] changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunReport {
    pub points_in: usize,
    pub planes_added: usize,
    pub separated_added: usize,
    pub dustbinned_added: usize,
}

impl SeparationState {
    /// The generator [`SeparationState::run`] callers should use next: the
    /// state's seed on a stream numbered by completed runs, so that a
    /// restored state continues reproducibly.
    pub fn next_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.runs);
        rng
    }

    /// Separates `points` together with everything already in the state.
    ///
    /// Points are drawn in a random order. An empty state is first seeded
    /// with planes separating the first `n + 1` distinct points drawn.
    pub fn run<R: Rng + ?Sized>(&mut self, points: Vec<Point>, rng: &mut R) -> Result<RunReport, EngineError> {
        let mut report = RunReport { points_in: points.len(), ..RunReport::default() };
        if points.is_empty() && self.is_finalized() {
            return Ok(report);
        }
        let mut batch_ids = HashSet::with_capacity(points.len());
        for p in &points {
            self.validate_new(p)?;
            if !batch_ids.insert(p.id) {
                return Err(EngineError::DuplicateId(p.id));
            }
        }
        let (q0, n0, d0) = (self.planes.len(), self.s_points.len(), self.dustbin.len());

        let mut order = points;
        order.shuffle(rng);
        // Retries carry their hand-back count; fresh points carry 0.
        self.queue = order.into_iter().map(|p| (p, 0)).collect();
        if self.planes.is_empty() && self.s_points.is_empty() && !self.queue.is_empty() {
            let mut seeds = Vec::with_capacity(self.n + 1);
            let mut keys = HashSet::new();
            while seeds.len() < self.n + 1 {
                let Some((p, _)) = self.queue.pop_front() else { break };
                if keys.insert(coord_key(&p.coords)) {
                    seeds.push(p);
                } else {
                    self.known_ids.insert(p.id);
                    self.dust(p, super::DustReason::Duplicate);
                }
            }
            // Nearly dependent seeds can defeat every trial; the ones left out
            // go back to the queue and are inserted like any other point.
            loop {
                match self.seed_planes(seeds.clone(), rng) {
                    Ok(()) => break,
                    Err(EngineError::BootstrapFailed { .. }) if seeds.len() > 2 => {
                        for p in &seeds {
                            self.known_ids.remove(&p.id);
                            self.coord_keys.remove(&coord_key(&p.coords));
                        }
                        let last = seeds.pop().expect("non-empty");
                        self.queue.push_front((last, 0));
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let mut seen_epoch = self.flush_count();
        while let Some((p, retries)) = self.queue.pop_front() {
            if retries == 0 {
                self.admit(p, 0, rng)?;
            } else {
                self.place(p, retries, rng)?;
            }
            self.drain_reinserts(rng)?;
            if self.flush_count() != seen_epoch {
                seen_epoch = self.flush_count();
                let ready = self.take_ready_parked();
                self.queue.extend(ready);
            }
        }
        self.finalize(rng)?;
        self.runs += 1;

        report.planes_added = self.planes.len() - q0;
        report.separated_added = self.s_points.len() - n0;
        report.dustbinned_added = self.dustbin.len() - d0;
        Ok(report)
    }

    /// Same as [`SeparationState::run`]; existing planes are never touched.
    pub fn append_points<R: Rng + ?Sized>(&mut self, points: Vec<Point>, rng: &mut R) -> Result<RunReport, EngineError> {
        self.run(points, rng)
    }

    fn take_ready_parked(&mut self) -> Vec<(Point, u32)> {
        let epoch = self.flush_count();
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.parked).into_iter().partition(|p| p.epoch < epoch);
        self.parked = waiting;
        ready.into_iter().map(|p| (p.point, p.retries)).collect()
    }

    /// Drains T once no input is left: handed-back points are retried after
    /// each plane, and leftover pairs get an endgame plane.
    pub fn finalize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), EngineError> {
        loop {
            let ready = self.take_ready_parked();
            if !ready.is_empty() {
                // through the queue, so planes made meanwhile avoid the rest
                self.queue.extend(ready);
                while let Some((p, retries)) = self.queue.pop_front() {
                    self.place(p, retries, rng)?;
                    self.drain_reinserts(rng)?;
                }
                continue;
            }
            if self.pending.is_empty() {
                assert!(self.parked.is_empty(), "handed-back points wait only on pending pairs");
                return Ok(());
            }
            if self.config.endgame == Endgame::Synthetic && self.pending.len() < self.n {
                self.add_synthetic_neighbors(self.n - self.pending.len(), rng);
            }
            match self.flush(FlushMode::Final, rng)? {
                FlushOutcome::Flushed(_) => {}
                other => unreachable!("final flush with pending pairs returned {other:?}"),
            }
            self.drain_reinserts(rng)?;
        }
    }

    /// Pairs up to `r` unpaired separated points with fabricated neighbors
    /// strictly inside their quadrants.
    fn add_synthetic_neighbors<R: Rng + ?Sized>(&mut self, r: usize, rng: &mut R) {
        let mut candidates: Vec<usize> = (0..self.s_points.len()).filter(|&i| !self.s_points[i].synthetic && !self.pair_of_anchor.contains_key(&self.s_points[i].point.id)).collect();
        candidates.shuffle(rng);
        let rule = self.config.side_rule();
        let mut made = 0;
        for i in candidates {
            if made == r {
                break;
            }
            let a = self.s_points[i].point.clone();
            let dmin = self
                .planes
                .iter()
                .map(|h| h.value(&a.coords).abs() / h.normal_norm())
                .fold(f64::INFINITY, f64::min);
            let reach = if dmin.is_finite() { 0.5 * dmin } else { 1.0 };
            let u: Vec<f64> = (0..self.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if unorm == 0.0 {
                continue;
            }
            let coords: Vec<f64> = a.coords.iter().zip(&u).map(|(x, d)| x + reach * d / unorm).collect();
            if manhattan_distance(&a.coords, &coords).expect("same dimension") < self.config.delta_th || self.coord_keys.contains(&coord_key(&coords)) {
                continue;
            }
            let mut id = u64::MAX - self.synthetic_count;
            while self.known_ids.contains(&id) {
                id -= 1;
            }
            let p = Point::new(id, coords);
            if compute_ov(&p, &self.planes, rule).ok().as_ref() != Some(&self.s_points[i].ov) {
                continue;
            }
            self.synthetic_count = u64::MAX - id + 1;
            self.known_ids.insert(id);
            self.coord_keys.insert(coord_key(&p.coords));
            self.synthetic_pending.insert(id);
            let m = midpoint(&a.coords, &p.coords).expect("same dimension");
            self.pair_of_anchor.insert(a.id, self.pending.len());
            self.pending.push(PendingPair { anchor: a.id, first: p, second: None, third: None, midpoint: m });
            made += 1;
        }
    }

    /// Embeds the state in `n + r` dimensions: every point and plane gains
    /// `r` zero entries, so every evaluation and orientation vector is
    /// unchanged.
    pub fn lift_dimension(&mut self, r: usize) -> Result<(), EngineError> {
        if r == 0 {
            return Err(EngineError::Usage("lift needs at least one new dimension".into()));
        }
        let pad = |c: &mut Vec<f64>| c.extend(std::iter::repeat(0.0).take(r));
        for h in &mut self.planes {
            h.lift(r);
        }
        for s in &mut self.s_points {
            pad(&mut s.point.coords);
        }
        for pair in &mut self.pending {
            pad(&mut pair.first.coords);
            pad(&mut pair.midpoint);
            for p in pair.second.iter_mut().chain(pair.third.iter_mut()) {
                pad(&mut p.coords);
            }
        }
        for d in &mut self.dustbin {
            pad(&mut d.point.coords);
        }
        for p in &mut self.parked {
            pad(&mut p.point.coords);
        }
        self.n += r;
        self.rebuild_coord_keys();
        Ok(())
    }

    pub(crate) fn rebuild_coord_keys(&mut self) {
        let keys = self
            .s_points
            .iter()
            .map(|s| &s.point)
            .chain(self.t_points())
            .chain(self.parked.iter().map(|p| &p.point))
            .chain(self.dustbin.iter().map(|d| &d.point))
            .map(|p| coord_key(&p.coords))
            .collect();
        self.coord_keys = keys;
    }
}
