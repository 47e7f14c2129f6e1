//! Initial planes for an empty state.
//!
//! The first half of the trials builds each plane from a linear solve: point
//! `i` is assigned the binary code `i`, and plane `j` is the affine function
//! taking a random value of the sign given by bit `j` at every point. For up to
//! `n + 1` affinely independent points this always succeeds. The remaining
//! trials fall back to random normals through the data's centroid region,
//! adding up to three extra planes.

use rand::Rng;

use super::{coord_key, EngineConfig, EngineError, SeparationState};
use crate::geometry::{compute_ov, Hyperplane, OrientationVector, Point};
use crate::solver::{solve_linear, MidpointMatrix};

/// `max(⌈log₂(n + 1)⌉, 2)`.
pub fn initial_plane_count(n: usize) -> usize {
    ceil_log2(n as u64 + 1).max(2)
}

fn ceil_log2(x: u64) -> usize {
    x.next_power_of_two().trailing_zeros() as usize
}

impl SeparationState {
    /// A state whose S is exactly `points`, separated by freshly drawn planes.
    pub fn bootstrap<R: Rng + ?Sized>(n: usize, points: Vec<Point>, config: EngineConfig, seed: u64, rng: &mut R) -> Result<Self, EngineError> {
        let mut state = Self::new(n, config, seed)?;
        state.seed_planes(points, rng)?;
        Ok(state)
    }

    /// A state whose S is `points`, separated by the given planes `1 + α·x = 0`.
    pub fn bootstrap_with_planes(n: usize, planes: Vec<Vec<f64>>, points: Vec<Point>, config: EngineConfig, seed: u64) -> Result<Self, EngineError> {
        let mut state = Self::new(n, config, seed)?;
        for (j, a) in planes.iter().enumerate() {
            if a.len() != n || a.iter().all(|&x| x == 0.0) || a.iter().any(|x| !x.is_finite()) {
                return Err(EngineError::Usage(format!("plane {j} must have {n} finite coefficients, not all zero")));
            }
        }
        let planes: Vec<Hyperplane> = planes.into_iter().enumerate().map(|(j, a)| Hyperplane::new(j, a, true)).collect();
        state.register(&points)?;
        let ovs = separate_with(&points, &planes, &state.config).ok_or(EngineError::BootstrapFailed { trials: 0, points: points.len() })?;
        state.install(points, planes, ovs);
        Ok(state)
    }

    /// Registers ids and coordinates of the seed points.
    fn register(&mut self, points: &[Point]) -> Result<(), EngineError> {
        for p in points {
            self.validate_new(p)?;
            self.known_ids.insert(p.id);
            if !self.coord_keys.insert(coord_key(&p.coords)) {
                return Err(EngineError::BootstrapFailed { trials: 0, points: points.len() });
            }
        }
        Ok(())
    }

    pub(crate) fn seed_planes<R: Rng + ?Sized>(&mut self, points: Vec<Point>, rng: &mut R) -> Result<(), EngineError> {
        assert!(self.planes.is_empty() && self.s_points.is_empty(), "bootstrap needs an empty state");
        self.register(&points)?;
        let n = self.n;
        let q_min = initial_plane_count(n).max(ceil_log2(points.len() as u64));
        let trials = self.config.bootstrap_trials;
        let constructive = trials.div_ceil(2);
        for t in 0..trials {
            let planes = if t < constructive {
                coded_planes(&points, n, q_min, rng)
            } else {
                let extra = ((t - constructive) / 8).min(3) as usize;
                random_planes(&points, n, q_min + extra, rng)
            };
            let Some(planes) = planes else { continue };
            let rule = self.config.side_rule();
            if self.queue.iter().any(|(p, _)| compute_ov(p, &planes, rule).is_err()) {
                continue;
            }
            if let Some(ovs) = separate_with(&points, &planes, &self.config) {
                self.install(points, planes, ovs);
                return Ok(());
            }
        }
        Err(EngineError::BootstrapFailed { trials, points: points.len() })
    }

    fn install(&mut self, points: Vec<Point>, planes: Vec<Hyperplane>, ovs: Vec<OrientationVector>) {
        self.planes = planes;
        for (p, ov) in points.into_iter().zip(ovs) {
            self.push_s(p, ov, false);
        }
        self.stage_base = self.s_points.len();
        self.stage_fresh = 0;
        self.bits_at_last_flush = self.total_bits();
    }
}

/// Orientation vectors of `points` if none is incident and all are distinct.
fn separate_with(points: &[Point], planes: &[Hyperplane], config: &EngineConfig) -> Option<Vec<OrientationVector>> {
    let mut seen = std::collections::HashSet::with_capacity(points.len());
    let mut ovs = Vec::with_capacity(points.len());
    for p in points {
        let ov = compute_ov(p, planes, config.side_rule()).ok()?;
        if !seen.insert(ov.clone()) {
            return None;
        }
        ovs.push(ov);
    }
    Some(ovs)
}

/// Plane `j` solves `c + α·p_i = ±u_ij` with the sign from bit `j` of `i` and
/// `u_ij` uniform in `[0.5, 1.5]`, then is rescaled to constant one.
fn coded_planes<R: Rng + ?Sized>(points: &[Point], n: usize, q: usize, rng: &mut R) -> Option<Vec<Hyperplane>> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| std::iter::once(1.0).chain(p.coords.iter().copied()).collect()).collect();
    let m = MidpointMatrix::new(n + 1, rows).ok()?;
    let scale = points.iter().flat_map(|p| &p.coords).fold(1.0f64, |s, x| s.max(x.abs()));
    let mut planes = Vec::with_capacity(q);
    for j in 0..q {
        let rhs: Vec<f64> = (0..points.len())
            .map(|i| {
                let u: f64 = rng.random_range(0.5..=1.5);
                if i >> j & 1 == 1 {
                    u
                } else {
                    -u
                }
            })
            .collect();
        let sol = solve_linear(&m, &rhs, rng, Default::default()).ok()?;
        let c = sol.coeffs[0];
        let alpha = &sol.coeffs[1..];
        // a plane through (or nearly through) the origin has no constant-one form
        if c.abs() <= 1e-6 * alpha.iter().map(|a| a.abs()).sum::<f64>() * scale {
            return None;
        }
        let coeffs: Vec<f64> = alpha.iter().map(|a| a / c).collect();
        if coeffs.iter().all(|&a| a == 0.0) {
            return None;
        }
        planes.push(Hyperplane::new(j, coeffs, true));
    }
    Some(planes)
}

/// Planes with uniformly random normals through random points of the box
/// `centroid ± spread/2`.
fn random_planes<R: Rng + ?Sized>(points: &[Point], n: usize, q: usize, rng: &mut R) -> Option<Vec<Hyperplane>> {
    let count = points.len().max(1) as f64;
    let mut centroid = vec![0.0; n];
    for p in points {
        for (c, x) in centroid.iter_mut().zip(&p.coords) {
            *c += x / count;
        }
    }
    let mut spread = points.iter().flat_map(|p| p.coords.iter().zip(&centroid).map(|(x, c)| (x - c).abs())).fold(0.0f64, f64::max);
    if spread == 0.0 {
        spread = 1.0 + centroid.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    }
    let mut planes = Vec::with_capacity(q);
    for j in 0..q {
        let mut found = None;
        for _ in 0..32 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if unorm < 0.1 {
                continue;
            }
            let through: Vec<f64> = centroid.iter().map(|c| c + spread * rng.random_range(-0.5..=0.5)).collect();
            let d: f64 = u.iter().zip(&through).map(|(a, x)| a * x).sum();
            let tnorm = through.iter().map(|x| x * x).sum::<f64>().sqrt();
            if d.abs() <= 1e-9 * unorm * tnorm || d == 0.0 {
                continue;
            }
            found = Some(u.iter().map(|a| -a / d).collect());
            break;
        }
        planes.push(Hyperplane::new(j, found?, true));
    }
    Some(planes)
}
