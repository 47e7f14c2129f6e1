use serde::{Deserialize, Serialize};

use crate::geometry::{SideRule, TauMode, DEFAULT_ON_PLANE_REL};
use crate::solver::SolverTolerances;

/// How pending pairs are drained once the input is exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endgame {
    /// One plane through the remaining midpoints, free coefficients random.
    #[default]
    Step7,
    /// Fabricate neighbors of unpaired points until `n` pairs exist, then
    /// flush normally.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Minimum Manhattan distance between a candidate and its quadrant-mates.
    pub delta_th: f64,
    pub on_plane_rel: f64,
    pub residual_tol: f64,
    pub rank_tol: f64,
    pub tau: TauMode,
    pub endgame: Endgame,
    /// Pairs admitted while the midpoints stay rank deficient. `None` is `2n`.
    pub pair_cap: Option<usize>,
    /// Times a point may be handed back from a full quadrant before it is
    /// dust-binned.
    pub max_retries: u32,
    pub max_repair_attempts: u32,
    pub bootstrap_trials: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            delta_th: 1e-6,
            on_plane_rel: DEFAULT_ON_PLANE_REL,
            residual_tol: 1e-8,
            rank_tol: 1e-10,
            tau: TauMode::Off,
            endgame: Endgame::Step7,
            pair_cap: None,
            max_retries: 8,
            max_repair_attempts: 8,
            bootstrap_trials: 64,
        }
    }
}

impl EngineConfig {
    pub fn side_rule(&self) -> SideRule {
        SideRule { on_plane_rel: self.on_plane_rel, tau: self.tau }
    }

    pub fn solver_tolerances(&self) -> SolverTolerances {
        SolverTolerances { rank_rel: self.rank_tol, residual_rel: self.residual_tol }
    }

    pub fn pair_cap_for(&self, n: usize) -> usize {
        self.pair_cap.unwrap_or(2 * n).max(n)
    }

    /// Checks that every tolerance is positive and finite.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("delta_th", self.delta_th),
            ("on_plane_rel", self.on_plane_rel),
            ("residual_tol", self.residual_tol),
            ("rank_tol", self.rank_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.pair_cap == Some(0) {
            return Err("pair_cap must be positive".into());
        }
        if self.bootstrap_trials == 0 {
            return Err("bootstrap_trials must be positive".into());
        }
        Ok(())
    }
}
