//! Incremental separation of points by hyperplanes.
//!
//! Every point gets an orientation vector recording its side of each plane.
//! Planes are added until no two points share a vector; the vectors then
//! serve as exact-match retrieval keys.

pub mod engine;
pub mod geometry;
pub mod index;
pub mod oracle;
pub mod persist;
pub mod sequence;
pub mod solver;

pub use engine::{DustEntry, DustReason, Endgame, EngineConfig, EngineError, FlushEvent, InsertOutcome, PendingPair, RunReport, SPoint, SeparationState};
pub use geometry::{Hyperplane, OrientationVector, Point, PointId, Side, SideRule, TauMode};
