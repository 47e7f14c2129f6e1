use std::path::Path;

use hypersep_core::oracle::{audit_bits, quadrant_census, verify_state};
use hypersep_core::Point;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::input::read_state;

/// Oracle separation check, bit ledger, census and stored-code consistency.
/// Pending pairs are reported; only S is checked.
pub fn audit(state_path: &Path) -> Result<()> {
    let state = read_state(state_path)?;
    let sep = verify_state(&state);
    let bits = audit_bits(&state);
    let pts: Vec<&Point> = state.s_points().iter().map(|s| &s.point).collect();
    let census = quadrant_census(&pts, state.planes());
    let max_occupancy = census.values().copied().max().unwrap_or(0);
    let crowded: Vec<&String> = census.iter().filter(|(_, &c)| c > 1).map(|(k, _)| k).collect();
    let invariants = state.check_invariants();

    let mut failures = Vec::new();
    if let Some(v) = &sep.violation {
        failures.push(format!("separation: {v:?}"));
    }
    if let Some(f) = &bits.failure {
        failures.push(format!("bits: {f}"));
    }
    if max_occupancy > 1 {
        failures.push(format!("census: {} codes hold more than one point", crowded.len()));
    }
    if let Err(e) = &invariants {
        failures.push(format!("codes: {e}"));
    }
    let pending = state.pending().len();
    let mut report = json!({
        "ok": failures.is_empty(),
        "n": state.dim(),
        "q": state.q(),
        "points": state.len(),
        "dustbinned": state.dustbin().len(),
        "separation": sep,
        "bits": bits,
        "census": { "codes": census.len(), "max_occupancy": max_occupancy, "crowded": crowded },
        "invariants": invariants.as_ref().map_or_else(|e| e.as_str(), |()| "ok"),
        "pending_pairs": pending,
        "parked": state.parked().len(),
    });
    if pending > 0 || !state.parked().is_empty() {
        report["note"] = json!(format!("state is mid-run: {pending} pending pairs and {} parked points were not checked", state.parked().len()));
    }
    println!("{report}");
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::audit(failures.join("; ")))
    }
}
