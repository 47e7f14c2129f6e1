use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hypersep_core::oracle::verify_state;
use hypersep_core::persist;
use hypersep_core::{DustReason, EngineConfig, SeparationState};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::input::{parse_points_or_empty, read_points, read_state, read_text, write_text};

fn reason_key(r: &DustReason) -> &'static str {
    match r {
        DustReason::Duplicate => "duplicate",
        DustReason::TooClose { .. } => "too-close",
        DustReason::OverCrowded => "over-crowded",
        DustReason::Incident { .. } => "incident",
    }
}

fn dust_counts(state: &SeparationState) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for d in state.dustbin() {
        *counts.entry(reason_key(&d.reason)).or_insert(0) += 1;
    }
    counts
}

/// Writes the state, then fails with an audit error if the oracle disagrees.
fn save_checked(state: &SeparationState, out: &Path) -> Result<&'static str> {
    write_text(out, &persist::to_json(state))?;
    let rep = verify_state(state);
    if !rep.ok {
        return Err(CliError::audit(format!("oracle rejects the written state: {:?}", rep.violation)));
    }
    Ok("ok")
}

pub fn separate(points: &Path, seed: u64, config: EngineConfig, out: &Path) -> Result<()> {
    let (n, pts) = read_points(points)?;
    let t = Instant::now();
    let mut state = SeparationState::new(n, config, seed)?;
    let mut rng = state.next_rng();
    state.run(pts, &mut rng)?;
    let runtime = t.elapsed();
    let separation = save_checked(&state, out)?;
    let summary = json!({
        "n": n,
        "n_f": state.len(),
        "q_f": state.q(),
        "dustbinned": state.dustbin().len(),
        "dust": dust_counts(&state),
        "separation": separation,
        "runtime_ms": runtime.as_secs_f64() * 1e3,
    });
    println!("{summary}");
    Ok(())
}

pub fn append(state_path: &Path, points: &Path, out: &Path) -> Result<()> {
    let mut state = read_state(state_path)?;
    let parsed = parse_points_or_empty(&read_text(points)?).map_err(|e| e.context(points.display()))?;
    let pts = match parsed {
        Some((n, pts)) if !pts.is_empty() => {
            if n != state.dim() {
                let hint = if n > state.dim() { format!("; run `hypersep lift {} {}` first", state_path.display(), n - state.dim()) } else { String::new() };
                return Err(CliError::data(format!("points have {n} coordinates but the state has {}{hint}", state.dim())));
            }
            pts
        }
        _ => Vec::new(),
    };
    let (q0, n0, d0) = (state.q(), state.len(), state.dustbin().len());
    let mut rng = state.next_rng();
    state.append_points(pts, &mut rng)?;
    let separation = save_checked(&state, out)?;
    let summary = json!({
        "delta_q": state.q() - q0,
        "delta_n": state.len() - n0,
        "dustbinned_added": state.dustbin().len() - d0,
        "n_f": state.len(),
        "q_f": state.q(),
        "separation": separation,
    });
    println!("{summary}");
    Ok(())
}

pub fn lift(state_path: &Path, r: usize, out: &Path) -> Result<()> {
    if r == 0 {
        return Err(CliError::usage("lift needs r >= 1"));
    }
    let mut state = read_state(state_path)?;
    let before = persist::codes(&state);
    let old_n = state.dim();
    state.lift_dimension(r)?;
    let unchanged = persist::codes(&state) == before;
    write_text(out, &persist::to_json(&state))?;
    println!("{}", json!({ "old_n": old_n, "new_n": state.dim(), "codes_unchanged": unchanged }));
    if !unchanged {
        return Err(CliError::audit("lifting changed an orientation code"));
    }
    Ok(())
}
