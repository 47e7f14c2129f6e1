use std::collections::HashMap;
use std::io::{self, Write};
use std::path::Path;

use base64::Engine as _;
use base64::engine::general_purpose::STANDARD;
use hypersep_core::index::QuadrantIndex;
use hypersep_core::sequence::{predict_continuation, SequenceIndex, WorldLine};
use hypersep_core::{EngineConfig, PointId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::input::{parse_sequences, read_text, write_text};

const BUNDLE_SCHEMA: u32 = 1;

/// Histories plus the index over their prefix points, in one JSON file.
#[derive(Serialize, Deserialize)]
struct Bundle {
    schema: u32,
    horizon: usize,
    block: usize,
    seed: u64,
    histories: Vec<History>,
    /// The binary index file, base64.
    index: String,
}

#[derive(Serialize, Deserialize)]
struct History {
    id: PointId,
    values: Vec<f64>,
}

pub fn index(path: &Path, horizon: usize, block: usize, seed: u64, config: EngineConfig, out: &Path) -> Result<()> {
    if horizon == 0 || block == 0 {
        return Err(CliError::usage("--horizon and --block must be positive"));
    }
    let lines = parse_sequences(&read_text(path)?, block, horizon).map_err(|e| e.context(path.display()))?;
    let histories: Vec<History> = lines.iter().map(|w| History { id: w.id, values: w.values.clone() }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let built = SequenceIndex::build(lines, config, seed, &mut rng)?;
    let bundle = Bundle { schema: BUNDLE_SCHEMA, horizon, block, seed, histories, index: STANDARD.encode(built.index.to_bytes()) };
    let mut text = serde_json::to_string(&bundle).expect("bundle serializes");
    text.push('\n');
    write_text(out, &text)?;
    let summary = json!({
        "histories": bundle.histories.len(),
        "prefix_points": built.index.len(),
        "dustbinned": built.state.dustbin().len(),
        "n": built.index.dim(),
        "q_f": built.index.q(),
    });
    println!("{summary}");
    Ok(())
}

pub fn predict(bundle_path: &Path, values: &str, steps: Option<usize>) -> Result<()> {
    let bundle: Bundle = serde_json::from_str(&read_text(bundle_path)?).map_err(|e| CliError::data(format!("{}: {e}", bundle_path.display())))?;
    if bundle.schema != BUNDLE_SCHEMA {
        return Err(CliError::data(format!("{}: bundle schema {} is not supported", bundle_path.display(), bundle.schema)));
    }
    let bytes = STANDARD.decode(&bundle.index).map_err(|e| CliError::data(format!("{}: index: {e}", bundle_path.display())))?;
    let index = QuadrantIndex::read_from(bytes.as_slice())?;
    let values: Vec<f64> = serde_json::from_str(values).map_err(|e| CliError::usage(format!("--values: {e}")))?;
    let live = WorldLine::with_blocks(0, values, bundle.block, bundle.horizon).map_err(|e| CliError::usage(format!("--values: {e}")))?;
    let s = steps.unwrap_or(live.steps());
    let (block, horizon) = (bundle.block, bundle.horizon);
    let histories: HashMap<PointId, Vec<f64>> = bundle.histories.into_iter().map(|h| (h.id, h.values)).collect();
    let found = predict_continuation(&index, &live, s, |id| histories.get(&id).map(|v| WorldLine { id, values: v.clone(), block, horizon })).map_err(|e| match e {
        hypersep_core::sequence::SequenceError::PrefixOutOfRange { .. } => CliError::usage(e.to_string()),
        e => e.into(),
    })?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for c in found {
        writeln!(out, "{}", serde_json::to_string(&c).expect("continuation serializes")).map_err(|e| CliError::data(e.to_string()))?;
    }
    Ok(())
}
