use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use base64::Engine as _;
use base64::engine::general_purpose::STANDARD;
use hypersep_core::index::{QuadrantIndex, Record};
use hypersep_core::PointId;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::input::{parse_probe, parse_probes, read_state, read_text};

#[derive(Deserialize)]
struct RecordLine {
    id: PointId,
    #[serde(default)]
    payload: Value,
}

fn read_payloads(path: &Path) -> Result<HashMap<PointId, Vec<u8>>> {
    let mut out = HashMap::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RecordLine = serde_json::from_str(line).map_err(|e| CliError::data(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        let bytes = if r.payload.is_null() { Vec::new() } else { serde_json::to_vec(&r.payload).expect("value serializes") };
        if out.insert(r.id, bytes).is_some() {
            return Err(CliError::data(format!("{}: line {}: record {} given twice", path.display(), i + 1, r.id)));
        }
    }
    Ok(out)
}

pub fn index(state_path: &Path, records: Option<&Path>, out: &Path) -> Result<()> {
    let state = read_state(state_path)?;
    let mut payloads = match records {
        Some(p) => read_payloads(p)?,
        None => HashMap::new(),
    };
    if let Some(id) = payloads.keys().find(|id| state.s_point(**id).is_none()) {
        return Err(CliError::data(format!("record {id} is not a separated point of the state")));
    }
    let index = QuadrantIndex::build(&state, |id| payloads.remove(&id).unwrap_or_default())?;
    let file = File::create(out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    index.write_to(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    println!("{}", json!({ "records": index.len(), "codes": index.occupied(), "q": index.q(), "n": index.dim() }));
    Ok(())
}

/// Payload as JSON when it parses, otherwise base64 text.
fn payload_json(r: &Record) -> (Value, bool) {
    if r.payload.is_empty() {
        return (Value::Null, false);
    }
    match serde_json::from_slice(&r.payload) {
        Ok(v) => (v, false),
        Err(_) => (Value::String(STANDARD.encode(&r.payload)), true),
    }
}

pub fn query(index_path: &Path, probe: Option<&str>, probes: Option<&Path>) -> Result<()> {
    let file = File::open(index_path).map_err(|e| CliError::data(format!("{}: {e}", index_path.display())))?;
    let index = QuadrantIndex::read_from(BufReader::new(file)).map_err(|e| CliError::from(e).context(index_path.display()))?;
    let probes = match (probe, probes) {
        (Some(p), _) => vec![parse_probe(p)?],
        (None, Some(path)) => parse_probes(&read_text(path)?)?,
        (None, None) => return Err(CliError::usage("give --probe or --probes")),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (i, x) in probes.iter().enumerate() {
        let code = index.code(x).map_err(|e| CliError::from(e).context(format_args!("probe {i}")))?;
        for r in index.get(&code) {
            let (payload, encoded) = payload_json(r);
            let mut line = json!({ "probe": i, "point_id": r.point_id, "code": code.to_string(), "payload": payload });
            if encoded {
                line["payload_encoding"] = json!("base64");
            }
            writeln!(out, "{line}").map_err(|e| CliError::data(e.to_string()))?;
        }
    }
    Ok(())
}
