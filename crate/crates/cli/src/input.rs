//! Readers for points files, sequence files, probes and state files.

use std::fs;
use std::io::Read;
use std::path::Path;

use hypersep_core::persist;
use hypersep_core::sequence::WorldLine;
use hypersep_core::{Point, SeparationState};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::data(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Parses `id,label,x1..xn`. The dimension is the number of coordinate
/// columns in the header; every row must match it.
pub fn parse_points(text: &str) -> Result<(usize, Vec<Point>)> {
    match parse_points_or_empty(text)? {
        Some((n, points)) if !points.is_empty() => Ok((n, points)),
        _ => Err(CliError::data("no points")),
    }
}

/// Like [`parse_points`], but an empty file or a bare header is `None` or an
/// empty list rather than an error.
pub fn parse_points_or_empty(text: &str) -> Result<Option<(usize, Vec<Point>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| CliError::data(format!("line 1: {e}")))?.clone();
    if header.len() == 0 || (header.len() == 1 && header[0].is_empty()) {
        return Ok(None);
    }
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("id") || !header[1].eq_ignore_ascii_case("label") {
        return Err(CliError::data("line 1: header must be id,label,x1,...,xn"));
    }
    let n = header.len() - 2;
    let mut points = Vec::new();
    for rec in rdr.records() {
        // the reader's own line counter skips blank lines
        let line_at = |pos: Option<&csv::Position>| {
            pos.map_or(0, |p| {
                let bytes = text.as_bytes();
                let mut at = p.byte() as usize;
                while at < bytes.len() && matches!(bytes[at], b'\n' | b'\r') {
                    at += 1;
                }
                bytes[..at].iter().filter(|&&b| b == b'\n').count() + 1
            })
        };
        let rec = rec.map_err(|e| CliError::data(format!("line {}: {e}", line_at(e.position()))))?;
        let line = line_at(rec.position());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(CliError::data(format!("line {line}: expected {} fields, found {}", header.len(), rec.len())));
        }
        let id = rec[0].parse().map_err(|_| CliError::data(format!("line {line}: bad id {:?}", &rec[0])))?;
        let mut coords = Vec::with_capacity(n);
        for (j, field) in rec.iter().skip(2).enumerate() {
            let x: f64 = field.parse().map_err(|_| CliError::data(format!("line {line}: bad value {field:?} for {}", &header[j + 2])))?;
            if !x.is_finite() {
                return Err(CliError::data(format!("line {line}: {} is not finite", &header[j + 2])));
            }
            coords.push(x);
        }
        let label = (!rec[1].is_empty()).then(|| rec[1].to_string());
        points.push(Point { id, coords, label });
    }
    Ok(Some((n, points)))
}

pub fn read_points(path: &Path) -> Result<(usize, Vec<Point>)> {
    parse_points(&read_text(path)?).map_err(|e| e.context(path.display()))
}

pub fn read_state(path: &Path) -> Result<SeparationState> {
    persist::from_json(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

#[derive(Deserialize)]
struct SeqLine {
    id: u64,
    values: Vec<f64>,
}

/// One `{id, values}` object per line; blank lines are skipped.
pub fn parse_sequences(text: &str, block: usize, horizon: usize) -> Result<Vec<WorldLine>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: SeqLine = serde_json::from_str(line).map_err(|e| CliError::data(format!("line {}: {e}", i + 1)))?;
        let w = WorldLine::with_blocks(s.id, s.values, block, horizon).map_err(|e| CliError::data(format!("line {}: {e}", i + 1)))?;
        out.push(w);
    }
    if out.is_empty() {
        return Err(CliError::data("no sequences"));
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProbeLine {
    Bare(Vec<f64>),
    Object { coords: Vec<f64> },
}

/// A probe given as `[x1, ...]` or `{"coords": [...]}`.
pub fn parse_probe(text: &str) -> Result<Vec<f64>> {
    let p: ProbeLine = serde_json::from_str(text).map_err(|e| CliError::usage(format!("probe: {e}")))?;
    let coords = match p {
        ProbeLine::Bare(c) | ProbeLine::Object { coords: c } => c,
    };
    Ok(coords)
}

pub fn parse_probes(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_probe(l).map_err(|e| e.context(format_args!("line {}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_with_blank_labels() {
        let (n, pts) = parse_points("id,label,x1,x2\n1,a,0.5,1\n2,,3,4\n").unwrap();
        assert_eq!(n, 2);
        assert_eq!(pts[0].label.as_deref(), Some("a"));
        assert_eq!(pts[1].label, None);
        assert_eq!(pts[1].coords, vec![3.0, 4.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_points("id,label,x1,x2\n1,a,0,1\n2,b,zero,1\n").unwrap_err();
        assert!(e.msg.starts_with("line 3:"), "{}", e.msg);
        let e = parse_points("id,label,x1,x2\n1,a,0,1\n\n2,b,1\n").unwrap_err();
        assert!(e.msg.starts_with("line 4:"), "{}", e.msg);
        assert_eq!(parse_points("").unwrap_err().msg, "no points");
        assert_eq!(parse_points("id,label,x1\n").unwrap_err().msg, "no points");
        assert!(parse_points("x,y\n1,2\n").is_err());
    }

    #[test]
    fn probe_forms() {
        assert_eq!(parse_probe("[1, 2.5]").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_probe(r#"{"coords": [3]}"#).unwrap(), vec![3.0]);
        assert!(parse_probe("nope").is_err());
    }
}
