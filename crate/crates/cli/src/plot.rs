//! SVG drawing of 2-D states: points with their labels, every plane clipped
//! to the view box, and an arrow on the positive side of each plane.

use std::fmt::Write as _;
use std::path::Path;

use hypersep_core::{Hyperplane, Point, SeparationState};

use crate::error::{CliError, Result};
use crate::input::{read_state, write_text};

const SIZE: f64 = 600.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn plot(state_path: &Path, out: Option<&Path>) -> Result<()> {
    let state = read_state(state_path)?;
    if state.dim() != 2 {
        return Err(CliError::usage(format!("plot needs a 2-D state, this one has n = {}", state.dim())));
    }
    let svg = render(&state);
    match out {
        Some(p) => write_text(p, &svg),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}

struct View {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl View {
    fn around<'a>(pts: impl Iterator<Item = &'a Point>) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            x0 = x0.min(p.coords[0]);
            x1 = x1.max(p.coords[0]);
            y0 = y0.min(p.coords[1]);
            y1 = y1.max(p.coords[1]);
        }
        if !x0.is_finite() {
            (x0, y0, x1, y1) = (-1.0, -1.0, 1.0, 1.0);
        }
        // square box with a margin so points never sit on the border
        let span = (x1 - x0).max(y1 - y0).max(1e-9) * 1.2;
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        Self { x0: cx - span / 2.0, y0: cy - span / 2.0, x1: cx + span / 2.0, y1: cy + span / 2.0 }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) / (self.x1 - self.x0) * SIZE, (self.y1 - y) / (self.y1 - self.y0) * SIZE)
    }

    /// The part of `1 + a·x + b·y = 0` inside the box.
    fn clip(&self, h: &Hyperplane) -> Option<((f64, f64), (f64, f64))> {
        let (a, b, c) = (h.coeffs[0], h.coeffs[1], h.constant);
        let mut hits: Vec<(f64, f64)> = Vec::new();
        if b != 0.0 {
            for x in [self.x0, self.x1] {
                let y = -(c + a * x) / b;
                if (self.y0..=self.y1).contains(&y) {
                    hits.push((x, y));
                }
            }
        }
        if a != 0.0 {
            for y in [self.y0, self.y1] {
                let x = -(c + b * y) / a;
                if (self.x0..=self.x1).contains(&x) {
                    hits.push((x, y));
                }
            }
        }
        let first = *hits.first()?;
        let far = hits.iter().copied().max_by(|p, q| dist2(first, *p).total_cmp(&dist2(first, *q)))?;
        (dist2(first, far) > 0.0).then_some((first, far))
    }
}

fn dist2(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(state: &SeparationState) -> String {
    let separated: Vec<&Point> = state.s_points().iter().map(|s| &s.point).collect();
    let others: Vec<&Point> = state.t_points().chain(state.dustbin().iter().map(|d| &d.point)).collect();
    let view = View::around(separated.iter().chain(&others).copied());
    let mut labels: Vec<&str> = separated.iter().chain(&others).filter_map(|p| p.label.as_deref()).collect();
    labels.sort_unstable();
    labels.dedup();
    let color = |p: &Point| p.label.as_deref().and_then(|l| labels.iter().position(|m| *m == l)).map_or("#333333", |i| PALETTE[i % PALETTE.len()]);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    s.push_str(r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#000"/></marker></defs>"##);
    s.push('\n');
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#fff" stroke="#999"/>"##);
    for h in state.planes() {
        let Some((p, q)) = view.clip(h) else { continue };
        let ((x1, y1), (x2, y2)) = (view.px(p.0, p.1), view.px(q.0, q.1));
        let _ = writeln!(s, r##"<line class="plane" data-plane="{}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#555" stroke-width="1"/>"##, h.index);
        // arrow from the middle of the visible segment towards the positive side
        let (mx, my) = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
        let norm = h.normal_norm();
        let len = 0.04 * (view.x1 - view.x0);
        let (ax, ay) = view.px(mx, my);
        let (bx, by) = view.px(mx + len * h.coeffs[0] / norm, my + len * h.coeffs[1] / norm);
        let _ = writeln!(s, r##"<line class="normal" x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="#000" stroke-width="1.5" marker-end="url(#arrow)"/>"##);
        let _ = writeln!(s, r#"<text class="plane-label" x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, bx + 3.0, by - 3.0, h.index);
    }
    for (pts, class, fill) in [(&separated, "point", true), (&others, "unseparated", false)] {
        for p in pts.iter() {
            let (x, y) = view.px(p.coords[0], p.coords[1]);
            let c = color(p);
            let fill = if fill { c } else { "none" };
            let _ = writeln!(s, r#"<circle class="{class}" data-id="{}" cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}" stroke="{c}"/>"#, p.id);
            let name = format!("{}{}", p.label.as_deref().unwrap_or(""), p.id);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{c}">{}</text>"#, x + 5.0, y - 5.0, escape(&name));
        }
    }
    s.push_str("</svg>\n");
    s
}
