//! Run artifacts: frames.csv, figure.svg and summary.json.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tropism_core::obstacle::Obstacle;
use tropism_core::sim::{FrameLog, RunOutcome, SimConfig};
use tropism_core::Vec3;

use crate::CliError;

pub const CSV_HEADER: &str = "frame_index,t,s,x,y,z,kx,ky,kz,phi,in_contact";

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// 17 significant digits: enough to recover every double exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn frames_csv(log: &FrameLog, cfg: &SimConfig) -> Result<String, CliError> {
    if log.frames.is_empty() {
        return Err(CliError::Usage("cannot write an empty frame log".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (index, frame) in log.frames.iter().enumerate() {
        for (i, (p, k)) in frame.positions.iter().zip(&frame.tangents).enumerate() {
            let phi = cfg.obstacles.signed_distance(*p);
            let contact = u8::from(frame.contacts.contains(&i));
            let fields = [frame.t, i as f64 * log.ds, p.x, p.y, p.z, k.x, k.y, k.z, phi].map(num);
            writeln!(out, "{index},{},{contact}", fields.join(",")).expect("writing to a string");
        }
    }
    Ok(out)
}

pub fn write_frames(log: &FrameLog, cfg: &SimConfig, path: &Path) -> Result<(), CliError> {
    write_atomic(path, frames_csv(log, cfg)?.as_bytes())
}

/// One parsed data row of frames.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub frame_index: usize,
    pub t: f64,
    pub s: f64,
    pub position: Vec3,
    pub tangent: Vec3,
    pub phi: f64,
    pub in_contact: bool,
}

pub fn read_frames(text: &str) -> Result<Vec<CsvRow>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Usage("frames.csv header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let bad = || CliError::Usage(format!("frames.csv line {}: malformed row", n + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 11 {
                return Err(bad());
            }
            let f = |i: usize| cols[i].parse::<f64>().map_err(|_| bad());
            Ok(CsvRow {
                frame_index: cols[0].parse().map_err(|_| bad())?,
                t: f(1)?,
                s: f(2)?,
                position: Vec3::new(f(3)?, f(4)?, f(5)?),
                tangent: Vec3::new(f(6)?, f(7)?, f(8)?),
                phi: f(9)?,
                in_contact: match cols[10] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgOptions {
    /// Draw every `stride`-th logged frame; the last frame is always drawn.
    pub stride: usize,
    pub width: f64,
    pub height: f64,
    /// Margin around the drawing as a fraction of its extent.
    pub padding: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { stride: 10, width: 800.0, height: 800.0, padding: 0.1 }
    }
}

struct Viewport {
    min_x: f64,
    max_y: f64,
    scale: f64,
    offset_x: f64,
    offset_y: f64,
}

impl Viewport {
    fn map(&self, p: Vec3) -> (f64, f64) {
        (self.offset_x + (p.x - self.min_x) * self.scale, self.offset_y + (self.max_y - p.y) * self.scale)
    }
}

pub fn svg_figure(log: &FrameLog, cfg: &SimConfig, opts: &SvgOptions) -> Result<String, CliError> {
    if log.frames.is_empty() {
        return Err(CliError::Usage("cannot draw an empty frame log".into()));
    }
    let valid = |x: f64, strict: bool| x.is_finite() && if strict { x > 0.0 } else { x >= 0.0 };
    if opts.stride == 0 || !valid(opts.width, true) || !valid(opts.height, true) || !valid(opts.padding, false) {
        return Err(CliError::Usage("invalid figure options".into()));
    }
    if log.frames.iter().any(|f| f.positions.iter().any(|p| p.z != 0.0)) {
        return Err(CliError::Usage("figures are only drawn for planar runs".into()));
    }
    let last = log.frames.len() - 1;
    let shown: Vec<usize> = (0..log.frames.len()).filter(|&i| i % opts.stride == 0 || i == last).collect();

    let (mut lo, mut hi) = (Vec3::new(f64::INFINITY, f64::INFINITY, 0.0), Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0));
    let mut grow = |p: Vec3| {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), 0.0);
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), 0.0);
    };
    for &i in &shown {
        log.frames[i].positions.iter().for_each(|p| grow(*p));
    }
    for o in &cfg.obstacles.obstacles {
        if let Obstacle::Sphere { center, radius } = *o {
            grow(center - Vec3::new(radius, radius, 0.0));
            grow(center + Vec3::new(radius, radius, 0.0));
        }
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    let pad = opts.padding * span;
    let (min_x, max_x, min_y, max_y) = (lo.x - pad, hi.x + pad, lo.y - pad, hi.y + pad);
    let scale = (opts.width / (max_x - min_x)).min(opts.height / (max_y - min_y));
    let view = Viewport {
        min_x,
        max_y,
        scale,
        offset_x: 0.5 * (opts.width - (max_x - min_x) * scale),
        offset_y: 0.5 * (opts.height - (max_y - min_y) * scale),
    };

    let mut svg = String::new();
    let w = |svg: &mut String, s: String| {
        svg.push_str(&s);
        svg.push('\n');
    };
    w(
        &mut svg,
        format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0:.0}" height="{1:.0}" viewBox="0 0 {0:.3} {1:.3}">"#,
            opts.width, opts.height
        ),
    );
    w(&mut svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##.to_string());
    for o in &cfg.obstacles.obstacles {
        match *o {
            Obstacle::Sphere { center, radius } => {
                let (cx, cy) = view.map(center);
                w(
                    &mut svg,
                    format!(
                        r##"<circle class="obstacle" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="#d9d9d9" stroke="#404040" stroke-width="1.5"/>"##,
                        radius * scale
                    ),
                );
            }
            Obstacle::HalfSpace { point, normal } => {
                // Boundary line through `point`, long enough to cross the view.
                let along = Vec3::new(-normal.y, normal.x, 0.0).normalized().unwrap_or(Vec3::E1);
                let reach = 2.0 * ((max_x - min_x) + (max_y - min_y));
                let (x1, y1) = view.map(point - along * reach);
                let (x2, y2) = view.map(point + along * reach);
                w(
                    &mut svg,
                    format!(
                        r##"<line class="obstacle" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#404040" stroke-width="1.5"/>"##
                    ),
                );
            }
        }
    }
    for &i in &shown {
        let pts: Vec<String> = log.frames[i]
            .positions
            .iter()
            .map(|p| {
                let (x, y) = view.map(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let style = if i == last {
            r##"class="final" stroke="#1b5e20" stroke-width="3""##
        } else {
            r##"class="snapshot" stroke="#7cb342" stroke-width="1""##
        };
        w(&mut svg, format!(r#"<polyline {style} fill="none" points="{}"/>"#, pts.join(" ")));
    }
    w(&mut svg, "</svg>".to_string());
    Ok(svg)
}

pub fn render_svg(log: &FrameLog, cfg: &SimConfig, path: &Path, opts: &SvgOptions) -> Result<(), CliError> {
    write_atomic(path, svg_figure(log, cfg, opts)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub t_final: f64,
    pub penetration_final: f64,
    pub max_step_omega_norm: f64,
    pub max_step_measure_mass: f64,
    pub frames_written: usize,
}

impl Summary {
    pub fn of(outcome: &RunOutcome) -> Self {
        Self {
            status: outcome.status.name().to_string(),
            t_final: outcome.log.last().map_or(f64::NAN, |f| f.t),
            penetration_final: outcome.penetration_final,
            max_step_omega_norm: outcome.max_step_omega_norm,
            max_step_measure_mass: outcome.max_step_measure_mass,
            frames_written: outcome.log.frames.len(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
