//! Frame writers: segments and areas CSV, SVG snapshots and the run summary.
//!
//! Numbers are printed with Rust's shortest round-trip formatting so the
//! readers below reconstruct them bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::Duration;

use curveflow::driver::Trajectory;
use curveflow::geometry::{Circle, Segment};
use curveflow::Rect;

/// One recorded frame of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFrame {
    pub step: usize,
    pub time: f64,
    pub areas: Vec<f64>,
    pub segments: Vec<Segment>,
    pub fitted: Option<Circle>,
}

/// Frames at the output cadence (records carrying full geometry).
pub fn frames(traj: &Trajectory) -> Vec<OutputFrame> {
    traj.records
        .iter()
        .filter_map(|r| {
            Some(OutputFrame {
                step: r.step,
                time: r.time,
                areas: r.areas.clone(),
                segments: r.segments.clone()?,
                fitted: r.fitted,
            })
        })
        .collect()
}

/// Per-phase reference for the drift column: the target when constrained, else the initial area.
pub fn drift_reference(traj: &Trajectory) -> Vec<f64> {
    let first = &traj.records[0].areas;
    first
        .iter()
        .zip(&traj.targets)
        .map(|(a, t)| t.unwrap_or(*a))
        .collect()
}

pub const SEGMENTS_HEADER: &str = "step,i,j,x1,y1,x2,y2";
pub const AREAS_HEADER: &str = "step,phase,area,drift";

pub fn write_segments(mut w: impl Write, frames: &[OutputFrame]) -> io::Result<()> {
    writeln!(w, "{SEGMENTS_HEADER}")?;
    for f in frames {
        for s in &f.segments {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                f.step, s.pair.0, s.pair.1, s.start[0], s.start[1], s.end[0], s.end[1]
            )?;
        }
    }
    Ok(())
}

pub fn write_areas(mut w: impl Write, frames: &[OutputFrame], reference: &[f64]) -> io::Result<()> {
    writeln!(w, "{AREAS_HEADER}")?;
    for f in frames {
        for (phase, (a, r)) in f.areas.iter().zip(reference).enumerate() {
            writeln!(w, "{},{phase},{a},{}", f.step, a - r)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRow {
    pub step: usize,
    pub pair: (usize, usize),
    pub start: [f64; 2],
    pub end: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRow {
    pub step: usize,
    pub phase: usize,
    pub area: f64,
    pub drift: f64,
}

fn bad(line: usize, msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

fn fields<const N: usize>(line: &str, no: usize) -> io::Result<[&str; N]> {
    let parts: Vec<&str> = line.split(',').collect();
    parts.try_into().map_err(|_| bad(no, &format!("expected {N} fields")))
}

fn num<T: std::str::FromStr>(s: &str, no: usize) -> io::Result<T> {
    s.parse().map_err(|_| bad(no, &format!("cannot parse '{s}'")))
}

fn body(r: impl BufRead, header: &str) -> io::Result<Vec<(usize, String)>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h == header => {}
        _ => return Err(bad(1, &format!("expected header '{header}'"))),
    }
    lines
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 2, l)))
        .collect()
}

pub fn read_segments(r: impl BufRead) -> io::Result<Vec<SegmentRow>> {
    body(r, SEGMENTS_HEADER)?
        .iter()
        .map(|(no, line)| {
            let f = fields::<7>(line, *no)?;
            Ok(SegmentRow {
                step: num(f[0], *no)?,
                pair: (num(f[1], *no)?, num(f[2], *no)?),
                start: [num(f[3], *no)?, num(f[4], *no)?],
                end: [num(f[5], *no)?, num(f[6], *no)?],
            })
        })
        .collect()
}

pub fn read_areas(r: impl BufRead) -> io::Result<Vec<AreaRow>> {
    body(r, AREAS_HEADER)?
        .iter()
        .map(|(no, line)| {
            let f = fields::<4>(line, *no)?;
            Ok(AreaRow {
                step: num(f[0], *no)?,
                phase: num(f[1], *no)?,
                area: num(f[2], *no)?,
                drift: num(f[3], *no)?,
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Interfaces of one frame, coloured by phase pair, y axis pointing up.
pub fn frame_svg(frame: &OutputFrame, domain: Rect) -> String {
    let (w, h) = (domain.max[0] - domain.min[0], domain.max[1] - domain.min[1]);
    let scale = 600.0 / w.max(h);
    let (pw, ph) = (w * scale, h * scale);
    let map = |p: [f64; 2]| ((p[0] - domain.min[0]) * scale, ph - (p[1] - domain.min[1]) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw:.0}" height="{ph:.0}" viewBox="0 0 {pw} {ph}">"#
    );
    let _ = writeln!(s, r#"<rect width="{pw}" height="{ph}" fill="white" stroke="black"/>"#);
    for seg in &frame.segments {
        let (a, b) = (map(seg.start), map(seg.end));
        let colour = PALETTE[(seg.pair.0 * 3 + seg.pair.1) % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{colour}" stroke-width="1.5"/>"#,
            a.0, a.1, b.0, b.1
        );
    }
    let _ = writeln!(s, r#"<text x="6" y="16" font-size="12">step {} t = {:.5}</text>"#, frame.step, frame.time);
    s.push_str("</svg>\n");
    s
}

pub fn summary(traj: &Trajectory, wall: Duration) -> String {
    let last = traj.last();
    let reference = drift_reference(traj);
    let mut s = String::new();
    let _ = writeln!(s, "steps: {}", last.step);
    let _ = writeln!(s, "time: {}", last.time);
    let _ = writeln!(s, "nodes: {}", traj.mesh.node_count());
    let _ = writeln!(s, "elements: {}", traj.mesh.element_count());
    let _ = writeln!(s, "phase,final_area,reference,drift,constrained");
    for (i, a) in last.areas.iter().enumerate() {
        let _ = writeln!(s, "{i},{a},{},{},{}", reference[i], a - reference[i], traj.targets[i].is_some());
    }
    let _ = writeln!(s, "max constrained drift: {:e}", traj.max_drift());
    if let Some(c) = last.fitted {
        let _ = writeln!(s, "fitted circle: center ({}, {}) radius {}", c.center[0], c.center[1], c.radius);
    }
    let _ = writeln!(s, "stalled: {}", traj.stalled());
    let _ = writeln!(s, "unconverged inner steps: {}", traj.unconverged_steps);
    let _ = writeln!(s, "wall clock: {:.3} s", wall.as_secs_f64());
    s
}

/// Writes `segments.csv`, `areas.csv`, `summary.txt` and optionally `svg/frame_NNNNN.svg` into `dir`.
pub fn write_run(dir: &Path, traj: &Trajectory, svg: bool, wall: Duration) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let frames = frames(traj);
    let mut w = io::BufWriter::new(fs::File::create(dir.join("segments.csv"))?);
    write_segments(&mut w, &frames)?;
    w.flush()?;
    let mut w = io::BufWriter::new(fs::File::create(dir.join("areas.csv"))?);
    write_areas(&mut w, &frames, &drift_reference(traj))?;
    w.flush()?;
    fs::write(dir.join("summary.txt"), summary(traj, wall))?;
    if svg {
        let sub = dir.join("svg");
        fs::create_dir_all(&sub)?;
        for f in &frames {
            fs::write(sub.join(format!("frame_{:05}.svg", f.step)), frame_svg(f, traj.config.domain))?;
        }
    }
    Ok(())
}
