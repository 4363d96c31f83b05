//! Plain-text `key = value` run configuration.
//!
//! ```text
//! # lines starting with '#' are comments
//! mesh.nx = 54
//! mesh.ny = 54
//! phases.k = 4
//! shapes.a = disk 1 0.4 0.42 0.15
//! shapes.b = ellipse 2 0.6 0.5 0.1 0.2
//! shapes.background = everywhere 0
//! time.dt = 5e-4
//! time.K = 10
//! time.M = 60
//! mode = bmo_star
//! constraint.enabled = true
//! constraint.epsilon = 1e-6
//! output.every = 1
//! ```
//!
//! Shapes are tried in file order; the first one containing a node sets its phase.

use std::collections::HashMap;
use std::str::FromStr;

use curveflow::dmf::PenaltyForm;
use curveflow::driver::{Constraint, Initial, Mode, RunConfig, TransportConfig, TransportField};
use curveflow::{Rect, Region, Shape};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

const KEYS: [&str; 20] = [
    "mesh.nx",
    "mesh.ny",
    "mesh.domain",
    "phases.k",
    "time.dt",
    "time.K",
    "time.M",
    "mode",
    "constraint.enabled",
    "constraint.epsilon",
    "constraint.form",
    "constraint.phases",
    "constraint.targets",
    "transport.enabled",
    "transport.beta",
    "transport.phase",
    "output.every",
    "fit.pair",
    "descent.max_iter",
    "halt_on_stall",
];

struct Entries {
    values: HashMap<String, String>,
    shapes: Vec<(String, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| err(key, format!("cannot parse '{v}'"))))
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or_else(|| err(key, "missing required key"))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.raw(key).map(|v| numbers(key, v)).transpose()
    }
}

fn numbers<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| err(key, format!("cannot parse '{s}'"))))
        .collect()
}

fn parse_bool(key: &str, v: Option<&str>) -> Result<bool, ConfigError> {
    match v {
        None => Ok(false),
        Some("true" | "on" | "yes" | "1") => Ok(true),
        Some("false" | "off" | "no" | "0") => Ok(false),
        Some(other) => Err(err(key, format!("expected true or false, got '{other}'"))),
    }
}

fn split_lines(text: &str) -> Result<Entries, ConfigError> {
    let mut values = HashMap::new();
    let mut shapes = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", no + 1), "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(name) = key.strip_prefix("shapes.") {
            if name.is_empty() || shapes.iter().any(|(n, _)| n == name) {
                return Err(err(key, "shape names must be unique and non-empty"));
            }
            shapes.push((name.to_string(), value.to_string()));
            continue;
        }
        if !KEYS.contains(&key) {
            return Err(err(key, "unknown key"));
        }
        if values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(err(key, "duplicate key"));
        }
    }
    Ok(Entries { values, shapes })
}

/// Parses `disk 1 0.4 0.42 0.15` and friends.
fn parse_shape(key: &str, value: &str) -> Result<Region, ConfigError> {
    let mut words = value.split_whitespace();
    let kind = words.next().ok_or_else(|| err(key, "empty shape"))?;
    let phase: usize = words
        .next()
        .ok_or_else(|| err(key, "missing phase"))?
        .parse()
        .map_err(|_| err(key, "phase must be a non-negative integer"))?;
    let rest: Vec<&str> = words.collect();
    let p: Vec<f64> = numbers(key, &rest.join(" "))?;
    let want = |n: usize| {
        if p.len() == n {
            Ok(())
        } else {
            Err(err(key, format!("{kind} takes {n} numbers after the phase, got {}", p.len())))
        }
    };
    let shape = match kind {
        "disk" => {
            want(3)?;
            Shape::Disk {
                center: [p[0], p[1]],
                radius: p[2],
            }
        }
        "ellipse" => {
            want(4)?;
            Shape::Ellipse {
                center: [p[0], p[1]],
                semi_axes: [p[2], p[3]],
            }
        }
        "rect" => {
            want(4)?;
            Shape::Rect(Rect::new([p[0], p[1]], [p[2], p[3]]))
        }
        "halfplane" => {
            want(4)?;
            Shape::HalfPlane {
                point: [p[0], p[1]],
                normal: [p[2], p[3]],
            }
        }
        "everywhere" | "background" => {
            want(0)?;
            Shape::Everywhere
        }
        other => return Err(err(key, format!("unknown shape kind '{other}'"))),
    };
    Ok(Region::new(phase, shape))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = split_lines(text)?;
    let nx: usize = e.require("mesh.nx")?;
    let ny: usize = e.require("mesh.ny")?;
    let k: usize = e.require("phases.k")?;
    let dt: f64 = e.require("time.dt")?;
    let k_inner: usize = e.require("time.K")?;
    let steps: usize = e.require("time.M")?;
    if e.shapes.is_empty() {
        return Err(err("shapes.*", "at least one shape is required"));
    }
    let regions = e
        .shapes
        .iter()
        .map(|(name, v)| parse_shape(&format!("shapes.{name}"), v))
        .collect::<Result<Vec<_>, _>>()?;

    let mut c = RunConfig::new(1, k, regions, dt, k_inner, steps);
    c.nx = nx;
    c.ny = ny;
    if let Some(d) = e.list::<f64>("mesh.domain")? {
        if d.len() != 4 {
            return Err(err("mesh.domain", "expected x0 y0 x1 y1"));
        }
        c.domain = Rect::new([d[0], d[1]], [d[2], d[3]]);
    }
    c.mode = match e.raw("mode").unwrap_or("bmo") {
        "bmo" => Mode::Bmo,
        "bmo_star" | "bmo*" => Mode::BmoStar,
        other => return Err(err("mode", format!("expected bmo or bmo_star, got '{other}'"))),
    };
    if parse_bool("constraint.enabled", e.raw("constraint.enabled"))? {
        let form = match e.raw("constraint.form").unwrap_or("quadratic") {
            "quadratic" => PenaltyForm::Quadratic,
            "piecewise_linear" => PenaltyForm::PiecewiseLinear,
            "absolute" => PenaltyForm::Absolute,
            other => {
                return Err(err(
                    "constraint.form",
                    format!("expected quadratic, piecewise_linear or absolute, got '{other}'"),
                ))
            }
        };
        c.constraint = Some(Constraint {
            epsilon: e.get("constraint.epsilon")?.unwrap_or(Constraint::default().epsilon),
            form,
            phases: e.list("constraint.phases")?,
            targets: e.list("constraint.targets")?,
        });
    }
    if parse_bool("transport.enabled", e.raw("transport.enabled"))? {
        c.transport = Some(TransportConfig {
            field: TransportField::Buoyancy {
                beta: e.require("transport.beta")?,
            },
            phase: e.get("transport.phase")?.unwrap_or(1),
        });
    }
    c.output_every = e.get("output.every")?.unwrap_or(1);
    if let Some(p) = e.list::<usize>("fit.pair")? {
        if p.len() != 2 {
            return Err(err("fit.pair", "expected two phases"));
        }
        c.fit_pair = Some((p[0].min(p[1]), p[0].max(p[1])));
    }
    if let Some(n) = e.get("descent.max_iter")? {
        c.descent_max_iter = n;
    }
    c.halt_on_stall = parse_bool("halt_on_stall", e.raw("halt_on_stall"))?;
    if let Initial::Regions(r) = &c.initial {
        if let Some(bad) = r.iter().position(|r| r.phase >= k) {
            return Err(err(&format!("shapes.{}", e.shapes[bad].0), format!("phase out of range for phases.k = {k}")));
        }
    }
    c.validate().map_err(|x| err("config", x.to_string()))?;
    Ok(c)
}
