//! TOML configuration files.
//!
//! ```toml
//! [model]
//! alpha = "infinity"   # or a positive number
//! beta = 0.5
//! kappa = 1.0
//! gamma = 0.0          # optional, default 0
//! delta0 = 0.05        # optional, default 0.05
//! c_twist = 1.0        # optional, default 1
//! c_bend = 1.0         # optional, default 1
//!
//! [run]
//! t_end = 6.0
//! ds = 0.05
//! # t0, push_tol, push_max_iter, frame_stride are optional
//!
//! [[obstacles]]
//! type = "circle"
//! center = [1.2, 1.5]
//! radius = 0.5
//!
//! [initial_curve]
//! type = "parabola-arc"
//! ```
//!
//! Every problem is reported with the dotted key that caused it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tropism_core::obstacle::{Obstacle, ObstacleSet, SensingParams};
use tropism_core::sim::{InitialCurve, SimConfig};
use tropism_core::{ElongationLaw, EnergyWeights, GrowthParams, Vec3};

use crate::CliError;

pub const DEFAULT_PUSH_TOL: f64 = 1e-9;
pub const DEFAULT_PUSH_MAX_ITER: usize = 5000;
pub const DEFAULT_DELTA0: f64 = 0.05;

/// `alpha` is either a number or the string `"infinity"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: Option<Alpha>,
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub delta0: Option<f64>,
    pub c_twist: Option<f64>,
    pub c_bend: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub ds: Option<f64>,
    pub push_tol: Option<f64>,
    pub push_max_iter: Option<i64>,
    pub frame_stride: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

/// The document as written on disk, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelSection>,
    pub run: Option<RunSection>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
    pub initial_curve: Option<CurveSection>,
}

fn bad(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {why}"))
}

fn required<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| bad(key, "missing required key"))
}

fn finite(value: f64, key: &str) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad(key, format!("must be finite, got {value}")))
    }
}

fn positive(value: f64, key: &str) -> Result<f64, CliError> {
    if finite(value, key)? > 0.0 {
        Ok(value)
    } else {
        Err(bad(key, format!("must be > 0, got {value}")))
    }
}

fn non_negative(value: f64, key: &str) -> Result<f64, CliError> {
    if finite(value, key)? >= 0.0 {
        Ok(value)
    } else {
        Err(bad(key, format!("must be >= 0, got {value}")))
    }
}

fn count(value: i64, key: &str) -> Result<usize, CliError> {
    if value >= 1 {
        Ok(value as usize)
    } else {
        Err(bad(key, format!("must be >= 1, got {value}")))
    }
}

/// Two or three finite components; a missing `z` is zero.
fn point(values: &[f64], key: &str) -> Result<Vec3, CliError> {
    let v = match values {
        [x, y] => Vec3::new(*x, *y, 0.0),
        [x, y, z] => Vec3::new(*x, *y, *z),
        _ => return Err(bad(key, format!("expected 2 or 3 components, got {}", values.len()))),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "components must be finite"))
    }
}

fn alpha_law(alpha: &Alpha) -> Result<ElongationLaw, CliError> {
    let key = "model.alpha";
    match alpha {
        Alpha::Text(t) if t.eq_ignore_ascii_case("infinity") || t.eq_ignore_ascii_case("inf") => {
            Ok(ElongationLaw::INSTANT)
        }
        Alpha::Text(t) => Err(bad(key, format!("expected a number or \"infinity\", got {t:?}"))),
        Alpha::Number(a) if a.is_infinite() && *a > 0.0 => Ok(ElongationLaw::INSTANT),
        Alpha::Number(a) => ElongationLaw::new(positive(*a, key)?).map_err(|e| bad(key, e)),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    /// Validates every key and builds the simulation configuration.
    pub fn to_sim(&self) -> Result<SimConfig, CliError> {
        let model = self.model.as_ref().ok_or_else(|| bad("model", "missing required section"))?;
        let run = self.run.as_ref().ok_or_else(|| bad("run", "missing required section"))?;

        let law = alpha_law(&required(&model.alpha, "model.alpha")?)?;
        let beta = non_negative(required(&model.beta, "model.beta")?, "model.beta")?;
        let kappa = non_negative(required(&model.kappa, "model.kappa")?, "model.kappa")?;
        let gamma = non_negative(model.gamma.unwrap_or(0.0), "model.gamma")?;
        let delta0 = positive(model.delta0.unwrap_or(DEFAULT_DELTA0), "model.delta0")?;
        let c_twist = positive(model.c_twist.unwrap_or(1.0), "model.c_twist")?;
        let c_bend = positive(model.c_bend.unwrap_or(1.0), "model.c_bend")?;

        let sensing = SensingParams::new(gamma, delta0).map_err(|e| bad("model.gamma", e))?;
        let params = GrowthParams::with_up(kappa, beta, sensing, law, Vec3::E2).map_err(|e| bad("model", e))?;
        let weights = EnergyWeights::new(beta, c_twist, c_bend).map_err(|e| bad("model.c_twist", e))?;

        let t0 = run.t0.map(|v| finite(v, "run.t0")).transpose()?;
        let t_end = finite(required(&run.t_end, "run.t_end")?, "run.t_end")?;
        let ds = positive(required(&run.ds, "run.ds")?, "run.ds")?;
        let push_tol = positive(run.push_tol.unwrap_or(DEFAULT_PUSH_TOL), "run.push_tol")?;
        let push_max_iter = count(run.push_max_iter.unwrap_or(DEFAULT_PUSH_MAX_ITER as i64), "run.push_max_iter")?;
        let frame_stride = count(run.frame_stride.unwrap_or(1), "run.frame_stride")?;

        let obstacles = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| obstacle(o, &format!("obstacles[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let curve = self
            .initial_curve
            .as_ref()
            .ok_or_else(|| bad("initial_curve", "missing required section"))?;
        let initial_curve = match curve.kind.as_str() {
            "parabola-arc" => InitialCurve::ParabolaArc,
            "vertical-segment" => InitialCurve::VerticalSegment {
                length: positive(required(&curve.length, "initial_curve.length")?, "initial_curve.length")?,
            },
            "polyline" => {
                let pts = required(&curve.points, "initial_curve.points")?;
                if pts.len() < 2 {
                    return Err(bad("initial_curve.points", "needs at least two points"));
                }
                let points = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| point(p, &format!("initial_curve.points[{i}]")).map(Vec3::to_array))
                    .collect::<Result<Vec<_>, _>>()?;
                InitialCurve::Polyline { points }
            }
            other => return Err(bad("initial_curve.type", format!("unknown curve type {other:?}"))),
        };

        let cfg = SimConfig {
            t0,
            t_end,
            ds,
            params,
            weights,
            obstacles: ObstacleSet::new(obstacles),
            initial_curve,
            push_tol,
            push_max_iter,
            frame_stride,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Inverse of [`ConfigFile::to_sim`] for planar configurations.
    pub fn from_sim(cfg: &SimConfig) -> Self {
        let p = &cfg.params;
        let alpha = if p.law.is_instant() {
            Alpha::Text("infinity".into())
        } else {
            Alpha::Number(p.law.alpha)
        };
        let obstacles = cfg
            .obstacles
            .obstacles
            .iter()
            .map(|o| match *o {
                Obstacle::Sphere { center, radius } => ObstacleEntry {
                    kind: "circle".into(),
                    center: Some(center.to_array().to_vec()),
                    radius: Some(radius),
                    point: None,
                    normal: None,
                },
                Obstacle::HalfSpace { point, normal } => ObstacleEntry {
                    kind: "half-space".into(),
                    center: None,
                    radius: None,
                    point: Some(point.to_array().to_vec()),
                    normal: Some(normal.to_array().to_vec()),
                },
            })
            .collect();
        let initial_curve = match &cfg.initial_curve {
            InitialCurve::ParabolaArc => CurveSection { kind: "parabola-arc".into(), length: None, points: None },
            InitialCurve::VerticalSegment { length } => {
                CurveSection { kind: "vertical-segment".into(), length: Some(*length), points: None }
            }
            InitialCurve::Polyline { points } => CurveSection {
                kind: "polyline".into(),
                length: None,
                points: Some(points.iter().map(|p| p.to_vec()).collect()),
            },
        };
        ConfigFile {
            model: Some(ModelSection {
                alpha: Some(alpha),
                beta: Some(p.beta),
                kappa: Some(p.kappa),
                gamma: Some(p.sensing.gamma),
                delta0: Some(p.sensing.delta0),
                c_twist: Some(cfg.weights.c_twist),
                c_bend: Some(cfg.weights.c_bend),
            }),
            run: Some(RunSection {
                t0: cfg.t0,
                t_end: Some(cfg.t_end),
                ds: Some(cfg.ds),
                push_tol: Some(cfg.push_tol),
                push_max_iter: Some(cfg.push_max_iter as i64),
                frame_stride: Some(cfg.frame_stride as i64),
            }),
            obstacles,
            initial_curve: Some(initial_curve),
        }
    }
}

fn obstacle(entry: &ObstacleEntry, key: &str) -> Result<Obstacle, CliError> {
    match entry.kind.as_str() {
        "circle" | "sphere" => {
            let center = point(&required(&entry.center, &format!("{key}.center"))?, &format!("{key}.center"))?;
            let rkey = format!("{key}.radius");
            let radius = positive(required(&entry.radius, &rkey)?, &rkey)?;
            Obstacle::sphere(center, radius).map_err(|e| bad(&rkey, e))
        }
        "half-space" => {
            let at = point(&required(&entry.point, &format!("{key}.point"))?, &format!("{key}.point"))?;
            let nkey = format!("{key}.normal");
            let normal = point(&required(&entry.normal, &nkey)?, &nkey)?
                .normalized()
                .ok_or_else(|| bad(&nkey, "must be nonzero"))?;
            Obstacle::half_space(at, normal).map_err(|e| bad(&nkey, e))
        }
        other => Err(bad(&format!("{key}.type"), format!("unknown obstacle type {other:?}"))),
    }
}

/// Reads, validates and feasibility-checks a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig, CliError> {
    let cfg = ConfigFile::load(path)?.to_sim()?;
    cfg.initial_state().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}
