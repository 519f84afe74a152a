//! Operator-splitting driver.
//!
//! Each step grows the stem by one explicit rotation step, appends a node at
//! the tip, then pushes the curve out of the obstacles. Runs stop at `t_end`,
//! at a breakdown configuration, or when the push-out fails.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::growth::{apply_growth_step, kernel_values, GrowthParams};
use crate::obstacle::{Obstacle, ObstacleSet};
use crate::pushout::{
    push_out, weighted_push_out, Atom, BreakdownReport, BreakdownTolerances, ContactMeasure,
    EnergyWeights, RotationField,
};
use crate::stem::{contact_set, elongate, penetration_depth, Node, StemState};
use crate::{Error, Result};

/// Shape of the stem at the start of a run. Curves start at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialCurve {
    /// `x = 1 - (y - 1)^2` for `0 <= y <= 1`.
    ParabolaArc,
    /// Straight segment along the up direction.
    VerticalSegment { length: f64 },
    Polyline { points: Vec<[f64; 3]> },
}

const PARABOLA_SAMPLES: usize = 4000;

impl InitialCurve {
    pub fn points(&self) -> Result<Vec<Vec3>> {
        match self {
            InitialCurve::ParabolaArc => Ok((0..=PARABOLA_SAMPLES)
                .map(|j| {
                    let y = j as f64 / PARABOLA_SAMPLES as f64;
                    Vec3::new(1.0 - (y - 1.0).powi(2), y, 0.0)
                })
                .collect()),
            InitialCurve::VerticalSegment { .. } => Err(Error::Usage("segments are built directly".into())),
            InitialCurve::Polyline { points } => Ok(points.iter().map(|p| Vec3::from(*p)).collect()),
        }
    }

    pub fn build(&self, ds: f64, params: &GrowthParams) -> Result<StemState> {
        match self {
            InitialCurve::VerticalSegment { length } => {
                if !(*length > 0.0) || !length.is_finite() {
                    return Err(Error::Config(format!("initial_curve.length must be > 0, got {length}")));
                }
                let count = (length / ds).round() as usize + 1;
                StemState::straight(params.up, ds, count)
            }
            _ => StemState::from_polyline(&self.points()?, ds, &params.law),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Start time; defaults to the arc length of the resampled initial curve.
    pub t0: Option<f64>,
    pub t_end: f64,
    /// Grid spacing, also the time step.
    pub ds: f64,
    pub params: GrowthParams,
    pub weights: EnergyWeights,
    pub obstacles: ObstacleSet,
    pub initial_curve: InitialCurve,
    pub push_tol: f64,
    pub push_max_iter: usize,
    pub frame_stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{key} must be a positive number, got {v}")))
            }
        };
        positive(self.ds, "run.ds")?;
        positive(self.push_tol, "run.push_tol")?;
        if !self.t_end.is_finite() {
            return Err(Error::Config("run.t_end must be finite".into()));
        }
        if let Some(t0) = self.t0 {
            if !t0.is_finite() {
                return Err(Error::Config("run.t0 must be finite".into()));
            }
        }
        if self.frame_stride == 0 {
            return Err(Error::Config("run.frame_stride must be >= 1".into()));
        }
        if self.push_max_iter == 0 {
            return Err(Error::Config("run.push_max_iter must be >= 1".into()));
        }
        if self.weights.beta != self.params.beta {
            return Err(Error::Config("energy beta must equal growth beta".into()));
        }
        Ok(())
    }

    pub fn breakdown_tolerances(&self) -> BreakdownTolerances {
        BreakdownTolerances::for_grid(self.ds)
    }

    /// Band used to log contact nodes.
    pub fn contact_band(&self) -> f64 {
        self.breakdown_tolerances().distance.max(self.push_tol)
    }

    /// Resampled, feasibility-checked initial state at `t0`.
    pub fn initial_state(&self) -> Result<StemState> {
        self.validate()?;
        let mut state = self.initial_curve.build(self.ds, &self.params)?;
        let s_last = state.s_last();
        let t0 = self.t0.unwrap_or(s_last);
        if t0 < s_last - 1e-9 * self.ds {
            return Err(Error::Config(format!(
                "run.t0 = {t0} is earlier than the birth of the initial tip ({s_last})"
            )));
        }
        state.t = t0;
        state.t0 = t0;
        state.rebuild_positions_in_place(&self.params.law);
        if let Some((i, depth)) = crate::stem::deepest_node(&state, &self.obstacles) {
            return Err(Error::Config(format!(
                "initial curve penetrates an obstacle at node {i} (depth {depth:e})"
            )));
        }
        if !self.obstacles.is_empty() && !(self.obstacles.signed_distance(Vec3::ZERO) > 0.0) {
            return Err(Error::Config("the root must lie strictly outside the obstacles".into()));
        }
        Ok(state)
    }

    pub fn t0_for(&self, state: &StemState) -> f64 {
        self.t0.unwrap_or(state.s_last())
    }

    /// Number of steps from `t0` to `t_end`.
    pub fn step_count(&self, t0: f64) -> usize {
        let k = ((self.t_end - t0) / self.ds).round();
        if k > 0.0 {
            k as usize
        } else {
            0
        }
    }
}

/// Diagnostics of one splitting step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub penetration_before_push: f64,
    pub push_iterations: usize,
    pub measure: ContactMeasure,
    pub field: RotationField,
}

/// Growth, elongation and push-out.
pub fn step(state: &StemState, cfg: &SimConfig) -> Result<(StemState, StepInfo)> {
    let law = &cfg.params.law;
    let grown = apply_growth_step(state, &cfg.params, &cfg.obstacles, cfg.ds)?;
    let extended = elongate(&grown, law);
    let penetration_before_push = penetration_depth(&extended, &cfg.obstacles);
    if cfg.obstacles.is_empty() {
        let n = extended.len();
        return Ok((
            extended,
            StepInfo {
                penetration_before_push,
                push_iterations: 0,
                measure: ContactMeasure::empty(),
                field: RotationField::zeros(n),
            },
        ));
    }
    let out = if cfg.weights.is_isotropic() {
        push_out(&extended, &cfg.obstacles, law, cfg.weights.beta, cfg.push_tol, cfg.push_max_iter)?
    } else {
        weighted_push_out(&extended, &cfg.obstacles, law, &cfg.weights, cfg.push_tol, cfg.push_max_iter)?
    };
    Ok((
        out.state,
        StepInfo {
            penetration_before_push,
            push_iterations: out.iterations,
            measure: out.measure,
            field: out.field,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: usize,
    pub t: f64,
    pub positions: Vec<Vec3>,
    pub tangents: Vec<Vec3>,
    pub contacts: Vec<usize>,
    pub atoms: Vec<Atom>,
    pub penetration_before_push: f64,
    pub push_iterations: usize,
    pub omega_norm: f64,
    pub measure_mass: f64,
}

impl Frame {
    fn record(state: &StemState, step: usize, info: Option<&StepInfo>, cfg: &SimConfig) -> Result<Self> {
        let contacts = contact_set(state, &cfg.obstacles, cfg.contact_band())?.indices;
        Ok(Frame {
            step,
            t: state.t,
            positions: state.positions(),
            tangents: state.tangents(),
            contacts,
            atoms: info.map(|i| i.measure.atoms.clone()).unwrap_or_default(),
            penetration_before_push: info.map_or(0.0, |i| i.penetration_before_push),
            push_iterations: info.map_or(0, |i| i.push_iterations),
            omega_norm: info.map_or(0.0, |i| i.field.l2_norm(state.ds)),
            measure_mass: info.map_or(0.0, |i| i.measure.mass()),
        })
    }

    /// The stem of this frame (node `i` born at `i * ds`).
    pub fn state(&self, ds: f64, t0: f64) -> StemState {
        let nodes = self
            .positions
            .iter()
            .zip(&self.tangents)
            .enumerate()
            .map(|(i, (&pos, &tangent))| Node { s: i as f64 * ds, pos, tangent })
            .collect();
        StemState { t: self.t, t0, ds, nodes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub ds: f64,
    pub t0: f64,
    pub stride: usize,
    pub frames: Vec<Frame>,
}

impl FrameLog {
    pub fn last(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn final_state(&self) -> Option<StemState> {
        self.last().map(|f| f.state(self.ds, self.t0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Breakdown { t: f64, report: BreakdownReport },
    PushFailure { t: f64, residual: f64, message: String },
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Breakdown { .. } => "breakdown",
            RunStatus::PushFailure { .. } => "push_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub log: FrameLog,
    pub steps: usize,
    /// Largest per-step push field norm over all steps, logged or not.
    pub max_step_omega_norm: f64,
    pub max_step_measure_mass: f64,
    pub penetration_final: f64,
}

/// Runs a configuration to completion, breakdown or push failure.
pub fn run(cfg: &SimConfig) -> Result<RunOutcome> {
    let mut state = cfg.initial_state()?;
    let t0 = state.t;
    let steps = cfg.step_count(t0);
    let tolerances = cfg.breakdown_tolerances();
    let mut log = FrameLog { ds: cfg.ds, t0, stride: cfg.frame_stride, frames: Vec::new() };
    log.frames.push(Frame::record(&state, 0, None, cfg)?);

    let mut outcome = RunOutcome {
        status: RunStatus::Completed,
        log,
        steps: 0,
        max_step_omega_norm: 0.0,
        max_step_measure_mass: 0.0,
        penetration_final: 0.0,
    };

    let initial = BreakdownReport::evaluate(&state, &cfg.obstacles, &tolerances);
    if initial.is_breakdown {
        outcome.status = RunStatus::Breakdown { t: t0, report: initial };
        return Ok(outcome);
    }

    for k in 1..=steps {
        let (next, info) = match step(&state, cfg) {
            Ok(v) => v,
            Err(err) => {
                let residual = match err {
                    Error::NonConvergence { residual, .. } => residual,
                    _ => f64::NAN,
                };
                outcome.status = RunStatus::PushFailure { t: state.t + cfg.ds, residual, message: err.to_string() };
                break;
            }
        };
        state = next;
        outcome.steps = k;
        outcome.max_step_omega_norm = outcome.max_step_omega_norm.max(info.field.l2_norm(cfg.ds));
        outcome.max_step_measure_mass = outcome.max_step_measure_mass.max(info.measure.mass());

        let report = BreakdownReport::evaluate(&state, &cfg.obstacles, &tolerances);
        let last = k == steps || report.is_breakdown;
        if k % cfg.frame_stride == 0 || last {
            outcome.log.frames.push(Frame::record(&state, k, Some(&info), cfg)?);
        }
        if report.is_breakdown {
            outcome.status = RunStatus::Breakdown { t: state.t, report };
            break;
        }
    }
    if let RunStatus::PushFailure { .. } = outcome.status {
        let logged = outcome.log.last().map_or(0, |f| f.step);
        if logged != outcome.steps {
            outcome.log.frames.push(Frame::record(&state, outcome.steps, None, cfg)?);
        }
    }
    outcome.penetration_final = penetration_depth(&state, &cfg.obstacles);
    Ok(outcome)
}

/// Running `sum_j q_j f_j x (X(s) - P_j)` for targets at every node index up
/// to `count`, where `q` are trapezoid weights over `[0, s]` (or the whole stem
/// for targets past its tip) and `X` is the straight extension of the stem.
fn moment_profile(state: &StemState, f: &[Vec3], count: usize, law: &crate::ElongationLaw) -> Vec<Vec3> {
    let ds = state.ds;
    let last = state.len() - 1;
    let ext = state.extension(law);
    let mut out = Vec::with_capacity(count);
    let mut sum_f = Vec3::ZERO;
    let mut sum_m = Vec3::ZERO;
    for i in 0..count {
        if i <= last {
            out.push(sum_f.cross(state.nodes[i].pos) - sum_m);
            let q = if i == 0 { 0.5 * ds } else { ds };
            sum_f += f[i] * q;
            sum_m += (f[i] * q).cross(state.nodes[i].pos);
        } else {
            // Tip carries half weight on the full-stem rule.
            let tip_excess = f[last] * (0.5 * ds);
            let total_f = sum_f - tip_excess;
            let total_m = sum_m - tip_excess.cross(state.nodes[last].pos);
            let x = ext.eval(i as f64 * ds);
            out.push(total_f.cross(x) - total_m);
        }
    }
    out
}

fn atom_field(state: &StemState, set: &ObstacleSet, atoms: &[Atom], beta: f64) -> Result<Vec<Vec3>> {
    let forces: Vec<(usize, Vec3)> = atoms
        .iter()
        .map(|a| Ok((a.node, set.gradient(state.nodes[a.node].pos)? * a.weight)))
        .collect::<Result<_>>()?;
    Ok(state
        .nodes
        .iter()
        .enumerate()
        .map(|(m, node)| {
            let sum = forces
                .iter()
                .filter(|(j, _)| *j >= m)
                .fold(Vec3::ZERO, |acc, (j, f)| acc + f.cross(state.nodes[*j].pos - node.pos));
            sum * -(-beta * (state.t - node.s)).exp()
        })
        .collect())
}

/// Largest mismatch between logged positions and the integral form of the
/// evolution: initial curve, plus the time integral of the growth velocity,
/// plus the displacements generated by the logged contact measures.
pub fn integral_residual(log: &FrameLog, cfg: &SimConfig) -> Result<f64> {
    if log.stride != 1 {
        return Err(Error::Usage(format!("integral residual needs every frame (stride {})", log.stride)));
    }
    if log.frames.len() <= 1 {
        return Ok(0.0);
    }
    let law = &cfg.params.law;
    let dt = cfg.ds;
    let count = log.frames.iter().map(|f| f.positions.len()).max().unwrap_or(0);
    let states: Vec<StemState> = log.frames.iter().map(|f| f.state(log.ds, log.t0)).collect();

    let growth: Vec<Vec<Vec3>> = states
        .iter()
        .map(|st| moment_profile(st, &kernel_values(st, &cfg.params, &cfg.obstacles), count, law))
        .collect();

    let ext0 = states[0].extension(law);
    let mut predicted: Vec<Vec3> = (0..count).map(|i| ext0.eval(i as f64 * log.ds)).collect();
    let mut worst = 0.0f64;
    for k in 1..states.len() {
        let push = atom_field(&states[k], &cfg.obstacles, &log.frames[k].atoms, cfg.weights.beta)?;
        let reaction = moment_profile(&states[k], &push, count, law);
        for i in 0..count {
            predicted[i] += (growth[k - 1][i] + growth[k][i]) * (0.5 * dt) + reaction[i];
        }
        for (p, x) in predicted.iter().zip(&log.frames[k].positions) {
            worst = worst.max((*p - *x).norm());
        }
    }
    Ok(worst)
}

/// Winding angle of the stem about `center` over each maximal run of nodes
/// within `band` of `obstacle`; returns the largest absolute value.
pub fn wrap_angle(positions: &[Vec3], obstacle: &Obstacle, band: f64) -> f64 {
    let center = match obstacle {
        Obstacle::Sphere { center, .. } => *center,
        Obstacle::HalfSpace { .. } => return 0.0,
    };
    let angle = |p: Vec3| (p.y - center.y).atan2(p.x - center.x);
    let mut best = 0.0f64;
    let mut run = 0.0f64;
    let mut prev: Option<f64> = None;
    for p in positions {
        if obstacle.signed_distance(*p) <= band {
            let a = angle(*p);
            if let Some(b) = prev {
                let mut d = a - b;
                while d > std::f64::consts::PI {
                    d -= std::f64::consts::TAU;
                }
                while d <= -std::f64::consts::PI {
                    d += std::f64::consts::TAU;
                }
                run += d;
            }
            prev = Some(a);
            best = best.max(run.abs());
        } else {
            prev = None;
            run = 0.0;
        }
    }
    best
}
