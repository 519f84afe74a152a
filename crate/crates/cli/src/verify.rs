//! Structural invariants checked on a short run.

use tropism_core::geom::rodrigues;
use tropism_core::growth::growth_rotation_field;
use tropism_core::sim::{run, step, SimConfig};
use tropism_core::stem::penetration_depth;
use tropism_core::{BreakdownReport, RotationField};

use crate::output::frames_csv;
use crate::CliError;

pub const ORTHOGONALITY_TOL: f64 = 1e-12;
pub const TANGENT_DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub steps: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

fn worst_rotation_defect(field: &RotationField) -> f64 {
    field.values.iter().map(|w| rodrigues(*w).orthogonality_defect()).fold(0.0, f64::max)
}

/// The configuration cut down to at most `steps` steps.
pub fn shortened(cfg: &SimConfig, steps: usize) -> Result<SimConfig, CliError> {
    let state = cfg.initial_state().map_err(|e| CliError::Config(e.to_string()))?;
    let t0 = cfg.t0_for(&state);
    let mut short = cfg.clone();
    short.t_end = cfg.t_end.min(t0 + steps as f64 * cfg.ds);
    Ok(short)
}

/// Runs up to `steps` steps and checks rotation orthogonality, unit tangents,
/// planarity, per-step feasibility and bitwise determinism.
pub fn verify(cfg: &SimConfig, steps: usize) -> Result<VerifyReport, CliError> {
    let cfg = shortened(cfg, steps)?;
    let mut state = cfg.initial_state().map_err(|e| CliError::Config(e.to_string()))?;
    let planar = state.is_planar()
        && cfg.params.up.z == 0.0
        && cfg.obstacles.obstacles.iter().all(|o| match *o {
            tropism_core::Obstacle::Sphere { center, .. } => center.z == 0.0,
            tropism_core::Obstacle::HalfSpace { point, normal } => point.z == 0.0 && normal.z == 0.0,
        });

    let tolerances = cfg.breakdown_tolerances();
    let total = cfg.step_count(state.t);
    let mut rotation_defect = 0.0f64;
    let mut tangent_drift = state.max_tangent_defect();
    let mut worst_z = 0.0f64;
    let mut worst_penetration = penetration_depth(&state, &cfg.obstacles);
    let mut taken = 0;
    let mut stopped = None;
    for _ in 0..total {
        let growth = growth_rotation_field(&state, &cfg.params, &cfg.obstacles, cfg.ds)
            .map_err(|e| CliError::Config(e.to_string()))?;
        rotation_defect = rotation_defect.max(worst_rotation_defect(&growth));
        let (next, info) = match step(&state, &cfg) {
            Ok(v) => v,
            Err(e) => {
                stopped = Some(format!("push-out failed: {e}"));
                break;
            }
        };
        rotation_defect = rotation_defect.max(worst_rotation_defect(&info.field));
        state = next;
        taken += 1;
        tangent_drift = tangent_drift.max(state.max_tangent_defect());
        worst_z = state.nodes.iter().map(|n| n.pos.z.abs().max(n.tangent.z.abs())).fold(worst_z, f64::max);
        worst_penetration = worst_penetration.max(penetration_depth(&state, &cfg.obstacles));
        if BreakdownReport::evaluate(&state, &cfg.obstacles, &tolerances).is_breakdown {
            stopped = Some(format!("breakdown at t = {}", state.t));
            break;
        }
    }

    let first = run(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let second = run(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let identical = frames_csv(&first.log, &cfg)? == frames_csv(&second.log, &cfg)?;

    let suffix = stopped.map(|s| format!(" (stopped early: {s})")).unwrap_or_default();
    let mut checks = vec![
        Check {
            name: "rotation orthogonality",
            passed: rotation_defect <= ORTHOGONALITY_TOL,
            detail: format!("max |R^T R - I| = {rotation_defect:.3e} (tol {ORTHOGONALITY_TOL:e})"),
        },
        Check {
            name: "unit tangents",
            passed: tangent_drift <= TANGENT_DRIFT_TOL,
            detail: format!("max ||k| - 1| = {tangent_drift:.3e} over {taken} steps{suffix}"),
        },
    ];
    checks.push(Check {
        name: "planarity",
        passed: !planar || worst_z == 0.0,
        detail: if planar {
            format!("max |z| = {worst_z:e}")
        } else {
            "not a planar configuration".to_string()
        },
    });
    checks.push(Check {
        name: "feasibility",
        passed: worst_penetration <= cfg.push_tol,
        detail: format!("max depth = {worst_penetration:.3e} (tol {:e})", cfg.push_tol),
    });
    checks.push(Check {
        name: "determinism",
        passed: identical,
        detail: if identical { "reruns are byte-identical" } else { "reruns differ" }.to_string(),
    });
    Ok(VerifyReport { steps: taken, checks })
}
