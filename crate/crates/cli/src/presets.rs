//! The two golden scenarios: a gravitropic stem meeting one disc, and a
//! clinging vine climbing past two discs.

use tropism_core::obstacle::{Obstacle, ObstacleSet, SensingParams};
use tropism_core::sim::{InitialCurve, SimConfig};
use tropism_core::{ElongationLaw, EnergyWeights, GrowthParams, Vec3};

use crate::config::{DEFAULT_PUSH_MAX_ITER, DEFAULT_PUSH_TOL};
use crate::CliError;

pub const DEFAULT_DS: f64 = 0.05;

pub const PRESET_NAMES: [&str; 5] = ["sim1-left", "sim1-right", "sim2-gamma7", "sim2-gamma4", "sim2-gamma3"];

/// Stem length at the end of the single-disc runs.
const STEM_LENGTH: f64 = 6.0;
/// Vine length at the end of the two-disc runs.
const VINE_LENGTH: f64 = 12.0;

fn disc(x: f64, y: f64, r: f64) -> Obstacle {
    Obstacle::sphere(Vec3::new(x, y, 0.0), r).expect("preset discs are valid")
}

/// Parabola-arc stem, `beta = 0.5`, `kappa = 1`, no clinging, one unit-diameter
/// disc centred at `(center_x, 1.5)`.
pub fn stem_scenario(center_x: f64, ds: f64) -> SimConfig {
    let beta = 0.5;
    let params = GrowthParams::with_up(1.0, beta, SensingParams::disabled(), ElongationLaw::INSTANT, Vec3::E2)
        .expect("preset parameters are valid");
    SimConfig {
        t0: None,
        t_end: STEM_LENGTH,
        ds,
        params,
        weights: EnergyWeights::isotropic(beta),
        obstacles: ObstacleSet::new(vec![disc(center_x, 1.5, 0.5)]),
        initial_curve: InitialCurve::ParabolaArc,
        push_tol: DEFAULT_PUSH_TOL,
        push_max_iter: DEFAULT_PUSH_MAX_ITER,
        frame_stride: 1,
    }
}

/// Vine seeded as a short vertical segment, `beta = 2`, `kappa = 1`,
/// `delta0 = 0.05`, with a small and a large disc in its path.
pub fn vine_scenario(gamma: f64, ds: f64) -> SimConfig {
    let beta = 2.0;
    let sensing = SensingParams::new(gamma, 0.05).expect("preset sensing is valid");
    let params = GrowthParams::with_up(1.0, beta, sensing, ElongationLaw::INSTANT, Vec3::E2)
        .expect("preset parameters are valid");
    SimConfig {
        t0: None,
        t_end: VINE_LENGTH,
        ds,
        params,
        weights: EnergyWeights::isotropic(beta),
        obstacles: ObstacleSet::new(vec![disc(0.1, 1.5, 0.5), disc(0.6, 4.0, 1.0)]),
        initial_curve: InitialCurve::VerticalSegment { length: 10.0 * ds },
        push_tol: DEFAULT_PUSH_TOL,
        push_max_iter: DEFAULT_PUSH_MAX_ITER,
        frame_stride: 1,
    }
}

pub fn preset(name: &str, ds: f64) -> Result<SimConfig, CliError> {
    match name {
        "sim1-left" => Ok(stem_scenario(1.2, ds)),
        "sim1-right" => Ok(stem_scenario(1.25, ds)),
        "sim2-gamma7" => Ok(vine_scenario(7.0, ds)),
        "sim2-gamma4" => Ok(vine_scenario(4.0, ds)),
        "sim2-gamma3" => Ok(vine_scenario(3.0, ds)),
        other => Err(CliError::Usage(format!(
            "unknown preset {other:?}; expected one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}
