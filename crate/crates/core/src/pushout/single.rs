use crate::geom::Vec3;
use crate::obstacle::ObstacleSet;
use crate::stem::{ElongationLaw, StemState};
use crate::{Error, Result};

use super::{linear_response, twist_bend, EnergyWeights, RotationField};

/// Smallest admissible value of the multiplier denominator. Below it the
/// obstacle normal is (nearly) parallel to every chord and no rotation field
/// can move the node outward.
pub const DEFAULT_SINGULARITY_FLOOR: f64 = 1e-10;

/// Least-energy field direction for moving node `target` along `normal`:
/// `e^{-beta (t - sigma)} normal x (P(target) - P(sigma))` below the target and
/// zero above it, with twist and bend parts divided by their coefficients.
pub fn unit_push_shape(
    state: &StemState,
    target: usize,
    normal: Vec3,
    weights: &EnergyWeights,
) -> RotationField {
    let tip = state.nodes[target].pos;
    let t = state.t;
    let values = state
        .nodes
        .iter()
        .enumerate()
        .map(|(m, node)| {
            if m >= target {
                return Vec3::ZERO;
            }
            let g = normal.cross(tip - node.pos) * (-weights.beta * (t - node.s)).exp();
            if weights.is_isotropic() {
                g / weights.c_bend
            } else {
                let (twist, bend) = twist_bend(g, node.tangent);
                twist / weights.c_twist + bend / weights.c_bend
            }
        })
        .collect();
    RotationField::new(values)
}

/// Multiplier and shape for one node: `lambda * shape` moves the node by
/// `-phi` along `normal` to first order.
pub(crate) struct SinglePush {
    pub lambda: f64,
    pub shape: RotationField,
}

pub(crate) fn solve_single(
    state: &StemState,
    target: usize,
    phi: f64,
    normal: Vec3,
    weights: &EnergyWeights,
    law: &ElongationLaw,
    floor: f64,
) -> Result<SinglePush> {
    let shape = unit_push_shape(state, target, normal, weights);
    let response = linear_response(state, &shape, law)?;
    let denominator = -normal.dot(response[target]);
    if !(denominator >= floor) {
        return Err(Error::BreakdownProximity { node: target, denominator });
    }
    Ok(SinglePush { lambda: phi / denominator, shape })
}

fn penetrating_node(state: &StemState, set: &ObstacleSet, node: usize) -> Result<(f64, Vec3)> {
    let pos = state
        .nodes
        .get(node)
        .ok_or_else(|| Error::Usage(format!("node {node} is outside the stem")))?
        .pos;
    let phi = set.signed_distance(pos);
    if !(phi < 0.0) {
        return Err(Error::Usage(format!("node {node} does not penetrate (signed distance {phi})")));
    }
    Ok((phi, set.gradient(pos)?))
}

/// Multiplier `lambda <= 0` of the single-constraint push of node `node`.
pub fn single_point_multiplier(
    state: &StemState,
    set: &ObstacleSet,
    node: usize,
    beta: f64,
    law: &ElongationLaw,
) -> Result<f64> {
    let (phi, n) = penetrating_node(state, set, node)?;
    let w = EnergyWeights::isotropic(beta);
    Ok(solve_single(state, node, phi, n, &w, law, DEFAULT_SINGULARITY_FLOOR)?.lambda)
}

/// Least-energy field expelling node `node` to first order.
pub fn single_point_field(
    state: &StemState,
    set: &ObstacleSet,
    node: usize,
    beta: f64,
    law: &ElongationLaw,
) -> Result<RotationField> {
    weighted_single_point_field(state, set, node, &EnergyWeights::isotropic(beta), law)
}

/// As [`single_point_field`] with separate twist and bend stiffness.
pub fn weighted_single_point_field(
    state: &StemState,
    set: &ObstacleSet,
    node: usize,
    weights: &EnergyWeights,
    law: &ElongationLaw,
) -> Result<RotationField> {
    let (phi, n) = penetrating_node(state, set, node)?;
    let push = solve_single(state, node, phi, n, weights, law, DEFAULT_SINGULARITY_FLOOR)?;
    Ok(push.shape.scaled(push.lambda))
}
