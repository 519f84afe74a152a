//! Unilateral obstacle constraints.
//!
//! After a growth step the curve may penetrate an obstacle. It is moved back out
//! by a rotation field `omega(sigma)`: every tangent above `sigma` turns by the
//! accumulated angle, and among all such fields the one of least elastic energy
//! is chosen. The reaction is described by a nonnegative contact measure whose
//! atoms sit on the contact set.

mod breakdown;
mod measure;
mod single;
mod solver;
mod volterra;

use serde::{Deserialize, Serialize};

use crate::geom::{cumulative_trapezoid, rotate, Vec3};
use crate::stem::{ElongationLaw, StemState};
use crate::{Error, Result};

pub use breakdown::{check_breakdown, BreakdownReport, BreakdownTolerances};
pub use measure::{
    cone_membership_residual, measure_representation_field, measure_representation_field_nested,
    measure_velocity, ConeFit,
};
pub use single::{
    single_point_field, single_point_multiplier, unit_push_shape, weighted_single_point_field,
    DEFAULT_SINGULARITY_FLOOR,
};
pub use solver::{push_out, weighted_push_out, PushOptions, PushOutcome, PushSolver, PushStep};
pub use volterra::{
    forward_displacement, recover_field_by_fixed_point, recover_field_from_displacement,
};

/// Angular velocity per unit arc length at each node of a stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationField {
    pub values: Vec<Vec3>,
}

impl RotationField {
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![Vec3::ZERO; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|w| *w == Vec3::ZERO)
    }

    /// Trapezoid L2 norm on a grid of spacing `ds`.
    pub fn l2_norm(&self, ds: f64) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|w| w.norm_squared()).collect();
        weighted_sum(&sq, ds).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.values.iter().map(|w| *w * factor).collect())
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &RotationField, factor: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b * factor;
        }
    }

    /// Accumulated rotation angle `int_0^s omega` at every node.
    pub fn prefix(&self, ds: f64) -> Vec<Vec3> {
        cumulative_trapezoid(&self.values, ds)
    }

    fn check_aligned(&self, state: &StemState) -> Result<()> {
        if self.len() != state.len() {
            return Err(Error::Usage(format!(
                "rotation field has {} entries for a stem of {} nodes",
                self.len(),
                state.len()
            )));
        }
        Ok(())
    }
}

/// Nonnegative atoms of the reaction measure, keyed by node index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub node: usize,
    pub weight: f64,
}

impl ContactMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Adds `weight` at `node`, merging with an existing atom there.
    pub fn add(&mut self, node: usize, weight: f64) {
        match self.atoms.binary_search_by_key(&node, |a| a.node) {
            Ok(i) => self.atoms[i].weight += weight,
            Err(i) => self.atoms.insert(i, Atom { node, weight }),
        }
    }

    pub fn weight_at(&self, node: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&node, |a| a.node)
            .map_or(0.0, |i| self.atoms[i].weight)
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().fold(0.0, |acc, a| acc + a.weight)
    }

    pub fn remove_zeros(&mut self) {
        self.atoms.retain(|a| a.weight > 0.0);
    }
}

/// Stiffness profile and the twist/bend split of the elastic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub beta: f64,
    pub c_twist: f64,
    pub c_bend: f64,
}

impl EnergyWeights {
    pub fn new(beta: f64, c_twist: f64, c_bend: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
        }
        if !(c_twist > 0.0) || !c_twist.is_finite() {
            return Err(Error::Config(format!("c_twist must be > 0, got {c_twist}")));
        }
        if !(c_bend > 0.0) || !c_bend.is_finite() {
            return Err(Error::Config(format!("c_bend must be > 0, got {c_bend}")));
        }
        Ok(Self { beta, c_twist, c_bend })
    }

    /// Isotropic energy with unit coefficients.
    pub fn isotropic(beta: f64) -> Self {
        Self { beta, c_twist: 1.0, c_bend: 1.0 }
    }

    pub fn is_isotropic(&self) -> bool {
        self.c_twist == self.c_bend
    }
}

/// Splits `omega` into its components along and across the unit tangent `k`.
pub fn twist_bend(omega: Vec3, k: Vec3) -> (Vec3, Vec3) {
    let twist = k * omega.dot(k);
    (twist, omega - twist)
}

fn weighted_sum(values: &[f64], ds: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            ds * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Elastic energy `1/2 int e^{beta (t - sigma)} w (c_twist |twist|^2 + c_bend |bend|^2)`.
pub fn deformation_energy(
    field: &RotationField,
    t: f64,
    weights: &EnergyWeights,
    state: &StemState,
    law: &ElongationLaw,
) -> Result<f64> {
    field.check_aligned(state)?;
    let density: Vec<f64> = field
        .values
        .iter()
        .zip(&state.nodes)
        .map(|(w, n)| {
            let (twist, bend) = twist_bend(*w, n.tangent);
            let elastic = weights.c_twist * twist.norm_squared() + weights.c_bend * bend.norm_squared();
            (weights.beta * (t - n.s)).exp() * law.weight(t, n.s) * elastic
        })
        .collect();
    Ok(0.5 * weighted_sum(&density, state.ds))
}

/// Energy split into its twist and bend parts, both with unit coefficients.
pub fn energy_components(
    field: &RotationField,
    t: f64,
    beta: f64,
    state: &StemState,
    law: &ElongationLaw,
) -> Result<(f64, f64)> {
    field.check_aligned(state)?;
    let mut twist_density = Vec::with_capacity(state.len());
    let mut bend_density = Vec::with_capacity(state.len());
    for (w, n) in field.values.iter().zip(&state.nodes) {
        let (twist, bend) = twist_bend(*w, n.tangent);
        let f = (beta * (t - n.s)).exp() * law.weight(t, n.s);
        twist_density.push(f * twist.norm_squared());
        bend_density.push(f * bend.norm_squared());
    }
    Ok((
        0.5 * weighted_sum(&twist_density, state.ds),
        0.5 * weighted_sum(&bend_density, state.ds),
    ))
}

/// Turns every tangent by the accumulated angle of `field` and rebuilds positions.
pub fn apply_rotation_field(
    state: &StemState,
    field: &RotationField,
    law: &ElongationLaw,
) -> Result<StemState> {
    field.check_aligned(state)?;
    let mut out = state.clone();
    for (node, angle) in out.nodes.iter_mut().zip(field.prefix(state.ds)) {
        if angle != Vec3::ZERO {
            let k = rotate(angle, node.tangent);
            node.tangent = k.normalized().unwrap_or(k);
        }
    }
    out.rebuild_positions_in_place(law);
    Ok(out)
}

/// First-order change of node positions under [`apply_rotation_field`].
pub fn linear_response(
    state: &StemState,
    field: &RotationField,
    law: &ElongationLaw,
) -> Result<Vec<Vec3>> {
    field.check_aligned(state)?;
    let t = state.t;
    let dk: Vec<Vec3> = field
        .prefix(state.ds)
        .into_iter()
        .zip(&state.nodes)
        .map(|(angle, n)| angle.cross(n.tangent) * law.weight(t, n.s))
        .collect();
    Ok(cumulative_trapezoid(&dk, state.ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn energy_cases() {
        let law = ElongationLaw::INSTANT;
        let st = StemState::straight(Vec3::E1, 0.01, 101).unwrap();
        let zero = RotationField::zeros(st.len());
        assert_eq!(deformation_energy(&zero, 1.0, &EnergyWeights::isotropic(0.0), &st, &law).unwrap(), 0.0);

        let unit = RotationField::new(vec![Vec3::E3; st.len()]);
        let e = deformation_energy(&unit, 1.0, &EnergyWeights::isotropic(0.0), &st, &law).unwrap();
        assert!((e - 0.5).abs() < 1e-12);

        let e = deformation_energy(&unit, 1.0, &EnergyWeights::isotropic(2.0), &st, &law).unwrap();
        let exact = (2.0f64.exp() - 1.0) / 4.0;
        assert!((e - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn energy_weights_split_twist_and_bend() {
        let law = ElongationLaw::INSTANT;
        let st = StemState::straight(Vec3::E1, 0.1, 11).unwrap();
        let twist = RotationField::new(vec![Vec3::E1; st.len()]);
        let w = EnergyWeights::new(0.0, 3.0, 5.0).unwrap();
        let e = deformation_energy(&twist, 1.0, &w, &st, &law).unwrap();
        assert!((e - 1.5).abs() < 1e-12);
        let bend = RotationField::new(vec![Vec3::E2; st.len()]);
        let e = deformation_energy(&bend, 1.0, &w, &st, &law).unwrap();
        assert!((e - 2.5).abs() < 1e-12);
        assert!(EnergyWeights::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn apply_zero_field_is_identity() {
        let law = ElongationLaw::INSTANT;
        let st = StemState::straight(Vec3::new(0.3, 0.4, 0.5), 0.1, 8).unwrap();
        let out = apply_rotation_field(&st, &RotationField::zeros(st.len()), &law).unwrap();
        assert_eq!(out, st);
        assert!(apply_rotation_field(&st, &RotationField::zeros(3), &law).is_err());
    }

    #[test]
    fn constant_field_bends_rod_into_arc() {
        let law = ElongationLaw::INSTANT;
        let n = 201;
        let st = StemState::straight(Vec3::E1, 1.0 / (n - 1) as f64, n).unwrap();
        let theta = FRAC_PI_2;
        let field = RotationField::new(vec![Vec3::new(0.0, 0.0, theta / st.s_last()); n]);
        let out = apply_rotation_field(&st, &field, &law).unwrap();
        let k = out.tip().tangent;
        assert!((k - Vec3::new(theta.cos(), theta.sin(), 0.0)).norm() < 1e-12);
        assert!(out.max_tangent_defect() < 1e-14);
    }

    #[test]
    fn field_supported_above_a_leaves_lower_nodes_fixed() {
        let law = ElongationLaw::INSTANT;
        let st = StemState::straight(Vec3::E1, 0.1, 21).unwrap();
        let values = (0..st.len())
            .map(|i| if i > 10 { Vec3::new(0.0, 0.2, 0.7) } else { Vec3::ZERO })
            .collect();
        let out = apply_rotation_field(&st, &RotationField::new(values), &law).unwrap();
        for i in 0..=10 {
            assert_eq!(out.nodes[i], st.nodes[i]);
        }
        assert_ne!(out.nodes[12], st.nodes[12]);
    }

    #[test]
    fn linear_response_matches_finite_difference() {
        let law = ElongationLaw::new(1.5).unwrap();
        let tangents: Vec<Vec3> = (0..30)
            .map(|i| {
                let a = 0.05 * i as f64;
                Vec3::new(a.cos(), a.sin() * 0.6, a.sin() * 0.8)
            })
            .collect();
        let st = StemState::from_tangents(tangents, 0.05, 2.0, &law).unwrap();
        let field = RotationField::new(
            (0..30).map(|i| Vec3::new(0.3, -0.2 * i as f64 / 30.0, 0.5)).collect(),
        );
        let lin = linear_response(&st, &field, &law).unwrap();
        let h = 1e-6;
        let moved = apply_rotation_field(&st, &field.scaled(h), &law).unwrap();
        for (i, d) in lin.iter().enumerate() {
            let fd = (moved.nodes[i].pos - st.nodes[i].pos) / h;
            assert!((fd - *d).norm() < 1e-5);
        }
    }

    #[test]
    fn measure_merges_atoms() {
        let mut mu = ContactMeasure::empty();
        mu.add(4, 0.5);
        mu.add(2, 1.0);
        mu.add(4, 0.25);
        assert_eq!(mu.atoms.len(), 2);
        assert_eq!(mu.atoms[0].node, 2);
        assert_eq!(mu.weight_at(4), 0.75);
        assert_eq!(mu.mass(), 1.75);
    }
}
