//! The smooth part of the dynamics: gravitropism plus obstacle clinging.
//!
//! Every cell born at `sigma` rotates the part of the stem above it with angular
//! velocity `Psi(t, sigma)`. The explicit step freezes the kernel at the current
//! time and turns each tangent by the accumulated angle `dt * int_0^s Psi`.

use serde::{Deserialize, Serialize};

use crate::geom::{cumulative_trapezoid, rotate, Vec3};
use crate::obstacle::{eta_prime, ObstacleSet, SensingParams};
use crate::pushout::RotationField;
use crate::stem::{ElongationLaw, StemState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    /// Gravity response strength.
    pub kappa: f64,
    /// Stiffening rate of older tissue.
    pub beta: f64,
    pub sensing: SensingParams,
    pub law: ElongationLaw,
    /// Direction opposing gravity. Planar runs in the `z = 0` plane use `E2`.
    pub up: Vec3,
}

impl GrowthParams {
    pub fn new(kappa: f64, beta: f64, sensing: SensingParams, law: ElongationLaw) -> Result<Self> {
        Self::with_up(kappa, beta, sensing, law, Vec3::E3)
    }

    pub fn with_up(kappa: f64, beta: f64, sensing: SensingParams, law: ElongationLaw, up: Vec3) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be >= 0, got {kappa}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
        }
        let up = up
            .normalized()
            .ok_or_else(|| Error::Config("up direction must be nonzero".into()))?;
        Ok(Self { kappa, beta, sensing, law, up })
    }

    /// Pure gravitropism with instant elongation and `up = E3`.
    pub fn gravity_only(kappa: f64, beta: f64) -> Self {
        Self {
            kappa,
            beta,
            sensing: SensingParams::disabled(),
            law: ElongationLaw::INSTANT,
            up: Vec3::E3,
        }
    }

    /// Stiffness factor times the elongation weight.
    #[inline]
    pub fn age_factor(&self, t: f64, sigma: f64) -> f64 {
        (-self.beta * (t - sigma)).exp() * self.law.weight(t, sigma)
    }
}

/// Gradient of the sensing potential, tolerant of the small penetrations left by
/// the push-out tolerance and zero at points where the union's gradient is
/// undefined.
pub fn sensing_gradient(set: &ObstacleSet, x: Vec3, p: &SensingParams) -> Vec3 {
    if p.gamma == 0.0 || set.is_empty() {
        return Vec3::ZERO;
    }
    let d = set.signed_distance(x);
    if d >= p.delta0 {
        return Vec3::ZERO;
    }
    match set.gradient(x) {
        Ok(n) => n * eta_prime(d.max(0.0), p),
        Err(_) => Vec3::ZERO,
    }
}

pub fn psi_kernel(
    t: f64,
    sigma: f64,
    pos: Vec3,
    tangent: Vec3,
    params: &GrowthParams,
    set: &ObstacleSet,
) -> Vec3 {
    let gravity = tangent.cross(params.up) * params.kappa;
    let clinging = sensing_gradient(set, pos, &params.sensing).cross(tangent);
    (gravity + clinging) * params.age_factor(t, sigma)
}

pub(crate) fn kernel_values(state: &StemState, params: &GrowthParams, set: &ObstacleSet) -> Vec<Vec3> {
    state
        .nodes
        .iter()
        .map(|n| {
            if n.s <= state.t {
                psi_kernel(state.t, n.s, n.pos, n.tangent, params, set)
            } else {
                Vec3::ZERO
            }
        })
        .collect()
}

/// Accumulated rotation `dt * int_0^{s} Psi` at every node.
pub fn growth_rotation_field(
    state: &StemState,
    params: &GrowthParams,
    set: &ObstacleSet,
    dt: f64,
) -> Result<RotationField> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("dt must be > 0, got {dt}")));
    }
    let prefix = cumulative_trapezoid(&kernel_values(state, params, set), state.ds);
    Ok(RotationField::new(prefix.into_iter().map(|v| v * dt).collect()))
}

/// One explicit growth step: rotate tangents, rebuild positions, advance time.
pub fn apply_growth_step(
    state: &StemState,
    params: &GrowthParams,
    set: &ObstacleSet,
    dt: f64,
) -> Result<StemState> {
    let field = growth_rotation_field(state, params, set, dt)?;
    let mut out = state.clone();
    for (node, omega) in out.nodes.iter_mut().zip(&field.values) {
        let k = rotate(*omega, node.tangent);
        node.tangent = k.normalized().unwrap_or(k);
    }
    out.t += dt;
    out.rebuild_positions_in_place(&params.law);
    Ok(out)
}

fn perp(k: Vec3) -> Vec3 {
    Vec3::new(-k.y, k.x, 0.0)
}

/// Largest gap between the planar scalar form of the tangent velocity and the
/// velocity induced by [`psi_kernel`]. The planar form measures gravity along
/// the in-plane `y` axis, so the kernel is evaluated with `up = E2`.
pub fn planar_consistency_check(
    state: &StemState,
    params: &GrowthParams,
    set: &ObstacleSet,
) -> Result<f64> {
    if !state.is_planar() {
        return Err(Error::Usage("planar consistency check needs a state in the z = 0 plane".into()));
    }
    let planar = GrowthParams { up: Vec3::E2, ..*params };
    let t = state.t;

    let kernel = kernel_values(state, &planar, set);
    let angular = cumulative_trapezoid(&kernel, state.ds);

    let scalar: Vec<f64> = state
        .nodes
        .iter()
        .map(|n| {
            if n.s > t {
                return 0.0;
            }
            let k = n.tangent;
            let g = sensing_gradient(set, n.pos, &planar.sensing);
            planar.age_factor(t, n.s) * (planar.kappa * k.x - g.dot(perp(k)))
        })
        .collect();
    let rate = cumulative_trapezoid(&scalar, state.ds);

    Ok(state
        .nodes
        .iter()
        .zip(angular.iter().zip(&rate))
        .map(|(n, (w, a))| (w.cross(n.tangent) - perp(n.tangent) * *a).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::Obstacle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn horizontal(count: usize, ds: f64) -> StemState {
        StemState::straight(Vec3::E1, ds, count).unwrap()
    }

    #[test]
    fn kernel_cases() {
        let set = ObstacleSet::empty();
        let p = GrowthParams::gravity_only(1.0, 0.0);
        assert_eq!(psi_kernel(1.0, 0.0, Vec3::ZERO, Vec3::E3, &p, &set), Vec3::ZERO);
        let v = psi_kernel(1.0, 0.0, Vec3::ZERO, Vec3::E1, &p, &set);
        assert!((v - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        let p = GrowthParams::gravity_only(1.0, 0.5);
        let v = psi_kernel(3.0, 1.0, Vec3::ZERO, Vec3::E1, &p, &set);
        assert!((v - Vec3::new(0.0, -(-1.0f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn finite_alpha_scales_kernel() {
        let set = ObstacleSet::empty();
        let mut p = GrowthParams::gravity_only(1.0, 0.5);
        p.law = ElongationLaw::new(2.0).unwrap();
        let v = psi_kernel(3.0, 1.0, Vec3::ZERO, Vec3::E1, &p, &set);
        let expected = (-1.0f64).exp() * (1.0 - (-4.0f64).exp());
        assert!((v.y + expected).abs() < 1e-15);
    }

    #[test]
    fn clinging_term_uses_distance_gradient() {
        // Half-space x >= 1 is free; the stem point sits 0.01 outside it.
        let set = ObstacleSet::new(vec![Obstacle::half_space(Vec3::new(0.99, 0.0, 0.0), Vec3::E1).unwrap()]);
        let mut p = GrowthParams::gravity_only(0.0, 0.0);
        p.sensing = SensingParams::new(7.0, 0.05).unwrap();
        let v = psi_kernel(1.0, 0.0, Vec3::new(1.0, 0.0, 0.0), Vec3::E3, &p, &set);
        let expected = Vec3::E1.cross(Vec3::E3) * (7.0 * (-0.01f64).exp());
        assert!((v - expected).norm() < 1e-12);
        let far = psi_kernel(1.0, 0.0, Vec3::new(1.5, 0.0, 0.0), Vec3::E3, &p, &set);
        assert_eq!(far, Vec3::ZERO);
    }

    #[test]
    fn rotation_field_cases() {
        let set = ObstacleSet::empty();
        let p = GrowthParams::gravity_only(1.0, 0.0);
        let vertical = StemState::straight(Vec3::E3, 0.1, 11).unwrap();
        let f = growth_rotation_field(&vertical, &p, &set, 0.1).unwrap();
        assert!(f.values.iter().all(|w| *w == Vec3::ZERO));

        let st = horizontal(11, 0.1);
        let dt = 0.05;
        let f = growth_rotation_field(&st, &p, &set, dt).unwrap();
        assert_eq!(f.values[0], Vec3::ZERO);
        for (n, w) in st.nodes.iter().zip(&f.values) {
            assert!((*w - Vec3::new(0.0, -dt * n.s, 0.0)).norm() < 1e-14);
        }
        assert!(growth_rotation_field(&st, &p, &set, 0.0).is_err());
    }

    #[test]
    fn growth_step_bends_horizontal_stem_up() {
        let set = ObstacleSet::empty();
        let p = GrowthParams::gravity_only(1.0, 0.0);
        let st = horizontal(11, 0.1);
        let dt = 0.05;
        let next = apply_growth_step(&st, &p, &set, dt).unwrap();
        for (n, m) in st.nodes.iter().zip(&next.nodes) {
            // Rotation by angle dt*s about -y tilts (1,0,0) to (cos, 0, sin).
            let a = dt * n.s;
            assert!((m.tangent - Vec3::new(a.cos(), 0.0, a.sin())).norm() < 1e-14);
        }
        assert!(next.tip().tangent.z > st.tip().tangent.z);
        assert_eq!(next.nodes[0].tangent, st.nodes[0].tangent);
        assert!((next.t - st.t - dt).abs() < 1e-15);
        assert!(next.max_tangent_defect() < 1e-12);
    }

    #[test]
    fn equilibria_and_disabled_dynamics() {
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::new(5.0, 0.0, 0.0), 1.0).unwrap()]);
        let mut p = GrowthParams::gravity_only(1.0, 0.5);
        p.sensing = SensingParams::new(7.0, 0.05).unwrap();
        let vertical = StemState::straight(Vec3::E3, 0.1, 11).unwrap();
        let next = apply_growth_step(&vertical, &p, &set, 0.1).unwrap();
        assert_eq!(next.nodes, vertical.nodes);
        assert!((next.t - vertical.t - 0.1).abs() < 1e-15);

        let still = GrowthParams::gravity_only(0.0, 0.5);
        let st = horizontal(6, 0.1);
        let next = apply_growth_step(&st, &still, &set, 0.1).unwrap();
        assert_eq!(next.tangents(), st.tangents());
    }

    #[test]
    fn gravity_reduces_inclination_everywhere_but_root() {
        let set = ObstacleSet::empty();
        let p = GrowthParams::gravity_only(1.0, 0.3);
        let k = Vec3::new(1.0, 0.5, 0.3).normalized().unwrap();
        let st = StemState::straight(k, 0.1, 20).unwrap();
        let next = apply_growth_step(&st, &p, &set, 0.05).unwrap();
        for (a, b) in st.nodes.iter().zip(&next.nodes).skip(1) {
            assert!(b.tangent.z > a.tangent.z);
        }
    }

    #[test]
    fn planar_states_stay_planar_and_consistent() {
        let set = ObstacleSet::new(vec![
            Obstacle::sphere(Vec3::new(0.1, 1.5, 0.0), 0.5).unwrap(),
            Obstacle::sphere(Vec3::new(0.6, 4.0, 0.0), 1.0).unwrap(),
        ]);
        let sensing = SensingParams::new(7.0, 0.5).unwrap();
        let p = GrowthParams::with_up(1.0, 2.0, sensing, ElongationLaw::INSTANT, Vec3::E2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut angle = 1.4f64;
        let tangents: Vec<Vec3> = (0..50)
            .map(|_| {
                angle += rng.gen_range(-0.1..0.1);
                Vec3::new(angle.cos(), angle.sin(), 0.0)
            })
            .collect();
        let st = StemState::from_tangents(tangents, 0.05, 2.45, &ElongationLaw::INSTANT).unwrap();
        assert!(planar_consistency_check(&st, &p, &set).unwrap() <= 1e-10);
        let next = apply_growth_step(&st, &p, &set, 0.05).unwrap();
        assert!(next.is_planar());

        let vertical = StemState::straight(Vec3::E2, 0.05, 30).unwrap();
        assert!(planar_consistency_check(&vertical, &GrowthParams::gravity_only(1.0, 2.0), &ObstacleSet::empty()).unwrap() == 0.0);

        let bent = StemState::straight(Vec3::new(0.0, 0.6, 0.8), 0.1, 3).unwrap();
        assert!(planar_consistency_check(&bent, &p, &set).is_err());
    }
}
