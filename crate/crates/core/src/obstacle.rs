//! Obstacles as signed distance fields, plus the sensing field that lets a vine
//! feel an obstacle within a short range.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::{Error, Result};

/// Two members whose distances differ by less than this are considered tied.
pub const TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Obstacle {
    /// Ball (a disc when evaluated in the z = 0 plane).
    Sphere { center: Vec3, radius: f64 },
    /// The region behind a plane; `normal` is the outward unit normal.
    HalfSpace { point: Vec3, normal: Vec3 },
}

impl Obstacle {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Obstacle::Sphere { center, radius })
    }

    pub fn half_space(point: Vec3, normal: Vec3) -> Result<Self> {
        if !point.is_finite() || (normal.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("half-space normal must be a unit vector".into()));
        }
        Ok(Obstacle::HalfSpace { point, normal })
    }

    pub fn signed_distance(&self, x: Vec3) -> f64 {
        match *self {
            Obstacle::Sphere { center, radius } => (x - center).norm() - radius,
            Obstacle::HalfSpace { point, normal } => (x - point).dot(normal),
        }
    }

    pub fn gradient(&self, x: Vec3) -> Result<Vec3> {
        match *self {
            Obstacle::Sphere { center, .. } => (x - center).normalized().ok_or(
                Error::DegenerateGradient { x: x.x, y: x.y, z: x.z },
            ),
            Obstacle::HalfSpace { normal, .. } => Ok(normal),
        }
    }
}

/// A union of obstacles. Its signed distance is the pointwise minimum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleSet {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Self { obstacles }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Nearest member and its signed distance; ties go to the lowest index.
    /// `None` for the empty set.
    pub fn nearest(&self, x: Vec3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.obstacles.iter().enumerate() {
            let d = o.signed_distance(x);
            match best {
                Some((_, bd)) if d >= bd => {}
                _ => best = Some((i, d)),
            }
        }
        best
    }

    /// Signed distance; `+inf` when there are no obstacles.
    pub fn signed_distance(&self, x: Vec3) -> f64 {
        self.nearest(x).map_or(f64::INFINITY, |(_, d)| d)
    }

    /// Gradient of the signed distance (outward normal on the boundary).
    pub fn gradient(&self, x: Vec3) -> Result<Vec3> {
        let Some((idx, d)) = self.nearest(x) else {
            return Err(Error::Usage("gradient of an empty obstacle set".into()));
        };
        let tied = self
            .obstacles
            .iter()
            .enumerate()
            .any(|(i, o)| i != idx && (o.signed_distance(x) - d).abs() <= TIE_BAND);
        if tied {
            return Err(Error::DegenerateGradient { x: x.x, y: x.y, z: x.z });
        }
        self.obstacles[idx].gradient(x)
    }
}

/// Response strength `gamma` and sensing range `delta0` of the clinging field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingParams {
    pub gamma: f64,
    pub delta0: f64,
}

impl SensingParams {
    pub fn new(gamma: f64, delta0: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(delta0 > 0.0) || !delta0.is_finite() {
            return Err(Error::Config(format!("delta0 must be > 0, got {delta0}")));
        }
        Ok(Self { gamma, delta0 })
    }

    /// Clinging disabled.
    pub fn disabled() -> Self {
        Self { gamma: 0.0, delta0: 0.05 }
    }
}

/// `eta(d) = gamma (1 - e^{-d})` below `delta0`, frozen at its value at `delta0` beyond.
///
/// The clamp matches values but not slopes: `eta'` drops from `gamma e^{-delta0}`
/// to zero at `delta0`, so this eta is only Lipschitz there, not smooth.
pub fn eta(d: f64, p: &SensingParams) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Usage(format!("eta is defined for d >= 0, got {d}")));
    }
    Ok(p.gamma * (1.0 - (-d.min(p.delta0)).exp()))
}

/// Derivative of [`eta`], taking the one-sided value 0 at and beyond `delta0`.
pub fn eta_prime(d: f64, p: &SensingParams) -> f64 {
    if d < p.delta0 {
        p.gamma * (-d.max(0.0)).exp()
    } else {
        0.0
    }
}

/// Gradient of `psi(x) = eta(dist(x, Omega))` for `x` outside the obstacles.
pub fn psi_gradient(set: &ObstacleSet, x: Vec3, p: &SensingParams) -> Result<Vec3> {
    if p.gamma == 0.0 || set.is_empty() {
        return Ok(Vec3::ZERO);
    }
    let d = set.signed_distance(x);
    if d < 0.0 {
        return Err(Error::Usage(format!("sensing field evaluated inside an obstacle (depth {})", -d)));
    }
    if d >= p.delta0 {
        return Ok(Vec3::ZERO);
    }
    Ok(set.gradient(x)? * eta_prime(d, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sim2_layout() -> ObstacleSet {
        ObstacleSet::new(vec![
            Obstacle::sphere(Vec3::new(0.1, 1.5, 0.0), 0.5).unwrap(),
            Obstacle::sphere(Vec3::new(0.6, 4.0, 0.0), 1.0).unwrap(),
        ])
    }

    fn fd_gradient(f: impl Fn(Vec3) -> f64, x: Vec3, h: f64) -> Vec3 {
        let d = |e: Vec3| (f(x + e * h) - f(x - e * h)) / (2.0 * h);
        Vec3::new(d(Vec3::E1), d(Vec3::E2), d(Vec3::E3))
    }

    #[test]
    fn sphere_distances() {
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::ZERO, 0.5).unwrap()]);
        assert_eq!(set.signed_distance(Vec3::E1), 0.5);
        assert_eq!(set.signed_distance(Vec3::new(0.25, 0.0, 0.0)), -0.25);
        assert_eq!(set.gradient(Vec3::E1).unwrap(), Vec3::E1);
    }

    #[test]
    fn union_distance_is_member_minimum() {
        let set = sim2_layout();
        let small = (0.1f64.powi(2) + 1.5f64.powi(2)).sqrt() - 0.5;
        let big = (0.6f64.powi(2) + 4.0f64.powi(2)).sqrt() - 1.0;
        assert_eq!(set.signed_distance(Vec3::ZERO), small.min(big));
    }

    #[test]
    fn union_gradient_matches_finite_differences() {
        let set = sim2_layout();
        let x = Vec3::new(0.1, 0.9, 0.0);
        let g = set.gradient(x).unwrap();
        assert!((g - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        let fd = fd_gradient(|p| set.signed_distance(p), x, 1e-6);
        assert!((g - fd).norm() < 1e-8);
    }

    #[test]
    fn half_space_has_constant_normal() {
        let set = ObstacleSet::new(vec![Obstacle::half_space(Vec3::ZERO, Vec3::E3).unwrap()]);
        for x in [Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.0, 0.0, -1.0)] {
            assert_eq!(set.gradient(x).unwrap(), Vec3::E3);
        }
    }

    #[test]
    fn empty_set_is_infinitely_far() {
        assert_eq!(ObstacleSet::empty().signed_distance(Vec3::E1), f64::INFINITY);
    }

    #[test]
    fn degenerate_gradients() {
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::ZERO, 1.0).unwrap()]);
        assert!(matches!(set.gradient(Vec3::ZERO), Err(Error::DegenerateGradient { .. })));
        let twin = ObstacleSet::new(vec![
            Obstacle::sphere(Vec3::new(-2.0, 0.0, 0.0), 1.0).unwrap(),
            Obstacle::sphere(Vec3::new(2.0, 0.0, 0.0), 1.0).unwrap(),
        ]);
        let mid = Vec3::new(0.0, 0.3, 0.0);
        assert!(twin.signed_distance(mid).is_finite());
        assert!(matches!(twin.gradient(mid), Err(Error::DegenerateGradient { .. })));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Obstacle::sphere(Vec3::ZERO, 0.0).is_err());
        assert!(Obstacle::half_space(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)).is_err());
        assert!(SensingParams::new(-1.0, 0.05).is_err());
        assert!(SensingParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn eta_values() {
        let p = SensingParams::new(7.0, 0.05).unwrap();
        assert_eq!(eta(0.0, &p).unwrap(), 0.0);
        let expected = 7.0 * (1.0 - (-0.05f64).exp());
        assert!((eta(0.1, &p).unwrap() - expected).abs() < 1e-15);
        assert!(eta(-0.1, &p).is_err());
        let off = SensingParams::new(0.0, 0.05).unwrap();
        assert_eq!(eta(0.02, &off).unwrap(), 0.0);
    }

    #[test]
    fn psi_gradient_cases() {
        let p = SensingParams::new(7.0, 0.05).unwrap();
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::ZERO, 0.5).unwrap()]);
        assert_eq!(psi_gradient(&set, Vec3::new(0.6, 0.0, 0.0), &p).unwrap(), Vec3::ZERO);

        let x = Vec3::new(0.3, 0.4, 0.01).normalized().unwrap() * 0.52;
        let g = psi_gradient(&set, x, &p).unwrap();
        let d = set.signed_distance(x);
        let radial = x.normalized().unwrap();
        assert!((g - radial * (7.0 * (-d).exp())).norm() < 1e-12);
        let fd = fd_gradient(|y| eta(set.signed_distance(y), &p).unwrap(), x, 1e-6);
        assert!((g - fd).norm() < 1e-7);

        let off = SensingParams::new(0.0, 0.05).unwrap();
        assert_eq!(psi_gradient(&set, x, &off).unwrap(), Vec3::ZERO);
    }

    proptest! {
        #[test]
        fn eikonal_and_lipschitz(
            a in (-3.0..3.0f64, -1.0..6.0f64, -1.0..1.0f64),
            b in (-3.0..3.0f64, -1.0..6.0f64, -1.0..1.0f64),
        ) {
            let set = sim2_layout();
            let x = Vec3::new(a.0, a.1, a.2);
            let y = Vec3::new(b.0, b.1, b.2);
            if let Ok(g) = set.gradient(x) {
                prop_assert!((g.norm() - 1.0).abs() < 1e-10);
            }
            let lhs = (set.signed_distance(x) - set.signed_distance(y)).abs();
            prop_assert!(lhs <= (x - y).norm() + 1e-12);
        }

        #[test]
        fn psi_gradient_vanishes_out_of_range(r in 0.55..5.0f64, th in 0.0..6.0f64) {
            let p = SensingParams::new(4.0, 0.05).unwrap();
            let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::ZERO, 0.5).unwrap()]);
            let x = Vec3::new(r * th.cos(), r * th.sin(), 0.0);
            prop_assert_eq!(psi_gradient(&set, x, &p).unwrap(), Vec3::ZERO);
        }
    }
}
