use serde::{Deserialize, Serialize};

use crate::obstacle::ObstacleSet;
use crate::stem::StemState;

/// Detection bands for the breakdown configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTolerances {
    /// Largest angle (radians) between the tip tangent and the inward normal.
    pub angle: f64,
    /// Largest discrete curvature allowed on free segments.
    pub curvature: f64,
    /// Distance within which a node counts as touching.
    pub distance: f64,
}

impl BreakdownTolerances {
    pub fn for_grid(ds: f64) -> Self {
        Self { angle: 1e-2, curvature: 1e-3 / ds, distance: 1e-6 }
    }
}

/// The tip touches an obstacle head-on and the stem is straight wherever it is
/// free. From such a configuration no rotation field can push the tip out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub is_breakdown: bool,
    pub tip_on_boundary: bool,
    pub tip_perpendicular: bool,
    pub straight_off_contact: bool,
    /// Angle between the tip tangent and the inward normal (radians; pi when undefined).
    pub angle_defect: f64,
    pub max_off_contact_curvature: f64,
}

pub fn check_breakdown(
    state: &StemState,
    set: &ObstacleSet,
    tol_angle: f64,
    tol_curv: f64,
    tol_dist: f64,
) -> BreakdownReport {
    let tip = state.tip();
    let tip_on_boundary = !set.is_empty() && set.signed_distance(tip.pos).abs() <= tol_dist;
    let angle_defect = match set.gradient(tip.pos) {
        Ok(n) => (-n.dot(tip.tangent)).clamp(-1.0, 1.0).acos(),
        Err(_) => std::f64::consts::PI,
    };
    let tip_perpendicular = angle_defect <= tol_angle;

    let touching: Vec<bool> = state
        .nodes
        .iter()
        .map(|n| set.signed_distance(n.pos).abs() <= tol_dist)
        .collect();
    let max_off_contact_curvature = state
        .nodes
        .windows(2)
        .enumerate()
        .filter(|(i, _)| !touching[*i] && !touching[*i + 1])
        .map(|(_, w)| (w[1].tangent - w[0].tangent).norm() / state.ds)
        .fold(0.0f64, f64::max);
    let straight_off_contact = max_off_contact_curvature <= tol_curv;

    BreakdownReport {
        is_breakdown: tip_on_boundary && tip_perpendicular && straight_off_contact,
        tip_on_boundary,
        tip_perpendicular,
        straight_off_contact,
        angle_defect,
        max_off_contact_curvature,
    }
}

impl BreakdownReport {
    pub fn evaluate(state: &StemState, set: &ObstacleSet, tol: &BreakdownTolerances) -> Self {
        check_breakdown(state, set, tol.angle, tol.curvature, tol.distance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::obstacle::Obstacle;
    use crate::stem::ElongationLaw;

    #[test]
    fn free_stem_is_not_breakdown() {
        let st = StemState::straight(Vec3::E3, 0.1, 11).unwrap();
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::new(5.0, 0.0, 0.0), 1.0).unwrap()]);
        let r = check_breakdown(&st, &set, 1e-2, 1e-2, 1e-6);
        assert!(!r.is_breakdown);
        assert!(!r.tip_on_boundary);
        assert!(r.straight_off_contact);
    }

    #[test]
    fn head_on_tip_is_breakdown() {
        let st = StemState::straight(Vec3::E3, 0.1, 11).unwrap();
        let set = ObstacleSet::new(vec![Obstacle::half_space(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)).unwrap()]);
        let r = check_breakdown(&st, &set, 1e-2, 1e-2, 1e-6);
        assert!(r.tip_on_boundary && r.tip_perpendicular && r.straight_off_contact);
        assert!(r.is_breakdown);
        assert!(r.angle_defect < 1e-12);
    }

    #[test]
    fn curved_free_arc_prevents_breakdown() {
        // Arc bending toward +x, ending on a wall it meets perpendicularly.
        let ds = 0.05;
        let count = 41;
        let tangents: Vec<Vec3> = (0..count)
            .map(|i| {
                let a = (0.5 * ds * i as f64).min(1.0);
                Vec3::new(a.sin(), a.cos(), 0.0)
            })
            .collect();
        let st = StemState::from_tangents(tangents, ds, 2.0, &ElongationLaw::INSTANT).unwrap();
        let tip = st.tip();
        let set = ObstacleSet::new(vec![Obstacle::half_space(tip.pos, -tip.tangent).unwrap()]);
        let tol = BreakdownTolerances::for_grid(ds);
        let r = BreakdownReport::evaluate(&st, &set, &tol);
        assert!(r.tip_on_boundary && r.tip_perpendicular);
        assert!(!r.straight_off_contact);
        assert!(!r.is_breakdown);
        assert!(r.max_off_contact_curvature > 0.4);
    }
}
