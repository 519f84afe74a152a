//! The discretized growing curve.
//!
//! Nodes sit at birth parameters `s_i = i * ds`. Tangents are the primary state;
//! positions are always recomputed from them by cumulative trapezoid
//! integration, so `pos_0` is the origin and the curve stays arc-length
//! consistent by construction.

use serde::{Deserialize, Serialize};

use crate::geom::{cumulative_trapezoid, Vec3};
use crate::obstacle::ObstacleSet;
use crate::{Error, Result};

/// Elongation law `dl = (1 - e^{-alpha (t - s)}) ds`. `alpha = inf` means
/// cells are born at full length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElongationLaw {
    pub alpha: f64,
}

impl ElongationLaw {
    pub const INSTANT: ElongationLaw = ElongationLaw { alpha: f64::INFINITY };

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn is_instant(&self) -> bool {
        self.alpha.is_infinite()
    }

    /// Relative length at time `t` of the cell born at `sigma`.
    #[inline]
    pub fn weight(&self, t: f64, sigma: f64) -> f64 {
        if self.is_instant() {
            1.0
        } else {
            1.0 - (-self.alpha * (t - sigma)).exp()
        }
    }

    /// Total stem length at time `t` (grown from `t = 0`).
    pub fn total_length(&self, t: f64) -> f64 {
        if self.is_instant() {
            t
        } else {
            t - (1.0 - (-self.alpha * t).exp()) / self.alpha
        }
    }
}

impl Default for ElongationLaw {
    fn default() -> Self {
        Self::INSTANT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub s: f64,
    pub pos: Vec3,
    pub tangent: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemState {
    pub t: f64,
    pub t0: f64,
    pub ds: f64,
    pub nodes: Vec<Node>,
}

impl StemState {
    /// Builds a state from tangents at `s_i = i * ds`; positions are integrated.
    pub fn from_tangents(tangents: Vec<Vec3>, ds: f64, t: f64, law: &ElongationLaw) -> Result<Self> {
        if !(ds > 0.0) {
            return Err(Error::Config(format!("ds must be > 0, got {ds}")));
        }
        if tangents.is_empty() {
            return Err(Error::Config("a stem needs at least its root node".into()));
        }
        for (i, k) in tangents.iter().enumerate() {
            if !k.is_finite() || (k.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::Config(format!("tangent {i} is not a unit vector")));
            }
        }
        let nodes = tangents
            .into_iter()
            .enumerate()
            .map(|(i, tangent)| Node { s: i as f64 * ds, pos: Vec3::ZERO, tangent })
            .collect();
        let mut state = StemState { t, t0: t, ds, nodes };
        state.rebuild_positions_in_place(law);
        Ok(state)
    }

    /// A straight stem of `count` nodes along `direction`, with `t = s_last`.
    pub fn straight(direction: Vec3, ds: f64, count: usize) -> Result<Self> {
        let k = direction
            .normalized()
            .ok_or_else(|| Error::Config("zero stem direction".into()))?;
        let t = ds * count.saturating_sub(1) as f64;
        Self::from_tangents(vec![k; count], ds, t, &ElongationLaw::INSTANT)
    }

    /// Resamples a polyline starting at the origin onto nodes `i * ds` by
    /// chord-length interpolation. Tangents are taken from the polyline direction
    /// around each sample and normalized; positions are then rebuilt from them.
    pub fn from_polyline(points: &[Vec3], ds: f64, law: &ElongationLaw) -> Result<Self> {
        if !(ds > 0.0) {
            return Err(Error::Config(format!("ds must be > 0, got {ds}")));
        }
        if points.len() < 2 {
            return Err(Error::Config("initial curve needs at least two points".into()));
        }
        if points[0].norm() > 1e-12 {
            return Err(Error::Config("initial curve must start at the origin".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for w in points.windows(2) {
            let len = (w[1] - w[0]).norm();
            if !(len > 0.0) {
                return Err(Error::Config("initial curve has repeated points".into()));
            }
            cumulative.push(cumulative.last().unwrap() + len);
        }
        let total = *cumulative.last().unwrap();
        let count = (total / ds + 1e-9).floor() as usize + 1;
        let direction_at = |arc: f64| -> Vec3 {
            // Central chord of width ds around the sample, clipped to the curve.
            let lo = (arc - 0.5 * ds).max(0.0);
            let hi = (arc + 0.5 * ds).min(total);
            let chord = point_at(points, &cumulative, hi) - point_at(points, &cumulative, lo);
            chord.normalized().unwrap_or(Vec3::E1)
        };
        let tangents: Vec<Vec3> = (0..count).map(|i| direction_at(i as f64 * ds)).collect();
        let t = (count - 1) as f64 * ds;
        Self::from_tangents(tangents, ds, t, law)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tip(&self) -> &Node {
        self.nodes.last().expect("stem has a root node")
    }

    pub fn s_last(&self) -> f64 {
        self.tip().s
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.pos).collect()
    }

    pub fn tangents(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.tangent).collect()
    }

    pub fn max_tangent_defect(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| (n.tangent.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_planar(&self) -> bool {
        self.nodes.iter().all(|n| n.pos.z == 0.0 && n.tangent.z == 0.0)
    }

    /// Recomputes positions from tangents (see [`rebuild_positions`]).
    pub fn rebuild_positions_in_place(&mut self, law: &ElongationLaw) {
        let t = self.t;
        let integrand: Vec<Vec3> = self
            .nodes
            .iter()
            .map(|n| n.tangent * law.weight(t, n.s))
            .collect();
        let pos = cumulative_trapezoid(&integrand, self.ds);
        for (node, p) in self.nodes.iter_mut().zip(pos) {
            node.pos = p;
        }
    }

    /// Evaluates positions of the stem and its straight continuation past the tip.
    pub fn extension(&self, law: &ElongationLaw) -> ExtendedCurve<'_> {
        extend_beyond_tip(self, law)
    }
}

fn point_at(points: &[Vec3], cumulative: &[f64], arc: f64) -> Vec3 {
    let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&arc).unwrap()) {
        Ok(i) => return points[i],
        Err(i) => i.clamp(1, points.len() - 1),
    };
    let (a, b) = (cumulative[idx - 1], cumulative[idx]);
    let u = ((arc - a) / (b - a)).clamp(0.0, 1.0);
    points[idx - 1] + (points[idx] - points[idx - 1]) * u
}

/// Positions as the trapezoid cumulative integral of `w(t, sigma) k(sigma)`.
pub fn rebuild_positions(state: &StemState, law: &ElongationLaw) -> StemState {
    let mut out = state.clone();
    out.rebuild_positions_in_place(law);
    out
}

/// Appends one node at `s_last + ds` carrying the tip tangent, so the discrete
/// curvature at the tip is zero. Time is not advanced.
pub fn elongate(state: &StemState, law: &ElongationLaw) -> StemState {
    let mut out = state.clone();
    let tip = *out.tip();
    out.nodes.push(Node { s: tip.s + out.ds, pos: tip.pos, tangent: tip.tangent });
    out.rebuild_positions_in_place(law);
    out
}

/// The stem on `[0, s_last]` (linear between nodes) continued by the ray
/// `P(s_last) + (s - s_last) P_s(s_last)`.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedCurve<'a> {
    state: &'a StemState,
    tip_velocity: Vec3,
}

pub fn extend_beyond_tip<'a>(state: &'a StemState, law: &ElongationLaw) -> ExtendedCurve<'a> {
    let tip = state.tip();
    ExtendedCurve { state, tip_velocity: tip.tangent * law.weight(state.t, tip.s) }
}

impl ExtendedCurve<'_> {
    pub fn eval(&self, s: f64) -> Vec3 {
        let nodes = &self.state.nodes;
        let tip = nodes.last().unwrap();
        if s >= tip.s {
            return tip.pos + self.tip_velocity * (s - tip.s);
        }
        if s <= 0.0 {
            return nodes[0].pos + nodes[0].tangent * s;
        }
        let u = s / self.state.ds;
        let i = (u.floor() as usize).min(nodes.len() - 2);
        let frac = u - i as f64;
        nodes[i].pos + (nodes[i + 1].pos - nodes[i].pos) * frac
    }
}

/// Deepest penetrating node and its depth, if any node is inside.
pub fn deepest_node(state: &StemState, set: &ObstacleSet) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in state.nodes.iter().enumerate() {
        let phi = set.signed_distance(n.pos);
        if phi < 0.0 && best.is_none_or(|(_, d)| -phi > d) {
            best = Some((i, -phi));
        }
    }
    best
}

/// Maximum interior depth over nodes; zero when nothing penetrates.
pub fn penetration_depth(state: &StemState, set: &ObstacleSet) -> f64 {
    deepest_node(state, set).map_or(0.0, |(_, d)| d)
}

/// Nodes within `tolerance` of an obstacle boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub indices: Vec<usize>,
    pub tolerance: f64,
}

impl ContactSet {
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn contact_set(state: &StemState, set: &ObstacleSet, tol: f64) -> Result<ContactSet> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("contact tolerance must be > 0, got {tol}")));
    }
    let indices = state
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| set.signed_distance(n.pos).abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    Ok(ContactSet { indices, tolerance: tol })
}
