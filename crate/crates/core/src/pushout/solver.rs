use serde::{Deserialize, Serialize};

use crate::obstacle::ObstacleSet;
use crate::stem::{ElongationLaw, StemState};
use crate::{Error, Result};

use crate::geom::{left_jacobian_transpose, Vec3};

use super::measure::solve_dense;
use super::single::DEFAULT_SINGULARITY_FLOOR;
use super::{apply_rotation_field, ContactMeasure, EnergyWeights, RotationField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushOptions {
    /// Allowed residual depth, also the band within which an atom counts as touching.
    pub tol: f64,
    pub max_iter: usize,
    pub singularity_floor: f64,
}

impl PushOptions {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Usage(format!("push tolerance must be > 0, got {tol}")));
        }
        Ok(Self { tol, max_iter, singularity_floor: DEFAULT_SINGULARITY_FLOOR })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushOutcome {
    pub state: StemState,
    pub measure: ContactMeasure,
    pub field: RotationField,
    pub iterations: usize,
}

/// What a single solver iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PushStep {
    /// The curve is feasible, every atom touches, and the field is stationary.
    Converged,
    /// The field was replaced; `active` nodes carry weight and `change` is the
    /// L2 norm of the update.
    Corrected { active: usize, change: f64 },
}

/// Least-energy expulsion of a stem from the obstacles.
///
/// Minimizes the elastic energy of the rotation field subject to every node
/// staying outside, by sequential quadratic programming: each iteration
/// linearizes the signed distances of the nodes that are inside, touching, or
/// loaded around the current field, and solves the resulting quadratic
/// program exactly through its complementarity problem. The new field is the
/// energy-dual image of the loaded constraint gradients, so at convergence the
/// weights are the multipliers of a stationary point. The curve is always the
/// pre-push curve rotated by the field, so the returned state is exactly
/// `apply_rotation_field(pre, field)`.
pub struct PushSolver<'a> {
    pre: StemState,
    set: &'a ObstacleSet,
    law: ElongationLaw,
    opts: PushOptions,
    /// Inverse energy density at each node, split along and across the pre-push tangent.
    compliance: Vec<(f64, f64)>,
    field: RotationField,
    measure: ContactMeasure,
    current: StemState,
    phi: Vec<f64>,
    change: f64,
    iterations: usize,
}

/// Linearized constraints on a candidate set of nodes.
struct Linearization {
    nodes: Vec<usize>,
    /// Energy-dual images of the constraint gradients.
    shapes: Vec<Vec<Vec3>>,
    /// Gram matrix of the gradients in the inverse energy metric.
    coupling: Vec<Vec<f64>>,
    /// Signed distances with the current field removed, to first order.
    base: Vec<f64>,
}

impl<'a> PushSolver<'a> {
    pub fn new(
        state: &StemState,
        set: &'a ObstacleSet,
        law: &ElongationLaw,
        weights: &EnergyWeights,
        opts: PushOptions,
    ) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::Usage(format!("push tolerance must be > 0, got {}", opts.tol)));
        }
        let n = state.len();
        let compliance = state
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let q = if i == 0 || i + 1 == n { 0.5 * state.ds } else { state.ds };
                let density = q * (weights.beta * (state.t - node.s)).exp() * law.weight(state.t, node.s);
                if density > 0.0 {
                    (1.0 / (density * weights.c_twist), 1.0 / (density * weights.c_bend))
                } else {
                    (0.0, 0.0)
                }
            })
            .collect();
        let phi = signed_distances(state, set);
        Ok(Self {
            pre: state.clone(),
            set,
            law: *law,
            opts,
            compliance,
            field: RotationField::zeros(n),
            measure: ContactMeasure::empty(),
            current: state.clone(),
            phi,
            change: 0.0,
            iterations: 0,
        })
    }

    pub fn current(&self) -> &StemState {
        &self.current
    }

    pub fn field(&self) -> &RotationField {
        &self.field
    }

    pub fn measure(&self) -> &ContactMeasure {
        &self.measure
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn penetration(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |m, &p| m.max(-p))
    }

    fn is_converged(&self) -> bool {
        let tol = self.opts.tol;
        self.change <= tol
            && self.phi.iter().all(|&p| p >= -tol)
            && self.measure.atoms.iter().all(|a| self.phi[a.node] <= tol)
    }

    /// Gradient of the signed distance of `node` with respect to the field,
    /// exact for the discrete rotation and position rules.
    fn gradient(&self, node: usize, normal: Vec3, angles: &[Vec3]) -> Vec<Vec3> {
        let ds = self.pre.ds;
        let t = self.pre.t;
        let mut grad = vec![Vec3::ZERO; self.pre.len()];
        if node == 0 {
            return grad;
        }
        // Sensitivity of the node position to the rotation angle at m.
        let sensitivity = |m: usize| {
            let c = if m == node { 0.5 * ds } else { ds };
            let k = self.current.nodes[m].tangent;
            left_jacobian_transpose(angles[m], k.cross(normal)) * (c * self.law.weight(t, self.pre.nodes[m].s))
        };
        let mut suffix = Vec3::ZERO;
        for l in (1..=node).rev() {
            let u = sensitivity(l);
            grad[l] = (suffix + u * 0.5) * ds;
            suffix += u;
        }
        grad[0] = suffix * (0.5 * ds);
        grad
    }

    fn dual(&self, grad: &[Vec3]) -> Vec<Vec3> {
        grad.iter()
            .zip(&self.pre.nodes)
            .zip(&self.compliance)
            .map(|((g, node), &(twist, bend))| {
                let along = node.tangent * g.dot(node.tangent);
                along * twist + (*g - along) * bend
            })
            .collect()
    }

    fn linearize(&self) -> Result<Linearization> {
        let tol = self.opts.tol;
        let mut nodes: Vec<usize> = (0..self.phi.len()).filter(|&i| self.phi[i] <= tol).collect();
        for atom in &self.measure.atoms {
            if let Err(at) = nodes.binary_search(&atom.node) {
                nodes.insert(at, atom.node);
            }
        }
        let angles = self.field.prefix(self.pre.ds);
        let mut grads = Vec::with_capacity(nodes.len());
        let mut shapes = Vec::with_capacity(nodes.len());
        let mut base = Vec::with_capacity(nodes.len());
        for &node in &nodes {
            let normal = self.set.gradient(self.current.nodes[node].pos)?;
            let grad = self.gradient(node, normal, &angles);
            let moved: f64 = grad.iter().zip(&self.field.values).map(|(g, w)| g.dot(*w)).sum();
            base.push(self.phi[node] - moved);
            shapes.push(self.dual(&grad));
            grads.push(grad);
        }
        let m = nodes.len();
        let mut coupling = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v: f64 = grads[i].iter().zip(&shapes[j]).map(|(g, h)| g.dot(*h)).sum();
                coupling[i][j] = v;
                coupling[j][i] = v;
            }
        }
        Ok(Linearization { nodes, shapes, coupling, base })
    }

    /// Solves the complementarity problem `w >= 0`, `base + C w >= 0`,
    /// `w . (base + C w) = 0` by single principal pivots, starting from the
    /// nodes that are inside or already loaded.
    fn solve_weights(&self, lin: &Linearization) -> Result<Vec<f64>> {
        let tol = self.opts.tol;
        let m = lin.nodes.len();
        for (i, &node) in lin.nodes.iter().enumerate() {
            if self.phi[node] < -tol && !(lin.coupling[i][i] >= self.opts.singularity_floor) {
                return Err(Error::BreakdownProximity { node, denominator: lin.coupling[i][i] });
            }
        }
        let usable = |i: usize| lin.coupling[i][i] >= self.opts.singularity_floor;
        let mut free: Vec<usize> = (0..m)
            .filter(|&i| usable(i) && (self.measure.weight_at(lin.nodes[i]) > 0.0 || self.phi[lin.nodes[i]] < -tol))
            .collect();
        let mut weights = vec![0.0; m];
        for _ in 0..4 * m + 8 {
            weights.iter_mut().for_each(|w| *w = 0.0);
            if !free.is_empty() {
                let a: Vec<Vec<f64>> =
                    free.iter().map(|&i| free.iter().map(|&j| lin.coupling[i][j]).collect()).collect();
                let b: Vec<f64> = free.iter().map(|&i| -lin.base[i]).collect();
                let x = solve_dense(a, b).ok_or(Error::BreakdownProximity {
                    node: lin.nodes[free[0]],
                    denominator: 0.0,
                })?;
                for (&i, xi) in free.iter().zip(x) {
                    weights[i] = xi;
                }
            }
            if let Some(pos) = (0..free.len())
                .filter(|&k| weights[free[k]] < 0.0)
                .min_by(|&a, &b| weights[free[a]].total_cmp(&weights[free[b]]))
            {
                weights[free[pos]] = 0.0;
                free.remove(pos);
                continue;
            }
            let predicted =
                |i: usize| lin.base[i] + (0..m).map(|j| lin.coupling[i][j] * weights[j]).sum::<f64>();
            let entering = (0..m)
                .filter(|i| usable(*i) && !free.contains(i))
                .map(|i| (i, predicted(i)))
                .filter(|&(_, p)| p < -tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match entering {
                Some((i, _)) => {
                    let at = free.binary_search(&i).unwrap_or_else(|e| e);
                    free.insert(at, i);
                }
                None => break,
            }
        }
        Ok(weights)
    }

    pub fn iterate(&mut self) -> Result<PushStep> {
        if self.is_converged() {
            return Ok(PushStep::Converged);
        }
        let lin = self.linearize()?;
        let weights = self.solve_weights(&lin)?;
        let mut field = RotationField::zeros(self.pre.len());
        let mut measure = ContactMeasure::empty();
        for ((&node, shape), &w) in lin.nodes.iter().zip(&lin.shapes).zip(&weights) {
            if w > 0.0 {
                for (f, h) in field.values.iter_mut().zip(shape) {
                    *f += *h * w;
                }
                measure.add(node, w);
            }
        }
        let mut diff = field.clone();
        diff.add_scaled(&self.field, -1.0);
        self.change = diff.l2_norm(self.pre.ds);
        self.field = field;
        self.measure = measure;
        self.current = apply_rotation_field(&self.pre, &self.field, &self.law)?;
        self.phi = signed_distances(&self.current, self.set);
        self.iterations += 1;
        Ok(PushStep::Corrected { active: self.measure.atoms.len(), change: self.change })
    }

    /// Iterates to convergence. Running out of iterations is an error only if
    /// the curve still penetrates deeper than the tolerance.
    pub fn solve(mut self) -> Result<PushOutcome> {
        while self.iterations < self.opts.max_iter {
            if self.iterate()? == PushStep::Converged {
                return Ok(self.finish());
            }
        }
        let residual = self.penetration();
        if residual > self.opts.tol {
            return Err(Error::NonConvergence { iterations: self.iterations, residual });
        }
        Ok(self.finish())
    }

    pub fn finish(mut self) -> PushOutcome {
        self.measure.remove_zeros();
        PushOutcome {
            state: self.current,
            measure: self.measure,
            field: self.field,
            iterations: self.iterations,
        }
    }
}

fn signed_distances(state: &StemState, set: &ObstacleSet) -> Vec<f64> {
    state.nodes.iter().map(|n| set.signed_distance(n.pos)).collect()
}

/// Least-energy expulsion with the isotropic energy.
pub fn push_out(
    state: &StemState,
    set: &ObstacleSet,
    law: &ElongationLaw,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PushOutcome> {
    weighted_push_out(state, set, law, &EnergyWeights::isotropic(beta), tol, max_iter)
}

/// Least-energy expulsion with separate twist and bend stiffness.
pub fn weighted_push_out(
    state: &StemState,
    set: &ObstacleSet,
    law: &ElongationLaw,
    weights: &EnergyWeights,
    tol: f64,
    max_iter: usize,
) -> Result<PushOutcome> {
    let opts = PushOptions::new(tol, max_iter)?;
    PushSolver::new(state, set, law, weights, opts)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::obstacle::Obstacle;
    use crate::pushout::energy_components;
    use crate::stem::penetration_depth;

    fn arc(count: usize, ds: f64, curvature: f64) -> StemState {
        let tangents = (0..count)
            .map(|i| {
                let a = curvature * ds * i as f64;
                Vec3::new(a.sin(), a.cos(), 0.0)
            })
            .collect();
        StemState::from_tangents(tangents, ds, ds * (count - 1) as f64, &ElongationLaw::INSTANT).unwrap()
    }

    #[test]
    fn constraint_gradient_matches_finite_differences() {
        let law = ElongationLaw::new(3.0).unwrap();
        let ds = 0.1;
        let tangents: Vec<Vec3> = (0..15)
            .map(|i| {
                let a = 0.3 * ds * i as f64;
                Vec3::new(0.6 * a.cos(), 0.6 * a.sin(), 0.8)
            })
            .collect();
        let st = StemState::from_tangents(tangents, ds, 2.0, &law).unwrap();
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::new(2.0, 0.5, 1.0), 0.7).unwrap()]);
        let weights = EnergyWeights::new(0.5, 2.0, 1.0).unwrap();
        let mut solver = PushSolver::new(&st, &set, &law, &weights, PushOptions::new(1e-9, 10).unwrap()).unwrap();
        solver.field = RotationField::new(
            (0..st.len()).map(|i| Vec3::new(0.3, -0.2 * i as f64 / 10.0, 0.5)).collect(),
        );
        solver.current = apply_rotation_field(&st, &solver.field, &law).unwrap();
        let node = 11;
        let normal = set.gradient(solver.current.nodes[node].pos).unwrap();
        let angles = solver.field.prefix(ds);
        let grad = solver.gradient(node, normal, &angles);
        let h = 1e-6;
        for l in [0, 4, 10, 11, 12] {
            for axis in [Vec3::E1, Vec3::E2, Vec3::E3] {
                let shifted = |e: f64| {
                    let mut f = solver.field.clone();
                    f.values[l] += axis * e;
                    let p = apply_rotation_field(&st, &f, &law).unwrap().nodes[node].pos;
                    normal.dot(p)
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                assert!((fd - grad[l].dot(axis)).abs() < 1e-8, "node {l}: {fd} vs {}", grad[l].dot(axis));
            }
        }
    }

    #[test]
    fn outside_state_is_untouched() {
        let st = arc(20, 0.05, 0.3);
        let set = ObstacleSet::new(vec![Obstacle::sphere(Vec3::new(5.0, 0.0, 0.0), 1.0).unwrap()]);
        let out = push_out(&st, &set, &ElongationLaw::INSTANT, 0.5, 1e-9, 10).unwrap();
        assert_eq!(out.state, st);
        assert!(out.measure.is_empty());
        assert!(out.field.is_zero());
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn sphere_contact_converges() {
        let law = ElongationLaw::INSTANT;
        let st = arc(41, 0.05, 0.2);
        let tip = st.tip().pos;
        let set = ObstacleSet::new(vec![Obstacle::sphere(tip + Vec3::new(0.45, 0.1, 0.0), 0.5).unwrap()]);
        assert!(penetration_depth(&st, &set) > 0.01);
        let out = push_out(&st, &set, &law, 0.5, 1e-9, 500).unwrap();
        assert!(penetration_depth(&out.state, &set) <= 1e-9);
        assert!(!out.measure.is_empty());
        assert!(out.measure.atoms.iter().all(|a| a.weight > 0.0));
        let replay = apply_rotation_field(&st, &out.field, &law).unwrap();
        assert_eq!(replay, out.state);
        for atom in &out.measure.atoms {
            assert!(set.signed_distance(out.state.nodes[atom.node].pos).abs() <= 1e-9);
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let st = arc(41, 0.05, 0.2);
        let middle = st.nodes[20].pos;
        let set = ObstacleSet::new(vec![Obstacle::sphere(middle + Vec3::new(0.35, 0.0, 0.0), 0.4).unwrap()]);
        match push_out(&st, &set, &ElongationLaw::INSTANT, 0.5, 1e-12, 1) {
            Err(Error::NonConvergence { iterations: 1, residual }) => assert!(residual > 1e-12),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn unit_weights_match_isotropic_push() {
        let law = ElongationLaw::INSTANT;
        let st = arc(41, 0.05, 0.2);
        let tip = st.tip().pos;
        let set = ObstacleSet::new(vec![Obstacle::sphere(tip + Vec3::new(0.45, 0.1, 0.0), 0.5).unwrap()]);
        let a = push_out(&st, &set, &law, 0.5, 1e-9, 500).unwrap();
        let b = weighted_push_out(&st, &set, &law, &EnergyWeights::new(0.5, 1.0, 1.0).unwrap(), 1e-9, 500).unwrap();
        assert_eq!(a, b);
        // In the plane every push field is pure bending.
        let c = weighted_push_out(&st, &set, &law, &EnergyWeights::new(0.5, 3.0, 1.0).unwrap(), 1e-9, 500).unwrap();
        assert_eq!(a.state, c.state);
    }

    #[test]
    fn stiff_bending_reduces_bend_energy() {
        let law = ElongationLaw::INSTANT;
        let ds = 0.05;
        let tangents: Vec<Vec3> = (0..60)
            .map(|i| {
                let a = 2.0 * ds * i as f64;
                Vec3::new(0.6 * a.cos(), 0.6 * a.sin(), 0.8)
            })
            .collect();
        let st = StemState::from_tangents(tangents, ds, ds * 59.0, &law).unwrap();
        let tip = st.tip().pos;
        let set = ObstacleSet::new(vec![Obstacle::sphere(tip + Vec3::new(0.3, 0.0, 0.3), 0.5).unwrap()]);
        assert!(penetration_depth(&st, &set) > 0.0);
        let iso = push_out(&st, &set, &law, 0.5, 1e-9, 500).unwrap();
        let stiff = weighted_push_out(&st, &set, &law, &EnergyWeights::new(0.5, 1.0, 50.0).unwrap(), 1e-9, 500).unwrap();
        let (_, bend_iso) = energy_components(&iso.field, st.t, 0.5, &st, &law).unwrap();
        let (_, bend_stiff) = energy_components(&stiff.field, st.t, 0.5, &st, &law).unwrap();
        assert!(bend_stiff < bend_iso);
        assert!(penetration_depth(&stiff.state, &set) <= 1e-9);
    }
}
