use crate::geom::Vec3;
use crate::obstacle::ObstacleSet;
use crate::stem::{contact_set, StemState};
use crate::{Error, Result};

use super::{forward_displacement, weighted_sum, Atom, ContactMeasure, RotationField};

fn atom_normals(
    state: &StemState,
    set: &ObstacleSet,
    mu: &ContactMeasure,
    tol: f64,
) -> Result<Vec<(usize, Vec3)>> {
    let contacts = contact_set(state, set, tol)?;
    mu.atoms
        .iter()
        .map(|a| {
            if !(a.weight >= 0.0) {
                return Err(Error::Usage(format!("negative atom weight {} at node {}", a.weight, a.node)));
            }
            if !contacts.contains(a.node) {
                return Err(Error::Usage(format!("atom at node {} is not in the contact set", a.node)));
            }
            Ok((a.node, set.gradient(state.nodes[a.node].pos)? * a.weight))
        })
        .collect()
}

/// Rotation field generated by a contact measure:
/// `omega(s) = -e^{-beta (t - s)} sum_{s_j >= s} mu_j n_j x (P_j - P(s))`.
pub fn measure_representation_field(
    state: &StemState,
    set: &ObstacleSet,
    mu: &ContactMeasure,
    beta: f64,
    tol: f64,
) -> Result<RotationField> {
    let forces = atom_normals(state, set, mu, tol)?;
    let t = state.t;
    let values = state
        .nodes
        .iter()
        .enumerate()
        .map(|(m, node)| {
            let sum = forces
                .iter()
                .filter(|(j, _)| *j >= m)
                .fold(Vec3::ZERO, |acc, (j, f)| acc + f.cross(state.nodes[*j].pos - node.pos));
            sum * -(-beta * (t - node.s)).exp()
        })
        .collect();
    Ok(RotationField::new(values))
}

/// The same field from the nested form: the total force carried by the stem
/// above each point, crossed with the tangent and integrated from `s` upward.
pub fn measure_representation_field_nested(
    state: &StemState,
    set: &ObstacleSet,
    mu: &ContactMeasure,
    beta: f64,
    tol: f64,
) -> Result<RotationField> {
    let forces = atom_normals(state, set, mu, tol)?;
    let n = state.len();
    let mut load_at = vec![Vec3::ZERO; n];
    for (j, f) in forces {
        load_at[j] += f;
    }
    let t = state.t;
    let mut values = vec![Vec3::ZERO; n];
    let mut load_above = Vec3::ZERO;
    let mut moment = Vec3::ZERO;
    for m in (0..n).rev() {
        if m + 1 < n {
            load_above += load_at[m + 1];
            moment += load_above.cross(state.nodes[m + 1].pos - state.nodes[m].pos);
        }
        values[m] = moment * -(-beta * (t - state.nodes[m].s)).exp();
    }
    Ok(RotationField::new(values))
}

/// Displacement field generated by a contact measure.
pub fn measure_velocity(
    state: &StemState,
    set: &ObstacleSet,
    mu: &ContactMeasure,
    beta: f64,
    tol: f64,
) -> Result<Vec<Vec3>> {
    let field = measure_representation_field(state, set, mu, beta, tol)?;
    forward_displacement(state, &field)
}

/// Best nonnegative combination of contact generators for a velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeFit {
    pub residual: f64,
    pub measure: ContactMeasure,
    pub sweeps: usize,
}

const NNLS_TOL: f64 = 1e-10;
const NNLS_MAX_SWEEPS: usize = 100_000;

fn inner(a: &[Vec3], b: &[Vec3], ds: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.dot(*y)).collect();
    weighted_sum(&d, ds)
}

/// Distance (trapezoid L2) from `v` to the cone of velocities generated by
/// nonnegative measures on the contact set.
pub fn cone_membership_residual(
    state: &StemState,
    set: &ObstacleSet,
    v: &[Vec3],
    beta: f64,
    tol: f64,
) -> Result<ConeFit> {
    if v.len() != state.len() {
        return Err(Error::Usage(format!("velocity has {} entries for {} nodes", v.len(), state.len())));
    }
    let ds = state.ds;
    let contacts = contact_set(state, set, tol)?;
    let generators: Vec<Vec<Vec3>> = contacts
        .indices
        .iter()
        .map(|&j| {
            let unit = ContactMeasure { atoms: vec![Atom { node: j, weight: 1.0 }] };
            measure_velocity(state, set, &unit, beta, tol)
        })
        .collect::<Result<_>>()?;
    let m = generators.len();
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| inner(&generators[i], &generators[j], ds)).collect())
        .collect();
    let rhs: Vec<f64> = generators.iter().map(|g| inner(g, v, ds)).collect();

    let mut weights = vec![0.0; m];
    let mut sweeps = 0;
    let scale = inner(v, v, ds).sqrt().max(f64::MIN_POSITIVE);
    while m > 0 && sweeps < NNLS_MAX_SWEEPS {
        sweeps += 1;
        let mut worst = 0.0f64;
        for i in 0..m {
            if gram[i][i] <= 0.0 {
                continue;
            }
            let grad: f64 = gram[i].iter().zip(&weights).map(|(g, w)| g * w).sum::<f64>() - rhs[i];
            let projected = if weights[i] > 0.0 { grad } else { grad.min(0.0) };
            worst = worst.max(projected.abs() / (gram[i][i].sqrt() * scale));
            weights[i] = (weights[i] - grad / gram[i][i]).max(0.0);
        }
        if worst <= NNLS_TOL {
            break;
        }
    }
    polish_on_support(&gram, &rhs, &mut weights);

    let mut residual = v.to_vec();
    for (g, w) in generators.iter().zip(&weights) {
        for (r, x) in residual.iter_mut().zip(g) {
            *r -= *x * *w;
        }
    }
    let measure = ContactMeasure {
        atoms: contacts
            .indices
            .iter()
            .zip(&weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(&node, &weight)| Atom { node, weight })
            .collect(),
    };
    Ok(ConeFit { residual: inner(&residual, &residual, ds).max(0.0).sqrt(), measure, sweeps })
}

/// Replaces the weights by the exact least-squares solution on their support
/// when that solution stays positive and lowers the objective.
fn polish_on_support(gram: &[Vec<f64>], rhs: &[f64], weights: &mut [f64]) {
    let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if support.is_empty() {
        return;
    }
    let a: Vec<Vec<f64>> = support
        .iter()
        .map(|&i| support.iter().map(|&j| gram[i][j]).collect())
        .collect();
    let b: Vec<f64> = support.iter().map(|&i| rhs[i]).collect();
    let Some(x) = solve_dense(a, b) else { return };
    if x.iter().any(|&xi| !(xi > 0.0)) {
        return;
    }
    let objective = |w: &[f64]| -> f64 {
        let mut q = 0.0;
        for i in 0..w.len() {
            q += w[i] * (0.5 * gram[i].iter().zip(w).map(|(g, wj)| g * wj).sum::<f64>() - rhs[i]);
        }
        q
    };
    let mut candidate = vec![0.0; weights.len()];
    for (&i, xi) in support.iter().zip(x) {
        candidate[i] = xi;
    }
    if objective(&candidate) <= objective(weights) {
        weights.copy_from_slice(&candidate);
    }
}

/// Gaussian elimination with partial pivoting.
pub(super) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
