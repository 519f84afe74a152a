//! Displacements generated by rotation fields, and the inverse problem.
//!
//! A field `omega` moves the curve by `v(s) = int_0^s omega(sigma) x (P(s) - P(sigma))`.
//! Differencing along the stem gives `v_{i+1} - v_i = W_{i+1} x (P_{i+1} - P_i)`
//! with `W_i` the running integral of `omega` below node `i`, so each segment
//! fixes the two components of `W_{i+1}` across it. Requiring `omega` to be
//! perpendicular to the tangent leaves one 2x2 solve per node, written in a
//! frame transported along the stem.

use crate::geom::Vec3;
use crate::stem::StemState;
use crate::{Error, Result};

use super::RotationField;

const MAX_SWEEPS: usize = 200;

/// Quadrature weight of node `j` in the running integral: the integrand
/// vanishes at the upper limit, so only the root gets half weight.
fn running_weight(j: usize, ds: f64) -> f64 {
    if j == 0 {
        0.5 * ds
    } else {
        ds
    }
}

/// Displacement field generated by `field` on the current curve.
pub fn forward_displacement(state: &StemState, field: &RotationField) -> Result<Vec<Vec3>> {
    field.check_aligned(state)?;
    let mut out = Vec::with_capacity(state.len());
    let mut running = Vec3::ZERO;
    let mut moment = Vec3::ZERO;
    for (j, (node, w)) in state.nodes.iter().zip(&field.values).enumerate() {
        out.push(running.cross(node.pos) - moment);
        let aw = *w * running_weight(j, state.ds);
        running += aw;
        moment += aw.cross(node.pos);
    }
    Ok(out)
}

/// One segment of the discrete system in the local frame `{k, e2, e3}`.
struct Row {
    e2: Vec3,
    e3: Vec3,
    h: [Vec3; 2],
    data: [f64; 2],
    inverse: [[f64; 2]; 2],
    weight: f64,
}

fn build_rows(state: &StemState, v: &[Vec3]) -> Result<Vec<Row>> {
    let n = state.len();
    if v.len() != n {
        return Err(Error::Usage(format!("displacement has {} entries for {} nodes", v.len(), n)));
    }
    let ds = state.ds;
    let scale = v.iter().map(|x| x.norm()).fold(1.0f64, f64::max);
    if v[0].norm() > 1e-12 * scale {
        return Err(Error::Usage(format!("displacement must vanish at the root, got {:e}", v[0].norm())));
    }
    let rate_scale = v
        .windows(2)
        .map(|w| (w[1] - w[0]).norm() / ds)
        .fold(1.0f64, f64::max);

    let mut rows = Vec::with_capacity(n.saturating_sub(1));
    let mut e2 = state.nodes[0].tangent.any_orthogonal();
    for i in 0..n.saturating_sub(1) {
        let k = state.nodes[i].tangent;
        e2 = (e2 - k * e2.dot(k))
            .normalized()
            .unwrap_or_else(|| k.any_orthogonal());
        let e3 = k.cross(e2);
        let chord = state.nodes[i + 1].pos - state.nodes[i].pos;
        let len = chord.norm();
        if !(len > 1e-12 * ds) {
            return Err(Error::IllConditionedFrame(format!("segment {i} has zero length")));
        }
        let dv = v[i + 1] - v[i];
        let along = dv.dot(chord) / (len * ds);
        if along.abs() > 1e-8 * rate_scale {
            return Err(Error::Usage(format!(
                "displacement rate has a tangential component {along:e} on segment {i}"
            )));
        }
        let h = [chord.cross(e3) / len, chord.cross(e2) / len];
        let data = [dv.dot(e3) / len, dv.dot(e2) / len];
        let m = [[e2.dot(h[0]), e3.dot(h[0])], [e2.dot(h[1]), e3.dot(h[1])]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-6 {
            return Err(Error::IllConditionedFrame(format!(
                "tangent at node {i} is nearly perpendicular to its segment (det {det:e})"
            )));
        }
        let inverse = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        rows.push(Row { e2, e3, h, data, inverse, weight: running_weight(i, ds) });
    }
    Ok(rows)
}

/// Node value of `omega` from row `i` given the running integral below it.
fn solve_row(rows: &[Row], i: usize, running: Vec3) -> Vec3 {
    let row = &rows[i];
    let (prev_h, prev_d) = if i == 0 {
        ([Vec3::ZERO; 2], [0.0; 2])
    } else {
        (rows[i - 1].h, rows[i - 1].data)
    };
    let r: [f64; 2] = std::array::from_fn(|c| {
        (row.data[c] - prev_d[c] - running.dot(row.h[c] - prev_h[c])) / row.weight
    });
    let u2 = row.inverse[0][0] * r[0] + row.inverse[0][1] * r[1];
    let u3 = row.inverse[1][0] * r[0] + row.inverse[1][1] * r[1];
    row.e2 * u2 + row.e3 * u3
}

/// The last node only enters with zero weight; its value continues the one
/// below, projected across the tip tangent.
fn close_tip(state: &StemState, values: &mut Vec<Vec3>) {
    let n = state.len();
    let tip = state.nodes[n - 1].tangent;
    let last = match values.last() {
        Some(w) => *w - tip * w.dot(tip),
        None => Vec3::ZERO,
    };
    values.push(last);
}

/// Rotation field perpendicular to the tangents that generates `v`, by forward
/// substitution.
pub fn recover_field_from_displacement(state: &StemState, v: &[Vec3]) -> Result<RotationField> {
    let rows = build_rows(state, v)?;
    let mut values = Vec::with_capacity(state.len());
    let mut running = Vec3::ZERO;
    for i in 0..rows.len() {
        let w = solve_row(&rows, i, running);
        running += w * rows[i].weight;
        values.push(w);
    }
    close_tip(state, &mut values);
    Ok(RotationField::new(values))
}

/// Same field by Picard sweeps of the second-kind system; also returns the
/// number of sweeps used.
pub fn recover_field_by_fixed_point(state: &StemState, v: &[Vec3]) -> Result<(RotationField, usize)> {
    let rows = build_rows(state, v)?;
    let mut values = vec![Vec3::ZERO; rows.len()];
    for sweep in 1..=MAX_SWEEPS {
        let mut next = Vec::with_capacity(rows.len());
        let mut running = Vec3::ZERO;
        for i in 0..rows.len() {
            next.push(solve_row(&rows, i, running));
            running += values[i] * rows[i].weight;
        }
        let change = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0f64, f64::max);
        let size = next.iter().map(|w| w.norm()).fold(1.0f64, f64::max);
        values = next;
        if change <= 1e-14 * size {
            close_tip(state, &mut values);
            return Ok((RotationField::new(values), sweep));
        }
    }
    Err(Error::IllConditionedFrame(format!(
        "fixed-point iteration did not settle within {MAX_SWEEPS} sweeps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stem::ElongationLaw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy(count: usize, ds: f64) -> StemState {
        let tangents = (0..count)
            .map(|i| {
                let s = ds * i as f64;
                let a = 0.8 * s.sin();
                let b = 0.4 * (1.3 * s).cos();
                Vec3::new(a.cos() * b.cos(), a.sin() * b.cos(), b.sin())
            })
            .collect();
        StemState::from_tangents(tangents, ds, ds * (count - 1) as f64, &ElongationLaw::INSTANT).unwrap()
    }

    fn random_perpendicular(state: &StemState, rng: &mut ChaCha8Rng) -> RotationField {
        RotationField::new(
            state
                .nodes
                .iter()
                .map(|n| {
                    let w = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    w - n.tangent * w.dot(n.tangent)
                })
                .collect(),
        )
    }

    fn relative_error(a: &RotationField, b: &RotationField, upto: usize) -> f64 {
        let num: f64 = (0..upto).map(|i| (a.values[i] - b.values[i]).norm_squared()).sum();
        let den: f64 = (0..upto).map(|i| b.values[i].norm_squared()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn forward_map_matches_direct_quadrature() {
        let st = wavy(30, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let field = random_perpendicular(&st, &mut rng);
        let v = forward_displacement(&st, &field).unwrap();
        for i in 0..st.len() {
            let direct = (0..i).fold(Vec3::ZERO, |acc, j| {
                acc + field.values[j].cross(st.nodes[i].pos - st.nodes[j].pos) * running_weight(j, st.ds)
            });
            assert!((v[i] - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_displacement_gives_zero_field() {
        let st = wavy(50, 0.05);
        let f = recover_field_from_displacement(&st, &vec![Vec3::ZERO; st.len()]).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn round_trip_both_solvers() {
        let st = wavy(200, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let field = random_perpendicular(&st, &mut rng);
            let v = forward_displacement(&st, &field).unwrap();
            let direct = recover_field_from_displacement(&st, &v).unwrap();
            assert!(relative_error(&direct, &field, st.len() - 1) < 1e-9);
            let (picard, sweeps) = recover_field_by_fixed_point(&st, &v).unwrap();
            assert!(relative_error(&picard, &field, st.len() - 1) < 1e-9);
            assert!(sweeps <= 200);
            for (w, n) in direct.values.iter().zip(&st.nodes) {
                assert!(w.dot(n.tangent).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn twist_is_invisible_on_straight_stems() {
        let st = StemState::straight(Vec3::new(0.0, 0.6, 0.8), 0.05, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bend = random_perpendicular(&st, &mut rng);
        let mut twisted = bend.clone();
        for (i, (w, n)) in twisted.values.iter_mut().zip(&st.nodes).enumerate() {
            *w += n.tangent * (0.3 * i as f64).sin();
        }
        let v = forward_displacement(&st, &twisted).unwrap();
        let recovered = recover_field_from_displacement(&st, &v).unwrap();
        assert!(relative_error(&recovered, &bend, st.len() - 1) < 1e-9);
    }

    #[test]
    fn tangential_rates_are_rejected() {
        let st = StemState::straight(Vec3::E1, 0.1, 10).unwrap();
        let v: Vec<Vec3> = st.nodes.iter().map(|n| Vec3::new(0.1 * n.s, 0.0, 0.0)).collect();
        assert!(matches!(recover_field_from_displacement(&st, &v), Err(Error::Usage(_))));
        let mut v = vec![Vec3::ZERO; st.len()];
        v[0] = Vec3::E2;
        assert!(matches!(recover_field_from_displacement(&st, &v), Err(Error::Usage(_))));
    }
}
