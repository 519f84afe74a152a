//! Acceptance checks for the simulator, one function per criterion.
//!
//! Each check runs its scenarios, compares against its thresholds and returns
//! a [`Verdict`] with a one-line explanation. The `acceptance` test target
//! prints the verdicts and fails if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropism_cli::presets::{preset, stem_scenario, vine_scenario, DEFAULT_DS, PRESET_NAMES};
use tropism_cli::verify::verify;
use tropism_cli::exit_code;
use tropism_core::growth::apply_growth_step;
use tropism_core::obstacle::{Obstacle, ObstacleSet, SensingParams};
use tropism_core::pushout::{
    apply_rotation_field, deformation_energy, forward_displacement, recover_field_from_displacement,
    single_point_multiplier, weighted_push_out, PushOptions, PushSolver,
};
use tropism_core::sim::{integral_residual, run, wrap_angle, InitialCurve, RunOutcome, RunStatus, SimConfig};
use tropism_core::stem::{elongate, penetration_depth};
use tropism_core::{BreakdownReport, ElongationLaw, EnergyWeights, GrowthParams, RotationField, StemState, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub criterion: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.title,
            self.detail
        )
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn run_ok(cfg: &SimConfig) -> RunOutcome {
    run(cfg).expect("scenario configurations are valid")
}

fn final_tip(out: &RunOutcome) -> Vec3 {
    *out.log.last().and_then(|f| f.positions.last()).expect("runs log at least one frame")
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// The stem bends left of the disc at `x = 1.2` and right of it at `x = 1.25`.
pub fn bifurcation() -> Verdict {
    let (left, t_left) = timed(|| run_ok(&stem_scenario(1.2, DEFAULT_DS)));
    let (right, t_right) = timed(|| run_ok(&stem_scenario(1.25, DEFAULT_DS)));
    let (xl, xr) = (final_tip(&left).x, final_tip(&right).x);
    let completed = left.status == RunStatus::Completed && right.status == RunStatus::Completed;
    let left_ok = xl < 1.2 - 0.5;
    let right_ok = xr > 1.25;
    let fast = t_left.as_secs_f64() < 10.0 && t_right.as_secs_f64() < 10.0;
    Verdict {
        criterion: 1,
        title: "bifurcation",
        passed: completed && left_ok && right_ok && fast,
        detail: format!(
            "disc at 1.2: {} tip x = {xl:.4} (need < 0.7) [{}]; disc at 1.25: {} tip x = {xr:.4} (need > 1.25) [{}]; {:.2?} / {:.2?}",
            left.status.name(),
            if left_ok { "ok" } else { "miss" },
            right.status.name(),
            if right_ok { "ok" } else { "miss" },
            t_left,
            t_right
        ),
    }
}

/// Distance from a disc within which the stem counts as contact-adjacent,
/// in units of the sensing range.
pub const WRAP_BAND_IN_SENSING_RANGES: f64 = 4.0;

pub fn clinging_ladder() -> Verdict {
    let threshold_high = 1.5 * PI;
    let threshold_low = 0.5 * PI;
    let mut parts = Vec::new();
    let mut passed = true;
    for gamma in [7.0, 4.0, 3.0] {
        let cfg = vine_scenario(gamma, DEFAULT_DS);
        let band = WRAP_BAND_IN_SENSING_RANGES * cfg.params.sensing.delta0;
        let (out, elapsed) = timed(|| run_ok(&cfg));
        let last = out.log.last().expect("runs log at least one frame");
        let small = wrap_angle(&last.positions, &cfg.obstacles.obstacles[0], band);
        let big = wrap_angle(&last.positions, &cfg.obstacles.obstacles[1], band);
        let checks: Vec<(&str, f64, bool)> = match gamma as i32 {
            7 => vec![("small >= 3pi/2", small, small >= threshold_high)],
            4 => vec![
                ("small < pi/2", small, small < threshold_low),
                ("big >= 3pi/2", big, big >= threshold_high),
            ],
            _ => vec![("big < pi/2", big, big < threshold_low)],
        };
        let fast = elapsed.as_secs_f64() < 30.0;
        passed &= fast && checks.iter().all(|c| c.2);
        let items: Vec<String> = checks
            .iter()
            .map(|(what, v, ok)| format!("{what}: {v:.2} {}", if *ok { "ok" } else { "miss" }))
            .collect();
        parts.push(format!("gamma {gamma}: {} ({}, {elapsed:.2?})", items.join(", "), out.status.name()));
    }
    Verdict {
        criterion: 2,
        title: "clinging ladder",
        passed,
        detail: format!("wrap band {:.2}; {}", WRAP_BAND_IN_SENSING_RANGES * 0.05, parts.join("; ")),
    }
}

/// Straight stem along `x` with its tip `depth` inside a unit-diameter sphere.
pub fn contraction_scene(depth: f64) -> (StemState, ObstacleSet) {
    let stem = StemState::straight(Vec3::E1, 0.025, 41).expect("valid stem");
    let disc = Obstacle::sphere(Vec3::new(1.0, 0.5 - depth, 0.0), 0.5).expect("valid sphere");
    (stem, ObstacleSet::new(vec![disc]))
}

pub fn quadratic_contraction() -> Verdict {
    let law = ElongationLaw::INSTANT;
    let weights = EnergyWeights::isotropic(0.5);
    let depths = [1e-2, 1e-3, 1e-4];
    let (posts, elapsed) = timed(|| {
        depths
            .iter()
            .map(|&e| {
                let (stem, set) = contraction_scene(e);
                let opts = PushOptions::new(1e-15, 1).expect("valid options");
                let mut solver = PushSolver::new(&stem, &set, &law, &weights, opts).expect("valid solver");
                solver.iterate().expect("first iteration succeeds");
                solver.penetration()
            })
            .collect::<Vec<f64>>()
    });
    let bounded = depths.iter().zip(&posts).all(|(e, p)| *p <= 10.0 * e * e);
    let positive: Vec<(f64, f64)> = depths.iter().zip(&posts).filter(|(_, p)| **p > 0.0).map(|(e, p)| (*e, *p)).collect();
    let order = if positive.len() >= 2 {
        let (e, p): (Vec<f64>, Vec<f64>) = positive.iter().copied().unzip();
        log_slope(&e, &p)
    } else {
        f64::INFINITY
    };
    let fits: Vec<String> = depths.iter().zip(&posts).map(|(e, p)| format!("{e:.0e} -> {p:.3e}")).collect();
    Verdict {
        criterion: 3,
        title: "quadratic push-out contraction",
        passed: bounded && order >= 1.9 && elapsed.as_secs_f64() < 1.0,
        detail: format!("{}; post <= 10 E^2: {bounded}; fitted order {order:.3}; {elapsed:.2?}", fits.join(", ")),
    }
}

/// Multiplier of the unit straight stem on the `x` axis whose tip sits 0.1
/// below a floor with normal `+y`, on `intervals` trapezoid intervals.
pub fn half_space_multiplier(intervals: usize) -> f64 {
    let stem = StemState::straight(Vec3::E1, 1.0 / intervals as f64, intervals + 1).expect("valid stem");
    let floor = ObstacleSet::new(vec![Obstacle::half_space(Vec3::new(0.0, 0.1, 0.0), Vec3::E2).expect("valid plane")]);
    single_point_multiplier(&stem, &floor, intervals, 0.0, &ElongationLaw::INSTANT).expect("nonsingular")
}

/// Composite Simpson rule for the multiplier denominator of the unit straight
/// stem, whose chords are all perpendicular to the plane normal.
fn simpson_denominator(intervals: usize) -> f64 {
    let h = 1.0 / intervals as f64;
    let f = |s: f64| (1.0 - s).powi(2);
    let inner: f64 = (1..intervals).map(|j| f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(0.0) + inner + f(1.0))
}

pub fn multiplier_oracle() -> Verdict {
    let (result, elapsed) = timed(|| {
        let grids = [100usize, 200, 400, 800];
        let lambdas: Vec<f64> = grids.iter().map(|&n| half_space_multiplier(n)).collect();
        let errors: Vec<f64> = lambdas.iter().map(|l| (l + 0.3).abs()).collect();
        let hs: Vec<f64> = grids.iter().map(|&n| 1.0 / n as f64).collect();
        let order = log_slope(&hs, &errors);
        let k = lambdas.len() - 1;
        let extrapolated = (4.0 * lambdas[k] - lambdas[k - 1]) / 3.0;
        let reference = -0.1 / simpson_denominator(2000);
        (lambdas[k], order, extrapolated, reference)
    });
    let (finest, order, extrapolated, reference) = result;
    let passed = (extrapolated + 0.3).abs() <= 1e-10
        && (reference + 0.3).abs() <= 1e-10
        && (order - 2.0).abs() < 0.1
        && finest <= 0.0
        && elapsed.as_secs_f64() < 1.0;
    Verdict {
        criterion: 4,
        title: "multiplier oracle",
        passed,
        detail: format!(
            "extrapolated lambda = {extrapolated:.12} (|err| {:.1e}); quadrature reference {reference:.12}; finest grid {finest:.9}; refinement order {order:.3}; {elapsed:.2?}",
            (extrapolated + 0.3).abs()
        ),
    }
}

fn wavy_stem(count: usize, ds: f64) -> StemState {
    let tangents = (0..count)
        .map(|i| {
            let s = i as f64 * ds;
            let a = 0.6 * (1.3 * s).sin();
            let b = 0.4 * (0.7 * s).cos();
            Vec3::new(a.cos() * b.cos(), a.sin() * b.cos(), b.sin())
        })
        .collect();
    StemState::from_tangents(tangents, ds, (count - 1) as f64 * ds, &ElongationLaw::INSTANT).expect("valid stem")
}

fn random_perpendicular(stem: &StemState, rng: &mut ChaCha8Rng) -> RotationField {
    let coeffs: Vec<(f64, f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.0))).collect();
    RotationField::new(
        stem.nodes
            .iter()
            .map(|n| {
                let e2 = n.tangent.any_orthogonal();
                let e3 = n.tangent.cross(e2);
                let (mut a, mut b) = (0.0, 0.0);
                for (m, (ca, cb, phase)) in coeffs.iter().enumerate() {
                    let f = (m as f64 + 1.0) * 0.3 * n.s + phase;
                    a += ca * f.sin();
                    b += cb * f.cos();
                }
                e2 * a + e3 * b
            })
            .collect(),
    )
}

/// Relative L2 error over the nodes the displacement determines; the tip
/// rotation moves nothing and is not recoverable.
fn relative_l2(a: &RotationField, b: &RotationField) -> f64 {
    let n = a.len() - 1;
    let num: f64 = (0..n).map(|i| (a.values[i] - b.values[i]).norm_squared()).sum();
    let den: f64 = (0..n).map(|i| b.values[i].norm_squared()).sum();
    (num / den).sqrt()
}

pub fn volterra_round_trip() -> Verdict {
    let (worst, elapsed) = timed(|| {
        let stem = wavy_stem(200, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        (0..100)
            .map(|_| {
                let field = random_perpendicular(&stem, &mut rng);
                let v = forward_displacement(&stem, &field).expect("aligned field");
                let back = recover_field_from_displacement(&stem, &v).expect("well-posed recovery");
                relative_l2(&back, &field)
            })
            .fold(0.0f64, f64::max)
    });
    Verdict {
        criterion: 5,
        title: "Volterra round trip",
        passed: worst <= 1e-6 && elapsed.as_secs_f64() < 5.0,
        detail: format!("200 nodes, 100 trials: worst relative L2 error {worst:.2e} (tol 1e-6); {elapsed:.2?}"),
    }
}

/// A pre-push state, its obstacles and the energy used to push it out.
pub struct ContactScenario {
    pub name: &'static str,
    pub state: StemState,
    pub set: ObstacleSet,
    pub law: ElongationLaw,
    pub weights: EnergyWeights,
}

fn arc_tangents(count: usize, curvature: f64, ds: f64, start: f64) -> Vec<Vec3> {
    (0..count)
        .map(|i| {
            let a = start + curvature * i as f64 * ds;
            Vec3::new(a.sin(), a.cos(), 0.0)
        })
        .collect()
}

/// Five penetrating configurations covering planar and 3D stems, one and two
/// obstacles, finite elongation and anisotropic stiffness.
pub fn contact_scenarios() -> Vec<ContactScenario> {
    let instant = ElongationLaw::INSTANT;
    let sphere = |x: f64, y: f64, z: f64, r: f64| Obstacle::sphere(Vec3::new(x, y, z), r).expect("valid sphere");
    let mut out = Vec::new();

    let stem = StemState::straight(Vec3::E1, 0.025, 41).expect("valid stem");
    out.push(ContactScenario {
        name: "straight stem under a disc",
        state: stem,
        set: ObstacleSet::new(vec![sphere(0.8, 0.45, 0.0, 0.5)]),
        law: instant,
        weights: EnergyWeights::isotropic(0.5),
    });

    // Single-disc run at the first step whose growth enters the disc.
    let cfg = stem_scenario(1.2, DEFAULT_DS);
    let mut state = cfg.initial_state().expect("valid preset");
    let entered = loop {
        let grown = apply_growth_step(&state, &cfg.params, &cfg.obstacles, cfg.ds).expect("growth step");
        let extended = elongate(&grown, &cfg.params.law);
        if penetration_depth(&extended, &cfg.obstacles) > 0.0 {
            break extended;
        }
        state = extended;
    };
    out.push(ContactScenario {
        name: "first contact of the single-disc run",
        state: entered,
        set: cfg.obstacles.clone(),
        law: cfg.params.law,
        weights: cfg.weights,
    });

    let arc = StemState::from_tangents(arc_tangents(61, 0.6, 0.05, 0.3), 0.05, 3.0, &instant).expect("valid stem");
    let mid = arc.nodes[30].pos;
    let tip = arc.tip().pos;
    out.push(ContactScenario {
        name: "curved stem against two discs",
        set: ObstacleSet::new(vec![
            sphere(mid.x + 0.3, mid.y - 0.2, 0.0, 0.33),
            sphere(tip.x + 0.35, tip.y + 0.1, 0.0, 0.4),
        ]),
        state: arc,
        law: instant,
        weights: EnergyWeights::isotropic(1.0),
    });

    let helix: Vec<Vec3> = (0..50)
        .map(|i| {
            let a = 0.08 * i as f64;
            Vec3::new(0.6 * a.cos(), 0.6 * a.sin(), 0.8)
        })
        .collect();
    let helix = StemState::from_tangents(helix, 0.05, 2.45, &instant).expect("valid stem");
    let tip = helix.tip().pos;
    out.push(ContactScenario {
        name: "3D helix, stiff bending",
        set: ObstacleSet::new(vec![sphere(tip.x + 0.2, tip.y + 0.1, tip.z + 0.25, 0.35)]),
        state: helix,
        law: instant,
        weights: EnergyWeights::new(1.0, 0.5, 2.0).expect("valid weights"),
    });

    let law = ElongationLaw::new(3.0).expect("valid law");
    let bent = StemState::from_tangents(arc_tangents(41, 0.4, 0.05, 0.2), 0.05, 2.5, &law).expect("valid stem");
    let tip = bent.tip().pos;
    let normal = Vec3::new(-1.0, -0.3, 0.0).normalized().expect("nonzero");
    out.push(ContactScenario {
        name: "finite elongation against an oblique wall",
        set: ObstacleSet::new(vec![Obstacle::half_space(tip + normal * 0.05, normal).expect("valid plane")]),
        state: bent,
        law,
        weights: EnergyWeights::isotropic(0.7),
    });
    out
}

pub const OPTIMALITY_TOL: f64 = 1e-10;

/// Smallest energy gap `E(perturbed) - E(optimum)` over `trials` feasible
/// random perturbations, with the number of rejected draws.
pub fn optimality_margin(sc: &ContactScenario, trials: usize, seed: u64) -> (f64, usize) {
    assert!(penetration_depth(&sc.state, &sc.set) > 0.0, "{} must start inside", sc.name);
    let out = weighted_push_out(&sc.state, &sc.set, &sc.law, &sc.weights, OPTIMALITY_TOL, 200).expect("push converges");
    let energy = |f: &RotationField| deformation_energy(f, sc.state.t, &sc.weights, &sc.state, &sc.law).expect("aligned");
    let best = energy(&out.field);
    let support = out.measure.atoms.iter().map(|a| a.node).max().unwrap_or(sc.state.len() - 1);
    let scale = out.field.l2_norm(sc.state.ds).max(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = f64::INFINITY;
    let (mut accepted, mut rejected) = (0, 0);
    while accepted < trials {
        let modes: Vec<(Vec3, f64, f64)> = (0..3)
            .map(|_| {
                let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (dir, rng.gen_range(0.0..4.0), rng.gen_range(0.0..PI))
            })
            .collect();
        let s_max = sc.state.nodes[support].s.max(sc.state.ds);
        let mut delta = RotationField::new(
            sc.state
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    if i > support {
                        return Vec3::ZERO;
                    }
                    modes.iter().fold(Vec3::ZERO, |acc, (dir, freq, phase)| acc + *dir * (freq * PI * n.s / s_max + phase).sin())
                })
                .collect(),
        );
        let norm = delta.l2_norm(sc.state.ds);
        if norm == 0.0 {
            continue;
        }
        delta = delta.scaled(scale * rng.gen_range(0.01..1.0) / norm);
        let mut feasible = None;
        for _ in 0..60 {
            let mut trial = out.field.clone();
            trial.add_scaled(&delta, 1.0);
            let moved = apply_rotation_field(&sc.state, &trial, &sc.law).expect("aligned");
            if penetration_depth(&moved, &sc.set) <= OPTIMALITY_TOL {
                feasible = Some(trial);
                break;
            }
            delta = delta.scaled(0.5);
        }
        match feasible {
            Some(trial) => {
                margin = margin.min(energy(&trial) - best);
                accepted += 1;
            }
            None => rejected += 1,
        }
        assert!(rejected < 100 * trials, "{}: no feasible perturbations found", sc.name);
    }
    (margin, rejected)
}

pub fn discrete_optimality() -> Verdict {
    let (margins, elapsed) = timed(|| {
        contact_scenarios()
            .iter()
            .enumerate()
            .map(|(i, sc)| (sc.name, optimality_margin(sc, 100, 7 + i as u64)))
            .collect::<Vec<_>>()
    });
    let worst = margins.iter().map(|(_, (m, _))| *m).fold(f64::INFINITY, f64::min);
    let parts: Vec<String> = margins.iter().map(|(name, (m, r))| format!("{name}: {m:.2e} ({r} rejected)")).collect();
    Verdict {
        criterion: 6,
        title: "discrete optimality",
        passed: worst >= -1e-8 && elapsed.as_secs_f64() < 10.0,
        detail: format!("worst margin {worst:.2e} (need >= -1e-8); {}; {elapsed:.2?}", parts.join("; ")),
    }
}

/// Coarse and fine runs of every preset.
pub struct RefinementPair {
    pub name: &'static str,
    pub coarse: RunOutcome,
    pub fine: RunOutcome,
    pub coarse_cfg: SimConfig,
    pub fine_cfg: SimConfig,
}

pub fn refinement_pairs() -> Vec<RefinementPair> {
    PRESET_NAMES
        .iter()
        .map(|&name| {
            let coarse_cfg = preset(name, DEFAULT_DS).expect("known preset");
            let fine_cfg = preset(name, 0.5 * DEFAULT_DS).expect("known preset");
            RefinementPair { name, coarse: run_ok(&coarse_cfg), fine: run_ok(&fine_cfg), coarse_cfg, fine_cfg }
        })
        .collect()
}

pub fn scheme_bounds(pairs: &[RefinementPair]) -> Verdict {
    let within = |r: f64| (0.3..=0.7).contains(&r);
    let mut passed = true;
    let parts: Vec<String> = pairs
        .iter()
        .map(|p| {
            let omega = p.fine.max_step_omega_norm / p.coarse.max_step_omega_norm;
            let mass = p.fine.max_step_measure_mass / p.coarse.max_step_measure_mass;
            passed &= within(omega) && within(mass);
            format!(
                "{}: omega {:.3e} -> {:.3e} (ratio {omega:.2}), mass {:.3e} -> {:.3e} (ratio {mass:.2})",
                p.name, p.coarse.max_step_omega_norm, p.fine.max_step_omega_norm, p.coarse.max_step_measure_mass, p.fine.max_step_measure_mass
            )
        })
        .collect();
    Verdict {
        criterion: 7,
        title: "per-step field and mass bounds",
        passed,
        detail: format!("ratios must lie in [0.3, 0.7]; {}", parts.join("; ")),
    }
}

pub fn integral_identity(pairs: &[RefinementPair]) -> Verdict {
    let mut passed = true;
    let parts: Vec<String> = pairs
        .iter()
        .filter(|p| p.name.starts_with("sim1"))
        .map(|p| {
            let coarse = integral_residual(&p.coarse.log, &p.coarse_cfg).expect("stride 1 log");
            let fine = integral_residual(&p.fine.log, &p.fine_cfg).expect("stride 1 log");
            let factor = coarse / fine;
            passed &= (1.5..=3.0).contains(&factor);
            format!("{}: {coarse:.3e} -> {fine:.3e} (factor {factor:.2})", p.name)
        })
        .collect();
    Verdict {
        criterion: 8,
        title: "integral-identity residual",
        passed,
        detail: format!("decrease factor must lie in [1.5, 3]; {}", parts.join("; ")),
    }
}

/// Straight vertical stem growing into a ceiling at `y = 1`.
pub fn head_on_scenario() -> SimConfig {
    let params = GrowthParams::with_up(1.0, 0.5, SensingParams::disabled(), ElongationLaw::INSTANT, Vec3::E2).expect("valid params");
    let ceiling = Obstacle::half_space(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, -1.0, 0.0)).expect("valid plane");
    SimConfig {
        t0: None,
        t_end: 2.0,
        ds: DEFAULT_DS,
        params,
        weights: EnergyWeights::isotropic(0.5),
        obstacles: ObstacleSet::new(vec![ceiling]),
        initial_curve: InitialCurve::VerticalSegment { length: 0.5 },
        push_tol: 1e-9,
        push_max_iter: 5000,
        frame_stride: 1,
    }
}

/// Curved stem ending in a short straight piece whose tip touches a ceiling
/// perpendicularly; gravity is off so nothing straightens the stem.
pub fn curved_contact_scenario() -> SimConfig {
    let params = GrowthParams::with_up(0.0, 0.5, SensingParams::disabled(), ElongationLaw::INSTANT, Vec3::E2).expect("valid params");
    let ds = DEFAULT_DS;
    let count: usize = 31;
    let tangents = (0..count)
        .map(|i| {
            let a = 0.8 * ds * (count - 3).saturating_sub(i) as f64;
            Vec3::new(a.sin(), a.cos(), 0.0)
        })
        .collect();
    let arc = StemState::from_tangents(tangents, ds, (count - 1) as f64 * ds, &ElongationLaw::INSTANT).expect("valid stem");
    let mut cfg = SimConfig {
        t0: None,
        t_end: arc.s_last() + 1.0,
        ds,
        params,
        weights: EnergyWeights::isotropic(0.5),
        obstacles: ObstacleSet::empty(),
        initial_curve: InitialCurve::Polyline { points: arc.positions().into_iter().map(Vec3::to_array).collect() },
        push_tol: 1e-9,
        push_max_iter: 5000,
        frame_stride: 1,
    };
    let seed = cfg.initial_state().expect("valid seed");
    let ceiling = Obstacle::half_space(seed.tip().pos, Vec3::new(0.0, -1.0, 0.0)).expect("valid plane");
    cfg.obstacles = ObstacleSet::new(vec![ceiling]);
    cfg
}

pub fn breakdown_detection() -> Verdict {
    let head_on = run_ok(&head_on_scenario());
    let code = exit_code(&head_on.status);
    let flags = match &head_on.status {
        RunStatus::Breakdown { report, .. } => {
            report.tip_on_boundary && report.tip_perpendicular && report.straight_off_contact
        }
        _ => false,
    };
    let curved_cfg = curved_contact_scenario();
    let seed = curved_cfg.initial_state().expect("valid seed");
    let static_report = BreakdownReport::evaluate(&seed, &curved_cfg.obstacles, &curved_cfg.breakdown_tolerances());
    let curved = run_ok(&curved_cfg);
    let curved_ok = curved.status == RunStatus::Completed && !static_report.is_breakdown;
    Verdict {
        criterion: 9,
        title: "breakdown detection",
        passed: code == 2 && flags && curved_ok,
        detail: format!(
            "head-on: {} with exit code {code}, all flags {flags}; curved contact: seed tip on boundary {} perpendicular {} straight {}, run {} after {} steps",
            head_on.status.name(),
            static_report.tip_on_boundary,
            static_report.tip_perpendicular,
            static_report.straight_off_contact,
            curved.status.name(),
            curved.steps
        ),
    }
}

pub fn structural_invariants() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    // Full runs of every preset, plus a 500-step run on a finer grid.
    let mut runs: Vec<(String, SimConfig, usize)> = PRESET_NAMES
        .iter()
        .map(|&n| (n.to_string(), preset(n, DEFAULT_DS).expect("known preset"), usize::MAX))
        .collect();
    runs.push(("sim2-gamma7 at ds 0.02".into(), preset("sim2-gamma7", 0.02).expect("known preset"), 500));
    for (name, cfg, steps) in runs {
        let report = verify(&cfg, steps).expect("valid preset");
        let failing: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        passed &= failing.is_empty();
        let drift = &report.checks[1].detail;
        parts.push(if failing.is_empty() {
            format!("{name}: {} steps green ({drift})", report.steps)
        } else {
            format!("{name}: failing {}", failing.join(", "))
        });
    }
    Verdict { criterion: 10, title: "structural invariants", passed, detail: parts.join("; ") }
}
