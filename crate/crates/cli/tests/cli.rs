use std::path::{Path, PathBuf};
use std::process::Command;

use tropism_cli::config::ConfigFile;
use tropism_cli::output::{frames_csv, read_frames, svg_figure, Summary, CSV_HEADER};
use tropism_cli::presets::{preset, PRESET_NAMES};
use tropism_cli::{parse_config, CliError, SvgOptions};
use tropism_core::sim::{run, Frame, FrameLog, InitialCurve};
use tropism_core::{ElongationLaw, ObstacleSet, Vec3};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tropism"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const HEAD_ON: &str = r#"
[model]
alpha = "infinity"
beta = 0.5
kappa = 1.0
[run]
t_end = 2.0
ds = 0.05
[[obstacles]]
type = "half-space"
point = [0.0, 1.0]
normal = [0.0, -1.0]
[initial_curve]
type = "vertical-segment"
length = 0.5
"#;

fn config_error(text: &str) -> String {
    match ConfigFile::parse(text).and_then(|c| c.to_sim()) {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn presets_match_the_published_parameters() {
    let left = preset("sim1-left", 0.05).unwrap();
    assert_eq!(left.params.beta, 0.5);
    assert_eq!(left.params.kappa, 1.0);
    assert_eq!(left.params.sensing.gamma, 0.0);
    assert_eq!(left.initial_curve, InitialCurve::ParabolaArc);
    assert_eq!(left.obstacles.obstacles.len(), 1);
    assert_eq!(left.obstacles.signed_distance(Vec3::new(1.2, 1.5, 0.0)), -0.5);

    let vine = preset("sim2-gamma7", 0.05).unwrap();
    assert_eq!((vine.params.beta, vine.params.kappa), (2.0, 1.0));
    assert_eq!((vine.params.sensing.gamma, vine.params.sensing.delta0), (7.0, 0.05));
    assert_eq!(vine.obstacles.signed_distance(Vec3::new(0.1, 1.5, 0.0)), -0.5);
    assert_eq!(vine.obstacles.signed_distance(Vec3::new(0.6, 4.0, 0.0)), -1.0);
    assert_eq!(vine.initial_curve, InitialCurve::VerticalSegment { length: 0.5 });

    assert!(matches!(preset("sim3", 0.05), Err(CliError::Usage(_))));
}

#[test]
fn preset_configs_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let cfg = preset(name, 0.05).unwrap();
        let text = ConfigFile::from_sim(&cfg).to_toml();
        assert_eq!(ConfigFile::parse(&text).unwrap().to_sim().unwrap(), cfg, "{name}");
    }
}

#[test]
fn shipped_configs_match_presets() {
    let left = parse_config(&configs_dir().join("sim1-left.toml")).unwrap();
    assert_eq!(left, preset("sim1-left", 0.05).unwrap());
    let vine = parse_config(&configs_dir().join("sim2-gamma7.toml")).unwrap();
    assert_eq!(vine, preset("sim2-gamma7", 0.05).unwrap());
}

#[test]
fn alpha_accepts_numbers_and_infinity() {
    let cfg = ConfigFile::parse(HEAD_ON).unwrap().to_sim().unwrap();
    assert_eq!(cfg.params.law, ElongationLaw::INSTANT);
    let cfg = ConfigFile::parse(&HEAD_ON.replace("\"infinity\"", "2.5")).unwrap().to_sim().unwrap();
    assert_eq!(cfg.params.law.alpha, 2.5);
    assert!(config_error(&HEAD_ON.replace("\"infinity\"", "\"lots\"")).contains("model.alpha"));
    assert!(config_error(&HEAD_ON.replace("\"infinity\"", "-1.0")).contains("model.alpha"));
}

#[test]
fn validation_errors_name_the_key() {
    assert!(config_error(&HEAD_ON.replace("ds = 0.05", "ds = -0.05")).contains("run.ds"));
    assert!(config_error(&HEAD_ON.replace("beta = 0.5\n", "")).contains("model.beta"));
    assert!(config_error(&HEAD_ON.replace("t_end = 2.0", "t_end = nan")).contains("run.t_end"));
    assert!(config_error(&HEAD_ON.replace("length = 0.5", "")).contains("initial_curve.length"));
    assert!(config_error(&HEAD_ON.replace("normal = [0.0, -1.0]", "normal = [0.0]")).contains("obstacles[0].normal"));
    assert!(config_error(&HEAD_ON.replace("\"half-space\"", "\"cone\"")).contains("obstacles[0].type"));
    assert!(config_error(&HEAD_ON.replace("kappa = 1.0", "kappa = 1.0\ncolour = 3")).contains("colour"));
}

#[test]
fn csv_has_one_row_per_node() {
    let cfg = preset("sim1-left", 0.05).unwrap();
    let positions = vec![Vec3::ZERO, Vec3::new(0.0, 0.05, 0.0), Vec3::new(0.0, 0.1, 0.0)];
    let frame = Frame {
        step: 0,
        t: 0.1,
        positions,
        tangents: vec![Vec3::E2; 3],
        contacts: vec![],
        atoms: vec![],
        penetration_before_push: 0.0,
        push_iterations: 0,
        omega_norm: 0.0,
        measure_mass: 0.0,
    };
    let log = FrameLog { ds: 0.05, t0: 0.1, stride: 1, frames: vec![frame] };
    let text = frames_csv(&log, &cfg).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], CSV_HEADER);

    let empty = FrameLog { frames: vec![], ..log };
    assert!(matches!(frames_csv(&empty, &cfg), Err(CliError::Usage(_))));
}

#[test]
fn csv_round_trips_positions_exactly() {
    let cfg = preset("sim1-left", 0.05).unwrap();
    let out = run(&cfg).unwrap();
    let rows = read_frames(&frames_csv(&out.log, &cfg).unwrap()).unwrap();
    let mut it = rows.iter();
    for (index, frame) in out.log.frames.iter().enumerate() {
        for (i, (p, k)) in frame.positions.iter().zip(&frame.tangents).enumerate() {
            let row = it.next().unwrap();
            assert_eq!(row.frame_index, index);
            assert_eq!(row.t, frame.t);
            assert_eq!(row.s, i as f64 * cfg.ds);
            assert_eq!(row.position, *p);
            assert_eq!(row.tangent, *k);
            assert_eq!(row.in_contact, frame.contacts.contains(&i));
        }
    }
    assert!(it.next().is_none());
    // Node-count law: one new node per step.
    let last = out.log.last().unwrap();
    assert_eq!(last.positions.len(), out.log.frames[0].positions.len() + out.steps);
    // Some node of the final frame is logged as touching the disc.
    assert!(rows.iter().any(|r| r.in_contact && r.phi.abs() <= cfg.contact_band()));
}

fn attr(element: &str, name: &str) -> f64 {
    let key = format!(" {name}=\"");
    let start = element.find(&key).unwrap() + key.len();
    let end = start + element[start..].find('"').unwrap();
    element[start..end].parse().unwrap()
}

#[test]
fn svg_maps_the_disc_and_the_root_consistently() {
    let cfg = preset("sim1-left", 0.05).unwrap();
    let out = run(&cfg).unwrap();
    let svg = svg_figure(&out.log, &cfg, &SvgOptions::default()).unwrap();
    assert_eq!(svg, svg_figure(&out.log, &cfg, &SvgOptions::default()).unwrap());

    let circles: Vec<&str> = svg.lines().filter(|l| l.starts_with("<circle")).collect();
    assert_eq!(circles.len(), 1);
    let (cx, cy, r) = (attr(circles[0], "cx"), attr(circles[0], "cy"), attr(circles[0], "r"));
    let scale = r / 0.5;
    let root = (cx - 1.2 * scale, cy + 1.5 * scale);

    let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    let frames = out.log.frames.len();
    assert_eq!(polylines.len(), (frames - 1) / 10 + 1 + usize::from(!(frames - 1).is_multiple_of(10)));
    assert_eq!(polylines.iter().filter(|l| l.contains("class=\"final\"")).count(), 1);
    for line in polylines {
        let start = line.find("points=\"").unwrap() + 8;
        let first = line[start..].split(' ').next().unwrap();
        let (x, y) = first.split_once(',').unwrap();
        assert!((x.parse::<f64>().unwrap() - root.0).abs() < 2e-3);
        assert!((y.parse::<f64>().unwrap() - root.1).abs() < 2e-3);
    }
}

#[test]
fn svg_without_obstacles_has_no_discs() {
    let mut cfg = preset("sim1-left", 0.05).unwrap();
    cfg.obstacles = ObstacleSet::empty();
    cfg.t_end = 2.0;
    let out = run(&cfg).unwrap();
    let svg = svg_figure(&out.log, &cfg, &SvgOptions::default()).unwrap();
    assert!(!svg.contains("<circle"));
    assert!(svg.contains("<polyline"));
}

#[test]
fn svg_rejects_non_planar_logs() {
    let cfg = preset("sim1-left", 0.05).unwrap();
    let mut out = run(&cfg).unwrap();
    out.log.frames[0].positions[1].z = 1e-3;
    assert!(matches!(svg_figure(&out.log, &cfg, &SvgOptions::default()), Err(CliError::Usage(_))));
}

#[test]
fn preset_command_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["preset", "--name", "sim1-left", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["frames.csv", "summary.json", "figure.svg"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(names.len(), 3);
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.status, "completed");
    assert!(summary.penetration_final <= 1e-9);
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let mut keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["frames_written", "max_step_measure_mass", "max_step_omega_norm", "penetration_final", "status", "t_final"]
    );
}

#[test]
fn head_on_run_exits_with_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "head-on.toml", HEAD_ON);
    let out = dir.path().join("out");
    let result = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(result.status.code(), Some(2));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.status, "breakdown");
    assert!((summary.t_final - 1.0).abs() < 1e-9);
}

#[test]
fn penetrating_seed_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = HEAD_ON.replace("point = [0.0, 1.0]", "point = [0.0, 0.3]");
    let cfg = write_config(dir.path(), "inside.toml", &text);
    let result = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("penetrates"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn exhausted_push_exits_with_push_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("sim2-gamma7", 0.05).unwrap();
    cfg.push_max_iter = 1;
    cfg.push_tol = 1e-15;
    let path = write_config(dir.path(), "tight.toml", &ConfigFile::from_sim(&cfg).to_toml());
    let out = dir.path().join("out");
    let result = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(result.status.code(), Some(3));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.status, "push_failure");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["preset", "--name", "nope", "--out", "x"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["run", "--config"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn verify_reports_every_property() {
    let result = bin()
        .args(["verify", "--config"])
        .arg(configs_dir().join("sim1-left.toml"))
        .args(["--steps", "40"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0));
    let text = String::from_utf8_lossy(&result.stdout);
    for name in ["rotation orthogonality", "unit tangents", "planarity", "feasibility", "determinism"] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
}
