//! End-to-end checks of the sweep runner's files and of the command-line
//! surface: outputs must be reproducible byte for byte, echo their inputs,
//! and the binary must fail loudly on bad input.

use ccm::experiment::{
    parse_spec, run_experiment, GridKind, PointStatus, SimSettings, SweepParameter, SweepSpec,
};
use ccm::model::{ModelParams, Scenario};
use std::fs;
use std::process::Command;

const DEMO_SPEC: &str = "\
# small demonstration sweep
name = demo
scenario = invader
sweep_parameter = b
sweep_values = 0.4, 0.6, 0.8
beta = 1.5
l = 0.3
domain_length = 50
nodes = 251
t_end = 8
snapshots = 9
window_low = 0.4
window_high = 0.9
save_trajectories = true
";

#[test]
fn sweep_outputs_are_reproducible_and_echo_their_inputs() {
    let spec = parse_spec(DEMO_SPEC).unwrap();
    assert_eq!(spec.name, "demo");
    assert_eq!(spec.base.beta, 1.5);
    assert_eq!(spec.base.l, 0.3);
    assert!(spec.save_trajectories);

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let res_a = run_experiment(&spec, dir_a.path()).unwrap();
    let res_b = run_experiment(&spec, dir_b.path()).unwrap();

    for res in [&res_a, &res_b] {
        assert_eq!(res.points.len(), 3);
        for pt in &res.points {
            assert_eq!(pt.status, PointStatus::Ok, "point error: {:?}", pt.error);
            assert_eq!(pt.params.beta, 1.5);
        }
    }
    let sweep_values: Vec<f64> = res_a.points.iter().map(|p| p.value).collect();
    assert_eq!(sweep_values, vec![0.4, 0.6, 0.8]);
    assert_eq!(res_a.points[2].params.b, 0.8);

    let summary_a = fs::read(res_a.summary_path.clone()).unwrap();
    let summary_b = fs::read(res_b.summary_path.clone()).unwrap();
    assert_eq!(summary_a, summary_b, "summary.csv differs between reruns");

    let text = String::from_utf8(summary_a).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("index,status,scenario,sweep_parameter,sweep_value"));
    assert_eq!(lines.clone().count(), 3);
    // Parameter echo in full precision.
    assert!(text.contains("1.5000000000000000e0"));
    assert!(text.contains(",ok,invader,b,"));

    let traj_a = fs::read(dir_a.path().join("trajectory_000.csv")).unwrap();
    let traj_b = fs::read(dir_b.path().join("trajectory_000.csv")).unwrap();
    assert_eq!(traj_a, traj_b, "trajectory CSV differs between reruns");
}

#[test]
fn stronger_protection_speeds_up_the_invader() {
    let mut sim = SimSettings::default();
    sim.domain_length = 240.0;
    sim.nodes = 2401;
    sim.t_end = 40.0;
    sim.snapshots = 21;
    let spec = ccm::experiment::ExperimentSpec {
        name: "m-sweep".to_string(),
        scenario: Scenario::Invader,
        base: ModelParams::default(),
        sweep: SweepSpec {
            parameter: SweepParameter::M,
            grid: GridKind::Linear,
            values: vec![0.25, 2.0, 8.0],
        },
        sim,
        save_trajectories: false,
    };
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&spec, dir.path()).unwrap();
    let mut measured = Vec::new();
    for pt in &res.points {
        assert_eq!(pt.status, PointStatus::Ok, "point error: {:?}", pt.error);
        let fit = pt.speeds.as_ref().unwrap().fits[0].expect("invader front");
        let (c1, _) = pt.speed.unwrap();
        assert!(
            (fit.speed - c1).abs() <= 0.10 * c1,
            "at m={} measured {} vs predicted {c1}",
            pt.value,
            fit.speed
        );
        measured.push(fit.speed);
    }
    assert!(
        measured[0] < measured[1] && measured[1] < measured[2],
        "speeds should increase with protection: {measured:?}"
    );
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccm"))
}

#[test]
fn cli_help_and_analysis() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Invasion fronts"));

    let out = bin().args(["analyze", "--csv"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("# equilibria"));
    assert!(text.contains("c1,"));

    let out = bin().args(["analyze", "--alpha=-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "stderr was: {err}");
}

#[test]
fn cli_experiment_surface() {
    let out = bin().args(["experiment", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("figure2"));

    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["experiment", "no-such-preset"])
        .args(["--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("neither a preset"), "stderr was: {err}");

    let spec_path = tmp.path().join("demo.spec");
    fs::write(&spec_path, DEMO_SPEC).unwrap();
    let out = bin()
        .arg("experiment")
        .arg(&spec_path)
        .args(["--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("demo").join("summary.csv").exists());
    assert!(tmp.path().join("demo").join("trajectory_001.csv").exists());
}

#[test]
fn cli_simulate_and_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--domain", "30", "--nodes", "151"])
        .args(["--t-end", "5", "--snapshots", "6"])
        .args(["--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let traj = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("# system = original"));
    assert!(traj.contains("t,x,"));

    let out = bin()
        .args(["speed", "--domain", "60", "--nodes", "301"])
        .args(["--t-end", "20", "--snapshots", "21", "--csv"])
        .args(["--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("species,speed"), "stdout was: {text}");
}
