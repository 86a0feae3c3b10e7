//! Structural checks on the discretization and on the steady-state algebra
//! that back the headline acceptance numbers.

use ccm::equilibria::{classify_invasion, enumerate_equilibria, max_equilibrium_residual};
use ccm::experiment::{sim_config, SimSettings};
use ccm::model::{ModelParams, Scenario, SystemId};
use ccm::solver::simulate;
use ccm::speed::{front_position, Side};
use proptest::prelude::*;

/// Halving the cell size must not move the measured front by more than one
/// coarse cell at the final time.
#[test]
fn grid_refinement_keeps_the_front_in_place() {
    let p = ModelParams::default();
    let class = classify_invasion(&p, Scenario::Invader);
    let target = class.target.as_ref().unwrap().coords.as_array();
    let level = 0.5 * target[0];
    let mut positions = Vec::new();
    for nodes in [2401usize, 4801] {
        let mut settings = SimSettings::default();
        settings.domain_length = 240.0;
        settings.nodes = nodes;
        settings.t_end = 40.0;
        settings.snapshots = 5;
        let cfg = sim_config(p, Scenario::Invader, &settings).unwrap();
        let traj = simulate(&cfg).unwrap();
        let last = traj.snapshots.last().unwrap();
        let x = front_position(last.species(0), last.grid(), level, Side::Right, 0.0, target[0])
            .unwrap()
            .expect("front exists at the final time");
        positions.push(x);
    }
    let coarse_dx = 0.1;
    assert!(
        (positions[0] - positions[1]).abs() <= 2.0 * coarse_dx,
        "front at dx=0.1 sits at {} but at dx=0.05 sits at {}",
        positions[0],
        positions[1]
    );
}

/// The cooperative invader frame evolves inside the unit box (third
/// component capped by the mutualist headroom); the clamp may nudge values
/// to zero but nothing should escape upward or undershoot measurably.
#[test]
fn cooperative_run_stays_in_the_box() {
    let p = ModelParams::default();
    let mut settings = SimSettings::default();
    settings.domain_length = 60.0;
    settings.nodes = 601;
    settings.t_end = 20.0;
    settings.snapshots = 11;
    let mut cfg = sim_config(p, Scenario::Invader, &settings).unwrap();
    cfg.system = SystemId::InvaderG;
    let traj = simulate(&cfg).unwrap();
    let caps = [1.0, 1.0, p.l];
    let slack = 1e-8;
    for snap in &traj.snapshots {
        for sp in 0..3 {
            for &v in snap.species(sp) {
                assert!(
                    v >= -slack && v <= caps[sp] + slack,
                    "species {sp} left [0, {}] with {v} at t={}",
                    caps[sp],
                    snap.t
                );
            }
        }
    }
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        (0.2..3.0f64, 0.2..3.0f64, 0.2..3.0f64),
        (0.0..3.0f64, 0.0..3.0f64),
        (0.0..2.0f64, 0.0..2.0f64, 0.05..1.5f64),
        (0.2..3.0f64, 0.2..3.0f64, 0.2..3.0f64),
    )
        .prop_map(|((alpha, beta, gamma), (a, b), (m, l, cap_l), (d1, d2, d3))| {
            let mut p = ModelParams::default();
            p.alpha = alpha;
            p.beta = beta;
            p.gamma = gamma;
            p.a = a;
            p.b = b;
            p.m = m;
            p.l = l;
            p.cap_l = cap_l;
            p.d1 = d1;
            p.d2 = d2;
            p.d3 = d3;
            p
        })
        .prop_filter("exclusion states merge when a*b is near 1", |p| {
            (1.0 - p.a * p.b).abs() > 0.02
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every admissible steady state annihilates the reaction.
    #[test]
    fn admissible_states_are_steady(p in params_strategy()) {
        let residual = max_equilibrium_residual(&p);
        prop_assert!(residual <= 1e-8, "residual {residual}");
    }

    /// Whenever an invasion is classified as possible, the state it is said
    /// to approach is one of the admissible steady states.
    #[test]
    fn classified_targets_are_admissible(p in params_strategy()) {
        for scenario in [Scenario::Invader, Scenario::Resident] {
            let class = classify_invasion(&p, scenario);
            if !class.invadable {
                prop_assert!(class.target.is_none());
                continue;
            }
            let target = class.target.as_ref().expect("invadable runs have a target");
            prop_assert!(target.admissible, "{} target inadmissible", scenario);
            let listed = enumerate_equilibria(&p);
            let found = listed.iter().any(|e| {
                e.label == target.label && e.admissible
            });
            prop_assert!(found, "{} target missing from the catalog", scenario);
        }
    }
}
