//! Spatially homogeneous steady states, the coexistence quadratic, and the
//! invasion classification.
//!
//! The system has up to nine steady states. Eight are explicit: the empty
//! state, each competitor alone, the mutualist alone, and their combinations.
//! Coexistence states have `p1 = z` where `z` solves
//!
//! ```text
//! m*l * z^2 + (1 - a*b + m*L - m*l) * z - (1 + m*L - a) = 0
//! ```
//!
//! with `p2 = 1 - b*z` and `u = L + l*z` slaved to `z`. The two branches are
//! labeled by the root taken (`z- <= z+`). When `m*l = 0` the quadratic
//! degenerates to a linear equation with at most one root, carried on the
//! plus branch.

use crate::error::DomainError;
use crate::model::{reaction, ModelParams, Scenario, StateVec, SystemId, TransformedState};

/// Coordinates this far below zero still count as admissible and are
/// clamped to exactly zero.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

/// Two steady states closer than this (componentwise) get a coincides-with
/// note. Wider than the admissibility tolerance on purpose: at parameter
/// thresholds the colliding roots carry square-root noise of order
/// sqrt(eps) / (2*m*l).
const COINCIDENCE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquilibriumLabel {
    /// Empty state.
    E0,
    /// Competitor 1 alone.
    E1,
    /// Competitor 2 alone.
    E2,
    /// Mutualist alone.
    E3,
    /// Competitor 2 with the mutualist at baseline capacity.
    E4,
    /// Both competitors, no mutualist.
    E5,
    /// Competitor 1 with the boosted mutualist.
    E6,
    /// Coexistence, plus branch of the quadratic.
    E7Plus,
    /// Coexistence, minus branch.
    E7Minus,
}

impl EquilibriumLabel {
    pub const ALL: [EquilibriumLabel; 9] = [
        EquilibriumLabel::E0,
        EquilibriumLabel::E1,
        EquilibriumLabel::E2,
        EquilibriumLabel::E3,
        EquilibriumLabel::E4,
        EquilibriumLabel::E5,
        EquilibriumLabel::E6,
        EquilibriumLabel::E7Plus,
        EquilibriumLabel::E7Minus,
    ];
}

impl std::fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EquilibriumLabel::E0 => "E0",
            EquilibriumLabel::E1 => "E1",
            EquilibriumLabel::E2 => "E2",
            EquilibriumLabel::E3 => "E3",
            EquilibriumLabel::E4 => "E4",
            EquilibriumLabel::E5 => "E5",
            EquilibriumLabel::E6 => "E6",
            EquilibriumLabel::E7Plus => "E7+",
            EquilibriumLabel::E7Minus => "E7-",
        };
        f.write_str(s)
    }
}

/// One steady state. Coordinates may be NaN when the state does not exist
/// for the given parameters (negative discriminant, vanishing denominator);
/// such records are never admissible.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub coords: StateVec,
    pub admissible: bool,
    /// Labels of other steady states within `COINCIDENCE_TOL` of this one.
    pub coincides_with: Vec<EquilibriumLabel>,
}

impl Equilibrium {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{}",
            self.label, self.coords.p1, self.coords.p2, self.coords.u, self.admissible
        )
    }
}

pub const EQUILIBRIA_CSV_HEADER: &str = "label,p1,p2,u,admissible";

/// Roots of the coexistence quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceRoots {
    /// Coefficient of `z` in the quadratic: `1 - a*b + m*L - m*l`.
    pub linear_coeff: f64,
    /// `linear_coeff^2 + 4*m*l*(1 + m*L - a)`.
    pub discriminant: f64,
    pub z_plus: Option<f64>,
    pub z_minus: Option<f64>,
    /// True when `m*l = 0` and the quadratic collapses to a linear equation;
    /// the single root (if any) is carried on `z_plus`.
    pub degenerate: bool,
}

pub fn coexistence_roots(p: &ModelParams) -> CoexistenceRoots {
    let ml = p.m * p.l;
    let b_coeff = 1.0 - p.a * p.b + p.m * p.cap_l - ml;
    let c_term = 1.0 + p.m * p.cap_l - p.a;
    if ml == 0.0 {
        let z = if b_coeff != 0.0 {
            Some(c_term / b_coeff)
        } else {
            None
        };
        return CoexistenceRoots {
            linear_coeff: b_coeff,
            discriminant: b_coeff * b_coeff,
            z_plus: z,
            z_minus: None,
            degenerate: true,
        };
    }
    let disc = b_coeff * b_coeff + 4.0 * ml * c_term;
    if disc < 0.0 {
        return CoexistenceRoots {
            linear_coeff: b_coeff,
            discriminant: disc,
            z_plus: None,
            z_minus: None,
            degenerate: false,
        };
    }
    // Citardauq-stable root pair: avoids cancellation when b_coeff dominates.
    let sq = disc.sqrt();
    let q = -0.5 * (b_coeff + sq.copysign(if b_coeff == 0.0 { 1.0 } else { b_coeff }));
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / ml, -c_term / q)
    };
    CoexistenceRoots {
        linear_coeff: b_coeff,
        discriminant: disc,
        z_plus: Some(r1.max(r2)),
        z_minus: Some(r1.min(r2)),
        degenerate: false,
    }
}

fn coexistence_state(p: &ModelParams, z: Option<f64>) -> StateVec {
    match z {
        Some(z) => StateVec::new(z, 1.0 - p.b * z, p.cap_l + p.l * z),
        None => StateVec::new(f64::NAN, f64::NAN, f64::NAN),
    }
}

/// All nine steady-state records in label order.
pub fn enumerate_equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    let roots = coexistence_roots(p);
    let denom = 1.0 - p.a * p.b;
    let e5 = if denom != 0.0 {
        StateVec::new((1.0 - p.a) / denom, (1.0 - p.b) / denom, 0.0)
    } else {
        StateVec::new(f64::NAN, f64::NAN, f64::NAN)
    };
    let coords = [
        StateVec::new(0.0, 0.0, 0.0),
        StateVec::new(1.0, 0.0, 0.0),
        StateVec::new(0.0, 1.0, 0.0),
        StateVec::new(0.0, 0.0, p.cap_l),
        StateVec::new(0.0, 1.0, p.cap_l),
        e5,
        StateVec::new(1.0, 0.0, p.cap_l + p.l),
        coexistence_state(p, roots.z_plus),
        coexistence_state(p, roots.z_minus),
    ];
    let mut out: Vec<Equilibrium> = EquilibriumLabel::ALL
        .iter()
        .zip(coords)
        .map(|(label, mut c)| {
            let mut admissible = true;
            for v in [&mut c.p1, &mut c.p2, &mut c.u] {
                if !v.is_finite() || *v < -ADMISSIBILITY_TOL {
                    admissible = false;
                } else if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Equilibrium {
                label: *label,
                coords: c,
                admissible,
                coincides_with: Vec::new(),
            }
        })
        .collect();
    for i in 0..out.len() {
        for j in 0..i {
            let a = out[i].coords.as_array();
            let b = out[j].coords.as_array();
            if a.iter().all(|v| v.is_finite())
                && b.iter().all(|v| v.is_finite())
                && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COINCIDENCE_TOL)
            {
                let (li, lj) = (out[i].label, out[j].label);
                out[i].coincides_with.push(lj);
                out[j].coincides_with.push(li);
            }
        }
    }
    out
}

pub fn find_equilibrium(p: &ModelParams, label: EquilibriumLabel) -> Equilibrium {
    enumerate_equilibria(p)
        .into_iter()
        .find(|e| e.label == label)
        .expect("all labels enumerated")
}

/// The coexistence thresholds in `a` for the resident scenario: the two
/// roots of the discriminant of the coexistence quadratic, viewed as a
/// quadratic in `a`. For `a <= a1` both coexistence roots are real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceThresholds {
    pub a1: f64,
    pub a2: f64,
}

pub fn a1_threshold(p: &ModelParams) -> Result<CoexistenceThresholds, DomainError> {
    let ml = p.m * p.l;
    if !(p.b > 0.0 && p.b < 1.0) {
        return Err(DomainError::InvalidParameter {
            name: "b",
            requirement: "strictly between 0 and 1 for the coexistence threshold",
            value: p.b,
        });
    }
    if ml <= 0.0 {
        return Err(DomainError::InvalidParameter {
            name: "m*l",
            requirement: "> 0 for the coexistence threshold",
            value: ml,
        });
    }
    let one_ml = 1.0 + p.m * p.cap_l;
    let s = p.b * one_ml + (2.0 - p.b) * ml;
    let root = (ml * (1.0 - p.b) * (p.b * one_ml + ml)).sqrt();
    Ok(CoexistenceThresholds {
        a1: (s - 2.0 * root) / (p.b * p.b),
        a2: (s + 2.0 * root) / (p.b * p.b),
    })
}

/// Outcome of linearizing around the pre-invasion state.
#[derive(Debug, Clone, PartialEq)]
pub struct InvasionClassification {
    pub scenario: Scenario,
    /// The pre-invasion state being invaded.
    pub source: Equilibrium,
    /// The state the wave connects to, when invasion succeeds.
    pub target: Option<Equilibrium>,
    pub invadable: bool,
    /// Growth rate of the invading block at zero wavenumber; invasion
    /// requires it to be positive.
    pub gamma1_at_zero: f64,
    /// Whether other steady states sit strictly between source and target
    /// in the cooperative order.
    pub boundary_equilibria_present: bool,
    /// True when the theory pins a single spreading speed; fails exactly
    /// when intermediate steady states exist.
    pub single_speed_guaranteed: bool,
}

/// Decide whether the scenario's invader can grow at the source state and
/// which steady state the invasion front connects to.
pub fn classify_invasion(p: &ModelParams, scenario: Scenario) -> InvasionClassification {
    let one_ml = 1.0 + p.m * p.cap_l;
    match scenario {
        Scenario::Invader => {
            let source = find_equilibrium(p, EquilibriumLabel::E4);
            let gamma1 = p.alpha * (1.0 - p.a / one_ml);
            if gamma1 <= 0.0 {
                return InvasionClassification {
                    scenario,
                    source,
                    target: None,
                    invadable: false,
                    gamma1_at_zero: gamma1,
                    boundary_equilibria_present: false,
                    single_speed_guaranteed: false,
                };
            }
            // b < 1 removes the competitor-1-free boundary states from the
            // order interval and the wave reaches coexistence. Otherwise the
            // exclusion state E6 is the target and intermediate states exist.
            let coexist = p.b < 1.0;
            let target = if coexist {
                EquilibriumLabel::E7Plus
            } else {
                EquilibriumLabel::E6
            };
            InvasionClassification {
                scenario,
                source,
                target: Some(find_equilibrium(p, target)),
                invadable: true,
                gamma1_at_zero: gamma1,
                boundary_equilibria_present: !coexist,
                single_speed_guaranteed: coexist,
            }
        }
        Scenario::Resident => {
            let source = find_equilibrium(p, EquilibriumLabel::E6);
            let gamma1 = p.beta * (1.0 - p.b);
            if gamma1 <= 0.0 {
                return InvasionClassification {
                    scenario,
                    source,
                    target: None,
                    invadable: false,
                    gamma1_at_zero: gamma1,
                    boundary_equilibria_present: false,
                    single_speed_guaranteed: false,
                };
            }
            let ml = p.m * p.l;
            let coexist = if ml <= one_ml * (1.0 - p.b) {
                p.a <= one_ml
            } else if p.b > 0.0 {
                // Threshold in a below which both coexistence roots are real
                // and inside the box.
                let th = a1_threshold(p).expect("b in (0,1) and m*l > 0 here");
                p.a <= th.a1
            } else {
                // b = 0 falls outside the closed threshold statement; decide
                // by direct admissibility of the plus root.
                find_equilibrium(p, EquilibriumLabel::E7Plus).admissible
            };
            let target = if coexist {
                EquilibriumLabel::E7Plus
            } else {
                EquilibriumLabel::E4
            };
            InvasionClassification {
                scenario,
                source,
                target: Some(find_equilibrium(p, target)),
                invadable: true,
                gamma1_at_zero: gamma1,
                boundary_equilibria_present: !coexist,
                single_speed_guaranteed: coexist,
            }
        }
    }
}

/// A steady state carried into one of the cooperative frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedEquilibrium {
    pub origin: EquilibriumLabel,
    pub state: TransformedState,
}

/// The full steady-state list mapped through the scenario's frame.
pub fn transformed_equilibria(p: &ModelParams, scenario: Scenario) -> Vec<TransformedEquilibrium> {
    enumerate_equilibria(p)
        .into_iter()
        .map(|e| TransformedEquilibrium {
            origin: e.label,
            state: crate::model::to_transformed(scenario, e.coords, p),
        })
        .collect()
}

/// Largest absolute reaction component over all admissible steady states;
/// used by tests and as a solver blow-up scale.
pub fn max_equilibrium_residual(p: &ModelParams) -> f64 {
    let mut worst: f64 = 0.0;
    for e in enumerate_equilibria(p) {
        if !e.admissible {
            continue;
        }
        if let Ok(f) = reaction(SystemId::CcmF, e.coords.as_array(), p) {
            for v in f {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}
