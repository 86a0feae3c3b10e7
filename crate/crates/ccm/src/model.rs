//! Reaction terms, Jacobians, and coordinate changes for the diffusive
//! competitor-competitor-mutualist system.
//!
//! Original coordinates `p = (p1, p2, u)`: competitor 1, competitor 2, and a
//! mutualist that benefits competitor 1. The kinetics are
//!
//! ```text
//! f1 = alpha * p1 * (1 - p1 - a*p2 / (1 + m*u))
//! f2 = beta  * p2 * (1 - p2 - b*p1)
//! f3 = gamma * u  * (1 - u / (L + l*p1))
//! ```
//!
//! The mutualist raises the carrying capacity of species 1's environment
//! (denominator `1 + m*u`) and species 1 raises the mutualist's carrying
//! capacity (`L + l*p1`).
//!
//! Two affine coordinate changes make the system cooperative on a box, one
//! per invasion scenario:
//!
//! * invader frame `q = (p1, 1 - p2, u - L)` for species 1 invading the
//!   species-2 monoculture,
//! * resident frame `q = (p2, 1 - p1, L + l - u)` for species 2 invading the
//!   species-1 plus mutualist state. In this frame the diffusivities are
//!   reordered to `(d2, d1, d3)`.
//!
//! [`SystemId::ResidentH0`] is the resident frame with the mutualist feedback
//! on competition frozen (`m` treated as 0 in the interaction term). It
//! dominates the true resident system on the relevant box and serves as a
//! comparison upper bound.

use crate::error::DomainError;

/// Denominators at or below this are treated as singular.
pub const DENOM_TOL: f64 = 1e-12;

/// Model parameters. `cap_l` is the mutualist's baseline carrying capacity
/// (written `L` in reports); `d1`, `d2`, `d3` are the diffusivities of
/// `p1`, `p2`, `u` in the original frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Growth rate of competitor 1.
    pub alpha: f64,
    /// Growth rate of competitor 2.
    pub beta: f64,
    /// Growth rate of the mutualist.
    pub gamma: f64,
    /// Competitive effect of species 2 on species 1.
    pub a: f64,
    /// Competitive effect of species 1 on species 2.
    pub b: f64,
    /// Strength of the mutualist's protection of species 1.
    pub m: f64,
    /// Gain in mutualist carrying capacity per unit of species 1.
    pub l: f64,
    /// Baseline mutualist carrying capacity, must be positive.
    pub cap_l: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Default for ModelParams {
    /// Baseline used throughout the examples: symmetric competitors at
    /// two-thirds interaction strength, no protective feedback.
    fn default() -> Self {
        ModelParams {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            a: 2.0 / 3.0,
            b: 2.0 / 3.0,
            m: 0.0,
            l: 0.45,
            cap_l: 1.0 / 3.0,
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        let err = |name, requirement, value| {
            Err(DomainError::InvalidParameter {
                name,
                requirement,
                value,
            })
        };
        let positives = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("L", self.cap_l),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
        ];
        for (name, v) in positives {
            if !v.is_finite() || v <= 0.0 {
                return err(name, "finite and > 0", v);
            }
        }
        let nonnegatives = [("a", self.a), ("b", self.b), ("m", self.m), ("l", self.l)];
        for (name, v) in nonnegatives {
            if !v.is_finite() || v < 0.0 {
                return err(name, "finite and >= 0", v);
            }
        }
        Ok(())
    }

    /// Diffusivities in the order the chosen system's components use them.
    pub fn diffusivities(&self, system: SystemId) -> [f64; 3] {
        match system {
            SystemId::CcmF | SystemId::InvaderG => [self.d1, self.d2, self.d3],
            SystemId::ResidentH | SystemId::ResidentH0 => [self.d2, self.d1, self.d3],
        }
    }
}

/// State in original coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec {
    pub p1: f64,
    pub p2: f64,
    pub u: f64,
}

impl StateVec {
    pub fn new(p1: f64, p2: f64, u: f64) -> Self {
        StateVec { p1, p2, u }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p1, self.p2, self.u]
    }
}

impl From<[f64; 3]> for StateVec {
    fn from(v: [f64; 3]) -> Self {
        StateVec::new(v[0], v[1], v[2])
    }
}

/// Which invasion is being set up; selects the coordinate change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Species 1 (with its mutualist) invades the species-2 monoculture.
    Invader,
    /// Species 2 invades the established species-1 plus mutualist state.
    Resident,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Invader => write!(f, "invader"),
            Scenario::Resident => write!(f, "resident"),
        }
    }
}

/// State in one of the cooperative frames. The tag records which frame the
/// numbers live in; mixing frames is a [`DomainError::CoordinateMismatch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub q1: f64,
    pub q2: f64,
    pub v: f64,
    pub frame: Scenario,
}

impl TransformedState {
    pub fn as_array(&self) -> [f64; 3] {
        [self.q1, self.q2, self.v]
    }
}

/// The four right-hand sides the crate can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemId {
    /// Original coordinates.
    CcmF,
    /// Invader frame, cooperative.
    InvaderG,
    /// Resident frame, cooperative.
    ResidentH,
    /// Resident frame with the protective feedback frozen; dominates
    /// `ResidentH` componentwise on the unit box.
    ResidentH0,
}

impl SystemId {
    pub fn frame(&self) -> Option<Scenario> {
        match self {
            SystemId::CcmF => None,
            SystemId::InvaderG => Some(Scenario::Invader),
            SystemId::ResidentH | SystemId::ResidentH0 => Some(Scenario::Resident),
        }
    }

    pub fn coordinate_names(&self) -> [&'static str; 3] {
        match self {
            SystemId::CcmF => ["p1", "p2", "u"],
            _ => ["q1", "q2", "v"],
        }
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemId::CcmF => write!(f, "original"),
            SystemId::InvaderG => write!(f, "invader-frame"),
            SystemId::ResidentH => write!(f, "resident-frame"),
            SystemId::ResidentH0 => write!(f, "resident-frame-frozen"),
        }
    }
}

/// Tagged state accepted by [`reaction_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    Original(StateVec),
    Transformed(TransformedState),
}

fn guard(system: SystemId, name: &'static str, value: f64) -> Result<f64, DomainError> {
    if !value.is_finite() || value <= DENOM_TOL {
        Err(DomainError::SingularDenominator {
            system,
            name,
            value,
        })
    } else {
        Ok(value)
    }
}

fn check_finite(s: [f64; 3]) -> Result<(), DomainError> {
    for (i, v) in s.iter().enumerate() {
        if !v.is_finite() {
            return Err(DomainError::NonFiniteState { index: i });
        }
    }
    Ok(())
}

fn reaction_f(s: [f64; 3], p: &ModelParams) -> Result<[f64; 3], DomainError> {
    let [p1, p2, u] = s;
    let protect = guard(SystemId::CcmF, "1 + m*u", 1.0 + p.m * u)?;
    let cap = guard(SystemId::CcmF, "L + l*p1", p.cap_l + p.l * p1)?;
    Ok([
        p.alpha * p1 * (1.0 - p1 - p.a * p2 / protect),
        p.beta * p2 * (1.0 - p2 - p.b * p1),
        p.gamma * u * (1.0 - u / cap),
    ])
}

fn jacobian_f(s: [f64; 3], p: &ModelParams) -> Result<[[f64; 3]; 3], DomainError> {
    let [p1, p2, u] = s;
    let protect = guard(SystemId::CcmF, "1 + m*u", 1.0 + p.m * u)?;
    let cap = guard(SystemId::CcmF, "L + l*p1", p.cap_l + p.l * p1)?;
    Ok([
        [
            p.alpha * (1.0 - 2.0 * p1 - p.a * p2 / protect),
            -p.alpha * p.a * p1 / protect,
            p.alpha * p.a * p.m * p1 * p2 / (protect * protect),
        ],
        [
            -p.beta * p.b * p2,
            p.beta * (1.0 - 2.0 * p2 - p.b * p1),
            0.0,
        ],
        [
            p.gamma * p.l * u * u / (cap * cap),
            0.0,
            p.gamma * (1.0 - 2.0 * u / cap),
        ],
    ])
}

fn reaction_g(s: [f64; 3], p: &ModelParams) -> Result<[f64; 3], DomainError> {
    let [q1, q2, v] = s;
    let protect = guard(
        SystemId::InvaderG,
        "1 + m*L + m*v",
        1.0 + p.m * p.cap_l + p.m * v,
    )?;
    let cap = guard(SystemId::InvaderG, "L + l*q1", p.cap_l + p.l * q1)?;
    Ok([
        p.alpha * q1 * (1.0 - q1 + p.a * (q2 - 1.0) / protect),
        p.beta * (1.0 - q2) * (p.b * q1 - q2),
        p.gamma * (v + p.cap_l) * (1.0 - (v + p.cap_l) / cap),
    ])
}

fn jacobian_g(s: [f64; 3], p: &ModelParams) -> Result<[[f64; 3]; 3], DomainError> {
    let [q1, q2, v] = s;
    let protect = guard(
        SystemId::InvaderG,
        "1 + m*L + m*v",
        1.0 + p.m * p.cap_l + p.m * v,
    )?;
    let cap = guard(SystemId::InvaderG, "L + l*q1", p.cap_l + p.l * q1)?;
    let w = v + p.cap_l;
    Ok([
        [
            p.alpha * (1.0 - 2.0 * q1 + p.a * (q2 - 1.0) / protect),
            p.alpha * p.a * q1 / protect,
            -p.alpha * p.a * p.m * q1 * (q2 - 1.0) / (protect * protect),
        ],
        [
            p.beta * p.b * (1.0 - q2),
            p.beta * (2.0 * q2 - 1.0 - p.b * q1),
            0.0,
        ],
        [
            p.gamma * p.l * w * w / (cap * cap),
            0.0,
            p.gamma * (1.0 - 2.0 * w / cap),
        ],
    ])
}

/// Shared body of the resident-frame systems. `frozen` switches off the
/// protective feedback in the interaction term while keeping the same
/// denominator preconditions, so both variants accept exactly the same
/// states.
fn reaction_h_impl(
    s: [f64; 3],
    p: &ModelParams,
    frozen: bool,
) -> Result<[f64; 3], DomainError> {
    let id = if frozen {
        SystemId::ResidentH0
    } else {
        SystemId::ResidentH
    };
    let [q1, q2, v] = s;
    let protect = guard(
        id,
        "1 + m*L + m*l - m*v",
        1.0 + p.m * p.cap_l + p.m * p.l - p.m * v,
    )?;
    let cap = guard(id, "L + l - l*q2", p.cap_l + p.l - p.l * q2)?;
    let interaction = if frozen { p.a * q1 } else { p.a * q1 / protect };
    let w = p.cap_l + p.l - v;
    Ok([
        p.beta * q1 * (1.0 - p.b - q1 + p.b * q2),
        p.alpha * (1.0 - q2) * (interaction - q2),
        p.gamma * w * (w / cap - 1.0),
    ])
}

fn jacobian_h_impl(
    s: [f64; 3],
    p: &ModelParams,
    frozen: bool,
) -> Result<[[f64; 3]; 3], DomainError> {
    let id = if frozen {
        SystemId::ResidentH0
    } else {
        SystemId::ResidentH
    };
    let [q1, q2, v] = s;
    let protect = guard(
        id,
        "1 + m*L + m*l - m*v",
        1.0 + p.m * p.cap_l + p.m * p.l - p.m * v,
    )?;
    let cap = guard(id, "L + l - l*q2", p.cap_l + p.l - p.l * q2)?;
    let w = p.cap_l + p.l - v;
    let (d_q1, d_q2_extra, d_v) = if frozen {
        // interaction = a*q1
        (p.a, p.a * q1, 0.0)
    } else {
        // interaction = a*q1 / protect, d(protect)/dv = -m
        (
            p.a / protect,
            p.a * q1 / protect,
            p.a * p.m * q1 / (protect * protect),
        )
    };
    Ok([
        [
            p.beta * (1.0 - p.b - 2.0 * q1 + p.b * q2),
            p.beta * p.b * q1,
            0.0,
        ],
        [
            p.alpha * (1.0 - q2) * d_q1,
            p.alpha * (2.0 * q2 - 1.0 - d_q2_extra),
            p.alpha * (1.0 - q2) * d_v,
        ],
        [
            0.0,
            p.gamma * p.l * w * w / (cap * cap),
            p.gamma * (1.0 - 2.0 * w / cap),
        ],
    ])
}

/// Evaluate the chosen right-hand side on raw components. The caller is
/// responsible for passing components in the system's own frame; use
/// [`reaction_state`] for tag-checked evaluation.
pub fn reaction(system: SystemId, s: [f64; 3], p: &ModelParams) -> Result<[f64; 3], DomainError> {
    check_finite(s)?;
    match system {
        SystemId::CcmF => reaction_f(s, p),
        SystemId::InvaderG => reaction_g(s, p),
        SystemId::ResidentH => reaction_h_impl(s, p, false),
        SystemId::ResidentH0 => reaction_h_impl(s, p, true),
    }
}

/// Analytic Jacobian of the chosen right-hand side.
pub fn jacobian(
    system: SystemId,
    s: [f64; 3],
    p: &ModelParams,
) -> Result<[[f64; 3]; 3], DomainError> {
    check_finite(s)?;
    match system {
        SystemId::CcmF => jacobian_f(s, p),
        SystemId::InvaderG => jacobian_g(s, p),
        SystemId::ResidentH => jacobian_h_impl(s, p, false),
        SystemId::ResidentH0 => jacobian_h_impl(s, p, true),
    }
}

/// Central finite-difference Jacobian, for validating the analytic one.
pub fn fd_jacobian(
    system: SystemId,
    s: [f64; 3],
    p: &ModelParams,
    h: f64,
) -> Result<[[f64; 3]; 3], DomainError> {
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut hi = s;
        let mut lo = s;
        hi[j] += h;
        lo[j] -= h;
        let fhi = reaction(system, hi, p)?;
        let flo = reaction(system, lo, p)?;
        for i in 0..3 {
            jac[i][j] = (fhi[i] - flo[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Tag-checked evaluation: the state's frame must match the system's.
pub fn reaction_state(
    system: SystemId,
    state: &State,
    p: &ModelParams,
) -> Result<[f64; 3], DomainError> {
    let mismatch = |expected: &'static str, got: &'static str| {
        Err(DomainError::CoordinateMismatch {
            system,
            expected,
            got,
        })
    };
    match (system.frame(), state) {
        (None, State::Original(s)) => reaction(system, s.as_array(), p),
        (Some(frame), State::Transformed(q)) if q.frame == frame => {
            reaction(system, q.as_array(), p)
        }
        (None, State::Transformed(q)) => mismatch("original", frame_name(q.frame)),
        (Some(frame), State::Original(_)) => mismatch(frame_name(frame), "original"),
        (Some(frame), State::Transformed(q)) => mismatch(frame_name(frame), frame_name(q.frame)),
    }
}

fn frame_name(frame: Scenario) -> &'static str {
    match frame {
        Scenario::Invader => "invader-frame",
        Scenario::Resident => "resident-frame",
    }
}

/// Apply the scenario's affine coordinate change.
pub fn to_transformed(scenario: Scenario, s: StateVec, p: &ModelParams) -> TransformedState {
    match scenario {
        Scenario::Invader => TransformedState {
            q1: s.p1,
            q2: 1.0 - s.p2,
            v: s.u - p.cap_l,
            frame: scenario,
        },
        Scenario::Resident => TransformedState {
            q1: s.p2,
            q2: 1.0 - s.p1,
            v: p.cap_l + p.l - s.u,
            frame: scenario,
        },
    }
}

/// Invert the affine coordinate change.
pub fn from_transformed(q: &TransformedState, p: &ModelParams) -> StateVec {
    match q.frame {
        Scenario::Invader => StateVec::new(q.q1, 1.0 - q.q2, q.v + p.cap_l),
        Scenario::Resident => StateVec::new(1.0 - q.q2, q.q1, p.cap_l + p.l - q.v),
    }
}

/// Convert raw components between frames; used by the solver for output.
pub fn components_to_original(
    system: SystemId,
    s: [f64; 3],
    p: &ModelParams,
) -> [f64; 3] {
    match system.frame() {
        None => s,
        Some(frame) => from_transformed(
            &TransformedState {
                q1: s[0],
                q2: s[1],
                v: s[2],
                frame,
            },
            p,
        )
        .as_array(),
    }
}

/// Minimum off-diagonal Jacobian entry of `system` over a sample of the box
/// `[0, corner]`. Nonnegative means the sampled system is cooperative there.
#[derive(Debug, Clone, PartialEq)]
pub struct CooperativityReport {
    pub system: SystemId,
    pub samples: usize,
    pub min_off_diagonal: f64,
    pub witness_state: [f64; 3],
    /// (row, column) of the minimizing entry.
    pub witness_entry: (usize, usize),
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Sample the box `[0, corner]` with a low-discrepancy sequence (plus both
/// corners) and report the smallest off-diagonal Jacobian entry seen.
pub fn cooperativity_report(
    system: SystemId,
    p: &ModelParams,
    corner: [f64; 3],
    samples: usize,
) -> Result<CooperativityReport, DomainError> {
    check_finite(corner)?;
    for (i, c) in corner.iter().enumerate() {
        if *c < 0.0 {
            return Err(DomainError::NonpositiveComponent {
                index: i,
                value: *c,
            });
        }
    }
    let samples = samples.max(2);
    let mut min = f64::INFINITY;
    let mut witness_state = [0.0; 3];
    let mut witness_entry = (0, 1);
    for k in 0..samples {
        let s = match k {
            0 => [0.0, 0.0, 0.0],
            1 => corner,
            _ => [
                corner[0] * radical_inverse(k - 1, 2),
                corner[1] * radical_inverse(k - 1, 3),
                corner[2] * radical_inverse(k - 1, 5),
            ],
        };
        let jac = jacobian(system, s, p)?;
        for (i, row) in jac.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                if i != j && *entry < min {
                    min = *entry;
                    witness_state = s;
                    witness_entry = (i, j);
                }
            }
        }
    }
    Ok(CooperativityReport {
        system,
        samples,
        min_off_diagonal: min,
        witness_state,
        witness_entry,
    })
}
