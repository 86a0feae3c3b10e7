//! Method-of-lines simulator on a 1-D interval.
//!
//! Space is discretized with the second-order central Laplacian on a uniform
//! grid; boundary values are held fixed at their initial values (the rate is
//! zeroed at the two boundary nodes). Time stepping is classical fourth-order
//! Runge-Kutta with a diffusion-limited step `dt <= cfl_safety * dx^2 / max D`.
//! Each snapshot interval is split into equal steps so snapshot times are hit
//! exactly.
//!
//! After every step the solution is checked: values in `(-1e-12, 0)` are
//! clamped to zero (counted in the diagnostics) when clamping is enabled, and
//! any non-finite value or value beyond ten times the largest admissible
//! steady-state magnitude aborts with [`SolverError::Stability`].

use crate::equilibria::{enumerate_equilibria, find_equilibrium, EquilibriumLabel};
use crate::error::{DomainError, SolverError};
use crate::model::{
    components_to_original, reaction, to_transformed, ModelParams, Scenario, SystemId,
};
use std::io;

/// Negative values above this (toward zero) are treated as roundoff.
pub const CLAMP_TOL: f64 = 1e-12;

/// Uniform spatial grid on `[0, length]` with `n >= 3` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    length: f64,
    n: usize,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Grid, SolverError> {
        if !length.is_finite() || length <= 0.0 {
            return Err(SolverError::Config(format!(
                "grid length must be finite and positive, got {length}"
            )));
        }
        if n < 3 {
            return Err(SolverError::Config(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        Ok(Grid { length, n })
    }

    /// Grid with spacing as close to `dx` as an integer node count allows.
    pub fn from_spacing(length: f64, dx: f64) -> Result<Grid, SolverError> {
        if !dx.is_finite() || dx <= 0.0 {
            return Err(SolverError::Config(format!(
                "grid spacing must be finite and positive, got {dx}"
            )));
        }
        let intervals = (length / dx).round();
        if !intervals.is_finite() || intervals < 2.0 || intervals > 1e8 {
            return Err(SolverError::Config(format!(
                "grid spacing {dx} gives an unusable node count for length {length}"
            )));
        }
        Grid::new(length, intervals as usize + 1)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.length * i as f64 / (self.n - 1) as f64
    }
}

/// The three species values on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    pub t: f64,
    values: [Vec<f64>; 3],
}

impl Field {
    pub fn constant(grid: Grid, state: [f64; 3], t: f64) -> Field {
        let n = grid.n();
        Field {
            grid,
            t,
            values: [
                vec![state[0]; n],
                vec![state[1]; n],
                vec![state[2]; n],
            ],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species(&self, sp: usize) -> &[f64] {
        &self.values[sp]
    }

    pub fn species_mut(&mut self, sp: usize) -> &mut [f64] {
        &mut self.values[sp]
    }

    pub fn state_at(&self, i: usize) -> [f64; 3] {
        [self.values[0][i], self.values[1][i], self.values[2][i]]
    }

    fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Initial perturbation: a Gaussian bump added to the invading species.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub sigma: f64,
    /// Defaults to the domain midpoint.
    pub center: Option<f64>,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec {
            amplitude: 1.0,
            sigma: 2.0,
            center: None,
        }
    }
}

/// What the run models; picks the background state and the bumped species.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimScenario {
    Invader,
    Resident,
    /// Caller supplies the initial field via [`simulate_from`].
    Custom,
}

impl SimScenario {
    pub fn frame(&self) -> Option<Scenario> {
        match self {
            SimScenario::Invader => Some(Scenario::Invader),
            SimScenario::Resident => Some(Scenario::Resident),
            SimScenario::Custom => None,
        }
    }
}

impl std::fmt::Display for SimScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimScenario::Invader => write!(f, "invader"),
            SimScenario::Resident => write!(f, "resident"),
            SimScenario::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub scenario: SimScenario,
    /// Which right-hand side to integrate; defaults to the original frame.
    pub system: SystemId,
    pub grid: Grid,
    pub t_end: f64,
    /// Must start at the initial time and end at `t_end`, strictly
    /// increasing.
    pub snapshot_times: Vec<f64>,
    pub bump: BumpSpec,
    /// Fraction of the diffusive stability limit used for `dt`, in (0, 0.5).
    pub cfl_safety: f64,
    pub clamp_negative: bool,
}

impl SimConfig {
    pub fn new(params: ModelParams, scenario: SimScenario) -> SimConfig {
        let mut cfg = SimConfig {
            params,
            scenario,
            system: SystemId::CcmF,
            grid: Grid::new(400.0, 4001).expect("default grid is valid"),
            t_end: 100.0,
            snapshot_times: Vec::new(),
            bump: BumpSpec::default(),
            cfl_safety: 0.4,
            clamp_negative: true,
        };
        cfg.set_uniform_snapshots(51);
        cfg
    }

    /// Evenly spaced snapshot times from 0 to `t_end` inclusive.
    pub fn set_uniform_snapshots(&mut self, count: usize) {
        self.snapshot_times = uniform_times(self.t_end, count);
    }

    /// The time step the integrator will use on an interval of length
    /// `delta`.
    pub fn dt_limit(&self) -> f64 {
        let diff = self.params.diffusivities(self.system);
        let dmax = diff.iter().cloned().fold(f64::MIN, f64::max);
        let dx = self.grid.dx();
        self.cfl_safety * dx * dx / dmax
    }
}

pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    if t_end <= 0.0 || count < 2 {
        return vec![0.0];
    }
    (0..count)
        .map(|k| t_end * k as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Step actually used on the first snapshot interval.
    pub dt: f64,
    /// Diffusive stability limit the step was chosen under.
    pub dt_limit: f64,
    pub steps: u64,
    pub negative_clamps: u64,
    /// Largest |du/dt| seen at any node.
    pub max_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SimConfig,
    /// First snapshot is the initial condition.
    pub snapshots: Vec<Field>,
    pub diagnostics: Diagnostics,
}

fn config_err(msg: impl Into<String>) -> SolverError {
    SolverError::Config(msg.into())
}

pub fn validate(config: &SimConfig) -> Result<(), SolverError> {
    config.params.validate()?;
    match (config.system.frame(), config.scenario) {
        (_, SimScenario::Custom) => {}
        (None, _) => {}
        (Some(Scenario::Invader), SimScenario::Invader) => {}
        (Some(Scenario::Resident), SimScenario::Resident) => {}
        (Some(_), _) => {
            return Err(config_err(format!(
                "system {} cannot run the {} scenario",
                config.system, config.scenario
            )))
        }
    }
    if !config.t_end.is_finite() || config.t_end < 0.0 {
        return Err(config_err(format!(
            "t_end must be finite and nonnegative, got {}",
            config.t_end
        )));
    }
    if !(config.cfl_safety > 0.0 && config.cfl_safety < 0.5) {
        return Err(config_err(format!(
            "cfl_safety must lie strictly between 0 and 0.5, got {}",
            config.cfl_safety
        )));
    }
    let times = &config.snapshot_times;
    if times.is_empty() {
        return Err(config_err("snapshot_times must not be empty"));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(config_err("snapshot times must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err("snapshot times must be strictly increasing"));
    }
    let last = *times.last().unwrap();
    if (last - config.t_end).abs() > 1e-9 * config.t_end.max(1.0) {
        return Err(config_err(format!(
            "snapshot times must end at t_end = {}, got {last}",
            config.t_end
        )));
    }
    if config.scenario != SimScenario::Custom {
        let b = &config.bump;
        if !b.amplitude.is_finite() || b.amplitude < 0.0 {
            return Err(config_err(format!(
                "bump amplitude must be finite and nonnegative, got {}",
                b.amplitude
            )));
        }
        if !b.sigma.is_finite() || b.sigma < 2.0 * config.grid.dx() {
            return Err(config_err(format!(
                "bump sigma must be at least two grid spacings ({}), got {}",
                2.0 * config.grid.dx(),
                b.sigma
            )));
        }
        if let Some(c) = b.center {
            if !(0.0..=config.grid.length()).contains(&c) {
                return Err(config_err(format!(
                    "bump center {c} lies outside the domain [0, {}]",
                    config.grid.length()
                )));
            }
        }
    }
    Ok(())
}

/// Blow-up guard: ten times the largest admissible steady-state component in
/// the system's own coordinates, with a floor of 1.
pub fn blowup_limit(p: &ModelParams, system: SystemId) -> f64 {
    let pp = if system == SystemId::ResidentH0 {
        let mut q = *p;
        q.m = 0.0;
        q
    } else {
        *p
    };
    let mut mx = 1.0_f64;
    for e in enumerate_equilibria(&pp) {
        if !e.admissible {
            continue;
        }
        let coords = match system.frame() {
            None => e.coords.as_array(),
            Some(frame) => to_transformed(frame, e.coords, &pp).as_array(),
        };
        for v in coords {
            mx = mx.max(v.abs());
        }
    }
    10.0 * mx
}

/// Background state plus a Gaussian bump on the invading species. Boundary
/// nodes carry exactly the background state.
pub fn initial_condition(config: &SimConfig) -> Result<Field, SolverError> {
    validate(config)?;
    let frame = match config.scenario.frame() {
        Some(f) => f,
        None => {
            return Err(config_err(
                "the custom scenario requires an explicit initial field; use simulate_from",
            ))
        }
    };
    let source_label = match frame {
        Scenario::Invader => EquilibriumLabel::E4,
        Scenario::Resident => EquilibriumLabel::E6,
    };
    let source_orig = find_equilibrium(&config.params, source_label).coords;
    // The invading species is 0 except in the original frame of the resident
    // scenario, where species 2 invades.
    let (source, bump_species) = match (config.system, frame) {
        (SystemId::CcmF, Scenario::Invader) => (source_orig.as_array(), 0),
        (SystemId::CcmF, Scenario::Resident) => (source_orig.as_array(), 1),
        (_, f) => (
            to_transformed(f, source_orig, &config.params).as_array(),
            0,
        ),
    };
    let n = config.grid.n();
    let center = config.bump.center.unwrap_or(config.grid.length() / 2.0);
    let sigma = config.bump.sigma;
    let mut field = Field::constant(config.grid.clone(), source, 0.0);
    let vals = field.species_mut(bump_species);
    for i in 1..n - 1 {
        let dev = config.grid.x(i) - center;
        vals[i] += config.bump.amplitude * (-dev * dev / (2.0 * sigma * sigma)).exp();
    }
    Ok(field)
}

struct Workspace {
    k1: [Vec<f64>; 3],
    k2: [Vec<f64>; 3],
    k3: [Vec<f64>; 3],
    k4: [Vec<f64>; 3],
    stage: [Vec<f64>; 3],
}

impl Workspace {
    fn new(n: usize) -> Workspace {
        let z = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        Workspace {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            stage: z(),
        }
    }
}

fn eval_rhs<F>(
    y: &[Vec<f64>; 3],
    react: &F,
    diff: &[f64; 3],
    inv_dx2: f64,
    out: &mut [Vec<f64>; 3],
) -> Result<f64, DomainError>
where
    F: Fn([f64; 3]) -> Result<[f64; 3], DomainError>,
{
    let n = y[0].len();
    for sp in 0..3 {
        out[sp][0] = 0.0;
        out[sp][n - 1] = 0.0;
    }
    let mut max_rate = 0.0_f64;
    for i in 1..n - 1 {
        let s = [y[0][i], y[1][i], y[2][i]];
        let r = react(s)?;
        for sp in 0..3 {
            let lap = (y[sp][i - 1] - 2.0 * y[sp][i] + y[sp][i + 1]) * inv_dx2;
            let v = r[sp] + diff[sp] * lap;
            out[sp][i] = v;
            let a = v.abs();
            if a > max_rate {
                max_rate = a;
            }
        }
    }
    Ok(max_rate)
}

fn form_stage(y: &[Vec<f64>; 3], k: &[Vec<f64>; 3], c: f64, stage: &mut [Vec<f64>; 3]) {
    for sp in 0..3 {
        for i in 0..y[sp].len() {
            stage[sp][i] = y[sp][i] + c * k[sp][i];
        }
    }
}

/// One classical RK4 step in place; returns max |rate| from the first stage.
fn rk4_step<F>(
    y: &mut [Vec<f64>; 3],
    react: &F,
    diff: &[f64; 3],
    inv_dx2: f64,
    dt: f64,
    ws: &mut Workspace,
) -> Result<f64, DomainError>
where
    F: Fn([f64; 3]) -> Result<[f64; 3], DomainError>,
{
    let max_rate = eval_rhs(y, react, diff, inv_dx2, &mut ws.k1)?;
    form_stage(y, &ws.k1, 0.5 * dt, &mut ws.stage);
    eval_rhs(&ws.stage, react, diff, inv_dx2, &mut ws.k2)?;
    form_stage(y, &ws.k2, 0.5 * dt, &mut ws.stage);
    eval_rhs(&ws.stage, react, diff, inv_dx2, &mut ws.k3)?;
    form_stage(y, &ws.k3, dt, &mut ws.stage);
    eval_rhs(&ws.stage, react, diff, inv_dx2, &mut ws.k4)?;
    let w = dt / 6.0;
    for sp in 0..3 {
        for i in 0..y[sp].len() {
            y[sp][i] +=
                w * (ws.k1[sp][i] + 2.0 * ws.k2[sp][i] + 2.0 * ws.k3[sp][i] + ws.k4[sp][i]);
        }
    }
    Ok(max_rate)
}

fn sanitize(
    y: &mut [Vec<f64>; 3],
    t: f64,
    limit: f64,
    clamp: bool,
) -> Result<u64, SolverError> {
    let mut clamps = 0u64;
    for (sp, vals) in y.iter_mut().enumerate() {
        for (i, v) in vals.iter_mut().enumerate() {
            if clamp && *v < 0.0 && *v > -CLAMP_TOL {
                *v = 0.0;
                clamps += 1;
            }
            if !v.is_finite() || v.abs() > limit {
                return Err(SolverError::Stability {
                    t,
                    species: sp,
                    node: i,
                    value: *v,
                    limit,
                });
            }
        }
    }
    Ok(clamps)
}

/// One RK4 step of `dt` from the given field, with the same boundary,
/// clamping, and blow-up handling as [`simulate`].
pub fn step(
    field: &Field,
    p: &ModelParams,
    system: SystemId,
    dt: f64,
    clamp_negative: bool,
) -> Result<Field, SolverError> {
    p.validate()?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(config_err(format!("dt must be finite and positive, got {dt}")));
    }
    if !field.is_finite() {
        return Err(config_err("initial field contains non-finite values"));
    }
    let mut out = field.clone();
    let mut ws = Workspace::new(field.grid.n());
    let diff = p.diffusivities(system);
    let inv_dx2 = 1.0 / (field.grid.dx() * field.grid.dx());
    let react = |s: [f64; 3]| reaction(system, s, p);
    rk4_step(&mut out.values, &react, &diff, inv_dx2, dt, &mut ws)?;
    let limit = blowup_limit(p, system);
    sanitize(&mut out.values, field.t + dt, limit, clamp_negative)?;
    out.t = field.t + dt;
    Ok(out)
}

/// Build the scenario's initial condition and integrate.
pub fn simulate(config: &SimConfig) -> Result<Trajectory, SolverError> {
    let initial = initial_condition(config)?;
    simulate_from(config, initial)
}

/// Integrate from a caller-supplied initial field. The field's time must be
/// the first snapshot time.
pub fn simulate_from(config: &SimConfig, initial: Field) -> Result<Trajectory, SolverError> {
    validate(config)?;
    if initial.grid != config.grid {
        return Err(config_err("initial field grid does not match the config grid"));
    }
    if !initial.is_finite() {
        return Err(config_err("initial field contains non-finite values"));
    }
    let times = &config.snapshot_times;
    if (initial.t - times[0]).abs() > 1e-9 * times[0].max(1.0) {
        return Err(config_err(format!(
            "initial field time {} does not match the first snapshot time {}",
            initial.t, times[0]
        )));
    }
    let diff = config.params.diffusivities(config.system);
    let dt_limit = config.dt_limit();
    let limit = blowup_limit(&config.params, config.system);
    let inv_dx2 = 1.0 / (config.grid.dx() * config.grid.dx());
    let react = |s: [f64; 3]| reaction(config.system, s, &config.params);
    let mut ws = Workspace::new(config.grid.n());
    let mut field = initial;
    let mut diag = Diagnostics {
        dt: 0.0,
        dt_limit,
        ..Diagnostics::default()
    };
    let mut snapshots = Vec::with_capacity(times.len());
    snapshots.push(field.clone());
    for w in times.windows(2) {
        let delta = w[1] - w[0];
        let nsteps = (delta / dt_limit).ceil().max(1.0) as u64;
        let dt = delta / nsteps as f64;
        if diag.dt == 0.0 {
            diag.dt = dt;
        }
        for j in 0..nsteps {
            let rate = rk4_step(&mut field.values, &react, &diff, inv_dx2, dt, &mut ws)?;
            if rate > diag.max_rate {
                diag.max_rate = rate;
            }
            diag.steps += 1;
            let t_after = w[0] + (j + 1) as f64 * dt;
            diag.negative_clamps +=
                sanitize(&mut field.values, t_after, limit, config.clamp_negative)?;
        }
        field.t = w[1];
        snapshots.push(field.clone());
    }
    Ok(Trajectory {
        config: config.clone(),
        snapshots,
        diagnostics: diag,
    })
}

/// Paired run of the resident-frame system and its frozen-feedback upper
/// bound from the same initial data and with the same steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub primary: Trajectory,
    pub frozen: Trajectory,
    /// Largest amount by which the primary solution exceeds the frozen one
    /// anywhere; domination means this stays at roundoff size.
    pub max_violation: f64,
}

pub fn comparison_run(config: &SimConfig) -> Result<ComparisonReport, SolverError> {
    if config.system != SystemId::ResidentH {
        return Err(config_err(
            "comparison_run requires the resident-frame system",
        ));
    }
    if config.scenario != SimScenario::Resident {
        return Err(config_err("comparison_run requires the resident scenario"));
    }
    let initial = initial_condition(config)?;
    // Domination only holds on the box [0,1] x [0,1] x [0,l].
    let caps = [1.0, 1.0, config.params.l];
    for sp in 0..3 {
        for v in initial.species(sp) {
            if *v < -CLAMP_TOL || *v > caps[sp] + CLAMP_TOL {
                return Err(config_err(format!(
                    "initial data leaves the comparison box in species {sp}: {v}"
                )));
            }
        }
    }
    let primary = simulate_from(config, initial.clone())?;
    let mut frozen_cfg = config.clone();
    frozen_cfg.system = SystemId::ResidentH0;
    let frozen = simulate_from(&frozen_cfg, initial)?;
    let mut max_violation = f64::MIN;
    for (a, b) in primary.snapshots.iter().zip(&frozen.snapshots) {
        for sp in 0..3 {
            for (x, y) in a.species(sp).iter().zip(b.species(sp)) {
                let d = x - y;
                if d > max_violation {
                    max_violation = d;
                }
            }
        }
    }
    Ok(ComparisonReport {
        primary,
        frozen,
        max_violation,
    })
}

/// CSV rows `t,x,p1,p2,u` for every snapshot and node, converted back to
/// original coordinates when the run used a transformed frame. Config and
/// diagnostics are echoed as `#` comment lines.
pub fn write_trajectory_csv<W: io::Write>(traj: &Trajectory, out: &mut W) -> io::Result<()> {
    let c = &traj.config;
    let p = &c.params;
    writeln!(out, "# system = {}", c.system)?;
    writeln!(out, "# scenario = {}", c.scenario)?;
    writeln!(
        out,
        "# alpha = {:.16e}, beta = {:.16e}, gamma = {:.16e}",
        p.alpha, p.beta, p.gamma
    )?;
    writeln!(
        out,
        "# a = {:.16e}, b = {:.16e}, m = {:.16e}, l = {:.16e}, L = {:.16e}",
        p.a, p.b, p.m, p.l, p.cap_l
    )?;
    writeln!(
        out,
        "# d1 = {:.16e}, d2 = {:.16e}, d3 = {:.16e}",
        p.d1, p.d2, p.d3
    )?;
    writeln!(
        out,
        "# domain_length = {:.16e}, nodes = {}, dx = {:.16e}",
        c.grid.length(),
        c.grid.n(),
        c.grid.dx()
    )?;
    writeln!(
        out,
        "# t_end = {:.16e}, snapshots = {}, cfl_safety = {:.16e}, clamp_negative = {}",
        c.t_end,
        traj.snapshots.len(),
        c.cfl_safety,
        c.clamp_negative
    )?;
    let d = &traj.diagnostics;
    writeln!(
        out,
        "# dt = {:.16e}, steps = {}, negative_clamps = {}, max_rate = {:.16e}",
        d.dt, d.steps, d.negative_clamps, d.max_rate
    )?;
    if c.system.frame().is_some() {
        writeln!(out, "# values converted from the {} frame", c.system)?;
    }
    writeln!(out, "t,x,p1,p2,u")?;
    for snap in &traj.snapshots {
        for i in 0..snap.grid.n() {
            let s = components_to_original(c.system, snap.state_at(i), p);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                snap.t,
                snap.grid.x(i),
                s[0],
                s[1],
                s[2]
            )?;
        }
    }
    Ok(())
}
