//! Orchestration: parameter sweeps with CSV summaries, the two-phase
//! capacity-raise (reinvasion) run, and a one-stop analysis report.

use crate::equilibria::{
    a1_threshold, classify_invasion, coexistence_roots, enumerate_equilibria, CoexistenceRoots,
    CoexistenceThresholds, Equilibrium, InvasionClassification, EQUILIBRIA_CSV_HEADER,
};
use crate::error::ExperimentError;
use crate::linear::{
    check_linear_determinacy, cone_condition, linear_speed, principal_eigenvector,
    reference_speed_no_feedback, ConeCheck, DeterminacyVerdict,
};
use crate::model::{
    components_to_original, cooperativity_report, fd_jacobian, jacobian, to_transformed,
    CooperativityReport, ModelParams, Scenario, SystemId,
};
use crate::solver::{
    simulate, Diagnostics, Grid, SimConfig, SimScenario, Trajectory, BumpSpec,
};
use crate::speed::{default_level_specs, estimate_speeds, Side, SpeedReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    A,
    B,
    M,
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepParameter::A => write!(f, "a"),
            SweepParameter::B => write!(f, "b"),
            SweepParameter::M => write!(f, "m"),
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(SweepParameter::A),
            "b" => Ok(SweepParameter::B),
            "m" => Ok(SweepParameter::M),
            other => Err(format!("unknown sweep parameter `{other}` (use a, b, or m)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: GridKind,
    pub values: Vec<f64>,
}

/// Solver and estimator settings shared by every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub domain_length: f64,
    pub nodes: usize,
    pub t_end: f64,
    pub snapshots: usize,
    pub bump: BumpSpec,
    pub cfl_safety: f64,
    /// Fit window as fractions of the final time.
    pub window: (f64, f64),
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            domain_length: 400.0,
            nodes: 4001,
            t_end: 100.0,
            snapshots: 51,
            bump: BumpSpec::default(),
            cfl_safety: 0.4,
            window: (0.5, 0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: Scenario,
    pub base: ModelParams,
    pub sweep: SweepSpec,
    pub sim: SimSettings,
    pub save_trajectories: bool,
}

/// Logarithmic grid with about nine points per decade, endpoints included.
pub fn log_grid(min: f64, max: f64) -> Vec<f64> {
    assert!(min > 0.0 && max > min, "log grid needs 0 < min < max");
    let decades = (max / min).log10();
    let count = ((9.0 * decades).round() as usize + 1).max(2);
    let mut v: Vec<f64> = (0..count)
        .map(|i| min * (max / min).powf(i as f64 / (count - 1) as f64))
        .collect();
    v[0] = min;
    *v.last_mut().unwrap() = max;
    v
}

/// Evenly spaced grid, endpoints included.
pub fn linear_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && max > min);
    (0..count)
        .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn preset_names() -> &'static [&'static str] {
    &["figure2", "figure3a", "figure3b", "figure4a", "figure4b"]
}

/// Built-in sweeps reproducing the headline speed-versus-parameter curves:
/// invader speeds against competition strength and feedback intensity (with
/// weak and overwhelming back-competition), and resident speeds against
/// competition and feedback.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let base = ModelParams::default();
    let spec = |scenario, base, parameter, values| ExperimentSpec {
        name: name.to_string(),
        scenario,
        base,
        sweep: SweepSpec {
            parameter,
            grid: GridKind::Log,
            values,
        },
        sim: SimSettings::default(),
        save_trajectories: false,
    };
    match name {
        "figure2" => Some(spec(
            Scenario::Invader,
            base,
            SweepParameter::B,
            log_grid(0.125, 8.0),
        )),
        "figure3a" => Some(spec(
            Scenario::Invader,
            base,
            SweepParameter::M,
            log_grid(0.125, 8.0),
        )),
        "figure3b" => {
            let mut p = base;
            p.b = 1024.0 / 3.0;
            Some(spec(
                Scenario::Invader,
                p,
                SweepParameter::M,
                log_grid(0.125, 8.0),
            ))
        }
        "figure4a" => {
            let mut p = base;
            p.m = 0.5;
            Some(spec(
                Scenario::Resident,
                p,
                SweepParameter::A,
                log_grid(0.125, 8.0),
            ))
        }
        "figure4b" => {
            let mut p = base;
            p.a = 1024.0 / 3.0;
            Some(spec(
                Scenario::Resident,
                p,
                SweepParameter::M,
                log_grid(0.125, 8.0),
            ))
        }
        _ => None,
    }
}

/// Parse a flat `key = value` experiment file. `#` starts a comment. Keys:
/// `name`, `scenario`, `sweep_parameter`, `sweep_grid`, and either
/// `sweep_values` (comma-separated) or `sweep_min`/`sweep_max` with optional
/// `sweep_count`; model parameters `alpha beta gamma a b m l L d1 d2 d3`;
/// solver settings `domain_length nodes t_end snapshots bump_amplitude
/// bump_sigma bump_center cfl_safety window_low window_high
/// save_trajectories`.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ExperimentError> {
    let bad = |msg: String| ExperimentError::Config(msg);
    let mut seen: Vec<String> = Vec::new();
    let mut name = "custom".to_string();
    let mut scenario = None;
    let mut parameter = None;
    let mut grid = GridKind::Linear;
    let mut values: Option<Vec<f64>> = None;
    let mut sweep_min = None;
    let mut sweep_max = None;
    let mut sweep_count = None;
    let mut base = ModelParams::default();
    let mut sim = SimSettings::default();
    let mut save_trajectories = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(bad(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
        seen.push(key.to_string());
        let parse_f = |v: &str| -> Result<f64, ExperimentError> {
            v.parse::<f64>()
                .map_err(|_| bad(format!("line {}: `{v}` is not a number", lineno + 1)))
        };
        let parse_usize = |v: &str| -> Result<usize, ExperimentError> {
            v.parse::<usize>()
                .map_err(|_| bad(format!("line {}: `{v}` is not a count", lineno + 1)))
        };
        match key {
            "name" => name = value.to_string(),
            "scenario" => {
                scenario = Some(match value {
                    "invader" => Scenario::Invader,
                    "resident" => Scenario::Resident,
                    other => {
                        return Err(bad(format!(
                            "line {}: unknown scenario `{other}`",
                            lineno + 1
                        )))
                    }
                })
            }
            "sweep_parameter" => {
                parameter =
                    Some(value.parse::<SweepParameter>().map_err(|e| {
                        bad(format!("line {}: {e}", lineno + 1))
                    })?)
            }
            "sweep_grid" => {
                grid = match value {
                    "linear" => GridKind::Linear,
                    "log" => GridKind::Log,
                    other => {
                        return Err(bad(format!(
                            "line {}: unknown grid kind `{other}`",
                            lineno + 1
                        )))
                    }
                }
            }
            "sweep_values" => {
                let parsed: Result<Vec<f64>, _> =
                    value.split(',').map(|v| parse_f(v.trim())).collect();
                values = Some(parsed?);
            }
            "sweep_min" => sweep_min = Some(parse_f(value)?),
            "sweep_max" => sweep_max = Some(parse_f(value)?),
            "sweep_count" => sweep_count = Some(parse_usize(value)?),
            "alpha" => base.alpha = parse_f(value)?,
            "beta" => base.beta = parse_f(value)?,
            "gamma" => base.gamma = parse_f(value)?,
            "a" => base.a = parse_f(value)?,
            "b" => base.b = parse_f(value)?,
            "m" => base.m = parse_f(value)?,
            "l" => base.l = parse_f(value)?,
            "L" => base.cap_l = parse_f(value)?,
            "d1" => base.d1 = parse_f(value)?,
            "d2" => base.d2 = parse_f(value)?,
            "d3" => base.d3 = parse_f(value)?,
            "domain_length" => sim.domain_length = parse_f(value)?,
            "nodes" => sim.nodes = parse_usize(value)?,
            "t_end" => sim.t_end = parse_f(value)?,
            "snapshots" => sim.snapshots = parse_usize(value)?,
            "bump_amplitude" => sim.bump.amplitude = parse_f(value)?,
            "bump_sigma" => sim.bump.sigma = parse_f(value)?,
            "bump_center" => sim.bump.center = Some(parse_f(value)?),
            "cfl_safety" => sim.cfl_safety = parse_f(value)?,
            "window_low" => sim.window.0 = parse_f(value)?,
            "window_high" => sim.window.1 = parse_f(value)?,
            "save_trajectories" => {
                save_trajectories = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(bad(format!(
                            "line {}: `{other}` is not a boolean",
                            lineno + 1
                        )))
                    }
                }
            }
            other => {
                return Err(bad(format!("line {}: unknown key `{other}`", lineno + 1)))
            }
        }
    }
    let scenario =
        scenario.ok_or_else(|| bad("missing required key `scenario`".to_string()))?;
    let parameter =
        parameter.ok_or_else(|| bad("missing required key `sweep_parameter`".to_string()))?;
    let values = match (values, sweep_min, sweep_max) {
        (Some(v), None, None) => v,
        (None, Some(min), Some(max)) => {
            if !(min.is_finite() && max.is_finite() && max > min) {
                return Err(bad(format!(
                    "sweep range needs min < max, got [{min}, {max}]"
                )));
            }
            match grid {
                GridKind::Log => {
                    if min <= 0.0 {
                        return Err(bad("log sweeps need a positive minimum".to_string()));
                    }
                    match sweep_count {
                        Some(c) if c >= 2 => {
                            let mut v: Vec<f64> = (0..c)
                                .map(|i| {
                                    min * (max / min).powf(i as f64 / (c - 1) as f64)
                                })
                                .collect();
                            v[0] = min;
                            *v.last_mut().unwrap() = max;
                            v
                        }
                        Some(_) => return Err(bad("sweep_count must be >= 2".to_string())),
                        None => log_grid(min, max),
                    }
                }
                GridKind::Linear => {
                    let c = sweep_count.unwrap_or(17);
                    if c < 2 {
                        return Err(bad("sweep_count must be >= 2".to_string()));
                    }
                    linear_grid(min, max, c)
                }
            }
        }
        (Some(_), _, _) => {
            return Err(bad(
                "give either sweep_values or sweep_min/sweep_max, not both".to_string(),
            ))
        }
        _ => {
            return Err(bad(
                "sweep needs sweep_values or both sweep_min and sweep_max".to_string(),
            ))
        }
    };
    Ok(ExperimentSpec {
        name,
        scenario,
        base,
        sweep: SweepSpec {
            parameter,
            grid,
            values,
        },
        sim,
        save_trajectories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    NotInvadable,
    Failed,
}

impl std::fmt::Display for PointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointStatus::Ok => write!(f, "ok"),
            PointStatus::NotInvadable => write!(f, "not_invadable"),
            PointStatus::Failed => write!(f, "failed"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub params: ModelParams,
    pub classification: Option<InvasionClassification>,
    /// Closed-form (c1, mu_bar) when invadable.
    pub speed: Option<(f64, f64)>,
    pub verdict: Option<DeterminacyVerdict>,
    pub speeds: Option<SpeedReport>,
    pub diagnostics: Option<Diagnostics>,
    pub status: PointStatus,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub points: Vec<SweepPoint>,
    pub wall_seconds: f64,
    pub summary_path: PathBuf,
}

fn sim_scenario(s: Scenario) -> SimScenario {
    match s {
        Scenario::Invader => SimScenario::Invader,
        Scenario::Resident => SimScenario::Resident,
    }
}

/// Build a solver configuration for an invasion run in original coordinates.
pub fn sim_config(
    params: ModelParams,
    scenario: Scenario,
    sim: &SimSettings,
) -> Result<SimConfig, ExperimentError> {
    let mut cfg = SimConfig::new(params, sim_scenario(scenario));
    cfg.grid = Grid::new(sim.domain_length, sim.nodes)?;
    cfg.t_end = sim.t_end;
    cfg.set_uniform_snapshots(sim.snapshots);
    cfg.bump = sim.bump.clone();
    cfg.cfl_safety = sim.cfl_safety;
    Ok(cfg)
}

fn run_point(
    spec: &ExperimentSpec,
    index: usize,
    value: f64,
) -> (SweepPoint, Option<Trajectory>) {
    let mut params = spec.base;
    match spec.sweep.parameter {
        SweepParameter::A => params.a = value,
        SweepParameter::B => params.b = value,
        SweepParameter::M => params.m = value,
    }
    let mut point = SweepPoint {
        index,
        value,
        params,
        classification: None,
        speed: None,
        verdict: None,
        speeds: None,
        diagnostics: None,
        status: PointStatus::Failed,
        error: None,
    };
    if let Err(e) = params.validate() {
        point.error = Some(e.to_string());
        return (point, None);
    }
    let class = classify_invasion(&params, spec.scenario);
    point.verdict = Some(check_linear_determinacy(spec.scenario, &params));
    if !class.invadable {
        point.classification = Some(class);
        point.status = PointStatus::NotInvadable;
        return (point, None);
    }
    point.speed = linear_speed(spec.scenario, &params).ok();
    let source = class.source.coords.as_array();
    let target = class
        .target
        .as_ref()
        .expect("invadable classification has a target")
        .coords
        .as_array();
    point.classification = Some(class);
    let cfg = match sim_config(params, spec.scenario, &spec.sim) {
        Ok(c) => c,
        Err(e) => {
            point.error = Some(e.to_string());
            return (point, None);
        }
    };
    let traj = match simulate(&cfg) {
        Ok(t) => t,
        Err(e) => {
            point.error = Some(e.to_string());
            return (point, None);
        }
    };
    point.diagnostics = Some(traj.diagnostics);
    let specs = default_level_specs(source, target);
    match estimate_speeds(&traj, &specs, spec.sim.window, Side::Right) {
        Ok(rep) => {
            point.speeds = Some(rep);
            point.status = PointStatus::Ok;
        }
        Err(e) => {
            point.error = Some(e.to_string());
        }
    }
    let keep = if spec.save_trajectories { Some(traj) } else { None };
    (point, keep)
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn summary_header() -> String {
    let mut h = [
        "index",
        "status",
        "scenario",
        "sweep_parameter",
        "sweep_value",
        "alpha",
        "beta",
        "gamma",
        "a",
        "b",
        "m",
        "l",
        "L",
        "d1",
        "d2",
        "d3",
        "source",
        "target",
        "invadable",
        "gamma1_at_zero",
        "boundary_equilibria",
        "single_speed_guaranteed",
        "c1",
        "mu_bar",
        "linear_determinate",
        "speed_bound_only",
        "competitors_at_linear_speed",
    ]
    .join(",");
    for i in 1..=4 {
        write!(h, ",cond{i}_name,cond{i}_residual,cond{i}_holds").unwrap();
    }
    h.push_str(
        ",speed_p1,r2_p1,n_p1,speed_p2,r2_p2,n_p2,speed_u,r2_u,n_u,\
         slowest,fastest,window_t0,window_t1,dt,steps,negative_clamps,max_rate,warnings,error",
    );
    h
}

fn summary_row(spec: &ExperimentSpec, point: &SweepPoint) -> String {
    let p = &point.params;
    let mut cols: Vec<String> = vec![
        point.index.to_string(),
        point.status.to_string(),
        spec.scenario.to_string(),
        spec.sweep.parameter.to_string(),
        fmt_f(point.value),
        fmt_f(p.alpha),
        fmt_f(p.beta),
        fmt_f(p.gamma),
        fmt_f(p.a),
        fmt_f(p.b),
        fmt_f(p.m),
        fmt_f(p.l),
        fmt_f(p.cap_l),
        fmt_f(p.d1),
        fmt_f(p.d2),
        fmt_f(p.d3),
    ];
    match &point.classification {
        Some(c) => {
            cols.push(c.source.label.to_string());
            cols.push(
                c.target
                    .as_ref()
                    .map(|t| t.label.to_string())
                    .unwrap_or_default(),
            );
            cols.push(c.invadable.to_string());
            cols.push(fmt_f(c.gamma1_at_zero));
            cols.push(c.boundary_equilibria_present.to_string());
            cols.push(c.single_speed_guaranteed.to_string());
        }
        None => cols.extend(std::iter::repeat(String::new()).take(6)),
    }
    cols.push(fmt_opt(point.speed.map(|s| s.0)));
    cols.push(fmt_opt(point.speed.map(|s| s.1)));
    match &point.verdict {
        Some(v) => {
            cols.push(v.linear_determinate.to_string());
            cols.push(v.speed_bound_only.to_string());
            cols.push(
                v.competitors_at_linear_speed
                    .map(|x| x.to_string())
                    .unwrap_or_default(),
            );
            for i in 0..4 {
                match v.conditions.get(i) {
                    Some(c) => {
                        cols.push(c.name.to_string());
                        cols.push(fmt_f(c.residual()));
                        cols.push(c.holds.to_string());
                    }
                    None => cols.extend(std::iter::repeat(String::new()).take(3)),
                }
            }
        }
        None => cols.extend(std::iter::repeat(String::new()).take(15)),
    }
    let mut warnings = Vec::new();
    match &point.speeds {
        Some(rep) => {
            for sp in 0..3 {
                match &rep.fits[sp] {
                    Some(f) => {
                        cols.push(fmt_f(f.speed));
                        cols.push(fmt_f(f.r_squared));
                        cols.push(f.n_samples.to_string());
                    }
                    None => cols.extend(std::iter::repeat(String::new()).take(3)),
                }
            }
            cols.push(fmt_opt(rep.slowest));
            cols.push(fmt_opt(rep.fastest));
            cols.push(fmt_f(rep.window.0));
            cols.push(fmt_f(rep.window.1));
            warnings = rep.warnings.clone();
        }
        None => cols.extend(std::iter::repeat(String::new()).take(13)),
    }
    match &point.diagnostics {
        Some(d) => {
            cols.push(fmt_f(d.dt));
            cols.push(d.steps.to_string());
            cols.push(d.negative_clamps.to_string());
            cols.push(fmt_f(d.max_rate));
        }
        None => cols.extend(std::iter::repeat(String::new()).take(4)),
    }
    cols.push(csv_escape(&warnings.join("; ")));
    cols.push(csv_escape(point.error.as_deref().unwrap_or("")));
    cols.join(",")
}

/// Run every sweep point (in parallel), then write `summary.csv`, `meta.txt`,
/// and optionally per-point trajectory files into `out_dir`. One failing
/// point marks its row as failed and the sweep continues; output rows keep
/// sweep order, and `summary.csv` is byte-identical across runs of the same
/// spec.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
) -> Result<ExperimentResult, ExperimentError> {
    if spec.sweep.values.is_empty() {
        return Err(ExperimentError::Config(
            "the sweep has no values; nothing to run".to_string(),
        ));
    }
    if spec.sweep.values.iter().any(|v| !v.is_finite()) {
        return Err(ExperimentError::Config(
            "sweep values must be finite".to_string(),
        ));
    }
    let (w0, w1) = spec.sim.window;
    if !(0.0..1.0).contains(&w0) || !(w0 < w1 && w1 <= 1.0) {
        return Err(ExperimentError::Config(format!(
            "fit window must satisfy 0 <= low < high <= 1, got ({w0}, {w1})"
        )));
    }
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let results: Vec<(SweepPoint, Option<Trajectory>)> = spec
        .sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, v)| run_point(spec, i, *v))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut traj_files = Vec::new();
    for (point, traj) in results {
        if let Some(traj) = traj {
            let fname = format!("trajectory_{:03}.csv", point.index);
            let mut f = fs::File::create(out_dir.join(&fname))?;
            crate::solver::write_trajectory_csv(&traj, &mut f)?;
            traj_files.push(fname);
        }
        points.push(point);
    }
    let summary_path = out_dir.join("summary.csv");
    {
        let mut f = fs::File::create(&summary_path)?;
        writeln!(f, "{}", summary_header())?;
        for point in &points {
            writeln!(f, "{}", summary_row(spec, point))?;
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    {
        let mut f = fs::File::create(out_dir.join("meta.txt"))?;
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(f, "experiment: {}", spec.name)?;
        writeln!(f, "created_unix: {stamp}")?;
        writeln!(f, "wall_seconds: {wall_seconds:.3}")?;
        writeln!(f, "tool_version: {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(f, "scenario: {}", spec.scenario)?;
        writeln!(
            f,
            "sweep: {} over {:?} ({} points)",
            spec.sweep.parameter,
            spec.sweep.grid,
            spec.sweep.values.len()
        )?;
        let b = &spec.base;
        writeln!(
            f,
            "base_params: alpha={} beta={} gamma={} a={} b={} m={} l={} L={} d1={} d2={} d3={}",
            b.alpha, b.beta, b.gamma, b.a, b.b, b.m, b.l, b.cap_l, b.d1, b.d2, b.d3
        )?;
        let s = &spec.sim;
        writeln!(
            f,
            "solver: domain={} nodes={} t_end={} snapshots={} cfl={} window=({}, {})",
            s.domain_length, s.nodes, s.t_end, s.snapshots, s.cfl_safety, s.window.0, s.window.1
        )?;
        writeln!(f, "files: summary.csv{}", if traj_files.is_empty() { "" } else { " + trajectories" })?;
        for t in &traj_files {
            writeln!(f, "  {t}")?;
        }
        writeln!(f)?;
        writeln!(f, "summary.csv columns:")?;
        writeln!(f, "  index/status: sweep position and ok|not_invadable|failed")?;
        writeln!(f, "  sweep_value and the full parameter set used at the point")?;
        writeln!(f, "  source/target: steady states the front connects")?;
        writeln!(f, "  gamma1_at_zero: invading growth rate at zero wavenumber")?;
        writeln!(f, "  c1/mu_bar: linear spreading speed and its wavenumber")?;
        writeln!(f, "  cond*: determinacy conditions with slack (rhs - lhs)")?;
        writeln!(f, "  speed_*: measured front speeds per species with fit quality")?;
        writeln!(f, "  slowest/fastest: extreme |speed| over fitted species")?;
        writeln!(f, "  dt/steps/negative_clamps/max_rate: solver diagnostics")?;
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        points,
        wall_seconds,
        summary_path,
    })
}

/// L-infinity distance of the final snapshot from `target` over the central
/// half of the domain, in original coordinates.
pub fn endpoint_distance(traj: &Trajectory, target: [f64; 3]) -> f64 {
    let last = traj.snapshots.last().expect("trajectory has snapshots");
    let g = last.grid();
    let (lo, hi) = (0.25 * g.length(), 0.75 * g.length());
    let mut worst = 0.0_f64;
    for i in 0..g.n() {
        let x = g.x(i);
        if x < lo || x > hi {
            continue;
        }
        let s = components_to_original(traj.config.system, last.state_at(i), &traj.config.params);
        for sp in 0..3 {
            worst = worst.max((s[sp] - target[sp]).abs());
        }
    }
    worst
}

/// Two-phase capacity-raise run. `params.cap_l` is the initial baseline
/// capacity; the second phase reruns the invader scenario with the capacity
/// raised to `cap_l_raised`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReinvasionSpec {
    pub params: ModelParams,
    pub cap_l_raised: f64,
    pub sim: SimSettings,
}

impl ReinvasionSpec {
    pub fn new(params: ModelParams, cap_l_raised: f64) -> Self {
        let mut sim = SimSettings::default();
        // The endpoint check needs the front to clear the central half of
        // the domain and the wake to relax, so the default run is long on a
        // shorter domain, and the fit window ends before the front feels the
        // far boundary.
        sim.domain_length = 200.0;
        sim.nodes = 2001;
        sim.t_end = 260.0;
        sim.snapshots = 53;
        sim.window = (0.3, 0.55);
        ReinvasionSpec {
            params,
            cap_l_raised,
            sim,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub label: &'static str,
    pub scenario: Scenario,
    pub params: ModelParams,
    pub classification: InvasionClassification,
    pub speed: (f64, f64),
    pub verdict: DeterminacyVerdict,
    pub speeds: SpeedReport,
    /// Distance of the final central profile from the classified target.
    pub endpoint_distance: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct ReinvasionResult {
    pub phase1: PhaseResult,
    pub phase2: PhaseResult,
    pub wall_seconds: f64,
}

fn run_phase(
    label: &'static str,
    scenario: Scenario,
    params: ModelParams,
    sim: &SimSettings,
    out_dir: Option<&Path>,
    save_trajectories: bool,
    traj_name: &str,
) -> Result<PhaseResult, ExperimentError> {
    let classification = classify_invasion(&params, scenario);
    let speed = linear_speed(scenario, &params)?;
    let verdict = check_linear_determinacy(scenario, &params);
    let cfg = sim_config(params, scenario, sim)?;
    let traj = simulate(&cfg)?;
    let target = classification
        .target
        .as_ref()
        .expect("gated parameters are invadable")
        .coords
        .as_array();
    let source = classification.source.coords.as_array();
    let specs = default_level_specs(source, target);
    let speeds = estimate_speeds(&traj, &specs, sim.window, Side::Right)?;
    let dist = endpoint_distance(&traj, target);
    if let (Some(dir), true) = (out_dir, save_trajectories) {
        let mut f = fs::File::create(dir.join(traj_name))?;
        crate::solver::write_trajectory_csv(&traj, &mut f)?;
    }
    Ok(PhaseResult {
        label,
        scenario,
        params,
        classification,
        speed,
        verdict,
        speeds,
        endpoint_distance: dist,
        diagnostics: traj.diagnostics,
    })
}

pub fn run_reinvasion(
    spec: &ReinvasionSpec,
    out_dir: Option<&Path>,
    save_trajectories: bool,
) -> Result<ReinvasionResult, ExperimentError> {
    let p = spec.params;
    p.validate()?;
    let protect_before = 1.0 + p.m * p.cap_l;
    if !(p.a > protect_before) {
        return Err(ExperimentError::Config(format!(
            "reinvasion needs a > 1 + m*L so the resident invasion drives species 1 \
             extinct; got a = {}, 1 + m*L = {protect_before}",
            p.a
        )));
    }
    if !(spec.cap_l_raised > p.cap_l) {
        return Err(ExperimentError::Config(format!(
            "raised capacity must exceed the baseline, got {} <= {}",
            spec.cap_l_raised, p.cap_l
        )));
    }
    let protect_after = 1.0 + p.m * spec.cap_l_raised;
    if !(p.a < protect_after) {
        return Err(ExperimentError::Config(format!(
            "raised capacity is still too small for species 1 to return: needs \
             a < 1 + m*L' but a = {}, 1 + m*L' = {protect_after}",
            p.a
        )));
    }
    if !(p.b < 1.0) {
        return Err(ExperimentError::Config(format!(
            "the resident invasion in phase 1 needs b < 1, got b = {}",
            p.b
        )));
    }
    let start = Instant::now();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let phase1 = run_phase(
        "phase1_resident_invasion",
        Scenario::Resident,
        p,
        &spec.sim,
        out_dir,
        save_trajectories,
        "trajectory_phase1.csv",
    )?;
    let mut p2 = p;
    p2.cap_l = spec.cap_l_raised;
    let phase2 = run_phase(
        "phase2_reinvasion",
        Scenario::Invader,
        p2,
        &spec.sim,
        out_dir,
        save_trajectories,
        "trajectory_phase2.csv",
    )?;
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir {
        let mut f = fs::File::create(dir.join("summary.csv"))?;
        writeln!(
            f,
            "phase,scenario,a,b,m,l,L,source,target,c1,mu_bar,linear_determinate,\
             speed_p1,speed_p2,speed_u,slowest,endpoint_distance,dt,steps"
        )?;
        for ph in [&phase1, &phase2] {
            let fit = |sp: usize| {
                ph.speeds.fits[sp]
                    .map(|f| fmt_f(f.speed))
                    .unwrap_or_default()
            };
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                ph.label,
                ph.scenario,
                fmt_f(ph.params.a),
                fmt_f(ph.params.b),
                fmt_f(ph.params.m),
                fmt_f(ph.params.l),
                fmt_f(ph.params.cap_l),
                ph.classification.source.label,
                ph.classification
                    .target
                    .as_ref()
                    .map(|t| t.label.to_string())
                    .unwrap_or_default(),
                fmt_f(ph.speed.0),
                fmt_f(ph.speed.1),
                ph.verdict.linear_determinate,
                fit(0),
                fit(1),
                fit(2),
                fmt_opt(ph.speeds.slowest),
                fmt_f(ph.endpoint_distance),
                fmt_f(ph.diagnostics.dt),
                ph.diagnostics.steps,
            )?;
        }
        let mut f = fs::File::create(dir.join("meta.txt"))?;
        writeln!(f, "reinvasion run")?;
        writeln!(f, "wall_seconds: {wall_seconds:.3}")?;
        writeln!(f, "baseline_capacity: {}", p.cap_l)?;
        writeln!(f, "raised_capacity: {}", spec.cap_l_raised)?;
        writeln!(
            f,
            "phase 1: resident invasion of the species-1 state; expected endpoint \
             is the classified target (species 1 extinct when a > 1 + m*L exceeds \
             the coexistence threshold)"
        )?;
        writeln!(
            f,
            "phase 2: fresh invader run with the raised capacity; expected endpoint \
             is coexistence"
        )?;
    }
    Ok(ReinvasionResult {
        phase1,
        phase2,
        wall_seconds,
    })
}

/// Finite-difference spot check of the analytic Jacobian at seeded random
/// states inside the frame's box.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCheck {
    pub system: SystemId,
    pub seed: u64,
    pub states: usize,
    pub max_rel_error: f64,
}

/// Everything the analyze command reports.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub params: ModelParams,
    pub scenario: Scenario,
    pub equilibria: Vec<Equilibrium>,
    pub roots: CoexistenceRoots,
    pub thresholds: Option<CoexistenceThresholds>,
    pub classification: InvasionClassification,
    pub speed: Option<(f64, f64)>,
    pub reference_speed: Option<f64>,
    pub eigenvector: Option<[f64; 3]>,
    pub eigenvector_note: Option<String>,
    pub cone: Option<ConeCheck>,
    pub cone_note: Option<String>,
    pub verdict: DeterminacyVerdict,
    pub cooperativity: Option<CooperativityReport>,
    pub fd_check: FdCheck,
}

pub fn analyze(
    params: &ModelParams,
    scenario: Scenario,
    seed: u64,
) -> Result<Analysis, ExperimentError> {
    params.validate()?;
    let equilibria = enumerate_equilibria(params);
    let roots = coexistence_roots(params);
    let thresholds = a1_threshold(params).ok();
    let classification = classify_invasion(params, scenario);
    let speed = linear_speed(scenario, params).ok();
    let verdict = check_linear_determinacy(scenario, params);
    let mut eigenvector = None;
    let mut eigenvector_note = None;
    let mut cone = None;
    let mut cone_note = None;
    if let Some((_, mu_bar)) = speed {
        match principal_eigenvector(scenario, params, mu_bar) {
            Ok(z) => {
                eigenvector = Some(z);
                match cone_condition(scenario, params, z) {
                    Ok(c) => cone = Some(c),
                    Err(e) => cone_note = Some(e.to_string()),
                }
            }
            Err(e) => eigenvector_note = Some(e.to_string()),
        }
    }
    let system = match scenario {
        Scenario::Invader => SystemId::InvaderG,
        Scenario::Resident => SystemId::ResidentH,
    };
    let corner = match &classification.target {
        Some(t) => {
            let q = to_transformed(scenario, t.coords, params).as_array();
            [q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)]
        }
        None => [1.0, 1.0, params.l],
    };
    let cooperativity = cooperativity_report(system, params, corner, 512).ok();
    // Seeded random spot check of the analytic Jacobian.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = 20;
    let mut max_rel_error = 0.0_f64;
    for _ in 0..states {
        let s = [
            rng.gen::<f64>() * corner[0].max(0.5),
            rng.gen::<f64>() * corner[1].max(0.5),
            rng.gen::<f64>() * corner[2].max(0.25),
        ];
        if let (Ok(j), Ok(fd)) = (
            jacobian(system, s, params),
            fd_jacobian(system, s, params, 1e-6),
        ) {
            for i in 0..3 {
                for k in 0..3 {
                    let scale = 1.0_f64.max(j[i][k].abs());
                    max_rel_error = max_rel_error.max((j[i][k] - fd[i][k]).abs() / scale);
                }
            }
        }
    }
    Ok(Analysis {
        params: *params,
        scenario,
        equilibria,
        roots,
        thresholds,
        classification,
        speed,
        reference_speed: reference_speed_no_feedback(scenario, params),
        eigenvector,
        eigenvector_note,
        cone,
        cone_note,
        verdict,
        cooperativity,
        fd_check: FdCheck {
            system,
            seed,
            states,
            max_rel_error,
        },
    })
}

fn fmt_coords(c: &crate::model::StateVec) -> String {
    format!("({:.6}, {:.6}, {:.6})", c.p1, c.p2, c.u)
}

pub fn render_analysis_text(a: &Analysis) -> String {
    let mut s = String::new();
    let p = &a.params;
    let _ = writeln!(s, "scenario: {}", a.scenario);
    let _ = writeln!(
        s,
        "parameters: alpha={} beta={} gamma={} a={} b={} m={} l={} L={} d1={} d2={} d3={}",
        p.alpha, p.beta, p.gamma, p.a, p.b, p.m, p.l, p.cap_l, p.d1, p.d2, p.d3
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "steady states:");
    for e in &a.equilibria {
        let mut line = format!(
            "  {:<4} {:<34} {}",
            e.label.to_string(),
            fmt_coords(&e.coords),
            if e.admissible { "admissible" } else { "not admissible" }
        );
        if !e.coincides_with.is_empty() {
            let names: Vec<String> =
                e.coincides_with.iter().map(|l| l.to_string()).collect();
            line.push_str(&format!("  (coincides with {})", names.join(", ")));
        }
        let _ = writeln!(s, "{line}");
    }
    let r = &a.roots;
    let _ = writeln!(
        s,
        "coexistence quadratic: linear coefficient {:.6}, discriminant {:.6}, z+ = {}, z- = {}{}",
        r.linear_coeff,
        r.discriminant,
        r.z_plus.map(|z| format!("{z:.6}")).unwrap_or_else(|| "none".into()),
        r.z_minus.map(|z| format!("{z:.6}")).unwrap_or_else(|| "none".into()),
        if r.degenerate { " (degenerate linear case)" } else { "" }
    );
    if let Some(th) = &a.thresholds {
        let _ = writeln!(
            s,
            "coexistence window in a: both roots real for a <= a1 = {:.6} (upper companion a2 = {:.6})",
            th.a1, th.a2
        );
    }
    let _ = writeln!(s);
    let c = &a.classification;
    let _ = writeln!(
        s,
        "invasion: source {} {}, growth rate at zero wavenumber {:.6}",
        c.source.label,
        fmt_coords(&c.source.coords),
        c.gamma1_at_zero
    );
    if c.invadable {
        let t = c.target.as_ref().unwrap();
        let _ = writeln!(s, "  invadable: yes, target {} {}", t.label, fmt_coords(&t.coords));
        let _ = writeln!(
            s,
            "  intermediate steady states: {}; single spreading speed guaranteed: {}",
            if c.boundary_equilibria_present { "present" } else { "none" },
            if c.single_speed_guaranteed { "yes" } else { "no" }
        );
    } else {
        let _ = writeln!(s, "  invadable: no (the perturbation decays)");
    }
    if let Some((c1, mu)) = a.speed {
        let _ = writeln!(s, "linear spreading speed: c1 = {c1:.12} at mu_bar = {mu:.12}");
    }
    if let Some(cf) = a.reference_speed {
        let _ = writeln!(s, "reference speed without feedback (m = 0): {cf:.12}");
    }
    if let Some(z) = a.eigenvector {
        let _ = writeln!(
            s,
            "principal direction at mu_bar: [{:.6}, {:.6}, {:.6}]",
            z[0], z[1], z[2]
        );
    }
    if let Some(note) = &a.eigenvector_note {
        let _ = writeln!(s, "principal direction: unavailable ({note})");
    }
    if let Some(cone) = &a.cone {
        let _ = writeln!(
            s,
            "cone condition along that direction: {} (residuals {:.3e}, {:.3e}, {:.3e})",
            if cone.holds { "holds" } else { "fails" },
            cone.residuals[0],
            cone.residuals[1],
            cone.residuals[2]
        );
    }
    if let Some(note) = &a.cone_note {
        let _ = writeln!(s, "cone condition: not evaluated ({note})");
    }
    let _ = writeln!(s);
    let v = &a.verdict;
    let _ = writeln!(
        s,
        "linear determinacy: {}",
        if v.linear_determinate {
            "yes (the front moves at exactly c1)"
        } else if v.speed_bound_only {
            "no (c1 is only an upper bound)"
        } else {
            "not applicable (no invasion)"
        }
    );
    if let Some(comp) = v.competitors_at_linear_speed {
        let _ = writeln!(
            s,
            "  competitor components at the linear speed: {}",
            if comp { "yes" } else { "no" }
        );
    }
    for cond in &v.conditions {
        let _ = writeln!(
            s,
            "  [{}] {:<32} lhs {:.6}  rhs {:.6}  slack {:.6}",
            if cond.holds { "ok" } else { "--" },
            cond.name,
            cond.lhs,
            cond.rhs,
            cond.residual()
        );
    }
    for note in &v.notes {
        let _ = writeln!(s, "  note: {note}");
    }
    if let Some(coop) = &a.cooperativity {
        let _ = writeln!(
            s,
            "frame cooperativity over the invasion box: min off-diagonal {:.3e} over {} samples",
            coop.min_off_diagonal, coop.samples
        );
    }
    let fd = &a.fd_check;
    let _ = writeln!(
        s,
        "jacobian spot check (seed {}, {} states, {}): max relative error {:.3e}",
        fd.seed, fd.states, fd.system, fd.max_rel_error
    );
    s
}

/// Machine-readable analysis: an equilibrium table followed by key-value
/// rows, separated by comment markers.
pub fn render_analysis_csv(a: &Analysis) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# equilibria");
    let _ = writeln!(s, "{EQUILIBRIA_CSV_HEADER}");
    for e in &a.equilibria {
        let _ = writeln!(s, "{}", e.csv_row());
    }
    let _ = writeln!(s, "# analysis");
    let _ = writeln!(s, "key,value");
    let p = &a.params;
    let mut kv = vec![
        ("scenario".to_string(), a.scenario.to_string()),
        ("alpha".to_string(), fmt_f(p.alpha)),
        ("beta".to_string(), fmt_f(p.beta)),
        ("gamma".to_string(), fmt_f(p.gamma)),
        ("a".to_string(), fmt_f(p.a)),
        ("b".to_string(), fmt_f(p.b)),
        ("m".to_string(), fmt_f(p.m)),
        ("l".to_string(), fmt_f(p.l)),
        ("L".to_string(), fmt_f(p.cap_l)),
        ("d1".to_string(), fmt_f(p.d1)),
        ("d2".to_string(), fmt_f(p.d2)),
        ("d3".to_string(), fmt_f(p.d3)),
        (
            "quadratic_linear_coeff".to_string(),
            fmt_f(a.roots.linear_coeff),
        ),
        ("discriminant".to_string(), fmt_f(a.roots.discriminant)),
        ("z_plus".to_string(), fmt_opt(a.roots.z_plus)),
        ("z_minus".to_string(), fmt_opt(a.roots.z_minus)),
        ("degenerate".to_string(), a.roots.degenerate.to_string()),
        ("source".to_string(), a.classification.source.label.to_string()),
        (
            "target".to_string(),
            a.classification
                .target
                .as_ref()
                .map(|t| t.label.to_string())
                .unwrap_or_default(),
        ),
        (
            "invadable".to_string(),
            a.classification.invadable.to_string(),
        ),
        (
            "gamma1_at_zero".to_string(),
            fmt_f(a.classification.gamma1_at_zero),
        ),
        (
            "boundary_equilibria".to_string(),
            a.classification.boundary_equilibria_present.to_string(),
        ),
        (
            "single_speed_guaranteed".to_string(),
            a.classification.single_speed_guaranteed.to_string(),
        ),
        ("c1".to_string(), fmt_opt(a.speed.map(|x| x.0))),
        ("mu_bar".to_string(), fmt_opt(a.speed.map(|x| x.1))),
        (
            "reference_speed_m0".to_string(),
            fmt_opt(a.reference_speed),
        ),
        (
            "linear_determinate".to_string(),
            a.verdict.linear_determinate.to_string(),
        ),
        (
            "speed_bound_only".to_string(),
            a.verdict.speed_bound_only.to_string(),
        ),
    ];
    if let Some(th) = &a.thresholds {
        kv.push(("a1".to_string(), fmt_f(th.a1)));
        kv.push(("a2".to_string(), fmt_f(th.a2)));
    }
    if let Some(z) = a.eigenvector {
        kv.push(("zeta1".to_string(), fmt_f(z[0])));
        kv.push(("zeta2".to_string(), fmt_f(z[1])));
        kv.push(("zeta3".to_string(), fmt_f(z[2])));
    }
    if let Some(cone) = &a.cone {
        kv.push(("cone_holds".to_string(), cone.holds.to_string()));
    }
    for cond in &a.verdict.conditions {
        kv.push((format!("cond_{}", cond.name), cond.holds.to_string()));
        kv.push((
            format!("cond_{}_residual", cond.name),
            fmt_f(cond.residual()),
        ));
    }
    if let Some(coop) = &a.cooperativity {
        kv.push((
            "min_off_diagonal".to_string(),
            fmt_f(coop.min_off_diagonal),
        ));
    }
    kv.push((
        "jacobian_check_max_rel_error".to_string(),
        fmt_f(a.fd_check.max_rel_error),
    ));
    for (k, v) in kv {
        let _ = writeln!(s, "{},{}", csv_escape(&k), csv_escape(&v));
    }
    s
}
