//! Command line front end: analyze a parameter set, run a single invasion
//! simulation, measure front speeds, run parameter sweeps, or run the
//! two-phase capacity-raise experiment.

use ccm::equilibria::classify_invasion;
use ccm::error::ExperimentError;
use ccm::experiment::{
    analyze, parse_spec, preset, preset_names, render_analysis_csv, render_analysis_text,
    run_experiment, run_reinvasion, sim_config, PointStatus, ReinvasionSpec, SimSettings,
};
use ccm::linear::linear_speed;
use ccm::model::{ModelParams, Scenario, SystemId};
use ccm::solver::{simulate, write_trajectory_csv, Grid, SimScenario};
use ccm::speed::{default_level_specs, estimate_speeds, write_speed_csv, Side};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "ccm",
    version,
    about = "Invasion fronts for two competitors with a protective mutualist"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for files the commands write.
    #[arg(long, global = true, default_value = "ccm_out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady states, invasion classification, speeds, and determinacy checks.
    Analyze {
        #[command(flatten)]
        params: ParamArgs,
        /// Which species invades.
        #[arg(long, value_enum, default_value_t = ScenarioArg::Invader)]
        scenario: ScenarioArg,
        /// Machine-readable output instead of the text report.
        #[arg(long)]
        csv: bool,
        /// Seed for the random Jacobian spot check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Integrate one invasion front and write the trajectory to CSV.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = ScenarioArg::Invader)]
        scenario: ScenarioArg,
        /// Coordinate frame to integrate in.
        #[arg(long, value_enum, default_value_t = FrameArg::Original)]
        frame: FrameArg,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Integrate an invasion front and fit per-species spreading speeds.
    Speed {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = ScenarioArg::Invader)]
        scenario: ScenarioArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Fit window as fractions of the final time, e.g. 0.5,0.9.
        #[arg(long, value_parser = parse_window, default_value = "0.5,0.9")]
        window: (f64, f64),
        /// Track fronts moving toward this side.
        #[arg(long, value_enum, default_value_t = SideArg::Right)]
        side: SideArg,
        /// CSV table on stdout instead of the text report.
        #[arg(long)]
        csv: bool,
        /// Also write the trajectory to the output directory.
        #[arg(long)]
        save_trajectories: bool,
    },
    /// Run a preset or `key = value` file sweep and write summary.csv.
    Experiment {
        /// Preset name or path to a spec file.
        #[arg(required_unless_present = "list")]
        source: Option<String>,
        /// Also write one trajectory CSV per sweep point.
        #[arg(long)]
        save_trajectories: bool,
        /// List the available presets and exit.
        #[arg(long)]
        list: bool,
    },
    /// Two-phase run: resident invasion wipes out species 1, then a raised
    /// mutualist capacity lets it reinvade.
    Reinvasion {
        #[command(flatten)]
        params: ParamArgs,
        /// Raised mutualist baseline capacity for phase 2.
        #[arg(long = "L-prime")]
        cap_l_raised: f64,
        #[command(flatten)]
        sim: SimArgs,
        /// Fit window as fractions of the final time; the default ends before
        /// the front reaches the far boundary.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Also write both phase trajectories.
        #[arg(long)]
        save_trajectories: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    /// Growth rate of species 1.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Growth rate of species 2.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Growth rate of the mutualist.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Competition felt by species 1.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    a: f64,
    /// Competition felt by species 2.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    b: f64,
    /// Protection intensity of the mutualist.
    #[arg(long, default_value_t = 0.0)]
    m: f64,
    /// Extra mutualist capacity per unit of species 1.
    #[arg(long, default_value_t = 0.45)]
    l: f64,
    /// Baseline mutualist capacity.
    #[arg(long = "L", default_value_t = 1.0 / 3.0)]
    cap_l: f64,
    /// Diffusivity of species 1.
    #[arg(long, default_value_t = 1.0)]
    d1: f64,
    /// Diffusivity of species 2.
    #[arg(long, default_value_t = 1.0)]
    d2: f64,
    /// Diffusivity of the mutualist.
    #[arg(long, default_value_t = 1.0)]
    d3: f64,
}

impl ParamArgs {
    fn to_params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            m: self.m,
            l: self.l,
            cap_l: self.cap_l,
            d1: self.d1,
            d2: self.d2,
            d3: self.d3,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Domain length.
    #[arg(long)]
    domain: Option<f64>,
    /// Grid spacing; overrides --nodes.
    #[arg(long)]
    dx: Option<f64>,
    /// Number of grid nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Final time.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Number of evenly spaced snapshots including t = 0.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Height of the seed bump.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Width of the seed bump.
    #[arg(long)]
    sigma: Option<f64>,
    /// Center of the seed bump (defaults to the left edge).
    #[arg(long)]
    center: Option<f64>,
    /// Time-step safety factor, a fraction of the diffusive limit in (0, 0.5).
    #[arg(long)]
    cfl: Option<f64>,
}

impl SimArgs {
    fn settings(&self, mut s: SimSettings) -> Result<SimSettings, ExperimentError> {
        if let Some(v) = self.domain {
            s.domain_length = v;
        }
        if let Some(n) = self.nodes {
            s.nodes = n;
        }
        if let Some(dx) = self.dx {
            s.nodes = Grid::from_spacing(s.domain_length, dx)?.n();
        }
        if let Some(v) = self.t_end {
            s.t_end = v;
        }
        if let Some(v) = self.snapshots {
            s.snapshots = v;
        }
        if let Some(v) = self.amplitude {
            s.bump.amplitude = v;
        }
        if let Some(v) = self.sigma {
            s.bump.sigma = v;
        }
        if let Some(v) = self.center {
            s.bump.center = Some(v);
        }
        if let Some(v) = self.cfl {
            s.cfl_safety = v;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Invader,
    Resident,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::Invader => Scenario::Invader,
            ScenarioArg::Resident => Scenario::Resident,
        }
    }
}

impl From<ScenarioArg> for SimScenario {
    fn from(s: ScenarioArg) -> SimScenario {
        match s {
            ScenarioArg::Invader => SimScenario::Invader,
            ScenarioArg::Resident => SimScenario::Resident,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameArg {
    Original,
    Invader,
    Resident,
    ResidentFrozen,
}

impl FrameArg {
    fn system(self) -> SystemId {
        match self {
            FrameArg::Original => SystemId::CcmF,
            FrameArg::Invader => SystemId::InvaderG,
            FrameArg::Resident => SystemId::ResidentH,
            FrameArg::ResidentFrozen => SystemId::ResidentH0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| "expected LOW,HIGH".to_string())?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return Err(format!("window must satisfy 0 <= low < high <= 1, got ({lo}, {hi})"));
    }
    Ok((lo, hi))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(i32::from(e.exit_code()));
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Analyze {
            params,
            scenario,
            csv,
            seed,
        } => {
            let analysis = analyze(&params.to_params(), scenario.into(), seed)?;
            if csv {
                print!("{}", render_analysis_csv(&analysis));
            } else {
                print!("{}", render_analysis_text(&analysis));
            }
            Ok(())
        }
        Command::Simulate {
            params,
            scenario,
            frame,
            sim,
        } => {
            let p = params.to_params();
            let settings = sim.settings(SimSettings::default())?;
            let mut cfg = sim_config(p, scenario.into(), &settings)?;
            cfg.system = frame.system();
            let traj = simulate(&cfg)?;
            fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("trajectory.csv");
            let mut f = fs::File::create(&path)?;
            write_trajectory_csv(&traj, &mut f)?;
            let d = &traj.diagnostics;
            println!(
                "wrote {} ({} snapshots, {} nodes, {} frame)",
                path.display(),
                traj.snapshots.len(),
                cfg.grid.n(),
                cfg.system
            );
            println!(
                "dt = {:.6e} (limit {:.6e}), steps = {}, negative clamps = {}, max |rate| = {:.3e}",
                d.dt, d.dt_limit, d.steps, d.negative_clamps, d.max_rate
            );
            Ok(())
        }
        Command::Speed {
            params,
            scenario,
            sim,
            window,
            side,
            csv,
            save_trajectories,
        } => {
            let p = params.to_params();
            p.validate()?;
            let model_scenario: Scenario = scenario.into();
            let class = classify_invasion(&p, model_scenario);
            if !class.invadable {
                println!(
                    "source {} is not invadable for these parameters (growth rate {:.6}); nothing to measure",
                    class.source.label, class.gamma1_at_zero
                );
                return Ok(());
            }
            let mut settings = sim.settings(SimSettings::default())?;
            settings.window = window;
            let cfg = sim_config(p, model_scenario, &settings)?;
            let traj = simulate(&cfg)?;
            let source = class.source.coords.as_array();
            let target = class.target.as_ref().unwrap().coords.as_array();
            let specs = default_level_specs(source, target);
            let report = estimate_speeds(&traj, &specs, window, side.into())?;
            if save_trajectories {
                fs::create_dir_all(&cli.out)?;
                let path = cli.out.join("trajectory.csv");
                let mut f = fs::File::create(&path)?;
                write_trajectory_csv(&traj, &mut f)?;
            }
            if csv {
                let mut stdout = std::io::stdout();
                write_speed_csv(&report, ["p1", "p2", "u"], &mut stdout)?;
            } else {
                println!(
                    "fronts from {} toward {} (window t in [{:.3}, {:.3}], {}-moving):",
                    class.source.label,
                    class.target.as_ref().unwrap().label,
                    report.window.0,
                    report.window.1,
                    report.side
                );
                let names = ["p1", "p2", "u"];
                for (sp, fit) in report.fits.iter().enumerate() {
                    match fit {
                        Some(f) => println!(
                            "  {:<3} speed {:>12.8}  r^2 {:.6}  samples {}",
                            names[sp], f.speed, f.r_squared, f.n_samples
                        ),
                        None => println!("  {:<3} no trackable front", names[sp]),
                    }
                }
                if let (Some(lo), Some(hi)) = (report.slowest, report.fastest) {
                    println!("  slowest |speed| {lo:.8}, fastest {hi:.8}");
                }
                if let Ok((c1, mu)) = linear_speed(model_scenario, &p) {
                    println!("  predicted linear speed c1 = {c1:.8} at mu_bar = {mu:.8}");
                }
                for w in &report.warnings {
                    println!("  warning: {w}");
                }
            }
            Ok(())
        }
        Command::Experiment {
            source,
            save_trajectories,
            list,
        } => {
            if list {
                for name in preset_names() {
                    println!("{name}");
                }
                return Ok(());
            }
            let source = source.expect("clap requires a source unless --list is given");
            let mut spec = match preset(&source) {
                Some(s) => s,
                None => {
                    let path = PathBuf::from(&source);
                    if !path.exists() {
                        return Err(ExperimentError::Config(format!(
                            "`{source}` is neither a preset ({}) nor a spec file",
                            preset_names().join(", ")
                        )));
                    }
                    parse_spec(&fs::read_to_string(&path)?)?
                }
            };
            spec.save_trajectories |= save_trajectories;
            let dir = cli.out.join(&spec.name);
            let result = run_experiment(&spec, &dir)?;
            println!(
                "swept {} over {} points in {:.1} s -> {}",
                spec.sweep.parameter,
                spec.sweep.values.len(),
                result.wall_seconds,
                result.summary_path.display()
            );
            println!("  index  value         status         c1            slowest       determinate");
            for pt in &result.points {
                let c1 = pt
                    .speed
                    .map(|s| format!("{:.6}", s.0))
                    .unwrap_or_else(|| "-".into());
                let slowest = pt
                    .speeds
                    .as_ref()
                    .and_then(|r| r.slowest)
                    .map(|s| format!("{s:.6}"))
                    .unwrap_or_else(|| "-".into());
                let det = pt
                    .verdict
                    .as_ref()
                    .map(|v| v.linear_determinate.to_string())
                    .unwrap_or_else(|| "-".into());
                println!(
                    "  {:<6} {:<13.6} {:<14} {:<13} {:<13} {}",
                    pt.index,
                    pt.value,
                    pt.status.to_string(),
                    c1,
                    slowest,
                    det
                );
                if pt.status == PointStatus::Failed {
                    if let Some(err) = &pt.error {
                        println!("         failed: {err}");
                    }
                }
            }
            Ok(())
        }
        Command::Reinvasion {
            params,
            cap_l_raised,
            sim,
            window,
            save_trajectories,
        } => {
            let p = params.to_params();
            let mut spec = ReinvasionSpec::new(p, cap_l_raised);
            spec.sim = sim.settings(spec.sim)?;
            if let Some(w) = window {
                spec.sim.window = w;
            }
            let dir = cli.out.join("reinvasion");
            let result = run_reinvasion(&spec, Some(&dir), save_trajectories)?;
            for ph in [&result.phase1, &result.phase2] {
                let target = ph
                    .classification
                    .target
                    .as_ref()
                    .map(|t| t.label.to_string())
                    .unwrap_or_default();
                let slowest = ph
                    .speeds
                    .slowest
                    .map(|s| format!("{s:.6}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{}: {} invasion with L = {:.6}; target {}, c1 = {:.6}, measured slowest {}, endpoint distance {:.3e}",
                    ph.label,
                    ph.scenario,
                    ph.params.cap_l,
                    target,
                    ph.speed.0,
                    slowest,
                    ph.endpoint_distance
                );
            }
            println!("wrote {}", dir.join("summary.csv").display());
            Ok(())
        }
    }
}
