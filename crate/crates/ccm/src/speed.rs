//! Front tracking and spreading-speed estimation.
//!
//! A front position is the first crossing of a level set, scanning from one
//! end of the domain toward the center, with linear interpolation between
//! the two bracketing nodes. Speeds come from a least-squares line through
//! the tracked positions over a late time window, after initial transients
//! have died out.

use crate::error::SpeedError;
use crate::solver::{Grid, Trajectory};
use std::io;

/// Which end of the domain the front is tracked from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// A level to track for one species, with the far-field values it must lie
/// strictly between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    pub species: usize,
    pub level: f64,
    pub source_value: f64,
    pub target_value: f64,
}

/// One tracked crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSample {
    pub t: f64,
    pub x: f64,
    pub species: usize,
    pub level: f64,
}

/// Least-squares fit `x(t) = speed * t + intercept` for one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit {
    pub species: usize,
    pub level: f64,
    pub speed: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

/// Speed estimates for a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedReport {
    /// Indexed by species; None when that species had no trackable front.
    pub fits: Vec<Option<SpeedFit>>,
    /// Smallest and largest |speed| over the fitted species.
    pub slowest: Option<f64>,
    pub fastest: Option<f64>,
    /// Absolute time window the fit used.
    pub window: (f64, f64),
    pub side: Side,
    pub warnings: Vec<String>,
}

/// Minimum samples for a fit to be attempted.
pub const MIN_SAMPLES: usize = 4;

/// Fits with a coefficient of determination below this get a warning.
pub const R_SQUARED_WARN: f64 = 0.999;

/// Midpoint levels for every species whose source and target values differ
/// meaningfully.
pub fn default_level_specs(source: [f64; 3], target: [f64; 3]) -> Vec<LevelSpec> {
    (0..3)
        .filter(|&sp| (source[sp] - target[sp]).abs() > 1e-9)
        .map(|sp| LevelSpec {
            species: sp,
            level: 0.5 * (source[sp] + target[sp]),
            source_value: source[sp],
            target_value: target[sp],
        })
        .collect()
}

/// First crossing of `level`, scanning segment by segment from the chosen
/// side. Returns None when the profile never crosses the level. The level
/// must lie strictly between the source and target values.
pub fn front_position(
    values: &[f64],
    grid: &Grid,
    level: f64,
    side: Side,
    source_value: f64,
    target_value: f64,
) -> Result<Option<f64>, SpeedError> {
    let lo = source_value.min(target_value);
    let hi = source_value.max(target_value);
    if !(level > lo && level < hi) {
        return Err(SpeedError::Level {
            level,
            source_value,
            target_value,
        });
    }
    let n = values.len();
    let segment = |i: usize| -> Option<f64> {
        let a = values[i] - level;
        let b = values[i + 1] - level;
        if a == 0.0 && b == 0.0 {
            // Plateau exactly at the level; not a crossing.
            return None;
        }
        if a * b > 0.0 {
            return None;
        }
        let t = (level - values[i]) / (values[i + 1] - values[i]);
        Some(grid.x(i) + t * grid.dx())
    };
    match side {
        Side::Right => {
            for i in (0..n - 1).rev() {
                if let Some(x) = segment(i) {
                    return Ok(Some(x));
                }
            }
        }
        Side::Left => {
            for i in 0..n - 1 {
                if let Some(x) = segment(i) {
                    return Ok(Some(x));
                }
            }
        }
    }
    Ok(None)
}

/// Track the requested levels through a trajectory's snapshots.
pub fn front_samples(
    traj: &Trajectory,
    specs: &[LevelSpec],
    side: Side,
) -> Result<Vec<FrontSample>, SpeedError> {
    let mut out = Vec::new();
    for snap in &traj.snapshots {
        for spec in specs {
            if let Some(x) = front_position(
                snap.species(spec.species),
                snap.grid(),
                spec.level,
                side,
                spec.source_value,
                spec.target_value,
            )? {
                out.push(FrontSample {
                    t: snap.t,
                    x,
                    species: spec.species,
                    level: spec.level,
                });
            }
        }
    }
    Ok(out)
}

fn fit_line(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_x = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stx = 0.0;
    for (t, x) in samples {
        stt += (t - mean_t) * (t - mean_t);
        stx += (t - mean_t) * (x - mean_x);
    }
    if stt == 0.0 {
        return None;
    }
    let slope = stx / stt;
    let intercept = mean_x - slope * mean_t;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, x) in samples {
        let pred = slope * t + intercept;
        ss_res += (x - pred) * (x - pred);
        ss_tot += (x - mean_x) * (x - mean_x);
    }
    let r_squared = if ss_tot <= 1e-30 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Some((slope, intercept, r_squared))
}

/// Estimate per-species speeds from the level crossings inside the window
/// `(w0 * t_end, w1 * t_end)`. Species with fewer than [`MIN_SAMPLES`]
/// crossings in the window are reported as absent; if no species can be
/// fitted at all the call fails with [`SpeedError::InsufficientSamples`].
pub fn estimate_speeds(
    traj: &Trajectory,
    specs: &[LevelSpec],
    window_frac: (f64, f64),
    side: Side,
) -> Result<SpeedReport, SpeedError> {
    let (w0, w1) = window_frac;
    assert!(
        (0.0..1.0).contains(&w0) && w0 < w1 && w1 <= 1.0,
        "window fractions must satisfy 0 <= w0 < w1 <= 1"
    );
    let t_end = traj.snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let window = (w0 * t_end, w1 * t_end);
    let samples = front_samples(traj, specs, side)?;
    let mut fits: Vec<Option<SpeedFit>> = vec![None; 3];
    let mut warnings = Vec::new();
    let mut best_found = 0usize;
    let tol = 1e-9 * t_end.max(1.0);
    for spec in specs {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| {
                s.species == spec.species
                    && s.t >= window.0 - tol
                    && s.t <= window.1 + tol
            })
            .map(|s| (s.t, s.x))
            .collect();
        best_found = best_found.max(pts.len());
        if pts.len() < MIN_SAMPLES {
            warnings.push(format!(
                "species {}: only {} front samples in the window, need {}",
                spec.species,
                pts.len(),
                MIN_SAMPLES
            ));
            continue;
        }
        if let Some((slope, intercept, r_squared)) = fit_line(&pts) {
            if r_squared < R_SQUARED_WARN {
                warnings.push(format!(
                    "species {}: front positions are not cleanly linear in time (r^2 = {r_squared:.6})",
                    spec.species
                ));
            }
            fits[spec.species] = Some(SpeedFit {
                species: spec.species,
                level: spec.level,
                speed: slope,
                intercept,
                r_squared,
                n_samples: pts.len(),
            });
        }
    }
    if fits.iter().all(|f| f.is_none()) {
        return Err(SpeedError::InsufficientSamples {
            needed: MIN_SAMPLES,
            found: best_found,
        });
    }
    let speeds: Vec<f64> = fits
        .iter()
        .flatten()
        .map(|f| f.speed.abs())
        .collect();
    let slowest = speeds.iter().cloned().reduce(f64::min);
    let fastest = speeds.iter().cloned().reduce(f64::max);
    Ok(SpeedReport {
        fits,
        slowest,
        fastest,
        window,
        side,
        warnings,
    })
}

/// CSV rows for a speed report.
pub fn write_speed_csv<W: io::Write>(
    report: &SpeedReport,
    species_names: [&str; 3],
    out: &mut W,
) -> io::Result<()> {
    writeln!(
        out,
        "species,speed,intercept,r_squared,n_samples,level,window_t0,window_t1"
    )?;
    for fit in report.fits.iter().flatten() {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            species_names[fit.species],
            fit.speed,
            fit.intercept,
            fit.r_squared,
            fit.n_samples,
            fit.level,
            report.window.0,
            report.window.1
        )?;
    }
    Ok(())
}
