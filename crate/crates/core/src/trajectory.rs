//! Target trajectories and their path-length.
//!
//! The target follows no imposed dynamics; generators here only realize that
//! freedom (static, drifts, walks, file input). The path-length
//! `C_T = sum_t ||theta_t - theta_{t-1}||^2` uses the convention
//! `theta_0 := theta_1`, so the first increment is always zero.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Trajectory descriptor; random variants consume a seeded stream.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Static {
        theta: Vec<f64>,
    },
    LinearDrift {
        start: Vec<f64>,
        velocity: Vec<f64>,
    },
    /// `theta_t = center + amplitude * sin(2 pi (t-1) / period)` per coordinate.
    Sinusoid {
        center: Vec<f64>,
        amplitude: Vec<f64>,
        period: f64,
    },
    RandomWalk {
        start: Vec<f64>,
        step_std: f64,
    },
    /// Random walk whose step into round t is scaled by `(t-1)^(-decay)`,
    /// giving a bounded path-length for decay > 1/2.
    DecayingWalk {
        start: Vec<f64>,
        step_std: f64,
        decay: f64,
    },
    /// `values[k]` holds from `switch_times[k-1]` (1-based round) onward.
    PiecewiseConstant {
        values: Vec<Vec<f64>>,
        switch_times: Vec<usize>,
    },
    /// CSV with exactly T rows of d comma-separated values, no header.
    File {
        path: PathBuf,
    },
}

/// The realized target sequence `theta_1 .. theta_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    d: usize,
    points: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::Dimension {
                    context: "trajectory point",
                    expected: d,
                    actual: p.len(),
                });
            }
        }
        Ok(Self { d, points })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    /// `theta_t` for 1-based `t`; `at(0)` applies the `theta_0 := theta_1`
    /// convention.
    pub fn at(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.points[0]
        } else {
            &self.points[t - 1]
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// One row per round, d comma-separated values, no header.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Path-length `C_T` plus its per-step increments (increment at t = 1 is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PathLength {
    pub value: f64,
    pub increments: Vec<f64>,
}

/// Sums squared consecutive displacements over the horizon.
pub fn path_length(traj: &Trajectory) -> PathLength {
    let mut increments = Vec::with_capacity(traj.horizon());
    increments.push(0.0);
    for t in 2..=traj.horizon() {
        let prev = traj.at(t - 1);
        let cur = traj.at(t);
        let diff: Vec<f64> = cur.iter().zip(prev).map(|(a, b)| a - b).collect();
        increments.push(linalg::dot(&diff, &diff));
    }
    PathLength {
        value: increments.iter().sum(),
        increments,
    }
}

/// Materializes `T` points for the descriptor.
pub fn generate_trajectory(
    spec: &TrajectorySpec,
    d: usize,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let check_dim = |v: &[f64], what: &'static str| -> Result<()> {
        if v.len() != d {
            return Err(Error::Dimension {
                context: what,
                expected: d,
                actual: v.len(),
            });
        }
        Ok(())
    };

    let points = match spec {
        TrajectorySpec::Static { theta } => {
            check_dim(theta, "static theta")?;
            vec![theta.clone(); horizon]
        }
        TrajectorySpec::LinearDrift { start, velocity } => {
            check_dim(start, "linear_drift start")?;
            check_dim(velocity, "linear_drift velocity")?;
            (0..horizon)
                .map(|k| {
                    start
                        .iter()
                        .zip(velocity)
                        .map(|(s, v)| s + k as f64 * v)
                        .collect()
                })
                .collect()
        }
        TrajectorySpec::Sinusoid {
            center,
            amplitude,
            period,
        } => {
            check_dim(center, "sinusoid center")?;
            check_dim(amplitude, "sinusoid amplitude")?;
            if *period <= 0.0 {
                return Err(Error::InvalidArgument("sinusoid period must be > 0".into()));
            }
            (0..horizon)
                .map(|k| {
                    let phase = (2.0 * std::f64::consts::PI * k as f64 / period).sin();
                    center
                        .iter()
                        .zip(amplitude)
                        .map(|(c, a)| c + a * phase)
                        .collect()
                })
                .collect()
        }
        TrajectorySpec::RandomWalk { start, step_std } => {
            check_dim(start, "random_walk start")?;
            walk(start, *step_std, 0.0, horizon, seed)?
        }
        TrajectorySpec::DecayingWalk {
            start,
            step_std,
            decay,
        } => {
            check_dim(start, "decaying_walk start")?;
            if *decay < 0.0 {
                return Err(Error::InvalidArgument("decay exponent must be >= 0".into()));
            }
            walk(start, *step_std, *decay, horizon, seed)?
        }
        TrajectorySpec::PiecewiseConstant {
            values,
            switch_times,
        } => {
            if values.is_empty() {
                return Err(Error::InvalidArgument(
                    "piecewise_constant needs at least one value".into(),
                ));
            }
            if switch_times.len() + 1 != values.len() {
                return Err(Error::InvalidArgument(format!(
                    "piecewise_constant: {} values need {} switch times, got {}",
                    values.len(),
                    values.len() - 1,
                    switch_times.len()
                )));
            }
            if switch_times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(
                    "switch times must be strictly increasing".into(),
                ));
            }
            for v in values {
                check_dim(v, "piecewise_constant value")?;
            }
            (1..=horizon)
                .map(|t| {
                    let idx = switch_times.iter().filter(|&&s| s <= t).count();
                    values[idx].clone()
                })
                .collect()
        }
        TrajectorySpec::File { path } => load_csv(path, d, horizon)?,
    };
    Trajectory::new(points)
}

fn walk(
    start: &[f64],
    step_std: f64,
    decay: f64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if step_std < 0.0 {
        return Err(Error::InvalidArgument("step std must be >= 0".into()));
    }
    let mut stream = rng::stream(rng::derive(seed, rng::TAG_TRAJECTORY, 0));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Vec::with_capacity(horizon);
    points.push(start.to_vec());
    for t in 2..=horizon {
        let scale = step_std * ((t - 1) as f64).powf(-decay);
        let prev = points.last().expect("nonempty");
        let next = prev
            .iter()
            .map(|x| x + scale * normal.sample(&mut stream))
            .collect();
        points.push(next);
    }
    Ok(points)
}

fn load_csv(path: &Path, d: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::TrajectoryFile(format!("{}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(d);
        for field in trimmed.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::TrajectoryFile(format!(
                    "line {}: cannot parse '{}' as a number",
                    lineno + 1,
                    field.trim()
                ))
            })?;
            row.push(v);
        }
        if row.len() != d {
            return Err(Error::TrajectoryFile(format!(
                "line {}: expected {} values, got {}",
                lineno + 1,
                d,
                row.len()
            )));
        }
        points.push(row);
    }
    if points.len() != horizon {
        return Err(Error::TrajectoryFile(format!(
            "expected {} rows, got {}",
            horizon,
            points.len()
        )));
    }
    Ok(points)
}
