//! Parameter sweeps: one experiment per axis value under a shared master
//! seed, a long-format CSV, and fitted log-log slopes.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::{ConfigDoc, ExperimentConfig, TrajectoryKindDoc};
use crate::experiment::{fmt_f64, run_experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Horizon T (values must be positive integers).
    Horizon,
    /// Explicit step size.
    Alpha,
    /// Multiplies every noise sigma.
    NoiseScale,
    /// Multiplies the trajectory's drift magnitude (scales C_T by the square).
    PathScale,
}

impl FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "t" | "horizon" => Ok(Self::Horizon),
            "alpha" => Ok(Self::Alpha),
            "noise_scale" | "noise" => Ok(Self::NoiseScale),
            "path_scale" | "path" => Ok(Self::PathScale),
            other => bail!("unknown sweep axis '{other}' (T | alpha | noise_scale | path_scale)"),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Horizon => "T",
            Self::Alpha => "alpha",
            Self::NoiseScale => "noise_scale",
            Self::PathScale => "path_scale",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: &'static str,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of ln(Reg_T mean) against ln(value).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_slope: Option<f64>,
    /// Least-squares slope of ln(bound total) against ln(value).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_slope: Option<f64>,
}

/// Applies one axis value to a copy of the config document.
fn apply_axis(doc: &mut ConfigDoc, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::Horizon => {
            if value < 1.0 || value.fract() != 0.0 {
                bail!("horizon sweep values must be positive integers, got {value}");
            }
            doc.dimensions.t = value as usize;
        }
        SweepAxis::Alpha => {
            if !value.is_finite() || value < 0.0 {
                bail!("alpha sweep values must be finite and >= 0, got {value}");
            }
            doc.algorithm.alpha = Some(value);
            doc.algorithm.policy = None;
        }
        SweepAxis::NoiseScale => {
            if value < 0.0 {
                bail!("noise scale must be >= 0, got {value}");
            }
            doc.sensing.noise.sigma *= value;
            if let Some(agents) = doc.sensing.agents.as_mut() {
                for a in agents {
                    if let Some(s) = a.sigma.as_mut() {
                        *s *= value;
                    }
                }
            }
        }
        SweepAxis::PathScale => {
            if value < 0.0 {
                bail!("path scale must be >= 0, got {value}");
            }
            let t = &mut doc.trajectory;
            match t.kind {
                TrajectoryKindDoc::Static => {}
                TrajectoryKindDoc::LinearDrift => scale_vec(&mut t.velocity, value),
                TrajectoryKindDoc::Sinusoid => scale_vec(&mut t.amplitude, value),
                TrajectoryKindDoc::RandomWalk | TrajectoryKindDoc::DecayingWalk => {
                    if let Some(s) = t.step_std.as_mut() {
                        *s *= value;
                    }
                }
                TrajectoryKindDoc::PiecewiseConstant => {
                    if let Some(values) = t.values.as_mut() {
                        if let Some(origin) = values.first().cloned() {
                            for v in values.iter_mut().skip(1) {
                                for (x, o) in v.iter_mut().zip(&origin) {
                                    *x = o + value * (*x - o);
                                }
                            }
                        }
                    }
                }
                TrajectoryKindDoc::File => {
                    bail!("path_scale sweeps do not apply to file trajectories")
                }
            }
        }
    }
    Ok(())
}

fn scale_vec(v: &mut Option<Vec<f64>>, s: f64) {
    if let Some(v) = v.as_mut() {
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

/// Runs one experiment per value; per-point failures are recorded and the
/// sweep continues. With `out` set, each point writes into `point_####/` and
/// the long-format CSV plus a JSON report land at the top level.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<SweepReport> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        bail!("sweep values must be strictly increasing");
    }

    let mut points = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let point = (|| -> Result<SweepPoint> {
            let mut doc = cfg.doc().clone();
            apply_axis(&mut doc, axis, value)?;
            let point_cfg = ExperimentConfig::from_doc(doc)?;
            let point_out = out.map(|d| d.join(format!("point_{i:04}")));
            let outcome = run_experiment(&point_cfg, point_out.as_deref(), threads)?;
            Ok(SweepPoint {
                value,
                regret_mean: Some(outcome.manifest.regret.mean),
                regret_stderr: Some(outcome.manifest.regret.stderr),
                bound_total: outcome.manifest.bounds.as_ref().map(|b| b.total),
                error: None,
            })
        })()
        .unwrap_or_else(|e| SweepPoint {
            value,
            regret_mean: None,
            regret_stderr: None,
            bound_total: None,
            error: Some(format!("{e:#}")),
        });
        points.push(point);
    }

    let report = SweepReport {
        axis: axis.name(),
        regret_slope: loglog_slope(&points, |p| p.regret_mean),
        bound_slope: loglog_slope(&points, |p| p.bound_total),
        points,
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("sweep.csv"), sweep_csv(&report))?;
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(dir.join("sweep.json"), text)?;
    }
    Ok(report)
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("value,regret_mean,regret_stderr,bound_total\n");
    for p in &report.points {
        let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.value),
            cell(p.regret_mean),
            cell(p.regret_stderr),
            cell(p.bound_total)
        ));
    }
    out
}

/// Least-squares slope of ln(y) vs ln(x) over the points where both are
/// positive and finite; None with fewer than two usable points.
fn loglog_slope(points: &[SweepPoint], y: impl Fn(&SweepPoint) -> Option<f64>) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            let yv = y(p)?;
            (p.value > 0.0 && yv > 0.0 && yv.is_finite()).then(|| (p.value.ln(), yv.ln()))
        })
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
