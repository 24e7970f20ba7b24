//! End-to-end experiment execution: resolve the configured pieces, run the
//! Monte Carlo, evaluate the bounds, and persist plot-ready artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use citrack_core::analysis::{
    alpha_max, build_error_system, path_length_bound, stability_diagnostics, tune_alpha,
    AlphaMaxReport, BoundReport, ErrorSystem, StabilityReport, TuningPolicy,
};
use citrack_core::engine::{
    run_monte_carlo, run_replica, MonteCarloOptions, MonteCarloReport, ReplicaPlan, SimulationTrace,
};
use citrack_core::rng;
use citrack_core::sensing::{generate_models, NetworkSensingSystem, NoiseLaw, ObservationModel};
use citrack_core::topology::{
    build_graph, build_mixing_matrix, validate_mixing, MixingMatrix, MixingValidation,
};
use citrack_core::trajectory::{generate_trajectory, path_length, PathLength, Trajectory};

use crate::config::{AlphaSetting, ExperimentConfig, SensingSetup, TopologySetup};

/// Everything resolved from the config before any replica runs.
pub struct Prepared {
    pub mixing: MixingMatrix,
    pub mixing_validation: MixingValidation,
    pub system: NetworkSensingSystem,
    pub trajectory: Trajectory,
    pub path: PathLength,
    pub alpha: f64,
    pub alpha_policy: Option<TuningPolicy>,
    pub alpha_max: Option<AlphaMaxReport>,
    pub error_system: ErrorSystem,
}

/// Builds the mixing matrix, sensing system, trajectory, and step size.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let mixing = match &cfg.topology {
        TopologySetup::Kind(kind, scheme) => {
            let graph = build_graph(kind, cfg.n, cfg.seed)?;
            build_mixing_matrix(&graph, *scheme)?
        }
        TopologySetup::Matrix(m) => MixingMatrix::from_entries(m.clone())?,
    };
    let mixing_validation = validate_mixing(mixing.entries());

    let models = resolve_models(cfg)?;
    let system = if cfg.allow_unstable {
        NetworkSensingSystem::assemble_unchecked(models)?
    } else {
        NetworkSensingSystem::assemble(models)?
    };

    let trajectory = generate_trajectory(&cfg.trajectory, cfg.d, cfg.horizon, cfg.seed)?;
    let path = path_length(&trajectory);

    let alpha_max_report = match alpha_max(&mixing, &system) {
        Ok(r) => Some(r),
        Err(citrack_core::Error::AlphaInfeasible { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let (alpha, alpha_policy) = match cfg.alpha {
        AlphaSetting::Value(v) => (v, None),
        AlphaSetting::Policy(policy) => {
            let amax = alpha_max_report
                .as_ref()
                .map(|r| r.alpha_max)
                .context("step-size policy requires a feasible alpha_max")?;
            (
                tune_alpha(policy, path.value, cfg.horizon, amax)?,
                Some(policy),
            )
        }
    };

    let error_system = build_error_system(&mixing, &system, alpha)?;
    if !error_system.is_stable() && !cfg.allow_unstable {
        bail!(
            "||Q|| = {:.6} >= 1 at alpha = {alpha}: tracking will not contract \
             (set run.allow_unstable = true to run anyway)",
            error_system.q_norm()
        );
    }

    Ok(Prepared {
        mixing,
        mixing_validation,
        system,
        trajectory,
        path,
        alpha,
        alpha_policy,
        alpha_max: alpha_max_report,
        error_system,
    })
}

fn resolve_models(cfg: &ExperimentConfig) -> Result<Vec<ObservationModel>> {
    match &cfg.sensing {
        SensingSetup::Explicit(per_agent) => per_agent
            .iter()
            .enumerate()
            .map(|(i, (h, sigma))| {
                ObservationModel::new(
                    i,
                    h.clone(),
                    NoiseLaw {
                        family: cfg.noise.family,
                        sigma: *sigma,
                    },
                )
                .map_err(Into::into)
            })
            .collect(),
        SensingSetup::Generator(generator) => {
            let mut stream = rng::stream(rng::derive(cfg.seed, rng::TAG_SENSING, 0));
            Ok(generate_models(
                generator,
                cfg.n,
                cfg.d,
                cfg.noise,
                &mut stream,
            )?)
        }
    }
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, Serialize)]
pub struct AgentDiagnostics {
    pub agent: usize,
    pub h_norm_sq: f64,
    pub w_second_moment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceCheck {
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub bound_total: f64,
    /// `mean Reg_T <= bound + 3 stderr`.
    pub holds: bool,
    /// `mean Reg_T <= moment_bound estimate` and `moment_bound <= bound + 3 stderr`.
    pub chain_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretStats {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub diverged: Vec<usize>,
    pub excluded_diverged: bool,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Artifacts {
    pub manifest: String,
    pub aggregate_csv: String,
    pub trajectory_csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_scan_csv: Option<String>,
    pub trace_csvs: Vec<String>,
}

/// The run manifest: every number here is reproducible from (config, seed);
/// only `created_unix_ms` is wall-clock and it is excluded from hashing and
/// comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix_ms: u64,
    pub config_hash: String,
    /// Master seed; every replica, trajectory, and generator stream derives
    /// from it.
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub horizon: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_policy: Option<TuningPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_closed_form: Option<f64>,
    pub q_norm: f64,
    pub q_stable: bool,
    pub lambda_min_h_bar: f64,
    pub lambda_max_h_bar: f64,
    pub lambda_2_p: f64,
    pub lambda_n_p: f64,
    pub c_t: f64,
    pub identifiable: bool,
    pub per_agent: Vec<AgentDiagnostics>,
    pub mixing_validation: MixingValidation,
    pub bound_applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceCheck>,
    pub stability: StabilityReport,
    pub regret: RegretStats,
    pub moment_bound_mean: f64,
    pub moment_bound_stderr: f64,
    /// Recursion replay of replica 0, present when `run.retain_noise` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recursion_replay: Option<crate::oracle::OracleOutcome>,
    pub artifacts: Artifacts,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: MonteCarloReport,
}

impl RunOutcome {
    /// True when the bound applies and the Monte Carlo mean violates it
    /// beyond sampling error; the CLI maps this to a nonzero exit status.
    pub fn dominance_violated(&self) -> bool {
        self.manifest
            .dominance
            .as_ref()
            .map(|d| !d.holds)
            .unwrap_or(false)
    }
}

/// Runs the full experiment. With `out` set, writes the trajectory CSV,
/// per-replica trace CSVs, the aggregate CSV, the step-size scan, and the
/// manifest; partial outputs are removed if any write fails.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .context("thread pool")?;
            pool.install(|| run_experiment_inner(cfg, out))
        }
        None => run_experiment_inner(cfg, out),
    }
}

fn run_experiment_inner(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let prepared = prepare(cfg)?;
    let plan = ReplicaPlan {
        mixing: &prepared.mixing,
        system: &prepared.system,
        trajectory: &prepared.trajectory,
        alpha: prepared.alpha,
        init: &cfg.init,
    };
    let report = run_monte_carlo(
        &plan,
        &MonteCarloOptions {
            replicas: cfg.replicas,
            master_seed: cfg.seed,
            exclude_diverged: cfg.exclude_diverged,
        },
    )?;

    let q_norm = prepared.error_system.q_norm();
    let (bounds, dominance, bound_applicable) = if q_norm < 1.0 {
        let mut b = path_length_bound(
            prepared.alpha,
            q_norm,
            &prepared.system,
            prepared.path.value,
            cfg.horizon,
        )?;
        b.second_moment_estimate = Some(report.moment_bound_mean);
        let holds = report.regret_mean <= b.total + 3.0 * report.regret_stderr;
        let chain_holds = report.regret_mean
            <= report.moment_bound_mean * (1.0 + 1e-12) + f64::EPSILON
            && report.moment_bound_mean <= b.total + 3.0 * report.moment_bound_stderr;
        let dom = DominanceCheck {
            regret_mean: report.regret_mean,
            regret_stderr: report.regret_stderr,
            bound_total: b.total,
            holds,
            chain_holds,
        };
        (Some(b), Some(dom), true)
    } else {
        (None, None, false)
    };

    let stability = stability_diagnostics(&report.msd_mean, q_norm);

    let recursion_replay = if cfg.retain_noise {
        Some(crate::oracle::replay_deviation(&prepared, cfg, 1e-9)?)
    } else {
        None
    };

    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        config_hash: cfg.hash().to_string(),
        seed: cfg.seed,
        n: cfg.n,
        d: cfg.d,
        horizon: cfg.horizon,
        alpha: prepared.alpha,
        alpha_policy: prepared.alpha_policy,
        alpha_max: prepared.alpha_max.as_ref().map(|r| r.alpha_max),
        alpha_closed_form: prepared.alpha_max.as_ref().map(|r| r.alpha_closed_form),
        q_norm,
        q_stable: prepared.error_system.is_stable(),
        lambda_min_h_bar: prepared.system.lambda_min_h(),
        lambda_max_h_bar: prepared.system.lambda_max_h(),
        lambda_2_p: prepared.mixing.lambda_2(),
        lambda_n_p: prepared.mixing.lambda_n(),
        c_t: prepared.path.value,
        identifiable: prepared.system.is_identifiable(),
        per_agent: prepared
            .system
            .models()
            .iter()
            .map(|m| AgentDiagnostics {
                agent: m.agent_id(),
                h_norm_sq: m.h_norm_sq(),
                w_second_moment: m.w_second_moment(),
            })
            .collect(),
        mixing_validation: prepared.mixing_validation.clone(),
        bound_applicable,
        bounds,
        dominance,
        stability,
        regret: RegretStats {
            mean: report.regret_mean,
            stderr: report.regret_stderr,
            replicas: cfg.replicas,
            diverged: report.diverged.clone(),
            excluded_diverged: report.excluded_diverged,
        },
        moment_bound_mean: report.moment_bound_mean,
        moment_bound_stderr: report.moment_bound_stderr,
        recursion_replay,
        artifacts: Artifacts::default(),
    };

    if let Some(dir) = out {
        write_artifacts(cfg, &prepared, &report, &mut manifest, dir)?;
    }

    Ok(RunOutcome { manifest, report })
}

// ---------------------------------------------------------------------------
// artifact writing

/// 17 significant decimal digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("manifest serialization")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes every artifact, the manifest last (with the final artifact list);
/// on any failure the files written so far are removed.
fn write_artifacts(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    report: &MonteCarloReport,
    manifest: &mut RunManifest,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let mut artifacts = Artifacts {
            manifest: "manifest.json".into(),
            aggregate_csv: "aggregate.csv".into(),
            trajectory_csv: "trajectory.csv".into(),
            alpha_scan_csv: None,
            trace_csvs: Vec::new(),
        };

        let traj_path = dir.join("trajectory.csv");
        let mut buf = Vec::new();
        prepared.trajectory.write_csv(&mut buf)?;
        std::fs::write(&traj_path, &buf)?;
        written.push(traj_path);

        let agg_path = dir.join("aggregate.csv");
        std::fs::write(&agg_path, aggregate_csv(report))?;
        written.push(agg_path);

        if let Some(amax) = &prepared.alpha_max {
            let scan_path = dir.join("alpha_scan.csv");
            std::fs::write(&scan_path, alpha_scan_csv(prepared, amax)?)?;
            written.push(scan_path);
            artifacts.alpha_scan_csv = Some("alpha_scan.csv".into());
        }

        if cfg.emit_traces {
            let plan = ReplicaPlan {
                mixing: &prepared.mixing,
                system: &prepared.system,
                trajectory: &prepared.trajectory,
                alpha: prepared.alpha,
                init: &cfg.init,
            };
            for r in 0..cfg.replicas {
                let seed = rng::replica_seed(cfg.seed, r as u64);
                let trace = run_replica(&plan, r, seed, false)?;
                let name = format!("trace_{r:04}.csv");
                let path = dir.join(&name);
                std::fs::write(&path, trace_csv(&trace))?;
                written.push(path);
                artifacts.trace_csvs.push(name);
            }
        }

        let manifest_path = dir.join("manifest.json");
        manifest.artifacts = artifacts;
        write_json(&manifest_path, manifest)?;
        written.push(manifest_path);
        Ok(())
    })();

    if result.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

fn aggregate_csv(report: &MonteCarloReport) -> String {
    let mut out = String::from("t,regret_mean,regret_stderr\n");
    for (t, (mean, stderr)) in report
        .round_regret_mean
        .iter()
        .zip(&report.round_regret_stderr)
        .enumerate()
    {
        out.push_str(&format!(
            "{},{},{}\n",
            t + 1,
            fmt_f64(*mean),
            fmt_f64(*stderr)
        ));
    }
    out
}

fn trace_csv(trace: &SimulationTrace) -> String {
    let n = trace.states.first().map(|s| s.estimates.len()).unwrap_or(0);
    let mut out = String::from("t,regret,msd");
    for i in 0..n {
        out.push_str(&format!(",err_norm_agent{i}"));
    }
    out.push('\n');
    for (idx, state) in trace.states.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}",
            state.t,
            fmt_f64(trace.regret[idx]),
            fmt_f64(trace.msd[idx])
        ));
        let d = state.estimates.first().map(|e| e.len()).unwrap_or(0);
        let stacked = &trace.errors[idx];
        for i in 0..n {
            let agent_err = &stacked[i * d..(i + 1) * d];
            out.push_str(&format!(
                ",{}",
                fmt_f64(agent_err.iter().map(|v| v * v).sum::<f64>().sqrt())
            ));
        }
        out.push('\n');
    }
    out
}

/// Grid scan of the certificate: `alpha, ||Q(alpha)||, 1 - alpha lambda_min(H)`.
fn alpha_scan_csv(prepared: &Prepared, amax: &AlphaMaxReport) -> Result<String> {
    let mut out = String::from("alpha,q_norm,certificate_rhs\n");
    for k in 1..=20 {
        let alpha = amax.alpha_max * k as f64 / 20.0;
        let es = build_error_system(&prepared.mixing, &prepared.system, alpha)?;
        let rhs = 1.0 - alpha * prepared.system.lambda_min_h();
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(alpha),
            fmt_f64(es.q_norm()),
            fmt_f64(rhs)
        ));
    }
    Ok(out)
}
