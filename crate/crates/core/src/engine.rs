//! The online tracking engine.
//!
//! Each round t every agent i averages its neighbors' previous estimates and
//! corrects with its own previous observation:
//!
//! ```text
//! est_{i,t} = sum_j P_ij est_{j,t-1} + alpha * H_i' (y_{i,t-1} - H_i est_{i,t-1})
//! ```
//!
//! Agents predict one step behind: round 1 is the configured initialization,
//! and the update producing round t consumes the round t-1 observation.
//! Replicas are independent single-threaded computations over shared
//! immutable inputs; every random draw comes from a per-(replica, agent)
//! stream, so parallel Monte Carlo is bit-identical to sequential.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::sensing::NetworkSensingSystem;
use crate::topology::MixingMatrix;
use crate::trajectory::Trajectory;

/// A replica is truncated once the stacked error norm passes this threshold,
/// keeping deliberately unstable configurations finite.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Initialization of the round-1 estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimates {
    Zero,
    /// One d-vector per agent.
    Explicit(Vec<Vec<f64>>),
    /// iid N(0, std^2) per coordinate from the replica's init stream.
    Gaussian {
        std: f64,
    },
}

/// All agents' estimates at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateState {
    /// 1-based round index.
    pub t: usize,
    /// n vectors of dimension d.
    pub estimates: Vec<Vec<f64>>,
}

/// Immutable inputs shared by every replica of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct ReplicaPlan<'a> {
    pub mixing: &'a MixingMatrix,
    pub system: &'a NetworkSensingSystem,
    pub trajectory: &'a Trajectory,
    pub alpha: f64,
    pub init: &'a InitialEstimates,
}

impl ReplicaPlan<'_> {
    fn check(&self) -> Result<()> {
        if self.mixing.n() != self.system.n() {
            return Err(Error::Dimension {
                context: "replica plan agent count",
                expected: self.mixing.n(),
                actual: self.system.n(),
            });
        }
        if self.trajectory.d() != self.system.d() {
            return Err(Error::Dimension {
                context: "replica plan dimension",
                expected: self.system.d(),
                actual: self.trajectory.d(),
            });
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if let InitialEstimates::Explicit(init) = self.init {
            if init.len() != self.system.n() {
                return Err(Error::Dimension {
                    context: "explicit initialization agents",
                    expected: self.system.n(),
                    actual: init.len(),
                });
            }
            for v in init {
                if v.len() != self.system.d() {
                    return Err(Error::Dimension {
                        context: "explicit initialization dimension",
                        expected: self.system.d(),
                        actual: v.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Full per-round record of one replica.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub replica_id: usize,
    pub seed: u64,
    /// Rounds 1..=T (shorter if truncated).
    pub states: Vec<EstimateState>,
    /// Stacked error `e_t` (nd per round), exactly `estimates - 1 (x) theta_t`.
    pub errors: Vec<Vec<f64>>,
    /// Exact conditional instantaneous regret per round.
    pub regret: Vec<f64>,
    /// Mean-square deviation `(1/n) sum_i ||e_{i,t}||^2` per round.
    pub msd: Vec<f64>,
    /// Observation noise consumed by the updates: `noise[t-1][i]` is
    /// `w_{i,t}` for rounds t = 1..T-1. Retained only on request.
    pub noise: Option<Vec<Vec<Vec<f64>>>>,
    /// First round whose stacked error norm crossed the threshold.
    pub diverged_at: Option<usize>,
}

impl SimulationTrace {
    pub fn rounds(&self) -> usize {
        self.states.len()
    }

    /// Time-averaged regret over the rounds this replica completed.
    pub fn cumulative_regret(&self) -> f64 {
        analysis::cumulative_regret(&self.regret)
    }

    /// `||e_t||^2` per round.
    pub fn error_sq_series(&self) -> Vec<f64> {
        self.errors.iter().map(|e| linalg::dot(e, e)).collect()
    }
}

/// One update of every agent from the previous state and the previous round's
/// observations. Uses nothing beyond neighbor estimates and the agent's own
/// observation.
pub fn step_estimates(
    mixing: &MixingMatrix,
    system: &NetworkSensingSystem,
    alpha: f64,
    prev: &EstimateState,
    prev_obs: &[Vec<f64>],
) -> Result<EstimateState> {
    let n = system.n();
    let d = system.d();
    if prev.estimates.len() != n {
        return Err(Error::Dimension {
            context: "step_estimates agents",
            expected: n,
            actual: prev.estimates.len(),
        });
    }
    if prev_obs.len() != n {
        return Err(Error::Dimension {
            context: "step_estimates observations",
            expected: n,
            actual: prev_obs.len(),
        });
    }
    let mut next = Vec::with_capacity(n);
    for (i, model) in system.models().iter().enumerate() {
        if prev.estimates[i].len() != d {
            return Err(Error::Dimension {
                context: "step_estimates estimate",
                expected: d,
                actual: prev.estimates[i].len(),
            });
        }
        if prev_obs[i].len() != model.obs_dim() {
            return Err(Error::Dimension {
                context: "step_estimates observation",
                expected: model.obs_dim(),
                actual: prev_obs[i].len(),
            });
        }
        // consensus: weighted average of neighbor estimates
        let mut est = vec![0.0; d];
        for j in 0..n {
            let w = mixing.get(i, j);
            if w != 0.0 {
                for (k, v) in prev.estimates[j].iter().enumerate() {
                    est[k] += w * v;
                }
            }
        }
        // innovation: alpha * H_i' (y_i - H_i est_i)
        if alpha != 0.0 {
            let h = model.h();
            let pred = h.matvec(&prev.estimates[i]);
            let resid: Vec<f64> = prev_obs[i].iter().zip(&pred).map(|(y, p)| y - p).collect();
            for (k, e) in est.iter_mut().enumerate() {
                let mut s = 0.0;
                for (r, res) in resid.iter().enumerate() {
                    s += h.get(r, k) * res;
                }
                *e += alpha * s;
            }
        }
        next.push(est);
    }
    Ok(EstimateState {
        t: prev.t + 1,
        estimates: next,
    })
}

fn initial_state(plan: &ReplicaPlan, replica_seed: u64) -> EstimateState {
    let n = plan.system.n();
    let d = plan.system.d();
    let estimates = match plan.init {
        InitialEstimates::Zero => vec![vec![0.0; d]; n],
        InitialEstimates::Explicit(init) => init.clone(),
        InitialEstimates::Gaussian { std } => {
            let mut stream = rng::stream(rng::derive(replica_seed, rng::TAG_INIT, 0));
            let normal = Normal::new(0.0, *std).expect("finite std");
            (0..n)
                .map(|_| (0..d).map(|_| normal.sample(&mut stream)).collect())
                .collect()
        }
    };
    EstimateState { t: 1, estimates }
}

fn record_round(
    plan: &ReplicaPlan,
    state: &EstimateState,
    trace: &mut SimulationTrace,
) -> Result<bool> {
    let theta = plan.trajectory.at(state.t);
    let mut stacked = Vec::with_capacity(plan.system.n() * plan.system.d());
    let mut msd = 0.0;
    for est in &state.estimates {
        let mut sq = 0.0;
        for (e, t) in est.iter().zip(theta) {
            let diff = e - t;
            stacked.push(diff);
            sq += diff * diff;
        }
        msd += sq;
    }
    msd /= plan.system.n() as f64;
    let norm = linalg::dot(&stacked, &stacked).sqrt();
    let regret = analysis::instantaneous_regret(state, theta, plan.system)?;
    trace.errors.push(stacked);
    trace.regret.push(regret);
    trace.msd.push(msd);
    trace.states.push(state.clone());
    if !norm.is_finite() || norm > DIVERGENCE_THRESHOLD {
        trace.diverged_at = Some(state.t);
        return Ok(false);
    }
    Ok(true)
}

/// Runs one replica over the whole horizon.
///
/// Round 1 is the initialization; the update into round t >= 2 consumes the
/// round t-1 observations, each drawn from that agent's own stream. On
/// divergence the trace is truncated at the offending round and flagged.
pub fn run_replica(
    plan: &ReplicaPlan,
    replica_id: usize,
    replica_seed: u64,
    retain_noise: bool,
) -> Result<SimulationTrace> {
    plan.check()?;
    let horizon = plan.trajectory.horizon();
    let n = plan.system.n();

    let mut agent_streams: Vec<_> = (0..n)
        .map(|i| rng::stream(rng::derive(replica_seed, rng::TAG_AGENT, i as u64)))
        .collect();

    let mut trace = SimulationTrace {
        replica_id,
        seed: replica_seed,
        states: Vec::with_capacity(horizon),
        errors: Vec::with_capacity(horizon),
        regret: Vec::with_capacity(horizon),
        msd: Vec::with_capacity(horizon),
        noise: retain_noise.then(Vec::new),
        diverged_at: None,
    };

    let mut state = initial_state(plan, replica_seed);
    if !record_round(plan, &state, &mut trace)? {
        return Ok(trace);
    }

    for t in 2..=horizon {
        let theta_prev = plan.trajectory.at(t - 1);
        let mut observations = Vec::with_capacity(n);
        let mut noises = retain_noise.then(|| Vec::with_capacity(n));
        for (i, model) in plan.system.models().iter().enumerate() {
            let w = model.sample_noise(&mut agent_streams[i]);
            let mut y = model.h().matvec(theta_prev);
            for (yk, wk) in y.iter_mut().zip(&w) {
                *yk += wk;
            }
            if let Some(ns) = noises.as_mut() {
                ns.push(w);
            }
            observations.push(y);
        }
        if let (Some(all), Some(ns)) = (trace.noise.as_mut(), noises) {
            all.push(ns);
        }
        state = step_estimates(plan.mixing, plan.system, plan.alpha, &state, &observations)?;
        if !record_round(plan, &state, &mut trace)? {
            break;
        }
    }
    Ok(trace)
}

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloOptions {
    pub replicas: usize,
    pub master_seed: u64,
    /// Drop diverged replicas from every aggregate (default: keep them and
    /// let the report flag the instability).
    pub exclude_diverged: bool,
}

/// Aggregates over replicas. Per-round statistics average the replicas that
/// reached that round; truncated replicas contribute the rounds they
/// completed unless exclusion is requested.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub replicas: usize,
    pub master_seed: u64,
    /// Mean and standard error of the per-replica time-averaged regret.
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub replica_regret: Vec<f64>,
    /// Per-replica intermediate-bound values and their aggregate.
    pub moment_bound_mean: f64,
    pub moment_bound_stderr: f64,
    pub round_regret_mean: Vec<f64>,
    pub round_regret_stderr: Vec<f64>,
    pub round_count: Vec<usize>,
    pub msd_mean: Vec<f64>,
    pub msd_stderr: Vec<f64>,
    pub e_sq_mean: Vec<f64>,
    pub diverged: Vec<usize>,
    pub excluded_diverged: bool,
}

struct ReplicaSummary {
    regret_total: f64,
    moment_bound: f64,
    regret_series: Vec<f64>,
    msd_series: Vec<f64>,
    e_sq_series: Vec<f64>,
    diverged_at: Option<usize>,
}

struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        }
    }
}

/// Runs R replicas (in parallel when a rayon pool is available) and folds the
/// aggregates in fixed replica order, so the report is identical for every
/// thread count and schedule.
pub fn run_monte_carlo(plan: &ReplicaPlan, opts: &MonteCarloOptions) -> Result<MonteCarloReport> {
    if opts.replicas == 0 {
        return Err(Error::InvalidArgument("replica count must be >= 1".into()));
    }
    plan.check()?;
    let horizon = plan.trajectory.horizon();

    let summaries: Vec<Result<ReplicaSummary>> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let seed = rng::replica_seed(opts.master_seed, r as u64);
            let trace = run_replica(plan, r, seed, false)?;
            let e_sq_series = trace.error_sq_series();
            Ok(ReplicaSummary {
                regret_total: trace.cumulative_regret(),
                moment_bound: analysis::second_moment_bound(&e_sq_series, plan.system),
                regret_series: trace.regret,
                msd_series: trace.msd,
                e_sq_series,
                diverged_at: trace.diverged_at,
            })
        })
        .collect();

    let mut regret_acc = Welford::new();
    let mut moment_bound_acc = Welford::new();
    let mut round_regret: Vec<Welford> = (0..horizon).map(|_| Welford::new()).collect();
    let mut round_msd: Vec<Welford> = (0..horizon).map(|_| Welford::new()).collect();
    let mut round_e_sq: Vec<Welford> = (0..horizon).map(|_| Welford::new()).collect();
    let mut replica_regret = Vec::with_capacity(opts.replicas);
    let mut diverged = Vec::new();

    for (r, summary) in summaries.into_iter().enumerate() {
        let s = summary?;
        if s.diverged_at.is_some() {
            diverged.push(r);
        }
        replica_regret.push(s.regret_total);
        if opts.exclude_diverged && s.diverged_at.is_some() {
            continue;
        }
        regret_acc.push(s.regret_total);
        moment_bound_acc.push(s.moment_bound);
        for (t, v) in s.regret_series.iter().enumerate() {
            round_regret[t].push(*v);
        }
        for (t, v) in s.msd_series.iter().enumerate() {
            round_msd[t].push(*v);
        }
        for (t, v) in s.e_sq_series.iter().enumerate() {
            round_e_sq[t].push(*v);
        }
    }

    Ok(MonteCarloReport {
        replicas: opts.replicas,
        master_seed: opts.master_seed,
        regret_mean: regret_acc.mean,
        regret_stderr: regret_acc.stderr(),
        replica_regret,
        moment_bound_mean: moment_bound_acc.mean,
        moment_bound_stderr: moment_bound_acc.stderr(),
        round_regret_mean: round_regret.iter().map(|w| w.mean).collect(),
        round_regret_stderr: round_regret.iter().map(|w| w.stderr()).collect(),
        round_count: round_regret.iter().map(|w| w.count).collect(),
        msd_mean: round_msd.iter().map(|w| w.mean).collect(),
        msd_stderr: round_msd.iter().map(|w| w.stderr()).collect(),
        e_sq_mean: round_e_sq.iter().map(|w| w.mean).collect(),
        diverged,
        excluded_diverged: opts.exclude_diverged,
    })
}
