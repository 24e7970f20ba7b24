//! Error-system construction, step-size certification, and regret accounting.
//!
//! Stacking the per-agent errors `e_{i,t} = est_{i,t} - theta_t` into one
//! nd-vector, the tracking update is the LTI recursion
//!
//! ```text
//! e_t = Q e_{t-1} + u_t
//! Q   = P (x) I_d - alpha * blockdiag[H_1'H_1, ..., H_n'H_n]
//! u_t = 1_n (x) (theta_{t-1} - theta_t) + alpha * [H_1'w_{1,t-1}; ...; H_n'w_{n,t-1}]
//! ```
//!
//! Q is symmetric, so its spectral norm is an eigenvalue magnitude and the
//! whole analysis reduces to dense symmetric eigenproblems:
//!
//! * contraction `||Q|| < 1` gives mean-square stability and makes the
//!   path-length regret bound applicable;
//! * the certified step-size region is where
//!   `||Q(alpha)|| <= 1 - alpha * lambda_min(H)` with `H = (1/n) sum H_i'H_i`;
//!   its right edge is `alpha_max`, found by bisection below the closed-form
//!   Weyl candidate `(1 + lambda_n(P)) / (lambda_max(blockdiag) + lambda_min(H))`;
//! * the time-averaged regret of the network obeys
//!
//! ```text
//! Reg_T <= (1/n) sum_i ||H_i||^2 * alpha^2 sum_i ||H_i||^2 W_i / (1 - ||Q||)
//!        + (1/T) sum_i ||H_i||^2 * C_T / (1 - ||Q||)^2
//! ```
//!
//! with the intermediate bound
//! `Reg_T <= (1/(nT)) sum_t sum_i ||H_i||^2 E||e_t||^2` nesting between the
//! realized regret and the closed form.

use serde::Serialize;

use crate::engine::EstimateState;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, EIGEN_SIZE_LIMIT};
use crate::sensing::NetworkSensingSystem;
use crate::topology::MixingMatrix;

/// Predicate slack for the step-size certificate, absorbing eigensolver
/// rounding (the certified family attains the inequality with equality).
const CERT_SLACK: f64 = 1e-12;

/// `||Q||` values within this margin of 1 are treated as non-contractive:
/// the eigensolver resolves the boundary only to rounding, and a contraction
/// this weak is useless anyway.
const STABILITY_MARGIN: f64 = 1e-12;

/// Smallest step size worth certifying.
const ALPHA_FLOOR: f64 = 1e-12;

/// The pair (Q, ||Q||) driving the error recursion for a fixed step size.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    q: Mat,
    q_norm: f64,
    alpha: f64,
    stable: bool,
}

impl ErrorSystem {
    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn q_norm(&self) -> f64 {
        self.q_norm
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Certified contraction: `||Q|| < 1 - 1e-12`.
    pub fn is_stable(&self) -> bool {
        self.stable
    }
}

/// Assembles `Q = P (x) I_d - alpha * blockdiag[H_i'H_i]` and its spectral
/// norm. `alpha = 0` is allowed (pure consensus; `||Q|| = 1`).
pub fn build_error_system(
    mixing: &MixingMatrix,
    system: &NetworkSensingSystem,
    alpha: f64,
) -> Result<ErrorSystem> {
    if mixing.n() != system.n() {
        return Err(Error::Dimension {
            context: "error system agent count",
            expected: mixing.n(),
            actual: system.n(),
        });
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and >= 0, got {alpha}"
        )));
    }
    let n = system.n();
    let d = system.d();
    let nd = n * d;
    if nd > EIGEN_SIZE_LIMIT {
        return Err(Error::MatrixTooLarge {
            size: nd,
            limit: EIGEN_SIZE_LIMIT,
        });
    }
    let mut q = mixing.entries().kron_identity(d);
    for (i, model) in system.models().iter().enumerate() {
        let gram = model.h().gram();
        for a in 0..d {
            for b in 0..d {
                let idx = (i * d + a, i * d + b);
                q.set(idx.0, idx.1, q.get(idx.0, idx.1) - alpha * gram.get(a, b));
            }
        }
    }
    let q_norm = linalg::spectral_norm_sym(&q)?;
    Ok(ErrorSystem {
        q,
        q_norm,
        alpha,
        stable: q_norm < 1.0 - STABILITY_MARGIN,
    })
}

/// The recursion input `u_t`: drift rows `theta_prev - theta_cur` for every
/// agent plus the innovation-noise rows `alpha * H_i' w_i`.
pub fn error_input(
    theta_prev: &[f64],
    theta_cur: &[f64],
    noises: &[Vec<f64>],
    system: &NetworkSensingSystem,
    alpha: f64,
) -> Result<Vec<f64>> {
    let d = system.d();
    let n = system.n();
    if theta_prev.len() != d || theta_cur.len() != d {
        return Err(Error::Dimension {
            context: "error_input theta",
            expected: d,
            actual: theta_prev.len().max(theta_cur.len()),
        });
    }
    if noises.len() != n {
        return Err(Error::Dimension {
            context: "error_input noise count",
            expected: n,
            actual: noises.len(),
        });
    }
    let drift: Vec<f64> = theta_prev
        .iter()
        .zip(theta_cur)
        .map(|(p, c)| p - c)
        .collect();
    let mut u = vec![0.0; n * d];
    for (i, model) in system.models().iter().enumerate() {
        let w = &noises[i];
        if w.len() != model.obs_dim() {
            return Err(Error::Dimension {
                context: "error_input noise dimension",
                expected: model.obs_dim(),
                actual: w.len(),
            });
        }
        // H_i' w_i without materializing the transpose
        let h = model.h();
        for a in 0..d {
            let mut s = 0.0;
            for (r, wr) in w.iter().enumerate() {
                s += h.get(r, a) * wr;
            }
            u[i * d + a] = drift[a] + alpha * s;
        }
    }
    Ok(u)
}

/// One step of the recursion: `Q e_prev + u`.
pub fn recurse_error(es: &ErrorSystem, e_prev: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let nd = es.q.rows();
    if e_prev.len() != nd || u.len() != nd {
        return Err(Error::Dimension {
            context: "recurse_error vector",
            expected: nd,
            actual: e_prev.len().min(u.len()),
        });
    }
    let mut e = es.q.matvec(e_prev);
    for (ei, ui) in e.iter_mut().zip(u) {
        *ei += ui;
    }
    Ok(e)
}

/// Certified step-size region report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaMaxReport {
    /// Right edge of the certified region (to bisection resolution).
    pub alpha_max: f64,
    /// Closed-form Weyl candidate bounding the search interval.
    pub alpha_closed_form: f64,
    /// `||Q(alpha_max)||`, re-verified spectrally.
    pub q_norm_at_max: f64,
}

/// Largest `alpha` such that `||Q(alpha)|| <= 1 - alpha * lambda_min(H)` and
/// `||Q(alpha)|| < 1`.
///
/// The function `alpha -> ||Q(alpha)|| - (1 - alpha * lambda_min(H))` is
/// convex and vanishes at 0, so the feasible set is an interval `[0, a]`;
/// Weyl's inequality confines it to `(0, alpha_closed]`, and a bisection on
/// the boundary returns the certified edge. Every candidate is verified by a
/// direct eigendecomposition, never by the closed form alone.
pub fn alpha_max(mixing: &MixingMatrix, system: &NetworkSensingSystem) -> Result<AlphaMaxReport> {
    let lambda_min_h = system.lambda_min_h();
    let lambda_n_p = mixing.lambda_n();
    if !system.is_identifiable() || lambda_min_h <= 0.0 {
        return Err(Error::AlphaInfeasible {
            floor: ALPHA_FLOOR,
            lambda_min_h,
            lambda_n_p,
        });
    }
    let lambda_max_blockdiag = system
        .models()
        .iter()
        .map(|m| m.h_norm_sq())
        .fold(0.0f64, f64::max);
    let alpha_closed = (1.0 + lambda_n_p) / (lambda_max_blockdiag + lambda_min_h);

    let certified = |alpha: f64| -> Result<Option<f64>> {
        let es = build_error_system(mixing, system, alpha)?;
        let ok = es.q_norm <= 1.0 - alpha * lambda_min_h + CERT_SLACK && es.q_norm < 1.0;
        Ok(ok.then_some(es.q_norm))
    };

    if let Some(q_norm) = certified(alpha_closed)? {
        return Ok(AlphaMaxReport {
            alpha_max: alpha_closed,
            alpha_closed_form: alpha_closed,
            q_norm_at_max: q_norm,
        });
    }

    let mut lo = 0.0f64;
    let mut lo_q = f64::NAN;
    let mut hi = alpha_closed;
    for _ in 0..100 {
        if hi - lo <= 1e-12 * alpha_closed {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match certified(mid)? {
            Some(q_norm) => {
                lo = mid;
                lo_q = q_norm;
            }
            None => hi = mid,
        }
    }
    if lo <= ALPHA_FLOOR || lo_q.is_nan() {
        return Err(Error::AlphaInfeasible {
            floor: ALPHA_FLOOR,
            lambda_min_h,
            lambda_n_p,
        });
    }
    Ok(AlphaMaxReport {
        alpha_max: lo,
        alpha_closed_form: alpha_closed,
        q_norm_at_max: lo_q,
    })
}

/// Step-size tuning regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningPolicy {
    /// Fixed target: `alpha = min(1/T, alpha_max)`.
    Static,
    /// Noiseless observations: `alpha = min(1, alpha_max)`.
    Noiseless,
    /// Arbitrary drift: `alpha = min(C_T^(1/3) T^(-1/3), alpha_max)`.
    General,
}

/// Evaluates the chosen policy. The general policy with `C_T = 0` falls back
/// to the static policy (its formula would return 0, which is not a usable
/// step size).
pub fn tune_alpha(
    policy: TuningPolicy,
    path_length: f64,
    horizon: usize,
    alpha_max: f64,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if path_length < 0.0 {
        return Err(Error::InvalidArgument("path length must be >= 0".into()));
    }
    if alpha_max <= 0.0 {
        return Err(Error::InvalidArgument("alpha_max must be > 0".into()));
    }
    let t = horizon as f64;
    let alpha = match policy {
        TuningPolicy::Static => (1.0 / t).min(alpha_max),
        TuningPolicy::Noiseless => 1.0f64.min(alpha_max),
        TuningPolicy::General => {
            if path_length == 0.0 {
                return tune_alpha(TuningPolicy::Static, 0.0, horizon, alpha_max);
            }
            (path_length.cbrt() / t.cbrt()).min(alpha_max)
        }
    };
    Ok(alpha)
}

/// Exact expected instantaneous regret conditioned on the estimates:
/// `(1/n) sum_j sum_i ||H_i (est_j - theta)||^2`, evaluated through the
/// aggregate quadratic form `sum_i H_i'H_i` (fresh observation noise cancels
/// in expectation).
pub fn instantaneous_regret(
    state: &EstimateState,
    theta: &[f64],
    system: &NetworkSensingSystem,
) -> Result<f64> {
    let d = system.d();
    if theta.len() != d {
        return Err(Error::Dimension {
            context: "instantaneous_regret theta",
            expected: d,
            actual: theta.len(),
        });
    }
    if state.estimates.len() != system.n() {
        return Err(Error::Dimension {
            context: "instantaneous_regret agents",
            expected: system.n(),
            actual: state.estimates.len(),
        });
    }
    let gram_sum = system.gram_sum();
    let mut total = 0.0;
    let mut diff = vec![0.0; d];
    for est in &state.estimates {
        if est.len() != d {
            return Err(Error::Dimension {
                context: "instantaneous_regret estimate",
                expected: d,
                actual: est.len(),
            });
        }
        for (k, (e, t)) in est.iter().zip(theta).enumerate() {
            diff[k] = e - t;
        }
        total += gram_sum.quadratic_form(&diff);
    }
    Ok(total / system.n() as f64)
}

/// Time-averaged regret: arithmetic mean of the per-round values.
pub fn cumulative_regret(per_round: &[f64]) -> f64 {
    if per_round.is_empty() {
        return 0.0;
    }
    per_round.iter().sum::<f64>() / per_round.len() as f64
}

/// Intermediate regret bound from the per-round second moments:
/// `(1/(nT)) * (sum_i ||H_i||^2) * sum_t E||e_t||^2`.
pub fn second_moment_bound(e_sq_series: &[f64], system: &NetworkSensingSystem) -> f64 {
    if e_sq_series.is_empty() {
        return 0.0;
    }
    let horizon = e_sq_series.len() as f64;
    system.sum_hnorm_sq() * e_sq_series.iter().sum::<f64>() / (system.n() as f64 * horizon)
}

/// The evaluated path-length bound and its pieces.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Noise contribution: `(1/n) sum ||H_i||^2 * alpha^2 sum ||H_i||^2 W_i / (1 - ||Q||)`.
    pub noise_term: f64,
    /// Drift contribution: `(1/T) sum ||H_i||^2 * C_T / (1 - ||Q||)^2`.
    pub path_term: f64,
    pub total: f64,
    /// Constant-free shape `alpha sum W_i + C_T / (T alpha^2)`.
    pub simplified_order: f64,
    /// Telescoping weight `1/||Q|| - 1`.
    pub beta_used: f64,
    /// Monte Carlo estimate of the intermediate bound, filled in by the
    /// experiment driver when a run is available.
    pub second_moment_estimate: Option<f64>,
}

/// Evaluates the path-length regret bound; requires `||Q|| < 1`.
pub fn path_length_bound(
    alpha: f64,
    q_norm: f64,
    system: &NetworkSensingSystem,
    path_length: f64,
    horizon: usize,
) -> Result<BoundReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&q_norm) {
        return Err(Error::BoundInapplicable { q_norm });
    }
    let n = system.n() as f64;
    let t = horizon as f64;
    let contraction = 1.0 - q_norm;
    let noise_term =
        system.sum_hnorm_sq() / n * alpha * alpha * system.sum_hnorm_sq_w() / contraction;
    let path_term = system.sum_hnorm_sq() / t * path_length / (contraction * contraction);
    let simplified_order = if alpha > 0.0 {
        alpha * system.sum_w() + path_length / (t * alpha * alpha)
    } else {
        f64::INFINITY
    };
    Ok(BoundReport {
        noise_term,
        path_term,
        total: noise_term + path_term,
        simplified_order,
        beta_used: 1.0 / q_norm - 1.0,
        second_moment_estimate: None,
    })
}

/// Windowed settling diagnosis of a mean-square-deviation series.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// None when the series is too short to judge.
    pub settled: Option<bool>,
    /// Mean of the tail window when settled.
    pub sigma_estimate: Option<f64>,
    /// Spectral verdict rho(Q) < 1 (= ||Q|| < 1 for symmetric Q).
    pub spectral_contraction: bool,
    /// Tail window length (last 10% of rounds, at least 2).
    pub window: usize,
    pub tail_relative_change: Option<f64>,
}

const SETTLE_RTOL: f64 = 1e-3;
const MIN_SERIES_LEN: usize = 20;

/// Judges whether the deviation series has settled: relative spread of the
/// last 10% of rounds below 1e-3 (with an absolute floor for series decaying
/// to zero). Asymptotic stability has no finite-horizon test; this windowed
/// criterion is the reported proxy.
pub fn stability_diagnostics(msd_series: &[f64], q_norm: f64) -> StabilityReport {
    let len = msd_series.len();
    let window = (len / 10).max(2);
    if len < MIN_SERIES_LEN {
        return StabilityReport {
            settled: None,
            sigma_estimate: None,
            spectral_contraction: q_norm < 1.0,
            window,
            tail_relative_change: None,
        };
    }
    let tail = &msd_series[len - window..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / window as f64;
    let spread = max - min;
    let rel = spread / mean.abs().max(1e-12);
    let settled = spread <= SETTLE_RTOL * mean.abs().max(1e-12);
    StabilityReport {
        settled: Some(settled),
        sigma_estimate: settled.then_some(mean),
        spectral_contraction: q_norm < 1.0,
        window,
        tail_relative_change: Some(rel),
    }
}
