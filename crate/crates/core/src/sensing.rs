//! Per-agent observation models and the network sensing system.
//!
//! Agent i observes `y_{i,t} = H_i theta_t + w_{i,t}` with zero-mean noise of
//! scalar second moment `W_i = E[w'w]`. The target is usually not observable
//! by any single agent; global identifiability means the averaged Gram matrix
//! `H = (1/n) sum_i H_i' H_i` is invertible.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Relative identifiability threshold: the system counts as identifiable when
/// `lambda_min(H) > IDENTIFIABILITY_RTOL * lambda_max(H)`.
pub const IDENTIFIABILITY_RTOL: f64 = 1e-10;

/// Noise distribution family; both are parameterized by the per-coordinate
/// standard deviation, so `W_i = m_i sigma^2` either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Uniform on `[-sigma*sqrt(3), sigma*sqrt(3)]`.
    Uniform,
}

/// Per-coordinate iid noise descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseLaw {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            family: NoiseFamily::Gaussian,
            sigma,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma == 0.0
    }

    fn fill(&self, rng: &mut impl Rng, out: &mut [f64]) {
        if self.sigma == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.family {
            NoiseFamily::Gaussian => {
                let normal = Normal::new(0.0, self.sigma).expect("finite std");
                for v in out.iter_mut() {
                    *v = normal.sample(rng);
                }
            }
            NoiseFamily::Uniform => {
                let half_width = self.sigma * 3.0f64.sqrt();
                for v in out.iter_mut() {
                    *v = rng.random_range(-half_width..=half_width);
                }
            }
        }
    }
}

/// One agent's observation channel.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    agent_id: usize,
    h: Mat,
    noise: NoiseLaw,
    /// E[w'w] = m sigma^2.
    w_second_moment: f64,
    /// Squared spectral norm ||H_i||^2 = lambda_max(H_i' H_i).
    h_norm_sq: f64,
}

impl ObservationModel {
    pub fn new(agent_id: usize, h: Mat, noise: NoiseLaw) -> Result<Self> {
        if noise.sigma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be >= 0, got {}",
                noise.sigma
            )));
        }
        let m = h.rows();
        let gram = h.gram();
        let h_norm_sq = linalg::sym_eigenvalues(&gram)?[0].max(0.0);
        Ok(Self {
            agent_id,
            w_second_moment: m as f64 * noise.sigma * noise.sigma,
            h,
            noise,
            h_norm_sq,
        })
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn obs_dim(&self) -> usize {
        self.h.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.h.cols()
    }

    pub fn noise(&self) -> NoiseLaw {
        self.noise
    }

    pub fn w_second_moment(&self) -> f64 {
        self.w_second_moment
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.h_norm_sq
    }

    /// Draws the noise vector w for one round.
    pub fn sample_noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut w = vec![0.0; self.obs_dim()];
        self.noise.fill(rng, &mut w);
        w
    }
}

/// `y = H theta + w` with w drawn iid per coordinate from the model's law.
pub fn sample_observation(
    model: &ObservationModel,
    theta: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if theta.len() != model.state_dim() {
        return Err(Error::Dimension {
            context: "sample_observation theta",
            expected: model.state_dim(),
            actual: theta.len(),
        });
    }
    let mut y = model.h.matvec(theta);
    if !model.noise.is_zero() {
        let mut w = vec![0.0; y.len()];
        model.noise.fill(rng, &mut w);
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi += wi;
        }
    }
    Ok(y)
}

/// The assembled network: all observation models plus the aggregate constants
/// every bound uses.
#[derive(Debug, Clone)]
pub struct NetworkSensingSystem {
    models: Vec<ObservationModel>,
    /// (1/n) sum_i H_i' H_i.
    h_bar: Mat,
    /// sum_i H_i' H_i (= n * h_bar), kept for the exact regret quadratic form.
    gram_sum: Mat,
    lambda_min_h: f64,
    lambda_max_h: f64,
    sum_hnorm_sq_w: f64,
    sum_hnorm_sq: f64,
    identifiable: bool,
}

impl NetworkSensingSystem {
    /// Assembles the system and rejects non-identifiable networks.
    pub fn assemble(models: Vec<ObservationModel>) -> Result<Self> {
        let sys = Self::assemble_unchecked(models)?;
        if !sys.identifiable {
            return Err(Error::NotIdentifiable {
                lambda_min: sys.lambda_min_h,
                lambda_max: sys.lambda_max_h,
            });
        }
        Ok(sys)
    }

    /// Assembles without the identifiability gate (diagnostics still computed);
    /// dimension errors are still fatal.
    pub fn assemble_unchecked(models: Vec<ObservationModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one observation model required".into(),
            ));
        }
        let d = models[0].state_dim();
        for m in &models {
            if m.state_dim() != d {
                return Err(Error::Dimension {
                    context: "observation model state dimension",
                    expected: d,
                    actual: m.state_dim(),
                });
            }
        }
        let n = models.len();
        let mut gram_sum = Mat::zeros(d, d);
        for m in &models {
            let g = m.h.gram();
            for i in 0..d {
                for j in 0..d {
                    gram_sum.set(i, j, gram_sum.get(i, j) + g.get(i, j));
                }
            }
        }
        let h_bar = Mat::from_fn(d, d, |i, j| gram_sum.get(i, j) / n as f64);
        let eig = linalg::sym_eigenvalues(&h_bar)?;
        let lambda_max_h = eig[0];
        let lambda_min_h = eig[d - 1];
        let identifiable =
            lambda_min_h > IDENTIFIABILITY_RTOL * lambda_max_h.max(0.0) && lambda_min_h > 0.0;
        let sum_hnorm_sq_w = models
            .iter()
            .map(|m| m.h_norm_sq() * m.w_second_moment())
            .sum();
        let sum_hnorm_sq = models.iter().map(|m| m.h_norm_sq()).sum();
        Ok(Self {
            models,
            h_bar,
            gram_sum,
            lambda_min_h,
            lambda_max_h,
            sum_hnorm_sq_w,
            sum_hnorm_sq,
            identifiable,
        })
    }

    pub fn n(&self) -> usize {
        self.models.len()
    }

    pub fn d(&self) -> usize {
        self.h_bar.rows()
    }

    pub fn models(&self) -> &[ObservationModel] {
        &self.models
    }

    pub fn model(&self, i: usize) -> &ObservationModel {
        &self.models[i]
    }

    pub fn h_bar(&self) -> &Mat {
        &self.h_bar
    }

    pub fn gram_sum(&self) -> &Mat {
        &self.gram_sum
    }

    pub fn lambda_min_h(&self) -> f64 {
        self.lambda_min_h
    }

    pub fn lambda_max_h(&self) -> f64 {
        self.lambda_max_h
    }

    /// sum_i ||H_i||^2 W_i.
    pub fn sum_hnorm_sq_w(&self) -> f64 {
        self.sum_hnorm_sq_w
    }

    /// sum_i ||H_i||^2.
    pub fn sum_hnorm_sq(&self) -> f64 {
        self.sum_hnorm_sq
    }

    /// sum_i W_i.
    pub fn sum_w(&self) -> f64 {
        self.models.iter().map(|m| m.w_second_moment()).sum()
    }

    pub fn is_identifiable(&self) -> bool {
        self.identifiable
    }

    /// True when every agent's noise is degenerate (W_i = 0).
    pub fn is_noiseless(&self) -> bool {
        self.models.iter().all(|m| m.w_second_moment() == 0.0)
    }
}

/// Exact expectation of the network loss at `theta_hat` when the target is
/// `theta_true`: `sum_i ||H_i (theta_hat - theta_true)||^2 + sum_i W_i`.
/// No sampling; per-agent terms are evaluated literally.
pub fn expected_network_loss(
    system: &NetworkSensingSystem,
    theta_hat: &[f64],
    theta_true: &[f64],
) -> Result<f64> {
    let d = system.d();
    if theta_hat.len() != d {
        return Err(Error::Dimension {
            context: "expected_network_loss theta_hat",
            expected: d,
            actual: theta_hat.len(),
        });
    }
    if theta_true.len() != d {
        return Err(Error::Dimension {
            context: "expected_network_loss theta_true",
            expected: d,
            actual: theta_true.len(),
        });
    }
    let diff: Vec<f64> = theta_hat
        .iter()
        .zip(theta_true)
        .map(|(a, b)| a - b)
        .collect();
    let mut loss = system.sum_w();
    for m in system.models() {
        let hd = m.h().matvec(&diff);
        loss += linalg::dot(&hd, &hd);
    }
    Ok(loss)
}

/// Seeded generators for observation matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingGenerator {
    /// Each row selects one coordinate uniformly at random.
    CoordinateSelector { rows_per_agent: usize },
    /// Dense iid N(0, scale^2) entries.
    DenseGaussian { rows_per_agent: usize, scale: f64 },
}

/// Generates one observation model per agent from a descriptor.
pub fn generate_models(
    generator: &SensingGenerator,
    n: usize,
    d: usize,
    noise: NoiseLaw,
    rng: &mut impl Rng,
) -> Result<Vec<ObservationModel>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "agent count and dimension must be >= 1".into(),
        ));
    }
    let mut models = Vec::with_capacity(n);
    for agent in 0..n {
        let h = match generator {
            SensingGenerator::CoordinateSelector { rows_per_agent } => {
                if *rows_per_agent == 0 {
                    return Err(Error::InvalidArgument("rows_per_agent must be >= 1".into()));
                }
                let mut h = Mat::zeros(*rows_per_agent, d);
                for r in 0..*rows_per_agent {
                    let k = rng.random_range(0..d);
                    h.set(r, k, 1.0);
                }
                h
            }
            SensingGenerator::DenseGaussian {
                rows_per_agent,
                scale,
            } => {
                if *rows_per_agent == 0 {
                    return Err(Error::InvalidArgument("rows_per_agent must be >= 1".into()));
                }
                let normal = Normal::new(0.0, *scale)
                    .map_err(|_| Error::InvalidArgument(format!("bad gaussian scale {scale}")))?;
                Mat::from_fn(*rows_per_agent, d, |_, _| normal.sample(rng))
            }
        };
        models.push(ObservationModel::new(agent, h, noise)?);
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn model(agent: usize, rows: &[Vec<f64>], sigma: f64) -> ObservationModel {
        ObservationModel::new(
            agent,
            Mat::from_rows(rows).unwrap(),
            NoiseLaw::gaussian(sigma),
        )
        .unwrap()
    }

    #[test]
    fn complementary_selectors_identifiable() {
        let sys = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.0]], 0.0),
            model(1, &[vec![0.0, 1.0]], 0.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(sys.h_bar().get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.h_bar().get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.lambda_min_h(), 0.5, epsilon = 1e-12);
        assert!(sys.is_identifiable());
    }

    #[test]
    fn unobserved_coordinate_rejected() {
        let err = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.0]], 0.0),
            model(1, &[vec![1.0, 0.0]], 0.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::NotIdentifiable { .. }));
        // unchecked assembly still yields diagnostics
        let sys = NetworkSensingSystem::assemble_unchecked(vec![
            model(0, &[vec![1.0, 0.0]], 0.0),
            model(1, &[vec![1.0, 0.0]], 0.0),
        ])
        .unwrap();
        assert!(!sys.is_identifiable());
        assert_abs_diff_eq!(sys.lambda_min_h(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_agent_identity() {
        let sys =
            NetworkSensingSystem::assemble(vec![model(0, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0)])
                .unwrap();
        assert_abs_diff_eq!(sys.lambda_min_h(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.0]], 0.0),
            model(1, &[vec![1.0]], 0.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn noiseless_observation_is_projection() {
        let m = model(0, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0);
        let mut r = rng::stream(1);
        let y = sample_observation(&m, &[3.0, -1.0], &mut r).unwrap();
        assert_eq!(y, vec![3.0, -1.0]);

        let m = model(0, &[vec![2.0, 0.0]], 0.0);
        let y = sample_observation(&m, &[1.0, 5.0], &mut r).unwrap();
        assert_eq!(y, vec![2.0]);
    }

    #[test]
    fn noise_second_moment_matches_w() {
        // W = m sigma^2 = 4 for m = 4, sigma = 1; Monte Carlo within +-0.1
        let rows = vec![vec![1.0]; 4];
        let m = model(0, &rows, 1.0);
        assert_eq!(m.w_second_moment(), 4.0);
        let mut r = rng::stream(123);
        let draws = 100_000;
        let mean_sq: f64 = (0..draws)
            .map(|_| {
                let w = m.sample_noise(&mut r);
                linalg::dot(&w, &w)
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean_sq - 4.0).abs() < 0.1, "mean ||w||^2 = {mean_sq}");
    }

    #[test]
    fn uniform_noise_second_moment() {
        let m = ObservationModel::new(
            0,
            Mat::identity(3),
            NoiseLaw {
                family: NoiseFamily::Uniform,
                sigma: 0.5,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(m.w_second_moment(), 0.75, epsilon = 1e-15);
        let mut r = rng::stream(9);
        let draws = 100_000;
        let mean_sq: f64 = (0..draws)
            .map(|_| {
                let w = m.sample_noise(&mut r);
                linalg::dot(&w, &w)
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean_sq - 0.75).abs() < 0.02, "mean ||w||^2 = {mean_sq}");
    }

    #[test]
    fn expected_loss_at_truth_is_noise_floor() {
        let sys = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.0]], 0.7),
            model(1, &[vec![0.0, 1.0]], 0.3),
        ])
        .unwrap();
        let theta = [2.0, -1.0];
        let loss = expected_network_loss(&sys, &theta, &theta).unwrap();
        assert_abs_diff_eq!(loss, 0.49 + 0.09, epsilon = 1e-15);
    }

    #[test]
    fn expected_loss_scalar_case() {
        let sys = NetworkSensingSystem::assemble(vec![model(0, &[vec![1.0]], 0.0)]).unwrap();
        let loss = expected_network_loss(&sys, &[0.5], &[0.0]).unwrap();
        assert_abs_diff_eq!(loss, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn expected_loss_two_agents_closed_form() {
        // H1 = [1 0], H2 = [0 2], W1 = W2 = 1, diff = (1,1): 1 + 4 + 2 = 7
        let m1 = model(0, &[vec![1.0, 0.0]], 1.0);
        let m2 = model(1, &[vec![0.0, 2.0]], 1.0);
        assert_eq!(m1.w_second_moment(), 1.0);
        let sys = NetworkSensingSystem::assemble(vec![m1, m2]).unwrap();
        let loss = expected_network_loss(&sys, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(loss, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn truth_minimizes_expected_loss() {
        let sys = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.5]], 0.2),
            model(1, &[vec![0.3, 1.0]], 0.4),
        ])
        .unwrap();
        let theta = [0.4, -0.9];
        let floor = expected_network_loss(&sys, &theta, &theta).unwrap();
        let mut r = rng::stream(5);
        for _ in 0..50 {
            let cand = [
                theta[0] + r.random_range(-2.0..2.0),
                theta[1] + r.random_range(-2.0..2.0),
            ];
            assert!(expected_network_loss(&sys, &cand, &theta).unwrap() >= floor - 1e-12);
        }
    }

    #[test]
    fn realized_loss_converges_to_expectation() {
        let sys = NetworkSensingSystem::assemble(vec![
            model(0, &[vec![1.0, 0.0]], 0.5),
            model(1, &[vec![0.0, 1.0]], 0.5),
        ])
        .unwrap();
        let theta = [1.0, 2.0];
        let theta_hat = [1.3, 1.8];
        let expected = expected_network_loss(&sys, &theta_hat, &theta).unwrap();
        let mut r = rng::stream(77);
        let reps = 2000;
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut realized = 0.0;
            for m in sys.models() {
                let y = sample_observation(m, &theta, &mut r).unwrap();
                let pred = m.h().matvec(&theta_hat);
                let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
                realized += linalg::dot(&resid, &resid);
            }
            samples.push(realized);
        }
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let stderr = (var / reps as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 5.0 * stderr,
            "mean {mean} vs expected {expected} (stderr {stderr})"
        );
    }

    #[test]
    fn generators_are_seeded_and_shaped() {
        let mut r1 = rng::stream(4);
        let mut r2 = rng::stream(4);
        let a = generate_models(
            &SensingGenerator::DenseGaussian {
                rows_per_agent: 2,
                scale: 1.0,
            },
            3,
            2,
            NoiseLaw::gaussian(0.1),
            &mut r1,
        )
        .unwrap();
        let b = generate_models(
            &SensingGenerator::DenseGaussian {
                rows_per_agent: 2,
                scale: 1.0,
            },
            3,
            2,
            NoiseLaw::gaussian(0.1),
            &mut r2,
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.h().data(), y.h().data());
            assert_eq!(x.obs_dim(), 2);
            assert_eq!(x.state_dim(), 2);
        }

        let sel = generate_models(
            &SensingGenerator::CoordinateSelector { rows_per_agent: 1 },
            4,
            3,
            NoiseLaw::gaussian(0.0),
            &mut r1,
        )
        .unwrap();
        for m in &sel {
            let row = m.h().row(0);
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 2);
        }
    }
}
