//! Experiment configuration: a TOML document with strict schema checking.
//!
//! Unknown keys are rejected with the offending key named; the seed is
//! mandatory (there is no wall-clock default anywhere). The config hash is
//! SHA-256 over the canonical JSON of the parsed, normalized document, so
//! semantically identical documents (key order permuted, defaults spelled
//! out) hash identically.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use citrack_core::analysis::TuningPolicy;
use citrack_core::engine::InitialEstimates;
use citrack_core::linalg::Mat;
use citrack_core::sensing::{NoiseFamily, NoiseLaw, SensingGenerator};
use citrack_core::topology::{TopologyKind, WeightScheme};
use citrack_core::trajectory::TrajectorySpec;

// ---------------------------------------------------------------------------
// document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub dimensions: DimensionsDoc,
    pub topology: TopologyDoc,
    pub sensing: SensingDoc,
    pub trajectory: TrajectoryDoc,
    pub algorithm: AlgorithmDoc,
    pub run: RunDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionsDoc {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKindDoc {
    Complete,
    Ring,
    Star,
    Path,
    ErdosRenyi,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeDoc {
    Metropolis,
    LazyMaxDegree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<TopologyKindDoc>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    /// Externally supplied P, dense row-major list of rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

fn default_scheme() -> SchemeDoc {
    SchemeDoc::Metropolis
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingKindDoc {
    Explicit,
    CoordinateSelector,
    DenseGaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSensingDoc {
    /// m_i x d observation matrix as a row list.
    pub h: Vec<Vec<f64>>,
    /// Per-agent noise std override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDoc {
    pub family: NoiseFamily,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingDoc {
    pub kind: SensingKindDoc,
    #[serde(default = "default_one")]
    pub rows_per_agent: usize,
    #[serde(default = "default_unit")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<AgentSensingDoc>>,
    pub noise: NoiseDoc,
}

fn default_one() -> usize {
    1
}

fn default_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKindDoc {
    Static,
    LinearDrift,
    Sinusoid,
    RandomWalk,
    DecayingWalk,
    PiecewiseConstant,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryDoc {
    pub kind: TrajectoryKindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_times: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyDoc {
    Static,
    Noiseless,
    General,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKindDoc {
    Zero,
    Explicit,
    Gaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitDoc {
    pub kind: InitKindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

fn default_init() -> InitDoc {
    InitDoc {
        kind: InitKindDoc::Zero,
        estimates: None,
        std: None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub retain_noise: bool,
    #[serde(default)]
    pub allow_unstable: bool,
    #[serde(default = "default_true")]
    pub emit_traces: bool,
    #[serde(default)]
    pub exclude_diverged: bool,
    #[serde(default = "default_init")]
    pub init: InitDoc,
}

fn default_true() -> bool {
    true
}

// ---------------------------------------------------------------------------
// resolved configuration

#[derive(Debug, Clone)]
pub enum TopologySetup {
    Kind(TopologyKind, WeightScheme),
    Matrix(Mat),
}

#[derive(Debug, Clone)]
pub enum SensingSetup {
    /// One (H, sigma) per agent.
    Explicit(Vec<(Mat, f64)>),
    Generator(SensingGenerator),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSetting {
    Value(f64),
    Policy(TuningPolicy),
}

/// Validated configuration: the normalized document, its hash, and the core
/// types it resolves to.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    doc: ConfigDoc,
    hash: String,
    pub n: usize,
    pub d: usize,
    pub horizon: usize,
    pub replicas: usize,
    pub seed: u64,
    pub retain_noise: bool,
    pub allow_unstable: bool,
    pub emit_traces: bool,
    pub exclude_diverged: bool,
    pub topology: TopologySetup,
    pub sensing: SensingSetup,
    pub noise: NoiseLaw,
    pub trajectory: TrajectorySpec,
    pub alpha: AlphaSetting,
    pub init: InitialEstimates,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: ConfigDoc = toml::from_str(text).context("config parse error")?;
        Self::from_doc(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    /// CLI overrides feed back into the document so the hash reflects the
    /// effective configuration.
    pub fn with_overrides(&self, replicas: Option<usize>, seed: Option<u64>) -> Result<Self> {
        let mut doc = self.doc.clone();
        if let Some(r) = replicas {
            doc.run.replicas = r;
        }
        if let Some(s) = seed {
            doc.run.seed = s;
        }
        Self::from_doc(doc)
    }

    pub fn doc(&self) -> &ConfigDoc {
        &self.doc
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn from_doc(doc: ConfigDoc) -> Result<Self> {
        let n = doc.dimensions.n;
        let d = doc.dimensions.d;
        let horizon = doc.dimensions.t;
        if n == 0 {
            bail!("dimensions.n must be >= 1");
        }
        if d == 0 {
            bail!("dimensions.d must be >= 1");
        }
        if horizon == 0 {
            bail!("dimensions.T must be >= 1");
        }
        if doc.run.replicas == 0 {
            bail!("run.replicas must be >= 1");
        }

        let topology = resolve_topology(&doc.topology, n)?;
        let (sensing, noise) = resolve_sensing(&doc.sensing, n, d)?;
        let trajectory = resolve_trajectory(&doc.trajectory, d)?;
        let alpha = resolve_algorithm(&doc.algorithm)?;
        let init = resolve_init(&doc.run.init, n, d)?;

        let hash = hash_doc(&doc)?;
        Ok(Self {
            n,
            d,
            horizon,
            replicas: doc.run.replicas,
            seed: doc.run.seed,
            retain_noise: doc.run.retain_noise,
            allow_unstable: doc.run.allow_unstable,
            emit_traces: doc.run.emit_traces,
            exclude_diverged: doc.run.exclude_diverged,
            topology,
            sensing,
            noise,
            trajectory,
            alpha,
            init,
            doc,
            hash,
        })
    }
}

fn hash_doc(doc: &ConfigDoc) -> Result<String> {
    let canonical = serde_json::to_vec(doc).context("config canonicalization")?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn resolve_topology(doc: &TopologyDoc, n: usize) -> Result<TopologySetup> {
    match (&doc.kind, &doc.matrix) {
        (Some(_), Some(_)) => bail!("topology: give either `kind` or `matrix`, not both"),
        (None, None) => bail!("topology: one of `kind` or `matrix` is required"),
        (None, Some(rows)) => {
            if doc.p.is_some() || doc.edges.is_some() {
                bail!("topology: `p`/`edges` are meaningless with an explicit `matrix`");
            }
            if rows.len() != n {
                bail!("topology.matrix: expected {n} rows, got {}", rows.len());
            }
            for (i, r) in rows.iter().enumerate() {
                if r.len() != n {
                    bail!(
                        "topology.matrix: row {i} has {} entries, expected {n}",
                        r.len()
                    );
                }
            }
            let m = Mat::from_rows(rows)?;
            Ok(TopologySetup::Matrix(m))
        }
        (Some(kind), None) => {
            let scheme = match doc.scheme {
                SchemeDoc::Metropolis => WeightScheme::Metropolis,
                SchemeDoc::LazyMaxDegree => WeightScheme::LazyMaxDegree,
            };
            let kind = match kind {
                TopologyKindDoc::Complete => {
                    forbid(doc.p.is_some(), "topology.p", "complete")?;
                    forbid(doc.edges.is_some(), "topology.edges", "complete")?;
                    TopologyKind::Complete
                }
                TopologyKindDoc::Ring => {
                    forbid(doc.p.is_some(), "topology.p", "ring")?;
                    forbid(doc.edges.is_some(), "topology.edges", "ring")?;
                    TopologyKind::Ring
                }
                TopologyKindDoc::Star => {
                    forbid(doc.p.is_some(), "topology.p", "star")?;
                    forbid(doc.edges.is_some(), "topology.edges", "star")?;
                    TopologyKind::Star
                }
                TopologyKindDoc::Path => {
                    forbid(doc.p.is_some(), "topology.p", "path")?;
                    forbid(doc.edges.is_some(), "topology.edges", "path")?;
                    TopologyKind::Path
                }
                TopologyKindDoc::ErdosRenyi => {
                    forbid(doc.edges.is_some(), "topology.edges", "erdos_renyi")?;
                    let p = doc
                        .p
                        .ok_or_else(|| anyhow::anyhow!("topology.p required for erdos_renyi"))?;
                    TopologyKind::ErdosRenyi { p }
                }
                TopologyKindDoc::Explicit => {
                    forbid(doc.p.is_some(), "topology.p", "explicit")?;
                    let edges = doc
                        .edges
                        .as_ref()
                        .ok_or_else(|| anyhow::anyhow!("topology.edges required for explicit"))?;
                    TopologyKind::Explicit {
                        edges: edges.iter().map(|e| (e[0], e[1])).collect(),
                    }
                }
            };
            Ok(TopologySetup::Kind(kind, scheme))
        }
    }
}

fn resolve_sensing(doc: &SensingDoc, n: usize, d: usize) -> Result<(SensingSetup, NoiseLaw)> {
    if doc.noise.sigma < 0.0 {
        bail!("sensing.noise.sigma must be >= 0");
    }
    let noise = NoiseLaw {
        family: doc.noise.family,
        sigma: doc.noise.sigma,
    };
    let setup = match doc.kind {
        SensingKindDoc::Explicit => {
            let agents = doc
                .agents
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("sensing.agents required for explicit sensing"))?;
            if agents.len() != n {
                bail!("sensing.agents: expected {n} entries, got {}", agents.len());
            }
            let mut per_agent = Vec::with_capacity(n);
            for (i, a) in agents.iter().enumerate() {
                if a.h.is_empty() {
                    bail!("sensing.agents[{i}].h must have at least one row");
                }
                for row in &a.h {
                    if row.len() != d {
                        bail!(
                            "sensing.agents[{i}].h: row has {} entries, expected d = {d}",
                            row.len()
                        );
                    }
                }
                let sigma = a.sigma.unwrap_or(doc.noise.sigma);
                if sigma < 0.0 {
                    bail!("sensing.agents[{i}].sigma must be >= 0");
                }
                per_agent.push((Mat::from_rows(&a.h)?, sigma));
            }
            SensingSetup::Explicit(per_agent)
        }
        SensingKindDoc::CoordinateSelector => {
            forbid(
                doc.agents.is_some(),
                "sensing.agents",
                "coordinate_selector",
            )?;
            SensingSetup::Generator(SensingGenerator::CoordinateSelector {
                rows_per_agent: doc.rows_per_agent,
            })
        }
        SensingKindDoc::DenseGaussian => {
            forbid(doc.agents.is_some(), "sensing.agents", "dense_gaussian")?;
            SensingSetup::Generator(SensingGenerator::DenseGaussian {
                rows_per_agent: doc.rows_per_agent,
                scale: doc.scale,
            })
        }
    };
    Ok((setup, noise))
}

fn resolve_trajectory(doc: &TrajectoryDoc, d: usize) -> Result<TrajectorySpec> {
    use TrajectoryKindDoc::*;
    let dim = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
        let v = v
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("trajectory.{name} required for this kind"))?;
        if v.len() != d {
            bail!("trajectory.{name}: expected {d} entries, got {}", v.len());
        }
        Ok(v.clone())
    };
    let spec = match doc.kind {
        Static => {
            forbid_traj(doc, &["theta"])?;
            TrajectorySpec::Static {
                theta: dim(&doc.theta, "theta")?,
            }
        }
        LinearDrift => {
            forbid_traj(doc, &["start", "velocity"])?;
            TrajectorySpec::LinearDrift {
                start: dim(&doc.start, "start")?,
                velocity: dim(&doc.velocity, "velocity")?,
            }
        }
        Sinusoid => {
            forbid_traj(doc, &["center", "amplitude", "period"])?;
            TrajectorySpec::Sinusoid {
                center: dim(&doc.center, "center")?,
                amplitude: dim(&doc.amplitude, "amplitude")?,
                period: doc
                    .period
                    .ok_or_else(|| anyhow::anyhow!("trajectory.period required for sinusoid"))?,
            }
        }
        RandomWalk => {
            forbid_traj(doc, &["start", "step_std"])?;
            TrajectorySpec::RandomWalk {
                start: dim(&doc.start, "start")?,
                step_std: doc.step_std.ok_or_else(|| {
                    anyhow::anyhow!("trajectory.step_std required for random_walk")
                })?,
            }
        }
        DecayingWalk => {
            forbid_traj(doc, &["start", "step_std", "decay"])?;
            TrajectorySpec::DecayingWalk {
                start: dim(&doc.start, "start")?,
                step_std: doc.step_std.ok_or_else(|| {
                    anyhow::anyhow!("trajectory.step_std required for decaying_walk")
                })?,
                decay: doc.decay.ok_or_else(|| {
                    anyhow::anyhow!("trajectory.decay required for decaying_walk")
                })?,
            }
        }
        PiecewiseConstant => {
            forbid_traj(doc, &["values", "switch_times"])?;
            let values = doc
                .values
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("trajectory.values required"))?;
            for (i, v) in values.iter().enumerate() {
                if v.len() != d {
                    bail!(
                        "trajectory.values[{i}]: expected {d} entries, got {}",
                        v.len()
                    );
                }
            }
            TrajectorySpec::PiecewiseConstant {
                values: values.clone(),
                switch_times: doc
                    .switch_times
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("trajectory.switch_times required"))?,
            }
        }
        File => {
            forbid_traj(doc, &["path"])?;
            TrajectorySpec::File {
                path: doc
                    .path
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("trajectory.path required for file"))?,
            }
        }
    };
    Ok(spec)
}

/// Rejects trajectory fields that do not belong to the chosen kind, naming
/// the offending key.
fn forbid_traj(doc: &TrajectoryDoc, allowed: &[&str]) -> Result<()> {
    let fields: [(&str, bool); 11] = [
        ("theta", doc.theta.is_some()),
        ("start", doc.start.is_some()),
        ("velocity", doc.velocity.is_some()),
        ("center", doc.center.is_some()),
        ("amplitude", doc.amplitude.is_some()),
        ("period", doc.period.is_some()),
        ("step_std", doc.step_std.is_some()),
        ("decay", doc.decay.is_some()),
        ("values", doc.values.is_some()),
        ("switch_times", doc.switch_times.is_some()),
        ("path", doc.path.is_some()),
    ];
    for (name, present) in fields {
        if present && !allowed.contains(&name) {
            bail!("trajectory.{name} does not apply to kind {:?}", doc.kind);
        }
    }
    Ok(())
}

fn forbid(present: bool, key: &str, kind: &str) -> Result<()> {
    if present {
        bail!("{key} does not apply to kind {kind}");
    }
    Ok(())
}

fn resolve_algorithm(doc: &AlgorithmDoc) -> Result<AlphaSetting> {
    match (doc.alpha, doc.policy) {
        (Some(_), Some(_)) => bail!("algorithm: give either `alpha` or `policy`, not both"),
        (None, None) => bail!("algorithm: one of `alpha` or `policy` is required"),
        (Some(a), None) => {
            if !a.is_finite() || a < 0.0 {
                bail!("algorithm.alpha must be finite and >= 0");
            }
            Ok(AlphaSetting::Value(a))
        }
        (None, Some(p)) => Ok(AlphaSetting::Policy(match p {
            PolicyDoc::Static => TuningPolicy::Static,
            PolicyDoc::Noiseless => TuningPolicy::Noiseless,
            PolicyDoc::General => TuningPolicy::General,
        })),
    }
}

fn resolve_init(doc: &InitDoc, n: usize, d: usize) -> Result<InitialEstimates> {
    match doc.kind {
        InitKindDoc::Zero => {
            if doc.estimates.is_some() || doc.std.is_some() {
                bail!("run.init: `estimates`/`std` do not apply to kind zero");
            }
            Ok(InitialEstimates::Zero)
        }
        InitKindDoc::Explicit => {
            if doc.std.is_some() {
                bail!("run.init.std does not apply to kind explicit");
            }
            let est = doc
                .estimates
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("run.init.estimates required for explicit"))?;
            if est.len() != n {
                bail!(
                    "run.init.estimates: expected {n} vectors, got {}",
                    est.len()
                );
            }
            for (i, v) in est.iter().enumerate() {
                if v.len() != d {
                    bail!(
                        "run.init.estimates[{i}]: expected {d} entries, got {}",
                        v.len()
                    );
                }
            }
            Ok(InitialEstimates::Explicit(est.clone()))
        }
        InitKindDoc::Gaussian => {
            if doc.estimates.is_some() {
                bail!("run.init.estimates does not apply to kind gaussian");
            }
            let std = doc
                .std
                .ok_or_else(|| anyhow::anyhow!("run.init.std required for gaussian"))?;
            if std < 0.0 {
                bail!("run.init.std must be >= 0");
            }
            Ok(InitialEstimates::Gaussian { std })
        }
    }
}
