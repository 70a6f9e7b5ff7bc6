//! Run configuration files (TOML, one section per module).

use crate::ConfigError;
use qflock_core::classical::ClassicalParams;
use qflock_core::clustering::{DEFAULT_BINS, DEFAULT_CUTOFF};
use qflock_core::fock::Species;
use qflock_core::hydro::{Closure, ClosureParams};
use qflock_core::model::{default_radius, Kernel, ModelParams};
use qflock_core::trajectory::{uniform_times, InitialState, TrajectoryConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trajectory,
    OracleCompare,
    PhaseScan,
    Hydro,
    Classical,
    Kolmogorov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub hydro: HydroSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub kolmogorov: KolmogorovSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Number of trajectories `N_r` (or classical histories).
    pub trajectories: u64,
    /// Worker threads; defaults to the available parallelism.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            trajectories: 100,
            threads: None,
            output_dir: PathBuf::from("qflock-output"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    Exponential,
    Linear,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub sites: usize,
    /// Defaults to `L/2`.
    pub particles: Option<usize>,
    pub h: f64,
    pub alignment: f64,
    pub gamma_motion: f64,
    pub gamma_align: f64,
    /// Defaults to `min(4, L/2)`.
    pub radius: Option<usize>,
    pub kernel: KernelName,
    /// Target neighbourhood magnetization of the delta kernel.
    pub delta_m0: i32,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            sites: 8,
            particles: None,
            h: 0.2,
            alignment: 3.8,
            gamma_motion: 1.0,
            gamma_align: 1.0,
            radius: None,
            kernel: KernelName::Exponential,
            delta_m0: 2,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            sites: self.sites,
            particles: self.particles.unwrap_or(self.sites / 2),
            h: self.h,
            gamma_motion: self.gamma_motion,
            gamma_align: self.gamma_align,
            alignment: self.alignment,
            radius: self.radius.unwrap_or_else(|| default_radius(self.sites)),
            kernel: match self.kernel {
                KernelName::Exponential => Kernel::Exponential,
                KernelName::Linear => Kernel::Linear,
                KernelName::Delta => Kernel::Delta { m0: self.delta_m0 },
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialName {
    PlusProduct,
    PairProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub dt: f64,
    pub t_max: f64,
    /// Spacing of the uniform sample grid starting at 0.
    pub sample_step: f64,
    pub initial_state: InitialName,
    /// Defaults to every sample time in `[40, 70]` that is `<= t_max`.
    pub snapshot_times: Option<Vec<f64>>,
    pub coherence_times: Vec<f64>,
    pub density_times: Vec<f64>,
    /// Binder average window `[lo, hi]`.
    pub binder_window: [f64; 2],
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            dt: 0.01,
            t_max: 70.0,
            sample_step: 1.0,
            initial_state: InitialName::PlusProduct,
            snapshot_times: None,
            coherence_times: Vec::new(),
            density_times: Vec::new(),
            binder_window: [40.0, 70.0],
        }
    }
}

impl TrajectorySection {
    pub fn config(&self, seed: u64) -> TrajectoryConfig {
        let sample_times = uniform_times(self.t_max, self.sample_step);
        let snapshot_times = match &self.snapshot_times {
            Some(t) => t.clone(),
            None => sample_times
                .iter()
                .copied()
                .filter(|&t| (40.0 - 1e-9..=70.0 + 1e-9).contains(&t))
                .collect(),
        };
        TrajectoryConfig {
            dt: self.dt,
            t_max: self.t_max,
            seed,
            sample_times,
            initial_state: match self.initial_state {
                InitialName::PlusProduct => InitialState::PlusProduct,
                InitialName::PairProduct => InitialState::PairProduct,
            },
            snapshot_times,
            coherence_times: self.coherence_times.clone(),
            density_times: self.density_times.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeciesName {
    Up,
    Down,
}

impl From<SpeciesName> for Species {
    fn from(s: SpeciesName) -> Species {
        match s {
            SpeciesName::Up => Species::Up,
            SpeciesName::Down => Species::Down,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSection {
    pub cutoff: usize,
    pub bins: usize,
    pub species: SpeciesName,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        ClusteringSection {
            cutoff: DEFAULT_CUTOFF,
            bins: DEFAULT_BINS,
            species: SpeciesName::Down,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub dt: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            dt: qflock_core::oracle::DEFAULT_DT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub h_values: Vec<f64>,
    pub sites: Vec<usize>,
    pub alignment: Vec<f64>,
    pub epsilon: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            h_values: (1..=30).map(|k| k as f64 / 10.0).collect(),
            sites: vec![8, 10],
            alignment: vec![3.8],
            epsilon: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldInit {
    GaussianCluster,
    Homogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureName {
    Gaussian,
    Landau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroSection {
    pub sites: usize,
    pub t_max: f64,
    pub dt: f64,
    pub record_every: f64,
    pub initial: FieldInit,
    /// Width of the Gaussian cluster.
    pub width: f64,
    /// Homogeneous initial fields.
    pub rho: f64,
    pub m: f64,
    /// Uniform noise amplitude added to both fields.
    pub noise: f64,
    pub gamma_rho: f64,
    pub gamma_m: f64,
    pub sigma2: f64,
    pub q: f64,
    pub alignment: f64,
    pub h: f64,
    pub gamma_motion: f64,
    pub gamma_align: f64,
    pub closure: ClosureName,
}

impl Default for HydroSection {
    fn default() -> Self {
        let c = ClosureParams::default();
        HydroSection {
            sites: 20,
            t_max: 100.0,
            dt: qflock_core::hydro::DEFAULT_DT,
            record_every: 1.0,
            initial: FieldInit::GaussianCluster,
            width: 0.5,
            rho: 0.25,
            m: 0.25,
            noise: 0.0,
            gamma_rho: c.gamma_rho,
            gamma_m: c.gamma_m,
            sigma2: c.sigma2,
            q: c.q,
            alignment: c.alignment,
            h: c.h,
            gamma_motion: c.gamma_motion,
            gamma_align: c.gamma_align,
            closure: ClosureName::Gaussian,
        }
    }
}

impl HydroSection {
    pub fn closure(&self) -> ClosureParams {
        ClosureParams {
            gamma_rho: self.gamma_rho,
            gamma_m: self.gamma_m,
            sigma2: self.sigma2,
            q: self.q,
            alignment: self.alignment,
            h: self.h,
            gamma_motion: self.gamma_motion,
            gamma_align: self.gamma_align,
            closure: match self.closure {
                ClosureName::Gaussian => Closure::Gaussian,
                ClosureName::Landau => Closure::Landau,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub sites: usize,
    pub alignment: f64,
    /// Defaults to `min(4, L/2)`.
    pub radius: Option<usize>,
    pub gamma_motion: f64,
    pub gamma_align: f64,
    pub scale: f64,
    pub sweeps: usize,
    pub record_every: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            sites: 64,
            alignment: 3.5,
            radius: None,
            gamma_motion: 1.0,
            gamma_align: 1.0,
            scale: qflock_core::classical::DEFAULT_SCALE,
            sweeps: 2000,
            record_every: 10,
        }
    }
}

impl ClassicalSection {
    pub fn params(&self) -> ClassicalParams {
        ClassicalParams {
            sites: self.sites,
            alignment: self.alignment,
            radius: self.radius.unwrap_or_else(|| default_radius(self.sites)),
            gamma_motion: self.gamma_motion,
            gamma_align: self.gamma_align,
            scale: self.scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KolmogorovSection {
    pub gamma: f64,
    pub alignment: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for KolmogorovSection {
    fn default() -> Self {
        KolmogorovSection {
            gamma: 1.0,
            alignment: vec![1.0],
            epsilon: vec![0.0],
        }
    }
}

fn check(ok: bool, key: &str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.to_string(),
        })
    }
}

fn core_err(section: &str, e: qflock_core::Error) -> ConfigError {
    let key = match &e {
        qflock_core::Error::Parameter { name, .. } => format!("{section}.{name}"),
        _ => section.to_string(),
    };
    ConfigError::Invalid {
        key,
        reason: e.to_string(),
    }
}

impl RunConfig {
    pub fn defaults(mode: Mode) -> Self {
        RunConfig {
            mode,
            run: RunSection::default(),
            model: ModelSection::default(),
            trajectory: TrajectorySection::default(),
            clustering: ClusteringSection::default(),
            oracle: OracleSection::default(),
            scan: ScanSection::default(),
            hydro: HydroSection::default(),
            classical: ClassicalSection::default(),
            kolmogorov: KolmogorovSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical serialization, ignoring settings that
    /// cannot change numerical results (`run.threads`, `run.output_dir`).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.threads = None;
        c.run.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates every block the selected mode uses.
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(
            self.run.threads.is_none_or(|t| t >= 1),
            "run.threads",
            "must be at least 1",
        )?;
        match self.mode {
            Mode::Trajectory | Mode::OracleCompare => {
                check(self.run.trajectories >= 1, "run.trajectories", "must be at least 1")?;
                self.validate_model(&self.model.params())?;
                self.validate_trajectory()?;
                self.validate_clustering(self.model.sites)?;
            }
            Mode::PhaseScan => {
                check(self.run.trajectories >= 1, "run.trajectories", "must be at least 1")?;
                check(!self.scan.h_values.is_empty(), "scan.h_values", "must not be empty")?;
                check(!self.scan.sites.is_empty(), "scan.sites", "must not be empty")?;
                check(!self.scan.alignment.is_empty(), "scan.alignment", "must not be empty")?;
                check(
                    self.scan.h_values.windows(2).all(|w| w[0] < w[1]),
                    "scan.h_values",
                    "must be strictly increasing",
                )?;
                check(
                    self.scan.epsilon.is_finite() && self.scan.epsilon >= 0.0,
                    "scan.epsilon",
                    "must be finite and >= 0",
                )?;
                for &l in &self.scan.sites {
                    for &k in &self.scan.alignment {
                        for &h in &self.scan.h_values {
                            let mut m = self.model.clone();
                            m.sites = l;
                            m.alignment = k;
                            m.h = h;
                            m.particles = None;
                            m.radius = self.model.radius;
                            self.validate_model(&m.params())?;
                        }
                    }
                }
                self.validate_trajectory()?;
                let [lo, hi] = self.trajectory.binder_window;
                check(
                    lo <= hi && hi <= self.trajectory.t_max + 1e-9,
                    "trajectory.binder_window",
                    "needs lo <= hi <= t_max",
                )?;
            }
            Mode::Hydro => {
                let h = &self.hydro;
                self.hydro.closure().validate().map_err(|e| core_err("hydro", e))?;
                check(h.sites >= 3, "hydro.sites", "must be at least 3")?;
                check(h.dt > 0.0 && h.dt.is_finite(), "hydro.dt", "must be > 0")?;
                check(h.t_max >= 0.0 && h.t_max.is_finite(), "hydro.t_max", "must be >= 0")?;
                check(h.record_every > 0.0, "hydro.record_every", "must be > 0")?;
                check(h.width > 0.0, "hydro.width", "must be > 0")?;
                check(h.noise >= 0.0 && h.noise.is_finite(), "hydro.noise", "must be >= 0")?;
            }
            Mode::Classical => {
                check(self.run.trajectories >= 1, "run.trajectories", "must be at least 1")?;
                check(
                    self.classical.sites >= 4 && self.classical.sites % 4 == 0,
                    "classical.sites",
                    "must be a positive multiple of 4",
                )?;
                check(self.classical.record_every >= 1, "classical.record_every", "must be >= 1")?;
                self.classical.params().validate().map_err(|e| core_err("classical", e))?;
            }
            Mode::Kolmogorov => {
                let k = &self.kolmogorov;
                check(k.gamma > 0.0 && k.gamma.is_finite(), "kolmogorov.gamma", "must be > 0")?;
                check(!k.alignment.is_empty(), "kolmogorov.alignment", "must not be empty")?;
                check(!k.epsilon.is_empty(), "kolmogorov.epsilon", "must not be empty")?;
                check(
                    k.alignment.iter().all(|x| x.is_finite()),
                    "kolmogorov.alignment",
                    "must be finite",
                )?;
                check(
                    k.epsilon.iter().all(|e| (-1.0..=1.0).contains(e)),
                    "kolmogorov.epsilon",
                    "must lie in [-1, 1]",
                )?;
            }
        }
        Ok(())
    }

    fn validate_model(&self, p: &ModelParams) -> Result<(), ConfigError> {
        p.validate().map_err(|e| core_err("model", e))
    }

    fn validate_trajectory(&self) -> Result<(), ConfigError> {
        let t = &self.trajectory;
        check(
            t.coherence_times.is_empty() || self.mode == Mode::PhaseScan || self.model.sites % 2 == 0,
            "trajectory.coherence_times",
            "two-site coherence needs an even model.sites",
        )?;
        check(t.sample_step > 0.0 && t.sample_step.is_finite(), "trajectory.sample_step", "must be > 0")?;
        self.trajectory
            .config(self.run.seed)
            .validate()
            .map_err(|e| core_err("trajectory", e))
    }

    fn validate_clustering(&self, sites: usize) -> Result<(), ConfigError> {
        let c = &self.clustering;
        check(c.bins >= 1, "clustering.bins", "must be at least 1")?;
        check(
            c.cutoff >= 1 && c.cutoff <= sites / 2,
            "clustering.cutoff",
            "must satisfy 1 <= d_c <= L/2",
        )
    }
}
