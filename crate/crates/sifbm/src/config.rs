//! Experiment configuration: one JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sifbm_core::intrep::{KernelGridSpec, RepConfig};
use sifbm_core::measure::{Battery, Thresholds};
use sifbm_core::{HurstParam, Rect};

use crate::battery::standard_battery;
use crate::error::{CliError, CliResult};

/// Environment variable that replaces `output`.
pub const OUT_ENV: &str = "SIFBM_OUT";

/// Rectangles to sample besides the ones the battery needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexSpec {
    /// Cartesian product of per-axis corner values.
    Lattice(Vec<Vec<f64>>),
    /// Explicit corners.
    Explicit(Vec<Vec<f64>>),
}

impl Default for IndexSpec {
    fn default() -> Self {
        IndexSpec::Explicit(Vec::new())
    }
}

impl IndexSpec {
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match self {
            IndexSpec::Explicit(c) => c.clone(),
            IndexSpec::Lattice(axes) => {
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for axis in axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&x| {
                                let mut p = prefix.clone();
                                p.push(x);
                                p
                            })
                        })
                        .collect();
                }
                if axes.is_empty() {
                    Vec::new()
                } else {
                    out
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardSpec {
    /// Corner every flow ends at; defaults to the largest configured corner.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    24
}

impl Default for StandardSpec {
    fn default() -> Self {
        Self { target: None, points: default_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BatterySpec {
    Standard(StandardSpec),
    Custom(Battery),
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec::Standard(StandardSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrepSpec {
    #[serde(default)]
    pub grid: KernelGridSpec,
    /// Nondecreasing flow masses `θ_f(t)`.
    #[serde(default = "default_masses")]
    pub masses: Vec<f64>,
    /// Defaults to the top-level sample count.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Relative tolerance on `Var = θ^{2H}`.
    #[serde(default = "default_variance_tol")]
    pub variance_tol: f64,
    /// Covariance entries must lie within this many CLT standard errors.
    #[serde(default = "default_covariance_sigma")]
    pub covariance_sigma: f64,
}

fn default_masses() -> Vec<f64> {
    vec![0.25, 1.0, 4.0]
}

fn default_variance_tol() -> f64 {
    0.03
}

fn default_covariance_sigma() -> f64 {
    3.0
}

impl Default for IntrepSpec {
    fn default() -> Self {
        Self {
            grid: KernelGridSpec::default(),
            masses: default_masses(),
            samples: None,
            variance_tol: default_variance_tol(),
            covariance_sigma: default_covariance_sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub hurst: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub indices: IndexSpec,
    #[serde(default)]
    pub battery: BatterySpec,
    #[serde(default)]
    pub intrep: IntrepSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Hurst value `characterize` tests against; defaults to `hurst`.
    #[serde(default)]
    pub characterize_hurst: Option<f64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("sifbm-out")
}

/// A config that passed validation, with everything the commands need
/// already built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hurst: HurstParam,
    pub test_hurst: HurstParam,
    pub battery: Battery,
    /// Configured indices followed by whatever else the battery reads.
    pub indices: Vec<Rect>,
    pub rep: RepConfig,
    pub output: PathBuf,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path.is_empty() || path == "." { "config" } else { &path }, e.into_inner())
        })
    }

    /// Serialization with sorted keys, the input to the manifest hash.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        value.to_string()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every field through the core constructors.
    pub fn validate(self) -> CliResult<Experiment> {
        let dim = self.dimension;
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        let hurst = HurstParam::new(self.hurst).map_err(|e| invalid("hurst", e))?;
        let test_hurst = match self.characterize_hurst {
            Some(h) => HurstParam::new(h).map_err(|e| invalid("characterize_hurst", e))?,
            None => hurst,
        };
        if self.samples == 0 {
            return Err(invalid("samples", "must be positive"));
        }
        let mut indices = Vec::new();
        for (i, c) in self.indices.corners().into_iter().enumerate() {
            if c.len() != dim {
                return Err(invalid(&format!("indices[{i}]"), format!("expected {dim} coordinates, got {}", c.len())));
            }
            indices.push(Rect::new(c).map_err(|e| invalid(&format!("indices[{i}]"), e))?);
        }
        let battery = match &self.battery {
            BatterySpec::Standard(s) => {
                let target = match &s.target {
                    Some(t) => t.clone(),
                    None => largest_corner(&indices, dim),
                };
                if target.len() != dim {
                    return Err(invalid("battery.standard.target", format!("expected {dim} coordinates")));
                }
                let target = Rect::new(target).map_err(|e| invalid("battery.standard.target", e))?;
                let mut b = standard_battery(&target, s.points).map_err(|e| invalid("battery.standard", e))?;
                b.measure_indices = indices.iter().filter(|r| r.measure() > 0.0).cloned().collect();
                b
            }
            BatterySpec::Custom(b) => b.clone(),
        };
        let needed = battery.required_indices().map_err(|e| invalid("battery", e))?;
        if let Some(r) = needed.iter().chain(&indices).find(|r| r.dim().is_some_and(|d| d != dim)) {
            return Err(invalid("battery", format!("index {r:?} is not {dim}-dimensional")));
        }
        for r in needed {
            if !indices.iter().any(|x| x.key() == r.key()) {
                indices.push(r);
            }
        }
        if indices.is_empty() {
            return Err(invalid("indices", "no indices to sample"));
        }
        if self.intrep.masses.is_empty() {
            return Err(invalid("intrep.masses", "empty"));
        }
        if self.intrep.masses.iter().any(|m| !m.is_finite() || *m < 0.0)
            || self.intrep.masses.windows(2).any(|w| w[1] < w[0])
        {
            return Err(invalid("intrep.masses", "must be finite, non-negative and nondecreasing"));
        }
        let rep = RepConfig::new(hurst, self.intrep.grid.clone(), self.seed).map_err(|e| invalid("intrep.grid", e))?;
        let output = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| self.output.clone());
        Ok(Experiment { config: self, hurst, test_hurst, battery, indices, rep, output })
    }
}

fn largest_corner(indices: &[Rect], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; dim];
    for c in indices.iter().filter_map(Rect::corner) {
        for (o, &x) in out.iter_mut().zip(c) {
            *o = o.max(x);
        }
    }
    if out.iter().any(|&x| x <= 0.0) {
        vec![1.0; dim]
    } else {
        out
    }
}
