//! TOML run configuration: which task to run, the model, and the
//! task-specific sections. Unknown keys are rejected everywhere so typos
//! fail loudly instead of silently running defaults.

use anyhow::{bail, Context, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use meanforce::langevin::SimConfig;
use meanforce::model::{rotation_axis_angle, LorentzBand, SusceptibilityModel};
use meanforce::quad::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Static stability, passivity and Kramers–Kronig diagnostics.
    Validate,
    /// Thermodynamic functions over a temperature set.
    ThermoSweep,
    /// Position/momentum correlation tensors over a lag grid.
    Correlators,
    /// Continuum results against the finite discrete-bath reference.
    OracleCompare,
    /// Classical stochastic ensemble.
    Langevin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum RotationSpec {
    AxisAngle { axis: [f64; 3], angle: f64 },
    Matrix { matrix: [[f64; 3]; 3] },
}

impl RotationSpec {
    pub fn matrix(&self) -> Matrix3<f64> {
        match self {
            RotationSpec::AxisAngle { axis, angle } => {
                rotation_axis_angle(Vector3::new(axis[0], axis[1], axis[2]), *angle)
            }
            RotationSpec::Matrix { matrix } => Matrix3::from_fn(|i, j| matrix[i][j]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub strengths: [f64; 3],
    pub resonances: [f64; 3],
    pub dampings: [f64; 3],
    /// Omitted means axis-aligned.
    pub rotation: Option<RotationSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub omega0: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub k_b: f64,
    pub bands: Vec<BandSpec>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<SusceptibilityModel> {
        let bands = self
            .bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let rot = b
                    .rotation
                    .as_ref()
                    .map(|r| r.matrix())
                    .unwrap_or_else(Matrix3::identity);
                LorentzBand::new(rot, b.strengths, b.resonances, b.dampings)
                    .with_context(|| format!("band {i}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SusceptibilityModel::with_units(
            self.omega0,
            bands,
            self.hbar,
            self.k_b,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSpec {
    pub values: Option<Vec<f64>>,
    pub grid: Option<GridSpec>,
}

impl TemperatureSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        match (&self.values, &self.grid) {
            (Some(v), None) => {
                if v.is_empty() {
                    bail!("[temperatures] values is empty");
                }
                Ok(v.clone())
            }
            (None, Some(g)) => {
                if g.count < 2 {
                    bail!("[temperatures] grid count must be ≥ 2");
                }
                if g.spacing == Spacing::Log && (g.start <= 0.0 || g.stop <= 0.0) {
                    bail!("[temperatures] log grid needs positive endpoints");
                }
                let n = g.count;
                Ok((0..n)
                    .map(|i| {
                        let f = i as f64 / (n - 1) as f64;
                        match g.spacing {
                            Spacing::Linear => g.start + f * (g.stop - g.start),
                            Spacing::Log => g.start * (g.stop / g.start).powf(f),
                        }
                    })
                    .collect())
            }
            _ => bail!("[temperatures] needs exactly one of `values` or `grid`"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSpec {
    pub temperature: f64,
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub n_modes: usize,
    /// Absolute bath grid cutoff; default 30 × the model frequency scale.
    pub omega_max: Option<f64>,
    /// If set, any relative deviation above this is a task failure.
    pub fail_above: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    /// Passivity probe frequencies; default 24 points up to 3 × scale.
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub task: Task,
    pub model: ModelSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    pub temperatures: Option<TemperatureSpec>,
    pub correlators: Option<CorrelatorSpec>,
    pub oracle: Option<OracleSpec>,
    pub sim: Option<SimConfig>,
    pub validate: Option<ValidateSpec>,
    pub output: Option<OutputSpec>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    /// Every task must find its own sections; missing ones are config errors,
    /// not runtime surprises.
    fn check_sections(&self) -> Result<()> {
        match self.task {
            Task::Validate => {}
            Task::ThermoSweep => {
                if self.temperatures.is_none() {
                    bail!("task thermo-sweep requires a [temperatures] section");
                }
            }
            Task::Correlators => {
                if self.correlators.is_none() {
                    bail!("task correlators requires a [correlators] section");
                }
            }
            Task::OracleCompare => {
                if self.temperatures.is_none() || self.oracle.is_none() {
                    bail!("task oracle-compare requires [temperatures] and [oracle] sections");
                }
            }
            Task::Langevin => {
                if self.sim.is_none() {
                    bail!("task langevin requires a [sim] section");
                }
            }
        }
        Ok(())
    }
}
