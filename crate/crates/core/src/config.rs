//! Run configuration, TOML schema `glvortex/v1`.
//!
//! ```toml
//! schema = "glvortex/v1"
//!
//! [grid]
//! geometry = "torus"      # or "dirichlet"
//! n = 128
//! side = 1.0
//!
//! [model]
//! eps = 0.1
//!
//! [time]
//! horizon = 0.02
//! dt = "auto"             # or a number dividing the horizon
//! scheme = "stratonovich-heun"
//! c_stab = 0.5
//! snapshots = 10          # count of equally spaced times, or a list
//!
//! [forcing]
//! family = "bump-rotational"
//! center = [0.5, 0.5]
//! radius = 0.3
//! amplitude = 0.5
//!
//! [[vortices]]
//! x = 0.25
//! y = 0.5
//! degree = 1
//!
//! [seeds]
//! count = 8               # or list = [1, 2, 3]
//! base = 0
//! ```
//!
//! Further optional tables: `[ledger]`, `[detect]`, `[point_vortex]`,
//! `[report]`, `[output]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forcing::{make_forcing, ForcingFamily, ForcingField};
use crate::gl::{GLParams, Vortex, VortexSpec};
use crate::grid::{Geometry, Grid};
use crate::stepper::{auto_dt, dt_max, SchemeKind, StepScheme};

pub const SCHEMA: &str = "glvortex/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub time: TimeConfig,
    #[serde(default = "zero_forcing")]
    pub forcing: ForcingFamily,
    #[serde(default)]
    pub vortices: Vec<Vortex>,
    #[serde(default)]
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub ledger: LedgerConfig,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default)]
    pub point_vortex: PointVortexConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn zero_forcing() -> ForcingFamily {
    ForcingFamily::Zero
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub geometry: Geometry,
    pub n: usize,
    #[serde(default = "one")]
    pub side: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSetting {
    Fixed(f64),
    Auto(AutoDt),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoDt {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnapshotSetting {
    Count(usize),
    Times(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    #[serde(default = "auto_dt_setting")]
    pub dt: DtSetting,
    #[serde(default = "heun")]
    pub scheme: SchemeKind,
    #[serde(default = "half")]
    pub c_stab: f64,
    #[serde(default = "ten")]
    pub snapshots: SnapshotSetting,
}

fn auto_dt_setting() -> DtSetting {
    DtSetting::Auto(AutoDt::Auto)
}

fn heun() -> SchemeKind {
    SchemeKind::StratonovichHeun
}

fn half() -> f64 {
    0.5
}

fn ten() -> SnapshotSetting {
    SnapshotSetting::Count(10)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    #[serde(default)]
    pub list: Option<Vec<u64>>,
    #[serde(default = "one_usize")]
    pub count: usize,
    #[serde(default)]
    pub base: u64,
}

fn one_usize() -> usize {
    1
}

impl Default for SeedsConfig {
    fn default() -> Self {
        Self {
            list: None,
            count: 1,
            base: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    /// Steps per ledger record.
    #[serde(default = "one_usize")]
    pub interval: usize,
    /// Bridge refinements for the residual convergence table.
    #[serde(default)]
    pub refinements: usize,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            interval: 1,
            refinements: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectConfig {
    /// Multiple of `ε`.
    #[serde(default = "three")]
    pub r_merge: f64,
    /// Multiple of `ε`.
    #[serde(default = "five")]
    pub rho_ann: f64,
    /// Steps between tracking frames.
    #[serde(default = "hundred")]
    pub track_every: usize,
}

fn three() -> f64 {
    3.0
}

fn five() -> f64 {
    5.0
}

fn hundred() -> usize {
    100
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            r_merge: 3.0,
            rho_ann: 5.0,
            track_every: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointVortexConfig {
    #[serde(default = "sixteen")]
    pub kmax: usize,
}

fn sixteen() -> usize {
    16
}

impl Default for PointVortexConfig {
    fn default() -> Self {
        Self { kmax: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Tail thresholds as multiples of the mean rescaled energy.
    #[serde(default = "lambda_grid")]
    pub lambdas: Vec<f64>,
    /// `(ε, n)` pairs for the structure report; empty means the run's own.
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Hölder exponent of the dual norm.
    #[serde(default = "one")]
    pub alpha: f64,
}

fn lambda_grid() -> Vec<f64> {
    vec![0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 5.0]
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            lambdas: lambda_grid(),
            eps_list: Vec::new(),
            n_list: Vec::new(),
            alpha: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write snapshot fields of single runs.
    #[serde(default)]
    pub fields: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            fields: false,
        }
    }
}

/// Validated objects built from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Resolved {
    pub grid: Grid,
    pub params: GLParams,
    pub forcing: ForcingField,
    pub spec: VortexSpec,
    pub scheme: StepScheme,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_steps: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Schema(format!("expected schema \"{SCHEMA}\", found \"{}\"", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds = match &self.seeds.list {
            Some(l) => l.clone(),
            None => (0..self.seeds.count as u64).map(|k| self.seeds.base + k).collect(),
        };
        if seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(seeds)
    }

    /// Same configuration at a different `(ε, n)`.
    pub fn with_resolution(&self, eps: f64, n: usize) -> Self {
        let mut c = self.clone();
        c.model.eps = eps;
        c.grid.n = n;
        c
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let grid = Grid::new(self.grid.geometry, self.grid.n, self.grid.side)?;
        let params = GLParams::new(self.model.eps)?;
        let forcing = make_forcing(self.forcing, &grid)?;
        let scheme = StepScheme::new(self.time.scheme, self.time.c_stab)?;
        let horizon = self.time.horizon;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon {horizon} must be positive")));
        }
        let cap = dt_max(&params, &grid, &forcing, scheme.c_stab);
        let dt = match self.time.dt {
            DtSetting::Auto(_) => auto_dt(horizon, cap),
            DtSetting::Fixed(dt) => {
                if dt > cap * (1.0 + 1e-12) {
                    return Err(Error::UnstableTimeStep { dt, dt_max: cap });
                }
                dt
            }
        };
        let steps_f = (horizon / dt).round();
        if !(steps_f >= 1.0) || (steps_f * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Config(format!("dt = {dt} does not divide the horizon {horizon}")));
        }
        let steps = steps_f as usize;
        let mut snapshot_steps: Vec<usize> = match &self.time.snapshots {
            SnapshotSetting::Count(k) => {
                let k = (*k).max(1);
                (0..=k).map(|i| ((i as f64 / k as f64) * steps as f64).round() as usize).collect()
            }
            SnapshotSetting::Times(ts) => {
                let mut v = Vec::new();
                for &t in ts {
                    if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t) {
                        return Err(Error::Config(format!("snapshot time {t} outside [0, {horizon}]")));
                    }
                    v.push((t / dt).round() as usize);
                }
                v
            }
        };
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        let spec = VortexSpec::new(self.vortices.clone());
        Ok(Resolved {
            grid,
            params,
            forcing,
            spec,
            scheme,
            dt,
            steps,
            snapshot_steps,
            seeds: self.seeds()?,
        })
    }

    /// A minimal torus configuration with a `±1` pair, used by examples.
    pub fn torus_pair(n: usize, eps: f64, horizon: f64, forcing: ForcingFamily) -> Self {
        Self {
            schema: SCHEMA.into(),
            grid: GridConfig {
                geometry: Geometry::Torus,
                n,
                side: 1.0,
            },
            model: ModelConfig { eps },
            time: TimeConfig {
                horizon,
                dt: auto_dt_setting(),
                scheme: SchemeKind::StratonovichHeun,
                c_stab: 0.5,
                snapshots: ten(),
            },
            forcing,
            vortices: vec![Vortex::new(0.25, 0.5, 1), Vortex::new(0.75, 0.5, -1)],
            seeds: SeedsConfig::default(),
            ledger: LedgerConfig::default(),
            detect: DetectConfig::default(),
            point_vortex: PointVortexConfig::default(),
            report: ReportConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Resolved {
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_steps.iter().map(|&m| m as f64 * self.dt).collect()
    }
}
