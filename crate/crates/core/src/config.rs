//! Run configuration shared by the command-line front end and the Python
//! bindings. One JSON file describes a whole run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{MatchOptions, PhantomSpec};
use crate::geometry::{MuSpec, Profile};
use crate::inversion::InversionConfig;
use crate::io::read_json;
use crate::operators::grid::{SinoGrid, VolumeGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Transverse samples per axis.
    pub n: usize,
    /// Axial samples; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    pub half_width_xy: f64,
    pub half_width_z: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Defaults to `2 (n - 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 33,
            n_z: None,
            half_width_xy: 1.0,
            half_width_z: 5.0,
            s_min: 0.2,
            s_max: 2.2,
            n_theta: None,
        }
    }
}

impl GridConfig {
    pub fn n_theta(&self) -> usize {
        self.n_theta.unwrap_or(2 * self.n.saturating_sub(1)).max(1)
    }

    pub fn volume(&self) -> Result<VolumeGrid> {
        let g = VolumeGrid {
            n_xy: self.n,
            n_z: self.n_z.unwrap_or(self.n),
            half_width_xy: self.half_width_xy,
            half_width_z: self.half_width_z,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn sino(&self) -> Result<SinoGrid> {
        if !(self.s_min > 0.0 && self.s_max > self.s_min) {
            return Err(Error::Config(format!(
                "need 0 < s_min < s_max, got [{}, {}]",
                self.s_min, self.s_max
            )));
        }
        SinoGrid::for_volume(&self.volume()?, self.s_min, self.s_max, self.n_theta())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative noise level in percent.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { gamma: 0.0, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BolkerConfig {
    /// Audited profile; defaults to the run's family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    /// Parameter range; defaults to the family's standard range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_resolution: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondnumConfig {
    /// Families to tabulate; empty means sphere, spheroid and lemon.
    #[serde(default)]
    pub families: Vec<MuSpec>,
    /// Radii per Volterra system; defaults to the axial sample count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactConfig {
    /// Source point; defaults to the delta phantom position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    pub theta_samples: usize,
    #[serde(default)]
    pub matching: MatchOptions,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        ArtifactConfig {
            point: None,
            theta_samples: 360,
            matching: MatchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub family: MuSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Defaults to the parameter table entry for `noise.gamma` with CGLS-TV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionConfig>,
    #[serde(default)]
    pub bolker: BolkerConfig,
    #[serde(default)]
    pub condnum: CondnumConfig,
    #[serde(default)]
    pub artifacts: ArtifactConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(family: MuSpec, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            family,
            grid: GridConfig::default(),
            phantom: PhantomSpec::default(),
            noise: NoiseConfig::default(),
            inversion: None,
            bolker: BolkerConfig::default(),
            condnum: CondnumConfig::default(),
            artifacts: ArtifactConfig::default(),
            output_dir: output_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inversion(&self) -> InversionConfig {
        self.inversion
            .clone()
            .unwrap_or_else(|| InversionConfig::defaults_for_noise(self.noise.gamma, false))
    }

    /// The configuration with every default written out, as stored in
    /// sidecars.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.grid.n_z = Some(c.grid.n_z.unwrap_or(c.grid.n));
        c.grid.n_theta = Some(c.grid.n_theta());
        c.inversion = Some(self.inversion());
        if c.condnum.families.is_empty() {
            c.condnum.families = MuSpec::standard_families().to_vec();
        }
        c.condnum.n_t = Some(c.condnum.n_t.unwrap_or(c.grid.n_z.unwrap_or(c.grid.n)));
        c
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.resolved()).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.family.validate()?;
        self.grid.sino()?;
        self.phantom.validate()?;
        if !(self.noise.gamma >= 0.0) || !self.noise.gamma.is_finite() {
            return Err(Error::Config(format!(
                "noise.gamma must be >= 0, got {}",
                self.noise.gamma
            )));
        }
        self.inversion().validate()?;
        for f in &self.condnum.families {
            f.validate()?;
        }
        if let Some(p) = &self.bolker.profile {
            p.validate()?;
        }
        if self.artifacts.theta_samples < 8 {
            return Err(Error::Config("artifacts.theta_samples must be at least 8".into()));
        }
        Ok(())
    }
}
