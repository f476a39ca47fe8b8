//! Vessel and canal geometry from a plain `key = value` file.
//!
//! ```text
//! # model-scale DTC in a 7 m canal
//! L   = 3.984
//! B   = 0.572
//! T0  = 0.1627
//! CB  = 0.661     # required, there is no default
//! m   = 245.8
//! Iz  = 219.2
//! xG  = -0.107
//! W   = 7.0
//! D   = 0.4
//! rho = 1000.0
//! current = 0.0   # optional head current added to u for the bank term
//! ```
//!
//! All values are SI, model scale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::{CanalGeometry, VesselGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "L")]
    length: f64,
    #[serde(rename = "B")]
    beam: f64,
    #[serde(rename = "T0")]
    draft: f64,
    #[serde(rename = "CB")]
    block_coeff: f64,
    m: f64,
    #[serde(rename = "Iz")]
    inertia_z: f64,
    #[serde(rename = "xG")]
    x_g: f64,
    #[serde(rename = "W")]
    width: f64,
    #[serde(rename = "D")]
    depth: f64,
    rho: f64,
    #[serde(default)]
    current: f64,
}

/// Everything the model needs besides coefficients and state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vessel: VesselGeometry,
    pub canal: CanalGeometry,
    /// Head current added to the surge speed when forming the bank term (m/s).
    pub current: f64,
}

impl ModelConfig {
    pub fn new(vessel: VesselGeometry, canal: CanalGeometry) -> Result<Self> {
        let cfg = Self { vessel, canal, current: 0.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Model-scale DTC in the 7 m canal of the transit study.
    pub fn dtc_canal() -> Self {
        Self {
            vessel: VesselGeometry::dtc_model(),
            canal: CanalGeometry { width: 7.0, depth: 0.4, rho: 1000.0 },
            current: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vessel.validate()?;
        self.canal.validate_for(&self.vessel)?;
        if !self.current.is_finite() {
            return Err(Error::value("current must be finite"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = Self {
            vessel: VesselGeometry {
                length: raw.length,
                beam: raw.beam,
                draft: raw.draft,
                block_coeff: raw.block_coeff,
                mass: raw.m,
                inertia_z: raw.inertia_z,
                x_g: raw.x_g,
            },
            canal: CanalGeometry { width: raw.width, depth: raw.depth, rho: raw.rho },
            current: raw.current,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let v = &self.vessel;
        let c = &self.canal;
        format!(
            "L = {:?}\nB = {:?}\nT0 = {:?}\nCB = {:?}\nm = {:?}\nIz = {:?}\nxG = {:?}\nW = {:?}\nD = {:?}\nrho = {:?}\ncurrent = {:?}\n",
            v.length, v.beam, v.draft, v.block_coeff, v.mass, v.inertia_z, v.x_g, c.width, c.depth, c.rho, self.current
        )
    }
}
