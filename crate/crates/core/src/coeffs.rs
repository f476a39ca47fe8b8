//! Regression coefficient vectors for the surge, sway and yaw force models.
//!
//! Coefficient order follows the candidate regression matrices:
//!
//! ```text
//! a = (a_udot, a_u, a_|u|u)
//! b = (b_vdot, b_rdot, b_v, b_r, b_|v|v, b_|r|r, b_bank)
//! c = (c_vdot, c_rdot, c_v, c_r, c_|v|v, c_|r|r, c_bank)
//! ```
//!
//! `b_rdot` and `c_vdot` are the same physical cross added-mass term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SURGE_NAMES: [&str; 3] = ["a_udot", "a_u", "a_|u|u"];
pub const SWAY_NAMES: [&str; 7] = ["b_vdot", "b_rdot", "b_v", "b_r", "b_|v|v", "b_|r|r", "b_bank"];
pub const YAW_NAMES: [&str; 7] = ["c_vdot", "c_rdot", "c_v", "c_r", "c_|v|v", "c_|r|r", "c_bank"];

/// Which coefficients carry a sign constraint (must be >= 0).
pub const SURGE_NONNEG: [bool; 3] = [true, true, true];
pub const SWAY_NONNEG: [bool; 7] = [true, false, true, false, true, false, false];
pub const YAW_NONNEG: [bool; 7] = [false, true, false, true, false, true, false];

/// One of the three force/moment channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    X,
    Y,
    N,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::X, Block::Y, Block::N];

    pub fn names(self) -> &'static [&'static str] {
        match self {
            Block::X => &SURGE_NAMES,
            Block::Y => &SWAY_NAMES,
            Block::N => &YAW_NAMES,
        }
    }

    pub fn nonneg(self) -> &'static [bool] {
        match self {
            Block::X => &SURGE_NONNEG,
            Block::Y => &SWAY_NONNEG,
            Block::N => &YAW_NONNEG,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Block::X => "X",
            Block::Y => "Y",
            Block::N => "N",
        }
    }
}

impl std::str::FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "X" => Ok(Block::X),
            "Y" => Ok(Block::Y),
            "N" => Ok(Block::N),
            other => Err(Error::value(format!("unknown block {other:?} (expected X, Y or N)"))),
        }
    }
}

/// Identified (or prescribed) coefficients of the 3-DOF force model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub a: [f64; 3],
    pub b: [f64; 7],
    pub c: [f64; 7],
}

impl CoefficientSet {
    pub fn zeros() -> Self {
        Self { a: [0.0; 3], b: [0.0; 7], c: [0.0; 7] }
    }

    /// Coefficients identified from the 1:89.11 DTC captive tests.
    pub fn reference_dtc() -> Self {
        Self {
            a: [0.0, 0.0, 12.6],
            b: [733.0, -56.1, 100.0, 118.0, 3298.0, -161.0, 1.07],
            c: [-56.1, 712.0, 414.0, 84.9, 589.0, 3346.0, 0.13],
        }
    }

    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::X => &self.a,
            Block::Y => &self.b,
            Block::N => &self.c,
        }
    }

    pub fn b_bank(&self) -> f64 {
        self.b[6]
    }

    pub fn c_bank(&self) -> f64 {
        self.c[6]
    }

    /// All 17 coefficients as `(name, value)` pairs in block order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        SURGE_NAMES
            .iter()
            .zip(self.a)
            .chain(SWAY_NAMES.iter().zip(self.b))
            .chain(YAW_NAMES.iter().zip(self.c))
            .map(|(n, v)| (*n, v))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.named().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Names of sign-constrained coefficients that are negative.
    pub fn sign_violations(&self) -> Vec<&'static str> {
        Block::ALL
            .iter()
            .flat_map(|&blk| {
                blk.names()
                    .iter()
                    .zip(blk.nonneg())
                    .zip(self.block(blk).to_vec())
                    .filter(|((_, &nn), v)| nn && *v < 0.0)
                    .map(|((n, _), _)| *n)
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.named().into_iter().find(|(_, v)| !v.is_finite()) {
            Some((n, v)) => Err(Error::value(format!("coefficient {n} is not finite ({v})"))),
            None => Ok(()),
        }
    }

    /// Rescales every coefficient to a geometrically similar vessel `scale` times larger,
    /// keeping density fixed. Mass ~ λ³, length ~ λ, time ~ √λ; the bank coefficients
    /// are dimensionless and stay unchanged.
    pub fn froude_scaled(&self, scale: f64) -> Self {
        let l = scale;
        let p = |e: f64| l.powf(e);
        Self {
            // kg, kg/s, kg/m
            a: [self.a[0] * p(3.0), self.a[1] * p(2.5), self.a[2] * p(2.0)],
            // kg, kg m, kg/s, kg m/s, kg/m, kg m, 1
            b: [
                self.b[0] * p(3.0),
                self.b[1] * p(4.0),
                self.b[2] * p(2.5),
                self.b[3] * p(3.5),
                self.b[4] * p(2.0),
                self.b[5] * p(4.0),
                self.b[6],
            ],
            // kg m, kg m², kg m/s, kg m²/s, kg, kg m², 1
            c: [
                self.c[0] * p(4.0),
                self.c[1] * p(5.0),
                self.c[2] * p(3.5),
                self.c[3] * p(4.5),
                self.c[4] * p(3.0),
                self.c[5] * p(5.0),
                self.c[6],
            ],
        }
    }

    /// Largest relative deviation from `truth`. Coefficients whose true value is zero
    /// contribute their absolute deviation instead.
    pub fn max_relative_error(&self, truth: &CoefficientSet) -> (&'static str, f64) {
        self.named()
            .into_iter()
            .zip(truth.named())
            .map(|((n, est), (_, t))| {
                let err = if t == 0.0 { est.abs() } else { ((est - t) / t).abs() };
                (n, err)
            })
            .fold(("", 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
    }
}

#[derive(Serialize, Deserialize)]
struct NamedCoefficients {
    a_udot: f64,
    a_u: f64,
    #[serde(rename = "a_|u|u")]
    a_absu_u: f64,
    b_vdot: f64,
    b_rdot: f64,
    b_v: f64,
    b_r: f64,
    #[serde(rename = "b_|v|v")]
    b_absv_v: f64,
    #[serde(rename = "b_|r|r")]
    b_absr_r: f64,
    b_bank: f64,
    c_vdot: f64,
    c_rdot: f64,
    c_v: f64,
    c_r: f64,
    #[serde(rename = "c_|v|v")]
    c_absv_v: f64,
    #[serde(rename = "c_|r|r")]
    c_absr_r: f64,
    c_bank: f64,
}

impl Serialize for CoefficientSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let [a_udot, a_u, a_absu_u] = self.a;
        let [b_vdot, b_rdot, b_v, b_r, b_absv_v, b_absr_r, b_bank] = self.b;
        let [c_vdot, c_rdot, c_v, c_r, c_absv_v, c_absr_r, c_bank] = self.c;
        NamedCoefficients {
            a_udot,
            a_u,
            a_absu_u,
            b_vdot,
            b_rdot,
            b_v,
            b_r,
            b_absv_v,
            b_absr_r,
            b_bank,
            c_vdot,
            c_rdot,
            c_v,
            c_r,
            c_absv_v,
            c_absr_r,
            c_bank,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = NamedCoefficients::deserialize(d)?;
        Ok(Self {
            a: [n.a_udot, n.a_u, n.a_absu_u],
            b: [n.b_vdot, n.b_rdot, n.b_v, n.b_r, n.b_absv_v, n.b_absr_r, n.b_bank],
            c: [n.c_vdot, n.c_rdot, n.c_v, n.c_r, n.c_absv_v, n.c_absr_r, n.c_bank],
        })
    }
}
