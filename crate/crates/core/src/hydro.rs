//! Closed-form hydrodynamics of a vessel in a rectangular canal.
//!
//! Sign conventions: `y > 0` is toward the starboard bank, `psi` is the heading relative
//! to the canal axis (positive turns the bow to starboard). Forces follow the
//! measured-force convention of the captive tests: acceleration and damping terms enter
//! with a leading minus, the bank suction column with a plus, and the bank yaw column
//! with a minus.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSet;
use crate::error::{DomainError, Error, Result};

/// Headings closer than this to transverse (|psi| = pi/2) have no bank interaction.
pub const TRANSVERSE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselGeometry {
    /// Length L (m).
    pub length: f64,
    /// Beam B (m).
    pub beam: f64,
    /// Nominal draft T0 (m).
    pub draft: f64,
    /// Block coefficient C_B.
    pub block_coeff: f64,
    /// Dry mass m (kg).
    pub mass: f64,
    /// Yaw inertia I_z (kg m²).
    pub inertia_z: f64,
    /// Towing point to centre of gravity along body x (m).
    pub x_g: f64,
}

impl VesselGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive =
            [("L", self.length), ("B", self.beam), ("T0", self.draft), ("m", self.mass), ("Iz", self.inertia_z)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::value(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.block_coeff > 0.0 && self.block_coeff <= 1.0) {
            return Err(Error::value(format!("CB must lie in (0, 1], got {}", self.block_coeff)));
        }
        if !self.x_g.is_finite() {
            return Err(Error::value("xG must be finite"));
        }
        Ok(())
    }

    /// 1:89.11 model of the Duisburg Test Case container ship, rounded to the
    /// model-scale values used in the towing tank (B = 0.572 m).
    pub fn dtc_model() -> Self {
        Self {
            length: 3.984,
            beam: 0.572,
            draft: 0.1627,
            block_coeff: 0.661,
            mass: 245.8,
            inertia_z: 219.2,
            x_g: -0.107,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanalGeometry {
    /// Width W (m).
    pub width: f64,
    /// Depth D (m). Carried for completeness; the bank model does not use it.
    pub depth: f64,
    /// Water density rho (kg/m³).
    pub rho: f64,
}

impl CanalGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("W", self.width), ("D", self.depth), ("rho", self.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::value(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, vessel: &VesselGeometry) -> Result<()> {
        self.validate()?;
        if self.width <= vessel.beam {
            return Err(Error::value(format!("canal width {} must exceed the beam {}", self.width, vessel.beam)));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }
}

/// Pose, body velocity and sinkage of the vessel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub z: f64,
}

impl PlanarState {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.u, self.v, self.r, self.z].iter().all(|v| v.is_finite())
    }

    /// Reflection through the canal centreline.
    pub fn mirrored(&self) -> Self {
        Self { y: -self.y, psi: -self.psi, v: -self.v, r: -self.r, ..*self }
    }
}

/// A state together with the body accelerations observed at that instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MotionSample {
    pub state: PlanarState,
    pub udot: f64,
    pub vdot: f64,
    pub rdot: f64,
}

/// Midship hull-to-bank distances of the equivalent aligned canal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearances {
    pub starboard: f64,
    pub port: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BankForce {
    pub sway: f64,
    pub yaw: f64,
}

/// `1 / |cos psi|`, or `None` inside the transverse guard band.
fn heading_stretch(psi: f64) -> Option<f64> {
    let c = psi.cos().abs();
    (c > TRANSVERSE_GUARD.sin()).then(|| 1.0 / c)
}

/// Starboard and port midship clearances for a vessel at `(y, psi)`.
///
/// A heading rotates the hull against the banks; it is modelled as an aligned canal
/// widened by `sec|psi|`.
pub fn clearances(
    state: &PlanarState,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
) -> Result<Clearances, DomainError> {
    if !(state.y.is_finite() && state.psi.is_finite()) {
        return Err(DomainError::NonFinite);
    }
    let stretch = heading_stretch(state.psi).ok_or(DomainError::TransverseHeading { psi: state.psi })?;
    let half_w = canal.half_width();
    let half_b = 0.5 * vessel.beam;
    let starboard = (half_w - state.y) * stretch - half_b;
    let port = (half_w + state.y) * stretch - half_b;
    if starboard <= 0.0 {
        return Err(DomainError::StarboardContact { clearance: starboard });
    }
    if port <= 0.0 {
        return Err(DomainError::PortContact { clearance: port });
    }
    Ok(Clearances { starboard, port })
}

/// Dimensionless pressure asymmetry between the starboard and port sides.
///
/// Odd in `y`, zero on the centreline, unbounded as either clearance closes and zero
/// for transverse headings.
pub fn delta(state: &PlanarState, vessel: &VesselGeometry, canal: &CanalGeometry) -> Result<f64, DomainError> {
    let cl = match clearances(state, vessel, canal) {
        Ok(cl) => cl,
        Err(DomainError::TransverseHeading { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let half_b = 0.5 * vessel.beam;
    let ratio_s = (cl.starboard + half_b) / cl.starboard;
    let ratio_p = (cl.port + half_b) / cl.port;
    Ok(ratio_s * ratio_s - ratio_p * ratio_p)
}

/// Bank columns of the sway and yaw regression matrices at this state.
///
/// `Y_bank = b_bank * sway` and `N_bank = c_bank * yaw`; the yaw column already carries
/// its minus sign.
pub fn bank_regressors(
    state: &PlanarState,
    u_w: f64,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
) -> Result<BankForce> {
    if !(u_w.is_finite() && u_w >= 0.0) {
        return Err(Error::value(format!("relative water speed must be >= 0, got {u_w}")));
    }
    let wetted_draft = vessel.draft + state.z;
    if wetted_draft <= 0.0 {
        return Err(Error::value(format!("T0 + z must be positive, got {wetted_draft}")));
    }
    let d = delta(state, vessel, canal)?;
    let sway = 0.5 * vessel.block_coeff * canal.rho * vessel.length * wetted_draft * d * u_w * u_w;
    Ok(BankForce { sway, yaw: -sway * vessel.length })
}

/// Bank suction force and cushioning moment.
pub fn bank_force(
    state: &PlanarState,
    u_w: f64,
    b_bank: f64,
    c_bank: f64,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
) -> Result<BankForce> {
    let col = bank_regressors(state, u_w, vessel, canal)?;
    Ok(BankForce { sway: b_bank * col.sway, yaw: c_bank * col.yaw })
}

/// Water speed relative to the hull: surge speed plus a head current.
pub fn relative_water_speed(state: &PlanarState, current: f64) -> f64 {
    state.u + current
}

/// One row of each candidate regression matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorRows {
    pub surge: [f64; 3],
    pub sway: [f64; 7],
    pub yaw: [f64; 7],
}

pub fn regressor_rows(
    sample: &MotionSample,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    current: f64,
) -> Result<RegressorRows> {
    let s = &sample.state;
    let bank = bank_regressors(s, relative_water_speed(s, current), vessel, canal)?;
    let common = [-sample.vdot, -sample.rdot, -s.v, -s.r, -s.v.abs() * s.v, -s.r.abs() * s.r];
    let mut sway = [0.0; 7];
    let mut yaw = [0.0; 7];
    sway[..6].copy_from_slice(&common);
    yaw[..6].copy_from_slice(&common);
    sway[6] = bank.sway;
    yaw[6] = bank.yaw;
    Ok(RegressorRows { surge: [-sample.udot, -s.u, -s.u.abs() * s.u], sway, yaw })
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forces and moment a towing-rig sensor would read: `(X, Y, N)`.
pub fn predict_measured_forces(
    sample: &MotionSample,
    coeffs: &CoefficientSet,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    current: f64,
) -> Result<[f64; 3]> {
    let rows = regressor_rows(sample, vessel, canal, current)?;
    Ok([dot(&rows.surge, &coeffs.a), dot(&rows.sway, &coeffs.b), dot(&rows.yaw, &coeffs.c)])
}

/// Geometric (Froude) similarity transform with length ratio `scale`.
///
/// Lengths scale by λ, mass by λ³, inertia by λ⁵, speeds by √λ and yaw rate by 1/√λ.
pub fn froude_scale(
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    state: &PlanarState,
    scale: f64,
) -> Result<(VesselGeometry, CanalGeometry, PlanarState)> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::value(format!("scale factor must be positive, got {scale}")));
    }
    let l = scale;
    let sq = l.sqrt();
    let v = VesselGeometry {
        length: vessel.length * l,
        beam: vessel.beam * l,
        draft: vessel.draft * l,
        block_coeff: vessel.block_coeff,
        mass: vessel.mass * l.powi(3),
        inertia_z: vessel.inertia_z * l.powi(5),
        x_g: vessel.x_g * l,
    };
    let c = CanalGeometry { width: canal.width * l, depth: canal.depth * l, rho: canal.rho };
    let s = PlanarState {
        x: state.x * l,
        y: state.y * l,
        psi: state.psi,
        u: state.u * sq,
        v: state.v * sq,
        r: state.r / sq,
        z: state.z * l,
    };
    Ok((v, c, s))
}
