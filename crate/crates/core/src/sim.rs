//! Free-running 3-DOF canal transit with the identified model.
//!
//! ```text
//! M ν̇ = -D(ν) + τ_bank(η, ν) + (X_in, 0, 0)
//! η̇   = R(ψ) ν
//! ```
//!
//! `M = [[m_surge, 0, 0], [0, b_vdot, b_rdot], [0, c_vdot, c_rdot]]`. Sway/yaw damping
//! cross terms are not part of the identified model and are not simulated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSet;
use crate::error::{DomainError, Error, Result};
use crate::hydro::{self, BankForce, CanalGeometry, PlanarState, VesselGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated horizon (s).
    pub t_max: f64,
    /// Constant surge force input (N).
    pub x_in: f64,
    /// Surge inertia. The captive data cannot identify a_udot, so it is supplied here.
    pub surge_mass: f64,
    pub initial: PlanarState,
    /// Stop with `DomainStop` once the midship clearance drops below this (m).
    pub clearance_floor: f64,
    /// Head current added to the surge speed in the bank term (m/s).
    pub current: f64,
}

impl SimConfig {
    /// Transit of the model-scale vessel at 1 m/s with the surge force that holds that speed.
    pub fn transit(vessel: &VesselGeometry, y0: f64) -> Self {
        Self {
            dt: 0.01,
            t_max: 600.0,
            x_in: 12.6,
            surge_mass: vessel.mass,
            initial: PlanarState { y: y0, u: 1.0, ..Default::default() },
            clearance_floor: 0.05 * vessel.beam,
            current: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::value(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Error::value(format!("t_max ({}) must be at least dt ({})", self.t_max, self.dt)));
        }
        if !(self.surge_mass.is_finite() && self.surge_mass > 0.0) {
            return Err(Error::value(format!("surge mass must be positive, got {}", self.surge_mass)));
        }
        if !(self.clearance_floor.is_finite() && self.clearance_floor > 0.0) {
            return Err(Error::value("clearance floor must be positive"));
        }
        if !(self.x_in.is_finite() && self.current.is_finite() && self.initial.is_finite()) {
            return Err(Error::value("non-finite simulation input"));
        }
        Ok(())
    }

    /// Same run for a vessel `scale` times larger under Froude similarity.
    pub fn froude_scaled(&self, vessel: &VesselGeometry, canal: &CanalGeometry, scale: f64) -> Result<Self> {
        let (_, _, initial) = hydro::froude_scale(vessel, canal, &self.initial, scale)?;
        let sq = scale.sqrt();
        Ok(Self {
            dt: self.dt * sq,
            t_max: self.t_max * sq,
            x_in: self.x_in * scale.powi(3),
            surge_mass: self.surge_mass * scale.powi(3),
            initial,
            clearance_floor: self.clearance_floor * scale,
            current: self.current * sq,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Port,
    Starboard,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Port => "port",
            Side::Starboard => "starboard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// A hull corner reached the canal wall.
    Grounded { side: Side, x_ground: f64, t_ground: f64 },
    /// Reached `t_max` without touching a bank.
    Completed { t_end: f64 },
    /// Midship clearance fell below the floor, or the bank model left its domain.
    DomainStop { side: Option<Side>, x: f64, t: f64 },
}

impl Outcome {
    pub fn grounding(&self) -> Option<(Side, f64, f64)> {
        match *self {
            Outcome::Grounded { side, x_ground, t_ground } => Some((side, x_ground, t_ground)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: PlanarState,
    pub bank: BankForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trajectory: Vec<TrajectorySample>,
    pub outcome: Outcome,
}

impl SimResult {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", "psi", "u", "v", "r", "Ybank", "Nbank"])?;
        for p in &self.trajectory {
            let s = &p.state;
            w.write_record([p.t, s.x, s.y, s.psi, s.u, s.v, s.r, p.bank.sway, p.bank.yaw].map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<trajectory>", e))?;
        Ok(())
    }
}

type Vec6 = [f64; 6];

fn pack(s: &PlanarState) -> Vec6 {
    [s.x, s.y, s.psi, s.u, s.v, s.r]
}

fn unpack(v: &Vec6, z: f64) -> PlanarState {
    PlanarState { x: v[0], y: v[1], psi: v[2], u: v[3], v: v[4], r: v[5], z }
}

fn axpy(a: f64, x: &Vec6, y: &Vec6) -> Vec6 {
    std::array::from_fn(|i| y[i] + a * x[i])
}

/// Equations of motion with the mass matrix inverted once.
#[derive(Debug, Clone)]
pub struct ShipDynamics {
    coeffs: CoefficientSet,
    vessel: VesselGeometry,
    canal: CanalGeometry,
    config: SimConfig,
    inv_mass: [[f64; 2]; 2],
}

impl ShipDynamics {
    pub fn new(
        coeffs: &CoefficientSet,
        vessel: &VesselGeometry,
        canal: &CanalGeometry,
        config: &SimConfig,
    ) -> Result<Self> {
        config.validate()?;
        coeffs.check_finite()?;
        let (m11, m12, m21, m22) = (coeffs.b[0], coeffs.b[1], coeffs.c[0], coeffs.c[1]);
        let det = m11 * m22 - m12 * m21;
        let scale = (m11 * m22).abs() + (m12 * m21).abs();
        if det == 0.0 || det.abs() <= 1e-12 * scale {
            return Err(Error::SingularMass { det });
        }
        Ok(Self {
            coeffs: *coeffs,
            vessel: *vessel,
            canal: *canal,
            config: *config,
            inv_mass: [[m22 / det, -m12 / det], [-m21 / det, m11 / det]],
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn bank(&self, state: &PlanarState) -> Result<BankForce> {
        let u_w = hydro::relative_water_speed(state, self.config.current);
        hydro::bank_force(state, u_w, self.coeffs.b_bank(), self.coeffs.c_bank(), &self.vessel, &self.canal)
    }

    /// Time derivative of `(x, y, psi, u, v, r)`.
    pub fn derivative(&self, state: &PlanarState) -> Result<Vec6> {
        let PlanarState { psi, u, v, r, .. } = *state;
        let (a, b, c) = (&self.coeffs.a, &self.coeffs.b, &self.coeffs.c);
        let bank = self.bank(state)?;
        let surge = self.config.x_in - a[1] * u - a[2] * u.abs() * u;
        let sway = bank.sway - (b[2] * v + b[3] * r + b[4] * v.abs() * v + b[5] * r.abs() * r);
        let yaw = bank.yaw - (c[2] * v + c[3] * r + c[4] * v.abs() * v + c[5] * r.abs() * r);
        let m = &self.inv_mass;
        let (sin, cos) = psi.sin_cos();
        Ok([
            u * cos - v * sin,
            u * sin + v * cos,
            r,
            surge / self.config.surge_mass,
            m[0][0] * sway + m[0][1] * yaw,
            m[1][0] * sway + m[1][1] * yaw,
        ])
    }

    /// One classical RK4 step of length `dt`.
    pub fn step(&self, state: &PlanarState) -> Result<PlanarState> {
        let dt = self.config.dt;
        let y0 = pack(state);
        let k1 = self.derivative(state)?;
        let k2 = self.derivative(&unpack(&axpy(0.5 * dt, &k1, &y0), state.z))?;
        let k3 = self.derivative(&unpack(&axpy(0.5 * dt, &k2, &y0), state.z))?;
        let k4 = self.derivative(&unpack(&axpy(dt, &k3, &y0), state.z))?;
        let next: Vec6 = std::array::from_fn(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        Ok(unpack(&next, state.z))
    }

    /// Furthest transverse reach of the L×B hull rectangle toward each bank:
    /// `(max corner y, min corner y)`.
    pub fn hull_extent(&self, state: &PlanarState) -> (f64, f64) {
        let (sin, cos) = state.psi.sin_cos();
        let along = 0.5 * self.vessel.length * sin.abs();
        let across = 0.5 * self.vessel.beam * cos.abs();
        (state.y + along + across, state.y - along - across)
    }

    fn contact(&self, state: &PlanarState) -> Option<(Side, f64)> {
        let half_w = self.canal.half_width();
        let (hi, lo) = self.hull_extent(state);
        let stbd = hi - half_w;
        let port = -half_w - lo;
        if stbd >= 0.0 && stbd >= port {
            Some((Side::Starboard, stbd))
        } else if port >= 0.0 {
            Some((Side::Port, port))
        } else {
            None
        }
    }

    fn penetration(&self, state: &PlanarState, side: Side) -> f64 {
        let half_w = self.canal.half_width();
        let (hi, lo) = self.hull_extent(state);
        match side {
            Side::Starboard => hi - half_w,
            Side::Port => -half_w - lo,
        }
    }

    pub fn run(&self) -> Result<SimResult> {
        self.integrate(true)
    }

    /// Like [`run`](Self::run) without keeping the trajectory.
    pub fn run_outcome(&self) -> Result<Outcome> {
        Ok(self.integrate(false)?.outcome)
    }

    fn integrate(&self, keep: bool) -> Result<SimResult> {
        let cfg = &self.config;
        let mut state = cfg.initial;
        if let Some((side, _)) = self.contact(&state) {
            return Err(Error::value(format!("initial pose intersects the {} bank", side.as_str())));
        }
        let log = |t: f64, s: &PlanarState| TrajectorySample {
            t,
            state: *s,
            bank: self.bank(s).unwrap_or(BankForce { sway: f64::NAN, yaw: f64::NAN }),
        };
        let mut trajectory = Vec::new();
        if keep {
            trajectory.push(log(0.0, &state));
        }
        let steps = (cfg.t_max / cfg.dt).round() as u64;
        let mut outcome = Outcome::Completed { t_end: steps as f64 * cfg.dt };
        for k in 1..=steps {
            let t_prev = (k - 1) as f64 * cfg.dt;
            let t = k as f64 * cfg.dt;
            let next = match self.step(&state) {
                Ok(s) => s,
                Err(Error::Domain(e)) => {
                    outcome = Outcome::DomainStop { side: domain_side(&e), x: state.x, t: t_prev };
                    break;
                }
                Err(e) => return Err(e),
            };
            if keep {
                trajectory.push(log(t, &next));
            }
            if let Some((side, depth)) = self.contact(&next) {
                let before = self.penetration(&state, side);
                let frac = if depth > before { -before / (depth - before) } else { 1.0 };
                outcome = Outcome::Grounded {
                    side,
                    x_ground: state.x + frac * (next.x - state.x),
                    t_ground: t_prev + frac * cfg.dt,
                };
                break;
            }
            match hydro::clearances(&next, &self.vessel, &self.canal) {
                Ok(cl) if cl.starboard.min(cl.port) >= cfg.clearance_floor => {}
                Ok(cl) => {
                    let side = if cl.starboard < cl.port { Side::Starboard } else { Side::Port };
                    outcome = Outcome::DomainStop { side: Some(side), x: next.x, t };
                    break;
                }
                Err(DomainError::TransverseHeading { .. }) => {}
                Err(e) => {
                    outcome = Outcome::DomainStop { side: domain_side(&e), x: next.x, t };
                    break;
                }
            }
            state = next;
        }
        Ok(SimResult { trajectory, outcome })
    }
}

fn domain_side(e: &DomainError) -> Option<Side> {
    match e {
        DomainError::StarboardContact { .. } => Some(Side::Starboard),
        DomainError::PortContact { .. } => Some(Side::Port),
        _ => None,
    }
}

pub fn step(
    state: &PlanarState,
    coeffs: &CoefficientSet,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    config: &SimConfig,
) -> Result<PlanarState> {
    ShipDynamics::new(coeffs, vessel, canal, config)?.step(state)
}

pub fn run(
    config: &SimConfig,
    coeffs: &CoefficientSet,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
) -> Result<SimResult> {
    ShipDynamics::new(coeffs, vessel, canal, config)?.run()
}

/// One point of a grounding-distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub y0: f64,
    /// Initial starboard midship clearance.
    pub ys0: f64,
    pub outcome: std::result::Result<Outcome, String>,
}

impl SweepPoint {
    pub fn grounding(&self) -> Option<(Side, f64, f64)> {
        self.outcome.as_ref().ok().and_then(Outcome::grounding)
    }
}

/// Runs `base` once per initial transverse offset. Per-point failures are recorded and the
/// sweep continues. Points are evaluated in parallel on the current rayon pool; the output
/// order follows `y0s`.
pub fn sweep_grounding(
    y0s: &[f64],
    base: &SimConfig,
    coeffs: &CoefficientSet,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
) -> Vec<SweepPoint> {
    y0s.par_iter()
        .map(|&y0| {
            let config = SimConfig { initial: PlanarState { y: y0, ..base.initial }, ..*base };
            let ys0 = hydro::clearances(&config.initial, vessel, canal).map(|c| c.starboard).unwrap_or(f64::NAN);
            let outcome = ShipDynamics::new(coeffs, vessel, canal, &config)
                .and_then(|d| d.run_outcome())
                .map_err(|e| e.to_string());
            SweepPoint { y0, ys0, outcome }
        })
        .collect()
}

/// Starboard clearances at which the grounding side changes between consecutive grounded
/// sweep points, each taken halfway between the two neighbours.
pub fn side_flips(points: &[SweepPoint]) -> Vec<f64> {
    let grounded: Vec<(f64, Side)> =
        points.iter().filter_map(|p| p.grounding().map(|(side, _, _)| (p.ys0, side))).collect();
    grounded.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| 0.5 * (w[0].0 + w[1].0)).collect()
}

/// First entry of [`side_flips`].
pub fn side_flip(points: &[SweepPoint]) -> Option<f64> {
    side_flips(points).first().copied()
}

pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y0", "y_s0", "x_ground", "side", "t_ground", "outcome"])?;
    for p in points {
        let (x, side, t, label) = match &p.outcome {
            Ok(Outcome::Grounded { side, x_ground, t_ground }) => {
                (x_ground.to_string(), side.as_str().to_string(), t_ground.to_string(), "grounded".to_string())
            }
            Ok(Outcome::Completed { .. }) => (String::new(), String::new(), String::new(), "completed".into()),
            Ok(Outcome::DomainStop { side, x, t }) => (
                x.to_string(),
                side.map(|s| s.as_str().to_string()).unwrap_or_default(),
                t.to_string(),
                "domain_stop".into(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), format!("error: {e}")),
        };
        w.write_record([p.y0.to_string(), p.ys0.to_string(), x, side, t, label])?;
    }
    w.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use approx::assert_relative_eq;

    fn setup(y0: f64, t_max: f64) -> (ShipDynamics, SimConfig) {
        let cfg = ModelConfig::dtc_canal();
        let sim = SimConfig { t_max, ..SimConfig::transit(&cfg.vessel, y0) };
        let dyn_ = ShipDynamics::new(&CoefficientSet::reference_dtc(), &cfg.vessel, &cfg.canal, &sim).unwrap();
        (dyn_, sim)
    }

    fn final_state(y0: f64, t_max: f64, dt: f64) -> PlanarState {
        let cfg = ModelConfig::dtc_canal();
        let sim = SimConfig { t_max, dt, ..SimConfig::transit(&cfg.vessel, y0) };
        let res = run(&sim, &CoefficientSet::reference_dtc(), &cfg.vessel, &cfg.canal).unwrap();
        assert!(matches!(res.outcome, Outcome::Completed { .. }), "{:?}", res.outcome);
        res.trajectory.last().unwrap().state
    }

    #[test]
    fn centreline_is_an_equilibrium() {
        let (d, _) = setup(0.0, 20.0);
        let res = d.run().unwrap();
        assert!(matches!(res.outcome, Outcome::Completed { .. }));
        for p in &res.trajectory {
            assert_eq!((p.state.y, p.state.psi, p.state.v, p.state.r), (0.0, 0.0, 0.0, 0.0));
            assert!((p.state.u - 1.0).abs() <= 1e-12);
        }
        assert_relative_eq!(res.trajectory.last().unwrap().state.x, 20.0, max_relative = 1e-12);
    }

    #[test]
    fn mirrored_start_gives_mirrored_run() {
        let (p, _) = setup(0.8, 30.0);
        let (n, _) = setup(-0.8, 30.0);
        let (rp, rn) = (p.run().unwrap(), n.run().unwrap());
        assert_eq!(rp.trajectory.len(), rn.trajectory.len());
        for (a, b) in rp.trajectory.iter().zip(&rn.trajectory) {
            let m = b.state.mirrored();
            for (x, y) in [(a.state.x, m.x), (a.state.y, m.y), (a.state.psi, m.psi), (a.state.v, m.v), (a.state.r, m.r)]
            {
                assert!((x - y).abs() <= 1e-9, "{a:?} vs {b:?}");
            }
        }
        match (rp.outcome, rn.outcome) {
            (Outcome::Grounded { side: s1, x_ground: x1, .. }, Outcome::Grounded { side: s2, x_ground: x2, .. }) => {
                assert_ne!(s1, s2);
                assert!((x1 - x2).abs() <= 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // v and r keep one sign over this segment, so |v|v and |r|r stay smooth
        let h = 0.1;
        let y = |dt| final_state(0.05, 10.0, dt);
        let (s1, s2, s4) = (y(h), y(h / 2.0), y(h / 4.0));
        let ratio = (s1.y - s2.y) / (s2.y - s4.y);
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn grounding_point_is_interpolated_onto_the_wall() {
        let (d, _) = setup(1.5, 600.0);
        let res = d.run().unwrap();
        let (side, x, t) = res.outcome.grounding().expect("grounds");
        let n = res.trajectory.len();
        let (before, after) = (&res.trajectory[n - 2], &res.trajectory[n - 1]);
        assert!(before.t <= t && t <= after.t);
        assert!(before.state.x <= x && x <= after.state.x);
        let (hi, lo) = d.hull_extent(&after.state);
        match side {
            Side::Starboard => assert!(hi >= 3.5),
            Side::Port => assert!(lo <= -3.5),
        }
    }

    #[test]
    fn froude_similar_runs_agree() {
        let lambda = 4.0;
        let cfg = ModelConfig::dtc_canal();
        let coeffs = CoefficientSet::reference_dtc();
        let sim = SimConfig { t_max: 200.0, ..SimConfig::transit(&cfg.vessel, 1.2) };
        let small = run(&sim, &coeffs, &cfg.vessel, &cfg.canal).unwrap();
        let (v, c, _) = hydro::froude_scale(&cfg.vessel, &cfg.canal, &sim.initial, lambda).unwrap();
        let big_sim = sim.froude_scaled(&cfg.vessel, &cfg.canal, lambda).unwrap();
        let big = run(&big_sim, &coeffs.froude_scaled(lambda), &v, &c).unwrap();
        let (s1, x1, t1) = small.outcome.grounding().unwrap();
        let (s2, x2, t2) = big.outcome.grounding().unwrap();
        assert_eq!(s1, s2);
        assert_relative_eq!(x2, lambda * x1, max_relative = 1e-6);
        assert_relative_eq!(t2, lambda.sqrt() * t1, max_relative = 1e-6);
    }

    #[test]
    fn invalid_inputs() {
        let cfg = ModelConfig::dtc_canal();
        let coeffs = CoefficientSet::reference_dtc();
        let zero_dt = SimConfig { dt: 0.0, ..SimConfig::transit(&cfg.vessel, 0.0) };
        assert!(run(&zero_dt, &coeffs, &cfg.vessel, &cfg.canal).is_err());

        let mut singular = coeffs;
        singular.b[0] = 1.0;
        singular.b[1] = 2.0;
        singular.c[0] = 2.0;
        singular.c[1] = 4.0;
        let sim = SimConfig::transit(&cfg.vessel, 0.0);
        assert!(matches!(run(&sim, &singular, &cfg.vessel, &cfg.canal), Err(Error::SingularMass { .. })));

        let touching = SimConfig::transit(&cfg.vessel, 3.3);
        assert!(run(&touching, &coeffs, &cfg.vessel, &cfg.canal).is_err());
    }

    #[test]
    fn side_flip_midpoint() {
        let g = |ys0: f64, side| SweepPoint {
            y0: 0.0,
            ys0,
            outcome: Ok(Outcome::Grounded { side, x_ground: 1.0, t_ground: 1.0 }),
        };
        let pts = vec![g(3.0, Side::Port), g(2.0, Side::Port), g(1.0, Side::Starboard)];
        assert_eq!(side_flip(&pts), Some(1.5));
        assert_eq!(side_flip(&pts[..2]), None);
        let mut back = pts.clone();
        back.push(g(0.5, Side::Port));
        assert_eq!(side_flips(&back), vec![1.5, 0.75]);
    }

    #[test]
    fn sweep_csv_has_one_row_per_point() {
        let cfg = ModelConfig::dtc_canal();
        let base = SimConfig { t_max: 5.0, ..SimConfig::transit(&cfg.vessel, 0.0) };
        let pts = sweep_grounding(&[0.0, 3.3], &base, &CoefficientSet::reference_dtc(), &cfg.vessel, &cfg.canal);
        assert!(matches!(pts[0].outcome, Ok(Outcome::Completed { .. })));
        assert!(pts[1].outcome.is_err());
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("y0,y_s0,x_ground,side,t_ground,outcome"));
    }
}
