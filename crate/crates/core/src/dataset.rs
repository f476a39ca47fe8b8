//! Captive-test time series: CSV ingestion, train/validation split and a synthetic
//! generator with exact analytic kinematics.
//!
//! CSV schema (header required, comma separated):
//!
//! ```text
//! t,x,y,psi,u,v,r,udot,vdot,rdot,z,X,Y,N[,test]
//! ```
//!
//! The optional `test` column tags each row with its captive test (`A`, `B` or `C`).

use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::hydro::{self, CanalGeometry, MotionSample, PlanarState, VesselGeometry};

pub const COLUMNS: [&str; 14] = ["t", "x", "y", "psi", "u", "v", "r", "udot", "vdot", "rdot", "z", "X", "Y", "N"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptiveRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub udot: f64,
    pub vdot: f64,
    pub rdot: f64,
    pub z: f64,
    #[serde(rename = "X")]
    pub force_x: f64,
    #[serde(rename = "Y")]
    pub force_y: f64,
    #[serde(rename = "N")]
    pub moment_n: f64,
}

impl CaptiveRecord {
    fn from_values(v: &[f64; 14]) -> Self {
        Self {
            t: v[0],
            x: v[1],
            y: v[2],
            psi: v[3],
            u: v[4],
            v: v[5],
            r: v[6],
            udot: v[7],
            vdot: v[8],
            rdot: v[9],
            z: v[10],
            force_x: v[11],
            force_y: v[12],
            moment_n: v[13],
        }
    }

    fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.x,
            self.y,
            self.psi,
            self.u,
            self.v,
            self.r,
            self.udot,
            self.vdot,
            self.rdot,
            self.z,
            self.force_x,
            self.force_y,
            self.moment_n,
        ]
    }

    pub fn state(&self) -> PlanarState {
        PlanarState { x: self.x, y: self.y, psi: self.psi, u: self.u, v: self.v, r: self.r, z: self.z }
    }

    pub fn motion(&self) -> MotionSample {
        MotionSample { state: self.state(), udot: self.udot, vdot: self.vdot, rdot: self.rdot }
    }

    pub fn forces(&self) -> [f64; 3] {
        [self.force_x, self.force_y, self.moment_n]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestLabel {
    A,
    B,
    C,
}

impl TestLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TestLabel::A => "A",
            TestLabel::B => "B",
            TestLabel::C => "C",
        }
    }
}

impl std::str::FromStr for TestLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(TestLabel::A),
            "B" | "b" => Ok(TestLabel::B),
            "C" | "c" => Ok(TestLabel::C),
            other => Err(Error::value(format!("unknown test label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptiveDataset {
    pub records: Vec<CaptiveRecord>,
    /// Per-record test tag, when the source provides one.
    pub labels: Option<Vec<TestLabel>>,
}

impl CaptiveDataset {
    pub fn new(records: Vec<CaptiveRecord>, labels: Option<Vec<TestLabel>>) -> Result<Self> {
        let ds = Self { records, labels };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::value("dataset is empty"));
        }
        if let Some(i) = self.records.iter().position(|r| !r.is_finite()) {
            return Err(Error::value(format!("record {i} has a non-finite value")));
        }
        let labels = match &self.labels {
            Some(l) if l.len() != self.records.len() => {
                return Err(Error::value(format!("{} labels for {} records", l.len(), self.records.len())))
            }
            Some(l) => l.clone(),
            None => vec![TestLabel::A; self.records.len()],
        };
        let mut last: std::collections::HashMap<TestLabel, f64> = Default::default();
        for (i, (rec, label)) in self.records.iter().zip(&labels).enumerate() {
            if let Some(&prev) = last.get(label) {
                if rec.t < prev {
                    return Err(Error::value(format!(
                        "record {i}: time {} decreases within test {}",
                        rec.t,
                        label.as_str()
                    )));
                }
            }
            last.insert(*label, rec.t);
        }
        Ok(())
    }

    pub fn concat(parts: Vec<CaptiveDataset>) -> Result<Self> {
        let all_labelled = parts.iter().all(|p| p.labels.is_some());
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            records.extend(p.records);
            if let Some(l) = p.labels {
                labels.extend(l);
            }
        }
        Self::new(records, all_labelled.then_some(labels))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Root-mean-square of the measured X, Y and N channels.
    pub fn channel_rms(&self) -> [f64; 3] {
        let n = self.records.len().max(1) as f64;
        let mut acc = [0.0; 3];
        for r in &self.records {
            for (a, f) in acc.iter_mut().zip(r.forces()) {
                *a += f * f;
            }
        }
        acc.map(|s| (s / n).sqrt())
    }

    /// Adds zero-mean Gaussian noise with standard deviation `sigma` to X, Y and N.
    pub fn add_noise(&mut self, sigma: [f64; 3], seed: u64) -> Result<()> {
        let dists = sigma
            .iter()
            .map(|&s| {
                if s.is_finite() && s >= 0.0 {
                    Ok(Normal::new(0.0, s).expect("valid std dev"))
                } else {
                    Err(Error::value(format!("noise std dev must be >= 0, got {s}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in &mut self.records {
            r.force_x += dists[0].sample(&mut rng);
            r.force_y += dists[1].sample(&mut rng);
            r.moment_n += dists[2].sample(&mut rng);
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = COLUMNS.to_vec();
        if self.labels.is_some() {
            header.push("test");
        }
        w.write_record(&header)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row: Vec<String> = r.values().iter().map(|v| v.to_string()).collect();
            if let Some(l) = &self.labels {
                row.push(l[i].as_str().to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        let index: Vec<usize> = COLUMNS
            .iter()
            .map(|c| headers.iter().position(|h| h == *c).ok_or_else(|| Error::Schema(c.to_string())))
            .collect::<Result<_>>()?;
        let label_col = headers.iter().position(|h| h == "test");

        let mut records = Vec::new();
        let mut labels = Vec::new();
        for row in rdr.records() {
            let row =
                row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
            let line = row.position().map_or(0, |p| p.line());
            let mut values = [0.0; 14];
            for (k, (&col, name)) in index.iter().zip(COLUMNS).enumerate() {
                let field = row.get(col).unwrap_or("");
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("column {name}: cannot parse {field:?}") })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, message: format!("column {name}: non-finite value {field:?}") });
                }
                values[k] = v;
            }
            records.push(CaptiveRecord::from_values(&values));
            if let Some(c) = label_col {
                let l = row
                    .get(c)
                    .unwrap_or("")
                    .parse::<TestLabel>()
                    .map_err(|e| Error::Parse { line, message: e.to_string() })?;
                labels.push(l);
            }
        }
        Self::new(records, label_col.map(|_| labels))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Disjoint train/validation index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
}

/// Uniformly shuffles `0..len` with a seeded generator and assigns the first
/// `round(fraction * len)` indices to training. Temporal order is discarded.
pub fn split(len: usize, fraction: f64, seed: u64) -> Result<SplitDataset> {
    if len == 0 {
        return Err(Error::value("cannot split an empty dataset"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::value(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // f64::round sends ties away from zero, i.e. toward the training set
    let n_train = (fraction * len as f64).round() as usize;
    let validation = idx.split_off(n_train);
    Ok(SplitDataset { train: idx, validation, seed })
}

/// Prescribed captive-test trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// `psi(t) = A sin(2πt/T)` at fixed lateral position `offset`, zero sway.
    HarmonicYaw { amplitude: f64, period: f64, offset: f64 },
    /// `y(t) = offset + A sin(2πt/T)` at zero heading, zero rate of turn.
    HarmonicSway { amplitude: f64, period: f64, offset: f64 },
}

impl Scenario {
    fn period(&self) -> f64 {
        match *self {
            Scenario::HarmonicYaw { period, .. } | Scenario::HarmonicSway { period, .. } => period,
        }
    }

    /// Kinematics at time `t` for surge speed `u0`, exact derivatives.
    pub fn sample(&self, t: f64, u0: f64) -> MotionSample {
        let omega = TAU / self.period();
        let (sin, cos) = (omega * t).sin_cos();
        let mut state = PlanarState { x: u0 * t, u: u0, ..Default::default() };
        let (mut vdot, mut rdot) = (0.0, 0.0);
        match *self {
            Scenario::HarmonicYaw { amplitude, offset, .. } => {
                state.y = offset;
                state.psi = amplitude * sin;
                state.r = amplitude * omega * cos;
                rdot = -amplitude * omega * omega * sin;
            }
            Scenario::HarmonicSway { amplitude, offset, .. } => {
                state.y = offset + amplitude * sin;
                state.v = amplitude * omega * cos;
                vdot = -amplitude * omega * omega * sin;
            }
        }
        MotionSample { state, udot: 0.0, vdot, rdot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub scenario: Scenario,
    pub u0: f64,
    pub duration: f64,
    pub dt: f64,
    /// Absolute noise standard deviation on (X, Y, N).
    pub noise_std: [f64; 3],
    pub seed: u64,
    pub label: TestLabel,
}

/// Generates a captive test whose forces come from the model with coefficients `truth`.
pub fn synthesize(
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    current: f64,
    truth: &CoefficientSet,
    spec: &SynthSpec,
) -> Result<CaptiveDataset> {
    if !(spec.dt > 0.0 && spec.duration >= spec.dt) {
        return Err(Error::value(format!("need 0 < dt <= duration, got dt={} duration={}", spec.dt, spec.duration)));
    }
    if spec.scenario.period().is_nan() || spec.scenario.period() <= 0.0 {
        return Err(Error::value("period must be positive"));
    }
    let n = (spec.duration / spec.dt).round() as usize;
    let records = (0..n)
        .map(|k| {
            let t = k as f64 * spec.dt;
            let m = spec.scenario.sample(t, spec.u0);
            let [fx, fy, mn] =
                hydro::predict_measured_forces(&m, truth, vessel, canal, current).map_err(|e| match e {
                    Error::Domain(source) => Error::RecordDomain { index: k, source },
                    other => other,
                })?;
            let s = m.state;
            Ok(CaptiveRecord {
                t,
                x: s.x,
                y: s.y,
                psi: s.psi,
                u: s.u,
                v: s.v,
                r: s.r,
                udot: m.udot,
                vdot: m.vdot,
                rdot: m.rdot,
                z: s.z,
                force_x: fx,
                force_y: fy,
                moment_n: mn,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = CaptiveDataset::new(records, Some(vec![spec.label; n]))?;
    if spec.noise_std.iter().any(|&s| s != 0.0) {
        ds.add_noise(spec.noise_std, spec.seed)?;
    }
    Ok(ds)
}

/// Three-test program shaped like the towing-tank campaign: two harmonic-yaw tests (A, B)
/// and one harmonic-sway test (C), each at its own constant tow speed and lateral offset.
pub fn captive_program(dt: f64) -> Vec<(TestLabel, Scenario, f64, f64)> {
    vec![
        (TestLabel::A, Scenario::HarmonicYaw { amplitude: 0.15, period: 20.0, offset: 1.5 }, 1.0, 60.0),
        (TestLabel::B, Scenario::HarmonicYaw { amplitude: 0.25, period: 15.0, offset: -1.2 }, 0.8, 60.0),
        (TestLabel::C, Scenario::HarmonicSway { amplitude: 0.8, period: 25.0, offset: 0.3 }, 1.2, 75.0),
    ]
    .into_iter()
    .map(|(l, s, u0, dur): (TestLabel, Scenario, f64, f64)| (l, s, u0, dur.max(dt)))
    .collect()
}

/// Synthesizes the full [`captive_program`]. With `noise_fraction > 0` Gaussian noise of
/// that fraction of each channel's RMS (over the whole program) is added.
pub fn synthesize_program(
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    current: f64,
    truth: &CoefficientSet,
    dt: f64,
    noise_fraction: f64,
    seed: u64,
) -> Result<CaptiveDataset> {
    let parts = captive_program(dt)
        .into_iter()
        .map(|(label, scenario, u0, duration)| {
            let spec = SynthSpec { scenario, u0, duration, dt, noise_std: [0.0; 3], seed, label };
            synthesize(vessel, canal, current, truth, &spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = CaptiveDataset::concat(parts)?;
    if noise_fraction > 0.0 {
        let sigma = ds.channel_rms().map(|rms| noise_fraction * rms);
        ds.add_noise(sigma, seed)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use approx::assert_relative_eq;

    const HEADER: &str = "t,x,y,psi,u,v,r,udot,vdot,rdot,z,X,Y,N\n";

    #[test]
    fn loads_well_formed_file() {
        let text = format!("{HEADER}0,0,0,0,1,0,0,0,0,0,0,-12.6,0,0\n0.1,0.1,0,0,1,0,0,0,0,0,0,-12.6,0,0\n0.2,0.2,0,0,1,0,0,0,0,0,0,-12.6,0,0\n");
        let ds = CaptiveDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[2].force_x, -12.6);
        assert!(ds.labels.is_none());
    }

    #[test]
    fn missing_column_names_it() {
        let text = "t,x,y,psi,u,v,r,udot,vdot,z,X,Y,N\n0,0,0,0,1,0,0,0,0,0,0,0,0\n";
        match CaptiveDataset::read_csv(text.as_bytes()) {
            Err(Error::Schema(c)) => assert_eq!(c, "rdot"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn nan_rejected_with_line() {
        let text = format!("{HEADER}0,0,0,0,1,0,0,0,0,0,0,0,0,0\n0.1,0,0,0,1,0,0,0,0,0,0,0,NaN,0\n");
        match CaptiveDataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('Y'), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad = format!("{HEADER}0,0,0,0,1,0,0,0,0,0,0,0,abc,0\n");
        assert!(matches!(CaptiveDataset::read_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn time_must_be_monotone_per_test() {
        let text = format!("{HEADER}1,0,0,0,1,0,0,0,0,0,0,0,0,0\n0,0,0,0,1,0,0,0,0,0,0,0,0,0\n");
        assert!(CaptiveDataset::read_csv(text.as_bytes()).is_err());
        let labelled = "t,x,y,psi,u,v,r,udot,vdot,rdot,z,X,Y,N,test\n1,0,0,0,1,0,0,0,0,0,0,0,0,0,A\n0,0,0,0,1,0,0,0,0,0,0,0,0,0,B\n";
        let ds = CaptiveDataset::read_csv(labelled.as_bytes()).unwrap();
        assert_eq!(ds.labels, Some(vec![TestLabel::A, TestLabel::B]));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split(10, 0.8, 42).unwrap();
        assert_eq!((s.train.len(), s.validation.len()), (8, 2));
        assert_eq!(s, split(10, 0.8, 42).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(split(100, 0.8, 1).unwrap().train, split(100, 0.8, 2).unwrap().train);
        // 0.8 * 7 = 5.6 -> 6; 0.5 * 5 = 2.5 -> 3 (ties go to train)
        assert_eq!(split(7, 0.8, 0).unwrap().train.len(), 6);
        assert_eq!(split(5, 0.5, 0).unwrap().train.len(), 3);
        assert!(split(0, 0.8, 0).is_err());
        assert!(split(5, 1.0, 0).is_err());
    }

    #[test]
    fn harmonic_yaw_kinematics() {
        let cfg = ModelConfig::dtc_canal();
        let spec = SynthSpec {
            scenario: Scenario::HarmonicYaw { amplitude: 0.2, period: 20.0, offset: 0.0 },
            u0: 1.0,
            duration: 60.0,
            dt: 0.05,
            noise_std: [0.0; 3],
            seed: 0,
            label: TestLabel::A,
        };
        let ds = synthesize(&cfg.vessel, &cfg.canal, 0.0, &CoefficientSet::reference_dtc(), &spec).unwrap();
        assert_eq!(ds.len(), 1200);
        let w = TAU / 20.0;
        for rec in ds.records.iter().step_by(37) {
            assert_relative_eq!(rec.r, 0.2 * w * (w * rec.t).cos(), epsilon = 1e-15);
            // finite-difference cross-check of the analytic derivative
            let h = 1e-5;
            let fd = 0.2 * ((w * (rec.t + h)).sin() - (w * (rec.t - h)).sin()) / (2.0 * h);
            assert_relative_eq!(rec.r, fd, epsilon = 1e-9);
            assert_eq!(rec.v, 0.0);
        }
    }

    #[test]
    fn zero_noise_forces_equal_model() {
        let cfg = ModelConfig::dtc_canal();
        let truth = CoefficientSet::reference_dtc();
        let ds = synthesize_program(&cfg.vessel, &cfg.canal, 0.0, &truth, 0.1, 0.0, 3).unwrap();
        for rec in &ds.records {
            let f = hydro::predict_measured_forces(&rec.motion(), &truth, &cfg.vessel, &cfg.canal, 0.0).unwrap();
            assert_eq!(f, rec.forces());
        }
    }

    #[test]
    fn centreline_sway_has_no_bank_term() {
        let cfg = ModelConfig::dtc_canal();
        let spec = SynthSpec {
            scenario: Scenario::HarmonicSway { amplitude: 0.0, period: 25.0, offset: 0.0 },
            u0: 1.0,
            duration: 10.0,
            dt: 0.1,
            noise_std: [0.0; 3],
            seed: 0,
            label: TestLabel::C,
        };
        let ds = synthesize(&cfg.vessel, &cfg.canal, 0.0, &CoefficientSet::reference_dtc(), &spec).unwrap();
        for rec in &ds.records {
            let bank = hydro::bank_regressors(&rec.state(), rec.u, &cfg.vessel, &cfg.canal).unwrap();
            assert_eq!((rec.y, bank.sway, bank.yaw), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn trajectory_outside_domain_is_error() {
        let cfg = ModelConfig::dtc_canal();
        let spec = SynthSpec {
            scenario: Scenario::HarmonicSway { amplitude: 3.4, period: 10.0, offset: 0.0 },
            u0: 1.0,
            duration: 10.0,
            dt: 0.1,
            noise_std: [0.0; 3],
            seed: 0,
            label: TestLabel::C,
        };
        let err = synthesize(&cfg.vessel, &cfg.canal, 0.0, &CoefficientSet::reference_dtc(), &spec).unwrap_err();
        assert!(matches!(err, Error::RecordDomain { .. }), "{err}");
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = ModelConfig::dtc_canal();
        let truth = CoefficientSet::reference_dtc();
        let a = synthesize_program(&cfg.vessel, &cfg.canal, 0.0, &truth, 0.1, 0.02, 9).unwrap();
        let b = synthesize_program(&cfg.vessel, &cfg.canal, 0.0, &truth, 0.1, 0.02, 9).unwrap();
        let c = synthesize_program(&cfg.vessel, &cfg.canal, 0.0, &truth, 0.1, 0.02, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
