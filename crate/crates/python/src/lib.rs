//! Python bindings. Results that are documents on the Rust side (identification reports,
//! Shapley reports, simulation outcomes) come back as plain dicts and lists.

use canalbank_core::coeffs::{Block, CoefficientSet};
use canalbank_core::config::ModelConfig;
use canalbank_core::dataset::{self, CaptiveDataset, COLUMNS};
use canalbank_core::error::Error;
use canalbank_core::hydro::{self, PlanarState};
use canalbank_core::identify::{self, CoefficientsDocument};
use canalbank_core::shapley::{self, ShapleyBlock, ShapleyReport};
use canalbank_core::sim::{self, SimConfig};
use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use serde_json::Value;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            PyList::new(py, items.iter().map(|i| to_py(py, i)).collect::<PyResult<Vec<_>>>()?)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, item) in map {
                d.set_item(k, to_py(py, item)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Vessel and canal geometry.
#[pyclass(name = "ModelConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelConfig(ModelConfig);

#[pymethods]
impl PyModelConfig {
    /// Model-scale DTC in a 7 m canal.
    #[staticmethod]
    fn dtc() -> Self {
        Self(ModelConfig::dtc_canal())
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ModelConfig::parse(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ModelConfig::load(path).map(Self).map_err(err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn current(&self) -> f64 {
        self.0.current
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.vessel.length
    }

    #[getter]
    fn beam(&self) -> f64 {
        self.0.vessel.beam
    }

    #[getter]
    fn width(&self) -> f64 {
        self.0.canal.width
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!("ModelConfig(L={}, B={}, W={})", c.vessel.length, c.vessel.beam, c.canal.width)
    }
}

fn config_or_default(config: Option<&PyModelConfig>) -> ModelConfig {
    config.map_or_else(ModelConfig::dtc_canal, |c| c.0)
}

/// The 17 force-model coefficients, addressed by name (`"b_|v|v"`, `"c_bank"`, ...).
#[pyclass(name = "Coefficients", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCoefficients(CoefficientSet);

#[pymethods]
impl PyCoefficients {
    #[staticmethod]
    fn reference() -> Self {
        Self(CoefficientSet::reference_dtc())
    }

    #[staticmethod]
    fn zeros() -> Self {
        Self(CoefficientSet::zeros())
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        identify::load_coefficients(path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_dict(values: std::collections::HashMap<String, f64>) -> PyResult<Self> {
        let v = serde_json::to_value(values).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let c: CoefficientSet = serde_json::from_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self(c))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        CoefficientsDocument::bare(self.0).save(path).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (name, value) in self.0.named() {
            d.set_item(name, value)?;
        }
        Ok(d)
    }

    fn __getitem__(&self, name: &str) -> PyResult<f64> {
        self.0.get(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    /// `(name, error)` of the worst coefficient relative to `truth`.
    fn max_relative_error(&self, truth: &PyCoefficients) -> (String, f64) {
        let (name, e) = self.0.max_relative_error(&truth.0);
        (name.to_string(), e)
    }

    fn __repr__(&self) -> String {
        let body: Vec<String> = self.0.named().iter().map(|(n, v)| format!("{n}={v}")).collect();
        format!("Coefficients({})", body.join(", "))
    }
}

/// Captive-test records.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(CaptiveDataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        CaptiveDataset::load_csv(path).map(Self).map_err(err)
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.0.save_csv(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Column name to list of values.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let recs = &self.0.records;
        for (k, name) in COLUMNS.iter().enumerate() {
            let col: Vec<f64> = recs
                .iter()
                .map(|r| {
                    [r.t, r.x, r.y, r.psi, r.u, r.v, r.r, r.udot, r.vdot, r.rdot, r.z, r.force_x, r.force_y, r.moment_n]
                        [k]
                })
                .collect();
            d.set_item(name, col)?;
        }
        Ok(d)
    }
}

/// Pressure-asymmetry factor at lateral offset `y` and heading `psi`.
#[pyfunction]
#[pyo3(signature = (y, psi=0.0, config=None))]
fn delta(y: f64, psi: f64, config: Option<&PyModelConfig>) -> PyResult<f64> {
    let c = config_or_default(config);
    let s = PlanarState { y, psi, ..Default::default() };
    hydro::delta(&s, &c.vessel, &c.canal).map_err(|e| err(e.into()))
}

/// `(Y_bank, N_bank)` at the given pose and water speed.
#[pyfunction]
#[pyo3(signature = (y, psi, u, b_bank, c_bank, config=None))]
fn bank_force(
    y: f64,
    psi: f64,
    u: f64,
    b_bank: f64,
    c_bank: f64,
    config: Option<&PyModelConfig>,
) -> PyResult<(f64, f64)> {
    let c = config_or_default(config);
    let s = PlanarState { y, psi, u, ..Default::default() };
    let f = hydro::bank_force(&s, hydro::relative_water_speed(&s, c.current), b_bank, c_bank, &c.vessel, &c.canal)
        .map_err(err)?;
    Ok((f.sway, f.yaw))
}

/// Three-test synthetic captive program generated from `truth`.
#[pyfunction]
#[pyo3(signature = (truth=None, config=None, dt=0.05, noise_fraction=0.0, seed=0))]
fn synthesize_program(
    truth: Option<&PyCoefficients>,
    config: Option<&PyModelConfig>,
    dt: f64,
    noise_fraction: f64,
    seed: u64,
) -> PyResult<PyDataset> {
    let c = config_or_default(config);
    let t = truth.map_or_else(CoefficientSet::reference_dtc, |t| t.0);
    dataset::synthesize_program(&c.vessel, &c.canal, c.current, &t, dt, noise_fraction, seed)
        .map(PyDataset)
        .map_err(err)
}

/// Fits the model on a seeded split and returns `(coefficients, report)`.
#[pyfunction(name = "identify")]
#[pyo3(signature = (data, config=None, train_fraction=0.8, seed=0))]
fn fit<'py>(
    py: Python<'py>,
    data: &PyDataset,
    config: Option<&PyModelConfig>,
    train_fraction: f64,
    seed: u64,
) -> PyResult<(PyCoefficients, Bound<'py, PyAny>)> {
    let c = config_or_default(config);
    let split = dataset::split(data.0.len(), train_fraction, seed).map_err(err)?;
    let report = py.detach(|| identify::fit(&data.0, &c, &split)).map_err(err)?;
    let mut doc = serialize(py, &report)?;
    let warnings: Vec<String> = report.identification.warnings.iter().map(|w| w.to_string()).collect();
    doc.cast::<PyDict>()?.set_item("warning_messages", warnings)?;
    doc = doc.into_any();
    Ok((PyCoefficients(report.identification.coefficients), doc))
}

/// Exact Shapley attribution for the chosen blocks (`"X"`, `"Y"`, `"N"` or `"all"`).
#[pyfunction]
#[pyo3(signature = (data, config=None, block="all", train_fraction=0.8, seed=0))]
fn shapley_values<'py>(
    py: Python<'py>,
    data: &PyDataset,
    config: Option<&PyModelConfig>,
    block: &str,
    train_fraction: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = config_or_default(config);
    let blocks: Vec<Block> =
        if block.eq_ignore_ascii_case("all") { Block::ALL.to_vec() } else { vec![block.parse().map_err(err)?] };
    let report = py
        .detach(|| -> Result<ShapleyReport, Error> {
            let p = identify::build_matrices(&data.0, &c.vessel, &c.canal, c.current)?;
            let s = dataset::split(data.0.len(), train_fraction, seed)?;
            let (train, val) = (p.select_rows(&s.train), p.select_rows(&s.validation));
            if blocks.len() == 3 {
                return shapley::attribute(&train, &val);
            }
            let r = ShapleyBlock::from_problems(&train, &val, blocks[0])?.attribute(Some(blocks[0]))?;
            Ok(ShapleyReport { blocks: vec![r] })
        })
        .map_err(err)?;
    serialize(py, &report)
}

fn sim_config(c: &ModelConfig, y0: f64, psi0: f64, u0: f64, dt: f64, t_max: f64, x_in: f64) -> SimConfig {
    SimConfig {
        dt,
        t_max,
        x_in,
        initial: PlanarState { y: y0, psi: psi0, u: u0, ..Default::default() },
        current: c.current,
        ..SimConfig::transit(&c.vessel, y0)
    }
}

/// One transit. Returns `{"outcome": {...}, "t": [...], "x": [...], ...}`.
#[pyfunction]
#[pyo3(signature = (coeffs, y0, config=None, psi0=0.0, u0=1.0, dt=0.01, t_max=600.0, x_in=12.6))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficients,
    y0: f64,
    config: Option<&PyModelConfig>,
    psi0: f64,
    u0: f64,
    dt: f64,
    t_max: f64,
    x_in: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config_or_default(config);
    let cfg = sim_config(&c, y0, psi0, u0, dt, t_max, x_in);
    let res = py.detach(|| sim::run(&cfg, &coeffs.0, &c.vessel, &c.canal)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("outcome", serialize(py, &res.outcome)?)?;
    let tr = &res.trajectory;
    let col = |f: &dyn Fn(&sim::TrajectorySample) -> f64| tr.iter().map(f).collect::<Vec<f64>>();
    d.set_item("t", col(&|p| p.t))?;
    d.set_item("x", col(&|p| p.state.x))?;
    d.set_item("y", col(&|p| p.state.y))?;
    d.set_item("psi", col(&|p| p.state.psi))?;
    d.set_item("u", col(&|p| p.state.u))?;
    d.set_item("v", col(&|p| p.state.v))?;
    d.set_item("r", col(&|p| p.state.r))?;
    d.set_item("Ybank", col(&|p| p.bank.sway))?;
    d.set_item("Nbank", col(&|p| p.bank.yaw))?;
    Ok(d)
}

/// Transits from each initial offset in `y0s`. Returns the points and the side flips.
#[pyfunction]
#[pyo3(signature = (coeffs, y0s, config=None, u0=1.0, dt=0.01, t_max=600.0, x_in=12.6))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficients,
    y0s: Vec<f64>,
    config: Option<&PyModelConfig>,
    u0: f64,
    dt: f64,
    t_max: f64,
    x_in: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config_or_default(config);
    let base = sim_config(&c, 0.0, 0.0, u0, dt, t_max, x_in);
    base.validate().map_err(err)?;
    let points = py.detach(|| sim::sweep_grounding(&y0s, &base, &coeffs.0, &c.vessel, &c.canal));
    let d = PyDict::new(py);
    d.set_item("side_flips_ys0", sim::side_flips(&points))?;
    d.set_item("points", serialize(py, &points)?)?;
    Ok(d)
}

#[pymodule]
fn canalbank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(bank_force, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_program, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(shapley_values, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_values_become_python_objects() {
        Python::initialize();
        Python::attach(|py| {
            let v = serde_json::json!({"a": [1, 2.5, null, true], "b": "x"});
            let obj = to_py(py, &v).unwrap();
            let d = obj.cast::<PyDict>().unwrap();
            let a = d.get_item("a").unwrap().unwrap();
            assert_eq!(a.len().unwrap(), 4);
            assert_eq!(a.get_item(1).unwrap().extract::<f64>().unwrap(), 2.5);
            assert!(a.get_item(2).unwrap().is_none());
            assert_eq!(d.get_item("b").unwrap().unwrap().extract::<String>().unwrap(), "x");
        });
    }
}
