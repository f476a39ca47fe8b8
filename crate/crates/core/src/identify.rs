//! Physics-constrained identification of the force-model coefficients.
//!
//! The three candidate regression matrices are solved jointly:
//!
//! ```text
//! min (‖X − Θ_X a‖² + ‖Y − Θ_Y b‖² + ‖N − Θ_N c‖²) / M
//! s.t. b_rdot = c_vdot,
//!      a_udot, a_u, a_|u|u, b_vdot, b_v, b_|v|v, c_rdot, c_r, c_|r|r ≥ 0
//! ```
//!
//! The surge block is independent. The sway and yaw blocks share one unknown for the
//! cross added mass, so they are stacked into a single 13-unknown system and handed to the
//! bounded solver in [`crate::lsq`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{Block, CoefficientSet, SURGE_NONNEG, SWAY_NONNEG, YAW_NONNEG};
use crate::config::ModelConfig;
use crate::dataset::{CaptiveDataset, SplitDataset};
use crate::error::{Error, Result};
use crate::hydro::{self, CanalGeometry, VesselGeometry};
use crate::lsq;

/// Unknowns of the identification problem.
pub const N_UNKNOWNS: usize = 17;

/// Null-space weight above which a column is reported as involved in a rank deficiency.
const NULL_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub theta_x: DMatrix<f64>,
    pub theta_y: DMatrix<f64>,
    pub theta_n: DMatrix<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub n: DVector<f64>,
}

impl RegressionProblem {
    pub fn rows(&self) -> usize {
        self.x.len()
    }

    pub fn matrix(&self, block: Block) -> &DMatrix<f64> {
        match block {
            Block::X => &self.theta_x,
            Block::Y => &self.theta_y,
            Block::N => &self.theta_n,
        }
    }

    pub fn target(&self, block: Block) -> &DVector<f64> {
        match block {
            Block::X => &self.x,
            Block::Y => &self.y,
            Block::N => &self.n,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let pick = |v: &DVector<f64>| DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
        Self {
            theta_x: self.theta_x.select_rows(idx),
            theta_y: self.theta_y.select_rows(idx),
            theta_n: self.theta_n.select_rows(idx),
            x: pick(&self.x),
            y: pick(&self.y),
            n: pick(&self.n),
        }
    }

    /// Model predictions `(Θ_X a, Θ_Y b, Θ_N c)`.
    pub fn predict(&self, coeffs: &CoefficientSet) -> [DVector<f64>; 3] {
        [
            &self.theta_x * DVector::from_row_slice(&coeffs.a),
            &self.theta_y * DVector::from_row_slice(&coeffs.b),
            &self.theta_n * DVector::from_row_slice(&coeffs.c),
        ]
    }

    /// Sum of squared residuals over all three blocks, divided by the row count.
    pub fn objective(&self, coeffs: &CoefficientSet) -> f64 {
        let [px, py, pn] = self.predict(coeffs);
        let sse = (&self.x - px).norm_squared() + (&self.y - py).norm_squared() + (&self.n - pn).norm_squared();
        sse / self.rows().max(1) as f64
    }
}

/// Evaluates the candidate functions row by row.
pub fn build_matrices(
    dataset: &CaptiveDataset,
    vessel: &VesselGeometry,
    canal: &CanalGeometry,
    current: f64,
) -> Result<RegressionProblem> {
    let rows = dataset
        .records
        .par_iter()
        .enumerate()
        .map(|(index, rec)| {
            hydro::regressor_rows(&rec.motion(), vessel, canal, current).map_err(|e| match e {
                Error::Domain(source) => Error::RecordDomain { index, source },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = rows.len();
    let recs = &dataset.records;
    Ok(RegressionProblem {
        theta_x: DMatrix::from_fn(m, 3, |i, j| rows[i].surge[j]),
        theta_y: DMatrix::from_fn(m, 7, |i, j| rows[i].sway[j]),
        theta_n: DMatrix::from_fn(m, 7, |i, j| rows[i].yaw[j]),
        x: DVector::from_iterator(m, recs.iter().map(|r| r.force_x)),
        y: DVector::from_iterator(m, recs.iter().map(|r| r.force_y)),
        n: DVector::from_iterator(m, recs.iter().map(|r| r.moment_n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockMse {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl BlockMse {
    pub fn get(&self, block: Block) -> f64 {
        match block {
            Block::X => self.x,
            Block::Y => self.y,
            Block::N => self.n,
        }
    }
}

/// Mean squared residual per block.
pub fn validate(problem: &RegressionProblem, coeffs: &CoefficientSet) -> BlockMse {
    let m = problem.rows().max(1) as f64;
    let [px, py, pn] = problem.predict(coeffs);
    BlockMse {
        x: (&problem.x - px).norm_squared() / m,
        y: (&problem.y - py).norm_squared() / m,
        n: (&problem.n - pn).norm_squared() / m,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub block: Block,
    pub columns: Vec<String>,
    pub rank: usize,
    pub condition_number: f64,
    pub singular_values: Vec<f64>,
    /// Pearson correlation; pairs involving a constant column are reported as 0.
    pub correlation: Vec<Vec<f64>>,
    /// Columns with weight in the numerical null space.
    pub null_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub blocks: Vec<BlockDiagnostics>,
}

impl Diagnostics {
    pub fn block(&self, block: Block) -> &BlockDiagnostics {
        self.blocks.iter().find(|b| b.block == block).expect("all blocks present")
    }
}

pub fn correlation_matrix(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (m, n) = a.shape();
    let centred: Vec<DVector<f64>> = a
        .column_iter()
        .map(|c| {
            let mean = c.sum() / m.max(1) as f64;
            c.map(|v| v - mean)
        })
        .collect();
    let norms: Vec<f64> = centred.iter().map(|c| c.norm()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if norms[i] == 0.0 || norms[j] == 0.0 {
                        0.0
                    } else if i == j {
                        1.0
                    } else {
                        (centred[i].dot(&centred[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn block_diagnostics(a: &DMatrix<f64>, block: Block) -> BlockDiagnostics {
    let (m, n) = a.shape();
    // pad short matrices so the SVD exposes the full right singular basis
    let padded = if m < n { a.clone().resize_vertically(n, 0.0) } else { a.clone() };
    let svd = padded.svd(false, true);
    let s = svd.singular_values.clone();
    let vt = svd.v_t.expect("requested V^T");
    let smax = s.max();
    let tol = lsq::rank_threshold(m, n, smax);
    let rank = s.iter().filter(|&&v| v > tol).count();
    let smin = s.iter().cloned().filter(|&v| v > tol).fold(f64::INFINITY, f64::min);
    let condition_number = if rank == 0 { f64::INFINITY } else { smax / smin };

    let names = block.names();
    let mut null = vec![false; n];
    for (k, &sv) in s.iter().enumerate() {
        if sv <= tol {
            for j in 0..n {
                if vt[(k, j)].abs() > NULL_WEIGHT {
                    null[j] = true;
                }
            }
        }
    }
    let mut sorted: Vec<f64> = s.iter().copied().collect();
    sorted.sort_by(|p, q| q.total_cmp(p));
    BlockDiagnostics {
        block,
        columns: names.iter().map(|s| s.to_string()).collect(),
        rank,
        condition_number,
        singular_values: sorted,
        correlation: correlation_matrix(a),
        null_columns: (0..n).filter(|&j| null[j]).map(|j| names[j].to_string()).collect(),
    }
}

/// Correlations, numerical ranks and condition numbers of the three blocks.
pub fn diagnostics(problem: &RegressionProblem) -> Diagnostics {
    Diagnostics { blocks: Block::ALL.iter().map(|&b| block_diagnostics(problem.matrix(b), b)).collect() }
}

/// Non-fatal report of a rank-deficient block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankWarning {
    pub block: Block,
    pub columns: Vec<String>,
    /// The columns carry no information at all and were pinned to zero.
    pub pinned: bool,
}

impl std::fmt::Display for RankWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names = self.columns.join(", ");
        if self.pinned {
            write!(f, "{names} unidentifiable, pinned to 0")
        } else {
            write!(f, "{names} not separately identifiable in block {}, minimum-norm split", self.block.label())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub coefficients: CoefficientSet,
    /// Sign-constrained coefficients held at zero by the solver.
    pub active_bounds: Vec<String>,
    pub warnings: Vec<RankWarning>,
    pub diagnostics: Diagnostics,
    pub train_mse: BlockMse,
    pub objective: f64,
}

impl Identification {
    /// Whether `[[b_vdot, b_rdot], [c_vdot, c_rdot]]` is positive definite.
    pub fn added_mass_positive_definite(&self) -> bool {
        let c = &self.coefficients;
        c.b[0] > 0.0 && c.b[0] * c.c[1] - c.b[1] * c.c[0] > 0.0
    }
}

// Unknown layout of the stacked sway/yaw system.
const SHARED: usize = 1;
const SWAY_VARS: [usize; 7] = [0, SHARED, 2, 3, 4, 5, 6];
const YAW_VARS: [usize; 7] = [SHARED, 7, 8, 9, 10, 11, 12];
const COUPLED_UNKNOWNS: usize = 13;

fn coupled_system(problem: &RegressionProblem) -> (DMatrix<f64>, DVector<f64>, Vec<bool>) {
    let m = problem.rows();
    let mut a = DMatrix::zeros(2 * m, COUPLED_UNKNOWNS);
    for (k, &var) in SWAY_VARS.iter().enumerate() {
        a.view_mut((0, var), (m, 1)).copy_from(&problem.theta_y.column(k));
    }
    for (k, &var) in YAW_VARS.iter().enumerate() {
        a.view_mut((m, var), (m, 1)).copy_from(&problem.theta_n.column(k));
    }
    let mut b = DVector::zeros(2 * m);
    b.rows_mut(0, m).copy_from(&problem.y);
    b.rows_mut(m, m).copy_from(&problem.n);
    let mut nonneg = vec![false; COUPLED_UNKNOWNS];
    for (k, &var) in SWAY_VARS.iter().enumerate() {
        nonneg[var] |= SWAY_NONNEG[k];
    }
    for (k, &var) in YAW_VARS.iter().enumerate() {
        nonneg[var] |= YAW_NONNEG[k];
    }
    (a, b, nonneg)
}

/// Solves the constrained least-squares problem on all rows of `problem`.
pub fn solve(problem: &RegressionProblem) -> Result<Identification> {
    if problem.rows() < N_UNKNOWNS {
        return Err(Error::value(format!(
            "need at least {N_UNKNOWNS} rows to identify {N_UNKNOWNS} coefficients, got {}",
            problem.rows()
        )));
    }
    let surge = lsq::solve_bounded(&problem.theta_x, &problem.x, &SURGE_NONNEG)?;
    let (a, b, nonneg) = coupled_system(problem);
    let coupled = lsq::solve_bounded(&a, &b, &nonneg)?;

    let mut coeffs = CoefficientSet::zeros();
    for k in 0..3 {
        coeffs.a[k] = surge.x[k];
    }
    for k in 0..7 {
        coeffs.b[k] = coupled.x[SWAY_VARS[k]];
        coeffs.c[k] = coupled.x[YAW_VARS[k]];
    }

    let mut active_bounds = Vec::new();
    for (k, name) in Block::X.names().iter().enumerate() {
        if surge.at_bound[k] {
            active_bounds.push(name.to_string());
        }
    }
    for (vars, block) in [(SWAY_VARS, Block::Y), (YAW_VARS, Block::N)] {
        for (k, &var) in vars.iter().enumerate() {
            if coupled.at_bound[var] && block.nonneg()[k] {
                active_bounds.push(block.names()[k].to_string());
            }
        }
    }

    let diagnostics = diagnostics(problem);
    let mut warnings = Vec::new();
    for bd in &diagnostics.blocks {
        if bd.null_columns.is_empty() {
            continue;
        }
        let m = problem.matrix(bd.block);
        let (zero, rest): (Vec<String>, Vec<String>) = bd.null_columns.iter().cloned().partition(|name| {
            let j = bd.columns.iter().position(|c| c == name).unwrap();
            m.column(j).iter().all(|&v| v == 0.0)
        });
        for name in zero {
            warnings.push(RankWarning { block: bd.block, columns: vec![name], pinned: true });
        }
        if !rest.is_empty() {
            warnings.push(RankWarning { block: bd.block, columns: rest, pinned: false });
        }
    }

    Ok(Identification {
        objective: problem.objective(&coeffs),
        train_mse: validate(problem, &coeffs),
        coefficients: coeffs,
        active_bounds,
        warnings,
        diagnostics,
    })
}

/// Perturbs each feasible coefficient by `±1e-4 (1 + |value|)` and returns the first
/// perturbation that lowers the objective, if any. The shared cross added-mass term is
/// perturbed in both blocks at once.
pub fn perturbation_probe(problem: &RegressionProblem, coeffs: &CoefficientSet) -> Option<(String, f64)> {
    let base = problem.objective(coeffs);
    let flat: Vec<f64> = coeffs.a.iter().chain(&coeffs.b).chain(&coeffs.c).copied().collect();
    let nonneg: Vec<bool> = SURGE_NONNEG.iter().chain(&SWAY_NONNEG).chain(&YAW_NONNEG).copied().collect();
    let names: Vec<&str> = Block::ALL.iter().flat_map(|b| b.names().iter().copied()).collect();
    // b_rdot and c_vdot are one unknown
    let (b_rdot, c_vdot) = (4, 10);
    let rebuild = |v: &[f64]| CoefficientSet {
        a: std::array::from_fn(|k| v[k]),
        b: std::array::from_fn(|k| v[3 + k]),
        c: std::array::from_fn(|k| v[10 + k]),
    };
    for i in (0..flat.len()).filter(|&i| i != c_vdot) {
        let step = 1e-4 * (1.0 + flat[i].abs());
        for d in [step, -step] {
            if nonneg[i] && flat[i] + d < 0.0 {
                continue;
            }
            let mut trial = flat.clone();
            trial[i] += d;
            if i == b_rdot {
                trial[c_vdot] = trial[b_rdot];
            }
            let obj = problem.objective(&rebuild(&trial));
            if obj < base - 1e-12 * base.abs() {
                let name = if i == b_rdot { "b_rdot=c_vdot".to_string() } else { names[i].to_string() };
                return Some((name, base - obj));
            }
        }
    }
    None
}

/// Identification on the training rows of a split, scored on the validation rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub identification: Identification,
    pub validation_mse: BlockMse,
    pub train_rows: usize,
    pub validation_rows: usize,
}

pub fn fit(dataset: &CaptiveDataset, config: &ModelConfig, split: &SplitDataset) -> Result<FitReport> {
    let problem = build_matrices(dataset, &config.vessel, &config.canal, config.current)?;
    let train = problem.select_rows(&split.train);
    let val = problem.select_rows(&split.validation);
    let identification = solve(&train)?;
    let validation_mse = validate(&val, &identification.coefficients);
    Ok(FitReport { identification, validation_mse, train_rows: train.rows(), validation_rows: val.rows() })
}

/// JSON document written by identification and read by the attribution and simulation
/// stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientsDocument {
    pub coefficients: CoefficientSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SerializedConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerializedConfig {
    pub vessel: VesselGeometry,
    pub canal: CanalGeometry,
    pub current: f64,
}

impl From<&ModelConfig> for SerializedConfig {
    fn from(c: &ModelConfig) -> Self {
        Self { vessel: c.vessel, canal: c.canal, current: c.current }
    }
}

impl CoefficientsDocument {
    pub fn bare(coefficients: CoefficientSet) -> Self {
        Self { coefficients, fit: None, split_seed: None, split_fraction: None, config: None }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Reads either a full coefficients document or a bare coefficient object.
pub fn load_coefficients(path: impl AsRef<Path>) -> Result<CoefficientSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let coeffs: CoefficientSet = match value.get("coefficients") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    coeffs.check_finite()?;
    Ok(coeffs)
}
