//! Exact Shapley attribution of validation accuracy to candidate functions.
//!
//! A coalition `S` of columns of one block is worth the drop in validation MSE obtained by
//! refitting the block on the training rows with only the columns in `S` (sign constraints
//! kept, the cross added-mass equality dropped since the blocks are refit separately):
//!
//! ```text
//! v(S) = MSE_val(0) − MSE_val(fit on S),     v(∅) = 0
//! φ_j  = Σ_{S ⊆ F∖{j}} |S|! (n − |S| − 1)! / n! · (v(S ∪ {j}) − v(S))
//! ```
//!
//! All `2^n` coalitions are evaluated, in parallel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::Block;
use crate::error::{Error, Result};
use crate::identify::RegressionProblem;
use crate::lsq;

/// Exact enumeration beyond this many players is refused.
pub const MAX_PLAYERS: usize = 20;

#[derive(Debug, Clone)]
pub struct ShapleyBlock {
    pub names: Vec<String>,
    pub nonneg: Vec<bool>,
    train_a: DMatrix<f64>,
    train_b: DVector<f64>,
    val_a: DMatrix<f64>,
    val_b: DVector<f64>,
}

impl ShapleyBlock {
    pub fn new(
        names: Vec<String>,
        nonneg: Vec<bool>,
        train: (DMatrix<f64>, DVector<f64>),
        validation: (DMatrix<f64>, DVector<f64>),
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 || n > MAX_PLAYERS {
            return Err(Error::value(format!("need 1..={MAX_PLAYERS} players, got {n}")));
        }
        if nonneg.len() != n || train.0.ncols() != n || validation.0.ncols() != n {
            return Err(Error::value("column count mismatch"));
        }
        if train.0.nrows() != train.1.len() || validation.0.nrows() != validation.1.len() {
            return Err(Error::value("row count mismatch"));
        }
        if train.1.is_empty() || validation.1.is_empty() {
            return Err(Error::value("training and validation rows must be non-empty"));
        }
        Ok(Self { names, nonneg, train_a: train.0, train_b: train.1, val_a: validation.0, val_b: validation.1 })
    }

    pub fn from_problems(train: &RegressionProblem, validation: &RegressionProblem, block: Block) -> Result<Self> {
        Self::new(
            block.names().iter().map(|s| s.to_string()).collect(),
            block.nonneg().to_vec(),
            (train.matrix(block).clone(), train.target(block).clone()),
            (validation.matrix(block).clone(), validation.target(block).clone()),
        )
    }

    pub fn players(&self) -> usize {
        self.names.len()
    }

    /// Validation MSE of the all-zero model.
    pub fn baseline_mse(&self) -> f64 {
        self.val_b.norm_squared() / self.val_b.len() as f64
    }

    /// `v(S)` for the coalition encoded by the bits of `mask`.
    pub fn coalition_value(&self, mask: u32) -> Result<f64> {
        if mask == 0 {
            return Ok(0.0);
        }
        let cols: Vec<usize> = (0..self.players()).filter(|&j| mask & (1 << j) != 0).collect();
        let a = self.train_a.select_columns(&cols);
        let nonneg: Vec<bool> = cols.iter().map(|&j| self.nonneg[j]).collect();
        let fit = lsq::solve_bounded(&a, &self.train_b, &nonneg)?;
        let pred = self.val_a.select_columns(&cols) * fit.x;
        let mse = (&self.val_b - pred).norm_squared() / self.val_b.len() as f64;
        Ok(self.baseline_mse() - mse)
    }

    /// Values of all `2^n` coalitions, indexed by bitmask.
    pub fn all_values(&self) -> Result<Vec<f64>> {
        (0..1u32 << self.players()).into_par_iter().map(|mask| self.coalition_value(mask)).collect()
    }

    pub fn attribute(&self, block: Option<Block>) -> Result<ShapleyResult> {
        let values = self.all_values()?;
        let phi = shapley_from_values(self.players(), &values);
        Ok(ShapleyResult {
            block,
            names: self.names.clone(),
            normalized: normalize(&phi),
            phi,
            grand_value: values[values.len() - 1],
            baseline_mse: self.baseline_mse(),
        })
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Shapley values of an `n`-player game given `v` for every bitmask.
pub fn shapley_from_values(n: usize, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), 1 << n, "one value per coalition");
    let f = factorials(n);
    let weight: Vec<f64> = (0..n).map(|s| f[s] * f[n - s - 1] / f[n]).collect();
    (0..n)
        .map(|j| {
            let bit = 1usize << j;
            (0..values.len())
                .filter(|s| s & bit == 0)
                .map(|s| weight[s.count_ones() as usize] * (values[s | bit] - values[s]))
                .sum()
        })
        .collect()
}

/// `φ / Σ|φ|`, or all zeros when every value vanishes.
pub fn normalize(phi: &[f64]) -> Vec<f64> {
    let l1: f64 = phi.iter().map(|p| p.abs()).sum();
    if l1 == 0.0 {
        vec![0.0; phi.len()]
    } else {
        phi.iter().map(|p| p / l1).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub block: Option<Block>,
    pub names: Vec<String>,
    pub phi: Vec<f64>,
    pub normalized: Vec<f64>,
    /// `v(F)`, equal to `Σ φ` by efficiency.
    pub grand_value: f64,
    pub baseline_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub blocks: Vec<ShapleyResult>,
}

impl ShapleyReport {
    pub fn block(&self, block: Block) -> Option<&ShapleyResult> {
        self.blocks.iter().find(|b| b.block == Some(block))
    }

    /// Fixed-width table, one row per candidate function.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<6} {:<10} {:>14} {:>10}\n", "block", "term", "phi", "phi_norm");
        for b in &self.blocks {
            let label = b.block.map_or("-", |b| b.label());
            for ((name, phi), norm) in b.names.iter().zip(&b.phi).zip(&b.normalized) {
                out.push_str(&format!("{label:<6} {name:<10} {phi:>14.6e} {norm:>10.4}\n"));
            }
        }
        out
    }
}

/// Attribution for all three blocks.
pub fn attribute(train: &RegressionProblem, validation: &RegressionProblem) -> Result<ShapleyReport> {
    let blocks = Block::ALL
        .iter()
        .map(|&b| ShapleyBlock::from_problems(train, validation, b)?.attribute(Some(b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapleyReport { blocks })
}
