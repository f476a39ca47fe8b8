//! Least squares with nonnegativity bounds on selected coordinates.
//!
//! Lawson–Hanson active-set iteration, generalised so that unconstrained coordinates
//! stay in the passive set throughout. Columns are scaled to unit norm before solving;
//! all-zero columns carry no information and are pinned to zero. Passive-set subproblems
//! are solved with a thresholded SVD, so rank-deficient directions take the
//! minimum-norm solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the dual vector used to decide optimality.
pub const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSolution {
    pub x: DVector<f64>,
    /// Sign-constrained coordinates held at their bound in the solution.
    pub at_bound: Vec<bool>,
    /// Columns that are identically zero and were pinned.
    pub zero_columns: Vec<bool>,
    pub iterations: usize,
}

/// Numerical rank threshold used throughout: `max(m, n) * eps * sigma_max`.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Minimum-norm least-squares solution of `a x ≈ b` via thresholded SVD.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let s = &svd.singular_values;
    let smax = s.max();
    let tol = rank_threshold(m, n, smax);
    let utb = u.transpose() * b;
    let mut y = DVector::zeros(s.len());
    for i in 0..s.len() {
        if s[i] > tol {
            y[i] = utb[i] / s[i];
        }
    }
    vt.transpose() * y
}

/// Minimises `‖a x − b‖²` subject to `x_j ≥ 0` wherever `nonneg[j]`.
pub fn solve_bounded(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> Result<BoundedSolution> {
    let (m, n) = a.shape();
    if nonneg.len() != n {
        return Err(Error::value(format!("{} bound flags for {n} columns", nonneg.len())));
    }
    if b.len() != m {
        return Err(Error::value(format!("target has {} rows, matrix has {m}", b.len())));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::value("non-finite entry in least-squares problem"));
    }

    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let zero_columns: Vec<bool> = norms.iter().map(|&nrm| nrm == 0.0 || nrm <= f64::EPSILON * max_norm).collect();
    let keep: Vec<usize> = (0..n).filter(|&j| !zero_columns[j]).collect();

    let mut x_full = DVector::zeros(n);
    if keep.is_empty() {
        let at_bound = nonneg.to_vec();
        return Ok(BoundedSolution { x: x_full, at_bound, zero_columns, iterations: 0 });
    }
    let mut at_bound = vec![false; n];

    let mut scaled = a.select_columns(&keep);
    for (k, &j) in keep.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / norms[j]);
    }
    let bounded: Vec<bool> = keep.iter().map(|&j| nonneg[j]).collect();
    let (x, iterations) = active_set(&scaled, b, &bounded)?;

    for (k, &j) in keep.iter().enumerate() {
        x_full[j] = x[k] / norms[j];
        at_bound[j] = bounded[k] && x[k] == 0.0;
    }
    for j in 0..n {
        if zero_columns[j] {
            at_bound[j] = false;
        }
    }
    Ok(BoundedSolution { x: x_full, at_bound, zero_columns, iterations })
}

fn subproblem(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sol = pinv_solve(&a.select_columns(&idx), b);
    let mut z = DVector::zeros(passive.len());
    for (k, &j) in idx.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}

fn active_set(a: &DMatrix<f64>, b: &DVector<f64>, bounded: &[bool]) -> Result<(DVector<f64>, usize)> {
    let n = bounded.len();
    let max_iter = 30 * (n + 1);
    let tol = BOUND_TOL * (a.transpose() * b).amax().max(f64::MIN_POSITIVE);
    let diverged = || Error::value("bounded least squares did not converge");

    let mut passive: Vec<bool> = bounded.iter().map(|&c| !c).collect();
    let mut x = subproblem(a, b, &passive);
    // candidates whose entry went straight back to the bound; retried after the next
    // successful step
    let mut refused = vec![false; n];
    let mut iterations = 0;

    loop {
        let w = a.transpose() * (b - a * &x);
        let entering = (0..n)
            .filter(|&j| bounded[j] && !passive[j] && !refused[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j_in) = entering else { break };
        passive[j_in] = true;

        for inner in 0.. {
            iterations += 1;
            if iterations > max_iter {
                return Err(diverged());
            }
            let z = subproblem(a, b, &passive);
            let blocking: Vec<usize> = (0..n).filter(|&j| bounded[j] && passive[j] && z[j] <= 0.0).collect();
            if blocking.is_empty() {
                x = z;
                refused.iter_mut().for_each(|r| *r = false);
                break;
            }
            if inner == 0 && blocking == [j_in] {
                passive[j_in] = false;
                refused[j_in] = true;
                break;
            }
            let (k_min, alpha) = blocking
                .iter()
                .map(|&j| (j, x[j] / (x[j] - z[j])))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .expect("blocking set is non-empty");
            let alpha = alpha.clamp(0.0, 1.0);
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
            }
            x[k_min] = 0.0;
            passive[k_min] = false;
            for j in 0..n {
                if bounded[j] && passive[j] && x[j] <= 0.0 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    Ok((x, iterations))
}

/// Largest violation of the optimality conditions, relative to `‖aᵀ b‖∞`.
///
/// Free or strictly positive coordinates need a zero gradient; coordinates held at zero
/// need the dual `aᵀ(b − a x)` to be non-positive.
pub fn kkt_residual(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool], x: &DVector<f64>) -> f64 {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let w = a.transpose() * (b - a * x);
    let scale = (a.transpose() * b)
        .iter()
        .zip(&norms)
        .map(|(v, &n)| if n > 0.0 { (v / n).abs() } else { 0.0 })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    (0..x.len())
        .map(|j| {
            if norms[j] == 0.0 {
                return 0.0;
            }
            let g = w[j] / norms[j];
            let viol = if nonneg[j] && x[j] <= 0.0 { g.max(0.0) + (-x[j]).max(0.0) } else { g.abs() };
            viol / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_force(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> (DVector<f64>, f64) {
        // enumerate which bounded coordinates are fixed at zero; keep the best feasible
        let n = nonneg.len();
        let bounded: Vec<usize> = (0..n).filter(|&j| nonneg[j]).collect();
        let mut best: Option<(DVector<f64>, f64)> = None;
        for mask in 0..(1u32 << bounded.len()) {
            let free: Vec<usize> = (0..n)
                .filter(|&j| match bounded.iter().position(|&k| k == j) {
                    Some(p) => mask & (1 << p) == 0,
                    None => true,
                })
                .collect();
            let sub = a.select_columns(&free);
            let sol = (sub.transpose() * &sub).try_inverse().map(|inv| inv * sub.transpose() * b);
            let Some(sol) = sol else { continue };
            let mut x = DVector::zeros(n);
            for (k, &j) in free.iter().enumerate() {
                x[j] = sol[k];
            }
            if (0..n).any(|j| nonneg[j] && x[j] < -1e-12) {
                continue;
            }
            let f = (b - a * &x).norm_squared();
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
        best.unwrap()
    }

    #[test]
    fn unconstrained_matches_normal_equations() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let sol = solve_bounded(&a, &b, &[false, false]).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_activates_for_negative_truth() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 1.0, -1.0, -3.0]);
        let sol = solve_bounded(&a, &b, &[false, true]).unwrap();
        assert_eq!(sol.x[1], 0.0);
        assert!(sol.at_bound[1]);
        assert_relative_eq!(sol.x[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_column_pinned() {
        let a = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, 2.0, 0.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let sol = solve_bounded(&a, &b, &[true, true]).unwrap();
        assert_eq!(sol.x[0], 0.0);
        assert!(sol.zero_columns[0]);
        assert_relative_eq!(sol.x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_columns_take_minimum_norm_split() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let sol = solve_bounded(&a, &b, &[false, false]).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = DMatrix::<f64>::zeros(3, 2);
        assert!(solve_bounded(&a, &DVector::zeros(3), &[true]).is_err());
        assert!(solve_bounded(&a, &DVector::zeros(2), &[true, true]).is_err());
    }

    #[test]
    fn matches_enumeration_oracle_on_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (m, n) = (12, 5);
            let a = DMatrix::from_fn(m, n, |_, j| rng.random_range(-1.0..1.0) * (1.0 + 10.0 * j as f64));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0));
            let nonneg: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            let sol = solve_bounded(&a, &b, &nonneg).unwrap();
            let (oracle, f_oracle) = brute_force(&a, &b, &nonneg);
            let f = (&b - &a * &sol.x).norm_squared();
            assert_relative_eq!(f, f_oracle, max_relative = 1e-9);
            assert!((&sol.x - &oracle).amax() < 1e-8 * (1.0 + oracle.amax()));
            assert!(kkt_residual(&a, &b, &nonneg, &sol.x) < 1e-8);
        }
    }
}
