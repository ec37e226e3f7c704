//! Closed correlation/response equations for the weight process.
//!
//! Given converged kernels, the two-time correlation `C(t,t')` and response
//! `R(t,t')` of the weight coordinate obey causal Volterra equations. Here
//! they are time-stepped in the exact second-moment discretization of the
//! Euler weight process (same grid, same explicit scheme), so the result
//! matches the [`super::simulate_w_path`] ensemble average up to Monte Carlo
//! error alone, not discretization error:
//!
//! * response: `R(j,j) = 1` (the delta kick absorbed over one step),
//!   `R(i+1,j) = R(i,j) + dt [ -lt_i R(i,j) + dt sum_{k in [j,i)} M_R(i,k) R(k,j) ]`,
//! * fluctuations: `Cu(i+1,j)` gains the memory term plus the noise cross
//!   covariance `dt sum_{l<j} M_C(i,l) R(j,l+1)`; the new diagonal is formed
//!   against the freshly advanced row so the `dt^2 M_C(i,i)` injection the
//!   discrete process receives each step is kept exactly,
//! * `C(i,j) = Cu(i,j) + m(i) m(j)` (the quenched magnetization component).
//!
//! `lt_i = lambda + lambda_hat(i)`.

use super::KernelSet;
use crate::matrix::SquareMatrix;

/// Integrate the correlation and response equations; returns `(C, R)`.
pub fn solve_dyson(kernels: &KernelSet, lambda: f64, init_variance: f64) -> (SquareMatrix, SquareMatrix) {
    let n = kernels.n_steps();
    let dt = kernels.grid.dt;
    let m_r = &kernels.m_r;
    let m_c = &kernels.m_c;

    let mut resp = SquareMatrix::zeros(n);
    resp[(0, 0)] = 1.0;
    for i in 0..n - 1 {
        let lt = lambda + kernels.lambda_hat[i];
        let mr_row = m_r.row(i);
        let (past, next) = resp.rows_split_mut(i + 1);
        for j in 0..=i {
            let mut memory = 0.0;
            for k in j..i {
                memory += mr_row[k] * past[k * n + j];
            }
            let prev = past[i * n + j];
            next[j] = prev + dt * (-lt * prev + dt * memory);
        }
        next[i + 1] = 1.0;
    }

    let mut cu = SquareMatrix::zeros(n);
    cu[(0, 0)] = init_variance;
    for i in 0..n - 1 {
        let lt = lambda + kernels.lambda_hat[i];
        let mr_row = m_r.row(i);
        let mc_row = m_c.row(i);
        // advance row i+1 against the old columns j <= i
        for j in 0..=i {
            let mut memory = 0.0;
            for k in 0..i {
                memory += mr_row[k] * cu[(k, j)];
            }
            let mut noise = 0.0;
            for l in 0..j {
                noise += mc_row[l] * resp[(j, l + 1)];
            }
            let prev = cu[(i, j)];
            cu[(i + 1, j)] = prev + dt * (-lt * prev + dt * (memory + noise));
        }
        // new diagonal against the advanced row (exact for the Euler process)
        let mut memory = 0.0;
        for k in 0..i {
            memory += mr_row[k] * cu[(i + 1, k)];
        }
        let mut noise = 0.0;
        for l in 0..=i {
            noise += mc_row[l] * resp[(i + 1, l + 1)];
        }
        let prev = cu[(i + 1, i)];
        cu[(i + 1, i + 1)] = prev + dt * (-lt * prev + dt * (memory + noise));
        // symmetrize the new row
        for j in 0..=i {
            cu[(j, i + 1)] = cu[(i + 1, j)];
        }
    }

    let mut c = cu;
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] += kernels.m[i] * kernels.m[j];
        }
    }
    (c, resp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmft::{KernelSet, TimeGrid};
    use approx::assert_relative_eq;

    #[test]
    fn free_process_is_flat() {
        let grid = TimeGrid::new(0.2, 12).unwrap();
        let kernels = KernelSet::initial(grid, 0.0, 0.0);
        let (c, resp) = solve_dyson(&kernels, 0.0, 0.7);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(c[(i, j)], 0.7);
                if j <= i {
                    assert_eq!(resp[(i, j)], 1.0);
                } else {
                    assert_eq!(resp[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn ridge_only_decay() {
        let grid = TimeGrid::new(0.2, 30).unwrap();
        let lambda = 0.4;
        let kernels = KernelSet::initial(grid, lambda, 0.0);
        let (c, resp) = solve_dyson(&kernels, lambda, 1.0);
        let shrink: f64 = 1.0 - 0.2 * lambda;
        for i in 0..30 {
            assert_relative_eq!(c[(i, i)], shrink.powi(2 * i as i32), max_relative = 1e-12);
            for j in 0..=i {
                assert_relative_eq!(
                    resp[(i, j)],
                    shrink.powi((i - j) as i32),
                    max_relative = 1e-12
                );
                // O(dt) from the exponential response
                let cont = (-lambda * 0.2 * (i - j) as f64).exp();
                assert!((resp[(i, j)] - cont).abs() < 0.05);
            }
        }
    }
}
