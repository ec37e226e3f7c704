//! Infinite-dimensional limit of the training dynamics.
//!
//! A single weight coordinate's data overlap follows the effective process
//!
//! ```text
//! h(t+dt) = h(t) + dt [ -(lambda + lambda_hat(t)) h(t)
//!                       - sqrt(delta) s(t) Lambda'(y, r(t))
//!                       + sum_{t'<t} dt M_R(t,t') h(t') + xi(t) ],
//! r(t) = sqrt(delta) h(t) + m(t) (c + sqrt(delta) h0),
//! ```
//!
//! driven by the mask chain `s(t)`, Gaussian noise with covariance
//! `<xi(t) xi(t')> = M_C(t,t')` and a quenched standard Gaussian `h0`. The
//! kernels `lambda_hat, mu, M_C, M_R` are themselves ensemble averages over
//! the process, so [`solver::solve_dmft`] iterates path sampling and damped
//! kernel updates to a fixed point. The time step equals the learning rate,
//! matching the discrete trainer step for step.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::matrix::SquareMatrix;
use crate::simulator::MaskScheme;

mod dyson;
mod noise;
mod path;
mod solver;

pub use dyson::solve_dyson;
pub use noise::{sample_noise, NoiseFactor};
pub use path::{
    draw_path_randoms, integrate_magnetization, sample_mask_path, simulate_h_path, simulate_path,
    simulate_response_path, simulate_w_path, update_kernels, EffectivePath, HPath,
    KernelAccumulator, PathInputs, PathRandoms,
};
pub use solver::{solve_dmft, Diagnostics, DmftSolution};

#[derive(Debug, Clone, PartialEq)]
pub enum DmftError {
    InvalidConfig(String),
    /// Noise covariance failed to factorize even after jitter retries.
    NonPsdKernel { attempts: usize },
    /// A path or kernel became non-finite (step size too large).
    Diverged { iteration: usize },
    /// Warm-start kernels live on a different grid.
    GridMismatch,
}

impl fmt::Display for DmftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DmftError::InvalidConfig(msg) => write!(f, "invalid solver configuration: {msg}"),
            DmftError::NonPsdKernel { attempts } => write!(
                f,
                "noise kernel is not positive semidefinite (factorization failed after {attempts} jitter attempts)"
            ),
            DmftError::Diverged { iteration } => write!(
                f,
                "effective process diverged at iteration {iteration}; reduce the time step"
            ),
            DmftError::GridMismatch => write!(f, "kernel set does not match the solver time grid"),
        }
    }
}

impl core::error::Error for DmftError {}

/// Uniform time grid; point `i` sits at `t = i dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self, DmftError> {
        if !(dt > 0.0) {
            return Err(DmftError::InvalidConfig(alloc::format!(
                "time step must be > 0, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(DmftError::InvalidConfig("grid needs at least one point".into()));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid covering `[0, horizon]` with spacing `dt`.
    pub fn from_horizon(dt: f64, horizon: f64) -> Result<Self, DmftError> {
        let updates = crate::math::round(horizon / dt);
        if !(updates >= 0.0) {
            return Err(DmftError::InvalidConfig(alloc::format!(
                "horizon must be nonnegative, got {horizon}"
            )));
        }
        Self::new(dt, updates as usize + 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// Discretized order parameters of the effective process.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub grid: TimeGrid,
    /// Noise covariance, symmetric PSD.
    pub m_c: SquareMatrix,
    /// Memory kernel, strictly lower triangular (zero on and above the
    /// diagonal; the equal-time response is carried by `lambda_hat`).
    pub m_r: SquareMatrix,
    /// Self-generated regularization `alpha delta <s Lambda''>`.
    pub lambda_hat: Vec<f64>,
    /// Magnetization drive `alpha <s (c + sqrt(delta) h0) Lambda'>`.
    pub mu: Vec<f64>,
    /// Magnetization, integrated from `mu`.
    pub m: Vec<f64>,
}

impl KernelSet {
    /// Zero kernels (free process) with the magnetization started at `m0`
    /// and integrated under the bare ridge decay.
    pub fn initial(grid: TimeGrid, lambda: f64, m0: f64) -> Self {
        let n = grid.n_steps;
        let zeros = alloc::vec![0.0; n];
        let m = path::integrate_magnetization(&zeros, lambda, m0, &grid);
        Self {
            grid,
            m_c: SquareMatrix::zeros(n),
            m_r: SquareMatrix::zeros(n),
            lambda_hat: zeros.clone(),
            mu: zeros,
            m,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn is_finite(&self) -> bool {
        self.m_c.is_finite()
            && self.m_r.is_finite()
            && self.lambda_hat.iter().all(|v| v.is_finite())
            && self.mu.iter().all(|v| v.is_finite())
            && self.m.iter().all(|v| v.is_finite())
    }

    /// Largest relative change against `other`, component by component:
    /// `max_k |new_k - old_k|_inf / (|old_k|_inf + 1e-12)`.
    pub fn relative_change(&self, old: &KernelSet) -> f64 {
        fn vec_change(new: &[f64], old: &[f64]) -> f64 {
            let diff = new
                .iter()
                .zip(old)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            let scale = old.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            diff / (scale + 1e-12)
        }
        let mc = self.m_c.max_abs_diff(&old.m_c) / (old.m_c.max_abs() + 1e-12);
        let mr = self.m_r.max_abs_diff(&old.m_r) / (old.m_r.max_abs() + 1e-12);
        mc.max(mr)
            .max(vec_change(&self.lambda_hat, &old.lambda_hat))
            .max(vec_change(&self.mu, &old.mu))
            .max(vec_change(&self.m, &old.m))
    }
}

/// Mask process used when sampling effective paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    FullBatch,
    /// Fresh i.i.d. Bernoulli(b) per grid point (discretization that mirrors
    /// sampling with replacement).
    SgdInspired,
    /// Two-state chain with the trainer's flip probabilities.
    PersistentSgd,
}

impl MaskMode {
    pub fn from_scheme(scheme: MaskScheme) -> Self {
        match scheme {
            MaskScheme::FullBatch => MaskMode::FullBatch,
            MaskScheme::Sgd => MaskMode::SgdInspired,
            MaskScheme::PersistentSgd => MaskMode::PersistentSgd,
        }
    }
}

/// Fixed-point solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub n_paths: usize,
    /// Update mixing factor in (0, 1]; 1 disables damping.
    pub damping: f64,
    /// Convergence threshold on the relative kernel change.
    pub tol: f64,
    pub max_iters: usize,
    pub mask_mode: MaskMode,
    /// Magnetization at t = 0. `None` resolves to 0 for the two-cluster
    /// model and to the finite-d average `sqrt(2 R / (pi d))` for the
    /// three-cluster one, whose symmetry the drive alone cannot break.
    pub m0: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            damping: 0.5,
            tol: 1e-3,
            max_iters: 100,
            mask_mode: MaskMode::FullBatch,
            m0: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), DmftError> {
        if self.n_paths == 0 {
            return Err(DmftError::InvalidConfig("n_paths must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(DmftError::InvalidConfig(alloc::format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(DmftError::InvalidConfig(alloc::format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(DmftError::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        let g = TimeGrid::from_horizon(0.2, 20.0).unwrap();
        assert_eq!(g.n_steps, 101);
        assert!((g.time(100) - 20.0).abs() < 1e-12);
        assert!(TimeGrid::new(0.0, 5).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
    }

    #[test]
    fn initial_kernels_decay_m_under_ridge() {
        let grid = TimeGrid::new(0.5, 4).unwrap();
        let k = KernelSet::initial(grid, 0.2, 1.0);
        assert_eq!(k.m[0], 1.0);
        assert_eq!(k.m[1], 0.9);
        assert_eq!(k.m[2], 0.81);
        assert_eq!(k.lambda_hat, alloc::vec![0.0; 4]);
    }

    #[test]
    fn relative_change_scales() {
        let grid = TimeGrid::new(0.1, 3).unwrap();
        let a = KernelSet::initial(grid, 0.0, 0.0);
        let mut b = a.clone();
        b.lambda_hat[1] = 2e-12;
        // zero reference: change is measured against the floor
        assert!(b.relative_change(&a) > 1.0);
        let mut c = a.clone();
        c.lambda_hat = alloc::vec![1.0; 3];
        let mut d = c.clone();
        d.lambda_hat[2] = 1.01;
        assert!((d.relative_change(&c) - 0.01).abs() < 1e-12);
    }
}
