//! Effective-process paths: the scalar overlap process, its linear response,
//! the companion weight process, and the ensemble kernel estimates.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DmftError, KernelSet, MaskMode, TimeGrid};
use crate::math;
use crate::matrix::{axpy, dot, SquareMatrix};
use crate::model::{LossModel, MixtureSpec};
use crate::simulator::persistent_flip_probs;

/// Raw per-path randomness, independent of the kernels. Paths are redrawn
/// from the same stream at every fixed-point iteration, so the iteration map
/// is deterministic in the ensemble and converges below the Monte Carlo
/// noise floor instead of rattling at it.
#[derive(Debug, Clone)]
pub struct PathRandoms {
    /// Cluster coefficient in {-1, 0, +1}.
    pub c: f64,
    /// Label of `c`.
    pub y: f64,
    /// Quenched standard Gaussian multiplying the magnetization.
    pub h0: f64,
    /// Initial overlap, N(0, R).
    pub h_init: f64,
    /// Initial weight coordinate, N(0, R).
    pub w_init: f64,
    /// Standard normals behind the correlated noise path.
    pub z: Vec<f64>,
    /// Mask path s(t) in {0, 1}.
    pub s: Vec<f64>,
}

/// Draw order is fixed (coefficient, quenched Gaussian, initial conditions,
/// noise normals, then the mask) so that runs with different mask modes
/// share every other draw.
pub fn draw_path_randoms<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    init_variance: f64,
    mask_mode: MaskMode,
    batch_fraction: f64,
    tau: f64,
    grid: &TimeGrid,
    rng: &mut R,
) -> PathRandoms {
    let c = spec.sample_coefficient(rng);
    let y = spec.label_of(c).expect("sampled coefficient is valid") as f64;
    let h0: f64 = rng.sample(StandardNormal);
    let scale = math::sqrt(init_variance);
    let h_init = scale * rng.sample::<f64, _>(StandardNormal);
    let w_init = scale * rng.sample::<f64, _>(StandardNormal);
    let z: Vec<f64> = (0..grid.n_steps).map(|_| rng.sample(StandardNormal)).collect();
    let s = sample_mask_path(mask_mode, batch_fraction, tau, grid, rng);
    PathRandoms {
        c: c as f64,
        y,
        h0,
        h_init,
        w_init,
        z,
        s,
    }
}

/// One mask path on the grid; scalar version of the trainer's mask chains.
pub fn sample_mask_path<R: Rng + ?Sized>(
    mode: MaskMode,
    batch_fraction: f64,
    tau: f64,
    grid: &TimeGrid,
    rng: &mut R,
) -> Vec<f64> {
    let n = grid.n_steps;
    match mode {
        MaskMode::FullBatch => vec![1.0; n],
        MaskMode::SgdInspired => (0..n)
            .map(|_| {
                if rng.gen::<f64>() < batch_fraction {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
        MaskMode::PersistentSgd => {
            let (p_on, p_off) = persistent_flip_probs(batch_fraction, tau, grid.dt);
            let mut s = Vec::with_capacity(n);
            let mut active = rng.gen::<f64>() < batch_fraction;
            s.push(if active { 1.0 } else { 0.0 });
            for _ in 1..n {
                let u: f64 = rng.gen();
                if active {
                    if u < p_off {
                        active = false;
                    }
                } else if u < p_on {
                    active = true;
                }
                s.push(if active { 1.0 } else { 0.0 });
            }
            s
        }
    }
}

/// Inputs of a single effective path (noise already correlated).
#[derive(Debug, Clone, Copy)]
pub struct PathInputs<'a> {
    pub c: f64,
    pub y: f64,
    pub h0: f64,
    pub h_init: f64,
    pub s: &'a [f64],
    pub xi: &'a [f64],
}

/// Overlap trajectory with its argument and loss derivatives along the way.
#[derive(Debug, Clone)]
pub struct HPath {
    pub h: Vec<f64>,
    /// `r(t) = sqrt(delta) h(t) + m(t) (c + sqrt(delta) h0)`.
    pub r: Vec<f64>,
    pub lam_value: Vec<f64>,
    pub lam_first: Vec<f64>,
    pub lam_second: Vec<f64>,
}

/// Explicit Euler integration of the effective process.
pub fn simulate_h_path(
    kernels: &KernelSet,
    lambda: f64,
    delta: f64,
    loss: &LossModel,
    inputs: &PathInputs<'_>,
) -> Result<HPath, DmftError> {
    let n = kernels.n_steps();
    let dt = kernels.grid.dt;
    debug_assert_eq!(inputs.s.len(), n);
    debug_assert_eq!(inputs.xi.len(), n);
    let sqrt_delta = math::sqrt(delta);
    let quenched = inputs.c + sqrt_delta * inputs.h0;

    let mut h = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut lam_value = vec![0.0; n];
    let mut lam_first = vec![0.0; n];
    let mut lam_second = vec![0.0; n];
    h[0] = inputs.h_init;
    for i in 0..n {
        r[i] = sqrt_delta * h[i] + kernels.m[i] * quenched;
        let der = loss.lambda_derivs(inputs.y, r[i]);
        lam_value[i] = der.value;
        lam_first[i] = der.first;
        lam_second[i] = der.second;
        if i + 1 < n {
            let memory = dot(&kernels.m_r.row(i)[..i], &h[..i]);
            let drift = -(lambda + kernels.lambda_hat[i]) * h[i]
                - sqrt_delta * inputs.s[i] * der.first
                + dt * memory
                + inputs.xi[i];
            h[i + 1] = h[i] + dt * drift;
            if !h[i + 1].is_finite() {
                return Err(DmftError::Diverged { iteration: i + 1 });
            }
        }
    }
    Ok(HPath {
        h,
        r,
        lam_value,
        lam_first,
        lam_second,
    })
}

/// Linear response `g(t, t') = dh(t)/dY(t')` of the realized path to a kick
/// `Y(t')` inside the loss argument, `Lambda'(y, r(t') - Y(t'))`.
///
/// The kick seeds one step after its insertion,
/// `g(t'+dt, t') = dt sqrt(delta) s(t') Lambda''(t')`, and then propagates
/// through the linearized dynamics
/// `g(t+dt,t') = g(t,t') + dt [ -(lambda + lambda_hat(t) ) g
///               - delta s(t) Lambda''(t) g + sum_u dt M_R(t,u) g(u,t') ]`.
/// Strictly causal: `g(t,t') = 0` for `t <= t'`.
pub fn simulate_response_path(
    kernels: &KernelSet,
    lambda: f64,
    delta: f64,
    s: &[f64],
    hp: &HPath,
) -> Result<SquareMatrix, DmftError> {
    let n = kernels.n_steps();
    let dt = kernels.grid.dt;
    let dt2 = dt * dt;
    let sqrt_delta = math::sqrt(delta);
    let mut g = SquareMatrix::zeros(n);
    let mut acc = vec![0.0; n];
    for i in 0..n - 1 {
        let local = 1.0
            - dt * (lambda + kernels.lambda_hat[i] + delta * s[i] * hp.lam_second[i]);
        let (past, next_row) = g.rows_split_mut(i + 1);
        // memory contribution sum_{u<i} M_R(i,u) g(u, j), nonzero for j < u
        let mr_row = kernels.m_r.row(i);
        acc[..i].fill(0.0);
        for u in 1..i {
            let coeff = mr_row[u];
            if coeff != 0.0 {
                axpy(&mut acc[..u], coeff, &past[u * n..u * n + u]);
            }
        }
        let prev_row = &past[i * n..i * n + n];
        for j in 0..i {
            next_row[j] = local * prev_row[j] + dt2 * acc[j];
        }
        next_row[i] = dt * sqrt_delta * s[i] * hp.lam_second[i];
    }
    if !g.is_finite() {
        return Err(DmftError::Diverged { iteration: n });
    }
    Ok(g)
}

/// Companion weight-coordinate process sharing the path's noise and
/// quenched Gaussian; its ensemble mean square is the self-overlap
/// `q(t) = C(t,t)`.
pub fn simulate_w_path(
    kernels: &KernelSet,
    lambda: f64,
    h0: f64,
    w_init: f64,
    xi: &[f64],
) -> Result<Vec<f64>, DmftError> {
    let n = kernels.n_steps();
    let dt = kernels.grid.dt;
    let mut w = vec![0.0; n];
    w[0] = w_init;
    for i in 0..n - 1 {
        let mr_row = &kernels.m_r.row(i)[..i];
        let memory = dot(mr_row, &w[..i]) - h0 * dot(mr_row, &kernels.m[..i]);
        let drift = -(lambda + kernels.lambda_hat[i]) * w[i]
            + dt * memory
            + xi[i]
            + h0 * (kernels.lambda_hat[i] * kernels.m[i] - kernels.mu[i]);
        w[i + 1] = w[i] + dt * drift;
        if !w[i + 1].is_finite() {
            return Err(DmftError::Diverged { iteration: i + 1 });
        }
    }
    Ok(w)
}

/// Euler integration of `m' = -lambda m - mu`, `m(0) = m0`.
pub fn integrate_magnetization(mu: &[f64], lambda: f64, m0: f64, grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps;
    debug_assert_eq!(mu.len(), n);
    let dt = grid.dt;
    let mut m = vec![0.0; n];
    m[0] = m0;
    for i in 0..n - 1 {
        m[i + 1] = m[i] + dt * (-lambda * m[i] - mu[i]);
    }
    m
}

/// Fully realized effective path.
#[derive(Debug, Clone)]
pub struct EffectivePath {
    pub c: f64,
    pub y: f64,
    pub h0: f64,
    pub s: Vec<f64>,
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub lam_value: Vec<f64>,
    pub lam_first: Vec<f64>,
    pub lam_second: Vec<f64>,
    /// Response matrix; `None` when only observables are needed.
    pub g: Option<SquareMatrix>,
    pub w: Vec<f64>,
}

/// Simulate one path end to end from its raw randomness.
pub fn simulate_path(
    kernels: &KernelSet,
    lambda: f64,
    delta: f64,
    loss: &LossModel,
    randoms: &PathRandoms,
    noise: &super::NoiseFactor,
    with_response: bool,
) -> Result<EffectivePath, DmftError> {
    let xi = noise.apply(&randoms.z);
    let inputs = PathInputs {
        c: randoms.c,
        y: randoms.y,
        h0: randoms.h0,
        h_init: randoms.h_init,
        s: &randoms.s,
        xi: &xi,
    };
    let hp = simulate_h_path(kernels, lambda, delta, loss, &inputs)?;
    let g = if with_response {
        Some(simulate_response_path(kernels, lambda, delta, &randoms.s, &hp)?)
    } else {
        None
    };
    let w = simulate_w_path(kernels, lambda, randoms.h0, randoms.w_init, &xi)?;
    Ok(EffectivePath {
        c: randoms.c,
        y: randoms.y,
        h0: randoms.h0,
        s: randoms.s.clone(),
        xi,
        h: hp.h,
        r: hp.r,
        lam_value: hp.lam_value,
        lam_first: hp.lam_first,
        lam_second: hp.lam_second,
        g,
        w,
    })
}

/// Running ensemble sums for the kernel estimates and observables.
/// Sums carry no prefactors; [`KernelAccumulator::finalize`] applies them.
#[derive(Debug, Clone)]
pub struct KernelAccumulator {
    pub n_paths: usize,
    lambda_hat: Vec<f64>,
    mu: Vec<f64>,
    m_c: SquareMatrix,
    m_r: SquareMatrix,
    loss: Vec<f64>,
    wrong: Vec<f64>,
    q: Vec<f64>,
    v_scratch: Vec<f64>,
}

/// Kernel estimates scaled for a mixture at load `alpha`, noise `delta`.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub lambda_hat: Vec<f64>,
    pub mu: Vec<f64>,
    pub m_c: SquareMatrix,
    pub m_r: SquareMatrix,
}

impl KernelAccumulator {
    pub fn zeros(n: usize, delta: f64) -> Self {
        let _ = delta;
        Self {
            n_paths: 0,
            lambda_hat: vec![0.0; n],
            mu: vec![0.0; n],
            m_c: SquareMatrix::zeros(n),
            m_r: SquareMatrix::zeros(n),
            loss: vec![0.0; n],
            wrong: vec![0.0; n],
            q: vec![0.0; n],
            v_scratch: vec![0.0; n],
        }
    }

    /// Fold one path into the sums.
    pub fn add(&mut self, path: &EffectivePath, delta: f64, loss_model: &LossModel) {
        let n = self.lambda_hat.len();
        debug_assert_eq!(path.r.len(), n);
        let sqrt_delta = math::sqrt(delta);
        let quenched = path.c + sqrt_delta * path.h0;
        for i in 0..n {
            let s = path.s[i];
            self.lambda_hat[i] += s * path.lam_second[i];
            self.mu[i] += s * quenched * path.lam_first[i];
            self.loss[i] += path.lam_value[i];
            if path.y * loss_model.activation.phi(path.r[i]) < 0.0 {
                self.wrong[i] += 1.0;
            }
            self.q[i] += path.w[i] * path.w[i];
            self.v_scratch[i] = s * path.lam_first[i];
        }
        // lower triangle of the noise covariance estimate
        for i in 0..n {
            let vi = self.v_scratch[i];
            if vi != 0.0 {
                let (v, row) = (&self.v_scratch[..=i], self.m_c.row_mut(i));
                axpy(&mut row[..=i], vi, v);
            }
        }
        if let Some(g) = &path.g {
            for i in 1..n {
                let coeff = path.s[i] * path.lam_second[i];
                if coeff != 0.0 {
                    let row = g.row(i);
                    axpy(&mut self.m_r.row_mut(i)[..i], coeff, &row[..i]);
                }
            }
        }
        self.n_paths += 1;
    }

    pub fn merge(&mut self, other: &KernelAccumulator) {
        self.n_paths += other.n_paths;
        for (a, b) in self.lambda_hat.iter_mut().zip(&other.lambda_hat) {
            *a += b;
        }
        for (a, b) in self.mu.iter_mut().zip(&other.mu) {
            *a += b;
        }
        for (a, b) in self.loss.iter_mut().zip(&other.loss) {
            *a += b;
        }
        for (a, b) in self.wrong.iter_mut().zip(&other.wrong) {
            *a += b;
        }
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += b;
        }
        for (a, b) in self
            .m_c
            .as_mut_slice()
            .iter_mut()
            .zip(other.m_c.as_slice())
        {
            *a += b;
        }
        for (a, b) in self
            .m_r
            .as_mut_slice()
            .iter_mut()
            .zip(other.m_r.as_slice())
        {
            *a += b;
        }
    }

    /// Ensemble-average kernels: `lambda_hat = alpha delta <s Lambda''>`,
    /// `mu = alpha <s (c + sqrt(delta) h0) Lambda'>`,
    /// `M_C = alpha delta <s Lambda' (x) s Lambda'>` (symmetrized), and
    /// `M_R = alpha delta^{3/2} <s Lambda'' g>` strictly below the diagonal.
    pub fn finalize(&self, alpha: f64, delta: f64) -> KernelEstimate {
        assert!(self.n_paths > 0, "ensemble must be nonempty");
        let inv = 1.0 / self.n_paths as f64;
        let n = self.lambda_hat.len();
        let mut lambda_hat = self.lambda_hat.clone();
        let mut mu = self.mu.clone();
        for v in lambda_hat.iter_mut() {
            *v *= alpha * delta * inv;
        }
        for v in mu.iter_mut() {
            *v *= alpha * inv;
        }
        let mut m_c = self.m_c.clone();
        for v in m_c.as_mut_slice().iter_mut() {
            *v *= alpha * delta * inv;
        }
        m_c.mirror_lower();
        let mut m_r = self.m_r.clone();
        let scale = alpha * delta * math::sqrt(delta) * inv;
        for v in m_r.as_mut_slice().iter_mut() {
            *v *= scale;
        }
        for i in 0..n {
            for j in i..n {
                m_r[(i, j)] = 0.0;
            }
        }
        KernelEstimate {
            lambda_hat,
            mu,
            m_c,
            m_r,
        }
    }

    /// Ensemble observables: training loss `alpha <Lambda>`, accuracy
    /// `1 - <wrong>`, self-overlap `<w^2>`.
    pub fn observables(&self, alpha: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        assert!(self.n_paths > 0, "ensemble must be nonempty");
        let inv = 1.0 / self.n_paths as f64;
        let loss = self.loss.iter().map(|v| alpha * v * inv).collect();
        let acc = self.wrong.iter().map(|v| 1.0 - v * inv).collect();
        let q = self.q.iter().map(|v| v * inv).collect();
        (loss, acc, q)
    }
}

/// Monte Carlo kernel estimates from an ensemble, mixed into `old` with
/// factor `damping` (1 = replace outright).
pub fn update_kernels(
    ensemble: &[EffectivePath],
    alpha: f64,
    delta: f64,
    loss_model: &LossModel,
    old: &KernelSet,
    damping: f64,
) -> KernelSet {
    let mut acc = KernelAccumulator::zeros(old.n_steps(), delta);
    for path in ensemble {
        acc.add(path, delta, loss_model);
    }
    let est = acc.finalize(alpha, delta);
    apply_damped_update(old, &est, damping)
}

pub(super) fn apply_damped_update(
    old: &KernelSet,
    est: &KernelEstimate,
    damping: f64,
) -> KernelSet {
    let mut new = old.clone();
    for (a, b) in new.lambda_hat.iter_mut().zip(&est.lambda_hat) {
        *a += damping * (b - *a);
    }
    for (a, b) in new.mu.iter_mut().zip(&est.mu) {
        *a += damping * (b - *a);
    }
    new.m_c.mix_from(&est.m_c, damping);
    new.m_r.mix_from(&est.m_r, damping);
    new
}
