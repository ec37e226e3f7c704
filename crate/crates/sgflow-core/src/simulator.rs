//! Finite-dimensional training of the single-layer classifier.
//!
//! One run samples a dataset once, initializes `w ~ N(0, R I_d)` and then
//! iterates mask updates and explicit gradient steps
//! `w <- w - eta [lambda w + sum_mu s_mu Lambda'(y_mu, w.x_mu/sqrt(d)) x_mu/sqrt(d)]`,
//! recording observables on the grid `t = k eta`. The masks, not the data,
//! are resampled over time (multi-pass training on a fixed set).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::analysis;
use crate::math;
use crate::metrics::MetricsSeries;
use crate::model::{sample_dataset, Dataset, LossModel, MixtureSpec};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidParams(String),
    /// The update produced a non-finite weight or gradient (overflow bug or
    /// divergent step size).
    NonFiniteUpdate { step: usize },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidParams(msg) => write!(f, "invalid run parameters: {msg}"),
            SimError::NonFiniteUpdate { step } => {
                write!(f, "non-finite update at step {step}")
            }
        }
    }
}

impl core::error::Error for SimError {}

/// How the per-sample activation variables `s_mu(t)` evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskScheme {
    /// All samples active at every step (`b = 1`).
    FullBatch,
    /// Fresh i.i.d. Bernoulli(b) mask at every step (sampling with
    /// replacement; the batch size is `b n` only on average).
    Sgd,
    /// Two-state Markov chain per sample: off->on with probability
    /// `eta/tau`, on->off with `(1-b) eta / (b tau)` per step, stationary
    /// activation `b` and mean active sojourn `tau b/(1-b)`.
    PersistentSgd,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    /// Sample-to-dimension ratio, `n = round(alpha d)`.
    pub alpha: f64,
    pub d: usize,
    /// Ridge strength.
    pub lambda: f64,
    /// Learning rate (= time-grid spacing).
    pub eta: f64,
    /// Mean batch fraction, in (0, 1].
    pub batch_fraction: f64,
    /// Persistence time of the mask chain.
    pub tau: f64,
    /// Variance of the weight entries at initialization.
    pub init_variance: f64,
    /// Total training time; the run makes `round(horizon/eta)` steps.
    pub horizon: f64,
    pub mask: MaskScheme,
    pub seed: u64,
}

impl RunParams {
    pub fn n_samples(&self) -> usize {
        math::round(self.alpha * self.d as f64) as usize
    }

    pub fn n_updates(&self) -> usize {
        math::round(self.horizon / self.eta) as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidParams(msg));
        if !(self.eta > 0.0) {
            return fail(alloc::format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.alpha >= 0.0) {
            return fail(alloc::format!("alpha must be >= 0, got {}", self.alpha));
        }
        if self.d == 0 {
            return fail("d must be >= 1".into());
        }
        if self.alpha > 0.0 && self.n_samples() == 0 {
            return fail(alloc::format!(
                "alpha = {} at d = {} rounds to an empty training set",
                self.alpha,
                self.d
            ));
        }
        if !(self.lambda >= 0.0) {
            return fail(alloc::format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return fail(alloc::format!(
                "batch fraction must be in (0, 1], got {}",
                self.batch_fraction
            ));
        }
        if self.mask == MaskScheme::FullBatch && self.batch_fraction != 1.0 {
            return fail(alloc::format!(
                "full-batch training requires b = 1, got {}",
                self.batch_fraction
            ));
        }
        if self.mask == MaskScheme::PersistentSgd && !(self.tau > 0.0) {
            return fail(alloc::format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.init_variance >= 0.0) {
            return fail(alloc::format!(
                "init variance must be >= 0, got {}",
                self.init_variance
            ));
        }
        if !(self.horizon > 0.0) {
            return fail(alloc::format!("horizon must be > 0, got {}", self.horizon));
        }
        Ok(())
    }
}

/// Per-step transition probabilities of the persistent mask chain, clamped
/// into [0, 1]. The raw rates `eta/tau` and `(1-b) eta/(b tau)` can exceed 1
/// for fast chains (small `b tau` at fixed `eta`); clamping keeps the chain
/// well defined and is applied identically here and in the mean-field
/// solver, at the price of a stationary fraction slightly off `b` in the
/// clamped regime.
pub fn persistent_flip_probs(b: f64, tau: f64, eta: f64) -> (f64, f64) {
    let p_on = (eta / tau).min(1.0);
    let p_off = ((1.0 - b) * eta / (b * tau)).min(1.0);
    (p_on, p_off)
}

/// Activation mask over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskState {
    active: Vec<bool>,
}

impl MaskState {
    /// Mask used by the very first step: i.i.d. Bernoulli(b) for the
    /// stochastic schemes, all-ones for full batch.
    pub fn init<R: Rng + ?Sized>(params: &RunParams, n: usize, rng: &mut R) -> Self {
        let active = match params.mask {
            MaskScheme::FullBatch => vec![true; n],
            MaskScheme::Sgd | MaskScheme::PersistentSgd => (0..n)
                .map(|_| rng.gen::<f64>() < params.batch_fraction)
                .collect(),
        };
        Self { active }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Advance the mask by one step.
pub fn step_mask<R: Rng + ?Sized>(params: &RunParams, state: &mut MaskState, rng: &mut R) {
    match params.mask {
        MaskScheme::FullBatch => {}
        MaskScheme::Sgd => {
            for s in state.active.iter_mut() {
                *s = rng.gen::<f64>() < params.batch_fraction;
            }
        }
        MaskScheme::PersistentSgd => {
            let (p_on, p_off) = persistent_flip_probs(params.batch_fraction, params.tau, params.eta);
            for s in state.active.iter_mut() {
                let u: f64 = rng.gen();
                if *s {
                    if u < p_off {
                        *s = false;
                    }
                } else if u < p_on {
                    *s = true;
                }
            }
        }
    }
}

/// Draw `w ~ N(0, r I_d)`; `r = 0` gives the zero vector.
pub fn init_weights<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    let scale = math::sqrt(r);
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Pre-activations `h_mu = w.x_mu / sqrt(d)` over the whole dataset.
fn margins(dataset: &Dataset, w: &[f64]) -> Vec<f64> {
    let inv_sqrt_d = 1.0 / math::sqrt(dataset.dim() as f64);
    (0..dataset.n())
        .map(|mu| crate::matrix::dot(w, dataset.pattern(mu)) * inv_sqrt_d)
        .collect()
}

/// Shared update kernel: `w <- w - eta [lambda w + sum_active Lambda' x/sqrt(d)]`,
/// with the margins `h` evaluated at the incoming `w`.
fn gd_update_in_place(
    params: &RunParams,
    model: &LossModel,
    dataset: &Dataset,
    mask: &MaskState,
    h: &[f64],
    w: &mut [f64],
    step: usize,
) -> Result<(), SimError> {
    let shrink = 1.0 - params.eta * params.lambda;
    for wj in w.iter_mut() {
        *wj *= shrink;
    }
    let inv_sqrt_d = 1.0 / math::sqrt(dataset.dim() as f64);
    for mu in 0..dataset.n() {
        if !mask.active()[mu] {
            continue;
        }
        let y = dataset.labels()[mu] as f64;
        let grad = model.lambda_derivs(y, h[mu]).first;
        if !grad.is_finite() {
            return Err(SimError::NonFiniteUpdate { step });
        }
        crate::matrix::axpy(w, -params.eta * grad * inv_sqrt_d, dataset.pattern(mu));
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(SimError::NonFiniteUpdate { step });
    }
    Ok(())
}

/// One explicit gradient step on the masked ridge-regularized loss.
pub fn gd_step(
    params: &RunParams,
    model: &LossModel,
    w: &[f64],
    dataset: &Dataset,
    mask: &MaskState,
) -> Result<Vec<f64>, SimError> {
    let h = margins(dataset, w);
    let mut next = w.to_vec();
    gd_update_in_place(params, model, dataset, mask, &h, &mut next, 0)?;
    Ok(next)
}

fn record(
    series: &mut MetricsSeries,
    spec: &MixtureSpec,
    params: &RunParams,
    model: &LossModel,
    dataset: &Dataset,
    w: &[f64],
    h: &[f64],
    t: f64,
    step: usize,
) -> Result<(), SimError> {
    let d = params.d as f64;
    let m = w.iter().sum::<f64>() / d;
    let q = w.iter().map(|v| v * v).sum::<f64>() / d;
    if !m.is_finite() || !q.is_finite() {
        return Err(SimError::NonFiniteUpdate { step });
    }
    let n = dataset.n();
    let (loss, acc) = if n == 0 {
        (0.0, 1.0)
    } else {
        let mut loss = 0.0;
        let mut wrong = 0usize;
        for mu in 0..n {
            let y = dataset.labels()[mu] as f64;
            loss += model.lambda(y, h[mu]);
            if y * model.activation.phi(h[mu]) < 0.0 {
                wrong += 1;
            }
        }
        (
            params.alpha * loss / n as f64,
            1.0 - wrong as f64 / n as f64,
        )
    };
    let gen = analysis::gen_error(spec, m, q).expect("self-overlap is nonnegative");
    series.push(t, m, q, loss, acc, gen);
    Ok(())
}

/// Train once and record the observables at every grid point `t = k eta`,
/// `k = 0..n_updates`. Generalization error is the closed form evaluated at
/// the empirical `(m, q)`; [`mc_generalization`] is the sampling audit.
pub fn run_training(spec: &MixtureSpec, params: &RunParams) -> Result<MetricsSeries, SimError> {
    params.validate()?;
    let n = if params.alpha == 0.0 {
        0
    } else {
        params.n_samples()
    };
    let model = spec.loss_model();
    let mut dataset_rng = stream_rng(params.seed, Stream::Dataset, 0);
    let mut init_rng = stream_rng(params.seed, Stream::WeightInit, 0);
    let mut mask_rng = stream_rng(params.seed, Stream::Mask, 0);

    let dataset = sample_dataset(spec, params.d, n, &mut dataset_rng);
    let mut w = init_weights(params.d, params.init_variance, &mut init_rng);
    let mut mask = MaskState::init(params, n, &mut mask_rng);

    let n_updates = params.n_updates();
    let mut series = MetricsSeries::with_capacity(n_updates + 1);
    let mut h = margins(&dataset, &w);
    record(&mut series, spec, params, &model, &dataset, &w, &h, 0.0, 0)?;
    for k in 0..n_updates {
        if k > 0 {
            step_mask(params, &mut mask, &mut mask_rng);
        }
        gd_update_in_place(params, &model, &dataset, &mask, &h, &mut w, k)?;
        h = margins(&dataset, &w);
        record(
            &mut series,
            spec,
            params,
            &model,
            &dataset,
            &w,
            &h,
            (k + 1) as f64 * params.eta,
            k + 1,
        )?;
    }
    Ok(series)
}

/// Monte Carlo estimate of the generalization error with fresh samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenEstimate {
    pub error: f64,
    pub stderr: f64,
}

/// Classify `n_test` fresh patterns with `sign(phi(w.x/sqrt(d)))`
/// (`sign(0) = +1`) and return the error rate with its binomial stderr.
///
/// A fresh pattern enters only through `w.x/sqrt(d) = c m + sqrt(delta q) z`
/// with `z` standard normal — exact at any dimension — so the draw reduces
/// to the coefficient and one Gaussian.
pub fn mc_generalization<R: Rng + ?Sized>(
    w: &[f64],
    spec: &MixtureSpec,
    n_test: usize,
    rng: &mut R,
) -> GenEstimate {
    assert!(n_test >= 1);
    let d = w.len() as f64;
    let m = w.iter().sum::<f64>() / d;
    let q = w.iter().map(|v| v * v).sum::<f64>() / d;
    let scale = math::sqrt(spec.delta() * q);
    let activation = spec.activation();
    let mut wrong = 0usize;
    for _ in 0..n_test {
        let c = spec.sample_coefficient(rng);
        let y = spec.label_of(c).expect("sampled coefficient is valid") as f64;
        let z: f64 = rng.sample(StandardNormal);
        let h = c as f64 * m + scale * z;
        let pred = if activation.phi(h) >= 0.0 { 1.0 } else { -1.0 };
        if pred != y {
            wrong += 1;
        }
    }
    let p = wrong as f64 / n_test as f64;
    GenEstimate {
        error: p,
        stderr: math::sqrt(p * (1.0 - p) / n_test as f64),
    }
}
