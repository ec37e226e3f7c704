//! Damped fixed-point iteration over Monte Carlo path ensembles.

use alloc::vec::Vec;

use super::path::{self, KernelAccumulator, PathRandoms};
use super::{DmftError, KernelSet, NoiseFactor, SolverConfig, TimeGrid};
use crate::analysis;
use crate::exec::{block_range, n_blocks, BlockExecutor};
use crate::math;
use crate::metrics::MetricsSeries;
use crate::model::{LossModel, MixtureSpec};
use crate::rng::{stream_rng, Stream};
use crate::simulator::RunParams;

/// Fixed-point iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Relative kernel change after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl Diagnostics {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct DmftSolution {
    pub kernels: KernelSet,
    pub metrics: MetricsSeries,
    pub diagnostics: Diagnostics,
}

/// Starting magnetization: explicit override, else zero for the two-cluster
/// model (the drive itself breaks the symmetry) and the finite-d average
/// `sqrt(2 R / (pi d))` of `|m(0)|` for the three-cluster model, whose even
/// read-out never magnetizes from exactly zero.
pub fn resolve_m0(spec: &MixtureSpec, params: &RunParams, config: &SolverConfig) -> f64 {
    if let Some(m0) = config.m0 {
        return m0;
    }
    match spec {
        MixtureSpec::TwoCluster { .. } => 0.0,
        MixtureSpec::ThreeCluster { .. } => {
            math::sqrt(2.0 * params.init_variance / (core::f64::consts::PI * params.d as f64))
        }
    }
}

fn run_ensemble<E: BlockExecutor>(
    executor: &E,
    randoms: &[PathRandoms],
    kernels: &KernelSet,
    lambda: f64,
    delta: f64,
    loss: &LossModel,
    with_response: bool,
) -> Result<KernelAccumulator, DmftError> {
    let noise = NoiseFactor::new(&kernels.m_c)?;
    let n = kernels.n_steps();
    let blocks = n_blocks(randoms.len());
    let partials = executor.map_blocks(blocks, |b| {
        let mut acc = KernelAccumulator::zeros(n, delta);
        for r in &randoms[block_range(b, randoms.len())] {
            let p = path::simulate_path(kernels, lambda, delta, loss, r, &noise, with_response)?;
            acc.add(&p, delta, loss);
        }
        Ok::<_, DmftError>(acc)
    });
    let mut total = KernelAccumulator::zeros(n, delta);
    for partial in partials {
        total.merge(&partial?);
    }
    Ok(total)
}

/// Solve the self-consistent process for `spec` at the trainer's parameters.
///
/// Starts from zero kernels (or `initial` for a warm restart), then repeats
/// {sample the path ensemble, re-estimate the kernels, damp, re-integrate
/// the magnetization} until the relative kernel change drops below
/// `config.tol` or `config.max_iters` is hit; the diagnostics record which.
/// A final ensemble pass under the converged kernels produces the
/// observables. Output is bit-reproducible for a given `(seed, n_paths,
/// config)` regardless of the executor's worker count.
pub fn solve_dmft<E: BlockExecutor>(
    spec: &MixtureSpec,
    params: &RunParams,
    config: &SolverConfig,
    initial: Option<&KernelSet>,
    executor: &E,
) -> Result<DmftSolution, DmftError> {
    params
        .validate()
        .map_err(|e| DmftError::InvalidConfig(alloc::format!("{e}")))?;
    config.validate()?;
    let grid = TimeGrid::from_horizon(params.eta, params.horizon)?;
    let delta = spec.delta();
    let lambda = params.lambda;
    let alpha = params.alpha;
    let loss = spec.loss_model();
    let m0 = resolve_m0(spec, params, config);

    let mut kernels = match initial {
        Some(warm) => {
            if warm.grid != grid {
                return Err(DmftError::GridMismatch);
            }
            warm.clone()
        }
        None => KernelSet::initial(grid, lambda, m0),
    };

    // Frozen per-path randomness, one stream per path index.
    let randoms: Vec<PathRandoms> = (0..config.n_paths)
        .map(|p| {
            let mut rng = stream_rng(params.seed, Stream::Path, p as u64);
            path::draw_path_randoms(
                spec,
                params.init_variance,
                config.mask_mode,
                params.batch_fraction,
                params.tau,
                &grid,
                &mut rng,
            )
        })
        .collect();

    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        let acc = run_ensemble(executor, &randoms, &kernels, lambda, delta, &loss, true)?;
        let est = acc.finalize(alpha, delta);
        let mut new = path::apply_damped_update(&kernels, &est, config.damping);
        new.m = path::integrate_magnetization(&new.mu, lambda, m0, &grid);
        if !new.is_finite() {
            return Err(DmftError::Diverged { iteration: iterations });
        }
        let residual = new.relative_change(&kernels);
        residuals.push(residual);
        kernels = new;
        if residual < config.tol {
            converged = true;
            break;
        }
    }

    // Observables under the converged kernels (no response needed).
    let acc = run_ensemble(executor, &randoms, &kernels, lambda, delta, &loss, false)?;
    let (loss_series, acc_series, q_series) = acc.observables(alpha);
    let mut metrics = MetricsSeries::with_capacity(grid.n_steps);
    for i in 0..grid.n_steps {
        let gen = analysis::gen_error(spec, kernels.m[i], q_series[i])
            .expect("ensemble self-overlap is nonnegative");
        metrics.push(
            grid.time(i),
            kernels.m[i],
            q_series[i],
            loss_series[i],
            acc_series[i],
            gen,
        );
    }

    Ok(DmftSolution {
        kernels,
        metrics,
        diagnostics: Diagnostics {
            iterations,
            residuals,
            converged,
        },
    })
}
