//! Closed-form observables and curve comparison.
//!
//! The generalization errors depend on the trained weights only through the
//! axis overlap `m` and the self-overlap `q = C(t,t)`: a fresh pattern's
//! pre-activation is Gaussian, `h = c m + sqrt(delta q) z`, at any
//! dimension, so the error formulas below are exact given `(m, q)`.

use alloc::vec::Vec;
use core::fmt;

use crate::dmft::EffectivePath;
use crate::math;
use crate::model::{LossModel, MixtureSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalysisError {
    /// Self-overlap must be nonnegative.
    NegativeOverlap(f64),
    /// The posterior-threshold oracle needs `(1-rho)/rho * e^{1/(2 delta)} >= 1`.
    DegenerateOracle { delta: f64, rho: f64 },
    /// Curve comparison requires identical time grids.
    GridMismatch,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::NegativeOverlap(q) => write!(f, "self-overlap must be >= 0, got {q}"),
            AnalysisError::DegenerateOracle { delta, rho } => write!(
                f,
                "oracle threshold undefined for delta = {delta}, rho = {rho} \
                 (posterior argmax never predicts -1)"
            ),
            AnalysisError::GridMismatch => write!(f, "curves live on different time grids"),
        }
    }
}

impl core::error::Error for AnalysisError {}

/// Misclassification rate of the sign read-out on the two-cluster mixture:
/// `eps = erfc(m / sqrt(2 delta q)) / 2`, with the `q -> 0` limit taken
/// explicitly (an all-zero weight vector predicts one class).
pub fn gen_error_two_cluster(m: f64, q: f64, delta: f64) -> Result<f64, AnalysisError> {
    if q < 0.0 {
        return Err(AnalysisError::NegativeOverlap(q));
    }
    if q == 0.0 {
        return Ok(if m > 0.0 {
            0.0
        } else if m < 0.0 {
            1.0
        } else {
            0.5
        });
    }
    Ok(0.5 * math::erfc(m / math::sqrt(2.0 * delta * q)))
}

/// Misclassification rate of the door read-out on the three-cluster mixture,
/// for general center weight `1 - rho`:
/// `(1-rho) erfc(L/s) + rho/2 [erf((L-m)/s) + erf((L+m)/s)]`,
/// `s = sqrt(2 delta q)`. At `rho = 1/2` the prefactors reduce to 1/2 and 1/4.
pub fn gen_error_three_cluster(
    m: f64,
    q: f64,
    delta: f64,
    onset: f64,
    rho: f64,
) -> Result<f64, AnalysisError> {
    if q < 0.0 {
        return Err(AnalysisError::NegativeOverlap(q));
    }
    if q == 0.0 {
        // Degenerate read-out sign(-L^2): everything is called central, so
        // exactly the outer mass closer to the axis than the onset is wrong.
        let sign = |x: f64| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        return Ok(0.5 * rho * (sign(onset - m) + sign(onset + m)));
    }
    let s = math::sqrt(2.0 * delta * q);
    Ok((1.0 - rho) * math::erfc(onset / s)
        + 0.5 * rho * (math::erf((onset - m) / s) + math::erf((onset + m) / s)))
}

/// Generalization error of the read-out matching `spec`, given `(m, q)`.
pub fn gen_error(spec: &MixtureSpec, m: f64, q: f64) -> Result<f64, AnalysisError> {
    match *spec {
        MixtureSpec::TwoCluster { delta } => gen_error_two_cluster(m, q, delta),
        MixtureSpec::ThreeCluster {
            delta,
            door_onset,
            rho,
        } => gen_error_three_cluster(m, q, delta, door_onset, rho),
    }
}

/// Error of the posterior-argmax classifier that knows the cluster axis,
/// the noise level and the cluster weights of the three-cluster mixture.
///
/// The posterior comparison `rho e^{-1/(2 delta)} cosh(u/delta) vs 1 - rho`
/// (with `u = x.v*/sqrt(d) ~ N(c, delta)`) thresholds at
/// `|u| = delta * A`, `A = acosh((1-rho)/rho * e^{1/(2 delta)})`, giving
/// `eps = (1-rho) erfc(sqrt(delta/2) A)
///        + rho/2 [erf((delta A + 1)/sqrt(2 delta)) + erf((delta A - 1)/sqrt(2 delta))]`.
pub fn oracle_error(delta: f64, rho: f64) -> Result<f64, AnalysisError> {
    let arg = (1.0 - rho) / rho * math::exp(1.0 / (2.0 * delta));
    if !(arg >= 1.0) {
        return Err(AnalysisError::DegenerateOracle { delta, rho });
    }
    let a = math::acosh(arg);
    let s = math::sqrt(2.0 * delta);
    Ok((1.0 - rho) * math::erfc(math::sqrt(0.5 * delta) * a)
        + 0.5 * rho * (math::erf((delta * a + 1.0) / s) + math::erf((delta * a - 1.0) / s)))
}

/// Ensemble averages of the training loss `alpha <Lambda(y, r(t))>` and the
/// training accuracy `1 - <theta(-y phi(r(t)))>` over effective paths.
/// Ties (`y phi(r) = 0`) count as correct, matching `theta(0) = 0`.
pub fn ensemble_loss_accuracy(
    ensemble: &[EffectivePath],
    alpha: f64,
    model: &LossModel,
) -> (Vec<f64>, Vec<f64>) {
    assert!(!ensemble.is_empty(), "ensemble must be nonempty");
    let n_steps = ensemble[0].r.len();
    let mut loss = Vec::new();
    let mut acc = Vec::new();
    loss.resize(n_steps, 0.0);
    acc.resize(n_steps, 0.0);
    for path in ensemble {
        assert_eq!(path.r.len(), n_steps, "paths must share the grid");
        for (i, &r) in path.r.iter().enumerate() {
            loss[i] += model.lambda(path.y, r);
            if path.y * model.activation.phi(r) < 0.0 {
                acc[i] += 1.0;
            }
        }
    }
    let inv = 1.0 / ensemble.len() as f64;
    for v in loss.iter_mut() {
        *v *= alpha * inv;
    }
    for v in acc.iter_mut() {
        *v = 1.0 - *v * inv;
    }
    (loss, acc)
}

/// Two curves on a shared grid, ready for deviation statistics.
#[derive(Debug, Clone)]
pub struct CurvePair<'a> {
    pub times: &'a [f64],
    pub series_a: &'a [f64],
    pub series_b: &'a [f64],
}

/// Deviation statistics for a curve pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareStats {
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    /// Time at which the largest deviation occurs.
    pub argmax_time: f64,
}

pub fn curve_compare(pair: &CurvePair<'_>) -> Result<CompareStats, AnalysisError> {
    let n = pair.times.len();
    if pair.series_a.len() != n || pair.series_b.len() != n || n == 0 {
        return Err(AnalysisError::GridMismatch);
    }
    let mut max_abs = 0.0;
    let mut argmax = pair.times[0];
    let mut sum = 0.0;
    for ((&t, &a), &b) in pair.times.iter().zip(pair.series_a).zip(pair.series_b) {
        let dev = (a - b).abs();
        sum += dev;
        if dev > max_abs {
            max_abs = dev;
            argmax = t;
        }
    }
    Ok(CompareStats {
        max_abs_dev: max_abs,
        mean_abs_dev: sum / n as f64,
        argmax_time: argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent erfc for oracle checks: power series for small |x|,
    // Lentz continued fraction for the tail.
    fn erfc_reference(x: f64) -> f64 {
        if x < 0.0 {
            return 2.0 - erfc_reference(-x);
        }
        let inv_sqrt_pi = 1.0 / core::f64::consts::PI.sqrt();
        if x < 2.0 {
            // erf(x) = 2/sqrt(pi) * sum_k (-1)^k x^(2k+1) / (k! (2k+1))
            let mut term = x;
            let mut sum = x;
            let mut k = 0usize;
            while term.abs() > 1e-20 {
                k += 1;
                term *= -x * x / k as f64;
                sum += term / (2 * k + 1) as f64;
            }
            1.0 - 2.0 * inv_sqrt_pi * sum
        } else {
            // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2x + 2/2x + 3/2x + ...)
            let mut f = x;
            let mut c = x;
            let mut d = 0.0f64;
            for k in 1..200 {
                let a = k as f64 / 2.0;
                d = x + a * d;
                c = x + a / c;
                if d == 0.0 {
                    d = 1e-300;
                }
                d = 1.0 / d;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-17 {
                    break;
                }
            }
            (-x * x).exp() * inv_sqrt_pi / f
        }
    }

    #[test]
    fn erfc_shim_matches_series_and_continued_fraction() {
        for &x in &[0.0, 0.1, 0.5, 0.894, 1.0, 1.9, 2.3, 3.5, 5.0, -1.2] {
            assert_relative_eq!(math::erfc(x), erfc_reference(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn two_cluster_error_limits() {
        assert_eq!(gen_error_two_cluster(0.0, 1.3, 0.5).unwrap(), 0.5);
        assert!(gen_error_two_cluster(1e6, 1.0, 0.5).unwrap() < 1e-12);
        assert_eq!(gen_error_two_cluster(1.0, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(gen_error_two_cluster(0.0, 0.0, 0.5).unwrap(), 0.5);
        assert_eq!(gen_error_two_cluster(-1.0, 0.0, 0.5).unwrap(), 1.0);
        assert!(gen_error_two_cluster(0.0, -0.1, 0.5).is_err());
    }

    #[test]
    fn two_cluster_error_against_reference_erfc() {
        let eps = gen_error_two_cluster(1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(eps, 0.5 * erfc_reference(1.0), max_relative = 1e-13);
    }

    #[test]
    fn three_cluster_zero_overlap_limit() {
        // Everything is predicted central: the outer mass rho is wrong.
        assert_eq!(gen_error_three_cluster(0.0, 0.0, 0.5, 0.7, 0.5).unwrap(), 0.5);
        assert_eq!(gen_error_three_cluster(2.0, 0.0, 0.5, 0.7, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn three_cluster_symmetry_point() {
        // m = L kills the first erf term exactly.
        let (m, q, delta, l, rho) = (0.7f64, 0.9f64, 0.05f64, 0.7f64, 0.4f64);
        let s = (2.0 * delta * q).sqrt();
        let expect = (1.0 - rho) * math::erfc(l / s) + 0.5 * rho * math::erf(2.0 * l / s);
        assert_relative_eq!(
            gen_error_three_cluster(m, q, delta, l, rho).unwrap(),
            expect,
            epsilon = 1e-15
        );
    }

    #[test]
    fn three_cluster_is_even_in_m() {
        for &m in &[0.0, 0.2, 0.7, 1.9] {
            let a = gen_error_three_cluster(m, 0.8, 0.05, 0.7, 0.5).unwrap();
            let b = gen_error_three_cluster(-m, 0.8, 0.05, 0.7, 0.5).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rho_half_reduces_to_quarter_coefficients() {
        // At rho = 1/2 the general formula must equal
        // erfc(L/s)/2 + [erf((L-m)/s) + erf((L+m)/s)]/4 identically.
        for &m in &[0.0f64, 0.3, 0.9] {
            for &q in &[0.05f64, 0.8, 3.0] {
                for &delta in &[0.05, 0.5] {
                    for &l in &[0.4, 0.7] {
                        let s = (2.0 * delta * q).sqrt();
                        let main_text = 0.5 * math::erfc(l / s)
                            + 0.25 * (math::erf((l - m) / s) + math::erf((l + m) / s));
                        let general = gen_error_three_cluster(m, q, delta, l, 0.5).unwrap();
                        assert_relative_eq!(general, main_text, epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn two_cluster_error_decreases_in_m() {
        let mut last = 1.0;
        let mut m = -2.0;
        while m <= 2.0 {
            let e = gen_error_two_cluster(m, 0.7, 0.5).unwrap();
            assert!(e < last);
            last = e;
            m += 0.25;
        }
    }

    #[test]
    fn oracle_error_small_noise_vanishes() {
        // monotone decay toward 0 as the clusters separate
        let ladder: Vec<f64> = [0.2, 0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&d| oracle_error(d, 0.5).unwrap())
            .collect();
        for pair in ladder.windows(2) {
            assert!(pair[1] < pair[0], "ladder {ladder:?}");
        }
        assert!(ladder[4] < 1e-5, "oracle error {}", ladder[4]);
        let e = oracle_error(0.05, 0.5).unwrap();
        assert!(e > 0.0 && e < 0.05, "oracle error {e}");
    }

    #[test]
    fn oracle_error_domain() {
        // rho close to 1 with large noise pushes the argument below 1.
        assert!(matches!(
            oracle_error(10.0, 0.99),
            Err(AnalysisError::DegenerateOracle { .. })
        ));
    }

    #[test]
    fn curve_compare_basics() {
        let t = [0.0, 1.0, 2.0];
        let a = [0.5, 0.4, 0.3];
        let same = curve_compare(&CurvePair {
            times: &t,
            series_a: &a,
            series_b: &a,
        })
        .unwrap();
        assert_eq!(same.max_abs_dev, 0.0);
        assert_eq!(same.mean_abs_dev, 0.0);
        assert_eq!(same.argmax_time, 0.0);

        let b = [0.52, 0.42, 0.32];
        let off = curve_compare(&CurvePair {
            times: &t,
            series_a: &a,
            series_b: &b,
        })
        .unwrap();
        assert_relative_eq!(off.max_abs_dev, 0.02, epsilon = 1e-12);
        assert_relative_eq!(off.mean_abs_dev, 0.02, epsilon = 1e-12);

        let short = [0.1, 0.2];
        assert!(curve_compare(&CurvePair {
            times: &t,
            series_a: &a,
            series_b: &short,
        })
        .is_err());
    }
}
