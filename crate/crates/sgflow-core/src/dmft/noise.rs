//! Correlated Gaussian noise paths from the covariance kernel.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::DmftError;
use crate::math;
use crate::matrix::{dot, SquareMatrix};

/// Plain lower Cholesky; `None` when a pivot is not strictly positive.
fn cholesky(a: &SquareMatrix) -> Option<SquareMatrix> {
    let n = a.n();
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[(i, j)] = math::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Cached square root of a noise covariance: `xi = L z` has covariance
/// `L L^T = M_C` for i.i.d. standard normal `z`.
///
/// Monte Carlo kernel estimates are PSD up to roundoff; on factorization
/// failure a jitter `eps I` with `eps = 1e-10 * max diagonal` is added and
/// grown by 100x up to three times before giving up.
#[derive(Debug, Clone)]
pub struct NoiseFactor {
    l: SquareMatrix,
}

impl NoiseFactor {
    pub fn new(m_c: &SquareMatrix) -> Result<Self, DmftError> {
        let n = m_c.n();
        let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m_c[(i, i)].abs()));
        if max_diag == 0.0 {
            let all_zero = m_c.as_slice().iter().all(|&v| v == 0.0);
            if all_zero {
                return Ok(Self {
                    l: SquareMatrix::zeros(n),
                });
            }
            return Err(DmftError::NonPsdKernel { attempts: 0 });
        }
        if let Some(l) = cholesky(m_c) {
            return Ok(Self { l });
        }
        let mut eps = 1e-10 * max_diag;
        for attempt in 1..=3 {
            let mut jittered = m_c.clone();
            for i in 0..n {
                jittered[(i, i)] += eps;
            }
            if let Some(l) = cholesky(&jittered) {
                return Ok(Self { l });
            }
            eps *= 100.0;
            let _ = attempt;
        }
        Err(DmftError::NonPsdKernel { attempts: 3 })
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Transform i.i.d. standard normals into a correlated path.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.l.n();
        debug_assert_eq!(z.len(), n);
        let mut xi = vec![0.0; n];
        for i in 0..n {
            xi[i] = dot(&self.l.row(i)[..=i], &z[..=i]);
        }
        xi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n()).map(|_| rng.sample(StandardNormal)).collect();
        self.apply(&z)
    }
}

/// One Gaussian path with covariance `m_c` (factorizes on every call; use
/// [`NoiseFactor`] to amortize over an ensemble).
pub fn sample_noise<R: Rng + ?Sized>(
    m_c: &SquareMatrix,
    rng: &mut R,
) -> Result<Vec<f64>, DmftError> {
    Ok(NoiseFactor::new(m_c)?.sample(rng))
}
