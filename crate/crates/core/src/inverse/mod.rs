//! Inverse problems driven by exterior measurements: obstacle
//! distinguishability and exhaustive obstacle search, Runge approximation by
//! exterior control, and potential recovery from DtN differences.

mod obstacle;
mod potential;
mod runge;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use obstacle::{
    distinguish_obstacles, distinguish_with, observe, recover_obstacle, CandidateMisfit, Distinction,
    ObstacleCandidate, ObstacleCandidateFamily, ObstacleRecovery, DEFAULT_THETA, EXACT_MATCH_TOLERANCE,
};
pub use potential::{recover_potential, ConditioningReport, PotentialOptions, PotentialRecovery, Truncation};
pub use runge::{
    alpha_sweep, runge_approximate, runge_approximate_with, ControlOperator, RungeOptions, RungePathPoint, RungeResult,
};

use crate::error::{Error, Result};

/// Gaussian vector of exactly the given Euclidean norm.
pub fn gaussian_noise(len: usize, norm: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = norm / crate::operator::norm2(&xi);
    if !scale.is_finite() {
        return vec![0.0; len];
    }
    xi.into_iter().map(|x| x * scale).collect()
}

/// Thin SVD with singular values sorted descending.
pub(crate) struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub(crate) fn thin_svd(m: &Mat<f64>) -> Result<ThinSvd> {
    let svd = m.thin_svd().map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = Mat::<f64>::from_fn(m.nrows(), s.len(), |i, k| svd.U()[(i, order[k])]);
    let v = Mat::<f64>::from_fn(m.ncols(), s.len(), |i, k| svd.V()[(i, order[k])]);
    let s = order.iter().map(|&k| s[k]).collect();
    Ok(ThinSvd { u, s, v })
}

impl ThinSvd {
    /// `Uᵀ b`
    pub fn project(&self, b: &[f64]) -> Vec<f64> {
        (0..self.s.len()).map(|k| (0..b.len()).map(|i| self.u[(i, k)] * b[i]).sum()).collect()
    }

    /// `V diag(w) c`
    pub fn expand(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.v.nrows()).map(|i| (0..weights.len()).map(|k| self.v[(i, k)] * weights[k]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_has_requested_norm() {
        let v = gaussian_noise(500, 0.25, 1);
        assert!((crate::operator::norm2(&v) - 0.25).abs() < 1e-14);
        assert_eq!(gaussian_noise(500, 0.25, 1), v);
        assert_ne!(gaussian_noise(500, 0.25, 2), v);
        assert!(gaussian_noise(10, 0.0, 3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = Mat::<f64>::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5 + if i == j { 3.0 } else { 0.0 });
        let svd = thin_svd(&m).unwrap();
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..7 {
            for j in 0..4 {
                let r: f64 = (0..4).map(|k| svd.u[(i, k)] * svd.s[k] * svd.v[(j, k)]).sum();
                assert!((r - m[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
