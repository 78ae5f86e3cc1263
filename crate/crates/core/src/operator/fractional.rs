use std::sync::Arc;

use faer::{Col, Mat, Side};

use super::local::{symmetrize, LocalOperator};
use super::{matvec, norm2};
use crate::error::{Error, Result};
use crate::geometry::Grid;

/// Orthogonal eigendecomposition `L = V diag(λ) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl SpectralFactorization {
    /// Full symmetric eigendecomposition. Eigenvalues below
    /// `-1e-10 * λ_max` indicate a broken assembly and are rejected; smaller
    /// negative round-off is clamped to zero.
    pub fn new(local: &LocalOperator) -> Result<Self> {
        let evd = local
            .matrix()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::numerical(format!("eigendecomposition failed: {e:?}")))?;
        let raw: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        Self::from_parts(raw, evd.U().to_owned())
    }

    /// Rebuilds a factorization from stored eigenpairs (e.g. the on-disk cache).
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Mat<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: eigenvectors.ncols() });
        }
        let max = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut eigenvalues = eigenvalues;
        for lam in eigenvalues.iter_mut() {
            if !lam.is_finite() {
                return Err(Error::numerical("non-finite eigenvalue"));
            }
            if *lam < -1e-10 * max {
                return Err(Error::numerical(format!(
                    "negative eigenvalue {lam:.3e} (max {max:.3e}): operator is not positive semidefinite"
                )));
            }
            *lam = lam.max(0.0);
        }
        Ok(SpectralFactorization { eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<f64> {
        &self.eigenvectors
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// `V diag(φ(λ)) Vᵀ` as a dense, bitwise-symmetric matrix.
    pub fn function_matrix(&self, phi: impl Fn(f64) -> f64) -> Mat<f64> {
        let v = &self.eigenvectors;
        let n = self.size();
        let scaled = Mat::<f64>::from_fn(n, n, |i, j| v[(i, j)] * phi(self.eigenvalues[j]));
        let mut out = &scaled * v.transpose();
        symmetrize(&mut out);
        out
    }

    /// `V diag(φ(λ)) Vᵀ x`.
    pub fn apply_function(&self, phi: impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
        let v = &self.eigenvectors;
        let xc = Col::<f64>::from_fn(x.len(), |i| x[i]);
        let mut coeffs = v.transpose() * &xc;
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c *= phi(self.eigenvalues[j]);
        }
        let y = v * &coeffs;
        y.iter().copied().collect()
    }

    /// Heat semigroup `e^{-tL} v`.
    pub fn heat_semigroup_apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::validation(format!("heat semigroup time must be nonnegative, got {t}")));
        }
        crate::error::check_len(v.len(), self.size())?;
        if t == 0.0 {
            return Ok(v.to_vec());
        }
        Ok(self.apply_function(|lam| (-t * lam).exp(), v))
    }
}

/// `L^s` built by spectral functional calculus, keeping the factorization
/// for reuse by the heat semigroup and by further powers.
#[derive(Debug, Clone)]
pub struct FractionalOperator {
    grid: Arc<Grid>,
    exponent: f64,
    factorization: Arc<SpectralFactorization>,
    matrix: Mat<f64>,
}

impl FractionalOperator {
    pub fn new(grid: Arc<Grid>, factorization: Arc<SpectralFactorization>, exponent: f64) -> Result<Self> {
        check_exponent(exponent)?;
        crate::error::check_len(factorization.size(), grid.len())?;
        let matrix = factorization.function_matrix(|lam| lam.powf(exponent));
        Ok(FractionalOperator { grid, exponent, factorization, matrix })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn factorization(&self) -> &Arc<SpectralFactorization> {
        &self.factorization
    }

    /// Dense `L^s`.
    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues `λ^s`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.factorization.eigenvalues().iter().map(|l| l.powf(self.exponent)).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        matvec(&self.matrix, v)
    }

    /// Same factorization raised to another exponent.
    pub fn with_exponent(&self, exponent: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.factorization.clone(), exponent)
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::validation(format!("fractional exponent must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// Eigendecomposes `L` and forms `L^s`.
pub fn spectral_fractional_power(grid: Arc<Grid>, local: &LocalOperator, s: f64) -> Result<FractionalOperator> {
    check_exponent(s)?;
    let fac = Arc::new(SpectralFactorization::new(local)?);
    FractionalOperator::new(grid, fac, s)
}

/// Result of the heat-semigroup quadrature for `L^s v`.
#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub value: Vec<f64>,
    /// `‖I_n - I_{n/2}‖₂`, difference to the half-resolution rule.
    pub error_estimate: f64,
    pub step: f64,
    pub tau_range: (f64, f64),
}

/// Approximates `L^s v = Γ(-s)^{-1} ∫₀^∞ (e^{-tL}v - v) t^{-1-s} dt`.
///
/// After `t = e^τ` the integrand `(e^{-e^τ L} - I) v e^{-sτ}` is sampled on
/// an equispaced grid covering `[ln(1e-6/λ_max), ln(40/λ_min)]`. Grid points
/// beyond both ends are summed in closed form as geometric series: for large
/// `τ` the semigroup term is below `e^{-40}` and the integrand is `-v e^{-sτ}`;
/// for small `τ` it is `-Lv e^{(1-s)τ}` to first order. The result is the
/// trapezoid rule on the whole line, which converges exponentially in the
/// step size. The semigroup is applied as a black box via
/// [`SpectralFactorization::heat_semigroup_apply`]; `λ^s` is never formed.
pub fn heat_quadrature_fractional_apply(
    local: &LocalOperator,
    fac: &SpectralFactorization,
    s: f64,
    v: &[f64],
    nodes: usize,
) -> Result<QuadratureResult> {
    check_exponent(s)?;
    if nodes < 16 {
        return Err(Error::validation(format!("quadrature needs at least 16 nodes, got {nodes}")));
    }
    crate::error::check_len(v.len(), fac.size())?;
    let fine = trapezoid_line(local, fac, s, v, nodes)?;
    let coarse = trapezoid_line(local, fac, s, v, nodes / 2)?;
    let diff: Vec<f64> = fine.value.iter().zip(&coarse.value).map(|(a, b)| a - b).collect();
    let error_estimate = norm2(&diff);
    let scale = norm2(&fine.value);
    if !error_estimate.is_finite() || !scale.is_finite() {
        return Err(Error::numerical("heat quadrature produced non-finite values"));
    }
    if error_estimate > 0.5 * scale.max(norm2(v) * f64::EPSILON) {
        return Err(Error::numerical(format!(
            "heat quadrature diverges: refinement changed the result by {error_estimate:.3e} (norm {scale:.3e})"
        )));
    }
    Ok(QuadratureResult { error_estimate, ..fine })
}

fn trapezoid_line(
    local: &LocalOperator,
    fac: &SpectralFactorization,
    s: f64,
    v: &[f64],
    nodes: usize,
) -> Result<QuadratureResult> {
    let lam_max = fac.max_eigenvalue();
    if !(lam_max > 0.0) {
        return Ok(QuadratureResult { value: vec![0.0; v.len()], error_estimate: 0.0, step: 0.0, tau_range: (0.0, 0.0) });
    }
    let lam_min = fac.min_eigenvalue().max(1e-12 * lam_max);
    let tau_min = (1e-6 / lam_max).ln();
    let tau_max = (40.0 / lam_min).ln();
    let step = (tau_max - tau_min) / (nodes - 1) as f64;

    let mut acc = vec![0.0; v.len()];
    for k in 0..nodes {
        let tau = tau_min + step * k as f64;
        let heat = fac.heat_semigroup_apply(tau.exp(), v)?;
        let w = (-s * tau).exp();
        for ((a, hv), x) in acc.iter_mut().zip(&heat).zip(v) {
            *a += (hv - x) * w;
        }
    }
    // right tail: Σ_{j≥1} -v e^{-s(τ_max + j step)}
    let r = (-s * step).exp();
    let right = (-s * tau_max).exp() * r / (1.0 - r);
    // left tail: Σ_{j≥1} -Lv e^{(1-s)(τ_min - j step)}
    let rho = (-(1.0 - s) * step).exp();
    let left = ((1.0 - s) * tau_min).exp() * rho / (1.0 - rho);
    let lv = local.apply(v);
    let inv_gamma = 1.0 / libm::tgamma(-s);
    let value = acc
        .iter()
        .zip(v)
        .zip(&lv)
        .map(|((a, x), l)| inv_gamma * step * (a - right * x - left * l))
        .collect();
    Ok(QuadratureResult { value, error_estimate: f64::NAN, step, tau_range: (tau_min, tau_max) })
}
