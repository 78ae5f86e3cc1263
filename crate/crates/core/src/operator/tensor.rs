use std::fmt;
use std::sync::Arc;

use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Grid;

type TensorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// How `A(x)` is evaluated.
#[derive(Clone)]
pub enum TensorRule {
    /// Same symmetric matrix everywhere (row-major, `n * n` entries).
    Constant(Vec<f64>),
    /// `R(θ(x)) diag(major, minor, ..) R(θ(x))ᵀ` with `θ(x) = angle + twist * x₀`,
    /// rotating in the first coordinate plane.
    Rotating { major: f64, minor: f64, angle: f64, twist: f64 },
    /// `(base + amplitude * exp(-|x - center|² / width²)) I`.
    Bump { base: f64, amplitude: f64, center: Vec<f64>, width: f64 },
    /// Arbitrary rule returning a row-major `n * n` matrix.
    Custom(Arc<TensorFn>),
}

impl fmt::Debug for TensorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorRule::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TensorRule::Rotating { major, minor, angle, twist } => f
                .debug_struct("Rotating")
                .field("major", major)
                .field("minor", minor)
                .field("angle", angle)
                .field("twist", twist)
                .finish(),
            TensorRule::Bump { base, amplitude, center, width } => f
                .debug_struct("Bump")
                .field("base", base)
                .field("amplitude", amplitude)
                .field("center", center)
                .field("width", width)
                .finish(),
            TensorRule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Symmetric coefficient field `A(x)` with ellipticity constant `γ`:
/// `γ ≤ ξᵀA(x)ξ ≤ 1/γ` for unit `ξ`.
#[derive(Debug, Clone)]
pub struct EllipticTensorField {
    dim: usize,
    gamma: f64,
    rule: TensorRule,
}

/// Extreme eigenvalues of `A` over all sampled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub gamma: f64,
    pub samples: usize,
}

impl EllipticTensorField {
    pub fn new(dim: usize, gamma: f64, rule: TensorRule) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::validation(format!("ellipticity constant must lie in (0, 1), got {gamma}")));
        }
        if let TensorRule::Constant(m) = &rule {
            if m.len() != dim * dim {
                return Err(Error::validation(format!(
                    "constant tensor needs {} entries, got {}",
                    dim * dim,
                    m.len()
                )));
            }
        }
        if let TensorRule::Bump { center, .. } = &rule {
            if center.len() != dim {
                return Err(Error::validation("bump center dimension mismatch"));
            }
        }
        Ok(EllipticTensorField { dim, gamma, rule })
    }

    /// `A = I` with the given `γ`.
    pub fn identity(dim: usize, gamma: f64) -> Result<Self> {
        let mut m = vec![0.0; dim * dim];
        for k in 0..dim {
            m[k * dim + k] = 1.0;
        }
        Self::new(dim, gamma, TensorRule::Constant(m))
    }

    pub fn constant(dim: usize, gamma: f64, matrix: Vec<f64>) -> Result<Self> {
        Self::new(dim, gamma, TensorRule::Constant(matrix))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rule(&self) -> &TensorRule {
        &self.rule
    }

    /// Row-major `n * n` matrix at `x`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        match &self.rule {
            TensorRule::Constant(m) => m.clone(),
            TensorRule::Rotating { major, minor, angle, twist } => {
                let theta = angle + twist * x[0];
                let (s, c) = theta.sin_cos();
                let mut a = vec![0.0; n * n];
                a[0] = major * c * c + minor * s * s;
                a[1] = (major - minor) * c * s;
                a[n] = a[1];
                a[n + 1] = major * s * s + minor * c * c;
                for k in 2..n {
                    a[k * n + k] = *minor;
                }
                a
            }
            TensorRule::Bump { base, amplitude, center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let v = base + amplitude * (-r2 / (width * width)).exp();
                let mut a = vec![0.0; n * n];
                for k in 0..n {
                    a[k * n + k] = v;
                }
                a
            }
            TensorRule::Custom(f) => f(x),
        }
    }

    /// Checks symmetry and the ellipticity bounds at every grid node and at
    /// the one-cell ghost layer around the box, where the assembly also
    /// samples `A`.
    pub fn check(&self, grid: &Grid) -> Result<EllipticityReport> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: grid.dim() });
        }
        let n = self.dim;
        let m = grid.nodes_per_axis() as isize;
        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        let mut samples = 0;
        let mut mat = Mat::<f64>::zeros(n, n);
        for_each_extended(n, m, |multi, ordinal| {
            let x = grid.coord_of(multi);
            let a = self.eval(&x);
            if a.len() != n * n || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("tensor rule returned an invalid matrix at {x:?}")));
            }
            let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
            for i in 0..n {
                for j in 0..n {
                    let asym = (a[i * n + j] - a[j * n + i]).abs();
                    if asym > 1e-14 * scale {
                        return Err(Error::Asymmetric { node: ordinal, asymmetry: asym });
                    }
                    mat[(i, j)] = a[i * n + j];
                }
            }
            let eig = mat
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::numerical(format!("tensor eigenvalues: {e:?}")))?;
            let (lo, hi) = (eig[0], eig[n - 1]);
            if lo < self.gamma || hi > 1.0 / self.gamma {
                return Err(Error::Ellipticity {
                    node: ordinal,
                    min_eig: lo,
                    max_eig: hi,
                    gamma: self.gamma,
                    inv_gamma: 1.0 / self.gamma,
                });
            }
            min_eig = min_eig.min(lo);
            max_eig = max_eig.max(hi);
            samples += 1;
            Ok(())
        })?;
        Ok(EllipticityReport { min_eigenvalue: min_eig, max_eigenvalue: max_eig, gamma: self.gamma, samples })
    }
}

/// Visits every multi-index in `{-1, .., m}^n`, first axis fastest.
pub(crate) fn for_each_extended<F>(dim: usize, m: isize, mut f: F) -> Result<()>
where
    F: FnMut(&[isize], usize) -> Result<()>,
{
    let mut idx = vec![-1isize; dim];
    let total = (m as usize + 2).pow(dim as u32);
    for ordinal in 0..total {
        f(&idx, ordinal)?;
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot <= m {
                break;
            }
            *slot = -1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_passes() {
        let g = Grid::new(2, 1.0, 5).unwrap();
        let a = EllipticTensorField::identity(2, 0.5).unwrap();
        let r = a.check(&g).unwrap();
        assert_eq!(r.samples, 49);
        assert_eq!(r.min_eigenvalue, 1.0);
    }

    #[test]
    fn asymmetric_constant_rejected() {
        let g = Grid::new(2, 1.0, 5).unwrap();
        let a = EllipticTensorField::constant(2, 0.2, vec![1.0, 0.3, 0.0, 1.0]).unwrap();
        assert!(matches!(a.check(&g), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn ellipticity_violation_rejected() {
        let g = Grid::new(2, 1.0, 5).unwrap();
        let a = EllipticTensorField::constant(2, 0.5, vec![1.0, 0.0, 0.0, 4.0]).unwrap();
        assert!(matches!(a.check(&g), Err(Error::Ellipticity { .. })));
        let ok = EllipticTensorField::constant(2, 0.25, vec![1.0, 0.0, 0.0, 4.0]).unwrap();
        ok.check(&g).unwrap();
    }

    #[test]
    fn rotating_field_has_fixed_spectrum() {
        let g = Grid::new(2, 1.0, 7).unwrap();
        let a = EllipticTensorField::new(2, 0.3, TensorRule::Rotating { major: 2.0, minor: 0.5, angle: 0.3, twist: 1.1 })
            .unwrap();
        let r = a.check(&g).unwrap();
        assert!((r.min_eigenvalue - 0.5).abs() < 1e-12);
        assert!((r.max_eigenvalue - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(EllipticTensorField::identity(2, 1.0).is_err());
        assert!(EllipticTensorField::identity(2, 0.0).is_err());
    }
}
