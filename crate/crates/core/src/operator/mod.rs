//! The local elliptic operator `L_A = -∇·(A∇)`, its fractional powers, the
//! heat semigroup, the nonlocal kernel and the discrete energy forms.

mod fractional;
mod kernel;
mod local;
mod tensor;

use faer::{Col, Mat};

pub use fractional::{
    heat_quadrature_fractional_apply, spectral_fractional_power, FractionalOperator, QuadratureResult,
    SpectralFactorization,
};
pub use kernel::{
    extract_kernel, fractional_laplacian_constant, KernelFit, KernelFitOptions, KernelMatrix, KernelSample,
};
pub use local::{assemble_local_operator, LocalOperator};
pub use tensor::{EllipticTensorField, EllipticityReport, TensorRule};

use crate::error::{check_len, Error, Result};
use crate::geometry::DomainPartition;

pub(crate) fn matvec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let x = Col::<f64>::from_fn(v.len(), |i| v[i]);
    let y = m * &x;
    y.iter().copied().collect()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `vᵀ M w` evaluated so that swapping `v` and `w` gives a bitwise-identical
/// result for symmetric `M`.
fn symmetric_quadratic(m: &Mat<f64>, v: &[f64], w: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for j in 0..n {
        let col = m.col(j);
        let mut part = col[j] * (v[j] * w[j]);
        for i in 0..j {
            part += col[i] * (v[i] * w[j] + v[j] * w[i]);
        }
        acc += part;
    }
    acc
}

/// `B_q(v, w) = h^n vᵀ L^s w + h^n Σ_{i ∈ Ω\D̄} q_i v_i w_i`.
///
/// `q` is a full node field; only its annulus entries are read.
pub fn bilinear_form(op: &FractionalOperator, q: &[f64], part: &DomainPartition, v: &[f64], w: &[f64]) -> Result<f64> {
    let n = op.size();
    check_len(v.len(), n)?;
    check_len(w.len(), n)?;
    check_len(q.len(), n)?;
    check_len(part.node_count(), n)?;
    let mut potential = 0.0;
    for &i in part.annulus() {
        if !q[i].is_finite() {
            return Err(Error::validation(format!("potential is not finite at node {i}")));
        }
        potential += q[i] * (v[i] * w[i]);
    }
    let cell = op.grid().cell_measure();
    Ok(cell * (symmetric_quadratic(op.matrix(), v, w) + potential))
}

/// Discrete `H^s` norm `√(h^n ‖v‖² + h^n vᵀ L^s v)`, using the scenario's
/// own operator in place of `(-Δ)^s`.
pub fn hs_norm(op: &FractionalOperator, v: &[f64]) -> Result<f64> {
    check_len(v.len(), op.size())?;
    let l2 = dot(v, v);
    let form = symmetric_quadratic(op.matrix(), v, v);
    let scale = op.factorization().max_eigenvalue().powf(op.exponent()) * l2;
    if form < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!("negative fractional energy {form:.3e}")));
    }
    Ok((op.grid().cell_measure() * (l2 + form.max(0.0))).sqrt())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{Grid, PartitionSpec, Shape};

    fn setup() -> (FractionalOperator, DomainPartition) {
        let grid = Arc::new(Grid::new(2, 1.5, 13).unwrap());
        let l = assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5).unwrap()).unwrap();
        let op = spectral_fractional_power(grid.clone(), &l, 0.5).unwrap();
        let spec = PartitionSpec {
            omega: Shape::ball(&[0.0, 0.0], 0.6),
            obstacle: Some(Shape::ball(&[0.0, 0.0], 0.2)),
            control: Shape::cuboid(&[-1.45, -0.5], &[-0.8, 0.5]),
            observation: Shape::cuboid(&[0.8, -0.5], &[1.45, 0.5]),
        };
        let part = DomainPartition::new(&grid, &spec).unwrap();
        (op, part)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn bilinear_form_on_eigenvector() {
        let (op, part) = setup();
        let n = op.size();
        let k = 5;
        let e: Vec<f64> = (0..n).map(|i| op.factorization().eigenvectors()[(i, k)]).collect();
        let b = bilinear_form(&op, &vec![0.0; n], &part, &e, &e).unwrap();
        let lam_s = op.factorization().eigenvalues()[k].powf(0.5);
        assert!((b - lam_s * op.grid().cell_measure()).abs() < 1e-12 * lam_s);
    }

    #[test]
    fn bilinear_form_is_exactly_symmetric() {
        let (op, part) = setup();
        let n = op.size();
        for seed in 0..5 {
            let (v, w, q) = (random(n, seed), random(n, seed + 100), random(n, seed + 200));
            assert_eq!(
                bilinear_form(&op, &q, &part, &v, &w).unwrap(),
                bilinear_form(&op, &q, &part, &w, &v).unwrap()
            );
        }
    }

    #[test]
    fn constant_potential_adds_mass_term() {
        let (op, part) = setup();
        let n = op.size();
        let c = 2.5;
        let v = part.mask(&random(n, 9), part.annulus());
        let b1 = bilinear_form(&op, &vec![c; n], &part, &v, &v).unwrap();
        let b0 = bilinear_form(&op, &vec![0.0; n], &part, &v, &v).unwrap();
        let mass = c * dot(&v, &v) * op.grid().cell_measure();
        assert!((b1 - b0 - mass).abs() < 1e-12 * b1.abs());
    }

    #[test]
    fn bilinear_form_dimension_mismatch() {
        let (op, part) = setup();
        let n = op.size();
        assert!(matches!(
            bilinear_form(&op, &vec![0.0; n], &part, &[1.0], &vec![0.0; n]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hs_norm_cases() {
        let (op, _) = setup();
        let n = op.size();
        assert_eq!(hs_norm(&op, &vec![0.0; n]).unwrap(), 0.0);
        let k = 3;
        let e: Vec<f64> = (0..n).map(|i| op.factorization().eigenvectors()[(i, k)]).collect();
        let lam_s = op.factorization().eigenvalues()[k].powf(0.5);
        let expected = (1.0 + lam_s).sqrt() * op.grid().cell_measure().sqrt();
        assert!((hs_norm(&op, &e).unwrap() - expected).abs() < 1e-12 * expected);
        for seed in 0..5 {
            let v = random(n, seed);
            let l2 = (dot(&v, &v) * op.grid().cell_measure()).sqrt();
            assert!(hs_norm(&op, &v).unwrap() >= l2);
        }
    }
}
