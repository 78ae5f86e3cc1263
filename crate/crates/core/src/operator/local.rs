use faer::Mat;

use super::tensor::{for_each_extended, EllipticTensorField};
use crate::error::{Error, Result};
use crate::geometry::Grid;

/// Dense symmetric positive-definite matrix of `-∇·(A∇)` over all grid
/// nodes, with zero values assumed outside the box.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    matrix: Mat<f64>,
    spacing: f64,
}

impl LocalOperator {
    /// Wraps an arbitrary symmetric matrix, e.g. for tests of the
    /// functional calculus on non-grid operators.
    pub fn from_matrix(matrix: Mat<f64>, spacing: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let n = matrix.nrows();
        for j in 0..n {
            for i in 0..j {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::validation(format!("operator matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(LocalOperator { matrix, spacing })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        super::matvec(&self.matrix, v)
    }
}

/// Assembles `L_A = -∇·(A∇)` on the grid.
///
/// The discrete energy is `h^n Σ_p 2^{-n} Σ_σ (D_σ u)(p)ᵀ A(p) (D_σ u)(p)`,
/// summed over all sign patterns `σ ∈ {+,-}^n` of one-sided difference
/// gradients and over nodes `p` of the grid plus one ghost layer. Diagonal
/// coefficients reduce to face averages `(a(p) + a(p+e_k)) / 2`; the mixed
/// terms give the symmetric 9-point stencil in 2D. Each term is a Gram
/// form, so the matrix is symmetric positive semidefinite, and positive
/// definite thanks to the zero exterior.
pub fn assemble_local_operator(grid: &Grid, field: &EllipticTensorField) -> Result<LocalOperator> {
    field.check(grid)?;
    let n = grid.dim();
    let size = grid.len();
    let h = grid.spacing();
    let m = grid.nodes_per_axis() as isize;
    let weight = 1.0 / ((1usize << n) as f64 * h * h);
    let mut mat = Mat::<f64>::zeros(size, size);

    // stencil[k] = [(node, sign); 2] of the k-th difference component
    let mut stencil: Vec<[(Option<usize>, f64); 2]> = vec![[(None, 0.0); 2]; n];
    let mut shifted = vec![0isize; n];
    for_each_extended(n, m, |p, _| {
        let a = field.eval(&grid.coord_of(p));
        let here = grid.linear_index(p);
        for pattern in 0..(1usize << n) {
            for (k, st) in stencil.iter_mut().enumerate() {
                shifted.copy_from_slice(p);
                if pattern >> k & 1 == 0 {
                    shifted[k] += 1;
                    *st = [(grid.linear_index(&shifted), 1.0), (here, -1.0)];
                } else {
                    shifted[k] -= 1;
                    *st = [(here, 1.0), (grid.linear_index(&shifted), -1.0)];
                }
            }
            for k in 0..n {
                for l in 0..n {
                    let coef = a[k * n + l] * weight;
                    if coef == 0.0 {
                        continue;
                    }
                    for &(ia, sa) in &stencil[k] {
                        let Some(ia) = ia else { continue };
                        for &(ib, sb) in &stencil[l] {
                            let Some(ib) = ib else { continue };
                            mat[(ia, ib)] += coef * (sa * sb);
                        }
                    }
                }
            }
        }
        Ok(())
    })?;
    symmetrize(&mut mat);
    Ok(LocalOperator { matrix: mat, spacing: h })
}

/// Replaces `M` by `(M + Mᵀ) / 2` so that the result is bitwise symmetric.
pub(crate) fn symmetrize(mat: &mut Mat<f64>) {
    let n = mat.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (mat[(i, j)] + mat[(j, i)]);
            mat[(i, j)] = v;
            mat[(j, i)] = v;
        }
    }
}
