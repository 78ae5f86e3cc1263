//! Fractional power of an anisotropic operator: spectral calculus against
//! heat-semigroup quadrature, plus the energy norm.

use std::sync::Arc;

use fracdtn::geometry::Grid;
use fracdtn::operator::{
    assemble_local_operator, heat_quadrature_fractional_apply, hs_norm, EllipticTensorField, FractionalOperator,
    SpectralFactorization, TensorRule,
};

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.0, 25)?);
    let tensor = EllipticTensorField::new(
        2,
        0.4,
        TensorRule::Rotating { major: 1.8, minor: 0.6, angle: 0.2, twist: 1.0 },
    )?;
    let report = tensor.check(&grid)?;
    println!("ellipticity: eigenvalues in [{:.3}, {:.3}]", report.min_eigenvalue, report.max_eigenvalue);

    let local = assemble_local_operator(&grid, &tensor)?;
    let fac = Arc::new(SpectralFactorization::new(&local)?);
    println!("L_A spectrum: [{:.4e}, {:.4e}]", fac.min_eigenvalue(), fac.max_eigenvalue());

    let v: Vec<f64> = grid.points().map(|x| (-4.0 * (x[0] * x[0] + x[1] * x[1])).exp()).collect();
    for s in [0.2, 0.5, 0.8] {
        let op = FractionalOperator::new(grid.clone(), fac.clone(), s)?;
        let exact = op.apply(&v);
        let quad = heat_quadrature_fractional_apply(&local, &fac, s, &v, 400)?;
        let err: f64 = quad.value.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        println!(
            "s = {s}: quadrature rel. error {:.2e} (estimate {:.2e}), |v|_H^s = {:.5}",
            err / norm,
            quad.error_estimate / norm,
            hs_norm(&op, &v)?
        );
    }
    Ok(())
}
