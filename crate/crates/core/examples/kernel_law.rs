//! Off-diagonal kernel of `L^s`: log-log slope against `-(n + 2s)` and the
//! prefactor against the free-space fractional Laplacian constant.

use std::sync::Arc;

use fracdtn::geometry::Grid;
use fracdtn::operator::{
    extract_kernel, fractional_laplacian_constant, spectral_fractional_power, assemble_local_operator,
    EllipticTensorField, KernelFitOptions,
};

fn main() -> fracdtn::Result<()> {
    let m = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(33);
    let grid = Arc::new(Grid::new(2, 1.5, m)?);
    let local = assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5)?)?;
    let s = 0.5;
    let op = spectral_fractional_power(grid.clone(), &local, s)?;
    let fit = extract_kernel(&op).fit(&KernelFitOptions::default());
    let c = fractional_laplacian_constant(2, s);
    println!("{m}x{m} grid, {} pairs", fit.pairs);
    println!("slope     {:.4} (expected {:.1})", fit.slope, fit.expected_slope);
    println!("prefactor {:.5} vs c = {:.5} ({:.1}% off)", fit.prefactor, c, 100.0 * (fit.prefactor / c - 1.0).abs());
    println!("bounds    c1 = {:.5}, c2 = {:.5}", fit.lower_constant, fit.upper_constant);

    // anisotropy changes the constants, not the exponent
    let aniso = EllipticTensorField::constant(2, 0.3, vec![2.0, 0.5, 0.5, 1.0])?;
    let op = spectral_fractional_power(grid, &assemble_local_operator(op.grid(), &aniso)?, s)?;
    let fit = extract_kernel(&op).fit(&KernelFitOptions::default());
    println!("anisotropic: slope {:.4}, c1 = {:.5}, c2 = {:.5}", fit.slope, fit.lower_constant, fit.upper_constant);
    Ok(())
}
