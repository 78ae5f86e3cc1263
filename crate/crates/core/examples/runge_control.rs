//! Runge approximation: drive the annulus trace toward a target with exterior
//! control, sweeping the Tikhonov parameter.

use std::sync::Arc;

use fracdtn::forward::{ObstacleKind, Scenario};
use fracdtn::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use fracdtn::inverse::{alpha_sweep, runge_approximate_with, ControlOperator};
use fracdtn::operator::{assemble_local_operator, spectral_fractional_power, EllipticTensorField};

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.5, 33)?);
    let op = Arc::new(spectral_fractional_power(
        grid.clone(),
        &assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5)?)?,
        0.5,
    )?);
    // thin patch on one side only, so the target is not reachable exactly
    let spec = PartitionSpec {
        omega: Shape::cuboid(&[-0.5, -0.5], &[0.5, 0.5]),
        obstacle: Some(Shape::ball(&[0.0, 0.0], 0.15)),
        control: Shape::cuboid(&[-1.2, -0.4], &[-0.9, 0.4]),
        observation: Shape::cuboid(&[0.9, -0.4], &[1.2, 0.4]),
    };
    let part = Arc::new(DomainPartition::new(&grid, &spec)?);
    let scn = Scenario::new(op, part.clone(), ObstacleKind::Soft, &vec![0.0; grid.len()])?;
    let ctrl = ControlOperator::assemble(&scn, 1)?;
    println!(
        "{} controls, {} annulus nodes, sigma in [{:.3e}, {:.3e}]",
        part.control().len(),
        part.annulus().len(),
        ctrl.singular_values().last().copied().unwrap_or(0.0),
        ctrl.sigma_max()
    );

    let phi = vec![1.0; grid.len()];
    let res = runge_approximate_with(&ctrl, &phi, &alpha_sweep(ctrl.sigma_max().powi(2), 13, 24.0))?;
    println!("{:>10}  {:>10}  {:>10}", "alpha", "rel.res", "|g|");
    for p in &res.path {
        println!("{:>10.3e}  {:>10.3e}  {:>10.3e}", p.alpha, p.relative_residual, p.control_norm);
    }
    println!("monotone: {}, best relative residual {:.3e}", res.monotone, res.relative_residual);
    Ok(())
}
