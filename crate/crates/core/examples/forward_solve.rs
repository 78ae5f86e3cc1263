//! Exterior Dirichlet problem with a soft and a hard obstacle, the
//! well-posedness report, and the resonance that makes a scenario ill-posed.

use std::sync::Arc;

use fracdtn::forward::{check_eigenvalue_condition, interior_spectrum, stability_ratio, ForwardSolver, ObstacleKind, Scenario};
use fracdtn::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use fracdtn::operator::{assemble_local_operator, spectral_fractional_power, EllipticTensorField, TensorRule};
use fracdtn::Error;

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.5, 25)?);
    let tensor = EllipticTensorField::new(2, 0.4, TensorRule::Rotating { major: 1.5, minor: 0.7, angle: 0.4, twist: 0.5 })?;
    let op = Arc::new(spectral_fractional_power(grid.clone(), &assemble_local_operator(&grid, &tensor)?, 0.5)?);
    let spec = PartitionSpec {
        omega: Shape::ball(&[0.0, 0.0], 0.6),
        obstacle: Some(Shape::ball(&[0.1, 0.0], 0.2)),
        control: Shape::cuboid(&[-1.4, -0.6], &[-0.7, 0.6]),
        observation: Shape::cuboid(&[0.7, -0.6], &[1.4, 0.6]),
    };
    let part = Arc::new(DomainPartition::new(&grid, &spec)?);
    let q = vec![1.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for &i in part.control() {
        g[i] = 1.0 + grid.point(i)[1];
    }

    for kind in [ObstacleKind::Soft, ObstacleKind::Hard] {
        let scn = Scenario::new(op.clone(), part.clone(), kind, &q)?;
        let solver = ForwardSolver::new(&scn)?;
        let sol = solver.solve(&g)?;
        let stab = stability_ratio(&scn, 10, 1)?;
        println!(
            "{:>4}: sigma ratio {:.3e}, residual {:.1e}, max |u| in annulus {:.4}, stability ratio <= {:.3}",
            kind.name(),
            solver.report().ratio,
            sol.residuals.annulus,
            part.annulus().iter().map(|&i| sol.u[i].abs()).fold(0.0, f64::max),
            stab.max_ratio
        );
    }

    // q = -lambda_1 puts zero in the interior spectrum
    let soft = Scenario::new(op.clone(), part.clone(), ObstacleKind::Soft, &vec![0.0; grid.len()])?;
    let lambda = interior_spectrum(&soft)?[0];
    let resonant = soft.with_potential(&vec![-lambda; grid.len()])?;
    println!("resonant q = {:.6}: ratio {:.3e}", -lambda, check_eigenvalue_condition(&resonant)?.ratio);
    match ForwardSolver::new(&resonant) {
        Err(e @ Error::IllPosed { .. }) => println!("refused: {e} (exit code {})", e.exit_code()),
        Err(e) => return Err(e),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
