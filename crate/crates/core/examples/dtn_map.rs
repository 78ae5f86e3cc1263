//! Exterior DtN matrix between two patches, its symmetry, and the integral
//! identity linking DtN differences to the potential contrast.

use std::sync::Arc;

use fracdtn::dtn::{apply_dtn, assemble_dtn_matrix, exterior_pairing, integral_identity_check};
use fracdtn::forward::{ObstacleKind, Scenario};
use fracdtn::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use fracdtn::operator::{assemble_local_operator, spectral_fractional_power, EllipticTensorField};

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.5, 25)?);
    let tensor = EllipticTensorField::constant(2, 0.4, vec![1.5, 0.3, 0.3, 0.8])?;
    let op = Arc::new(spectral_fractional_power(grid.clone(), &assemble_local_operator(&grid, &tensor)?, 0.6)?);
    let spec = PartitionSpec {
        omega: Shape::ball(&[0.0, 0.0], 0.6),
        obstacle: Some(Shape::cuboid(&[-0.2, -0.2], &[0.2, 0.2])),
        control: Shape::cuboid(&[-1.4, -0.5], &[-0.8, 0.5]),
        observation: Shape::cuboid(&[0.8, -0.5], &[1.4, 0.5]),
    };
    let part = Arc::new(DomainPartition::new(&grid, &spec)?);
    let q1: Vec<f64> = grid.points().map(|x| 1.0 + x[0]).collect();
    let q2 = vec![1.0; grid.len()];

    for kind in [ObstacleKind::Soft, ObstacleKind::Hard] {
        let scn1 = Scenario::new(op.clone(), part.clone(), kind, &q1)?;
        let scn2 = Scenario::new(op.clone(), part.clone(), kind, &q2)?;
        let d = assemble_dtn_matrix(&scn1)?;
        println!("{}: DtN {}x{}, |D|_F = {:.4e}", kind.name(), d.rows(), d.cols(), d.frobenius_norm());

        // symmetry on the whole exterior
        let g: Vec<f64> = (0..grid.len()).map(|i| if part.exterior().contains(&i) { (i as f64).sin() } else { 0.0 }).collect();
        let h: Vec<f64> = (0..grid.len()).map(|i| if part.exterior().contains(&i) { (i as f64 * 0.7).cos() } else { 0.0 }).collect();
        let gh = exterior_pairing(&scn1, &apply_dtn(&scn1, &g)?, &h)?;
        let hg = exterior_pairing(&scn1, &apply_dtn(&scn1, &h)?, &g)?;
        println!("  <Lg,h> = {gh:.12e}, <Lh,g> = {hg:.12e}");

        let check = integral_identity_check(&scn1, &scn2, &g, &h)?;
        println!("  identity: lhs {:.6e}, rhs {:.6e}, residual {:.1e}", check.lhs, check.rhs, check.residual);
    }
    Ok(())
}
