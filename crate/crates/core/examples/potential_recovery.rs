//! Potential contrast from two DtN matrices by truncated SVD, noiseless and
//! with 0.1% noise under the discrepancy principle.

use std::sync::Arc;

use fracdtn::dtn::assemble_dtn_matrix;
use fracdtn::forward::{ObstacleKind, Scenario};
use fracdtn::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use fracdtn::inverse::{gaussian_noise, recover_potential, PotentialOptions, Truncation};
use fracdtn::operator::{assemble_local_operator, spectral_fractional_power, EllipticTensorField};

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.5, 33)?);
    let op = Arc::new(spectral_fractional_power(
        grid.clone(),
        &assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5)?)?,
        0.5,
    )?);
    let frame = Shape::Union(vec![
        Shape::cuboid(&[-0.8, -0.8], &[0.8, -0.52]),
        Shape::cuboid(&[-0.8, 0.52], &[0.8, 0.8]),
        Shape::cuboid(&[-0.8, -0.52], &[-0.52, 0.52]),
        Shape::cuboid(&[0.52, -0.52], &[0.8, 0.52]),
    ]);
    let spec = PartitionSpec {
        omega: Shape::cuboid(&[-0.5, -0.5], &[0.5, 0.5]),
        obstacle: Some(Shape::ball(&[0.0, 0.0], 0.15)),
        control: frame.clone(),
        observation: frame,
    };
    let part = Arc::new(DomainPartition::new(&grid, &spec)?);
    let bump = Shape::cuboid(&[0.15, -0.12], &[0.4, 0.12]);
    let q1: Vec<f64> = grid.points().map(|x| if bump.contains_strict(x) { 1.0 } else { 0.0 }).collect();
    let q2 = vec![0.0; grid.len()];
    let scn1 = Scenario::new(op.clone(), part.clone(), ObstacleKind::Soft, &q1)?;
    let scn2 = Scenario::new(op, part.clone(), ObstacleKind::Soft, &q2)?;
    let d1 = assemble_dtn_matrix(&scn1)?;
    let d2 = assemble_dtn_matrix(&scn2)?;
    let truth = scn1.potential().to_vec();
    let rel_err = |est: &[f64]| {
        let e: f64 = est.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        e / truth.iter().map(|a| a * a).sum::<f64>().sqrt()
    };

    let exact = recover_potential(&d1, &d2, &scn1, &scn2, &PotentialOptions::default())?;
    let c = &exact.conditioning;
    println!("system {}x{}, condition number {:.3e}, rank {}", c.rows, c.cols, c.condition_number, c.numerical_rank);
    println!("noiseless: relative error {:.2e}", rel_err(&exact.delta_q));

    let noise = gaussian_noise(d1.data().len(), 1e-3 * d1.difference(&d2)?.frobenius_norm(), 11);
    let delta = grid.cell_measure() * noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let noisy = recover_potential(
        &d1.perturbed(&noise)?,
        &d2,
        &scn1,
        &scn2,
        &PotentialOptions { truncation: Truncation::Discrepancy { delta, tau: 1.0 }, threads: 1 },
    )?;
    println!("0.1% noise: rank {}, relative error {:.3}", noisy.rank, rel_err(&noisy.delta_q));
    Ok(())
}
