//! Single-measurement obstacle identification over a 3x3 family of soft
//! balls, noiseless and with 1% relative noise.

use std::sync::Arc;

use fracdtn::forward::ObstacleKind;
use fracdtn::geometry::{Grid, PartitionSpec, Shape};
use fracdtn::inverse::{gaussian_noise, recover_obstacle, ObstacleCandidate, ObstacleCandidateFamily};
use fracdtn::operator::{assemble_local_operator, spectral_fractional_power, EllipticTensorField};

fn main() -> fracdtn::Result<()> {
    let grid = Arc::new(Grid::new(2, 1.5, 33)?);
    let op = Arc::new(spectral_fractional_power(
        grid.clone(),
        &assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5)?)?,
        0.5,
    )?);
    let base = PartitionSpec {
        omega: Shape::ball(&[0.0, 0.0], 0.5),
        obstacle: None,
        control: Shape::cuboid(&[-1.45, -0.6], &[-0.6, 0.6]),
        observation: Shape::cuboid(&[0.6, -0.6], &[1.45, 0.6]),
    };
    let mut candidates = Vec::new();
    for y in [-0.25, 0.0, 0.25] {
        for x in [-0.25, 0.0, 0.25] {
            candidates.push(ObstacleCandidate { shape: Shape::ball(&[x, y], 0.1), kind: ObstacleKind::Soft });
        }
    }
    let family = ObstacleCandidateFamily::new(op, &base, candidates)?;
    let q = vec![1.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for &i in family.partition(0).control() {
        let x = grid.point(i);
        g[i] = (-((x[0] + 1.0).powi(2) + (x[1] - 0.1).powi(2)) / 0.1).exp();
    }

    for truth in [0, 4, 7] {
        let clean = family.simulate(truth, &q, &g)?;
        let exact = recover_obstacle(&family, &q, &g, &clean, 1)?;
        let scale = clean.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut failures = 0;
        for seed in 0..20 {
            let noisy: Vec<f64> =
                clean.iter().zip(gaussian_noise(clean.len(), 0.01 * scale, seed)).map(|(a, b)| a + b).collect();
            failures += (recover_obstacle(&family, &q, &g, &noisy, 1)?.best_candidate != truth) as usize;
        }
        println!(
            "truth {truth}: noiseless -> {} (exact {}), 1% noise -> {failures}/20 misidentified",
            exact.best_candidate, exact.exact_match
        );
    }
    Ok(())
}
