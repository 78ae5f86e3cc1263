//! Reference values computed independently of the code under test.

use std::sync::Arc;

use faer::Mat;
use fracdtn::forward::{ObstacleKind, Scenario};
use fracdtn::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use fracdtn::inverse::{alpha_sweep, distinguish_obstacles, runge_approximate, RungeOptions, DEFAULT_THETA};
use fracdtn::operator::{
    assemble_local_operator, heat_quadrature_fractional_apply, spectral_fractional_power, EllipticTensorField,
    FractionalOperator, LocalOperator, SpectralFactorization,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn identity_operator(m: usize) -> Arc<FractionalOperator> {
    let grid = Arc::new(Grid::new(2, 1.5, m).unwrap());
    let local = assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5).unwrap()).unwrap();
    Arc::new(spectral_fractional_power(grid, &local, 0.5).unwrap())
}

#[test]
fn quadrature_matches_spectral_route_on_random_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let n = 50;
    let b = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut a = b.transpose() * &b;
    for i in 0..n {
        a[(i, i)] += 0.1;
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let local = LocalOperator::from_matrix(a, 1.0).unwrap();
    let fac = SpectralFactorization::new(&local).unwrap();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let exact = fac.apply_function(|l| l.powf(0.7), &v);
    let quad = heat_quadrature_fractional_apply(&local, &fac, 0.7, &v, 400).unwrap();
    let err: f64 = quad.value.iter().zip(&exact).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err < 1e-6 * scale, "{}", err / scale);
}

fn side_spec(obstacle: Shape) -> PartitionSpec {
    PartitionSpec {
        omega: Shape::ball(&[0.0, 0.0], 0.5),
        obstacle: Some(obstacle),
        control: Shape::cuboid(&[-1.45, -0.6], &[-0.6, 0.6]),
        observation: Shape::cuboid(&[0.6, -0.6], &[1.45, 0.6]),
    }
}

fn bump_probe(grid: &Grid, part: &DomainPartition) -> Vec<f64> {
    let mut g = vec![0.0; grid.len()];
    for &i in part.control() {
        let x = grid.point(i);
        g[i] = (-((x[0] + 1.0).powi(2) + (x[1] - 0.1).powi(2)) / 0.1).exp();
    }
    g
}

#[test]
fn nested_balls_are_distinct() {
    let op = identity_operator(33);
    let grid = op.grid().clone();
    let small = Arc::new(DomainPartition::new(&grid, &side_spec(Shape::ball(&[0.0, 0.0], 0.1))).unwrap());
    let large = Arc::new(DomainPartition::new(&grid, &side_spec(Shape::ball(&[0.0, 0.0], 0.18))).unwrap());
    assert_ne!(small.obstacle(), large.obstacle());
    let q = vec![1.0; grid.len()];
    let s1 = Scenario::new(op.clone(), small.clone(), ObstacleKind::Soft, &q).unwrap();
    let s2 = Scenario::new(op, large, ObstacleKind::Soft, &q).unwrap();
    let d = distinguish_obstacles(&s1, &s2, &bump_probe(&grid, &small), DEFAULT_THETA).unwrap();
    assert!(d.distinct, "{d:?}");
}

#[test]
fn mixed_kinds_with_different_potentials_are_distinct() {
    let op = identity_operator(33);
    let grid = op.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..5 {
        let p1 = Arc::new(DomainPartition::new(&grid, &side_spec(Shape::ball(&[-0.15, 0.0], 0.12))).unwrap());
        let p2 = Arc::new(DomainPartition::new(&grid, &side_spec(Shape::cuboid(&[0.0, -0.1], &[0.25, 0.15]))).unwrap());
        let q1: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.5..2.0)).collect();
        let q2: Vec<f64> = (0..grid.len()).map(|_| -rng.random_range(0.5..2.0)).collect();
        let s1 = Scenario::new(op.clone(), p1.clone(), ObstacleKind::Soft, &q1).unwrap();
        let s2 = Scenario::new(op.clone(), p2, ObstacleKind::Hard, &q2).unwrap().requiring_nonvanishing_potential().unwrap();
        let d = distinguish_obstacles(&s1, &s2, &bump_probe(&grid, &p1), DEFAULT_THETA).unwrap();
        assert!(d.distinct, "trial {trial}: {d:?}");
        assert!(d.min_abs_potential.iter().all(|&m| m >= 0.5));
    }
}

#[test]
fn sub_box_target_reaches_ten_percent() {
    let op = identity_operator(33);
    let grid = op.grid().clone();
    let bars = Shape::Union(vec![
        Shape::cuboid(&[-0.8, -0.8], &[-0.52, 0.8]),
        Shape::cuboid(&[0.52, -0.8], &[0.8, 0.8]),
    ]);
    let spec = PartitionSpec {
        omega: Shape::cuboid(&[-0.5, -0.5], &[0.5, 0.5]),
        obstacle: Some(Shape::ball(&[0.0, 0.0], 0.15)),
        control: bars.clone(),
        observation: bars,
    };
    let part = Arc::new(DomainPartition::new(&grid, &spec).unwrap());
    assert!(2 * part.control().len() >= part.annulus().len());
    let scn = Scenario::new(op, part, ObstacleKind::Soft, &vec![0.0; grid.len()]).unwrap();
    let sub = Shape::cuboid(&[0.15, -0.45], &[0.45, 0.45]);
    let phi: Vec<f64> = grid.points().map(|x| if sub.contains_strict(x) { 1.0 } else { 0.0 }).collect();
    let res = runge_approximate(&scn, &phi, &alpha_sweep(1.0, 13, 24.0), &RungeOptions::default()).unwrap();
    assert!(res.monotone);
    assert!(res.relative_residual < 0.1, "{}", res.relative_residual);
}
