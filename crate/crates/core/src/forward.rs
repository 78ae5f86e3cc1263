//! Exterior-value problem `(L^s + q) u = f` in `Ω \ D̄` with an embedded
//! soft (`u = 0` in `D`) or hard (`L^s u = 0` in `D`) obstacle and `u = g`
//! outside `Ω`.

use std::sync::Arc;

use faer::linalg::solvers::{Lblt, Solve};
use faer::{Col, Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::DomainPartition;
use crate::operator::{hs_norm, norm2, FractionalOperator};

/// `σ_min / σ_max` below which the interior system counts as singular.
pub const WELL_POSED_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Soft,
    Hard,
    None,
}

impl ObstacleKind {
    pub fn name(self) -> &'static str {
        match self {
            ObstacleKind::Soft => "soft",
            ObstacleKind::Hard => "hard",
            ObstacleKind::None => "none",
        }
    }
}

/// A fully specified forward problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    operator: Arc<FractionalOperator>,
    partition: Arc<DomainPartition>,
    kind: ObstacleKind,
    potential: Vec<f64>,
    source: Vec<f64>,
    require_nonvanishing_potential: bool,
}

impl Scenario {
    /// `potential` is a full node field; entries outside `Ω \ D̄` are dropped.
    pub fn new(
        operator: Arc<FractionalOperator>,
        partition: Arc<DomainPartition>,
        kind: ObstacleKind,
        potential: &[f64],
    ) -> Result<Self> {
        let n = operator.size();
        check_len(partition.node_count(), n)?;
        check_len(potential.len(), n)?;
        match (kind, partition.has_obstacle()) {
            (ObstacleKind::None, true) => {
                return Err(Error::validation("obstacle kind `none` but the partition has an obstacle"))
            }
            (ObstacleKind::Soft | ObstacleKind::Hard, false) => {
                return Err(Error::validation("soft/hard obstacle kind requires a nonempty obstacle"))
            }
            _ => {}
        }
        let potential = partition.mask(potential, partition.annulus());
        if potential.iter().any(|q| !q.is_finite()) {
            return Err(Error::validation("potential must be finite on the annulus"));
        }
        Ok(Scenario {
            operator,
            partition,
            kind,
            potential,
            source: vec![0.0; n],
            require_nonvanishing_potential: false,
        })
    }

    /// Sets the interior source; entries outside `Ω \ D̄` are dropped.
    pub fn with_source(mut self, source: &[f64]) -> Result<Self> {
        check_len(source.len(), self.operator.size())?;
        self.source = self.partition.mask(source, self.partition.annulus());
        Ok(self)
    }

    /// Requires `q ≠ 0` on the annulus, the hypothesis under which hard
    /// obstacles are identifiable.
    pub fn requiring_nonvanishing_potential(mut self) -> Result<Self> {
        self.require_nonvanishing_potential = true;
        if let Some(&i) = self.partition.annulus().iter().find(|&&i| self.potential[i] == 0.0) {
            return Err(Error::validation(format!("potential vanishes at annulus node {i}")));
        }
        Ok(self)
    }

    /// Same scenario with another potential.
    pub fn with_potential(&self, potential: &[f64]) -> Result<Self> {
        let mut next = Scenario::new(self.operator.clone(), self.partition.clone(), self.kind, potential)?;
        next.source = self.source.clone();
        if self.require_nonvanishing_potential {
            next = next.requiring_nonvanishing_potential()?;
        }
        Ok(next)
    }

    pub fn operator(&self) -> &Arc<FractionalOperator> {
        &self.operator
    }

    pub fn partition(&self) -> &Arc<DomainPartition> {
        &self.partition
    }

    pub fn kind(&self) -> ObstacleKind {
        self.kind
    }

    /// Full node field, zero outside the annulus.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn requires_nonvanishing_potential(&self) -> bool {
        self.require_nonvanishing_potential
    }

    pub fn node_count(&self) -> usize {
        self.operator.size()
    }

    pub fn cell_measure(&self) -> f64 {
        self.operator.grid().cell_measure()
    }

    /// `min |q|` over the annulus.
    pub fn min_abs_potential(&self) -> f64 {
        self.partition.annulus().iter().map(|&i| self.potential[i].abs()).fold(f64::INFINITY, f64::min)
    }

    /// Unknown nodes of the interior system: annulus, then obstacle for hard
    /// obstacles.
    pub fn unknowns(&self) -> Vec<usize> {
        let mut u = self.partition.annulus().to_vec();
        if self.kind == ObstacleKind::Hard {
            u.extend_from_slice(self.partition.obstacle());
        }
        u
    }

    /// Square interior system: rows of `L^s + q` on the annulus and, for a
    /// hard obstacle, pure `L^s` rows on the obstacle.
    pub fn interior_matrix(&self) -> Mat<f64> {
        let unknowns = self.unknowns();
        let annulus = self.partition.annulus().len();
        let ls = self.operator.matrix();
        Mat::<f64>::from_fn(unknowns.len(), unknowns.len(), |a, b| {
            let v = ls[(unknowns[a], unknowns[b])];
            if a == b && a < annulus {
                v + self.potential[unknowns[a]]
            } else {
                v
            }
        })
    }
}

/// Singular-value report of the interior system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellPosedness {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub well_posed: bool,
    /// `min |q|` on the annulus, reported for hard-obstacle hypotheses.
    pub min_abs_potential: f64,
}

pub fn check_eigenvalue_condition(scn: &Scenario) -> Result<WellPosedness> {
    check_eigenvalue_condition_with(scn, WELL_POSED_RATIO)
}

pub fn check_eigenvalue_condition_with(scn: &Scenario, threshold: f64) -> Result<WellPosedness> {
    let sv = scn
        .interior_matrix()
        .singular_values()
        .map_err(|e| Error::numerical(format!("singular values failed: {e:?}")))?;
    let sigma_max = sv[0];
    let sigma_min = *sv.last().expect("nonempty interior system");
    let ratio = if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 };
    Ok(WellPosedness {
        sigma_min,
        sigma_max,
        ratio,
        threshold,
        well_posed: ratio > threshold,
        min_abs_potential: scn.min_abs_potential(),
    })
}

/// Eigenvalues of the interior system `L^s_{NN} + q` (soft or no obstacle),
/// ascending. Setting a constant `q = -μ` for one of them produces a
/// resonant scenario.
pub fn interior_spectrum(scn: &Scenario) -> Result<Vec<f64>> {
    if scn.kind == ObstacleKind::Hard {
        return Err(Error::validation("interior spectrum is only defined for soft or absent obstacles"));
    }
    let mut eig = scn
        .interior_matrix()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numerical(format!("interior eigenvalues failed: {e:?}")))?;
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Per-region residual norms of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖(L^s u + q u - f)|_{Ω\D̄}‖₂`
    pub annulus: f64,
    /// Soft: `‖u|_D‖₂`; hard: `‖(L^s u)|_D‖₂`.
    pub obstacle: f64,
    /// `‖(u - g)|_{Ω_e}‖₂`
    pub exterior: f64,
    /// `‖L^s u‖₂`, scale for the relative checks.
    pub image_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Values on every node.
    pub u: Vec<f64>,
    /// `L^s u` on every node.
    pub image: Vec<f64>,
    pub residuals: Residuals,
}

impl Solution {
    /// `u` restricted to the exterior (zero inside `Ω`).
    pub fn exterior_trace(&self, part: &DomainPartition) -> Vec<f64> {
        part.mask(&self.u, part.exterior())
    }
}

/// Factorized interior system, reusable across exterior data.
#[derive(Debug)]
pub struct ForwardSolver {
    scenario: Scenario,
    unknowns: Vec<usize>,
    factor: Lblt<f64>,
    report: WellPosedness,
}

impl ForwardSolver {
    /// Factorizes the interior system; refuses ill-posed scenarios.
    pub fn new(scn: &Scenario) -> Result<Self> {
        Self::with_threshold(scn, WELL_POSED_RATIO)
    }

    pub fn with_threshold(scn: &Scenario, threshold: f64) -> Result<Self> {
        let report = check_eigenvalue_condition_with(scn, threshold)?;
        if !report.well_posed {
            return Err(Error::IllPosed { ratio: report.ratio, threshold });
        }
        let matrix = scn.interior_matrix();
        let factor = matrix.lblt(Side::Lower);
        Ok(ForwardSolver { scenario: scn.clone(), unknowns: scn.unknowns(), factor, report })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn report(&self) -> &WellPosedness {
        &self.report
    }

    /// Values on all nodes for exterior data `g` (a full node field, read
    /// only on the exterior) and interior source `f` (read only on the
    /// annulus).
    pub fn solve_values(&self, g: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let scn = &self.scenario;
        let n = scn.node_count();
        check_len(g.len(), n)?;
        check_len(f.len(), n)?;
        let part = scn.partition();
        let ls = scn.operator().matrix();
        let annulus = part.annulus().len();

        let mut u = vec![0.0; n];
        for &e in part.exterior() {
            u[e] = g[e];
        }
        let mut rhs = Col::<f64>::zeros(self.unknowns.len());
        for (a, &i) in self.unknowns.iter().enumerate() {
            let row = ls.col(i);
            let mut acc = if a < annulus { f[i] } else { 0.0 };
            for &e in part.exterior() {
                acc -= row[e] * u[e];
            }
            rhs[a] = acc;
        }
        let x = self.factor.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("interior solve produced non-finite values"));
        }
        for (a, &i) in self.unknowns.iter().enumerate() {
            u[i] = x[a];
        }
        Ok(u)
    }

    /// `(L^s u)_i` for one node, computed the same way for every caller.
    pub(crate) fn image_entry(&self, i: usize, u: &[f64]) -> f64 {
        let col = self.scenario.operator().matrix().col(i);
        let mut acc = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            acc += col[j] * uj;
        }
        acc
    }

    /// Full solve with the scenario's own source.
    pub fn solve(&self, g: &[f64]) -> Result<Solution> {
        self.solve_with_source(g, self.scenario.source())
    }

    pub fn solve_with_source(&self, g: &[f64], f: &[f64]) -> Result<Solution> {
        let u = self.solve_values(g, f)?;
        let scn = &self.scenario;
        let part = scn.partition();
        let image: Vec<f64> = (0..u.len()).map(|i| self.image_entry(i, &u)).collect();
        let q = scn.potential();
        let annulus = norm2(&part.annulus().iter().map(|&i| image[i] + q[i] * u[i] - f[i]).collect::<Vec<_>>());
        let obstacle = match scn.kind() {
            ObstacleKind::Soft => norm2(&part.obstacle().iter().map(|&i| u[i]).collect::<Vec<_>>()),
            ObstacleKind::Hard => norm2(&part.obstacle().iter().map(|&i| image[i]).collect::<Vec<_>>()),
            ObstacleKind::None => 0.0,
        };
        let exterior = norm2(&part.exterior().iter().map(|&i| u[i] - g[i]).collect::<Vec<_>>());
        let image_norm = norm2(&image);
        Ok(Solution { u, image, residuals: Residuals { annulus, obstacle, exterior, image_norm } })
    }
}

/// One-shot solve of the scenario for exterior data `g`.
pub fn solve_exterior_problem(scn: &Scenario, g: &[f64]) -> Result<Solution> {
    ForwardSolver::new(scn)?.solve(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityStatistics {
    pub trials: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub skipped: usize,
}

/// Empirical stability constant `max ‖u‖_{H^s} / (‖f‖_{L²} + ‖g‖_{H^s})`
/// over Gaussian draws of `f` on the annulus and `g` on the exterior.
pub fn stability_ratio(scn: &Scenario, trials: usize, seed: u64) -> Result<StabilityStatistics> {
    let solver = ForwardSolver::new(scn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let part = scn.partition();
    let n = scn.node_count();
    let op = scn.operator();
    let cell = scn.cell_measure();
    let (mut max_ratio, mut sum, mut used, mut skipped) = (0.0f64, 0.0, 0usize, 0usize);
    for _ in 0..trials {
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for &i in part.annulus() {
            f[i] = StandardNormal.sample(&mut rng);
        }
        for &i in part.exterior() {
            g[i] = StandardNormal.sample(&mut rng);
        }
        let ratio = match stability_sample(&solver, op, cell, &f, &g)? {
            Some(r) => r,
            None => {
                skipped += 1;
                continue;
            }
        };
        max_ratio = max_ratio.max(ratio);
        sum += ratio;
        used += 1;
    }
    Ok(StabilityStatistics { trials, max_ratio, mean_ratio: sum / used.max(1) as f64, skipped })
}

/// Single stability ratio; `None` for the degenerate `f = g = 0` draw.
pub fn stability_sample(
    solver: &ForwardSolver,
    op: &FractionalOperator,
    cell: f64,
    f: &[f64],
    g: &[f64],
) -> Result<Option<f64>> {
    let part = solver.scenario().partition();
    let g_ext = part.mask(g, part.exterior());
    let f_ann = part.mask(f, part.annulus());
    let denom = (norm2(&f_ann) * cell.sqrt()) + hs_norm(op, &g_ext)?;
    if denom == 0.0 {
        return Ok(None);
    }
    let u = solver.solve_values(&g_ext, &f_ann)?;
    Ok(Some(hs_norm(op, &u)? / denom))
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};

    use super::*;
    use crate::geometry::{Grid, PartitionSpec, Shape};
    use crate::operator::{assemble_local_operator, bilinear_form, spectral_fractional_power, EllipticTensorField};

    fn operator() -> Arc<FractionalOperator> {
        let grid = Arc::new(Grid::new(2, 1.5, 17).unwrap());
        let l = assemble_local_operator(&grid, &EllipticTensorField::identity(2, 0.5).unwrap()).unwrap();
        Arc::new(spectral_fractional_power(grid, &l, 0.5).unwrap())
    }

    fn partition(op: &FractionalOperator, obstacle: bool) -> Arc<DomainPartition> {
        let spec = PartitionSpec {
            omega: Shape::ball(&[0.0, 0.0], 0.6),
            obstacle: obstacle.then(|| Shape::ball(&[0.0, 0.0], 0.2)),
            control: Shape::cuboid(&[-1.45, -0.5], &[-0.8, 0.5]),
            observation: Shape::cuboid(&[0.8, -0.5], &[1.45, 0.5]),
        };
        Arc::new(DomainPartition::new(op.grid(), &spec).unwrap())
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn scenario(kind: ObstacleKind, q: f64) -> Scenario {
        let op = operator();
        let part = partition(&op, kind != ObstacleKind::None);
        let n = op.size();
        Scenario::new(op, part, kind, &vec![q; n]).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        for kind in [ObstacleKind::Soft, ObstacleKind::Hard, ObstacleKind::None] {
            let scn = scenario(kind, 1.0);
            let sol = solve_exterior_problem(&scn, &vec![0.0; scn.node_count()]).unwrap();
            assert!(sol.u.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn no_obstacle_matches_dense_schur_solve() {
        let scn = scenario(ObstacleKind::None, 0.0);
        let part = scn.partition().clone();
        let n = scn.node_count();
        let g = part.mask(&random(n, 4), part.exterior());
        let sol = solve_exterior_problem(&scn, &g).unwrap();

        // oracle: u_Ω = -(L^s_ΩΩ)^{-1} L^s_ΩE g_E via an LU solve
        let ls = scn.operator().matrix();
        let om = part.omega();
        let ex = part.exterior();
        let a = Mat::<f64>::from_fn(om.len(), om.len(), |i, j| ls[(om[i], om[j])]);
        let b = Col::<f64>::from_fn(om.len(), |i| -ex.iter().map(|&e| ls[(om[i], e)] * g[e]).sum::<f64>());
        let x = a.partial_piv_lu().solve(&b);
        for (k, &i) in om.iter().enumerate() {
            assert!((sol.u[i] - x[k]).abs() < 1e-10 * x.norm_max().max(1e-300));
        }
    }

    #[test]
    fn soft_obstacle_constraint_is_exact() {
        let scn = scenario(ObstacleKind::Soft, 0.5);
        let part = scn.partition().clone();
        let g = part.mask(&random(scn.node_count(), 5), part.exterior());
        let sol = solve_exterior_problem(&scn, &g).unwrap();
        assert!(part.obstacle().iter().all(|&i| sol.u[i] == 0.0));
        assert!(part.exterior().iter().all(|&i| sol.u[i] == g[i]));
        assert!(sol.residuals.annulus < 1e-10 * sol.residuals.image_norm);
    }

    #[test]
    fn hard_obstacle_constraint_holds() {
        let scn = scenario(ObstacleKind::Hard, 0.5);
        let part = scn.partition().clone();
        let g = part.mask(&random(scn.node_count(), 6), part.exterior());
        let sol = solve_exterior_problem(&scn, &g).unwrap();
        assert!(sol.residuals.obstacle <= 1e-8 * sol.residuals.image_norm);
        assert_eq!(sol.residuals.exterior, 0.0);
    }

    #[test]
    fn exterior_locality() {
        let scn = scenario(ObstacleKind::Soft, 1.0);
        let part = scn.partition().clone();
        let n = scn.node_count();
        let g = part.mask(&random(n, 7), part.exterior());
        let mut polluted = g.clone();
        for &i in part.omega() {
            polluted[i] = 1e3 * (i as f64 + 1.0);
        }
        let a = solve_exterior_problem(&scn, &g).unwrap();
        let b = solve_exterior_problem(&scn, &polluted).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn weak_form_consistency() {
        let op = operator();
        let part = partition(&op, true);
        let n = op.size();
        let q: Vec<f64> = random(n, 11).iter().map(|x| 1.0 + x).collect();
        let f = random(n, 12);
        let scn = Scenario::new(op.clone(), part.clone(), ObstacleKind::Hard, &q).unwrap().with_source(&f).unwrap();
        let g = part.mask(&random(n, 13), part.exterior());
        let sol = solve_exterior_problem(&scn, &g).unwrap();
        let cell = op.grid().cell_measure();
        for seed in 0..5 {
            let phi = part.mask(&random(n, 100 + seed), part.annulus());
            let lhs = bilinear_form(&op, scn.potential(), &part, &sol.u, &phi).unwrap();
            let rhs: f64 = part.annulus().iter().map(|&i| scn.source()[i] * phi[i] * cell).sum();
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn linearity_in_exterior_data() {
        let scn = scenario(ObstacleKind::Hard, 2.0);
        let part = scn.partition().clone();
        let n = scn.node_count();
        let solver = ForwardSolver::new(&scn).unwrap();
        let g1 = part.mask(&random(n, 21), part.exterior());
        let g2 = part.mask(&random(n, 22), part.exterior());
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let u1 = solver.solve(&g1).unwrap().u;
        let u2 = solver.solve(&g2).unwrap().u;
        let u = solver.solve(&combo).unwrap().u;
        let expect: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
        let diff: Vec<f64> = u.iter().zip(&expect).map(|(x, y)| x - y).collect();
        assert!(norm2(&diff) < 1e-10 * norm2(&expect));
    }

    #[test]
    fn eigenvalue_condition_reports() {
        let soft = scenario(ObstacleKind::Soft, 0.0);
        assert!(check_eigenvalue_condition(&soft).unwrap().well_posed);
        let free = scenario(ObstacleKind::None, 1.0);
        assert!(check_eigenvalue_condition(&free).unwrap().well_posed);

        let base = check_eigenvalue_condition(&soft).unwrap();
        let mu = interior_spectrum(&soft).unwrap()[0];
        let resonant = soft.with_potential(&vec![-mu; soft.node_count()]).unwrap();
        let report = check_eigenvalue_condition(&resonant).unwrap();
        assert!(!report.well_posed);
        assert!(report.sigma_min <= 1e-6 * base.sigma_min);
        assert!(matches!(ForwardSolver::new(&resonant), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn kind_and_partition_must_agree() {
        let op = operator();
        let n = op.size();
        let with = partition(&op, true);
        let without = partition(&op, false);
        assert!(Scenario::new(op.clone(), with, ObstacleKind::None, &vec![0.0; n]).is_err());
        assert!(Scenario::new(op.clone(), without.clone(), ObstacleKind::Soft, &vec![0.0; n]).is_err());
        assert!(Scenario::new(op, without, ObstacleKind::None, &vec![0.0; 3]).is_err());
    }

    #[test]
    fn nonvanishing_potential_flag() {
        let scn = scenario(ObstacleKind::Hard, 0.0);
        assert!(scn.clone().requiring_nonvanishing_potential().is_err());
        let ok = scenario(ObstacleKind::Hard, 0.3).requiring_nonvanishing_potential().unwrap();
        assert_eq!(ok.min_abs_potential(), 0.3);
    }

    #[test]
    fn stability_statistics() {
        let scn = scenario(ObstacleKind::Soft, 1.0);
        let small = stability_ratio(&scn, 100, 1).unwrap();
        let large = stability_ratio(&scn, 1000, 2).unwrap();
        assert!(small.max_ratio.is_finite() && small.max_ratio > 0.0);
        assert!(large.max_ratio < 2.0 * small.max_ratio);

        let solver = ForwardSolver::new(&scn).unwrap();
        let n = scn.node_count();
        let zero = vec![0.0; n];
        let op = scn.operator();
        assert_eq!(stability_sample(&solver, op, scn.cell_measure(), &zero, &zero).unwrap(), None);
        let f = random(n, 3);
        let g = random(n, 4);
        let r1 = stability_sample(&solver, op, scn.cell_measure(), &f, &g).unwrap().unwrap();
        let f2: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        let g2: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        let r2 = stability_sample(&solver, op, scn.cell_measure(), &f2, &g2).unwrap().unwrap();
        assert!((r1 - r2).abs() < 1e-12 * r1);
    }
}
