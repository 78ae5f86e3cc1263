use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtn::apply_dtn_with;
use crate::error::{check_len, Error, Result};
use crate::forward::{ForwardSolver, ObstacleKind, Scenario};
use crate::geometry::{DomainPartition, PartitionSpec, Shape};
use crate::operator::FractionalOperator;
use crate::parallel::par_map;

/// Relative distinctness threshold `θ`.
pub const DEFAULT_THETA: f64 = 1e-6;

/// Relative misfit below which a candidate reproduces the measurement.
pub const EXACT_MATCH_TOLERANCE: f64 = 1e-10;

/// `(Λ g)` on the observation patch, in patch order.
pub fn observe(solver: &ForwardSolver, g: &[f64]) -> Result<Vec<f64>> {
    let lg = apply_dtn_with(solver, g)?;
    Ok(solver.scenario().partition().observation().iter().map(|&i| lg[i]).collect())
}

fn weighted_norm(v: &[f64], cell: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * cell).sqrt()
}

fn check_probe(part: &DomainPartition, g: &[f64]) -> Result<()> {
    check_len(g.len(), part.node_count())?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("probe datum is not finite"));
    }
    let on_patch = part.mask(g, part.control());
    if on_patch != g {
        return Err(Error::validation("probe datum must be supported in the control patch O1"));
    }
    if g.iter().all(|&v| v == 0.0) {
        return Err(Error::validation("probe datum must not vanish identically"));
    }
    Ok(())
}

fn check_hard_hypothesis(scn: &Scenario) -> Result<()> {
    if scn.kind() == ObstacleKind::Hard && scn.min_abs_potential() == 0.0 {
        return Err(Error::validation("hard obstacle requires a potential that does not vanish in omega"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Distinction {
    /// `‖(Λ₁g - Λ₂g)|_{O2}‖_{L²,h}`
    pub discrepancy: f64,
    /// `‖(Λ₁g)|_{O2}‖_{L²,h}`
    pub reference_norm: f64,
    pub theta: f64,
    pub distinct: bool,
    pub min_abs_potential: [f64; 2],
}

pub fn distinguish_obstacles(scn1: &Scenario, scn2: &Scenario, g: &[f64], theta: f64) -> Result<Distinction> {
    distinguish_with(&ForwardSolver::new(scn1)?, &ForwardSolver::new(scn2)?, g, theta)
}

pub fn distinguish_with(s1: &ForwardSolver, s2: &ForwardSolver, g: &[f64], theta: f64) -> Result<Distinction> {
    let (a, b) = (s1.scenario(), s2.scenario());
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::validation("theta must be a nonnegative number"));
    }
    if !Arc::ptr_eq(a.operator(), b.operator()) && a.operator().matrix() != b.operator().matrix() {
        return Err(Error::validation("scenarios use different operators"));
    }
    if a.partition().control() != b.partition().control() || a.partition().observation() != b.partition().observation()
    {
        return Err(Error::validation("scenarios use different measurement patches"));
    }
    check_probe(a.partition(), g)?;
    check_hard_hypothesis(a)?;
    check_hard_hypothesis(b)?;
    let y1 = observe(s1, g)?;
    let y2 = observe(s2, g)?;
    let diff: Vec<f64> = y1.iter().zip(&y2).map(|(x, y)| x - y).collect();
    let cell = a.cell_measure();
    let discrepancy = weighted_norm(&diff, cell);
    let reference_norm = weighted_norm(&y1, cell);
    Ok(Distinction {
        discrepancy,
        reference_norm,
        theta,
        distinct: discrepancy > theta * reference_norm,
        min_abs_potential: [a.min_abs_potential(), b.min_abs_potential()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleCandidate {
    pub shape: Shape,
    pub kind: ObstacleKind,
}

/// Finite search space of obstacles sharing one operator, `Ω` and patches.
#[derive(Debug, Clone)]
pub struct ObstacleCandidateFamily {
    operator: Arc<FractionalOperator>,
    candidates: Vec<ObstacleCandidate>,
    partitions: Vec<Arc<DomainPartition>>,
}

impl ObstacleCandidateFamily {
    /// `base` supplies `Ω` and the patches; its obstacle is ignored.
    pub fn new(
        operator: Arc<FractionalOperator>,
        base: &PartitionSpec,
        candidates: Vec<ObstacleCandidate>,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::validation("obstacle candidate family is empty"));
        }
        let mut partitions: Vec<Arc<DomainPartition>> = Vec::with_capacity(candidates.len());
        for (k, c) in candidates.iter().enumerate() {
            if c.kind == ObstacleKind::None {
                return Err(Error::validation(format!("candidate {k} must be soft or hard")));
            }
            let spec = PartitionSpec { obstacle: Some(c.shape.clone()), ..base.clone() };
            let part = DomainPartition::new(operator.grid(), &spec)
                .map_err(|e| Error::validation(format!("candidate {k}: {e}")))?;
            if let Some(j) = partitions.iter().position(|p| p.obstacle() == part.obstacle()) {
                return Err(Error::validation(format!("candidates {j} and {k} cover the same nodes")));
            }
            partitions.push(Arc::new(part));
        }
        Ok(ObstacleCandidateFamily { operator, candidates, partitions })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[ObstacleCandidate] {
        &self.candidates
    }

    pub fn partition(&self, k: usize) -> &Arc<DomainPartition> {
        &self.partitions[k]
    }

    pub fn operator(&self) -> &Arc<FractionalOperator> {
        &self.operator
    }

    /// Scenario of candidate `k` under the full-field potential `q`.
    pub fn scenario(&self, k: usize, q: &[f64]) -> Result<Scenario> {
        let c = &self.candidates[k];
        let scn = Scenario::new(self.operator.clone(), self.partitions[k].clone(), c.kind, q)?;
        if c.kind == ObstacleKind::Hard {
            return scn.requiring_nonvanishing_potential();
        }
        Ok(scn)
    }

    /// Noiseless observation `(Λ_{D_k,q} g)|_{O2}`.
    pub fn simulate(&self, k: usize, q: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let solver = ForwardSolver::new(&self.scenario(k, q)?)?;
        check_probe(solver.scenario().partition(), g)?;
        observe(&solver, g)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateMisfit {
    pub index: usize,
    pub obstacle_nodes: usize,
    pub kind: ObstacleKind,
    /// `None` when the candidate scenario is ill-posed.
    pub misfit: Option<f64>,
    pub relative_misfit: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstacleRecovery {
    pub best_candidate: usize,
    pub best_misfit: f64,
    pub relative_misfit: f64,
    /// Best relative misfit is below [`EXACT_MATCH_TOLERANCE`].
    pub exact_match: bool,
    pub misfits: Vec<CandidateMisfit>,
}

/// Exhaustive search: the candidate whose predicted observation is closest to
/// `measurement` in `L²(O2)`. Ties go to the smallest obstacle, then the
/// lowest index.
pub fn recover_obstacle(
    family: &ObstacleCandidateFamily,
    q: &[f64],
    g: &[f64],
    measurement: &[f64],
    threads: usize,
) -> Result<ObstacleRecovery> {
    if family.is_empty() {
        return Err(Error::validation("obstacle candidate family is empty"));
    }
    let part0 = family.partition(0);
    check_len(measurement.len(), part0.observation().len())?;
    check_probe(part0, g)?;
    let cell = family.operator().grid().cell_measure();
    let scale = weighted_norm(measurement, cell);

    let misfits = par_map(threads, family.len(), |k| {
        let scn = family.scenario(k, q)?;
        let misfit = match ForwardSolver::new(&scn) {
            Ok(solver) => {
                let pred = observe(&solver, g)?;
                let diff: Vec<f64> = pred.iter().zip(measurement).map(|(a, b)| a - b).collect();
                Some(weighted_norm(&diff, cell))
            }
            Err(Error::IllPosed { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(CandidateMisfit {
            index: k,
            obstacle_nodes: family.partition(k).obstacle().len(),
            kind: family.candidates()[k].kind,
            misfit,
            relative_misfit: misfit.map(|m| if scale > 0.0 { m / scale } else { m }),
        })
    })?;

    let best = misfits
        .iter()
        .filter(|c| c.misfit.is_some())
        .min_by(|a, b| {
            a.misfit.unwrap().total_cmp(&b.misfit.unwrap()).then(a.obstacle_nodes.cmp(&b.obstacle_nodes)).then(a.index.cmp(&b.index))
        })
        .ok_or(Error::IllPosed { ratio: 0.0, threshold: crate::forward::WELL_POSED_RATIO })?;
    let relative = best.relative_misfit.unwrap();
    Ok(ObstacleRecovery {
        best_candidate: best.index,
        best_misfit: best.misfit.unwrap(),
        relative_misfit: relative,
        exact_match: relative < EXACT_MATCH_TOLERANCE,
        misfits: misfits.clone(),
    })
}
