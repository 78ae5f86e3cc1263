use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{thin_svd, ThinSvd};
use crate::error::{check_len, Error, Result};
use crate::forward::{ForwardSolver, Scenario};
use crate::parallel::par_map;

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RungeOptions {
    pub threads: usize,
}

/// Geometric sweep from `top` down to `top · 10^{-decades}`, `count` values.
pub fn alpha_sweep(top: f64, count: usize, decades: f64) -> Vec<f64> {
    if count == 1 {
        return vec![top];
    }
    (0..count).map(|k| top * 10f64.powf(-decades * k as f64 / (count - 1) as f64)).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RungePathPoint {
    pub alpha: f64,
    /// Minimal Tikhonov residual `‖S g_α - φ‖_{L²,h}` from the spectral formula.
    pub residual: f64,
    pub relative_residual: f64,
    /// Residual of the computed control, evaluated directly.
    pub achieved_residual: f64,
    pub control_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RungeResult {
    /// Control on every node, supported in `O1`.
    pub control: Vec<f64>,
    pub alpha: f64,
    /// `‖u_g|_{Ω\D̄} - φ‖_{L²,h}` for the returned control.
    pub residual: f64,
    pub relative_residual: f64,
    pub target_norm: f64,
    /// Part of `φ` orthogonal to the range of `S`.
    pub unreachable_norm: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub path: Vec<RungePathPoint>,
    /// Path residuals are nonincreasing as `α` decreases.
    pub monotone: bool,
}

/// Solution operator `S: g|_{O1} ↦ u_g|_{Ω\D̄}`, assembled from nodal
/// excitations, with its SVD.
pub struct ControlOperator {
    matrix: Mat<f64>,
    svd: ThinSvd,
    control: Vec<usize>,
    annulus: Vec<usize>,
    cell: f64,
    nodes: usize,
}

impl ControlOperator {
    pub fn assemble(scn: &Scenario, threads: usize) -> Result<Self> {
        let solver = ForwardSolver::new(scn)?;
        let part = scn.partition();
        let n = scn.node_count();
        let control = part.control().to_vec();
        let annulus = part.annulus().to_vec();
        let zero = vec![0.0; n];
        let cols = par_map(threads, control.len(), |j| {
            let mut g = vec![0.0; n];
            g[control[j]] = 1.0;
            let u = solver.solve_values(&g, &zero)?;
            Ok(annulus.iter().map(|&i| u[i]).collect::<Vec<f64>>())
        })?;
        let matrix = Mat::<f64>::from_fn(annulus.len(), control.len(), |i, j| cols[j][i]);
        let svd = thin_svd(&matrix)?;
        Ok(ControlOperator { matrix, svd, control, annulus, cell: scn.cell_measure(), nodes: n })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.s
    }

    pub fn sigma_max(&self) -> f64 {
        self.svd.s.first().copied().unwrap_or(0.0)
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.annulus.len()).map(|i| (0..g.len()).map(|j| self.matrix[(i, j)] * g[j]).sum()).collect()
    }
}

fn norm_h(v: &[f64], cell: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * cell).sqrt()
}

/// Tikhonov-regularized control `argmin ‖S g - φ‖² + α ‖g‖²` for each `α`
/// of a decreasing sweep, returning the control with the smallest achieved
/// residual. `φ` is a full node field read on the annulus.
pub fn runge_approximate(scn: &Scenario, phi: &[f64], alphas: &[f64], opts: &RungeOptions) -> Result<RungeResult> {
    runge_approximate_with(&ControlOperator::assemble(scn, opts.threads)?, phi, alphas)
}

pub fn runge_approximate_with(op: &ControlOperator, phi: &[f64], alphas: &[f64]) -> Result<RungeResult> {
    check_len(phi.len(), op.nodes)?;
    if alphas.is_empty() {
        return Err(Error::validation("regularization sweep is empty"));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) || alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("regularization parameters must be positive and strictly decreasing"));
    }
    let target: Vec<f64> = op.annulus.iter().map(|&i| phi[i]).collect();
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("target is not finite on the annulus"));
    }
    let target_norm = norm_h(&target, op.cell);
    let svd = &op.svd;
    let c = svd.project(&target);
    let mut perp = target.clone();
    for (k, ck) in c.iter().enumerate() {
        for (i, p) in perp.iter_mut().enumerate() {
            *p -= svd.u[(i, k)] * ck;
        }
    }
    let perp_sq: f64 = perp.iter().map(|x| x * x).sum();
    let rel = |r: f64| if target_norm > 0.0 { r / target_norm } else { r };

    let mut path = Vec::with_capacity(alphas.len());
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for &alpha in alphas {
        let filtered: f64 = svd
            .s
            .iter()
            .zip(&c)
            .map(|(s, ck)| {
                let damp = ck / (1.0 + s * s / alpha);
                damp * damp
            })
            .sum();
        let residual = ((filtered + perp_sq) * op.cell).sqrt();
        let weights: Vec<f64> =
            svd.s.iter().zip(&c).map(|(s, ck)| if *s > 0.0 { ck / s / (1.0 + alpha / (s * s)) } else { 0.0 }).collect();
        let g = svd.expand(&weights);
        let diff: Vec<f64> = op.apply(&g).iter().zip(&target).map(|(a, b)| a - b).collect();
        let achieved = norm_h(&diff, op.cell);
        path.push(RungePathPoint {
            alpha,
            residual,
            relative_residual: rel(residual),
            achieved_residual: achieved,
            control_norm: norm_h(&g, op.cell),
        });
        if best.as_ref().is_none_or(|b| achieved < b.2) {
            best = Some((alpha, g, achieved));
        }
    }
    let (alpha, g, residual) = best.expect("nonempty sweep");
    let mut control = vec![0.0; op.nodes];
    for (j, &i) in op.control.iter().enumerate() {
        control[i] = g[j];
    }
    let monotone = path.windows(2).all(|w| w[1].residual <= w[0].residual);
    Ok(RungeResult {
        control,
        alpha,
        residual,
        relative_residual: rel(residual),
        target_norm,
        unreachable_norm: (perp_sq * op.cell).sqrt(),
        sigma_max: op.sigma_max(),
        sigma_min: svd.s.last().copied().unwrap_or(0.0),
        path,
        monotone,
    })
}
