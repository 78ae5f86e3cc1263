use faer::Mat;
use serde::{Deserialize, Serialize};

use super::thin_svd;
use crate::dtn::{require_same_obstacle, DtnMatrix};
use crate::error::{Error, Result};
use crate::forward::{ForwardSolver, Scenario};
use crate::parallel::par_map;

/// Rank selection for the truncated SVD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Truncation {
    /// Plain least squares; only for overdetermined full-rank systems.
    None,
    /// Keep the `k` largest singular values.
    Rank { k: usize },
    /// Keep singular values above `tolerance · σ_max`.
    Relative { tolerance: f64 },
    /// Smallest rank whose data residual is at most `tau · delta`.
    Discrepancy { delta: f64, tau: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Relative { tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialOptions {
    pub truncation: Truncation,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditioningReport {
    pub rows: usize,
    pub cols: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition_number: f64,
    /// Count of singular values above `1e-12 · σ_max`.
    pub numerical_rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialRecovery {
    /// Estimate of `q₁ - q₂` on every node, zero off the annulus.
    pub delta_q: Vec<f64>,
    pub rank: usize,
    /// Smallest singular value kept (0 for rank 0).
    pub cutoff: f64,
    /// `‖M δq - d‖₂`
    pub residual: f64,
    pub data_norm: f64,
    pub conditioning: ConditioningReport,
}

/// Recovers `δq = q₁ - q₂` on the annulus from the identity
/// `⟨(Λ₁ - Λ₂) g_i, e_j⟩ = h^n Σ_p δq_p u₁ᵢ(x_p) u₂ⱼ(x_p)`, where `u₁ᵢ` solves
/// scenario 1 with the `i`-th control excitation and `u₂ⱼ` solves scenario 2
/// with the `j`-th nodal excitation on the observation patch.
pub fn recover_potential(
    dtn1: &DtnMatrix,
    dtn2: &DtnMatrix,
    scn1: &Scenario,
    scn2: &Scenario,
    opts: &PotentialOptions,
) -> Result<PotentialRecovery> {
    require_same_obstacle(scn1, scn2)?;
    dtn1.check_compatible(dtn2)?;
    let part = scn1.partition();
    if dtn1.control_nodes() != part.control() || dtn1.observation_nodes() != part.observation() {
        return Err(Error::validation("DtN patches do not match the scenario partition"));
    }
    let cell = scn1.cell_measure();
    if dtn1.cell_measure() != cell {
        return Err(Error::validation("DtN cell measure does not match the grid"));
    }
    let n = scn1.node_count();
    let annulus = part.annulus();
    let (n_ctrl, n_obs, n_pix) = (dtn1.cols(), dtn1.rows(), annulus.len());
    let rows = n_ctrl * n_obs;

    let s1 = ForwardSolver::new(scn1)?;
    let s2 = ForwardSolver::new(scn2)?;
    let zero = vec![0.0; n];
    let basis = dtn1.basis();
    let u1 = par_map(opts.threads, n_ctrl, |i| {
        let g = basis.excitation(scn1, i)?;
        let u = s1.solve_values(&g, &zero)?;
        Ok(annulus.iter().map(|&p| u[p]).collect::<Vec<f64>>())
    })?;
    let u2 = par_map(opts.threads, n_obs, |j| {
        let mut g = vec![0.0; n];
        g[part.observation()[j]] = 1.0;
        let u = s2.solve_values(&g, &zero)?;
        Ok(annulus.iter().map(|&p| u[p]).collect::<Vec<f64>>())
    })?;

    let m = Mat::<f64>::from_fn(rows, n_pix, |r, p| u1[r / n_obs][p] * u2[r % n_obs][p] * cell);
    let d: Vec<f64> = (0..rows).map(|r| cell * (dtn1.get(r % n_obs, r / n_obs) - dtn2.get(r % n_obs, r / n_obs))).collect();
    let data_norm = crate::operator::norm2(&d);

    let svd = thin_svd(&m)?;
    let s = &svd.s;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let sigma_min = s.last().copied().unwrap_or(0.0);
    let conditioning = ConditioningReport {
        rows,
        cols: n_pix,
        sigma_max,
        sigma_min,
        condition_number: if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY },
        numerical_rank: s.iter().filter(|&&v| v > 1e-12 * sigma_max).count(),
        singular_values: s.clone(),
    };

    let c = svd.project(&d);
    let rank = match opts.truncation {
        Truncation::None => {
            if rows < n_pix {
                return Err(Error::validation(format!(
                    "underdetermined potential system ({rows} equations, {n_pix} unknowns) needs a truncation rule"
                )));
            }
            if sigma_min <= 0.0 {
                return Err(Error::numerical("product matrix is rank deficient"));
            }
            s.len()
        }
        Truncation::Rank { k } => {
            if k > s.len() {
                return Err(Error::validation(format!("truncation rank {k} exceeds {}", s.len())));
            }
            k
        }
        Truncation::Relative { tolerance } => {
            if !(tolerance >= 0.0 && tolerance.is_finite()) {
                return Err(Error::validation("relative truncation tolerance must be nonnegative"));
            }
            s.iter().filter(|&&v| v > tolerance * sigma_max).count()
        }
        Truncation::Discrepancy { delta, tau } => {
            if !(delta >= 0.0 && delta.is_finite() && tau > 0.0 && tau.is_finite()) {
                return Err(Error::validation("discrepancy principle needs delta >= 0 and tau > 0"));
            }
            let mut perp = d.clone();
            for (k, ck) in c.iter().enumerate() {
                for (r, p) in perp.iter_mut().enumerate() {
                    *p -= svd.u[(r, k)] * ck;
                }
            }
            let mut tail: f64 = perp.iter().map(|x| x * x).sum();
            let mut tails = vec![0.0; s.len() + 1];
            tails[s.len()] = tail;
            for k in (0..s.len()).rev() {
                tail += c[k] * c[k];
                tails[k] = tail;
            }
            let bound = tau * delta;
            tails.iter().position(|&t| t.sqrt() <= bound).unwrap_or(s.len())
        }
    };

    let weights: Vec<f64> = (0..s.len()).map(|k| if k < rank && s[k] > 0.0 { c[k] / s[k] } else { 0.0 }).collect();
    let x = svd.expand(&weights);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("recovered potential is not finite"));
    }
    let fit: Vec<f64> = (0..rows).map(|r| (0..n_pix).map(|p| m[(r, p)] * x[p]).sum::<f64>() - d[r]).collect();
    let mut delta_q = vec![0.0; n];
    for (k, &p) in annulus.iter().enumerate() {
        delta_q[p] = x[k];
    }
    Ok(PotentialRecovery {
        delta_q,
        rank,
        cutoff: if rank > 0 { s[rank - 1] } else { 0.0 },
        residual: crate::operator::norm2(&fit),
        data_norm,
        conditioning,
    })
}
