//! Exterior Dirichlet-to-Neumann map `Λ g = (L^s u_g)|_{Ω_e}` and its
//! patch-restricted matrix `O1 → O2`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::forward::{ForwardSolver, Scenario};
use crate::parallel::par_map;

/// `Λ g` on every node: `(L^s u_g)` on the exterior, zero inside `Ω`.
///
/// Only the exterior entries of `g` are read. The interior source is zero.
pub fn apply_dtn(scn: &Scenario, g: &[f64]) -> Result<Vec<f64>> {
    apply_dtn_with(&ForwardSolver::new(scn)?, g)
}

pub fn apply_dtn_with(solver: &ForwardSolver, g: &[f64]) -> Result<Vec<f64>> {
    let n = solver.scenario().node_count();
    let u = solver.solve_values(g, &vec![0.0; n])?;
    let mut out = vec![0.0; n];
    for &e in solver.scenario().partition().exterior() {
        out[e] = solver.image_entry(e, &u);
    }
    Ok(out)
}

/// `h^n Σ_E a_e b_e`, the duality pairing on exterior data.
pub fn exterior_pairing(scn: &Scenario, a: &[f64], b: &[f64]) -> Result<f64> {
    let n = scn.node_count();
    check_len(a.len(), n)?;
    check_len(b.len(), n)?;
    let sum: f64 = scn.partition().exterior().iter().map(|&e| a[e] * b[e]).sum();
    Ok(sum * scn.cell_measure())
}

/// Excitations spanning the control patch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DtnBasis {
    /// Unit value at one node of `O1`.
    #[default]
    Nodal,
    /// `exp(-|x - x_j|² / width²)` restricted to `O1`.
    Bump { width: f64 },
}

impl DtnBasis {
    /// The `j`-th excitation as a full node field.
    pub fn excitation(&self, scn: &Scenario, j: usize) -> Result<Vec<f64>> {
        let part = scn.partition();
        let o1 = part.control();
        if j >= o1.len() {
            return Err(Error::validation(format!("excitation {j} out of range for |O1| = {}", o1.len())));
        }
        let mut g = vec![0.0; scn.node_count()];
        match *self {
            DtnBasis::Nodal => g[o1[j]] = 1.0,
            DtnBasis::Bump { width } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::validation("bump width must be positive"));
                }
                let grid = scn.operator().grid();
                let c = grid.point(o1[j]);
                for &i in o1 {
                    let r2: f64 = grid.point(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    g[i] = (-r2 / (width * width)).exp();
                }
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DtnOptions {
    pub basis: DtnBasis,
    /// Worker threads for the column solves; 0 or 1 means serial.
    pub threads: usize,
}

/// `|O2| × |O1|` matrix whose column `j` is `(Λ g_j)|_{O2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    cell_measure: f64,
    control: Vec<usize>,
    observation: Vec<usize>,
    basis: DtnBasis,
}

#[derive(Debug, Serialize, Deserialize)]
struct DtnHeader {
    rows: usize,
    cols: usize,
    cell_measure: f64,
    control_nodes: Vec<usize>,
    observation_nodes: Vec<usize>,
    basis: DtnBasis,
    dtype: String,
    layout: String,
}

pub fn assemble_dtn_matrix(scn: &Scenario) -> Result<DtnMatrix> {
    assemble_dtn_matrix_with(&ForwardSolver::new(scn)?, &DtnOptions::default())
}

pub fn assemble_dtn_matrix_with(solver: &ForwardSolver, opts: &DtnOptions) -> Result<DtnMatrix> {
    let scn = solver.scenario();
    let part = scn.partition();
    let control = part.control().to_vec();
    let observation = part.observation().to_vec();
    let columns = par_map(opts.threads, control.len(), |j| {
        let g = opts.basis.excitation(scn, j)?;
        let lg = apply_dtn_with(solver, &g)?;
        Ok(observation.iter().map(|&r| lg[r]).collect::<Vec<f64>>())
    })?;
    let (rows, cols) = (observation.len(), control.len());
    let mut data = vec![0.0; rows * cols];
    for (j, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            data[r * cols + j] = v;
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite DtN entry"));
    }
    Ok(DtnMatrix { rows, cols, data, cell_measure: scn.cell_measure(), control, observation, basis: opts.basis })
}

impl DtnMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn control_nodes(&self) -> &[usize] {
        &self.control
    }

    pub fn observation_nodes(&self) -> &[usize] {
        &self.observation
    }

    pub fn basis(&self) -> DtnBasis {
        self.basis
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self - other`; both must share patches and basis.
    pub fn difference(&self, other: &DtnMatrix) -> Result<DtnMatrix> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    pub(crate) fn check_compatible(&self, other: &DtnMatrix) -> Result<()> {
        if self.control != other.control
            || self.observation != other.observation
            || self.basis != other.basis
            || self.cell_measure != other.cell_measure
        {
            return Err(Error::validation("DtN matrices live on different patches or bases"));
        }
        Ok(())
    }

    /// Adds `noise` (row-major, same shape) to the entries.
    pub fn perturbed(&self, noise: &[f64]) -> Result<DtnMatrix> {
        check_len(noise.len(), self.data.len())?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(noise) {
            *a += b;
        }
        Ok(out)
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (row-major
    /// little-endian `f64`).
    /// JSON header and little-endian payload, as written by [`Self::write_binary`].
    pub fn encode(&self) -> Result<(String, Vec<u8>)> {
        let header = DtnHeader {
            rows: self.rows,
            cols: self.cols,
            cell_measure: self.cell_measure,
            control_nodes: self.control.clone(),
            observation_nodes: self.observation.clone(),
            basis: self.basis,
            dtype: "f64le".into(),
            layout: "row-major".into(),
        };
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Ok((serde_json::to_string_pretty(&header)?, bytes))
    }

    pub fn write_binary(&self, dir: &Path, stem: &str) -> Result<()> {
        let (header, bytes) = self.encode()?;
        fs::write(dir.join(format!("{stem}.json")), header)?;
        fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        Ok(())
    }

    pub fn read_binary(dir: &Path, stem: &str) -> Result<DtnMatrix> {
        let header: DtnHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        if header.dtype != "f64le" || header.layout != "row-major" {
            return Err(Error::validation("unsupported DtN payload format"));
        }
        let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
        check_len(bytes.len(), header.rows * header.cols * 8)?;
        check_len(header.control_nodes.len(), header.cols)?;
        check_len(header.observation_nodes.len(), header.rows)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(DtnMatrix {
            rows: header.rows,
            cols: header.cols,
            data,
            cell_measure: header.cell_measure,
            control: header.control_nodes,
            observation: header.observation_nodes,
            basis: header.basis,
        })
    }

    /// Long-format CSV: `observation_node,control_node,value`.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "observation_node,control_node,value")?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                writeln!(out, "{},{},{:e}", self.observation[r], self.control[c], self.get(r, c))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Residual of `⟨(Λ₁ - Λ₂) g₁, g₂⟩ = h^n Σ_{Ω\D̄} (q₁ - q₂) u₁ u₂`, with
/// `u₁` solved under scenario 1 from `g₁` (read on `O1`) and `u₂` under
/// scenario 2 from `g₂` (read on `O2`).
pub fn integral_identity_check(scn1: &Scenario, scn2: &Scenario, g1: &[f64], g2: &[f64]) -> Result<IdentityCheck> {
    let s1 = ForwardSolver::new(scn1)?;
    let s2 = ForwardSolver::new(scn2)?;
    integral_identity_check_with(&s1, &s2, g1, g2)
}

pub fn integral_identity_check_with(
    s1: &ForwardSolver,
    s2: &ForwardSolver,
    g1: &[f64],
    g2: &[f64],
) -> Result<IdentityCheck> {
    let (scn1, scn2) = (s1.scenario(), s2.scenario());
    require_same_obstacle(scn1, scn2)?;
    let part = scn1.partition();
    let n = scn1.node_count();
    check_len(g1.len(), n)?;
    check_len(g2.len(), n)?;
    let g1 = part.mask(g1, part.control());
    let g2 = part.mask(g2, part.observation());
    let cell = scn1.cell_measure();

    let l1 = apply_dtn_with(s1, &g1)?;
    let l2 = apply_dtn_with(s2, &g1)?;
    let lhs: f64 = part.observation().iter().map(|&i| (l1[i] - l2[i]) * g2[i]).sum::<f64>() * cell;

    let zero = vec![0.0; n];
    let u1 = s1.solve_values(&g1, &zero)?;
    let u2 = s2.solve_values(&g2, &zero)?;
    let (q1, q2) = (scn1.potential(), scn2.potential());
    let rhs: f64 = part.annulus().iter().map(|&i| (q1[i] - q2[i]) * u1[i] * u2[i]).sum::<f64>() * cell;

    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + f64::MIN_POSITIVE);
    Ok(IdentityCheck { lhs, rhs, residual: if lhs == rhs { 0.0 } else { residual } })
}

/// Scenarios may differ only in the potential.
pub(crate) fn require_same_obstacle(a: &Scenario, b: &Scenario) -> Result<()> {
    let same_operator = std::sync::Arc::ptr_eq(a.operator(), b.operator())
        || (a.operator().exponent() == b.operator().exponent() && a.operator().matrix() == b.operator().matrix());
    if !same_operator {
        return Err(Error::validation("scenarios use different operators"));
    }
    let (pa, pb) = (a.partition(), b.partition());
    if pa.obstacle() != pb.obstacle() || pa.omega() != pb.omega() || a.kind() != b.kind() {
        return Err(Error::validation("scenarios have different obstacles; the integral identity does not apply"));
    }
    if pa.control() != pb.control() || pa.observation() != pb.observation() {
        return Err(Error::validation("scenarios use different measurement patches"));
    }
    Ok(())
}
