//! JSON scenario configuration and its validation.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtn::DtnBasis;
use crate::error::{Error, Result};
use crate::forward::{ObstacleKind, WELL_POSED_RATIO};
use crate::geometry::{DomainPartition, Grid, PartitionSpec, Shape};
use crate::inverse::{ObstacleCandidate, DEFAULT_THETA, EXACT_MATCH_TOLERANCE};
use crate::operator::{EllipticTensorField, KernelFitOptions, TensorRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub grid: GridConfig,
    pub tensor: TensorConfig,
    pub exponent: f64,
    pub geometry: PartitionSpec,
    #[serde(default = "default_kind")]
    pub obstacle_kind: ObstacleKind,
    #[serde(default)]
    pub potential: FieldSpec,
    pub experiment: Experiment,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn default_kind() -> ObstacleKind {
    ObstacleKind::None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub nodes_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorConfig {
    pub gamma: f64,
    pub field: TensorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorSpec {
    Identity,
    /// Row-major `n × n` matrix.
    Constant(Vec<f64>),
    Rotating { major: f64, minor: f64, angle: f64, twist: f64 },
    Bump { base: f64, amplitude: f64, center: Vec<f64>, width: f64 },
}

/// Scalar node field (potential, source, contrast).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    Constant(f64),
    /// One value per grid node.
    Pixels(Vec<f64>),
    /// `base + amplitude · exp(-|x - center|² / width²)`
    Gaussian { base: f64, amplitude: f64, center: Vec<f64>, width: f64 },
    /// `value` strictly inside `shape`, `outside` elsewhere.
    Indicator {
        shape: Shape,
        value: f64,
        #[serde(default)]
        outside: f64,
    },
    /// Independent uniform draws in `[lo, hi)` from the scenario seed.
    Random { lo: f64, hi: f64 },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Constant(0.0)
    }
}

/// Exterior datum, restricted to the control patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSpec {
    Gaussian { center: Vec<f64>, width: f64 },
    Constant(f64),
    Random,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec::Random
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub theta: f64,
    pub well_posed_ratio: f64,
    pub exact_match: f64,
    pub heat_quadrature_nodes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            theta: DEFAULT_THETA,
            well_posed_ratio: WELL_POSED_RATIO,
            exact_match: EXACT_MATCH_TOLERANCE,
            heat_quadrature_nodes: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Forward solve, well-posedness report and empirical stability.
    Forward {
        #[serde(default)]
        probe: ProbeSpec,
        #[serde(default)]
        source: FieldSpec,
        #[serde(default)]
        stability_trials: usize,
    },
    /// DtN matrix `O1 → O2` plus a symmetry check on the full exterior.
    Dtn {
        #[serde(default)]
        basis: DtnBasis,
        #[serde(default = "default_pairs")]
        symmetry_pairs: usize,
    },
    /// Integral identity between the scenario and a second potential.
    IdentityCheck {
        second_potential: FieldSpec,
        #[serde(default = "default_draws")]
        draws: usize,
    },
    /// Kernel power-law diagnostics and heat-quadrature cross-check.
    KernelBounds {
        #[serde(default)]
        fit: KernelFitOptions,
        #[serde(default)]
        quadrature_vectors: usize,
    },
    Runge {
        target: RungeTarget,
        #[serde(default = "default_alpha_count")]
        alpha_count: usize,
        #[serde(default = "default_alpha_decades")]
        alpha_decades: f64,
    },
    RecoverObstacle {
        candidates: Vec<ObstacleCandidate>,
        truth_index: usize,
        #[serde(default)]
        probe: ProbeSpec,
        /// Relative noise level on the measurement.
        #[serde(default)]
        noise: f64,
    },
    RecoverPotential {
        /// `q₁ - q₂`, added to the scenario potential (which plays `q₂`).
        contrast: FieldSpec,
        /// Relative noise level on the DtN data.
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        truncation: TruncationSpec,
    },
    Distinguish {
        obstacles: Vec<ObstacleCandidate>,
        potentials: Vec<FieldSpec>,
        #[serde(default)]
        probe: ProbeSpec,
    },
}

fn default_pairs() -> usize {
    50
}
fn default_draws() -> usize {
    20
}
fn default_alpha_count() -> usize {
    13
}
fn default_alpha_decades() -> f64 {
    24.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungeTarget {
    /// `φ ≡ 1` on the annulus.
    Ones,
    /// Annulus trace of a solution with random control data.
    InRange,
    Field(FieldSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruncationSpec {
    None,
    Rank { k: usize },
    Relative { tolerance: f64 },
    /// Noise level `δ` is taken from the injected noise.
    Discrepancy { tau: f64 },
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec::Relative { tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, path: &str, message: String) {
        self.0.push(Diagnostic { path: path.to_string(), message });
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Forward { .. } => "forward",
            Experiment::Dtn { .. } => "dtn",
            Experiment::IdentityCheck { .. } => "identity_check",
            Experiment::KernelBounds { .. } => "kernel_bounds",
            Experiment::Runge { .. } => "runge",
            Experiment::RecoverObstacle { .. } => "recover_obstacle",
            Experiment::RecoverPotential { .. } => "recover_potential",
            Experiment::Distinguish { .. } => "distinguish",
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("config schema: {e}")))
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(self.grid.dim, self.grid.half_width, self.grid.nodes_per_axis)?))
    }

    pub fn build_tensor(&self) -> Result<EllipticTensorField> {
        let n = self.grid.dim;
        let gamma = self.tensor.gamma;
        match &self.tensor.field {
            TensorSpec::Identity => EllipticTensorField::identity(n, gamma),
            TensorSpec::Constant(m) => EllipticTensorField::constant(n, gamma, m.clone()),
            TensorSpec::Rotating { major, minor, angle, twist } => EllipticTensorField::new(
                n,
                gamma,
                TensorRule::Rotating { major: *major, minor: *minor, angle: *angle, twist: *twist },
            ),
            TensorSpec::Bump { base, amplitude, center, width } => EllipticTensorField::new(
                n,
                gamma,
                TensorRule::Bump { base: *base, amplitude: *amplitude, center: center.clone(), width: *width },
            ),
        }
    }

    pub fn build_partition(&self, grid: &Grid) -> Result<DomainPartition> {
        DomainPartition::new(grid, &self.geometry)
    }

    /// Schema-level, geometric and ellipticity checks; no solves. Returns
    /// every violation found.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Diags(Vec::new());

        let grid = match self.build_grid() {
            Ok(g) => Some(g),
            Err(e) => {
                out.push("grid", e.to_string());
                None
            }
        };
        if !(self.exponent > 0.0 && self.exponent < 1.0) {
            out.push("exponent", format!("fractional exponent must lie in (0, 1), got {}", self.exponent));
        }
        match self.build_tensor() {
            Ok(field) => {
                if let Some(grid) = &grid {
                    if let Err(e) = field.check(grid) {
                        out.push("tensor", e.to_string());
                    }
                }
            }
            Err(e) => out.push("tensor", e.to_string()),
        }

        let dim = self.grid.dim;
        let geo = &self.geometry;
        let mut shapes_ok = true;
        for (path, shape) in [
            ("geometry.omega", Some(&geo.omega)),
            ("geometry.obstacle", geo.obstacle.as_ref()),
            ("geometry.control", Some(&geo.control)),
            ("geometry.observation", Some(&geo.observation)),
        ] {
            if let Some(s) = shape {
                if let Err(e) = s.validate(dim) {
                    out.push(path, e.to_string());
                    shapes_ok = false;
                }
            }
        }
        if shapes_ok {
            if let Some(d) = &geo.obstacle {
                if !d.compactly_inside(&geo.omega) {
                    out.push("geometry.obstacle", "obstacle is not compactly contained in omega".into());
                }
            }
            for (path, patch) in [("geometry.control", &geo.control), ("geometry.observation", &geo.observation)] {
                if patch.closure_intersects(&geo.omega) {
                    out.push(path, "measurement patch touches the closure of omega".into());
                }
            }
        }
        if let (Some(grid), true) = (&grid, out.0.is_empty()) {
            if let Err(e) = DomainPartition::new(grid, geo) {
                out.push("geometry", e.to_string());
            }
        }
        match (self.obstacle_kind, geo.obstacle.is_some()) {
            (ObstacleKind::None, true) => out.push("obstacle_kind", "kind `none` but an obstacle shape is given".into()),
            (ObstacleKind::Soft | ObstacleKind::Hard, false) => {
                out.push("obstacle_kind", "soft/hard kind requires an obstacle shape".into())
            }
            _ => {}
        }
        let nodes = grid.as_ref().map(|g| g.len());
        check_field("potential", &self.potential, dim, nodes, &mut out);

        let t = &self.tolerances;
        if !(t.theta >= 0.0 && t.theta.is_finite()) {
            out.push("tolerances.theta", "must be nonnegative".into());
        }
        if !(t.well_posed_ratio > 0.0 && t.well_posed_ratio < 1.0) {
            out.push("tolerances.well_posed_ratio", "must lie in (0, 1)".into());
        }
        if !(t.exact_match > 0.0) {
            out.push("tolerances.exact_match", "must be positive".into());
        }
        if t.heat_quadrature_nodes < 16 {
            out.push("tolerances.heat_quadrature_nodes", "must be at least 16".into());
        }

        match &self.experiment {
            Experiment::Forward { probe, source, .. } => {
                check_probe("experiment.probe", probe, dim, &mut out);
                check_field("experiment.source", source, dim, nodes, &mut out);
            }
            Experiment::Dtn { basis, .. } => {
                if let DtnBasis::Bump { width } = basis {
                    if !(*width > 0.0) {
                        out.push("experiment.basis.width", "must be positive".into());
                    }
                }
            }
            Experiment::IdentityCheck { second_potential, draws } => {
                check_field("experiment.second_potential", second_potential, dim, nodes, &mut out);
                if *draws == 0 {
                    out.push("experiment.draws", "must be positive".into());
                }
                if self.obstacle_kind == ObstacleKind::None {
                    out.push("obstacle_kind", "identity check needs a soft or hard obstacle".into());
                }
            }
            Experiment::KernelBounds { fit, .. } => {
                if !(fit.max_separation_fraction > 0.0) || fit.min_separation_cells < 0.0 {
                    out.push("experiment.fit", "separation bounds must be positive".into());
                }
            }
            Experiment::Runge { target, alpha_count, alpha_decades } => {
                if let RungeTarget::Field(f) = target {
                    check_field("experiment.target", f, dim, nodes, &mut out);
                }
                if *alpha_count == 0 || !(*alpha_decades > 0.0) {
                    out.push("experiment.alpha_count", "sweep needs at least one value and positive decades".into());
                }
            }
            Experiment::RecoverObstacle { candidates, truth_index, probe, noise } => {
                check_probe("experiment.probe", probe, dim, &mut out);
                check_candidates(candidates, geo, grid.as_deref(), &mut out);
                if *truth_index >= candidates.len() {
                    out.push("experiment.truth_index", format!("out of range for {} candidates", candidates.len()));
                }
                if !(*noise >= 0.0) {
                    out.push("experiment.noise", "must be nonnegative".into());
                }
            }
            Experiment::RecoverPotential { contrast, noise, truncation } => {
                check_field("experiment.contrast", contrast, dim, nodes, &mut out);
                if !(*noise >= 0.0) {
                    out.push("experiment.noise", "must be nonnegative".into());
                }
                if let TruncationSpec::Discrepancy { tau } = truncation {
                    if !(*tau > 0.0) {
                        out.push("experiment.truncation.tau", "must be positive".into());
                    }
                }
                if self.obstacle_kind == ObstacleKind::None {
                    out.push("obstacle_kind", "potential recovery needs a soft or hard obstacle".into());
                }
            }
            Experiment::Distinguish { obstacles, potentials, probe } => {
                check_probe("experiment.probe", probe, dim, &mut out);
                check_candidates(obstacles, geo, grid.as_deref(), &mut out);
                if potentials.is_empty() {
                    out.push("experiment.potentials", "at least one potential is required".into());
                }
                for (k, f) in potentials.iter().enumerate() {
                    check_field(&format!("experiment.potentials[{k}]"), f, dim, nodes, &mut out);
                }
            }
        }
        out.0
    }
}

fn check_field(path: &str, f: &FieldSpec, dim: usize, nodes: Option<usize>, out: &mut Diags) {
    match f {
        FieldSpec::Constant(v) if !v.is_finite() => out.push(path, "must be finite".into()),
        FieldSpec::Pixels(v) => {
            if let Some(n) = nodes {
                if v.len() != n {
                    out.push(path, format!("pixel field has {} values, grid has {n} nodes", v.len()));
                }
            }
            if v.iter().any(|x| !x.is_finite()) {
                out.push(path, "pixel field must be finite".into());
            }
        }
        FieldSpec::Gaussian { center, width, .. } => {
            if center.len() != dim {
                out.push(path, "center dimension mismatch".into());
            }
            if !(*width > 0.0) {
                out.push(path, "width must be positive".into());
            }
        }
        FieldSpec::Indicator { shape, .. } => {
            if let Err(e) = shape.validate(dim) {
                out.push(path, e.to_string());
            }
        }
        FieldSpec::Random { lo, hi } if !(lo < hi) => out.push(path, "random field needs lo < hi".into()),
        _ => {}
    }
}

fn check_probe(path: &str, p: &ProbeSpec, dim: usize, out: &mut Diags) {
    match p {
        ProbeSpec::Gaussian { center, width } => {
            if center.len() != dim || !(*width > 0.0) {
                out.push(path, "gaussian probe needs a center of grid dimension and a positive width".into());
            }
        }
        ProbeSpec::Constant(v) if *v == 0.0 || !v.is_finite() => {
            out.push(path, "constant probe must be finite and nonzero".into())
        }
        _ => {}
    }
}

fn check_candidates(
    candidates: &[ObstacleCandidate],
    geo: &PartitionSpec,
    grid: Option<&Grid>,
    out: &mut Diags,
) {
    if candidates.is_empty() {
        out.push("experiment.candidates", "family is empty".into());
    }
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for (k, c) in candidates.iter().enumerate() {
        let path = format!("experiment.candidates[{k}]");
        if c.kind == ObstacleKind::None {
            out.push(&path, "candidate kind must be soft or hard".into());
        }
        let Some(grid) = grid else { continue };
        let spec = PartitionSpec { obstacle: Some(c.shape.clone()), ..geo.clone() };
        match DomainPartition::new(grid, &spec) {
            Ok(p) => {
                if let Some(j) = seen.iter().position(|s| s == p.obstacle()) {
                    out.push(&path, format!("covers the same nodes as candidate {j}"));
                }
                seen.push(p.obstacle().to_vec());
            }
            Err(e) => {
                out.push(&path, e.to_string());
                seen.push(Vec::new());
            }
        }
    }
}
