//! Truncated computational grid and the region partition used by every solve.
//!
//! The grid is the box `[-R, R]^n` sampled with `m` nodes per axis. Every
//! node is a degree of freedom; values outside the box are taken to be zero.
//! Nodes are indexed lexicographically with the first axis varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor-product grid on `[-R, R]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
    spacing: f64,
    coords: Vec<f64>,
}

impl Grid {
    /// Builds the grid; `dim` must be 2 or 3, `nodes_per_axis >= 3`, `half_width > 0`.
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::validation(format!("grid dimension must be 2 or 3, got {dim}")));
        }
        if nodes_per_axis < 3 {
            return Err(Error::validation(format!(
                "nodes per axis must be at least 3, got {nodes_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::validation(format!("box half-width must be positive, got {half_width}")));
        }
        let spacing = 2.0 * half_width / (nodes_per_axis - 1) as f64;
        let count = nodes_per_axis.pow(dim as u32);
        let mut coords = Vec::with_capacity(count * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            coords.extend(idx.iter().map(|&k| axis_coord(half_width, spacing, k)));
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < nodes_per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(Grid { dim, half_width, nodes_per_axis, spacing, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    /// Node spacing `h = 2R / (m - 1)`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Cell measure `h^n`, the quadrature weight of every node.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Multi-index of a node (first axis fastest).
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let m = self.nodes_per_axis;
        (0..self.dim)
            .map(|_| {
                let k = index % m;
                index /= m;
                k
            })
            .collect()
    }

    /// Linear index of a multi-index, or `None` when it lies outside the box.
    pub fn linear_index(&self, multi: &[isize]) -> Option<usize> {
        let m = self.nodes_per_axis as isize;
        let mut index = 0usize;
        let mut stride = 1usize;
        for &k in multi {
            if k < 0 || k >= m {
                return None;
            }
            index += k as usize * stride;
            stride *= self.nodes_per_axis;
        }
        Some(index)
    }

    /// Coordinate of a (possibly out-of-box) multi-index.
    pub fn coord_of(&self, multi: &[isize]) -> Vec<f64> {
        multi
            .iter()
            .map(|&k| {
                if (0..self.nodes_per_axis as isize).contains(&k) {
                    axis_coord(self.half_width, self.spacing, k as usize)
                } else {
                    -self.half_width + self.spacing * k as f64
                }
            })
            .collect()
    }

    /// Distance from a node to the nearest face of the box.
    pub fn distance_to_box_boundary(&self, index: usize) -> f64 {
        self.point(index)
            .iter()
            .map(|x| self.half_width - x.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the node nearest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let multi: Vec<isize> = x
            .iter()
            .map(|&c| {
                let k = ((c + self.half_width) / self.spacing).round() as isize;
                k.clamp(0, self.nodes_per_axis as isize - 1)
            })
            .collect();
        self.linear_index(&multi).expect("clamped index is inside the box")
    }
}

fn axis_coord(half_width: f64, spacing: f64, k: usize) -> f64 {
    (-half_width + spacing * k as f64).min(half_width)
}

/// Region shapes: balls, axis-aligned boxes and unions of those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Union(Vec<Shape>),
}

impl Shape {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Shape::Ball { center: center.to_vec(), radius }
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Self {
        Shape::Box { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    /// Checks dimensions and positivity of radii / box extents.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Shape::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::validation(format!(
                        "ball center has {} coordinates, grid has dimension {dim}",
                        center.len()
                    )));
                }
                if !(*radius > 0.0) {
                    return Err(Error::validation(format!("ball radius must be positive, got {radius}")));
                }
            }
            Shape::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::validation(format!("box corners must have {dim} coordinates")));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::validation("box must satisfy lo < hi on every axis"));
                }
            }
            Shape::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::validation("union shape has no components"));
                }
                for p in parts {
                    p.validate(dim)?;
                }
            }
        }
        Ok(())
    }

    /// Strict interior test: points on the boundary are outside.
    pub fn contains_strict(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball { center, radius } => dist2(x, center) < radius * radius,
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| *a < *c && *c < *b),
            Shape::Union(parts) => parts.iter().any(|p| p.contains_strict(x)),
        }
    }

    fn components(&self) -> Vec<&Shape> {
        match self {
            Shape::Union(parts) => parts.iter().flat_map(|p| p.components()).collect(),
            other => vec![other],
        }
    }

    /// Whether the closures of the two shapes intersect.
    pub fn closure_intersects(&self, other: &Shape) -> bool {
        self.components()
            .iter()
            .any(|a| other.components().iter().any(|b| primitive_closures_meet(a, b)))
    }

    /// Whether the closure of `self` lies inside the open set `outer`.
    ///
    /// For unions each component of `self` must sit inside one component of
    /// `outer`; this is sufficient but not necessary.
    pub fn compactly_inside(&self, outer: &Shape) -> bool {
        self.components()
            .iter()
            .all(|inner| outer.components().iter().any(|o| primitive_compactly_inside(inner, o)))
    }

    /// Nodes strictly inside the shape, in ascending order.
    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.len()).filter(|&i| self.contains_strict(grid.point(i))).collect()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn box_point_dist2(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(c, (a, b))| {
            let d = if c < a {
                a - c
            } else if c > b {
                c - b
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

fn primitive_closures_meet(a: &Shape, b: &Shape) -> bool {
    match (a, b) {
        (Shape::Ball { center: c1, radius: r1 }, Shape::Ball { center: c2, radius: r2 }) => {
            dist2(c1, c2) <= (r1 + r2) * (r1 + r2)
        }
        (Shape::Ball { center, radius }, Shape::Box { lo, hi })
        | (Shape::Box { lo, hi }, Shape::Ball { center, radius }) => {
            box_point_dist2(lo, hi, center) <= radius * radius
        }
        (Shape::Box { lo: l1, hi: h1 }, Shape::Box { lo: l2, hi: h2 }) => {
            (0..l1.len()).all(|k| l1[k] <= h2[k] && l2[k] <= h1[k])
        }
        _ => unreachable!("components are primitive"),
    }
}

fn primitive_compactly_inside(inner: &Shape, outer: &Shape) -> bool {
    match (inner, outer) {
        (Shape::Ball { center: c1, radius: r1 }, Shape::Ball { center: c2, radius: r2 }) => {
            dist2(c1, c2).sqrt() + r1 < *r2
        }
        (Shape::Ball { center, radius }, Shape::Box { lo, hi }) => {
            (0..center.len()).all(|k| lo[k] < center[k] - radius && center[k] + radius < hi[k])
        }
        (Shape::Box { lo, hi }, Shape::Ball { center, radius }) => {
            // farthest corner
            let far: f64 = (0..lo.len())
                .map(|k| {
                    let d = (lo[k] - center[k]).abs().max((hi[k] - center[k]).abs());
                    d * d
                })
                .sum();
            far < radius * radius
        }
        (Shape::Box { lo: l1, hi: h1 }, Shape::Box { lo: l2, hi: h2 }) => {
            (0..l1.len()).all(|k| l2[k] < l1[k] && h1[k] < h2[k])
        }
        _ => unreachable!("components are primitive"),
    }
}

/// Shapes declaring the interior domain, the embedded obstacle and the two
/// exterior measurement patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub omega: Shape,
    #[serde(default)]
    pub obstacle: Option<Shape>,
    pub control: Shape,
    pub observation: Shape,
}

/// Node label in the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `Ω \ D̄`, carries the potential.
    Annulus,
    /// Embedded obstacle `D`.
    Obstacle,
    /// Every node outside `Ω`.
    Exterior,
}

/// Index sets of the regions; all lists are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPartition {
    len: usize,
    labels: Vec<Region>,
    omega: Vec<usize>,
    obstacle: Vec<usize>,
    annulus: Vec<usize>,
    exterior: Vec<usize>,
    control: Vec<usize>,
    observation: Vec<usize>,
    spec: PartitionSpec,
}

impl DomainPartition {
    /// Partitions the grid nodes; rejects specs whose shapes violate the
    /// containment and disjointness requirements.
    pub fn new(grid: &Grid, spec: &PartitionSpec) -> Result<Self> {
        let dim = grid.dim();
        spec.omega.validate(dim)?;
        spec.control.validate(dim)?;
        spec.observation.validate(dim)?;
        if let Some(d) = &spec.obstacle {
            d.validate(dim)?;
            if !d.compactly_inside(&spec.omega) {
                return Err(Error::validation("obstacle is not compactly contained in omega"));
            }
        }
        for (name, patch) in [("control patch O1", &spec.control), ("observation patch O2", &spec.observation)] {
            if patch.closure_intersects(&spec.omega) {
                return Err(Error::validation(format!("{name} touches the closure of omega")));
            }
        }

        let n = grid.len();
        let mut labels = Vec::with_capacity(n);
        let (mut omega, mut obstacle, mut annulus, mut exterior) = (vec![], vec![], vec![], vec![]);
        for (i, x) in grid.points().enumerate() {
            if spec.omega.contains_strict(x) {
                omega.push(i);
                if spec.obstacle.as_ref().is_some_and(|d| d.contains_strict(x)) {
                    obstacle.push(i);
                    labels.push(Region::Obstacle);
                } else {
                    annulus.push(i);
                    labels.push(Region::Annulus);
                }
            } else {
                exterior.push(i);
                labels.push(Region::Exterior);
            }
        }
        let control = spec.control.nodes(grid);
        let observation = spec.observation.nodes(grid);

        if omega.is_empty() {
            return Err(Error::validation("omega contains no grid nodes"));
        }
        if annulus.is_empty() {
            return Err(Error::validation("obstacle covers every node of omega (D must be a strict subset)"));
        }
        if spec.obstacle.is_some() && obstacle.is_empty() {
            return Err(Error::validation("obstacle contains no grid nodes"));
        }
        if control.is_empty() {
            return Err(Error::validation("control patch O1 contains no grid nodes"));
        }
        if observation.is_empty() {
            return Err(Error::validation("observation patch O2 contains no grid nodes"));
        }
        if control.iter().chain(&observation).any(|&i| labels[i] != Region::Exterior) {
            return Err(Error::validation("measurement patches must be disjoint from omega"));
        }

        Ok(DomainPartition {
            len: n,
            labels,
            omega,
            obstacle,
            annulus,
            exterior,
            control,
            observation,
            spec: spec.clone(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.len
    }

    pub fn region(&self, node: usize) -> Region {
        self.labels[node]
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn obstacle(&self) -> &[usize] {
        &self.obstacle
    }

    pub fn annulus(&self) -> &[usize] {
        &self.annulus
    }

    pub fn exterior(&self) -> &[usize] {
        &self.exterior
    }

    /// Control patch `O1`.
    pub fn control(&self) -> &[usize] {
        &self.control
    }

    /// Observation patch `O2`.
    pub fn observation(&self) -> &[usize] {
        &self.observation
    }

    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    pub fn has_obstacle(&self) -> bool {
        !self.obstacle.is_empty()
    }

    /// Copy of `field` with every entry outside `indices` set to zero.
    pub fn mask(&self, field: &[f64], indices: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for &i in indices {
            out[i] = field[i];
        }
        out
    }
}
