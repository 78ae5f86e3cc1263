use serde::Serialize;

use super::FractionalOperator;
use crate::geometry::Grid;

/// Off-diagonal nonlocal kernel `K_s(x_i, x_j) = -(L^s)_{ij} / h^n`.
///
/// With this scaling `h^n (L^s v)_i = h^n Σ_j K_ij (v_i - v_j) h^n + c_i v_i h^n`,
/// the discrete counterpart of `c_{n,s} P.V.∫ (v(x) - v(z)) |x - z|^{-n-2s} dz`
/// plus a killing term `c_i` from the zero exterior.
#[derive(Debug, Clone, Copy)]
pub struct KernelMatrix<'a> {
    operator: &'a FractionalOperator,
    inv_cell: f64,
}

pub fn extract_kernel(op: &FractionalOperator) -> KernelMatrix<'_> {
    KernelMatrix { operator: op, inv_cell: 1.0 / op.grid().cell_measure() }
}

/// Pair-selection rules for kernel bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct KernelFitOptions {
    /// Pairs must be strictly farther apart than this many cells.
    pub min_separation_cells: f64,
    /// Both nodes must be strictly farther than this many cells from the box boundary.
    pub boundary_margin_cells: f64,
    /// Upper separation cutoff as a fraction of the box half-width.
    pub max_separation_fraction: f64,
    /// Anchor nodes lie within this many cells of the box center.
    pub anchor_radius_cells: f64,
}

impl Default for KernelFitOptions {
    fn default() -> Self {
        KernelFitOptions {
            min_separation_cells: 4.0,
            boundary_margin_cells: 4.0,
            max_separation_fraction: 0.5,
            anchor_radius_cells: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSample {
    pub distance: f64,
    pub kernel: f64,
}

/// Power-law diagnostics for `K_s(x, z) ≈ c / |x - z|^{n+2s}`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelFit {
    /// Least-squares slope of `log K` against `log |x - z|`.
    pub slope: f64,
    pub expected_slope: f64,
    /// `exp(mean log(K |x - z|^{n+2s}))`: intercept with the slope pinned.
    pub prefactor: f64,
    /// `min K |x - z|^{n+2s}` over the pairs (lower constant `c₁`).
    pub lower_constant: f64,
    /// `max K |x - z|^{n+2s}` over the pairs (upper constant `c₂`).
    pub upper_constant: f64,
    pub pairs: usize,
    pub samples: Vec<KernelSample>,
}

impl KernelMatrix<'_> {
    /// `K_s(x_i, x_j)` for `i != j`; zero on the diagonal.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            -self.operator.matrix()[(i, j)] * self.inv_cell
        }
    }

    pub fn size(&self) -> usize {
        self.operator.size()
    }

    /// Separated pairs used for the bound checks: anchors near the box
    /// center against partners away from the anchor and the boundary.
    pub fn separated_pairs(&self, opts: &KernelFitOptions) -> Vec<(usize, usize, f64)> {
        let grid: &Grid = self.operator.grid();
        let h = grid.spacing();
        let center = vec![0.0; grid.dim()];
        let anchors: Vec<usize> = (0..grid.len())
            .filter(|&i| distance(grid.point(i), &center) <= opts.anchor_radius_cells * h + 1e-12 * h)
            .collect();
        let max_sep = opts.max_separation_fraction * grid.half_width();
        let mut pairs = Vec::new();
        for &a in &anchors {
            for z in 0..grid.len() {
                if anchors.contains(&z) && z <= a {
                    continue;
                }
                let r = distance(grid.point(a), grid.point(z));
                if r <= opts.min_separation_cells * h || r > max_sep {
                    continue;
                }
                let margin = opts.boundary_margin_cells * h;
                if grid.distance_to_box_boundary(a) <= margin || grid.distance_to_box_boundary(z) <= margin {
                    continue;
                }
                pairs.push((a, z, r));
            }
        }
        pairs
    }

    pub fn fit(&self, opts: &KernelFitOptions) -> KernelFit {
        let grid = self.operator.grid();
        let order = grid.dim() as f64 + 2.0 * self.operator.exponent();
        let pairs = self.separated_pairs(opts);
        let samples: Vec<KernelSample> =
            pairs.iter().map(|&(a, z, r)| KernelSample { distance: r, kernel: self.value(a, z) }).collect();
        let scaled: Vec<f64> = samples.iter().map(|s| s.kernel * s.distance.powf(order)).collect();
        let lower = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let positive: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.kernel > 0.0)
            .map(|s| (s.distance.ln(), s.kernel.ln()))
            .collect();
        let count = positive.len() as f64;
        let (mx, my) = positive.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / count, b + y / count));
        let (sxy, sxx) = positive
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        let slope = sxy / sxx;
        let prefactor = (my + order * mx).exp();

        KernelFit {
            slope,
            expected_slope: -order,
            prefactor,
            lower_constant: lower,
            upper_constant: upper,
            pairs: samples.len(),
            samples,
        }
    }
}

/// `c_{n,s} = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(-s)|)`, the kernel constant of
/// `(-Δ)^s` on the whole space.
pub fn fractional_laplacian_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    4f64.powf(s) * libm::tgamma(n / 2.0 + s) / (std::f64::consts::PI.powf(n / 2.0) * libm::tgamma(-s).abs())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
