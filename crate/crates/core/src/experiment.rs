//! Executes a [`ScenarioConfig`] and writes `result.json`, `fields/*.csv`
//! and `plotdata/*.csv` under an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cache::FactorizationCache;
use crate::config::{Experiment, FieldSpec, ProbeSpec, RungeTarget, ScenarioConfig, TruncationSpec};
use crate::dtn::{assemble_dtn_matrix_with, integral_identity_check_with, DtnOptions};
use crate::error::{Error, Result};
use crate::forward::{check_eigenvalue_condition_with, stability_ratio, ForwardSolver, Scenario};
use crate::geometry::{DomainPartition, Grid, Region};
use crate::inverse::{
    alpha_sweep, distinguish_with, gaussian_noise, recover_obstacle, recover_potential, runge_approximate_with,
    ControlOperator, ObstacleCandidateFamily, PotentialOptions, Truncation,
};
use crate::operator::{
    assemble_local_operator, extract_kernel, fractional_laplacian_constant, heat_quadrature_fractional_apply,
    norm2, FractionalOperator, LocalOperator, SpectralFactorization,
};

/// Layout version of `result.json`.
pub const RESULT_FORMAT: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub threads: usize,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// `None` disables the factorization cache.
    pub cache: Option<FactorizationCache>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub result: Value,
    pub files: Vec<String>,
}

enum Artifact {
    Text(String, String),
    Bytes(String, Vec<u8>),
}

struct Outcome {
    metrics: Value,
    artifacts: Vec<Artifact>,
}

struct Context {
    cfg: ScenarioConfig,
    grid: Arc<Grid>,
    local: LocalOperator,
    op: Arc<FractionalOperator>,
    partition: Arc<DomainPartition>,
    threads: usize,
}

/// Validates, executes and writes one experiment.
pub fn run_experiment(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let diagnostics = cfg.validate();
    if !diagnostics.is_empty() {
        let msg: Vec<String> = diagnostics.iter().map(|d| format!("{}: {}", d.path, d.message)).collect();
        return Err(Error::validation(msg.join("; ")));
    }

    let grid = cfg.build_grid()?;
    let local = assemble_local_operator(&grid, &cfg.build_tensor()?)?;
    let (fac, cache_state) = match &opts.cache {
        Some(cache) => {
            let (fac, hit) = cache.get_or_compute(&grid, &local)?;
            (fac, if hit { "hit" } else { "miss" })
        }
        None => (Arc::new(SpectralFactorization::new(&local)?), "disabled"),
    };
    let op = Arc::new(FractionalOperator::new(grid.clone(), fac, cfg.exponent)?);
    let partition = Arc::new(cfg.build_partition(&grid)?);
    let ctx = Context { cfg, grid, local, op, partition, threads: opts.threads.max(1) };

    let outcome = match &ctx.cfg.experiment {
        Experiment::Forward { .. } => forward(&ctx)?,
        Experiment::Dtn { .. } => dtn(&ctx)?,
        Experiment::IdentityCheck { .. } => identity_check(&ctx)?,
        Experiment::KernelBounds { .. } => kernel_bounds(&ctx)?,
        Experiment::Runge { .. } => runge(&ctx)?,
        Experiment::RecoverObstacle { .. } => obstacle_search(&ctx)?,
        Experiment::RecoverPotential { .. } => potential(&ctx)?,
        Experiment::Distinguish { .. } => distinguish(&ctx)?,
    };

    let mut files = Vec::new();
    fs::create_dir_all(&opts.out)?;
    for art in &outcome.artifacts {
        let (rel, bytes) = match art {
            Artifact::Text(rel, text) => (rel, text.as_bytes()),
            Artifact::Bytes(rel, bytes) => (rel, bytes.as_slice()),
        };
        let path = opts.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        files.push(rel.clone());
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let result = json!({
        "format": RESULT_FORMAT,
        "name": ctx.cfg.name,
        "experiment": ctx.cfg.experiment.name(),
        "config_hash": ctx.cfg.hash(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.cfg.seed,
        "tolerances": ctx.cfg.tolerances,
        "grid": {
            "dim": ctx.grid.dim(),
            "half_width": ctx.grid.half_width(),
            "nodes_per_axis": ctx.grid.nodes_per_axis(),
            "spacing": ctx.grid.spacing(),
            "nodes": ctx.grid.len(),
        },
        "regions": {
            "omega": ctx.partition.omega().len(),
            "obstacle": ctx.partition.obstacle().len(),
            "annulus": ctx.partition.annulus().len(),
            "exterior": ctx.partition.exterior().len(),
            "control": ctx.partition.control().len(),
            "observation": ctx.partition.observation().len(),
        },
        "metrics": outcome.metrics,
        "files": files,
        "provenance": {
            "timestamp_unix": timestamp,
            "threads": ctx.threads,
            "cache": cache_state,
            "elapsed_seconds": started.elapsed().as_secs_f64(),
        },
    });
    fs::write(opts.out.join("result.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    Ok(RunSummary { result, files })
}

/// Removes the `provenance` block, the only part allowed to differ between
/// identical runs.
pub fn strip_provenance(mut result: Value) -> Value {
    if let Some(obj) = result.as_object_mut() {
        obj.remove("provenance");
    }
    result
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Evaluates a field spec on every node; `stream` separates random draws.
pub fn eval_field(spec: &FieldSpec, grid: &Grid, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let n = grid.len();
    Ok(match spec {
        FieldSpec::Constant(v) => vec![*v; n],
        FieldSpec::Pixels(v) => {
            crate::error::check_len(v.len(), n)?;
            v.clone()
        }
        FieldSpec::Gaussian { base, amplitude, center, width } => grid
            .points()
            .map(|x| {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                base + amplitude * (-r2 / (width * width)).exp()
            })
            .collect(),
        FieldSpec::Indicator { shape, value, outside } => {
            grid.points().map(|x| if shape.contains_strict(x) { *value } else { *outside }).collect()
        }
        FieldSpec::Random { lo, hi } => {
            let mut r = rng(seed, stream);
            (0..n).map(|_| r.random_range(*lo..*hi)).collect()
        }
    })
}

/// Exterior datum supported on the control patch.
pub fn eval_probe(spec: &ProbeSpec, grid: &Grid, part: &DomainPartition, seed: u64, stream: u64) -> Vec<f64> {
    let mut g = vec![0.0; grid.len()];
    let mut r = rng(seed, stream);
    for &i in part.control() {
        g[i] = match spec {
            ProbeSpec::Gaussian { center, width } => {
                let r2: f64 = grid.point(i).iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (width * width)).exp()
            }
            ProbeSpec::Constant(v) => *v,
            ProbeSpec::Random => r.random_range(-1.0..1.0),
        };
    }
    g
}

impl Context {
    fn scenario_with(&self, q: &[f64]) -> Result<Scenario> {
        Scenario::new(self.op.clone(), self.partition.clone(), self.cfg.obstacle_kind, q)
    }

    fn scenario(&self) -> Result<Scenario> {
        self.scenario_with(&eval_field(&self.cfg.potential, &self.grid, self.cfg.seed, 1)?)
    }

    fn solver(&self, scn: &Scenario) -> Result<ForwardSolver> {
        ForwardSolver::with_threshold(scn, self.cfg.tolerances.well_posed_ratio)
    }

    fn node_table(&self, columns: &[(&str, &[f64])]) -> String {
        let mut s = String::from("node");
        for k in 0..self.grid.dim() {
            let _ = write!(s, ",x{k}");
        }
        s.push_str(",region");
        for (name, _) in columns {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for i in 0..self.grid.len() {
            let _ = write!(s, "{i}");
            for c in self.grid.point(i) {
                let _ = write!(s, ",{c:e}");
            }
            let region = match self.partition.region(i) {
                Region::Annulus => "annulus",
                Region::Obstacle => "obstacle",
                Region::Exterior => "exterior",
            };
            let _ = write!(s, ",{region}");
            for (_, v) in columns {
                let _ = write!(s, ",{:e}", v[i]);
            }
            s.push('\n');
        }
        s
    }
}

fn series(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Like [`series`] with a leading integer index column.
fn indexed(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for (k, row) in rows.into_iter().enumerate() {
        let _ = write!(s, "{k}");
        for v in row {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

fn forward(ctx: &Context) -> Result<Outcome> {
    let Experiment::Forward { probe, source, stability_trials } = &ctx.cfg.experiment else { unreachable!() };
    let f = eval_field(source, &ctx.grid, ctx.cfg.seed, 2)?;
    let scn = ctx.scenario()?.with_source(&f)?;
    let report = check_eigenvalue_condition_with(&scn, ctx.cfg.tolerances.well_posed_ratio)?;
    let solver = ctx.solver(&scn)?;
    let g = eval_probe(probe, &ctx.grid, &ctx.partition, ctx.cfg.seed, 3);
    let sol = solver.solve(&g)?;
    let scale = sol.residuals.image_norm.max(f64::MIN_POSITIVE);
    let mut metrics = json!({
        "well_posedness": report,
        "residuals": sol.residuals,
        "relative_residuals": {
            "annulus": sol.residuals.annulus / scale,
            "obstacle": sol.residuals.obstacle / scale,
        },
        "solution_norm": norm2(&sol.u),
    });
    if *stability_trials > 0 {
        metrics["stability"] = serde_json::to_value(stability_ratio(&scn, *stability_trials, ctx.cfg.seed)?)?;
    }
    let table = ctx.node_table(&[("g", &g), ("u", &sol.u), ("fractional_image", &sol.image)]);
    Ok(Outcome { metrics, artifacts: vec![Artifact::Text("fields/solution.csv".into(), table)] })
}

fn dtn(ctx: &Context) -> Result<Outcome> {
    let Experiment::Dtn { basis, symmetry_pairs } = &ctx.cfg.experiment else { unreachable!() };
    let scn = ctx.scenario()?;
    let solver = ctx.solver(&scn)?;
    let d = assemble_dtn_matrix_with(&solver, &DtnOptions { basis: *basis, threads: ctx.threads })?;

    let ext = ctx.partition.exterior();
    let mut r = rng(ctx.cfg.seed, 4);
    let mut worst = 0.0f64;
    for _ in 0..*symmetry_pairs {
        let mut g = vec![0.0; ctx.grid.len()];
        let mut h = vec![0.0; ctx.grid.len()];
        for &i in ext {
            g[i] = r.random_range(-1.0..1.0);
            h[i] = r.random_range(-1.0..1.0);
        }
        let a = crate::dtn::exterior_pairing(&scn, &crate::dtn::apply_dtn_with(&solver, &g)?, &h)?;
        let b = crate::dtn::exterior_pairing(&scn, &crate::dtn::apply_dtn_with(&solver, &h)?, &g)?;
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let metrics = json!({
        "rows": d.rows(),
        "cols": d.cols(),
        "frobenius_norm": d.frobenius_norm(),
        "cell_measure": d.cell_measure(),
        "basis": d.basis(),
        "symmetry": { "pairs": symmetry_pairs, "max_relative_asymmetry": worst },
    });
    let (header, payload) = d.encode()?;
    let mut artifacts = vec![Artifact::Text("dtn.json".into(), header), Artifact::Bytes("dtn.bin".into(), payload)];
    if d.rows() * d.cols() <= 250_000 {
        let mut csv = Vec::new();
        d.write_csv(&mut csv)?;
        artifacts.push(Artifact::Text("fields/dtn.csv".into(), String::from_utf8(csv).expect("ascii csv")));
    }
    Ok(Outcome { metrics, artifacts })
}

fn identity_check(ctx: &Context) -> Result<Outcome> {
    let Experiment::IdentityCheck { second_potential, draws } = &ctx.cfg.experiment else { unreachable!() };
    let scn1 = ctx.scenario()?;
    let scn2 = ctx.scenario_with(&eval_field(second_potential, &ctx.grid, ctx.cfg.seed, 5)?)?;
    let (s1, s2) = (ctx.solver(&scn1)?, ctx.solver(&scn2)?);
    let mut r = rng(ctx.cfg.seed, 6);
    let n = ctx.grid.len();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for _ in 0..*draws {
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        for &i in ctx.partition.control() {
            g1[i] = r.random_range(-1.0..1.0);
        }
        for &i in ctx.partition.observation() {
            g2[i] = r.random_range(-1.0..1.0);
        }
        let c = integral_identity_check_with(&s1, &s2, &g1, &g2)?;
        worst = worst.max(c.residual);
        rows.push(c);
    }
    let plot = indexed("draw,lhs,rhs,residual", rows.iter().map(|c| vec![c.lhs, c.rhs, c.residual]));
    Ok(Outcome {
        metrics: json!({ "residual": worst, "draws": rows }),
        artifacts: vec![Artifact::Text("plotdata/identity.csv".into(), plot)],
    })
}

fn kernel_bounds(ctx: &Context) -> Result<Outcome> {
    let Experiment::KernelBounds { fit, quadrature_vectors } = &ctx.cfg.experiment else { unreachable!() };
    let k = extract_kernel(&ctx.op).fit(fit);
    let reference = fractional_laplacian_constant(ctx.grid.dim(), ctx.cfg.exponent);
    let mut worst = 0.0f64;
    let mut r = rng(ctx.cfg.seed, 7);
    for _ in 0..*quadrature_vectors {
        let v: Vec<f64> = (0..ctx.grid.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let exact = ctx.op.apply(&v);
        let quad = heat_quadrature_fractional_apply(
            &ctx.local,
            ctx.op.factorization(),
            ctx.cfg.exponent,
            &v,
            ctx.cfg.tolerances.heat_quadrature_nodes,
        )?;
        let diff: Vec<f64> = quad.value.iter().zip(&exact).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&diff) / norm2(&exact));
    }
    let metrics = json!({
        "slope": k.slope,
        "expected_slope": k.expected_slope,
        "prefactor": k.prefactor,
        "lower_constant": k.lower_constant,
        "upper_constant": k.upper_constant,
        "pairs": k.pairs,
        "laplacian_constant": reference,
        "prefactor_relative_deviation": (k.prefactor - reference).abs() / reference,
        "quadrature": { "vectors": quadrature_vectors, "max_relative_error": worst },
    });
    let plot = series(
        "log_distance,log_kernel,scaled_kernel",
        k.samples.iter().filter(|s| s.kernel > 0.0).map(|s| {
            vec![s.distance.ln(), s.kernel.ln(), s.kernel * s.distance.powf(-k.expected_slope)]
        }),
    );
    Ok(Outcome { metrics, artifacts: vec![Artifact::Text("plotdata/kernel_loglog.csv".into(), plot)] })
}

fn runge(ctx: &Context) -> Result<Outcome> {
    let Experiment::Runge { target, alpha_count, alpha_decades } = &ctx.cfg.experiment else { unreachable!() };
    let scn = ctx.scenario()?;
    let ctrl = ControlOperator::assemble(&scn, ctx.threads)?;
    let phi = match target {
        RungeTarget::Ones => vec![1.0; ctx.grid.len()],
        RungeTarget::Field(f) => eval_field(f, &ctx.grid, ctx.cfg.seed, 8)?,
        RungeTarget::InRange => {
            let g = eval_probe(&ProbeSpec::Random, &ctx.grid, &ctx.partition, ctx.cfg.seed, 9);
            ctx.solver(&scn)?.solve(&g)?.u
        }
    };
    let alphas = alpha_sweep(ctrl.sigma_max().powi(2), *alpha_count, *alpha_decades);
    let res = runge_approximate_with(&ctrl, &phi, &alphas)?;
    let plot = series(
        "alpha,residual,relative_residual,achieved_residual,control_norm",
        res.path.iter().map(|p| vec![p.alpha, p.residual, p.relative_residual, p.achieved_residual, p.control_norm]),
    );
    let fields = ctx.node_table(&[("target", &phi), ("control", &res.control)]);
    let metrics = json!({
        "alpha": res.alpha,
        "residual": res.residual,
        "relative_residual": res.relative_residual,
        "target_norm": res.target_norm,
        "unreachable_norm": res.unreachable_norm,
        "sigma_max": res.sigma_max,
        "sigma_min": res.sigma_min,
        "monotone": res.monotone,
        "path": res.path,
    });
    Ok(Outcome {
        metrics,
        artifacts: vec![
            Artifact::Text("plotdata/runge_path.csv".into(), plot),
            Artifact::Text("fields/control.csv".into(), fields),
        ],
    })
}

fn obstacle_search(ctx: &Context) -> Result<Outcome> {
    let Experiment::RecoverObstacle { candidates, truth_index, probe, noise } = &ctx.cfg.experiment else {
        unreachable!()
    };
    let family = ObstacleCandidateFamily::new(ctx.op.clone(), &ctx.cfg.geometry, candidates.clone())?;
    let q = eval_field(&ctx.cfg.potential, &ctx.grid, ctx.cfg.seed, 1)?;
    let g = eval_probe(probe, &ctx.grid, &ctx.partition, ctx.cfg.seed, 3);
    let clean = family.simulate(*truth_index, &q, &g)?;
    let perturbation = gaussian_noise(clean.len(), noise * norm2(&clean), ctx.cfg.seed ^ 0x6f62_7374);
    let measurement: Vec<f64> = clean.iter().zip(&perturbation).map(|(a, b)| a + b).collect();
    let rec = recover_obstacle(&family, &q, &g, &measurement, ctx.threads)?;
    let plot = {
        let mut s = String::from("candidate,kind,obstacle_nodes,misfit,relative_misfit\n");
        for m in &rec.misfits {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "nan".into());
            let _ = writeln!(s, "{},{},{},{},{}", m.index, m.kind.name(), m.obstacle_nodes, fmt(m.misfit), fmt(m.relative_misfit));
        }
        s
    };
    let metrics = json!({
        "best_candidate": rec.best_candidate,
        "truth_index": truth_index,
        "recovered": rec.best_candidate == *truth_index,
        "exact_match": rec.best_misfit <= ctx.cfg.tolerances.exact_match * norm2(&measurement).max(f64::MIN_POSITIVE)
            || rec.relative_misfit < ctx.cfg.tolerances.exact_match,
        "best_misfit": rec.best_misfit,
        "relative_misfit": rec.relative_misfit,
        "noise": noise,
        "misfits": rec.misfits,
    });
    Ok(Outcome { metrics, artifacts: vec![Artifact::Text("plotdata/misfits.csv".into(), plot)] })
}

fn potential(ctx: &Context) -> Result<Outcome> {
    let Experiment::RecoverPotential { contrast, noise, truncation } = &ctx.cfg.experiment else { unreachable!() };
    let q2 = eval_field(&ctx.cfg.potential, &ctx.grid, ctx.cfg.seed, 1)?;
    let dq = eval_field(contrast, &ctx.grid, ctx.cfg.seed, 10)?;
    let q1: Vec<f64> = q2.iter().zip(&dq).map(|(a, b)| a + b).collect();
    let scn1 = ctx.scenario_with(&q1)?;
    let scn2 = ctx.scenario_with(&q2)?;
    let opts = DtnOptions { basis: Default::default(), threads: ctx.threads };
    let d1 = assemble_dtn_matrix_with(&ctx.solver(&scn1)?, &opts)?;
    let d2 = assemble_dtn_matrix_with(&ctx.solver(&scn2)?, &opts)?;
    let level = noise * d1.difference(&d2)?.frobenius_norm();
    let perturbation = gaussian_noise(d1.data().len(), level, ctx.cfg.seed ^ 0x706f_7465);
    let d1 = d1.perturbed(&perturbation)?;
    let delta = ctx.grid.cell_measure() * norm2(&perturbation);
    let truncation = match *truncation {
        TruncationSpec::None => Truncation::None,
        TruncationSpec::Rank { k } => Truncation::Rank { k },
        TruncationSpec::Relative { tolerance } => Truncation::Relative { tolerance },
        TruncationSpec::Discrepancy { tau } => Truncation::Discrepancy { delta, tau },
    };
    let rec = recover_potential(&d1, &d2, &scn1, &scn2, &PotentialOptions { truncation, threads: ctx.threads })?;
    let truth = ctx.partition.mask(&dq, ctx.partition.annulus());
    let err: Vec<f64> = rec.delta_q.iter().zip(&truth).map(|(a, b)| a - b).collect();
    let truth_norm = norm2(&truth);
    let relative_error = if truth_norm > 0.0 { norm2(&err) / truth_norm } else { norm2(&err) };
    let plot = indexed("index,singular_value", rec.conditioning.singular_values.iter().map(|s| vec![*s]));
    let fields = ctx.node_table(&[("true_contrast", &truth), ("recovered_contrast", &rec.delta_q)]);
    let metrics = json!({
        "relative_error": relative_error,
        "rank": rec.rank,
        "cutoff": rec.cutoff,
        "residual": rec.residual,
        "data_norm": rec.data_norm,
        "noise": noise,
        "noise_norm": delta,
        "truncation": truncation,
        "conditioning": {
            "rows": rec.conditioning.rows,
            "cols": rec.conditioning.cols,
            "sigma_max": rec.conditioning.sigma_max,
            "sigma_min": rec.conditioning.sigma_min,
            "condition_number": rec.conditioning.condition_number,
            "numerical_rank": rec.conditioning.numerical_rank,
        },
    });
    Ok(Outcome {
        metrics,
        artifacts: vec![
            Artifact::Text("plotdata/singular_values.csv".into(), plot),
            Artifact::Text("fields/delta_q.csv".into(), fields),
        ],
    })
}

fn distinguish(ctx: &Context) -> Result<Outcome> {
    let Experiment::Distinguish { obstacles, potentials, probe } = &ctx.cfg.experiment else { unreachable!() };
    let family = ObstacleCandidateFamily::new(ctx.op.clone(), &ctx.cfg.geometry, obstacles.clone())?;
    let qs: Vec<Vec<f64>> = potentials
        .iter()
        .enumerate()
        .map(|(k, p)| eval_field(p, &ctx.grid, ctx.cfg.seed, 20 + k as u64))
        .collect::<Result<_>>()?;
    let g = eval_probe(probe, &ctx.grid, &ctx.partition, ctx.cfg.seed, 3);
    let mut labels = Vec::new();
    let mut solvers = Vec::new();
    for o in 0..family.len() {
        for (p, q) in qs.iter().enumerate() {
            solvers.push(ctx.solver(&family.scenario(o, q)?)?);
            labels.push((o, p));
        }
    }
    let theta = ctx.cfg.tolerances.theta;
    let count = solvers.len();
    let results = crate::parallel::par_map(ctx.threads, count * count, |idx| {
        let (a, b) = (idx / count, idx % count);
        distinguish_with(&solvers[a], &solvers[b], &g, theta)
    })?;
    let mut pairs = Vec::new();
    let mut matrix = String::from("a,b,obstacle_a,obstacle_b,potential_a,potential_b,discrepancy,relative_discrepancy,distinct\n");
    let (mut different, mut different_distinct, mut identical, mut identical_zero) = (0, 0, 0, 0);
    for (idx, d) in results.iter().enumerate() {
        let (a, b) = (idx / count, idx % count);
        let ((oa, pa), (ob, pb)) = (labels[a], labels[b]);
        let same_nodes = family.partition(oa).obstacle() == family.partition(ob).obstacle();
        let same_obstacle = same_nodes && family.candidates()[oa].kind == family.candidates()[ob].kind;
        if !same_nodes {
            different += 1;
            different_distinct += d.distinct as usize;
        }
        if same_obstacle && pa == pb {
            identical += 1;
            identical_zero += (d.discrepancy == 0.0) as usize;
        }
        let relative = d.discrepancy / d.reference_norm.max(f64::MIN_POSITIVE);
        let _ = writeln!(matrix, "{a},{b},{oa},{ob},{pa},{pb},{:e},{relative:e},{}", d.discrepancy, d.distinct as u8);
        pairs.push(json!({
            "a": a, "b": b,
            "obstacle_a": oa, "obstacle_b": ob,
            "potential_a": pa, "potential_b": pb,
            "discrepancy": d.discrepancy,
            "reference_norm": d.reference_norm,
            "relative_discrepancy": relative,
            "distinct": d.distinct,
        }));
    }
    let min_relative = results
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let (oa, ob) = (labels[idx / count].0, labels[idx % count].0);
            family.partition(oa).obstacle() != family.partition(ob).obstacle()
        })
        .map(|(_, d)| d.discrepancy / d.reference_norm.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let metrics = json!({
        "theta": theta,
        "scenarios": labels.iter().map(|&(o, p)| json!({
            "obstacle": o,
            "potential": p,
            "kind": family.candidates()[o].kind,
            "obstacle_nodes": family.partition(o).obstacle().len(),
        })).collect::<Vec<_>>(),
        "different_obstacle_pairs": different,
        "different_obstacle_pairs_distinct": different_distinct,
        "all_different_distinct": different == different_distinct,
        "identical_pairs": identical,
        "identical_pairs_zero": identical_zero,
        "min_relative_discrepancy_different": if different > 0 { json!(min_relative) } else { Value::Null },
        "pairs": pairs,
    });
    Ok(Outcome { metrics, artifacts: vec![Artifact::Text("plotdata/discrepancy_matrix.csv".into(), matrix)] })
}

/// `<out>/result.json` for a run directory.
pub fn result_path(out: &Path) -> PathBuf {
    out.join("result.json")
}
