//! Marking, refinement and the adaptive drivers.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::cvt::{cfcvdt_optimize, initial_cvdt_mesh, CvtError, DensityField};
use crate::estimate::{
    density_from_indicators_with, recover_gradient, recovery_estimator, residual_estimator, Estimate,
    EstimateError, EstimatorKind,
};
use crate::fem::{error_norms, solve_problem, ErrorNorms, FeFunction, FemError, ProblemSpec};
use crate::mesh::{build_edge_table, BoundaryFlag, Mesh, MeshError};
use crate::triangulate::{conforming_delaunay, TriangulationError};

/// Hard bound on the number of solves of the rate-fitting driver.
pub const HAT_MAX_SOLVES: usize = 7;
pub const DEFAULT_MAX_ITERS: usize = 80;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("all indicators are zero; nothing to mark")]
    NothingToMark,
    #[error("invalid marking input: {0}")]
    InvalidMarking(String),
    #[error("triangle {0} is out of range")]
    BadTriangle(usize),
    #[error("bisection closure did not terminate after {0} completions")]
    NonTermination(usize),
    #[error("rate fit needs at least two positive data points")]
    FitDomain,
    #[error("fitted rate p = {0} does not describe a converging history")]
    Strategy(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("mesh has no domain attached")]
    NoDomain,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Cvt(#[from] CvtError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Minimal set `M` with `Σ_M η_T² ≥ θ Σ η_T²`: the shortest prefix of the
/// indicators sorted decreasingly, ties by ascending index. Returned sorted.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>, AdaptError> {
    if indicators.is_empty() {
        return Err(AdaptError::InvalidMarking("no elements".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AdaptError::InvalidMarking(format!("theta = {theta}")));
    }
    if let Some(bad) = indicators.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(AdaptError::InvalidMarking(format!("indicator {bad}")));
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| indicators[i] * indicators[i]).sum();
    if total == 0.0 {
        return Err(AdaptError::NothingToMark);
    }
    let goal = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        if indicators[i] == 0.0 {
            break;
        }
        marked.push(i);
        acc += indicators[i] * indicators[i];
        if acc >= goal {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Newest-vertex bisection of the marked triangles plus conforming closure.
pub fn bisect(mesh: &Mesh, marked: &[usize]) -> Result<Mesh, AdaptError> {
    if let Some(&t) = marked.iter().find(|&&t| t >= mesh.num_triangles()) {
        return Err(AdaptError::BadTriangle(t));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let edges = build_edge_table(mesh)?;
    let ref_edge = |t: usize| edges.triangle_edges[t][mesh.refinement_edge[t] as usize];

    let mut split = vec![false; edges.edges.len()];
    let mut queue = VecDeque::new();
    for &t in marked {
        let e = ref_edge(t);
        if !split[e] {
            split[e] = true;
            queue.push_back(e);
        }
    }
    // a triangle with any split edge must split its refinement edge too
    let cap = 2 * mesh.num_triangles();
    let mut completions = 0;
    while let Some(e) = queue.pop_front() {
        let edge = &edges.edges[e];
        let tris = if edge.interior { &edge.triangles[..] } else { &edge.triangles[..1] };
        for &t in tris {
            let r = ref_edge(t);
            if !split[r] {
                split[r] = true;
                queue.push_back(r);
                completions += 1;
                if completions > cap {
                    return Err(AdaptError::NonTermination(completions));
                }
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary.clone();
    let mut mid = vec![usize::MAX; edges.edges.len()];
    for (e, edge) in edges.edges.iter().enumerate() {
        if !split[e] {
            continue;
        }
        let [a, b] = edge.vertices;
        mid[e] = vertices.len();
        vertices.push(edge.midpoint);
        boundary.push(if edge.interior {
            BoundaryFlag::Interior
        } else {
            mesh.boundary_segment_of_edge(a, b)
                .map_or(BoundaryFlag::Interior, BoundaryFlag::Segment)
        });
    }

    let mut lookup = std::collections::HashMap::new();
    for (e, edge) in edges.edges.iter().enumerate() {
        if split[e] {
            lookup.insert((edge.vertices[0], edge.vertices[1]), mid[e]);
        }
    }
    let midpoint_of = |a: usize, b: usize| lookup.get(&(a.min(b), a.max(b))).copied();

    let mut triangles = Vec::with_capacity(mesh.num_triangles() + 2 * marked.len());
    let mut refinement = Vec::with_capacity(triangles.capacity());
    let mut stack = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let r = mesh.refinement_edge[t] as usize;
        // rotate so the refinement edge is local edge 0
        stack.push([tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]]);
        while let Some([a, b, c]) = stack.pop() {
            match midpoint_of(b, c) {
                Some(m) => {
                    // children (a, b, m) and (a, m, c); m is newest in both
                    stack.push([m, a, b]);
                    stack.push([m, c, a]);
                }
                None => {
                    triangles.push([a, b, c]);
                    refinement.push(0);
                }
            }
        }
    }
    Ok(Mesh::new(vertices, triangles, boundary, refinement, mesh.domain.clone())?)
}

/// Insert the edge midpoints carrying the top half of the density mass (at
/// least one), then rebuild with a conforming Delaunay triangulation.
pub fn midpoint_refine(mesh: &Mesh, density: &DensityField) -> Result<Mesh, AdaptError> {
    midpoint_refine_weighted(mesh, density, 0)
}

/// As [`midpoint_refine`] with midpoint masses `ρ(m_e)·|e|^edge_power`.
pub fn midpoint_refine_weighted(mesh: &Mesh, density: &DensityField, edge_power: i32) -> Result<Mesh, AdaptError> {
    let domain = mesh.domain.clone().ok_or(AdaptError::NoDomain)?;
    let edges = build_edge_table(mesh)?;
    let rho = edges
        .edges
        .iter()
        .map(|e| density.eval(e.midpoint).map(|r| r * e.length.powi(edge_power)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = midpoint_count(&rho);
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(a.cmp(&b)));

    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for (p, f) in mesh.vertices.iter().zip(&mesh.boundary) {
        if f.is_boundary() {
            boundary.push(*p);
        } else {
            interior.push(*p);
        }
    }
    let mut chosen: Vec<usize> = order[..n].to_vec();
    chosen.sort_unstable();
    for e in chosen {
        let edge = &edges.edges[e];
        if edge.interior {
            interior.push(edge.midpoint);
        } else {
            boundary.push(edge.midpoint);
        }
    }
    Ok(conforming_delaunay(domain, &interior, &boundary)?)
}

/// `max{n : Σ_{i≤n} ρ_(i) ≤ ½ Σ ρ}` over the decreasingly sorted masses,
/// raised to one when that is zero.
pub fn midpoint_count(rho: &[f64]) -> usize {
    let mut sorted = rho.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let half = 0.5 * sorted.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut n = 0;
    for r in sorted {
        acc += r;
        if acc > half {
            break;
        }
        n += 1;
    }
    n.max(1).min(rho.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub c: f64,
    pub p: f64,
    /// Root-mean-square residual of the fit in `log η`.
    pub residual: f64,
}

/// Least squares on `log η = log c − p log N`.
pub fn fit_rate(data: &[(f64, f64)]) -> Result<FitResult, AdaptError> {
    if data.len() < 2 || data.iter().any(|&(n, e)| !(n > 0.0 && e > 0.0)) {
        return Err(AdaptError::FitDomain);
    }
    let k = data.len() as f64;
    let xs: Vec<f64> = data.iter().map(|d| d.0.ln()).collect();
    let ys: Vec<f64> = data.iter().map(|d| d.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 1e-14 * (1.0 + mx * mx) * k { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(FitResult {
        c: intercept.exp(),
        p: -slope,
        residual: (ss / k).sqrt(),
    })
}

/// `⌈(c/tol)^{1/p}⌉`, at least one.
pub fn target_vertices(fit: &FitResult, tol: f64) -> Result<usize, AdaptError> {
    if !(tol > 0.0) {
        return Err(AdaptError::Parameter(format!("tol = {tol}")));
    }
    if !(fit.p > 0.0) {
        return Err(AdaptError::Strategy(fit.p));
    }
    let n = (fit.c / tol).powf(1.0 / fit.p);
    // absorb rounding in powf so exact powers do not round up
    let n = (n * (1.0 - 1e-12)).ceil();
    Ok(if n.is_finite() { n.max(1.0) as usize } else { usize::MAX })
}

/// One SOLVE → ESTIMATE pass.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub vertices: usize,
    pub eta: f64,
    pub error: Option<ErrorNorms>,
    pub seconds: f64,
    pub mesh: Arc<Mesh>,
    pub solution: FeFunction,
    pub estimate: Estimate,
}

impl IterationRecord {
    /// The error norm matching the estimator: weighted for the weighted
    /// estimator, plain gradient error otherwise.
    pub fn error_value(&self) -> Option<f64> {
        self.error.map(|e| match self.estimate.kind {
            EstimatorKind::WeightedRecovery => e.weighted_energy,
            _ => e.grad_l2,
        })
    }

    pub fn effectivity(&self) -> Option<f64> {
        self.error_value().map(|e| self.eta / e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdaptHistory {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub fit: Option<FitResult>,
    pub target: Option<usize>,
}

impl AdaptHistory {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Estimator of the requested kind for a solved `u_h`.
pub fn estimate(u_h: &FeFunction, problem: &ProblemSpec, kind: EstimatorKind) -> Result<Estimate, AdaptError> {
    Ok(match kind {
        EstimatorKind::Residual => residual_estimator(u_h, problem)?,
        EstimatorKind::Recovery => recovery_estimator(u_h, &recover_gradient(u_h)?, None)?,
        EstimatorKind::WeightedRecovery => {
            recovery_estimator(u_h, &recover_gradient(u_h)?, Some(&problem.coefficient))?
        }
    })
}

fn solve_and_estimate(
    k: usize,
    mesh: Arc<Mesh>,
    problem: &ProblemSpec,
    kind: EstimatorKind,
    started: Instant,
) -> Result<IterationRecord, AdaptError> {
    let solution = solve_problem(mesh.clone(), problem)?;
    let estimate = estimate(&solution, problem, kind)?;
    let error = match problem.exact {
        Some(_) => Some(error_norms(&solution, problem)?),
        None => None,
    };
    let record = IterationRecord {
        k,
        vertices: mesh.num_vertices(),
        eta: estimate.global,
        error,
        seconds: started.elapsed().as_secs_f64(),
        mesh,
        solution,
        estimate,
    };
    log::info!(
        "k={} N={} eta={:.4e} error={}",
        record.k,
        record.vertices,
        record.eta,
        record.error_value().map_or("-".into(), |e| format!("{e:.4e}"))
    );
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct StandardConfig {
    pub tol: f64,
    pub theta: f64,
    pub estimator: EstimatorKind,
    /// Upper bound on the number of solves.
    pub max_iters: usize,
}

/// SOLVE → ESTIMATE → MARK (Dörfler) → REFINE (bisection) until `η ≤ tol`.
pub fn run_standard_afem(
    problem: &ProblemSpec,
    initial: Mesh,
    config: &StandardConfig,
) -> Result<AdaptHistory, AdaptError> {
    if !(config.theta > 0.0 && config.theta < 1.0) {
        return Err(AdaptError::Parameter(format!("theta = {}", config.theta)));
    }
    if !(config.tol > 0.0) || config.max_iters == 0 {
        return Err(AdaptError::Parameter("tol must be positive and max_iters ≥ 1".into()));
    }
    let started = Instant::now();
    let mut history = AdaptHistory::default();
    let mut mesh = Arc::new(initial);
    for k in 0..config.max_iters {
        let record = solve_and_estimate(k, mesh.clone(), problem, config.estimator, started)?;
        let done = record.eta <= config.tol;
        let indicators = record.estimate.per_element.clone();
        history.records.push(record);
        if done {
            history.converged = true;
            break;
        }
        if k + 1 == config.max_iters {
            break;
        }
        let marked = dorfler_mark(&indicators, config.theta)?;
        mesh = Arc::new(bisect(&mesh, &marked)?);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct HatConfig {
    pub tol: f64,
    pub n0: usize,
    pub lloyd_iters: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    /// First history index used by the rate fit (which ends at index 4).
    pub fit_start: usize,
    /// Exponent of `η_T` in the density.
    pub indicator_power: i32,
    /// Exponent of the edge length in the midpoint masses.
    pub edge_power: i32,
}

impl HatConfig {
    /// Defaults: 20 Lloyd steps, seed 1, fit over the last two records,
    /// density `η_T/h_T⁴` and midpoint masses `ρ(m_e)|e|⁴`, so that the
    /// inserted midpoints carry half of the local error.
    pub fn new(tol: f64, n0: usize, estimator: EstimatorKind) -> Self {
        Self {
            tol,
            n0,
            lloyd_iters: 20,
            seed: 1,
            estimator,
            fit_start: 3,
            indicator_power: 1,
            edge_power: 4,
        }
    }
}

/// The rate-fitting adaptive loop: a uniform CVDT start, density-driven
/// midpoint insertion plus CVDT optimization, and at step 5 a jump toward the
/// vertex count predicted by the fitted rate. At most seven solves.
pub fn run_hat_afem(problem: &ProblemSpec, config: &HatConfig) -> Result<AdaptHistory, AdaptError> {
    if !(config.tol > 0.0) {
        return Err(AdaptError::Parameter(format!("tol = {}", config.tol)));
    }
    if config.lloyd_iters == 0 {
        return Err(AdaptError::Parameter("lloyd_iters must be at least 1".into()));
    }
    if config.fit_start > 3 {
        return Err(AdaptError::Parameter("fit window needs at least two points".into()));
    }
    let started = Instant::now();
    let mut history = AdaptHistory::default();
    let mesh = initial_cvdt_mesh(problem.domain.clone(), config.n0, config.lloyd_iters, config.seed)?;
    let record = solve_and_estimate(0, Arc::new(mesh), problem, config.estimator, started)?;
    let done = record.eta <= config.tol;
    history.records.push(record);
    if done {
        history.converged = true;
        return Ok(history);
    }
    for k in 1..HAT_MAX_SOLVES {
        let prev = history.records.last().unwrap();
        let mut rounds = 1;
        if k == 5 {
            let data: Vec<(f64, f64)> = history.records[config.fit_start..5]
                .iter()
                .map(|r| (r.vertices as f64, r.eta))
                .collect();
            match fit_rate(&data).and_then(|fit| Ok((fit, target_vertices(&fit, config.tol)?))) {
                Ok((fit, target)) => {
                    history.fit = Some(fit);
                    history.target = Some(target);
                    let ratio = target as f64 / prev.vertices as f64;
                    rounds = (ratio.log2().ceil().max(1.0)) as usize;
                    log::info!("fit c={:.4e} p={:.4} target N={} rounds={}", fit.c, fit.p, target, rounds);
                }
                Err(e) => log::warn!("rate fit failed ({e}); refining once"),
            }
        }
        let density = density_from_indicators_with(prev.mesh.clone(), &prev.estimate, config.indicator_power)?;
        let mut mesh = (*prev.mesh).clone();
        for _ in 0..rounds {
            mesh = midpoint_refine_weighted(&mesh, &density, config.edge_power)?;
            mesh = cfcvdt_optimize(&mesh, &density, config.lloyd_iters)?;
        }
        let record = solve_and_estimate(k, Arc::new(mesh), problem, config.estimator, started)?;
        let done = record.eta <= config.tol;
        history.records.push(record);
        if done {
            history.converged = true;
            break;
        }
    }
    Ok(history)
}
