//! Benchmark drivers: the (s,t) grid study, the method comparison with
//! speedups, gap-vs-time against Sinkhorn, and the large-scale run with
//! barycentric projection snapshots.

use num::rational::BigRational;
use num::Zero;
use serde::Serialize;

use crate::bcdns::{gs_bcdns, gs_bcdns_with_hook, rs_bcdns, BlockConfig};
use crate::error::{OtError, Result};
use crate::generate::{generate_samples, PairSpec, SamplePair};
use crate::instance::{make_instance, OTInstance, TransportPlan, DEFAULT_SCALE};
use crate::oracle::oracle_1d_monotone;
use crate::report::OuterReport;
use crate::simplex::{northwest_corner, solve_full, SolveOptions};
use crate::sinkhorn::{
    plan_from_potentials, quantize_to_feasible, round_to_feasible, sinkhorn_solve,
    SinkhornConfig, DEFAULT_REFINEMENT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Ns,
    RsBcdns,
    GsBcdns,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ns, Method::RsBcdns, Method::GsBcdns];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ns => "ns",
            Method::RsBcdns => "rs-bcdns",
            Method::GsBcdns => "gs-bcdns",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = OtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ns" => Ok(Method::Ns),
            "rs-bcdns" | "rs" => Ok(Method::RsBcdns),
            "gs-bcdns" | "gs" => Ok(Method::GsBcdns),
            other => Err(OtError::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// One evaluated cell of the (s,t) grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub s: f64,
    pub t: f64,
    pub outer_iterations: u64,
    pub pivots: u64,
    pub evals: u64,
    pub objective_scaled: i128,
    pub time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub cells: Vec<GridCell>,
}

/// Runs GS-BCDNS on one shared instance for every pair with s < t; pairs
/// violating s < t are skipped, not reported.
pub fn run_grid(
    spec: &PairSpec,
    n: usize,
    seed: u64,
    s_list: &[f64],
    t_list: &[f64],
) -> Result<GridResult> {
    let samples = generate_samples(spec, n, seed)?;
    let inst = make_instance(&samples, DEFAULT_SCALE)?;
    let mut cells = Vec::new();
    for &s in s_list {
        for &t in t_list {
            if s >= t {
                continue;
            }
            let config = BlockConfig { s, t, ..BlockConfig::default_for(n, seed) };
            let (_, report) = gs_bcdns(&inst, &config)?;
            cells.push(GridCell {
                s,
                t,
                outer_iterations: report.outer_iterations,
                pivots: report.total_pivots,
                evals: report.total_evals,
                objective_scaled: report.objective_scaled,
                time_s: report.time_s,
            });
        }
    }
    Ok(GridResult { problem: spec.to_string(), n, seed, cells })
}

pub fn write_grid_csv<W: std::io::Write>(grid: &GridResult, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "problem",
        "n",
        "seed",
        "s",
        "t",
        "outer_iterations",
        "pivots",
        "evals",
        "objective_scaled",
        "time_s",
    ])?;
    for c in &grid.cells {
        wtr.write_record([
            grid.problem.clone(),
            grid.n.to_string(),
            grid.seed.to_string(),
            format!("{:.6}", c.s),
            format!("{:.6}", c.t),
            c.outer_iterations.to_string(),
            c.pivots.to_string(),
            c.evals.to_string(),
            c.objective_scaled.to_string(),
            format!("{:.6}", c.time_s),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub objective_scaled: i128,
    pub objective: f64,
    pub pivots: u64,
    pub evals: u64,
    pub time_s: f64,
    pub speedup_vs_ns: f64,
}

fn solve_with(inst: &OTInstance, method: Method, seed: u64) -> Result<(i128, u64, u64, f64)> {
    match method {
        Method::Ns => {
            let state = northwest_corner(inst)?;
            let (_, r) = solve_full(inst, state, &SolveOptions::default())?;
            Ok((r.objective_scaled, r.pivots, r.evals, r.time_s))
        }
        Method::RsBcdns => {
            let (_, r) = rs_bcdns(inst, &BlockConfig::default_for(inst.n(), seed))?;
            Ok((r.objective_scaled, r.total_pivots, r.total_evals, r.time_s))
        }
        Method::GsBcdns => {
            let (_, r) = gs_bcdns(inst, &BlockConfig::default_for(inst.n(), seed))?;
            Ok((r.objective_scaled, r.total_pivots, r.total_evals, r.time_s))
        }
    }
}

/// All methods on identical instances (one per n, seeded base_seed + n).
/// NS is always run first so speedups are defined; any disagreement in the
/// scaled objectives across exact methods is a hard error.
pub fn run_comparison(
    spec: &PairSpec,
    n_list: &[usize],
    base_seed: u64,
    methods: &[Method],
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &n in n_list {
        let seed = base_seed.wrapping_add(n as u64);
        let samples = generate_samples(spec, n, seed)?;
        let inst = make_instance(&samples, DEFAULT_SCALE)?;
        let (ns_obj, ns_pivots, ns_evals, ns_time) = solve_with(&inst, Method::Ns, seed)?;
        for &method in methods {
            let (obj, pivots, evals, time_s) = if method == Method::Ns {
                (ns_obj, ns_pivots, ns_evals, ns_time)
            } else {
                solve_with(&inst, method, seed)?
            };
            if obj != ns_obj {
                return Err(OtError::ExactnessViolation(format!(
                    "{method} found {obj} but ns found {ns_obj} on {spec} n={n} seed={seed}"
                )));
            }
            rows.push(ComparisonRow {
                problem: spec.to_string(),
                n,
                seed,
                method: method.to_string(),
                objective_scaled: obj,
                objective: inst.descale_objective(obj),
                pivots,
                evals,
                time_s,
                speedup_vs_ns: ns_time / time_s,
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: std::io::Write>(rows: &[ComparisonRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "problem",
        "n",
        "seed",
        "method",
        "objective_scaled",
        "objective",
        "pivots",
        "evals",
        "time_s",
        "speedup_vs_ns",
    ])?;
    for r in rows {
        wtr.write_record([
            r.problem.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            r.method.clone(),
            r.objective_scaled.to_string(),
            format!("{:.12}", r.objective),
            r.pivots.to_string(),
            r.evals.to_string(),
            format!("{:.6}", r.time_s),
            format!("{:.4}", r.speedup_vs_ns),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapPoint {
    pub time_s: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct GapTrace {
    pub method: String,
    pub epsilon: Option<f64>,
    pub points: Vec<GapPoint>,
    /// Gap of the final iterate computed in exact rational arithmetic
    /// (zero for the exact methods, the regularization bias for Sinkhorn).
    pub final_gap_exact: BigRational,
}

impl GapTrace {
    /// Approximate float value of the exact final gap, for summaries.
    pub fn final_gap_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(&self.final_gap_exact).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct GapStudy {
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub f_star_scaled: i128,
    pub traces: Vec<GapTrace>,
}

/// Gap-vs-time study: the exact reference f* comes from a full network
/// simplex solve, then GS-BCDNS and one Sinkhorn run per epsilon are traced
/// against it.
pub fn run_gap_vs_time(
    spec: &PairSpec,
    n: usize,
    seed: u64,
    eps_list: &[f64],
    sinkhorn_time_budget_s: f64,
) -> Result<GapStudy> {
    let samples = generate_samples(spec, n, seed)?;
    let inst = make_instance(&samples, DEFAULT_SCALE)?;
    let state = northwest_corner(&inst)?;
    let (_, ns) = solve_full(&inst, state, &SolveOptions::default())?;
    let f_star = ns.objective_scaled;

    let mut traces = Vec::new();

    let (_, gs) = gs_bcdns(&inst, &BlockConfig::default_for(n, seed))?;
    if gs.objective_scaled != f_star {
        return Err(OtError::ExactnessViolation(format!(
            "gs-bcdns found {} but ns found {f_star}",
            gs.objective_scaled
        )));
    }
    let gs_points = gs
        .iterations
        .iter()
        .map(|it| GapPoint {
            time_s: it.time_s,
            gap: inst.descale_objective(it.objective_scaled - f_star),
        })
        .collect();
    traces.push(GapTrace {
        method: "gs-bcdns".into(),
        epsilon: None,
        points: gs_points,
        final_gap_exact: BigRational::zero(),
    });

    let f_star_descaled = inst.descale_objective(f_star);
    for &eps in eps_list {
        let mut config = SinkhornConfig::for_instance(eps, n)?;
        config.max_time_s = sinkhorn_time_budget_s;
        config.objective_stop_tol = Some(1e-6);
        let result = sinkhorn_solve(&inst, &config)?;
        let points = result
            .trace
            .iter()
            .map(|t| GapPoint { time_s: t.time_s, gap: t.objective_rounded - f_star_descaled })
            .collect();
        let dense = plan_from_potentials(&inst, &result.f, &result.g, config.gamma);
        let rounded = round_to_feasible(&dense, &inst);
        let exact = quantize_to_feasible(&rounded, &inst, DEFAULT_REFINEMENT)?;
        if !exact.is_exactly_feasible(&inst) {
            return Err(OtError::ExactnessViolation(format!(
                "quantized rounding lost feasibility at eps={eps}"
            )));
        }
        let gap_num = exact.gap_numerator(&inst, f_star);
        if gap_num < 0 {
            return Err(OtError::ExactnessViolation(format!(
                "negative exact gap numerator {gap_num} at eps={eps}; weak duality violated"
            )));
        }
        let final_gap_exact = BigRational::new(
            num::BigInt::from(gap_num),
            num::BigInt::from(inst.scale())
                * num::BigInt::from(inst.mass_denom())
                * num::BigInt::from(exact.refinement),
        );
        traces.push(GapTrace { method: "sinkhorn".into(), epsilon: Some(eps), points, final_gap_exact });
    }
    Ok(GapStudy { problem: spec.to_string(), n, seed, f_star_scaled: f_star, traces })
}

pub fn write_gap_trace_csv<W: std::io::Write>(
    study: &GapStudy,
    trace: &GapTrace,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["problem", "n", "seed", "method", "epsilon", "time_s", "gap"])?;
    let eps = trace.epsilon.map_or_else(|| "exact".to_string(), |e| format!("{e:e}"));
    for p in &trace.points {
        wtr.write_record([
            study.problem.clone(),
            study.n.to_string(),
            study.seed.to_string(),
            trace.method.clone(),
            eps.clone(),
            format!("{:.6}", p.time_s),
            format!("{:.12}", p.gap),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Barycentric projection T(u_i) = (1/p_i) sum_j v_j x_ij for 1D targets.
pub fn barycentric_projection(
    plan: &TransportPlan,
    samples: &SamplePair,
    inst: &OTInstance,
) -> Result<Vec<f64>> {
    if samples.dim != 1 {
        return Err(OtError::InvalidInput("barycentric projection needs 1D samples".into()));
    }
    if inst.supply_units().iter().any(|&u| u == 0) {
        return Err(OtError::InvalidInput(
            "barycentric projection requires strictly positive source marginals".into(),
        ));
    }
    let mut weighted = vec![0.0f64; inst.n()];
    for (l, units) in plan.iter() {
        let (i, j) = inst.arc_endpoints(l);
        weighted[i] += samples.v[j] * units as f64;
    }
    Ok(weighted
        .iter()
        .zip(inst.supply_units())
        .map(|(&w, &p)| w / p as f64)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSnapshot {
    pub epoch: u64,
    pub projection: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LargeScaleResult {
    pub samples: SamplePair,
    pub report: OuterReport,
    pub snapshots: Vec<ProjectionSnapshot>,
    pub final_projection: Vec<f64>,
    pub oracle_value: f64,
    pub oracle_abs_diff: f64,
    pub tolerance: f64,
}

/// GS-BCDNS on a 1D instance with projection snapshots at the requested
/// epochs; the final value is checked against the monotone-coupling oracle
/// within n^2 / scale.
pub fn run_large_scale(
    spec: &PairSpec,
    n: usize,
    seed: u64,
    checkpoints: &[u64],
) -> Result<LargeScaleResult> {
    let samples = generate_samples(spec, n, seed)?;
    if samples.dim != 1 {
        return Err(OtError::InvalidInput("large-scale run is defined on 1D samples".into()));
    }
    let inst = make_instance(&samples, DEFAULT_SCALE)?;
    let config = BlockConfig::default_for(n, seed);

    let mut snapshots: Vec<ProjectionSnapshot> = Vec::new();
    let mut snapshot_err: Option<OtError> = None;
    let result = {
        let mut hook = |k: u64, state: &crate::simplex::SimplexState| {
            if snapshot_err.is_some() || !checkpoints.contains(&k) {
                return;
            }
            match barycentric_projection(&state.plan, &samples, &inst) {
                Ok(projection) => snapshots.push(ProjectionSnapshot { epoch: k, projection }),
                Err(e) => snapshot_err = Some(e),
            }
        };
        gs_bcdns_with_hook(&inst, &config, Some(&mut hook))
    };
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    let (plan, report) = result?;

    let final_projection = barycentric_projection(&plan, &samples, &inst)?;
    let oracle_value = oracle_1d_monotone(&samples)?;
    let oracle_abs_diff = (report.objective - oracle_value).abs();
    let tolerance = (n * n) as f64 / inst.scale() as f64;
    if oracle_abs_diff > tolerance {
        return Err(OtError::ExactnessViolation(format!(
            "objective {} differs from the 1D oracle {} by {} > {}",
            report.objective, oracle_value, oracle_abs_diff, tolerance
        )));
    }
    Ok(LargeScaleResult {
        samples,
        report,
        snapshots,
        final_projection,
        oracle_value,
        oracle_abs_diff,
        tolerance,
    })
}

pub fn write_barycentric_csv<W: std::io::Write>(
    result: &LargeScaleResult,
    epoch: Option<u64>,
    projection: &[f64],
    seed: u64,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["n", "seed", "epoch", "i", "u", "t_u"])?;
    let n = result.samples.n_source();
    let epoch_str = epoch.map_or_else(|| "final".to_string(), |e| e.to_string());
    for i in 0..n {
        wtr.write_record([
            n.to_string(),
            seed.to_string(),
            epoch_str.clone(),
            i.to_string(),
            format!("{:.12}", result.samples.u[i]),
            format!("{:.12}", projection[i]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Fast (f64) gap of the current Sinkhorn potentials after rounding; used
/// by trace consumers that do not need exact arithmetic.
pub fn quick_rounded_gap(
    inst: &OTInstance,
    f: &[f64],
    g: &[f64],
    gamma: f64,
    f_star_scaled: i128,
) -> f64 {
    let rounded = round_to_feasible(&plan_from_potentials(inst, f, g, gamma), inst);
    rounded.objective_quantized(inst) - inst.descale_objective(f_star_scaled)
}
