//! Command-line surface: instance generation, the exact and entropic
//! solvers, the benchmark drivers and plan certification, all with
//! machine-readable outputs that echo their resolved configuration.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ot_core::bcdns::{gs_bcdns, rs_bcdns, BlockConfig};
use ot_core::bench::{
    run_comparison, run_gap_vs_time, run_grid, run_large_scale, write_barycentric_csv,
    write_comparison_csv, write_gap_trace_csv, write_grid_csv, Method,
};
use ot_core::generate::{generate_samples, PairSpec};
use ot_core::instance::{
    check_feasibility, make_instance, read_instance_file, write_instance_file, OTInstance,
    TransportPlan, DEFAULT_SCALE,
};
use ot_core::simplex::{
    basis_from_plan, northwest_corner, solve_full, PricingRule, SolveOptions,
};
use ot_core::sinkhorn::{
    plan_from_potentials, quantize_to_feasible, round_to_feasible, sinkhorn_solve,
    write_trace_csv, SinkhornConfig, DEFAULT_REFINEMENT,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "ot", version, about = "Exact and entropic optimal transport solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a sampled instance file.
    Gen(GenArgs),
    /// Solve one instance with a chosen method and write a report.
    Solve(SolveArgs),
    /// Run a benchmark experiment.
    Bench {
        #[command(subcommand)]
        which: BenchCmd,
    },
    /// Check a saved plan for exact feasibility and optimality.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Distribution pair, e.g. uniform-normal, normal-mixture-2d,
    /// uniform-beta, or a generic "source-1d:target-1d" form.
    #[arg(long, default_value = "uniform-normal")]
    problem: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integer cost scaling factor.
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Ns,
    RsBcdns,
    GsBcdns,
    Sinkhorn,
}

impl SolveMethod {
    fn name(self) -> &'static str {
        match self {
            SolveMethod::Ns => "ns",
            SolveMethod::RsBcdns => "rs-bcdns",
            SolveMethod::GsBcdns => "gs-bcdns",
            SolveMethod::Sinkhorn => "sinkhorn",
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    method: SolveMethod,
    /// Generated problem family (ignored when --input is given).
    #[arg(long, default_value = "uniform-normal")]
    problem: String,
    #[arg(long, conflicts_with = "input")]
    n: Option<usize>,
    /// Instance file produced by `ot gen` (or the raw cost-matrix form).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: i64,
    /// Working-set fraction (block-coordinate methods). Default 2/n.
    #[arg(long)]
    s: Option<f64>,
    /// Screening fraction (gs-bcdns). Default 20/n.
    #[arg(long)]
    t: Option<f64>,
    /// Absolute block size overriding ceil(s*N).
    #[arg(long)]
    block_size: Option<usize>,
    /// Entering-arc rule: most-negative or bland.
    #[arg(long, default_value = "most-negative")]
    pricing: String,
    /// Sinkhorn regularization epsilon.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Sinkhorn convergence threshold on potential changes.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Sinkhorn wall-clock budget in seconds.
    #[arg(long, default_value_t = 2000.0)]
    budget_s: f64,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Optional sparse plan output.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Optional per-outer-iteration CSV (block-coordinate methods) or
    /// Sinkhorn trace CSV.
    #[arg(long)]
    iters_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// (s,t) grid study for GS-BCDNS on one instance.
    Grid(GridArgs),
    /// NS / RS-BCDNS / GS-BCDNS comparison over a size sweep.
    Compare(CompareArgs),
    /// Gap-vs-time study: GS-BCDNS against Sinkhorn at several epsilons.
    Gap(GapArgs),
    /// Large-scale GS-BCDNS run with barycentric projection snapshots.
    Large(LargeArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value = "uniform-normal")]
    problem: String,
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated s values; default {2/n, 0.1, 0.3, 0.5}.
    #[arg(long)]
    s_list: Option<String>,
    /// Comma-separated t values; default {20/n, 0.3, 0.6, 0.9}.
    #[arg(long)]
    t_list: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value = "uniform-normal")]
    problem: String,
    #[arg(long, default_value = "50,100,150,200,250,300,350,400")]
    n_list: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated methods out of ns, rs-bcdns, gs-bcdns.
    #[arg(long, default_value = "ns,rs-bcdns,gs-bcdns")]
    methods: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long, default_value = "uniform-normal")]
    problem: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
    eps: String,
    #[arg(long, default_value_t = 2000.0)]
    budget_s: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LargeArgs {
    #[arg(long, default_value = "uniform-beta")]
    problem: String,
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "10,20,50,100")]
    checkpoints: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Instance file the plan refers to.
    #[arg(long)]
    input: PathBuf,
    /// Sparse plan file produced by `ot solve --plan`.
    #[arg(long)]
    plan: PathBuf,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Sparse plan on disk: mass in integer units of 1/mass_denom.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    n: usize,
    m: usize,
    mass_denom: u64,
    entries: Vec<(usize, usize, u64)>,
}

impl PlanFile {
    fn from_plan(plan: &TransportPlan, inst: &OTInstance) -> Self {
        let (n, m) = plan.dims();
        let entries = plan
            .iter()
            .filter(|&(_, units)| units > 0)
            .map(|(l, units)| {
                let (i, j) = inst.arc_endpoints(l);
                (i, j, units)
            })
            .collect();
        PlanFile { n, m, mass_denom: inst.mass_denom(), entries }
    }

    fn into_plan(self, inst: &OTInstance) -> Result<TransportPlan> {
        if self.n != inst.n() || self.m != inst.m() {
            bail!(
                "plan is {}x{} but the instance is {}x{}",
                self.n,
                self.m,
                inst.n(),
                inst.m()
            );
        }
        if self.mass_denom != inst.mass_denom() {
            bail!(
                "plan mass denominator {} does not match the instance's {}",
                self.mass_denom,
                inst.mass_denom()
            );
        }
        let mut plan = TransportPlan::new(self.n, self.m);
        for (i, j, units) in self.entries {
            if i >= self.n || j >= self.m {
                bail!("plan entry ({i},{j}) is out of range");
            }
            plan.set_mass(inst.arc(i, j), units);
        }
        Ok(plan)
    }
}

fn threads_from_env() -> usize {
    std::env::var("OT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(1)
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} value '{s}': {e}")))
        .collect()
}

fn parse_problem(raw: &str) -> Result<PairSpec> {
    PairSpec::from_str(raw).with_context(|| format!("invalid --problem '{raw}'"))
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            let mut f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            writeln!(f, "{text}")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn load_instance(args: &SolveArgs) -> Result<(OTInstance, serde_json::Value)> {
    if let Some(path) = &args.input {
        let inst = read_instance_file(path)?;
        let src = json!({ "input": path.display().to_string() });
        Ok((inst, src))
    } else {
        let n = args
            .n
            .unwrap_or_else(|| usage_error("either --n (generated instance) or --input is required"));
        let spec = parse_problem(&args.problem)?;
        let samples = generate_samples(&spec, n, args.seed)?;
        let inst = make_instance(&samples, args.scale)?;
        let src = json!({ "problem": spec.to_string(), "n": n, "seed": args.seed, "scale": args.scale });
        Ok((inst, src))
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = parse_problem(&args.problem)?;
    let samples = generate_samples(&spec, args.n, args.seed)?;
    write_instance_file(&args.out, &samples, args.scale)?;
    println!(
        "wrote {} ({} n={} seed={} scale={})",
        args.out.display(),
        spec,
        args.n,
        args.seed,
        args.scale
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let pricing: PricingRule = args
        .pricing
        .parse()
        .unwrap_or_else(|_| usage_error("--pricing must be 'most-negative' or 'bland'"));
    if args.method == SolveMethod::GsBcdns && (args.s.is_some() != args.t.is_some()) {
        usage_error("gs-bcdns needs both --s and --t (or neither, for the 2/n and 20/n defaults)");
    }
    let (inst, source) = load_instance(&args)?;
    let n = inst.n();
    let threads = threads_from_env();

    let block_config = |seed: u64| {
        let mut c = BlockConfig::default_for(n, seed);
        if let Some(s) = args.s {
            c.s = s;
        }
        if let Some(t) = args.t {
            c.t = t;
        }
        c.block_size_override = args.block_size;
        c.pricing = pricing;
        c
    };
    let config_echo = json!({
        "method": args.method.name(),
        "source": source,
        "s": args.s,
        "t": args.t,
        "block_size": args.block_size,
        "pricing": pricing.to_string(),
        "eps": if args.method == SolveMethod::Sinkhorn { Some(args.eps) } else { None },
        "delta": args.delta,
        "budget_s": args.budget_s,
        "threads": threads,
    });

    let mut exit = 0;
    let report_value = match args.method {
        SolveMethod::Ns => {
            let state = northwest_corner(&inst)?;
            let (state, report) = solve_full(&inst, state, &SolveOptions {
                pricing,
                ..SolveOptions::default()
            })?;
            if let Some(p) = &args.plan {
                write_json(Some(p), &serde_json::to_value(PlanFile::from_plan(&state.plan, &inst))?)?;
            }
            serde_json::to_value(&report)?
        }
        SolveMethod::RsBcdns | SolveMethod::GsBcdns => {
            let config = block_config(args.seed);
            let (plan, report) = if args.method == SolveMethod::RsBcdns {
                rs_bcdns(&inst, &config)?
            } else {
                gs_bcdns(&inst, &config)?
            };
            if let Some(p) = &args.plan {
                write_json(Some(p), &serde_json::to_value(PlanFile::from_plan(&plan, &inst))?)?;
            }
            if let Some(p) = &args.iters_csv {
                report.write_iteration_csv(File::create(p)?)?;
            }
            serde_json::to_value(&report)?
        }
        SolveMethod::Sinkhorn => {
            let mut config = SinkhornConfig::for_instance(args.eps, n)?;
            config.delta = args.delta;
            config.max_time_s = args.budget_s;
            config.objective_stop_tol = Some(1e-6);
            config.threads = threads;
            let result = sinkhorn_solve(&inst, &config)?;
            let dense = plan_from_potentials(&inst, &result.f, &result.g, config.gamma);
            let rounded =
                quantize_to_feasible(&round_to_feasible(&dense, &inst), &inst, DEFAULT_REFINEMENT)?;
            let feasible = rounded.is_exactly_feasible(&inst);
            let objective = rounded.objective_scaled_refined(&inst) as f64
                / (inst.scale() as f64
                    * inst.mass_denom() as f64
                    * rounded.refinement as f64);
            if let Some(p) = &args.iters_csv {
                write_trace_csv(&result.trace, File::create(p)?)?;
            }
            if !result.converged || !feasible {
                exit = 1;
            }
            json!({
                "method": "sinkhorn",
                "gamma": config.gamma,
                "iterations": result.iterations,
                "converged": result.converged,
                "time_s": result.time_s,
                "rounded_objective": objective,
                "rounded_exactly_feasible": feasible,
            })
        }
    };
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "config": config_echo,
        "result": report_value,
    });
    write_json(args.report.as_deref(), &out)?;
    Ok(exit)
}

fn cmd_certify(args: CertifyArgs) -> Result<i32> {
    let inst = read_instance_file(&args.input)?;
    let file: PlanFile = serde_json::from_reader(File::open(&args.plan)?)?;
    let plan = file.into_plan(&inst)?;
    let feas = check_feasibility(&plan, &inst)?;
    let (objective_scaled, objective) = ot_core::instance::objective(&plan, &inst)?;
    // A tree completion of the plan's support is not necessarily dual
    // feasible even when the plan is optimal, so certification re-solves
    // from that basis: the plan is optimal iff the objective cannot drop.
    let mut min_reduced: Option<i64> = None;
    let mut optimal = false;
    if feas.feasible {
        let basis = basis_from_plan(&inst, &plan)?;
        let state = ot_core::simplex::SimplexState::from_basis(&inst, plan, &basis.arcs())?;
        let (_, report) = solve_full(&inst, state, &SolveOptions::default())?;
        min_reduced = report.certificate.map(|c| c.min_reduced_cost);
        optimal = report.objective_scaled == objective_scaled;
    }
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "input": args.input.display().to_string(),
            "plan": args.plan.display().to_string(),
        },
        "feasible": feas.feasible,
        "max_violation_units": feas.max_violation,
        "min_reduced_cost": min_reduced,
        "optimal": optimal,
        "objective_scaled": objective_scaled.to_string(),
        "objective": objective,
    });
    write_json(args.report.as_deref(), &out)?;
    Ok(if optimal { 0 } else { 1 })
}

fn cmd_bench_grid(args: GridArgs) -> Result<()> {
    let spec = parse_problem(&args.problem)?;
    let n = args.n;
    let s_list = match &args.s_list {
        Some(raw) => parse_list::<f64>(raw, "--s-list")?,
        None => vec![2.0 / n as f64, 0.1, 0.3, 0.5],
    };
    let t_list = match &args.t_list {
        Some(raw) => parse_list::<f64>(raw, "--t-list")?,
        None => vec![20.0 / n as f64, 0.3, 0.6, 0.9],
    };
    let grid = run_grid(&spec, n, args.seed, &s_list, &t_list)?;
    let path = args.out_dir.join(format!("grid_results_{n}.csv"));
    write_grid_csv(&grid, File::create(&path)?)?;
    for c in &grid.cells {
        println!(
            "s={:.4} t={:.4}: {} outer iters, {} pivots, {} evals, {:.3}s",
            c.s, c.t, c.outer_iterations, c.pivots, c.evals, c.time_s
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bench_compare(args: CompareArgs) -> Result<()> {
    let spec = parse_problem(&args.problem)?;
    let n_list = parse_list::<usize>(&args.n_list, "--n-list")?;
    let methods = parse_list::<Method>(&args.methods, "--methods")?;
    let rows = run_comparison(&spec, &n_list, args.seed, &methods)?;
    let path = args.out_dir.join(format!("comparison_{}.csv", args.problem));
    write_comparison_csv(&rows, File::create(&path)?)?;
    for r in &rows {
        println!(
            "n={} {}: objective={:.6} pivots={} evals={} time={:.3}s speedup={:.2}x",
            r.n, r.method, r.objective, r.pivots, r.evals, r.time_s, r.speedup_vs_ns
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bench_gap(args: GapArgs) -> Result<()> {
    let spec = parse_problem(&args.problem)?;
    let eps_list = parse_list::<f64>(&args.eps, "--eps")?;
    let study = run_gap_vs_time(&spec, args.n, args.seed, &eps_list, args.budget_s)?;
    for trace in &study.traces {
        let tag = trace.epsilon.map_or_else(|| "exact".to_string(), |e| format!("{e:e}"));
        let path = args.out_dir.join(format!("gap_trace_{}_{}.csv", trace.method, tag));
        write_gap_trace_csv(&study, trace, File::create(&path)?)?;
        println!(
            "{} eps={}: {} trace points, final gap {:.3e} -> {}",
            trace.method,
            tag,
            trace.points.len(),
            trace.final_gap_f64(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_bench_large(args: LargeArgs) -> Result<()> {
    let spec = parse_problem(&args.problem)?;
    let checkpoints = parse_list::<u64>(&args.checkpoints, "--checkpoints")?;
    let result = run_large_scale(&spec, args.n, args.seed, &checkpoints)?;
    for snap in &result.snapshots {
        let path = args.out_dir.join(format!("barycentric_{}_{}.csv", args.n, snap.epoch));
        write_barycentric_csv(&result, Some(snap.epoch), &snap.projection, args.seed, File::create(&path)?)?;
        println!("epoch {}: wrote {}", snap.epoch, path.display());
    }
    let final_path = args.out_dir.join(format!("barycentric_{}_final.csv", args.n));
    write_barycentric_csv(&result, None, &result.final_projection, args.seed, File::create(&final_path)?)?;
    let report_path = args.out_dir.join(format!("large_scale_{}.json", args.n));
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "problem": spec.to_string(),
            "n": args.n,
            "seed": args.seed,
            "checkpoints": checkpoints,
        },
        "outer_iterations": result.report.outer_iterations,
        "total_pivots": result.report.total_pivots,
        "total_evals": result.report.total_evals,
        "time_s": result.report.time_s,
        "objective": result.report.objective,
        "oracle_value": result.oracle_value,
        "oracle_abs_diff": result.oracle_abs_diff,
        "tolerance": result.tolerance,
        "certified_optimal": result.report.certificate.is_optimal(),
    });
    write_json(Some(&report_path), &out)?;
    println!(
        "done in {} epochs, {:.1}s; |objective - oracle| = {:.3e} <= {:.3e}; wrote {}",
        result.report.outer_iterations,
        result.report.time_s,
        result.oracle_abs_diff,
        result.tolerance,
        report_path.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args).map(|()| 0),
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Certify(args) => cmd_certify(args),
        Cmd::Bench { which } => match which {
            BenchCmd::Grid(args) => cmd_bench_grid(args).map(|()| 0),
            BenchCmd::Compare(args) => cmd_bench_compare(args).map(|()| 0),
            BenchCmd::Gap(args) => cmd_bench_gap(args).map(|()| 0),
            BenchCmd::Large(args) => cmd_bench_large(args).map(|()| 0),
        },
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
