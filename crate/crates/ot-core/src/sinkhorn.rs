//! Log-domain Sinkhorn baseline with Altschuler-style rounding back to the
//! transport polytope.
//!
//! The iteration runs on the quantized costs (scaled integers divided by the
//! scale) rather than the raw float costs. Any plan that is exactly feasible
//! then has a quantized objective no smaller than the simplex optimum, so
//! the reported gaps are nonnegative by weak duality with no tolerance
//! fudging. Final plans are rounded in exact rational arithmetic; the f64
//! rounding path is kept for cheap trace points.

use std::time::Instant;

use num::rational::BigRational;
use num::{BigInt, FromPrimitive, Signed, Zero};
use serde::Serialize;

use crate::error::{OtError, Result};
use crate::instance::OTInstance;

/// Entropic regularization gamma = epsilon / (4 ln n).
pub fn gamma_from_eps(epsilon: f64, n: usize) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(OtError::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if n < 2 {
        return Err(OtError::InvalidConfig(
            "gamma schedule needs n >= 2 (ln n must be positive)".into(),
        ));
    }
    Ok(epsilon / (4.0 * (n as f64).ln()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub gamma: f64,
    /// Convergence threshold on the max change of the log-scaling
    /// variables (potentials divided by gamma) per sweep.
    pub delta: f64,
    pub max_time_s: f64,
    pub max_iters: u64,
    /// Trace (and objective-based stopping) every this many sweeps.
    pub trace_stride: u64,
    /// Optional early stop when the rounded objective moves less than this
    /// between consecutive trace points.
    pub objective_stop_tol: Option<f64>,
    pub threads: usize,
}

impl SinkhornConfig {
    pub fn for_instance(epsilon: f64, n: usize) -> Result<Self> {
        Ok(SinkhornConfig {
            epsilon,
            gamma: gamma_from_eps(epsilon, n)?,
            delta: 1e-6,
            max_time_s: 2000.0,
            max_iters: u64::MAX,
            trace_stride: 10,
            objective_stop_tol: None,
            threads: 1,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinkhornTracePoint {
    pub iter: u64,
    pub time_s: f64,
    pub objective_rounded: f64,
    pub du_max: f64,
    pub dv_max: f64,
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// Source dual potentials (nats scaled by gamma).
    pub f: Vec<f64>,
    /// Target dual potentials.
    pub g: Vec<f64>,
    pub iterations: u64,
    pub converged: bool,
    pub time_s: f64,
    pub trace: Vec<SinkhornTracePoint>,
}

/// Writes the trace CSV: iter, time_s, objective_rounded, du_max, dv_max.
pub fn write_trace_csv<W: std::io::Write>(trace: &[SinkhornTracePoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iter", "time_s", "objective_rounded", "du_max", "dv_max"])?;
    for t in trace {
        wtr.write_record([
            t.iter.to_string(),
            format!("{:.6}", t.time_s),
            format!("{:.12}", t.objective_rounded),
            format!("{:.3e}", t.du_max),
            format!("{:.3e}", t.dv_max),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn lse(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Runs closure over index chunks, optionally on `threads` OS threads. Each
/// index is written by exactly one worker, so results are identical for any
/// thread count.
fn for_each_index(out: &mut [f64], threads: usize, body: impl Fn(usize) -> f64 + Sync) {
    if threads <= 1 || out.len() < 2 * threads {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = body(i);
        }
        return;
    }
    let chunk = out.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, slice) in out.chunks_mut(chunk).enumerate() {
            let body = &body;
            scope.spawn(move || {
                for (off, slot) in slice.iter_mut().enumerate() {
                    *slot = body(c * chunk + off);
                }
            });
        }
    });
}

/// Alternating log-domain scaling on the quantized costs.
pub fn sinkhorn_solve(inst: &OTInstance, config: &SinkhornConfig) -> Result<SinkhornResult> {
    if config.gamma <= 0.0 {
        return Err(OtError::InvalidConfig("gamma must be positive".into()));
    }
    let (n, m) = (inst.n(), inst.m());
    let gamma = config.gamma;
    let log_p: Vec<f64> = (0..n).map(|i| inst.supply(i).ln()).collect();
    let log_q: Vec<f64> = (0..m).map(|j| inst.demand(j).ln()).collect();

    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut f_new = vec![0.0f64; n];
    let mut g_new = vec![0.0f64; m];
    let start = Instant::now();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iter = 0u64;
    let mut last_traced_objective: Option<f64> = None;
    while iter < config.max_iters {
        iter += 1;
        {
            let g_ref = &g;
            for_each_index(&mut f_new, config.threads, |i| {
                gamma
                    * (log_p[i]
                        - lse((0..m).map(|j| (g_ref[j] - inst.quantized_cost(i, j)) / gamma)))
            });
        }
        let du_max =
            f.iter().zip(&f_new).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) / gamma;
        std::mem::swap(&mut f, &mut f_new);
        {
            let f_ref = &f;
            for_each_index(&mut g_new, config.threads, |j| {
                gamma
                    * (log_q[j]
                        - lse((0..n).map(|i| (f_ref[i] - inst.quantized_cost(i, j)) / gamma)))
            });
        }
        let dv_max =
            g.iter().zip(&g_new).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) / gamma;
        std::mem::swap(&mut g, &mut g_new);

        let elapsed = start.elapsed().as_secs_f64();
        let at_stride = iter % config.trace_stride == 0;
        let potentials_settled = du_max < config.delta && dv_max < config.delta;
        if at_stride || potentials_settled {
            let rounded = round_to_feasible(&plan_from_potentials(inst, &f, &g, gamma), inst);
            let objective_rounded = rounded.objective_quantized(inst);
            trace.push(SinkhornTracePoint {
                iter,
                time_s: elapsed,
                objective_rounded,
                du_max,
                dv_max,
            });
            if potentials_settled {
                converged = true;
                break;
            }
            if let (Some(tol), Some(prev)) = (config.objective_stop_tol, last_traced_objective) {
                if (objective_rounded - prev).abs() < tol {
                    converged = true;
                    break;
                }
            }
            last_traced_objective = Some(objective_rounded);
        }
        if elapsed > config.max_time_s {
            break;
        }
    }
    Ok(SinkhornResult {
        f,
        g,
        iterations: iter,
        converged,
        time_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Dense real-valued plan (row-major), the natural output of entropic
/// scaling before rounding.
#[derive(Debug, Clone)]
pub struct DensePlan {
    pub n: usize,
    pub m: usize,
    pub x: Vec<f64>,
}

impl DensePlan {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.m + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.m..(i + 1) * self.m].iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                sums[j] += self.at(i, j);
            }
        }
        sums
    }

    /// Objective against the quantized costs (the costs the gap analysis is
    /// defined on).
    pub fn objective_quantized(&self, inst: &OTInstance) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.m {
                total += self.at(i, j) * inst.quantized_cost(i, j);
            }
        }
        total
    }
}

/// x_ij = exp((f_i + g_j - c_ij) / gamma) on the quantized costs.
pub fn plan_from_potentials(inst: &OTInstance, f: &[f64], g: &[f64], gamma: f64) -> DensePlan {
    let (n, m) = (inst.n(), inst.m());
    let mut x = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            x[i * m + j] = ((f[i] + g[j] - inst.quantized_cost(i, j)) / gamma).exp();
        }
    }
    DensePlan { n, m, x }
}

/// Float rounding onto the transport polytope: shrink rows to at most p,
/// then columns to at most q, then patch the deficit with the rank-one
/// outer product of the marginal errors.
pub fn round_to_feasible(plan: &DensePlan, inst: &OTInstance) -> DensePlan {
    let (n, m) = (plan.n, plan.m);
    let mut x = plan.x.clone();
    let rows = DensePlan { n, m, x: x.clone() }.row_sums();
    for i in 0..n {
        let scale = if rows[i] > inst.supply(i) { inst.supply(i) / rows[i] } else { 1.0 };
        for j in 0..m {
            x[i * m + j] *= scale;
        }
    }
    let cols = DensePlan { n, m, x: x.clone() }.col_sums();
    for j in 0..m {
        let scale = if cols[j] > inst.demand(j) { inst.demand(j) / cols[j] } else { 1.0 };
        for i in 0..n {
            x[i * m + j] *= scale;
        }
    }
    let current = DensePlan { n, m, x };
    let err_p: Vec<f64> =
        current.row_sums().iter().enumerate().map(|(i, r)| inst.supply(i) - r).collect();
    let err_q: Vec<f64> =
        current.col_sums().iter().enumerate().map(|(j, c)| inst.demand(j) - c).collect();
    let total: f64 = err_p.iter().sum();
    let mut x = current.x;
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                x[i * m + j] += err_p[i] * err_q[j] / total;
            }
        }
    }
    DensePlan { n, m, x }
}

/// Dense plan with exact rational entries; used where feasibility must hold
/// with zero tolerance.
#[derive(Debug, Clone)]
pub struct RationalPlan {
    pub n: usize,
    pub m: usize,
    pub x: Vec<BigRational>,
}

impl RationalPlan {
    pub fn at(&self, i: usize, j: usize) -> &BigRational {
        &self.x[i * self.m + j]
    }

    fn row_sums(&self) -> Vec<BigRational> {
        (0..self.n)
            .map(|i| self.x[i * self.m..(i + 1) * self.m].iter().sum())
            .collect()
    }

    fn col_sums(&self) -> Vec<BigRational> {
        let mut sums = vec![BigRational::zero(); self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                sums[j] += self.at(i, j);
            }
        }
        sums
    }

    /// Exact feasibility: every row sum equals p_i and every column sum
    /// equals q_j as rational numbers, all entries nonnegative.
    pub fn is_exactly_feasible(&self, inst: &OTInstance) -> bool {
        if self.x.iter().any(|v| v.is_negative()) {
            return false;
        }
        let denom = BigInt::from(inst.mass_denom());
        let rows_ok = self
            .row_sums()
            .iter()
            .zip(inst.supply_units())
            .all(|(r, &u)| *r == BigRational::new(BigInt::from(u), denom.clone()));
        let cols_ok = self
            .col_sums()
            .iter()
            .zip(inst.demand_units())
            .all(|(c, &u)| *c == BigRational::new(BigInt::from(u), denom.clone()));
        rows_ok && cols_ok
    }

    /// Exact objective against the quantized costs scaled_ij / scale.
    pub fn objective_quantized(&self, inst: &OTInstance) -> BigRational {
        let scale = BigInt::from(inst.scale());
        let mut total = BigRational::zero();
        for i in 0..self.n {
            for j in 0..self.m {
                let c = BigRational::new(
                    BigInt::from(inst.scaled_cost(inst.arc(i, j))),
                    scale.clone(),
                );
                total += self.at(i, j) * c;
            }
        }
        total
    }

    /// Exact gap above a known scaled optimum; nonnegative for any exactly
    /// feasible plan by weak duality.
    pub fn gap_above(&self, inst: &OTInstance, optimum_scaled: i128) -> BigRational {
        let opt = BigRational::new(
            BigInt::from(optimum_scaled),
            BigInt::from(inst.scale()) * BigInt::from(inst.mass_denom()),
        );
        self.objective_quantized(inst) - opt
    }
}

/// The same rounding as `round_to_feasible` carried out in exact rational
/// arithmetic, so the result lies exactly on the transport polytope.
pub fn round_to_feasible_exact(plan: &DensePlan, inst: &OTInstance) -> Result<RationalPlan> {
    let (n, m) = (plan.n, plan.m);
    let mut x: Vec<BigRational> = plan
        .x
        .iter()
        .map(|&v| {
            BigRational::from_f64(v.max(0.0))
                .ok_or_else(|| OtError::InvalidInput(format!("non-finite plan entry {v}")))
        })
        .collect::<Result<_>>()?;
    let denom = BigInt::from(inst.mass_denom());
    let p: Vec<BigRational> = inst
        .supply_units()
        .iter()
        .map(|&u| BigRational::new(BigInt::from(u), denom.clone()))
        .collect();
    let q: Vec<BigRational> = inst
        .demand_units()
        .iter()
        .map(|&u| BigRational::new(BigInt::from(u), denom.clone()))
        .collect();

    for i in 0..n {
        let row: BigRational = x[i * m..(i + 1) * m].iter().sum();
        if row > p[i] {
            let scale = &p[i] / &row;
            for j in 0..m {
                x[i * m + j] *= &scale;
            }
        }
    }
    for j in 0..m {
        let col: BigRational = (0..n).map(|i| x[i * m + j].clone()).sum();
        if col > q[j] {
            let scale = &q[j] / &col;
            for i in 0..n {
                x[i * m + j] *= &scale;
            }
        }
    }
    let current = RationalPlan { n, m, x };
    let err_p: Vec<BigRational> =
        current.row_sums().iter().zip(&p).map(|(r, pi)| pi - r).collect();
    let err_q: Vec<BigRational> =
        current.col_sums().iter().zip(&q).map(|(c, qj)| qj - c).collect();
    let total: BigRational = err_p.iter().sum();
    let mut x = current.x;
    if !total.is_zero() {
        for i in 0..n {
            if err_p[i].is_zero() {
                continue;
            }
            for j in 0..m {
                x[i * m + j] += &err_p[i] * &err_q[j] / &total;
            }
        }
    }
    Ok(RationalPlan { n, m, x })
}

/// Exactly feasible plan on the refined integer grid: entry (i,j) carries
/// `units[i*m+j] / (mass_denom * refinement)` mass. Unlike [`RationalPlan`]
/// this stays in machine integers, so it scales to the benchmark sizes.
#[derive(Debug, Clone)]
pub struct QuantizedPlan {
    pub n: usize,
    pub m: usize,
    pub refinement: u64,
    pub units: Vec<u64>,
}

impl QuantizedPlan {
    pub fn is_exactly_feasible(&self, inst: &OTInstance) -> bool {
        let r = self.refinement as u128;
        let rows_ok = (0..self.n).all(|i| {
            let sum: u128 =
                self.units[i * self.m..(i + 1) * self.m].iter().map(|&u| u as u128).sum();
            sum == inst.supply_units()[i] as u128 * r
        });
        let cols_ok = (0..self.m).all(|j| {
            let sum: u128 = (0..self.n).map(|i| self.units[i * self.m + j] as u128).sum();
            sum == inst.demand_units()[j] as u128 * r
        });
        rows_ok && cols_ok
    }

    /// Scaled objective on the refined grid: sum units * scaled_cost. The
    /// descaled value is this over scale * mass_denom * refinement.
    pub fn objective_scaled_refined(&self, inst: &OTInstance) -> i128 {
        let mut total: i128 = 0;
        for i in 0..self.n {
            for j in 0..self.m {
                total += self.units[i * self.m + j] as i128
                    * inst.scaled_cost(inst.arc(i, j)) as i128;
            }
        }
        total
    }

    /// Exact gap numerator over the common denominator
    /// scale * mass_denom * refinement; nonnegative iff the plan's exact
    /// objective is at least the scaled optimum.
    pub fn gap_numerator(&self, inst: &OTInstance, optimum_scaled: i128) -> i128 {
        self.objective_scaled_refined(inst) - optimum_scaled * self.refinement as i128
    }

    pub fn gap_above_f64(&self, inst: &OTInstance, optimum_scaled: i128) -> f64 {
        self.gap_numerator(inst, optimum_scaled) as f64
            / (inst.scale() as f64 * inst.mass_denom() as f64 * self.refinement as f64)
    }
}

pub const DEFAULT_REFINEMENT: u64 = 1 << 32;

/// Snaps an approximately feasible plan onto the refined integer grid and
/// repairs the marginals exactly: floor-quantize, trim any row/column
/// overshoot, then transport the remaining deficits northwest-corner style.
/// The perturbation per entry is O(1/refinement), so gaps move by at most
/// nm * max_cost / refinement.
pub fn quantize_to_feasible(
    plan: &DensePlan,
    inst: &OTInstance,
    refinement: u64,
) -> Result<QuantizedPlan> {
    let (n, m) = (plan.n, plan.m);
    let md = inst.mass_denom() as u128;
    let r = refinement as u128;
    let grid = md * r;
    // Guard: total units * max scaled cost must fit i128 comfortably.
    if grid > 1 << 60 {
        return Err(OtError::InvalidConfig(format!(
            "mass_denom * refinement = {grid} is too fine for exact integer arithmetic"
        )));
    }
    let mut units: Vec<u64> = Vec::with_capacity(n * m);
    for &x in &plan.x {
        if !x.is_finite() {
            return Err(OtError::InvalidInput(format!("non-finite plan entry {x}")));
        }
        let y = (x.max(0.0) * grid as f64).floor();
        units.push(if y >= grid as f64 { grid as u64 } else { y as u64 });
    }

    let row_target: Vec<u128> =
        inst.supply_units().iter().map(|&u| u as u128 * r).collect();
    let col_target: Vec<u128> =
        inst.demand_units().iter().map(|&u| u as u128 * r).collect();

    // Trim row overshoot (possible because the f64 input is only
    // approximately feasible).
    for i in 0..n {
        let mut sum: u128 = units[i * m..(i + 1) * m].iter().map(|&u| u as u128).sum();
        let mut j = 0;
        while sum > row_target[i] {
            let cut = ((sum - row_target[i]).min(units[i * m + j] as u128)) as u64;
            units[i * m + j] -= cut;
            sum -= cut as u128;
            j += 1;
        }
    }
    // Trim column overshoot; only lowers row sums, so rows stay within
    // their targets.
    for j in 0..m {
        let mut sum: u128 = (0..n).map(|i| units[i * m + j] as u128).sum();
        let mut i = 0;
        while sum > col_target[j] {
            let cut = ((sum - col_target[j]).min(units[i * m + j] as u128)) as u64;
            units[i * m + j] -= cut;
            sum -= cut as u128;
            i += 1;
        }
    }

    // Deficits are now all nonnegative with equal totals; fill them with a
    // northwest-corner sweep.
    let mut row_deficit: Vec<u128> = (0..n)
        .map(|i| {
            row_target[i]
                - units[i * m..(i + 1) * m].iter().map(|&u| u as u128).sum::<u128>()
        })
        .collect();
    let mut col_deficit: Vec<u128> = (0..m)
        .map(|j| col_target[j] - (0..n).map(|i| units[i * m + j] as u128).sum::<u128>())
        .collect();
    debug_assert_eq!(row_deficit.iter().sum::<u128>(), col_deficit.iter().sum::<u128>());
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if row_deficit[i] == 0 {
            i += 1;
            continue;
        }
        if col_deficit[j] == 0 {
            j += 1;
            continue;
        }
        let add = row_deficit[i].min(col_deficit[j]);
        units[i * m + j] += add as u64;
        row_deficit[i] -= add;
        col_deficit[j] -= add;
    }
    Ok(QuantizedPlan { n, m, refinement, units })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_samples, PairSpec, SamplePair};
    use crate::instance::{make_instance, OTInstance};
    use crate::simplex::{northwest_corner, solve_full, SolveOptions};

    fn small_inst() -> OTInstance {
        let s = SamplePair::from_points_1d(vec![-0.5, 0.5], vec![-0.4, 0.6]);
        make_instance(&s, 1_000_000).unwrap()
    }

    #[test]
    fn gamma_schedule() {
        let g = gamma_from_eps(0.1, 200).unwrap();
        assert!((g - 0.1 / (4.0 * 200f64.ln())).abs() < 1e-15);
        assert!(gamma_from_eps(0.1, 1).is_err());
        assert!(gamma_from_eps(-1.0, 10).is_err());
    }

    #[test]
    fn constant_cost_converges_immediately() {
        // With a constant cost the scaling fixes both marginals in one
        // alternating sweep and the plan is the outer product p q^T.
        let inst =
            OTInstance::from_raw(vec![vec![3.0, 3.0], vec![3.0, 3.0]], &[0.5, 0.5], &[0.5, 0.5], 1)
                .unwrap();
        let config = SinkhornConfig::for_instance(0.5, 2).unwrap();
        let result = sinkhorn_solve(&inst, &config).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2);
        let plan = plan_from_potentials(&inst, &result.f, &result.g, config.gamma);
        for i in 0..2 {
            for j in 0..2 {
                assert!((plan.at(i, j) - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rounding_restores_marginals_f64() {
        let inst = small_inst();
        // Deliberately infeasible start.
        let plan = DensePlan { n: 2, m: 2, x: vec![0.9, 0.0, 0.0, 0.3] };
        let rounded = round_to_feasible(&plan, &inst);
        for (i, r) in rounded.row_sums().iter().enumerate() {
            assert!((r - inst.supply(i)).abs() < 1e-12);
        }
        for (j, c) in rounded.col_sums().iter().enumerate() {
            assert!((c - inst.demand(j)).abs() < 1e-12);
        }
        assert!(rounded.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn exact_rounding_is_exactly_feasible() {
        let inst = small_inst();
        let plan = DensePlan { n: 2, m: 2, x: vec![0.31, 0.07, 0.22, 0.55] };
        let rounded = round_to_feasible_exact(&plan, &inst).unwrap();
        assert!(rounded.is_exactly_feasible(&inst));
    }

    #[test]
    fn exact_gap_is_nonnegative_and_shrinks_with_epsilon() {
        let spec = PairSpec::uniform_normal(1).unwrap();
        let samples = generate_samples(&spec, 12, 7).unwrap();
        let inst = make_instance(&samples, 1_000_000).unwrap();
        let state = northwest_corner(&inst).unwrap();
        let (_, ns) = solve_full(&inst, state, &SolveOptions::default()).unwrap();

        let mut gaps = Vec::new();
        for eps in [1.0, 1e-2] {
            let mut config = SinkhornConfig::for_instance(eps, 12).unwrap();
            config.max_iters = 200_000;
            let result = sinkhorn_solve(&inst, &config).unwrap();
            let dense = plan_from_potentials(&inst, &result.f, &result.g, config.gamma);

            // The rational path is exact by construction.
            let rational = round_to_feasible_exact(&dense, &inst).unwrap();
            assert!(rational.is_exactly_feasible(&inst));
            let gap = rational.gap_above(&inst, ns.objective_scaled);
            assert!(!gap.is_negative(), "eps={eps}: gap {gap}");

            // The integer-grid path must agree up to its quantization step.
            let quantized =
                quantize_to_feasible(&round_to_feasible(&dense, &inst), &inst, DEFAULT_REFINEMENT)
                    .unwrap();
            assert!(quantized.is_exactly_feasible(&inst));
            let qgap = quantized.gap_above_f64(&inst, ns.objective_scaled);
            assert!(quantized.gap_numerator(&inst, ns.objective_scaled) >= 0);
            let rgap = num::ToPrimitive::to_f64(&gap).unwrap();
            assert!((qgap - rgap).abs() < 1e-6, "eps={eps}: {qgap} vs {rgap}");
            gaps.push(gap);
        }
        assert!(gaps[0] > gaps[1], "looser epsilon should round to a larger gap");
    }

    #[test]
    fn quantize_repairs_rough_plans_exactly() {
        let inst = small_inst();
        // Deliberately off-marginal floats.
        let plan = DensePlan { n: 2, m: 2, x: vec![0.49, 0.0100003, 0.0, 0.4999999] };
        let q = quantize_to_feasible(&plan, &inst, DEFAULT_REFINEMENT).unwrap();
        assert!(q.is_exactly_feasible(&inst));
        // Total mass on the refined grid is mass_denom * refinement units.
        let total: u128 = q.units.iter().map(|&u| u as u128).sum();
        assert_eq!(total, inst.mass_denom() as u128 * q.refinement as u128);
    }

    #[test]
    fn quantize_rejects_an_overly_fine_grid() {
        let inst = small_inst();
        let plan = DensePlan { n: 2, m: 2, x: vec![0.5, 0.0, 0.0, 0.5] };
        assert!(quantize_to_feasible(&plan, &inst, u64::MAX).is_err());
    }

    #[test]
    fn trace_is_recorded_at_stride() {
        let inst = small_inst();
        let mut config = SinkhornConfig::for_instance(0.05, 2).unwrap();
        config.trace_stride = 5;
        config.max_iters = 40;
        config.delta = 0.0; // force the full iteration budget
        let result = sinkhorn_solve(&inst, &config).unwrap();
        assert_eq!(result.trace.len(), 8);
        assert!(result.trace.iter().all(|t| t.iter % 5 == 0));
        let mut buf = Vec::new();
        write_trace_csv(&result.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,time_s,objective_rounded,du_max,dv_max\n"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn threaded_updates_match_single_threaded() {
        let spec = PairSpec::normal_mixture(1).unwrap();
        let samples = generate_samples(&spec, 9, 11).unwrap();
        let inst = make_instance(&samples, 1_000_000).unwrap();
        let mut base = SinkhornConfig::for_instance(0.2, 9).unwrap();
        base.max_iters = 50;
        base.delta = 0.0;
        let single = sinkhorn_solve(&inst, &base).unwrap();
        base.threads = 3;
        let multi = sinkhorn_solve(&inst, &base).unwrap();
        assert_eq!(single.f, multi.f);
        assert_eq!(single.g, multi.g);
    }
}
