//! Block-coordinate outer loops around the restricted network simplex:
//! random selection (RS-BCDNS) and grouped selection (GS-BCDNS), both with
//! basis-variable succession across subproblems.

use std::collections::HashSet;
use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{OtError, Result};
use crate::generate::{streams, substream};
use crate::instance::{ArcIx, OTInstance, TransportPlan};
use crate::report::{Certificate, OuterIteration, OuterReport};
use crate::simplex::{
    northwest_corner, solve_restricted, PricingRule, SimplexState, SolveOptions,
};

/// Parameters of the block construction.
#[derive(Debug, Clone, Serialize)]
pub struct BlockConfig {
    /// Working-set fraction: blocks have ceil(s*N) arcs.
    pub s: f64,
    /// Screening fraction (GS only); must satisfy s < t.
    pub t: f64,
    /// Fraction of t*N screened from the low-likelihood group per
    /// iteration (exploration slice).
    pub exploration_fraction: f64,
    /// Regrading threshold e_k (constant schedule, scaled integers).
    pub threshold: i64,
    /// Max RS resampling attempts before injecting the known most-negative
    /// arc.
    pub resample_cap: u32,
    /// Absolute block size overriding ceil(s*N) when set.
    pub block_size_override: Option<usize>,
    pub seed: u64,
    pub pricing: PricingRule,
    pub degenerate_switch: u32,
    pub pivot_cap: Option<u64>,
}

impl BlockConfig {
    /// The benchmark defaults s = 2/n, t = 20/n, clamped so that
    /// 0 < s < t <= 1 still holds for small n.
    pub fn default_for(n: usize, seed: u64) -> Self {
        let t = (20.0 / n as f64).min(1.0);
        BlockConfig {
            s: (2.0 / n as f64).min(t / 2.0),
            t,
            exploration_fraction: 0.1,
            threshold: 0,
            resample_cap: 32,
            block_size_override: None,
            seed,
            pricing: PricingRule::MostNegative,
            degenerate_switch: 50,
            pivot_cap: None,
        }
    }

    pub fn validate_gs(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < self.t && self.t <= 1.0) {
            return Err(OtError::InvalidConfig(format!(
                "need 0 < s < t <= 1, got s={}, t={}",
                self.s, self.t
            )));
        }
        Ok(())
    }

    pub fn validate_rs(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(OtError::InvalidConfig(format!("need 0 < s < 1, got s={}", self.s)));
        }
        Ok(())
    }

    fn block_size(&self, num_arcs: usize) -> usize {
        self.block_size_override
            .unwrap_or((self.s * num_arcs as f64).ceil() as usize)
            .max(1)
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            pricing: self.pricing,
            degenerate_switch: self.degenerate_switch,
            collect_trace: false,
            pivot_cap: self.pivot_cap,
        }
    }
}

/// The grouped-selection partition of the nonbasic arcs: `r` holds arcs
/// deemed likely to enter an optimal basis, `s` the rest.
#[derive(Debug, Clone, Default)]
pub struct GroupState {
    pub r: VecDeque<ArcIx>,
    pub s: VecDeque<ArcIx>,
}

/// Subset of `candidates` with negative reduced cost; prices every
/// candidate (counted).
pub fn negative_set(
    state: &mut SimplexState,
    inst: &OTInstance,
    candidates: &[ArcIx],
) -> Vec<ArcIx> {
    candidates
        .iter()
        .copied()
        .filter(|&l| state.reduced_cost(inst, l) < 0)
        .collect()
}

/// One full O(N) pricing pass; the returned certificate carries the minimum
/// reduced cost and an arc attaining it.
pub fn certify_optimal(state: &mut SimplexState, inst: &OTInstance) -> Certificate {
    let mut min_r = i64::MAX;
    let mut arc = None;
    for l in 0..inst.num_arcs() as ArcIx {
        let r = state.reduced_cost(inst, l);
        if r < min_r {
            min_r = r;
            arc = Some(l);
        }
    }
    Certificate { min_reduced_cost: min_r, arc }
}

fn working_set(state: &SimplexState, block: &[ArcIx]) -> Vec<ArcIx> {
    let mut ws = state.basis.arcs();
    ws.extend_from_slice(block);
    ws.sort_unstable();
    ws.dedup();
    ws
}

/// RS-BCDNS: full termination scan each outer iteration, then a uniformly
/// sampled block that must contain a negative-reduced-cost arc. After the
/// resample cap, the most-negative arc from the termination scan is
/// injected so progress is guaranteed without breaking the descent rule.
pub fn rs_bcdns(inst: &OTInstance, config: &BlockConfig) -> Result<(TransportPlan, OuterReport)> {
    config.validate_rs()?;
    let start = Instant::now();
    let mut rng = substream(config.seed, streams::BLOCK_SELECTION);
    let mut state = northwest_corner(inst)?;
    let num_arcs = inst.num_arcs();
    let nonbasic = num_arcs - (inst.num_nodes() - 1);
    let opts = config.solve_options();
    let mut iterations = Vec::new();
    let mut last_objective = state.objective_scaled;
    let certificate;
    let mut k = 0u64;
    loop {
        let evals_before = state.counters.evals;
        let pivots_before = state.counters.pivots;

        // Termination scan over all N arcs.
        let cert = certify_optimal(&mut state, inst);
        if cert.is_optimal() {
            certificate = cert;
            break;
        }
        let most_negative = cert.arc.expect("non-optimal scan yields an arc");

        let block_size = config.block_size(num_arcs).min(nonbasic);
        let mut block = Vec::new();
        let mut found = false;
        for _ in 0..config.resample_cap {
            block = sample_nonbasic(&mut rng, &state, num_arcs, block_size);
            let negatives = negative_set(&mut state, inst, &block);
            if !negatives.is_empty() {
                found = true;
                break;
            }
        }
        if !found {
            // Keep the last sample but force the descent rule to hold.
            if !block.contains(&most_negative) {
                block[0] = most_negative;
            }
        }

        let ws = working_set(&state, &block);
        solve_restricted(inst, &mut state, &ws, &opts)?;
        debug_assert!(state.objective_scaled <= last_objective);
        last_objective = state.objective_scaled;
        iterations.push(OuterIteration {
            k,
            working_set_size: ws.len(),
            pivots: state.counters.pivots - pivots_before,
            evals: state.counters.evals - evals_before,
            objective_scaled: state.objective_scaled,
            time_s: start.elapsed().as_secs_f64(),
        });
        k += 1;
    }
    let report = OuterReport {
        method: "rs-bcdns".into(),
        objective_scaled: state.objective_scaled,
        objective: inst.descale_objective(state.objective_scaled),
        outer_iterations: k,
        total_pivots: state.counters.pivots,
        total_evals: state.counters.evals,
        time_s: start.elapsed().as_secs_f64(),
        certificate,
        iterations,
    };
    Ok((state.plan, report))
}

fn sample_nonbasic(
    rng: &mut impl Rng,
    state: &SimplexState,
    num_arcs: usize,
    size: usize,
) -> Vec<ArcIx> {
    let mut chosen: HashSet<ArcIx> = HashSet::with_capacity(size);
    while chosen.len() < size {
        let l = rng.gen_range(0..num_arcs) as ArcIx;
        if !state.basis.contains(l) {
            chosen.insert(l);
        }
    }
    let mut block: Vec<ArcIx> = chosen.into_iter().collect();
    block.sort_unstable();
    block
}

/// Outcome of one grouped screening round.
#[derive(Debug)]
pub enum BlockSelection {
    /// The selected block; contains at least one negative-reduced-cost arc.
    Block(Vec<ArcIx>),
    /// The likely group is exhausted; a full optimality scan is due.
    NeedFullScan,
}

/// Grouped screening: price a prefix of the likely group plus an
/// exploration slice of the unlikely group, keep the smallest reduced
/// costs. Screened-but-nonnegative arcs are demoted and screening repeats
/// until a negative arc is found or the likely group runs dry.
pub fn gs_select_block(
    groups: &mut GroupState,
    state: &mut SimplexState,
    inst: &OTInstance,
    config: &BlockConfig,
) -> BlockSelection {
    let num_arcs = inst.num_arcs();
    let screen_budget = ((config.t * num_arcs as f64).ceil() as usize).max(1);
    let explore_budget =
        (config.exploration_fraction * config.t * num_arcs as f64).floor() as usize;
    loop {
        if groups.r.is_empty() {
            return BlockSelection::NeedFullScan;
        }
        let k_r = groups.r.len().min(screen_budget);
        let k_s = groups.s.len().min(explore_budget);
        let mut screened: Vec<ArcIx> = Vec::with_capacity(k_r + k_s);
        for _ in 0..k_r {
            screened.push(groups.r.pop_front().expect("sized above"));
        }
        for _ in 0..k_s {
            screened.push(groups.s.pop_front().expect("sized above"));
        }
        // Stale entries can appear only through bugs in the regrading
        // bookkeeping; drop them rather than pivoting on a basic arc.
        screened.retain(|&l| !state.basis.contains(l));

        let mut priced: Vec<(i64, ArcIx)> = screened
            .iter()
            .map(|&l| (state.reduced_cost(inst, l), l))
            .collect();
        priced.sort_unstable();

        if priced.first().map_or(true, |&(r, _)| r >= 0) {
            // Nothing useful in this round: demote everything and rescreen.
            groups.s.extend(priced.iter().map(|&(_, l)| l));
            continue;
        }
        let block_size = config.block_size(num_arcs).min(priced.len());
        let block: Vec<ArcIx> = priced[..block_size].iter().map(|&(_, l)| l).collect();
        for &(_, l) in &priced[block_size..] {
            groups.s.push_back(l);
        }
        return BlockSelection::Block(block);
    }
}

/// GS-BCDNS with an optional per-iteration hook (used for checkpointing
/// large runs).
pub fn gs_bcdns_with_hook(
    inst: &OTInstance,
    config: &BlockConfig,
    mut hook: Option<&mut dyn FnMut(u64, &SimplexState)>,
) -> Result<(TransportPlan, OuterReport)> {
    config.validate_gs()?;
    let start = Instant::now();
    let mut state = northwest_corner(inst)?;
    let opts = config.solve_options();

    let mut groups = GroupState::default();
    groups.r = (0..inst.num_arcs() as ArcIx)
        .filter(|&l| !state.basis.contains(l))
        .collect();
    {
        let mut rng = substream(config.seed, streams::BLOCK_SELECTION);
        groups.r.make_contiguous().shuffle(&mut rng);
    }

    let mut iterations = Vec::new();
    let mut last_objective = state.objective_scaled;
    let mut k = 0u64;
    let certificate = loop {
        match gs_select_block(&mut groups, &mut state, inst, config) {
            BlockSelection::NeedFullScan => {
                let cert = certify_optimal(&mut state, inst);
                if cert.is_optimal() {
                    break cert;
                }
                // Rebuild the partition from the full scan: negative arcs
                // are likely, the remaining nonbasic arcs are not.
                groups.r.clear();
                groups.s.clear();
                for l in 0..inst.num_arcs() as ArcIx {
                    if state.basis.contains(l) {
                        continue;
                    }
                    let (i, j) = inst.arc_endpoints(l);
                    let r = inst.scaled_cost(l)
                        - (state.potentials.pi[i] - state.potentials.pi[inst.n() + j]);
                    if r < 0 {
                        groups.r.push_back(l);
                    } else {
                        groups.s.push_back(l);
                    }
                }
            }
            BlockSelection::Block(block) => {
                debug_assert!(!block.is_empty());
                let evals_before = state.counters.evals;
                let pivots_before = state.counters.pivots;
                let ws = working_set(&state, &block);
                let out = solve_restricted(inst, &mut state, &ws, &opts)?;
                debug_assert!(state.objective_scaled <= last_objective);
                last_objective = state.objective_scaled;

                // Regrade the working set's nonbasic arcs using the final
                // certifying scan (already paid for): below-threshold ones
                // return to the likely group, the rest are demoted.
                for &(l, r) in &out.final_reduced {
                    if state.basis.contains(l) {
                        continue;
                    }
                    if r < config.threshold {
                        groups.r.push_back(l);
                    } else {
                        groups.s.push_back(l);
                    }
                }
                iterations.push(OuterIteration {
                    k,
                    working_set_size: ws.len(),
                    pivots: state.counters.pivots - pivots_before,
                    evals: state.counters.evals - evals_before,
                    objective_scaled: state.objective_scaled,
                    time_s: start.elapsed().as_secs_f64(),
                });
                k += 1;
                if let Some(h) = hook.as_deref_mut() {
                    h(k, &state);
                }
            }
        }
    };
    let report = OuterReport {
        method: "gs-bcdns".into(),
        objective_scaled: state.objective_scaled,
        objective: inst.descale_objective(state.objective_scaled),
        outer_iterations: k,
        total_pivots: state.counters.pivots,
        total_evals: state.counters.evals,
        time_s: start.elapsed().as_secs_f64(),
        certificate,
        iterations,
    };
    Ok((state.plan, report))
}

pub fn gs_bcdns(inst: &OTInstance, config: &BlockConfig) -> Result<(TransportPlan, OuterReport)> {
    gs_bcdns_with_hook(inst, config, None)
}
