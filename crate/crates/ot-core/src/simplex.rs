//! Network simplex over the complete bipartite OT graph.
//!
//! Nodes `0..n` are supplies, `n..n+m` demands; arcs are oriented
//! supply -> demand and indexed row-major. The basis is a spanning tree
//! with parent/depth/children indices so that potentials, fundamental
//! cycles and pivots all cost O(tree) rather than O(N).

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::instance::{ArcIx, OTInstance, TransportPlan};
use crate::report::{Certificate, SolveReport, TracePoint};

const NO_ARC: ArcIx = ArcIx::MAX;

/// Pivot and reduced-cost-evaluation counters. Every reduced-cost pricing
/// goes through [`reduced_cost`], which is the sole counted entry point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub pivots: u64,
    pub evals: u64,
}

/// Node potentials in scaled-integer units; the root potential is fixed to 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPotentials {
    pub pi: Vec<i64>,
}

/// Reduced cost `r_ij = c_ij - (pi_i - pi_{n+j})` in scaled integers.
/// Increments the evaluation counter by one.
pub fn reduced_cost(
    inst: &OTInstance,
    pots: &DualPotentials,
    l: ArcIx,
    counters: &mut Counters,
) -> i64 {
    counters.evals += 1;
    let (i, j) = inst.arc_endpoints(l);
    inst.scaled_cost(l) - (pots.pi[i] - pots.pi[inst.n() + j])
}

/// The M-1 basic arcs as a rooted spanning tree with traversal indices.
#[derive(Debug, Clone)]
pub struct SpanningTreeBasis {
    root: usize,
    in_basis: Vec<bool>,
    parent: Vec<usize>,
    parent_arc: Vec<ArcIx>,
    depth: Vec<u32>,
    children: Vec<Vec<usize>>,
}

impl SpanningTreeBasis {
    /// Builds the rooted tree (root = node 0, the first supply node) from an
    /// arc set, verifying that it spans all M nodes with exactly M-1 arcs.
    pub fn from_arcs(inst: &OTInstance, arcs: &[ArcIx]) -> Result<Self> {
        let n = inst.n();
        let nodes = inst.num_nodes();
        if arcs.len() != nodes - 1 {
            return Err(OtError::InvalidBasis(format!(
                "basis must have {} arcs, got {}",
                nodes - 1,
                arcs.len()
            )));
        }
        let mut adjacency: Vec<Vec<(usize, ArcIx)>> = vec![Vec::new(); nodes];
        let mut in_basis = vec![false; inst.num_arcs()];
        for &l in arcs {
            if in_basis[l as usize] {
                return Err(OtError::InvalidBasis(format!("duplicate basic arc {l}")));
            }
            in_basis[l as usize] = true;
            let (i, j) = inst.arc_endpoints(l);
            adjacency[i].push((n + j, l));
            adjacency[n + j].push((i, l));
        }
        let root = 0;
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_arc = vec![NO_ARC; nodes];
        let mut depth = vec![0u32; nodes];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        let mut stack = vec![root];
        parent[root] = root;
        let mut visited = 1;
        while let Some(x) = stack.pop() {
            for &(y, l) in &adjacency[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    parent_arc[y] = l;
                    depth[y] = depth[x] + 1;
                    children[x].push(y);
                    visited += 1;
                    stack.push(y);
                }
            }
        }
        if visited != nodes {
            return Err(OtError::InvalidBasis(format!(
                "basic arcs do not span the graph ({visited} of {nodes} nodes reached)"
            )));
        }
        Ok(SpanningTreeBasis { root, in_basis, parent, parent_arc, depth, children })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn contains(&self, l: ArcIx) -> bool {
        self.in_basis[l as usize]
    }

    /// Basic arcs, sorted by arc index.
    pub fn arcs(&self) -> Vec<ArcIx> {
        let mut arcs: Vec<ArcIx> =
            self.parent_arc.iter().copied().filter(|&l| l != NO_ARC).collect();
        arcs.sort_unstable();
        arcs
    }

    pub fn len(&self) -> usize {
        self.parent_arc.iter().filter(|&&l| l != NO_ARC).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Solves the dual optimality equations by one tree traversal from the
/// root: zero reduced cost on every basic arc, `pi_root = 0`.
pub fn compute_potentials(basis: &SpanningTreeBasis, inst: &OTInstance) -> Result<DualPotentials> {
    let n = inst.n();
    let nodes = inst.num_nodes();
    let mut pi = vec![0i64; nodes];
    let mut stack = vec![basis.root];
    while let Some(x) = stack.pop() {
        for &c in &basis.children[x] {
            let l = basis.parent_arc[c];
            pi[c] = if c >= n {
                // c is the demand endpoint: pi_{n+j} = pi_i - c_ij
                pi[x] - inst.scaled_cost(l)
            } else {
                pi[x] + inst.scaled_cost(l)
            };
            stack.push(c);
        }
    }
    Ok(DualPotentials { pi })
}

/// Entering-arc selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PricingRule {
    /// Lowest-index arc with negative reduced cost (anti-cycling).
    Bland,
    /// Most negative reduced cost, with an automatic switch to Bland after
    /// a configurable streak of degenerate pivots.
    MostNegative,
}

impl std::fmt::Display for PricingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PricingRule::Bland => f.write_str("bland"),
            PricingRule::MostNegative => f.write_str("most-negative"),
        }
    }
}

impl FromStr for PricingRule {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bland" => Ok(PricingRule::Bland),
            "most-negative" => Ok(PricingRule::MostNegative),
            other => Err(OtError::InvalidConfig(format!("unknown pricing rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub pricing: PricingRule,
    /// Consecutive degenerate pivots before falling back to Bland.
    pub degenerate_switch: u32,
    pub collect_trace: bool,
    pub pivot_cap: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            pricing: PricingRule::MostNegative,
            degenerate_switch: 50,
            collect_trace: false,
            pivot_cap: None,
        }
    }
}

/// Basis, basic flows, potentials and counters: everything one simplex run
/// mutates. Single-owner; instances stay immutable and shareable.
#[derive(Debug, Clone)]
pub struct SimplexState {
    pub plan: TransportPlan,
    pub basis: SpanningTreeBasis,
    pub potentials: DualPotentials,
    pub counters: Counters,
    pub objective_scaled: i128,
}

/// A completed pivot: the leaving arc and the mass moved along the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PivotOutcome {
    pub leaving: ArcIx,
    pub delta_units: u64,
}

enum Side {
    Source,
    Target,
}

impl SimplexState {
    pub fn from_basis(inst: &OTInstance, plan: TransportPlan, arcs: &[ArcIx]) -> Result<Self> {
        let basis = SpanningTreeBasis::from_arcs(inst, arcs)?;
        let potentials = compute_potentials(&basis, inst)?;
        let (objective_scaled, _) = crate::instance::objective(&plan, inst)?;
        Ok(SimplexState { plan, basis, potentials, counters: Counters::default(), objective_scaled })
    }

    pub fn reduced_cost(&mut self, inst: &OTInstance, l: ArcIx) -> i64 {
        reduced_cost(inst, &self.potentials, l, &mut self.counters)
    }

    /// Reduced cost without touching the evaluation counter; used where the
    /// value was already priced (pivot bookkeeping, invariant checks).
    fn reduced_cost_uncounted(&self, inst: &OTInstance, l: ArcIx) -> i64 {
        let (i, j) = inst.arc_endpoints(l);
        inst.scaled_cost(l) - (self.potentials.pi[i] - self.potentials.pi[inst.n() + j])
    }

    /// One primal pivot on `entering`: push the largest admissible mass
    /// around the fundamental cycle, drop a flow-zero arc of the decreasing
    /// side (ties: smallest arc index), splice the tree and shift the
    /// potentials of the re-hung subtree.
    pub fn pivot(&mut self, inst: &OTInstance, entering: ArcIx) -> Result<PivotOutcome> {
        if self.basis.contains(entering) {
            return Err(OtError::InvalidPivot(format!("arc {entering} is already basic")));
        }
        let n = inst.n();
        let (ei, ej) = inst.arc_endpoints(entering);
        let (u, w) = (ei, n + ej);
        let r_entering = self.reduced_cost_uncounted(inst, entering);

        // Fundamental cycle: climb both endpoints to their common ancestor.
        // The cycle is oriented u -> entering -> w -> ... -> lca -> ... -> u,
        // so on the w-side we traverse child->parent and on the u-side
        // parent->child. An arc decreases when traversed against its
        // supply->demand orientation.
        let mut u_side: Vec<(usize, ArcIx)> = Vec::new();
        let mut w_side: Vec<(usize, ArcIx)> = Vec::new();
        {
            let basis = &self.basis;
            let (mut a, mut b) = (u, w);
            while basis.depth[a] > basis.depth[b] {
                u_side.push((a, basis.parent_arc[a]));
                a = basis.parent[a];
            }
            while basis.depth[b] > basis.depth[a] {
                w_side.push((b, basis.parent_arc[b]));
                b = basis.parent[b];
            }
            while a != b {
                u_side.push((a, basis.parent_arc[a]));
                a = basis.parent[a];
                w_side.push((b, basis.parent_arc[b]));
                b = basis.parent[b];
            }
        }
        let is_minus = |child: usize, side: &Side| match side {
            Side::Source => child < n,
            Side::Target => child >= n,
        };

        // Delta = min flow over the decreasing arcs; leaving arc breaks ties
        // by smallest arc index.
        let mut delta = u64::MAX;
        let mut leaving: Option<(ArcIx, usize)> = None; // (arc, child node)
        for (side, path) in [(Side::Source, &u_side), (Side::Target, &w_side)] {
            for &(child, arc) in path.iter() {
                if is_minus(child, &side) {
                    let flow = self.plan.mass(arc);
                    let better = match leaving {
                        None => true,
                        Some((larc, _)) => flow < delta || (flow == delta && arc < larc),
                    };
                    if better {
                        delta = flow;
                        leaving = Some((arc, child));
                    }
                }
            }
        }
        let (leaving_arc, leaving_child) =
            leaving.expect("alternating cycle always has a decreasing arc");
        let on_u_side = u_side.iter().any(|&(_, a)| a == leaving_arc);
        debug_assert!(r_entering < 0 || delta == 0, "non-improving pivot with positive step");

        // Flow update along the cycle.
        if delta > 0 {
            for (side, path) in [(Side::Source, &u_side), (Side::Target, &w_side)] {
                for &(child, arc) in path.iter() {
                    let flow = self.plan.mass(arc);
                    let new = if is_minus(child, &side) { flow - delta } else { flow + delta };
                    self.plan.set_mass(arc, new);
                }
            }
        }
        self.plan.set_mass(entering, delta);
        self.plan.remove(leaving_arc);
        self.basis.in_basis[leaving_arc as usize] = false;
        self.basis.in_basis[entering as usize] = true;

        // Tree surgery: detach the subtree under the leaving arc's child and
        // re-root it at the entering endpoint it contains.
        let v = if on_u_side { u } else { w };
        let o = if on_u_side { w } else { u };
        {
            let basis = &mut self.basis;
            let lc = leaving_child;
            let lp = basis.parent[lc];
            basis.children[lp].retain(|&c| c != lc);

            let mut chain = vec![v];
            let mut x = v;
            while x != lc {
                x = basis.parent[x];
                chain.push(x);
            }
            let old_arcs: Vec<ArcIx> = chain.iter().map(|&c| basis.parent_arc[c]).collect();
            for k in 0..chain.len() - 1 {
                let (a, b) = (chain[k], chain[k + 1]);
                basis.children[b].retain(|&c| c != a);
                basis.children[a].push(b);
                basis.parent[b] = a;
                basis.parent_arc[b] = old_arcs[k];
            }
            basis.parent[v] = o;
            basis.parent_arc[v] = entering;
            basis.children[o].push(v);

            // Uniform potential shift over the re-hung subtree keeps every
            // internal basic arc at zero reduced cost.
            let pi = &mut self.potentials.pi;
            let new_pi_v = if v < n {
                inst.scaled_cost(entering) + pi[o]
            } else {
                pi[o] - inst.scaled_cost(entering)
            };
            let dpi = new_pi_v - pi[v];
            basis.depth[v] = basis.depth[o] + 1;
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                pi[x] += dpi;
                for &c in &basis.children[x] {
                    basis.depth[c] = basis.depth[x] + 1;
                    stack.push(c);
                }
            }
        }

        self.counters.pivots += 1;
        self.objective_scaled += r_entering as i128 * delta as i128;
        Ok(PivotOutcome { leaving: leaving_arc, delta_units: delta })
    }
}

/// The arcs a solve is allowed to price and pivot on.
#[derive(Debug, Clone, Copy)]
pub enum WorkingSet<'a> {
    Full,
    Subset(&'a [ArcIx]),
}

impl WorkingSet<'_> {
    pub fn len(&self, inst: &OTInstance) -> usize {
        match self {
            WorkingSet::Full => inst.num_arcs(),
            WorkingSet::Subset(arcs) => arcs.len(),
        }
    }

    pub fn is_empty(&self, inst: &OTInstance) -> bool {
        self.len(inst) == 0
    }

    fn for_each(&self, inst: &OTInstance, mut f: impl FnMut(ArcIx) -> bool) {
        match self {
            WorkingSet::Full => {
                for l in 0..inst.num_arcs() as ArcIx {
                    if !f(l) {
                        return;
                    }
                }
            }
            WorkingSet::Subset(arcs) => {
                for &l in arcs.iter() {
                    if !f(l) {
                        return;
                    }
                }
            }
        }
    }
}

struct Scan {
    entering: Option<(ArcIx, i64)>,
    /// Valid only when the scan ran to completion (entering == None).
    min_r: i64,
    min_arc: Option<ArcIx>,
}

fn scan_working_set(
    state: &mut SimplexState,
    inst: &OTInstance,
    ws: WorkingSet<'_>,
    bland: bool,
    collect: Option<&mut Vec<(ArcIx, i64)>>,
) -> Scan {
    let mut min_r = i64::MAX;
    let mut min_arc = None;
    let mut entering = None;
    let mut buf = collect;
    if let Some(b) = buf.as_deref_mut() {
        b.clear();
    }
    ws.for_each(inst, |l| {
        let r = state.reduced_cost(inst, l);
        if let Some(b) = buf.as_deref_mut() {
            b.push((l, r));
        }
        if r < min_r {
            min_r = r;
            min_arc = Some(l);
        }
        if r < 0 && !state.basis.contains(l) {
            if bland {
                entering = Some((l, r));
                return false; // lowest index found, stop scanning
            }
            match entering {
                Some((_, best)) if best <= r => {}
                _ => entering = Some((l, r)),
            }
        }
        true
    });
    Scan { entering, min_r, min_arc }
}

/// Runs primal simplex restricted to `ws` until every priced arc has
/// nonnegative reduced cost. The final full scan doubles as the
/// optimality certificate over `ws`.
fn run_simplex(
    state: &mut SimplexState,
    inst: &OTInstance,
    ws: WorkingSet<'_>,
    opts: &SolveOptions,
    mut final_reduced: Option<&mut Vec<(ArcIx, i64)>>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let evals0 = state.counters.evals;
    let pivots0 = state.counters.pivots;
    let mut trace = Vec::new();
    let mut bland = matches!(opts.pricing, PricingRule::Bland);
    let mut degenerate_streak = 0u32;
    let certificate;
    loop {
        let scan = scan_working_set(state, inst, ws, bland, final_reduced.as_deref_mut());
        match scan.entering {
            None => {
                certificate = Certificate { min_reduced_cost: scan.min_r, arc: scan.min_arc };
                break;
            }
            Some((arc, _)) => {
                let before = state.objective_scaled;
                let outcome = state.pivot(inst, arc)?;
                debug_assert!(state.objective_scaled <= before);
                if outcome.delta_units == 0 {
                    degenerate_streak += 1;
                    if matches!(opts.pricing, PricingRule::MostNegative)
                        && degenerate_streak >= opts.degenerate_switch
                    {
                        bland = true;
                    }
                } else {
                    degenerate_streak = 0;
                    bland = matches!(opts.pricing, PricingRule::Bland);
                }
                if opts.collect_trace {
                    trace.push(TracePoint {
                        index: state.counters.pivots - pivots0,
                        delta_units: outcome.delta_units,
                        objective_scaled: state.objective_scaled,
                        time_s: start.elapsed().as_secs_f64(),
                    });
                }
                if let Some(cap) = opts.pivot_cap {
                    if state.counters.pivots - pivots0 > cap {
                        return Err(OtError::InvalidConfig(format!(
                            "pivot cap {cap} exceeded"
                        )));
                    }
                }
            }
        }
    }
    Ok(SolveReport {
        method: "network-simplex".into(),
        pricing: opts.pricing.to_string(),
        objective_scaled: state.objective_scaled,
        objective: inst.descale_objective(state.objective_scaled),
        pivots: state.counters.pivots - pivots0,
        evals: state.counters.evals - evals0,
        outer_iterations: 0,
        time_s: start.elapsed().as_secs_f64(),
        certificate: Some(certificate),
        trace,
    })
}

/// Northwest Corner initial basic feasible solution. Degenerate ties
/// (row and column exhausted together) advance the row pointer, adding a
/// zero-flow basic arc in the current column.
pub fn northwest_corner(inst: &OTInstance) -> Result<SimplexState> {
    let n = inst.n();
    let m = inst.m();
    let mut p: Vec<u64> = inst.supply_units().to_vec();
    let mut q: Vec<u64> = inst.demand_units().to_vec();
    let mut plan = TransportPlan::new(n, m);
    let mut arcs = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let x = p[i].min(q[j]);
        plan.set_mass(inst.arc(i, j), x);
        arcs.push(inst.arc(i, j));
        p[i] -= x;
        q[j] -= x;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if p[i] == 0 && i < n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    SimplexState::from_basis(inst, plan, &arcs)
}

/// Solves the full problem to proven optimality from a feasible start.
pub fn solve_full(
    inst: &OTInstance,
    mut state: SimplexState,
    opts: &SolveOptions,
) -> Result<(SimplexState, SolveReport)> {
    let report = run_simplex(&mut state, inst, WorkingSet::Full, opts, None)?;
    Ok((state, report))
}

/// Result of a restricted solve: counters over the call plus the reduced
/// costs of every working-set arc at the restricted optimum (from the final
/// certifying scan, so no extra pricing is charged).
#[derive(Debug)]
pub struct RestrictedOutcome {
    pub report: SolveReport,
    pub final_reduced: Vec<(ArcIx, i64)>,
}

/// Restricted solve over `working_set`: arcs outside the set are never
/// priced and never enter the basis. Requires the warm basis to be
/// contained in the working set (basis-variable succession).
pub fn solve_restricted(
    inst: &OTInstance,
    state: &mut SimplexState,
    working_set: &[ArcIx],
    opts: &SolveOptions,
) -> Result<RestrictedOutcome> {
    debug_assert!(working_set.windows(2).all(|w| w[0] < w[1]), "working set must be sorted");
    for l in state.basis.parent_arc.iter().copied().filter(|&l| l != NO_ARC) {
        if working_set.binary_search(&l).is_err() {
            return Err(OtError::SuccessionViolation(format!(
                "basic arc {l} is missing from the working set"
            )));
        }
    }
    let mut final_reduced = Vec::with_capacity(working_set.len());
    let report = run_simplex(
        state,
        inst,
        WorkingSet::Subset(working_set),
        opts,
        Some(&mut final_reduced),
    )?;
    Ok(RestrictedOutcome { report, final_reduced })
}

/// Builds a spanning-tree basis whose arcs include the support of `plan`,
/// completed greedily in row-major arc order. Fails if the support already
/// contains a cycle.
pub fn basis_from_plan(inst: &OTInstance, plan: &TransportPlan) -> Result<SpanningTreeBasis> {
    let n = inst.n();
    let nodes = inst.num_nodes();
    let mut comp: Vec<usize> = (0..nodes).collect();
    fn find(comp: &mut Vec<usize>, mut x: usize) -> usize {
        while comp[x] != x {
            comp[x] = comp[comp[x]];
            x = comp[x];
        }
        x
    }
    let mut arcs = Vec::new();
    for (l, x) in plan.iter() {
        if x == 0 {
            continue;
        }
        let (i, j) = inst.arc_endpoints(l);
        let (a, b) = (find(&mut comp, i), find(&mut comp, n + j));
        if a == b {
            return Err(OtError::InvalidBasis("plan support contains a cycle".into()));
        }
        comp[a] = b;
        arcs.push(l);
    }
    for l in 0..inst.num_arcs() as ArcIx {
        if arcs.len() == nodes - 1 {
            break;
        }
        let (i, j) = inst.arc_endpoints(l);
        let (a, b) = (find(&mut comp, i), find(&mut comp, n + j));
        if a != b {
            comp[a] = b;
            arcs.push(l);
        }
    }
    arcs.sort_unstable();
    SpanningTreeBasis::from_arcs(inst, &arcs)
}
