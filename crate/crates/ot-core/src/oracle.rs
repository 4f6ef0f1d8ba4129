//! Independent verification oracles, deliberately implemented without any
//! of the solver machinery they are used to check.

use crate::error::{OtError, Result};
use crate::generate::SamplePair;
use crate::instance::{ArcIx, OTInstance, TransportPlan};

/// Optimal 1D quadratic-cost value for uniform marginals: the monotone
/// (sorted) coupling is optimal, so the answer is `(1/n) * sum (u_(k) - v_(k))^2`.
pub fn oracle_1d_monotone(samples: &SamplePair) -> Result<f64> {
    if samples.dim != 1 {
        return Err(OtError::OracleUnsupported("monotone oracle needs 1D samples".into()));
    }
    let n = samples.n_source();
    if n != samples.n_target() {
        return Err(OtError::OracleUnsupported(
            "monotone oracle needs n = m with uniform marginals".into(),
        ));
    }
    if n == 0 {
        return Err(OtError::OracleUnsupported("empty sample set".into()));
    }
    let mut u = samples.u.clone();
    let mut v = samples.v.clone();
    u.sort_by(|a, b| a.total_cmp(b));
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64)
}

/// The monotone optimal plan itself (sorted source k -> sorted target k),
/// expressed on the original indices. Used to cross-check barycentric
/// projections.
pub fn monotone_plan_1d(samples: &SamplePair, inst: &OTInstance) -> Result<TransportPlan> {
    if samples.dim != 1 || samples.n_source() != samples.n_target() {
        return Err(OtError::OracleUnsupported("monotone plan needs square 1D samples".into()));
    }
    let n = samples.n_source();
    let mut by_u: Vec<usize> = (0..n).collect();
    by_u.sort_by(|&a, &b| samples.u[a].total_cmp(&samples.u[b]));
    let mut by_v: Vec<usize> = (0..n).collect();
    by_v.sort_by(|&a, &b| samples.v[a].total_cmp(&samples.v[b]));
    let unit = inst.total_mass_units() / n as u64;
    let mut plan = TransportPlan::new(n, n);
    for k in 0..n {
        plan.set_mass(inst.arc(by_u[k], by_v[k]), unit);
    }
    Ok(plan)
}

const BRUTEFORCE_LIMIT: usize = 12;

/// Exact optimum by enumerating all spanning-tree bases of the complete
/// bipartite graph and keeping the best feasible one. Tiny instances only
/// (`n*m <= 12`). Returns the scaled integer optimum and its descaled value.
pub fn oracle_lp_bruteforce(inst: &OTInstance) -> Result<(i128, f64)> {
    let n = inst.n();
    let m = inst.m();
    let num_arcs = n * m;
    if num_arcs > BRUTEFORCE_LIMIT {
        return Err(OtError::OracleUnsupported(format!(
            "brute force limited to n*m <= {BRUTEFORCE_LIMIT}, got {num_arcs}"
        )));
    }
    let tree_size = n + m - 1;
    let mut chosen = Vec::with_capacity(tree_size);
    let mut best: Option<i128> = None;
    enumerate(inst, 0, tree_size, &mut chosen, &mut best);
    let best = best.ok_or_else(|| {
        OtError::InvalidInstance("no feasible spanning-tree basis found".into())
    })?;
    Ok((best, inst.descale_objective(best)))
}

fn enumerate(
    inst: &OTInstance,
    start: usize,
    remaining: usize,
    chosen: &mut Vec<ArcIx>,
    best: &mut Option<i128>,
) {
    if remaining == 0 {
        if let Some(value) = evaluate_basis(inst, chosen) {
            if best.map_or(true, |b| value < b) {
                *best = Some(value);
            }
        }
        return;
    }
    let num_arcs = inst.num_arcs();
    for l in start..num_arcs {
        if num_arcs - l < remaining {
            break;
        }
        chosen.push(l as ArcIx);
        enumerate(inst, l + 1, remaining - 1, chosen, best);
        chosen.pop();
    }
}

/// Checks that `arcs` form a spanning tree, solves the tree flows by leaf
/// elimination, and returns the scaled objective if the flows are
/// nonnegative.
fn evaluate_basis(inst: &OTInstance, arcs: &[ArcIx]) -> Option<i128> {
    let n = inst.n();
    let m = inst.m();
    let nodes = n + m;

    // Union-find spanning check.
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &l in arcs {
        let (i, j) = inst.arc_endpoints(l);
        let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
        if a == b {
            return None; // cycle
        }
        parent[a] = b;
    }

    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<ArcIx>> = vec![Vec::new(); nodes];
    for &l in arcs {
        let (i, j) = inst.arc_endpoints(l);
        degree[i] += 1;
        degree[n + j] += 1;
        incident[i].push(l);
        incident[n + j].push(l);
    }

    // Leaf elimination: a leaf's remaining requirement fixes its arc flow.
    let mut requirement: Vec<i64> = inst
        .supply_units()
        .iter()
        .chain(inst.demand_units().iter())
        .map(|&x| x as i64)
        .collect();
    let mut used = vec![false; inst.num_arcs()];
    let mut leaves: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
    let mut objective: i128 = 0;
    let mut processed = 0;
    while let Some(v) = leaves.pop() {
        let Some(&l) = incident[v].iter().find(|&&l| !used[l as usize]) else {
            continue;
        };
        used[l as usize] = true;
        processed += 1;
        let flow = requirement[v];
        if flow < 0 {
            return None;
        }
        let (i, j) = inst.arc_endpoints(l);
        let other = if v == i { n + j } else { i };
        requirement[v] = 0;
        requirement[other] -= flow;
        objective += inst.scaled_cost(l) as i128 * flow as i128;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if processed != arcs.len() {
        return None;
    }
    Some(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_instance, OTInstance};

    #[test]
    fn monotone_oracle_identical_points() {
        let s = SamplePair::from_points_1d(vec![0.3, -0.7], vec![0.3, -0.7]);
        assert_eq!(oracle_1d_monotone(&s).unwrap(), 0.0);
    }

    #[test]
    fn monotone_oracle_sorting_removes_permutation() {
        let s = SamplePair::from_points_1d(vec![0.0, 1.0], vec![1.0, 0.0]);
        assert_eq!(oracle_1d_monotone(&s).unwrap(), 0.0);
    }

    #[test]
    fn monotone_oracle_rejects_2d() {
        let spec = crate::generate::PairSpec::uniform_normal(2).unwrap();
        let s = crate::generate::generate_samples(&spec, 3, 1).unwrap();
        assert!(matches!(oracle_1d_monotone(&s), Err(OtError::OracleUnsupported(_))));
    }

    #[test]
    fn bruteforce_1x1() {
        let s = SamplePair::from_points_1d(vec![0.5], vec![2.5]);
        let inst = make_instance(&s, 100).unwrap();
        let (scaled, descaled) = oracle_lp_bruteforce(&inst).unwrap();
        assert_eq!(scaled, 400); // cost 4.0 at scale 100, one mass unit
        assert!((descaled - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_2x2_permutation() {
        let inst = OTInstance::from_raw(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            &[0.5, 0.5],
            &[0.5, 0.5],
            1,
        )
        .unwrap();
        let (scaled, _) = oracle_lp_bruteforce(&inst).unwrap();
        assert_eq!(scaled, 0);
    }

    #[test]
    fn bruteforce_rejects_large() {
        let spec = crate::generate::PairSpec::uniform_normal(1).unwrap();
        let s = crate::generate::generate_samples(&spec, 4, 1).unwrap();
        let inst = make_instance(&s, 100).unwrap();
        assert!(matches!(oracle_lp_bruteforce(&inst), Err(OtError::OracleUnsupported(_))));
    }

    #[test]
    fn oracles_agree_on_tiny_1d_instances() {
        // Exhaustive over seeds for n = m <= 3 (n*m <= 9 <= 12).
        let spec = crate::generate::PairSpec::uniform_normal(1).unwrap();
        for n in 1..=3usize {
            for seed in 0..20u64 {
                let s = crate::generate::generate_samples(&spec, n, seed).unwrap();
                let inst = make_instance(&s, 1_000_000).unwrap();
                let (_, brute) = oracle_lp_bruteforce(&inst).unwrap();
                let mono = oracle_1d_monotone(&s).unwrap();
                let tol = (n * n) as f64 / 1_000_000.0;
                assert!(
                    (brute - mono).abs() <= tol,
                    "n={n} seed={seed}: brute={brute} mono={mono}"
                );
            }
        }
    }
}
