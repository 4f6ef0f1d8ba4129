//! Randomized invariants checked with proptest.

use ot_core::generate::{generate_samples, PairSpec};
use ot_core::instance::{check_feasibility, make_instance, OTInstance, DEFAULT_SCALE};
use ot_core::simplex::{northwest_corner, solve_full, SolveOptions};
use ot_core::sinkhorn::{quantize_to_feasible, DensePlan, DEFAULT_REFINEMENT};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = PairSpec> {
    prop_oneof![
        Just(PairSpec::uniform_normal(1).unwrap()),
        Just(PairSpec::normal_mixture(1).unwrap()),
        Just(PairSpec::uniform_beta(1).unwrap()),
        Just(PairSpec::uniform_normal(2).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Generation is a pure function of (spec, n, seed).
    #[test]
    fn generator_is_deterministic(
        spec in spec_strategy(),
        n in 1usize..40,
        seed in 0u64..1_000_000,
    ) {
        let a = generate_samples(&spec, n, seed).unwrap();
        let b = generate_samples(&spec, n, seed).unwrap();
        prop_assert_eq!(a.u, b.u);
        prop_assert_eq!(a.v, b.v);
    }

    /// A full network-simplex solve always ends at an exactly feasible,
    /// certified-optimal plan.
    #[test]
    fn solved_plans_are_exactly_feasible_and_certified(
        spec in spec_strategy(),
        n in 2usize..25,
        seed in 0u64..10_000,
    ) {
        let samples = generate_samples(&spec, n, seed).unwrap();
        let inst = make_instance(&samples, DEFAULT_SCALE).unwrap();
        let state = northwest_corner(&inst).unwrap();
        let (final_state, report) = solve_full(&inst, state, &SolveOptions::default()).unwrap();
        let feas = check_feasibility(&final_state.plan, &inst).unwrap();
        prop_assert!(feas.feasible, "violation {}", feas.max_violation);
        prop_assert!(report.certificate.unwrap().min_reduced_cost >= 0);
        prop_assert_eq!(report.objective_scaled, final_state.objective_scaled);
    }

    /// Cost quantization preserves order up to one quantum: if the rounded
    /// costs are strictly ordered, the true costs differ by more than -1/S.
    #[test]
    fn cost_quantization_preserves_order(
        a in 0.0f64..1e6,
        b in 0.0f64..1e6,
    ) {
        let inst = OTInstance::from_raw_units(
            vec![vec![a, b], vec![b, a]],
            vec![1, 1],
            vec![1, 1],
            2,
            DEFAULT_SCALE,
        ).unwrap();
        let (qa, qb) = (inst.scaled_cost(0), inst.scaled_cost(1));
        if qa < qb {
            prop_assert!(a < b + 1.0 / DEFAULT_SCALE as f64);
        }
        // |S*c - round(S*c)| <= 1/2.
        prop_assert!((a * DEFAULT_SCALE as f64 - qa as f64).abs() <= 0.5);
    }

    /// Snapping an arbitrary nonnegative dense matrix onto the integer grid
    /// always yields an exactly feasible plan.
    #[test]
    fn quantized_rounding_is_always_exactly_feasible(
        n in 2usize..12,
        m in 2usize..12,
        seed in 0u64..10_000,
        raw in proptest::collection::vec(0.0f64..1.0, 4..144),
    ) {
        let samples = generate_samples(
            &PairSpec::uniform_normal(1).unwrap(), n.max(m), seed).unwrap();
        let inst = make_instance(&samples, DEFAULT_SCALE).unwrap();
        let (n, m) = (inst.n(), inst.m());
        // Arbitrary entries, rescaled so the total mass matches.
        let mut x: Vec<f64> = (0..n * m)
            .map(|k| raw[k % raw.len()] + 1e-9)
            .collect();
        let total: f64 = x.iter().sum();
        for v in &mut x {
            *v /= total;
        }
        let plan = quantize_to_feasible(&DensePlan { n, m, x }, &inst, DEFAULT_REFINEMENT)
            .unwrap();
        prop_assert!(plan.is_exactly_feasible(&inst));
    }
}
