//! Exact discrete optimal transport solvers and benchmark drivers.
//!
//! The library solves the balanced optimal transport linear program with a
//! classical network simplex and two block-coordinate variants (random and
//! grouped block selection) that warm-start each restricted subproblem from
//! the previous basis. A log-domain Sinkhorn baseline, instance generators,
//! verification oracles and benchmark drivers round out the crate.
//!
//! All exact solvers work on integer-scaled costs and integer mass units,
//! so objectives, feasibility checks and optimality certificates are free
//! of floating-point tolerances.

pub mod bcdns;
pub mod bench;
pub mod error;
pub mod generate;
pub mod instance;
pub mod oracle;
pub mod report;
pub mod simplex;
pub mod sinkhorn;

pub use bcdns::{gs_bcdns, rs_bcdns, BlockConfig};
pub use error::{OtError, Result};
pub use generate::{generate_samples, DistKind, DistSpec, PairSpec, SamplePair};
pub use instance::{
    check_feasibility, make_instance, objective, read_instance_file, write_instance_file,
    ArcIx, OTInstance, TransportPlan, DEFAULT_SCALE,
};
pub use oracle::{oracle_1d_monotone, oracle_lp_bruteforce};
pub use report::{Certificate, OuterReport, SolveReport};
pub use simplex::{
    basis_from_plan, northwest_corner, solve_full, solve_restricted, PricingRule, SimplexState,
    SolveOptions,
};
pub use sinkhorn::{sinkhorn_solve, SinkhornConfig};
