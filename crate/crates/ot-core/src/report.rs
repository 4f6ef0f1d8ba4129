//! Machine-readable run reports shared by the solvers and the benchmark
//! drivers.

use serde::Serialize;

use crate::instance::ArcIx;

/// Optimality certificate: the minimum reduced cost seen on a full pricing
/// pass and an arc attaining it. `min_reduced_cost >= 0` certifies global
/// optimality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub min_reduced_cost: i64,
    pub arc: Option<ArcIx>,
}

impl Certificate {
    pub fn is_optimal(&self) -> bool {
        self.min_reduced_cost >= 0
    }
}

/// One point of a per-pivot objective trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub index: u64,
    pub delta_units: u64,
    pub objective_scaled: i128,
    pub time_s: f64,
}

/// Summary of a single solve: exact objective, work counters and the
/// termination certificate.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub pricing: String,
    pub objective_scaled: i128,
    pub objective: f64,
    pub pivots: u64,
    pub evals: u64,
    pub outer_iterations: u64,
    pub time_s: f64,
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

/// Per-outer-iteration record of a block-coordinate run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OuterIteration {
    pub k: u64,
    pub working_set_size: usize,
    pub pivots: u64,
    pub evals: u64,
    pub objective_scaled: i128,
    pub time_s: f64,
}

/// Full record of an RS/GS-BCDNS run.
#[derive(Debug, Clone, Serialize)]
pub struct OuterReport {
    pub method: String,
    pub objective_scaled: i128,
    pub objective: f64,
    pub outer_iterations: u64,
    pub total_pivots: u64,
    pub total_evals: u64,
    pub time_s: f64,
    pub certificate: Certificate,
    pub iterations: Vec<OuterIteration>,
}

impl OuterReport {
    /// Writes the per-iteration CSV: k, |H_k|, pivots, evals,
    /// objective_scaled, time_s.
    pub fn write_iteration_csv<W: std::io::Write>(&self, w: W) -> crate::error::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "h_size", "pivots", "evals", "objective_scaled", "time_s"])?;
        for it in &self.iterations {
            wtr.write_record([
                it.k.to_string(),
                it.working_set_size.to_string(),
                it.pivots.to_string(),
                it.evals.to_string(),
                it.objective_scaled.to_string(),
                format!("{:.6}", it.time_s),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
