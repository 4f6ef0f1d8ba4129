//! Instance model: dense cost matrix with an integer-scaled copy, exact
//! integer marginals, sparse transport plans, and exact feasibility and
//! objective evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::generate::SamplePair;

/// Arc identifier: row-major index `i * m + j` into the cost matrix.
pub type ArcIx = u32;

pub const DEFAULT_SCALE: i64 = 1_000_000;

/// A balanced discrete OT instance.
///
/// Marginals are stored as nonnegative integers in units of `1/mass_denom`,
/// so balance checks and flow arithmetic are exact. Costs are kept both as
/// the original reals and as an integer-scaled copy `round(scale * c)` used
/// by the exact solvers.
#[derive(Debug, Clone)]
pub struct OTInstance {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    scaled: Vec<i64>,
    scale: i64,
    p: Vec<u64>,
    q: Vec<u64>,
    mass_denom: u64,
    samples: Option<SamplePair>,
}

impl OTInstance {
    /// Builds an instance from an explicit cost matrix and integer marginals.
    pub fn from_raw_units(
        cost: Vec<Vec<f64>>,
        p: Vec<u64>,
        q: Vec<u64>,
        mass_denom: u64,
        scale: i64,
    ) -> Result<Self> {
        let n = p.len();
        let m = q.len();
        if n == 0 || m == 0 {
            return Err(OtError::InvalidInstance("need n >= 1 and m >= 1".into()));
        }
        if scale < 1 {
            return Err(OtError::InvalidInstance("scale must be >= 1".into()));
        }
        if mass_denom == 0 {
            return Err(OtError::InvalidInstance("mass denominator must be >= 1".into()));
        }
        if cost.len() != n || cost.iter().any(|row| row.len() != m) {
            return Err(OtError::InvalidInstance(format!(
                "cost matrix must be {n}x{m}"
            )));
        }
        let total_p: u64 = p.iter().sum();
        let total_q: u64 = q.iter().sum();
        if total_p != total_q {
            return Err(OtError::InvalidInstance(format!(
                "unbalanced marginals: sum(p) = {total_p} units, sum(q) = {total_q} units \
                 (mass unit = 1/{mass_denom})"
            )));
        }
        let mut flat = Vec::with_capacity(n * m);
        let mut scaled = Vec::with_capacity(n * m);
        for row in &cost {
            for &c in row {
                if !c.is_finite() || c < 0.0 {
                    return Err(OtError::InvalidInstance(format!(
                        "cost entries must be finite and >= 0, got {c}"
                    )));
                }
                let sc = c * scale as f64;
                if sc >= i64::MAX as f64 / 4.0 {
                    return Err(OtError::InvalidInstance(
                        "scaled cost overflows the integer range".into(),
                    ));
                }
                flat.push(c);
                scaled.push(sc.round() as i64);
            }
        }
        Ok(OTInstance { n, m, cost: flat, scaled, scale, p, q, mass_denom, samples: None })
    }

    /// Like [`from_raw_units`](Self::from_raw_units) but accepting real-valued
    /// marginals, which are converted to an exact common-denominator integer
    /// representation.
    pub fn from_raw(cost: Vec<Vec<f64>>, p: &[f64], q: &[f64], scale: i64) -> Result<Self> {
        let (p_units, q_units, denom) = rationalize_marginals(p, q)?;
        Self::from_raw_units(cost, p_units, q_units, denom, scale)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of transport variables, N = n*m.
    pub fn num_arcs(&self) -> usize {
        self.n * self.m
    }

    /// Number of nodes, M = n + m.
    pub fn num_nodes(&self) -> usize {
        self.n + self.m
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn mass_denom(&self) -> u64 {
        self.mass_denom
    }

    /// Total mass in integer units (equals sum of p and of q).
    pub fn total_mass_units(&self) -> u64 {
        self.p.iter().sum()
    }

    pub fn supply_units(&self) -> &[u64] {
        &self.p
    }

    pub fn demand_units(&self) -> &[u64] {
        &self.q
    }

    pub fn supply(&self, i: usize) -> f64 {
        self.p[i] as f64 / self.mass_denom as f64
    }

    pub fn demand(&self, j: usize) -> f64 {
        self.q[j] as f64 / self.mass_denom as f64
    }

    pub fn arc(&self, i: usize, j: usize) -> ArcIx {
        (i * self.m + j) as ArcIx
    }

    pub fn arc_endpoints(&self, l: ArcIx) -> (usize, usize) {
        let l = l as usize;
        (l / self.m, l % self.m)
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.m + j]
    }

    pub fn scaled_cost(&self, l: ArcIx) -> i64 {
        self.scaled[l as usize]
    }

    /// Quantized real cost `round(scale*c)/scale`; the cost function the
    /// exact solvers actually optimize.
    pub fn quantized_cost(&self, i: usize, j: usize) -> f64 {
        self.scaled[i * self.m + j] as f64 / self.scale as f64
    }

    /// Converts a scaled-integer objective back to the real cost scale.
    pub fn descale_objective(&self, scaled: i128) -> f64 {
        scaled as f64 / (self.scale as f64 * self.mass_denom as f64)
    }

    pub fn samples(&self) -> Option<&SamplePair> {
        self.samples.as_ref()
    }
}

/// Sparse nonnegative flow on supply x demand arcs, in integer mass units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    n: usize,
    m: usize,
    entries: BTreeMap<ArcIx, u64>,
}

impl TransportPlan {
    pub fn new(n: usize, m: usize) -> Self {
        TransportPlan { n, m, entries: BTreeMap::new() }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn mass(&self, l: ArcIx) -> u64 {
        self.entries.get(&l).copied().unwrap_or(0)
    }

    /// Sets the mass on an arc; `0` keeps the arc explicitly stored, which is
    /// how degenerate basic arcs are represented.
    pub fn set_mass(&mut self, l: ArcIx, units: u64) {
        self.entries.insert(l, units);
    }

    pub fn remove(&mut self, l: ArcIx) {
        self.entries.remove(&l);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArcIx, u64)> + '_ {
        self.entries.iter().map(|(&l, &x)| (l, x))
    }

    pub fn nnz(&self) -> usize {
        self.entries.values().filter(|&&x| x > 0).count()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n];
        for (&l, &x) in &self.entries {
            sums[l as usize / self.m] += x;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.m];
        for (&l, &x) in &self.entries {
            sums[l as usize % self.m] += x;
        }
        sums
    }
}

/// Builds the quadratic-cost instance with uniform marginals from a sample
/// pair: `c_ij = ||u_i - v_j||^2`, `p = (1/n,...)`, `q = (1/m,...)`.
pub fn make_instance(samples: &SamplePair, scale: i64) -> Result<OTInstance> {
    let n = samples.n_source();
    let m = samples.n_target();
    if n == 0 || m == 0 {
        return Err(OtError::InvalidInstance("empty sample set".into()));
    }
    if samples.u.len() != n * samples.dim || samples.v.len() != m * samples.dim {
        return Err(OtError::InvalidInstance(
            "sample coordinate count is not a multiple of the dimension".into(),
        ));
    }
    let mut cost = Vec::with_capacity(n);
    for i in 0..n {
        let ui = samples.source_point(i);
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let vj = samples.target_point(j);
            let d2: f64 = ui.iter().zip(vj).map(|(a, b)| (a - b) * (a - b)).sum();
            row.push(d2);
        }
        cost.push(row);
    }
    // Uniform marginals with an exact common denominator lcm(n, m).
    let denom = lcm(n as u64, m as u64);
    let p = vec![denom / n as u64; n];
    let q = vec![denom / m as u64; m];
    let mut inst = OTInstance::from_raw_units(cost, p, q, denom, scale)?;
    inst.samples = Some(samples.clone());
    Ok(inst)
}

/// Exact objective of a plan: the scaled integer value and its descaled
/// real counterpart.
pub fn objective(plan: &TransportPlan, inst: &OTInstance) -> Result<(i128, f64)> {
    if plan.dims() != (inst.n, inst.m) {
        return Err(OtError::InvalidInstance(format!(
            "plan dims {:?} do not match instance {}x{}",
            plan.dims(),
            inst.n,
            inst.m
        )));
    }
    let scaled: i128 = plan
        .iter()
        .map(|(l, x)| inst.scaled_cost(l) as i128 * x as i128)
        .sum();
    Ok((scaled, inst.descale_objective(scaled)))
}

/// Feasibility verdict with the worst marginal residuals, in mass units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Worst |row residual| and the row attaining it (residual = sum - p_i).
    pub worst_row: Option<(usize, i64)>,
    pub worst_col: Option<(usize, i64)>,
    pub max_violation: u64,
}

/// Exact marginal check in integer mass units.
pub fn check_feasibility(plan: &TransportPlan, inst: &OTInstance) -> Result<FeasibilityReport> {
    if plan.dims() != (inst.n, inst.m) {
        return Err(OtError::InvalidInstance("plan/instance dimension mismatch".into()));
    }
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let worst_row = rows
        .iter()
        .zip(&inst.p)
        .map(|(&s, &p)| s as i64 - p as i64)
        .enumerate()
        .max_by_key(|(_, r)| r.unsigned_abs());
    let worst_col = cols
        .iter()
        .zip(&inst.q)
        .map(|(&s, &q)| s as i64 - q as i64)
        .enumerate()
        .max_by_key(|(_, r)| r.unsigned_abs());
    let max_violation = worst_row
        .iter()
        .chain(worst_col.iter())
        .map(|(_, r)| r.unsigned_abs())
        .max()
        .unwrap_or(0);
    Ok(FeasibilityReport { feasible: max_violation == 0, worst_row, worst_col, max_violation })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Best rational approximation p/q with q <= max_den (continued fractions).
fn to_fraction(x: f64, max_den: u64) -> Result<(u64, u64)> {
    if !x.is_finite() || x < 0.0 {
        return Err(OtError::InvalidInstance(format!("marginal mass {x} is not a nonnegative real")));
    }
    let (mut num0, mut den0) = (1u64, 0u64);
    let (mut num1, mut den1) = (x.floor() as u64, 1u64);
    let mut frac = x - x.floor();
    while frac > 1e-12 && den1 <= max_den {
        let inv = 1.0 / frac;
        let a = inv.floor() as u64;
        frac = inv - inv.floor();
        let num2 = a.checked_mul(num1).and_then(|v| v.checked_add(num0));
        let den2 = a.checked_mul(den1).and_then(|v| v.checked_add(den0));
        match (num2, den2) {
            (Some(n2), Some(d2)) if d2 <= max_den => {
                (num0, den0) = (num1, den1);
                (num1, den1) = (n2, d2);
            }
            _ => break,
        }
    }
    if (num1 as f64 / den1 as f64 - x).abs() > 1e-9 * x.max(1.0) {
        return Err(OtError::InvalidInstance(format!(
            "marginal mass {x} has no exact small-denominator representation"
        )));
    }
    Ok((num1, den1))
}

/// Converts real marginals to integer units over a common denominator.
fn rationalize_marginals(p: &[f64], q: &[f64]) -> Result<(Vec<u64>, Vec<u64>, u64)> {
    let mut denom = 1u64;
    let mut fracs_p = Vec::with_capacity(p.len());
    let mut fracs_q = Vec::with_capacity(q.len());
    for &x in p.iter().chain(q.iter()) {
        let f = to_fraction(x, 1_000_000)?;
        denom = lcm(denom, f.1);
        if denom > 1_000_000_000_000 {
            return Err(OtError::InvalidInstance("marginal denominators too large".into()));
        }
        if fracs_p.len() < p.len() {
            fracs_p.push(f);
        } else {
            fracs_q.push(f);
        }
    }
    let units = |fr: &[(u64, u64)]| fr.iter().map(|&(n, d)| n * (denom / d)).collect::<Vec<_>>();
    Ok((units(&fracs_p), units(&fracs_q), denom))
}

const fn default_scale() -> i64 {
    DEFAULT_SCALE
}

/// On-disk instance schema. Generated instances persist the sample points
/// (costs are reconstructed, never serialized); the raw variant is for
/// hand-written tests.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceFile {
    Samples {
        n: usize,
        m: usize,
        dim: usize,
        seed: u64,
        kind_u: String,
        kind_v: String,
        u: Vec<f64>,
        v: Vec<f64>,
        #[serde(default = "default_scale")]
        scale: i64,
    },
    Raw {
        n: usize,
        m: usize,
        cost: Vec<Vec<f64>>,
        p: Vec<f64>,
        q: Vec<f64>,
        #[serde(default = "default_scale")]
        scale: i64,
    },
}

impl InstanceFile {
    pub fn from_samples(samples: &SamplePair, scale: i64) -> Self {
        InstanceFile::Samples {
            n: samples.n_source(),
            m: samples.n_target(),
            dim: samples.dim,
            seed: samples.seed,
            kind_u: samples.kind_u.to_string(),
            kind_v: samples.kind_v.to_string(),
            u: samples.u.clone(),
            v: samples.v.clone(),
            scale,
        }
    }

    pub fn into_instance(self) -> Result<OTInstance> {
        match self {
            InstanceFile::Samples { n, m, dim, seed, kind_u, kind_v, u, v, scale } => {
                if u.len() != n * dim || v.len() != m * dim {
                    return Err(OtError::InvalidInstance(
                        "sample arrays do not match the declared n/m/dim".into(),
                    ));
                }
                let samples = SamplePair {
                    dim,
                    u,
                    v,
                    seed,
                    kind_u: kind_u.parse()?,
                    kind_v: kind_v.parse()?,
                };
                make_instance(&samples, scale)
            }
            InstanceFile::Raw { n, m, cost, p, q, scale } => {
                if p.len() != n || q.len() != m {
                    return Err(OtError::InvalidInstance(
                        "marginal lengths do not match the declared n/m".into(),
                    ));
                }
                OTInstance::from_raw(cost, &p, &q, scale)
            }
        }
    }
}

pub fn read_instance_file(path: &Path) -> Result<OTInstance> {
    let text = std::fs::read_to_string(path)?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    file.into_instance()
}

pub fn write_instance_file(path: &Path, samples: &SamplePair, scale: i64) -> Result<()> {
    let file = InstanceFile::from_samples(samples, scale);
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}
