//! Reproducible sample generation for the benchmark instance families.
//!
//! All randomness flows through a seeded ChaCha generator with per-purpose
//! substreams, so a `(spec, n, seed)` triple always reproduces the same
//! point sets byte-for-byte.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};

/// Substream ids carving one seed into independent generators.
pub mod streams {
    pub const SOURCE_SAMPLES: u64 = 0;
    pub const TARGET_SAMPLES: u64 = 1;
    pub const BLOCK_SELECTION: u64 = 2;
}

/// Seeded generator for a given purpose.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistKind {
    /// Uniform on [-1,1]^d.
    Uniform,
    /// Standard normal N(0, I_d).
    Normal,
    /// Two-component mixture: the component mean is -2 or +2 (per point,
    /// equal weights), each coordinate has unit variance.
    Mixture,
    /// Beta(0.5, 0.5) per coordinate, linearly mapped to [-1,1].
    Beta,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DistKind::Uniform => "uniform",
            DistKind::Normal => "normal",
            DistKind::Mixture => "mixture",
            DistKind::Beta => "beta",
        };
        f.write_str(s)
    }
}

impl FromStr for DistKind {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DistKind::Uniform),
            "normal" => Ok(DistKind::Normal),
            "mixture" => Ok(DistKind::Mixture),
            "beta" | "beta-mapped" => Ok(DistKind::Beta),
            other => Err(OtError::InvalidConfig(format!(
                "unknown distribution kind '{other}'"
            ))),
        }
    }
}

/// A distribution together with its ambient dimension (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistSpec {
    pub kind: DistKind,
    pub dim: usize,
}

impl DistSpec {
    pub fn new(kind: DistKind, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(OtError::InvalidConfig(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        Ok(DistSpec { kind, dim })
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}d", self.kind, self.dim)
    }
}

impl FromStr for DistSpec {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, dim) = match s.rsplit_once('-') {
            Some((k, "1d")) => (k, 1),
            Some((k, "2d")) => (k, 2),
            _ => (s, 1),
        };
        DistSpec::new(kind.parse()?, dim)
    }
}

/// Source/target pair defining a benchmark family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub source: DistSpec,
    pub target: DistSpec,
}

impl PairSpec {
    pub fn new(source: DistSpec, target: DistSpec) -> Result<Self> {
        if source.dim != target.dim {
            return Err(OtError::InvalidConfig(
                "source and target dimensions differ".into(),
            ));
        }
        Ok(PairSpec { source, target })
    }

    pub fn dim(&self) -> usize {
        self.source.dim
    }

    pub fn uniform_normal(dim: usize) -> Result<Self> {
        PairSpec::new(
            DistSpec::new(DistKind::Uniform, dim)?,
            DistSpec::new(DistKind::Normal, dim)?,
        )
    }

    pub fn normal_mixture(dim: usize) -> Result<Self> {
        PairSpec::new(
            DistSpec::new(DistKind::Normal, dim)?,
            DistSpec::new(DistKind::Mixture, dim)?,
        )
    }

    pub fn uniform_beta(dim: usize) -> Result<Self> {
        PairSpec::new(
            DistSpec::new(DistKind::Uniform, dim)?,
            DistSpec::new(DistKind::Beta, dim)?,
        )
    }
}

impl fmt::Display for PairSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.target)
    }
}

impl FromStr for PairSpec {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        // Named presets first, then the generic "source:target" form.
        match s {
            "uniform-normal" => return PairSpec::uniform_normal(1),
            "uniform-normal-2d" => return PairSpec::uniform_normal(2),
            "normal-mixture" => return PairSpec::normal_mixture(1),
            "normal-mixture-2d" => return PairSpec::normal_mixture(2),
            "uniform-beta" => return PairSpec::uniform_beta(1),
            _ => {}
        }
        let (a, b) = s.split_once(':').ok_or_else(|| {
            OtError::InvalidConfig(format!("unknown problem spec '{s}'"))
        })?;
        PairSpec::new(a.parse()?, b.parse()?)
    }
}

/// Persisted point sets; the cost matrix is reconstructed from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub dim: usize,
    /// Source points, flattened row-major (`dim` coordinates per point).
    pub u: Vec<f64>,
    /// Target points, flattened row-major.
    pub v: Vec<f64>,
    pub seed: u64,
    pub kind_u: DistSpec,
    pub kind_v: DistSpec,
}

impl SamplePair {
    /// Hand-written 1D pair, tagged as uniform for serialization purposes.
    pub fn from_points_1d(u: Vec<f64>, v: Vec<f64>) -> Self {
        let tag = DistSpec { kind: DistKind::Uniform, dim: 1 };
        SamplePair { dim: 1, u, v, seed: 0, kind_u: tag, kind_v: tag }
    }

    pub fn n_source(&self) -> usize {
        self.u.len() / self.dim
    }

    pub fn n_target(&self) -> usize {
        self.v.len() / self.dim
    }

    pub fn source_point(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target_point(&self, j: usize) -> &[f64] {
        &self.v[j * self.dim..(j + 1) * self.dim]
    }
}

fn draw(spec: DistSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * spec.dim);
    match spec.kind {
        DistKind::Uniform => {
            let d = Uniform::new_inclusive(-1.0, 1.0);
            for _ in 0..n * spec.dim {
                out.push(d.sample(rng));
            }
        }
        DistKind::Normal => {
            let d = Normal::new(0.0, 1.0).unwrap();
            for _ in 0..n * spec.dim {
                out.push(d.sample(rng));
            }
        }
        DistKind::Mixture => {
            let d = Normal::new(0.0, 1.0).unwrap();
            for _ in 0..n {
                let mean = if rng.gen_bool(0.5) { 2.0 } else { -2.0 };
                for _ in 0..spec.dim {
                    out.push(mean + d.sample(rng));
                }
            }
        }
        DistKind::Beta => {
            let d = Beta::new(0.5, 0.5).unwrap();
            for _ in 0..n * spec.dim {
                out.push(2.0 * d.sample(rng) - 1.0);
            }
        }
    }
    out
}

/// Draws `n` source and `n` target points for `spec`, deterministically
/// for a fixed `(spec, n, seed)`.
pub fn generate_samples(spec: &PairSpec, n: usize, seed: u64) -> Result<SamplePair> {
    if n == 0 {
        return Err(OtError::InvalidInstance("sample count must be >= 1".into()));
    }
    let mut rng_u = substream(seed, streams::SOURCE_SAMPLES);
    let mut rng_v = substream(seed, streams::TARGET_SAMPLES);
    Ok(SamplePair {
        dim: spec.dim(),
        u: draw(spec.source, n, &mut rng_u),
        v: draw(spec.target, n, &mut rng_v),
        seed,
        kind_u: spec.source,
        kind_v: spec.target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = PairSpec::uniform_normal(1).unwrap();
        let a = generate_samples(&spec, 5, 7).unwrap();
        let b = generate_samples(&spec, 5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let spec = PairSpec::uniform_normal(1).unwrap();
        let a = generate_samples(&spec, 5, 7).unwrap();
        let b = generate_samples(&spec, 5, 8).unwrap();
        assert_ne!(a.u, b.u);
    }

    #[test]
    fn beta_mapped_stays_in_range() {
        let spec = PairSpec::uniform_beta(1).unwrap();
        let s = generate_samples(&spec, 500, 3).unwrap();
        assert!(s.v.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn mixture_mean_near_zero() {
        // Monte-Carlo check against the mixture's analytic mean 0.
        let spec = PairSpec::normal_mixture(1).unwrap();
        let s = generate_samples(&spec, 10_000, 11).unwrap();
        let mean = s.v.iter().sum::<f64>() / s.v.len() as f64;
        assert!(mean.abs() < 0.1, "mixture mean {mean}");
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!("cauchy-1d".parse::<DistSpec>().is_err());
        assert!("nope".parse::<PairSpec>().is_err());
    }

    #[test]
    fn pair_spec_roundtrip() {
        for s in ["uniform-normal", "normal-mixture", "uniform-beta", "beta-2d:normal-2d"] {
            let spec: PairSpec = s.parse().unwrap();
            let back: PairSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, back);
        }
    }
}
