//! Run configuration read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use limsup_core::geometry::AhlforsSpace;
use limsup_core::sequences::BallSequence;
use limsup_core::{Ball, DimensionFunction};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FSpec {
    #[serde(default = "one")]
    pub kappa: f64,
    pub s: f64,
    #[serde(default)]
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBall {
    pub center: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Number of balls to materialize.
    pub terms: Option<usize>,
    /// Rational sequences: materialize every `p/q` with `q ≤ q_max`.
    pub q_max: Option<usize>,
    /// b-adic sequences: materialize every level `k ≤ k_max`.
    pub k_max: Option<u32>,
    #[serde(default = "default_c_list")]
    pub c_list: Vec<f64>,
    #[serde(default = "one_usize")]
    pub n: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Test balls for the local-measure check.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Test balls for the mass distribution bound.
    #[serde(default = "default_samples")]
    pub mdp_samples: u64,
    /// Sampled centers written to the trace file, per C.
    #[serde(default = "default_traces")]
    pub traces: usize,
    #[serde(default = "default_b0")]
    pub b0: TargetBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSpec {
    pub s_range: [f64; 2],
    #[serde(default = "default_dim_c")]
    pub c: f64,
    #[serde(default = "one_usize")]
    pub depth: usize,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_dim_samples")]
    pub samples: u64,
    /// First index of the tail used by the box-count oracle; defaults to
    /// the square root of the number of terms.
    pub oracle_from: Option<usize>,
    #[serde(default = "default_agreement")]
    pub agreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Not echoed into reports, so runs into different directories compare equal.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    pub space: AhlforsSpace,
    pub sequence: BallSequence,
    pub f: FSpec,
    pub run: RunSpec,
    pub dimension: Option<DimensionSpec>,
}

/// Values given on the command line; each replaces the config entry.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub depth: Option<usize>,
    pub c_list: Option<Vec<f64>>,
    pub samples: Option<u64>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_c_list() -> Vec<f64> {
    vec![1.0]
}
fn default_depth() -> usize {
    1
}
fn default_samples() -> u64 {
    10_000
}
fn default_traces() -> usize {
    16
}
fn default_b0() -> TargetBall {
    TargetBall { center: 0.5, radius: 0.5 }
}
fn default_dim_c() -> f64 {
    10.0
}
fn default_ceiling() -> f64 {
    100.0
}
fn default_tol() -> f64 {
    0.005
}
fn default_dim_samples() -> u64 {
    2_000
}
fn default_agreement() -> f64 {
    0.1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(depth) = o.depth {
            self.run.depth = depth;
        }
        if let Some(c) = &o.c_list {
            self.run.c_list = c.clone();
        }
        if let Some(samples) = o.samples {
            self.run.samples = samples;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let AhlforsSpace::CantorTernary { depth } = self.space {
            AhlforsSpace::cantor(depth).map_err(|e| usage("space.depth", e))?;
        }
        self.sequence.validate().map_err(|e| usage("sequence", e))?;
        self.f_spec().map_err(|e| usage("f", e))?;
        self.terms()?;
        let run = &self.run;
        if run.c_list.is_empty() {
            return Err(usage("run.c_list", "must not be empty"));
        }
        if let Some(c) = run.c_list.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(usage("run.c_list", format!("C must be positive, got {c}")));
        }
        if run.n == 0 {
            return Err(usage("run.n", "indices start at 1"));
        }
        if run.depth == 0 {
            return Err(usage("run.depth", "depth must be at least 1"));
        }
        self.b0().map_err(|e| usage("run.b0", e))?;
        if let Some(d) = &self.dimension {
            let [lo, hi] = d.s_range;
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(usage("dimension.s_range", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
            }
            if !(d.c > 0.0 && d.c.is_finite()) {
                return Err(usage("dimension.c", "C must be positive"));
            }
            if d.depth == 0 {
                return Err(usage("dimension.depth", "depth must be at least 1"));
            }
            if d.tol.is_nan() || d.tol <= 0.0 {
                return Err(usage("dimension.tol", "tolerance must be positive"));
            }
            if d.ceiling.is_nan() || d.ceiling <= 0.0 {
                return Err(usage("dimension.ceiling", "ceiling must be positive"));
            }
        }
        Ok(())
    }

    pub fn f_spec(&self) -> Result<DimensionFunction, limsup_core::dimfn::DimFnError> {
        DimensionFunction::new(self.f.kappa, self.f.s, self.f.t)
    }

    pub fn b0(&self) -> Result<Ball, limsup_core::geometry::GeometryError> {
        Ball::new(self.run.b0.center, self.run.b0.radius)
    }

    /// Number of balls to materialize.
    pub fn terms(&self) -> Result<usize, CliError> {
        let n = match (&self.sequence, self.run.terms, self.run.q_max, self.run.k_max) {
            (_, Some(t), None, None) => t,
            (BallSequence::RationalApprox { .. }, None, Some(q), None) => BallSequence::rational_count(q),
            (BallSequence::Badic { base, .. }, None, None, Some(k)) => BallSequence::badic_count(*base, k),
            (_, None, None, None) => return Err(usage("run.terms", "missing")),
            _ => return Err(usage("run.terms", "give exactly one of terms, q_max (rational), k_max (b-adic)")),
        };
        if n == 0 {
            return Err(usage("run.terms", "must be positive"));
        }
        Ok(n)
    }
}
