//! Numerical thresholds shared by the analysis and integration code.
//!
//! Defaults can be overridden at runtime through the `GAUGE_RIG_TOL`
//! environment variable, a comma separated list of `name=value` pairs, e.g.
//! `GAUGE_RIG_TOL=rank=1e-12,projection_gate=5e-2`.

use crate::error::{Error, Result};

pub const ENV_VAR: &str = "GAUGE_RIG_TOL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular value cutoff; scaled by sigma_max * edge_count.
    pub rank: f64,
    /// Relative compatibility tolerance of `A x = b` against self-stresses.
    pub solvability: f64,
    /// Absolute limit on the tangency compatibility residual.
    pub tangency: f64,
    /// Largest relative length violation accepted by the projection.
    pub projection_gate: f64,
    /// Target relative length residual of the position projection.
    pub projection_target: f64,
    pub projection_max_iterations: usize,
    /// Largest residual tolerated when preparing initial data.
    pub initial_data: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-10,
            solvability: 1e-9,
            tangency: 1e-7,
            projection_gate: 1e-2,
            projection_target: 1e-14,
            projection_max_iterations: 50,
            initial_data: 1e-12,
        }
    }
}

impl Tolerances {
    /// Defaults with the environment override applied, if present.
    pub fn from_env() -> Result<Self> {
        match std::env::var(ENV_VAR) {
            Ok(spec) => Self::default().with_overrides(&spec),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("{ENV_VAR}: expected name=value, got `{item}`")))?;
            let key = key.trim();
            let value = value.trim();
            let bad = || Error::Parse(format!("{ENV_VAR}: bad value `{value}` for `{key}`"));
            let float = || -> Result<f64> {
                let v: f64 = value.parse().map_err(|_| bad())?;
                if v.is_finite() && v > 0.0 {
                    Ok(v)
                } else {
                    Err(bad())
                }
            };
            match key {
                "rank" => self.rank = float()?,
                "solvability" => self.solvability = float()?,
                "tangency" => self.tangency = float()?,
                "projection_gate" => self.projection_gate = float()?,
                "projection_target" => self.projection_target = float()?,
                "initial_data" => self.initial_data = float()?,
                "projection_max_iterations" => {
                    self.projection_max_iterations = value.parse().map_err(|_| bad())?
                }
                _ => return Err(Error::Parse(format!("{ENV_VAR}: unknown tolerance `{key}`"))),
            }
        }
        Ok(self)
    }
}
