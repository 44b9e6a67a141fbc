//! Run configuration, read from a flat `key = value` file.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligned::Regime;
use crate::slice::SolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {key} = {value}: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub base_grid_size: usize,
    pub n_t: usize,
    /// Base sphere radius, 1 or 0.5.
    pub radius: f64,
    /// Largest accepted sup norm of a field handed to the exponential maps.
    pub field_bound: f64,
    pub run_bound: f64,
    pub verticality_bound: f64,
    pub spectral_tol: f64,
    pub solver_tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub landscape_half_width: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            base_grid_size: 512,
            n_t: 64,
            radius: 1.0,
            field_bound: 0.3,
            run_bound: FRAC_PI_4,
            verticality_bound: 0.5,
            spectral_tol: 1e-10,
            solver_tol: 1e-10,
            max_iterations: 50,
            seed: 42,
            landscape_half_width: 0.2,
        }
    }
}

fn invalid(key: &'static str, value: impl ToString, reason: &'static str) -> ConfigError {
    ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason,
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_t < 16 || !self.n_t.is_power_of_two() {
            return Err(invalid("n_t", self.n_t, "must be a power of two >= 16"));
        }
        if self.base_grid_size < 2 {
            return Err(invalid("base_grid_size", self.base_grid_size, "must be at least 2"));
        }
        if self.radius != 1.0 && self.radius != 0.5 {
            return Err(invalid("radius", self.radius, "must be 1 or 0.5"));
        }
        let positive = [
            ("field_bound", self.field_bound),
            ("spectral_tol", self.spectral_tol),
            ("solver_tol", self.solver_tol),
            ("landscape_half_width", self.landscape_half_width),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, v, "must be positive"));
            }
        }
        if !(self.run_bound > 0.0 && self.run_bound <= FRAC_PI_2) {
            return Err(invalid("run_bound", self.run_bound, "must lie in (0, pi/2]"));
        }
        if !(self.verticality_bound > 0.0 && self.verticality_bound < FRAC_PI_2) {
            return Err(invalid("verticality_bound", self.verticality_bound, "must lie in (0, pi/2)"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", 0, "must be positive"));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        Regime {
            field_bound: self.field_bound,
            run_bound: self.run_bound,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            n_t: self.n_t,
            tolerance: self.solver_tol,
            max_iterations: self.max_iterations,
            run_bound: self.run_bound,
            verticality_bound: self.verticality_bound,
            ..SolverOptions::default()
        }
    }

    /// Report header: one `# key = value` line per setting.
    pub fn echo(&self) -> String {
        let text = toml::to_string(self).expect("flat config serializes");
        let mut out = String::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let _ = writeln!(out, "# {line}");
        }
        out
    }
}
