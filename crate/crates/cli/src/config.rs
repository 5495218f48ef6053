//! Run configuration, read from JSON. Every section is optional and falls
//! back to its defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use torsionlab_core::adiabatic::ExperimentConfig;
use torsionlab_core::torsion::TorsionOptions;
use torsionlab_core::{c64, Phi};

use crate::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the sample points drawn by `identities`; `--seed` overrides it.
    pub seed: u64,
    pub validate: ValidateConfig,
    pub identities: IdentitiesConfig,
    pub torsion: TorsionConfig,
    pub integration: IntegrationConfig,
    pub adiabatic: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Points per axis for the metric positivity scan.
    pub positivity_grid: usize,
    /// Points per axis for the flatness residuals.
    pub residual_grid: usize,
    /// Points per axis for the acyclicity scan.
    pub acyclicity_grid: usize,
    pub tolerance: f64,
    /// Smallest accepted eigenvalue of `(v + v*)²`.
    pub acyclicity_floor: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            positivity_grid: 64,
            residual_grid: 16,
            acyclicity_grid: 16,
            tolerance: 1e-10,
            acyclicity_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    /// Number of random base points.
    pub points: usize,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub tolerance: f64,
    /// Times `t` for the variant-torsion identity; empty skips it.
    pub variant_times: Vec<f64>,
    pub variant_tolerance: f64,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self {
            points: 10,
            u: vec![0.25, 1.0, 4.0, 16.0],
            r: vec![0.0, 0.5, 1.0],
            tolerance: 1e-8,
            variant_times: vec![0.5, 1.0, 2.0],
            variant_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorsionConfig {
    /// Points per axis of the base grid.
    pub grid: usize,
    pub r: Vec<f64>,
    pub degree0_tolerance: f64,
    /// Include the comparison with the Bismut-Lott analog in degree 2.
    pub bl_comparison: bool,
    pub ratio_tolerance: f64,
}

impl Default for TorsionConfig {
    fn default() -> Self {
        Self {
            grid: 6,
            r: vec![0.0],
            degree0_tolerance: 1e-8,
            bl_comparison: true,
            ratio_tolerance: 1e-4,
        }
    }
}

/// Settings of the regularized time integrals.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    pub t_fit: f64,
    pub window: [f64; 2],
    pub exponents: Vec<f64>,
    pub samples: usize,
    pub fit_tolerance: f64,
    pub decay_margin: f64,
    /// Square root of `√−1` used by the normalization, as `[re, im]`.
    pub sqrt_i: [f64; 2],
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        let o = TorsionOptions::default();
        let root = o.phi.sqrt_i();
        Self {
            t_fit: o.t_fit,
            window: [o.window.0, o.window.1],
            exponents: o.exponents,
            samples: o.samples,
            fit_tolerance: o.fit_tol,
            decay_margin: o.decay_margin,
            sqrt_i: [root.re, root.im],
        }
    }
}

impl IntegrationConfig {
    pub fn options(&self) -> Result<TorsionOptions, CliError> {
        let phi = Phi::new(c64::new(self.sqrt_i[0], self.sqrt_i[1])).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(TorsionOptions {
            t_fit: self.t_fit,
            window: (self.window[0], self.window[1]),
            exponents: self.exponents.clone(),
            samples: self.samples,
            fit_tol: self.fit_tolerance,
            decay_margin: self.decay_margin,
            phi,
            ..TorsionOptions::default()
        })
    }
}

fn require(ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(what.to_string()))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Range checks the schema cannot express through types alone.
    pub fn check(&self) -> Result<(), CliError> {
        let v = &self.validate;
        require(v.positivity_grid > 0 && v.residual_grid > 0 && v.acyclicity_grid > 0, "validate grids must be positive")?;
        require(positive(v.tolerance), "validate.tolerance must be positive")?;
        require(v.acyclicity_floor >= 0.0, "validate.acyclicity_floor must be non-negative")?;

        let i = &self.identities;
        require(i.points > 0, "identities.points must be positive")?;
        require(!i.u.is_empty() && i.u.iter().all(|&u| positive(u)), "identities.u must be non-empty and positive")?;
        require(!i.r.is_empty() && i.r.iter().all(|r| r.is_finite()), "identities.r must be non-empty and finite")?;
        require(i.variant_times.iter().all(|&t| positive(t)), "identities.variant_times must be positive")?;
        require(positive(i.tolerance) && positive(i.variant_tolerance), "identity tolerances must be positive")?;

        let t = &self.torsion;
        require(t.grid > 0, "torsion.grid must be positive")?;
        require(!t.r.is_empty() && t.r.iter().all(|r| r.is_finite()), "torsion.r must be non-empty and finite")?;
        require(positive(t.degree0_tolerance) && positive(t.ratio_tolerance), "torsion tolerances must be positive")?;

        let q = &self.integration;
        require(positive(q.t_fit), "integration.t_fit must be positive")?;
        require(positive(q.window[0]) && q.window[1] > q.window[0], "integration.window must be an increasing pair")?;
        require(q.samples >= q.exponents.len() && !q.exponents.is_empty(), "integration.samples must cover the exponents")?;
        require(positive(q.fit_tolerance) && positive(q.decay_margin), "integration tolerances must be positive")?;

        let a = &self.adiabatic;
        require(a.discretization.n >= 2, "adiabatic.discretization.n must be at least 2")?;
        require(!a.schedule.is_empty() && a.schedule.iter().all(|&u| positive(u)), "adiabatic.schedule must be positive")?;
        require(a.schedule.windows(2).all(|w| w[1] > w[0]), "adiabatic.schedule must be ascending")?;
        require(a.rhs_grid > 0, "adiabatic.rhs_grid must be positive")?;
        require(positive(a.tolerance) && positive(a.error_floor), "adiabatic tolerances must be positive")?;
        require(a.trace_times.iter().all(|&t| positive(t)), "adiabatic.trace_times must be positive")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.torsion.grid, 6);
        assert_eq!(c.adiabatic.schedule, vec![16.0, 64.0, 256.0]);
    }

    #[test]
    fn range_checks_reject_bad_values() {
        assert!(RunConfig::from_json(r#"{"adiabatic": {"schedule": [4.0, 2.0]}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"integration": {"window": [1e-3, 1e-5]}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"identities": {"u": []}}"#).is_err());
    }

    #[test]
    fn integration_options_round_trip() {
        let o = IntegrationConfig::default().options().unwrap();
        assert_eq!(o.samples, TorsionOptions::default().samples);
        assert!(IntegrationConfig { sqrt_i: [1.0, 0.0], ..Default::default() }.options().is_err());
    }
}
