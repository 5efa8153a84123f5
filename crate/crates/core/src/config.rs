//! The JSON run configuration shared by every command.
//!
//! ```json
//! {
//!   "domain": {"kind": "circle", "cx": 6, "cy": 6, "r": 2},
//!   "regressors": [{"expr": "s^2+t^2"}, {"expr": "s+t"}, {"expr": "s*t"}],
//!   "model": {"kind": "wiener"},
//!   "rectangle": {"s_max": 8, "t_max": 8},
//!   "true_m": [5, 8, 3]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{default_basis_quad, ExperimentConfig, Profile};
use crate::geometry::{DomainConfig, ValidatedDomain, DEFAULT_GRID_POINTS};
use crate::quadrature::QuadConfig;
use crate::random_fields::FieldModel;
use crate::regressors::{RegressorSet, RegressorSpec};
use crate::stochastic_integrals::{Method, StochIntConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rectangle {
    pub s_max: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegralSection {
    pub method: Method,
    pub fd_step: f64,
}

impl Default for IntegralSection {
    fn default() -> Self {
        let d = StochIntConfig::default();
        Self {
            method: d.method,
            fd_step: d.fd_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Overrides the profile's replication count.
    pub replications: Option<usize>,
    /// Overrides the profile's truncation orders.
    pub n_sweep: Option<Vec<usize>>,
    pub profile: Profile,
    pub base_seed: u64,
    pub workers: usize,
    pub noise_scale: f64,
    pub basis_quadrature: QuadConfig,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            replications: None,
            n_sweep: None,
            profile: Profile::Desk,
            base_seed: 20240101,
            workers: 0,
            noise_scale: 1.0,
            basis_quadrature: default_basis_quad(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    /// KL truncation order of simulated fields.
    pub n: usize,
    pub noise_scale: f64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self { n: 50, noise_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub regressors: Vec<RegressorSpec>,
    #[serde(default = "wiener")]
    pub model: FieldModel,
    /// Simulation rectangle `[0,S]×[0,T]`; defaults to the smallest one
    /// containing the domain.
    #[serde(default)]
    pub rectangle: Option<Rectangle>,
    #[serde(default)]
    pub true_m: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature: QuadConfig,
    #[serde(default)]
    pub integrals: IntegralSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub estimate: EstimateSection,
}

fn wiener() -> FieldModel {
    FieldModel::Wiener
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn domain(&self) -> Result<ValidatedDomain> {
        self.domain.build()?.validate(DEFAULT_GRID_POINTS)
    }

    pub fn regressors(&self) -> Result<RegressorSet> {
        RegressorSet::from_specs(&self.regressors)
    }

    pub fn rectangle(&self, domain: &ValidatedDomain) -> Rectangle {
        self.rectangle.unwrap_or_else(|| {
            let (_, s1, _, t1) = domain.bounding_box();
            Rectangle { s_max: s1, t_max: t1 }
        })
    }

    pub fn true_m(&self) -> Result<Vec<f64>> {
        let m = self
            .true_m
            .clone()
            .ok_or_else(|| Error::InvalidArgument("config has no `true_m`".into()))?;
        if m.len() != self.regressors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} regressors but {} true coefficients",
                self.regressors.len(),
                m.len()
            )));
        }
        Ok(m)
    }

    pub fn stoch(&self) -> StochIntConfig {
        StochIntConfig {
            method: self.integrals.method,
            fd_step: self.integrals.fd_step,
            quad: self.quadrature,
        }
    }

    /// The experiment described by this config. A `profile` given here wins
    /// over everything; otherwise explicit counts win over the section's
    /// own profile.
    pub fn experiment_config(&self, profile: Option<Profile>) -> Result<ExperimentConfig> {
        let domain = self.domain()?;
        let rect = self.rectangle(&domain);
        let sec = &self.experiment;
        let (replications, n_sweep) = match profile {
            Some(p) => (p.replications(), p.n_sweep()),
            None => (
                sec.replications.unwrap_or(sec.profile.replications()),
                sec.n_sweep.clone().unwrap_or_else(|| sec.profile.n_sweep()),
            ),
        };
        Ok(ExperimentConfig {
            model: self.model,
            domain: self.domain.clone(),
            regressors: self.regressors.clone(),
            true_m: self.true_m()?,
            replications,
            n_sweep,
            s_max: rect.s_max,
            t_max: rect.t_max,
            base_seed: sec.base_seed,
            workers: sec.workers,
            noise_scale: sec.noise_scale,
            quad: self.quadrature,
            basis_quad: sec.basis_quadrature,
        })
    }
}
