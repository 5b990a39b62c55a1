//! Run configuration: every tunable of the pipeline in one TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::correspondence::MatchParams;
use crate::error::{Error, Result};
use crate::gto::GtoParams;
use crate::hand::{default_barrett_like_model, GraspMode, HandModel};
use crate::ipfo::FitParams;
use crate::mdisf::{MdisfParams, PlanParams, PyramidParams, SeedParams};
use crate::quality::QualityParams;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming a config file when `--config` is not given.
pub const CONFIG_ENV: &str = "FITGRASP_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub rng_seed: u64,
    /// Number of MDISF seeds per scene.
    pub seeds: usize,
    pub rounds: usize,
    /// Candidates handed to trajectory optimization.
    pub top_k: usize,
    pub mode: GraspMode,
    pub contact_tolerance: f64,
    /// Hand model file; the built-in hand when absent.
    pub hand: Option<PathBuf>,
    pub fit: FitParams,
    pub pyramid: PyramidParams,
    pub matching: MatchParams,
    pub seeding: SeedParams,
    pub quality: QualityParams,
    pub gto: GtoParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plan = PlanParams::default();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            rng_seed: plan.rng_seed,
            seeds: 10,
            rounds: plan.rounds,
            top_k: 5,
            mode: plan.mdisf.mode,
            contact_tolerance: plan.mdisf.contact_tolerance,
            hand: None,
            fit: plan.mdisf.fit,
            pyramid: plan.mdisf.pyramid,
            matching: plan.mdisf.matching,
            seeding: plan.seeding,
            quality: plan.quality,
            gto: GtoParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: config.schema_version, expected: CONFIG_SCHEMA_VERSION });
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Config from `path`, else from the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(p),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn hand_model(&self) -> Result<HandModel> {
        match &self.hand {
            Some(p) => HandModel::load(p),
            None => Ok(default_barrett_like_model()),
        }
    }

    pub fn validate(&self, model: &HandModel) -> Result<()> {
        self.fit.validate()?;
        self.pyramid.validate()?;
        self.quality.validate()?;
        self.gto.validate(model.dof())?;
        let s = &self.seeding;
        let ok = self.rounds >= 1
            && self.contact_tolerance >= 0.0
            && self.matching.reject_radius > 0.0
            && s.offset_min <= s.offset_max
            && (0.0..=1.0).contains(&s.flex_fraction)
            && (0.0..=1.0).contains(&s.spread_fraction)
            && (0.0..=1.0).contains(&s.floor)
            && s.beta >= 0.0;
        if !ok {
            return Err(Error::Config("invalid rounds, tolerances, matching or seeding parameters".into()));
        }
        Ok(())
    }

    pub fn mdisf_params(&self) -> MdisfParams {
        MdisfParams {
            fit: self.fit,
            pyramid: self.pyramid,
            matching: self.matching,
            mode: self.mode,
            contact_tolerance: self.contact_tolerance,
        }
    }

    pub fn plan_params(&self) -> PlanParams {
        PlanParams {
            mdisf: self.mdisf_params(),
            seeding: self.seeding,
            quality: self.quality,
            rounds: self.rounds,
            rng_seed: self.rng_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FROZEN: &str = include_str!("../tests/fixtures/default_config.toml");

    #[test]
    fn defaults_match_frozen_fixture() {
        let frozen = RunConfig::from_toml(FROZEN).unwrap();
        assert_eq!(frozen, RunConfig::default());
        assert_eq!(RunConfig::default().to_toml().unwrap(), FROZEN);
    }

    #[test]
    fn published_parameter_values() {
        let c = RunConfig::from_toml(FROZEN).unwrap();
        assert_eq!(c.fit.alpha, 0.03);
        assert_eq!(c.fit.delta, 1e-5);
        assert_eq!(c.fit.t_max, 20);
        assert_eq!((c.pyramid.levels, c.pyramid.i0, c.pyramid.eps0), (4, 200, 0.02));
        assert_eq!(c.mode, GraspMode::Power);
        let g = &c.gto;
        assert_eq!((g.samples, g.d_check, g.d_safe), (30, 0.03, 0.01));
        assert_eq!(g.step_bound, vec![0.4; 4]);
        assert_eq!(g.trust_region, vec![0.2, 0.2, 0.2, 0.4]);
        assert_eq!((g.c0, g.mu, g.max_outer), (1.0, 2.0, 20));
        let q = &c.quality.coefficients;
        assert_eq!((q.volume, q.condition, q.inclusion), (1.0, 3.0, 11.0));
        assert_eq!(c.top_k, 5);
        let model = c.hand_model().unwrap();
        assert_eq!((model.num_samples(), model.num_boxes()), (450, 7));
        c.validate(&model).unwrap();
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = RunConfig::from_toml("schema_version = 1\nseeds = 3\n[gto]\nsamples = 12\n").unwrap();
        assert_eq!(c.seeds, 3);
        assert_eq!(c.gto.samples, 12);
        assert_eq!(c.gto.d_safe, 0.01);
        assert_eq!(c.fit, FitParams::default());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::from_toml("seeds = 3\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[gto]\nsample = 3\n").is_err());
        assert!(matches!(
            RunConfig::from_toml("schema_version = 9\n"),
            Err(Error::SchemaVersion { found: 9, .. })
        ));
    }

    #[test]
    fn validation_catches_bad_values() {
        let model = default_barrett_like_model();
        let mut c = RunConfig::default();
        c.gto.mu = 0.5;
        assert!(c.validate(&model).is_err());
        let mut c = RunConfig::default();
        c.seeding.floor = 2.0;
        assert!(c.validate(&model).is_err());
        let mut c = RunConfig::default();
        c.pyramid.levels = 0;
        assert!(c.validate(&model).is_err());
    }

    #[test]
    fn plan_params_round_trip() {
        let c = RunConfig::default();
        assert_eq!(c.plan_params(), PlanParams::default());
    }
}
