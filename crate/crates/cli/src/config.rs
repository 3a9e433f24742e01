//! Experiment configuration: one TOML file per experiment, overridable by flags.

use serde::{Deserialize, Serialize};

use flambe_core::env::EnvConfig;
use flambe_core::flambe::hyper::HyperMode;
use flambe_core::planner::PlannerConfig;
use flambe_core::smoothness::SmoothnessProfile;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment and hypothesis-class (decoy) specification.
    pub env: EnvConfig,
    pub profile: ProfileSection,
    pub hyper: HyperSection,
    pub planner: PlannerConfig,
    pub eval: EvalSection,
    pub seeds: SeedSection,
    pub output: OutputSection,
}

/// Smoothness exponents and constants; `m` comes from the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub alpha_e: f64,
    pub l_e: f64,
    pub alpha_t: f64,
    pub l_t: f64,
    pub alpha_r: f64,
    pub l_r: f64,
}

impl ProfileSection {
    pub fn with_m(&self, m: usize) -> SmoothnessProfile {
        SmoothnessProfile {
            m,
            alpha_e: self.alpha_e,
            l_e: self.l_e,
            alpha_t: self.alpha_t,
            l_t: self.l_t,
            alpha_r: self.alpha_r,
            l_r: self.l_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum HyperSection {
    /// Hand-chosen, runnable values; `β` comes from the planner section.
    Practical { n: usize, j_max: usize, k: f64 },
    /// Values from the printed formulas.
    Theoretical {
        eps: f64,
        delta: f64,
        #[serde(default = "one")]
        c_u: f64,
        policy: HyperMode,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Single-step sparse rewards.
    pub n_rewards: usize,
    pub n_grid_policies: usize,
    pub max_density: f64,
    pub policy_grid: usize,
    /// Smoothed greedy policies.
    pub n_smoothed: usize,
    pub smoothing_k: f64,
    pub quad_g: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub base: u64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Relative paths resolve against the output root.
    pub dir: Option<String>,
    /// Also write JSON mirrors of the summary tables.
    #[serde(default)]
    pub json: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let env = EnvConfig::small(7);
        Self {
            profile: ProfileSection {
                alpha_e: 1.0,
                l_e: 1.0,
                alpha_t: 1.0,
                l_t: 1.0,
                alpha_r: 1.0,
                l_r: 1.0,
            },
            hyper: HyperSection::Practical {
                n: 500,
                j_max: 5,
                k: 4.0,
            },
            planner: PlannerConfig::new(0.5, 32),
            eval: EvalSection {
                n_rewards: 10,
                n_grid_policies: 6,
                max_density: 4.0,
                policy_grid: 32,
                n_smoothed: 6,
                smoothing_k: 16.0,
                quad_g: 64,
            },
            seeds: SeedSection {
                base: env.seed,
                repetitions: 1,
            },
            output: OutputSection {
                dir: None,
                json: false,
            },
            env,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.env.validate().map_err(|e| CliError::Usage(format!("env: {e}")))?;
        self.profile
            .with_m(self.env.m)
            .validate()
            .map_err(|e| CliError::Usage(format!("profile: {e}")))?;
        if self.seeds.repetitions == 0 {
            return Err(CliError::Usage("seeds.repetitions: must be at least 1".into()));
        }
        if self.planner.g == 0 || self.eval.quad_g == 0 || self.eval.policy_grid == 0 {
            return Err(CliError::Usage("planner.g, eval.quad_g and eval.policy_grid must be positive".into()));
        }
        if self.eval.quad_g % self.eval.policy_grid != 0 {
            return Err(CliError::Usage("eval.quad_g: must be a multiple of eval.policy_grid".into()));
        }
        Ok(())
    }
}
