//! The run configuration: one TOML document with a section per module.

use std::path::{Path, PathBuf};

use ability_vi::ability::PriorSpec;
use ability_vi::goals::{FeatureSpec, McmcConfig, ModelKind, PointEstimate};
use ability_vi::synth::SynthConfig;
use ability_vi::variational::OptimizerConfig;
use serde::{Deserialize, Deserializer, Serialize};

use crate::run::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cli: CliSection,
    #[serde(rename = "event-data")]
    pub event_data: EventDataSection,
    #[serde(rename = "ability-model")]
    pub ability_model: AbilitySection,
    pub variational: OptimizerConfig,
    #[serde(rename = "posterior-analytics")]
    pub analytics: AnalyticsSection,
    #[serde(rename = "goals-hier")]
    pub goals: GoalsSection,
    pub synth: SynthSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliSection {
    /// Run directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    /// Seed for stochastic commands; `--seed` takes precedence.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventDataSection {
    pub events: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub appearances: Option<PathBuf>,
    /// Count columns to aggregate; every known column when absent.
    pub columns: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbilitySection {
    pub pair: Option<[String; 2]>,
    pub prior_m: f64,
    pub prior_s: f64,
}

impl Default for AbilitySection {
    fn default() -> Self {
        let prior = PriorSpec::default();
        AbilitySection {
            pair: None,
            prior_m: prior.m,
            prior_s: prior.s,
        }
    }
}

impl AbilitySection {
    pub fn prior(&self) -> PriorSpec {
        PriorSpec {
            m: self.prior_m,
            s: self.prior_s,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsSection {
    pub top_n: usize,
    /// Posterior predictive draws behind the simulated box statistics.
    pub n_draws: usize,
}

impl Default for AnalyticsSection {
    fn default() -> Self {
        AnalyticsSection {
            top_n: 10,
            n_draws: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalsSection {
    pub model: ModelKind,
    /// Attack event types of the lineup term; `defence[i]` pairs with
    /// `attack[i]` and both come from the fit of that pair.
    pub attack: Vec<String>,
    pub defence: Vec<String>,
    pub point: PointEstimate,
    pub threshold: f64,
    pub mcmc: McmcConfig,
}

impl Default for GoalsSection {
    fn default() -> Self {
        let multi = FeatureSpec::multi();
        GoalsSection {
            model: ModelKind::Baseline,
            attack: multi.attack,
            defence: multi.defence,
            point: PointEstimate::Mean,
            threshold: 2.5,
            mcmc: McmcConfig::default(),
        }
    }
}

impl GoalsSection {
    pub fn features(&self) -> Result<FeatureSpec, CliError> {
        if self.attack.len() != self.defence.len() || self.attack.is_empty() {
            return Err(CliError::Validation(format!(
                "[goals-hier] attack and defence must list the same positive number of event types, got {} and {}",
                self.attack.len(),
                self.defence.len()
            )));
        }
        Ok(FeatureSpec {
            attack: self.attack.clone(),
            defence: self.defence.clone(),
        })
    }

    pub fn pairs(&self) -> Vec<[String; 2]> {
        self.attack
            .iter()
            .zip(&self.defence)
            .map(|(a, d)| [a.clone(), d.clone()])
            .collect()
    }
}

/// `[synth]`: the generator settings plus whether scores include the true
/// lineup term.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SynthSection {
    pub lineup_effect: bool,
    #[serde(flatten)]
    pub config: SynthConfig,
}

impl<'de> Deserialize<'de> for SynthSection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(d)?;
        let lineup_effect = match table.remove("lineup_effect") {
            None => false,
            Some(toml::Value::Boolean(b)) => b,
            Some(other) => {
                return Err(serde::de::Error::custom(format!(
                    "lineup_effect must be a boolean, got {other}"
                )))
            }
        };
        let config = table.try_into().map_err(serde::de::Error::custom)?;
        Ok(SynthSection { lineup_effect, config })
    }
}

impl SynthSection {
    /// The lineup term of the generated scores: each pair's first type
    /// attacks, its second defends.
    pub fn features(&self) -> Option<FeatureSpec> {
        self.lineup_effect.then(|| FeatureSpec {
            attack: self.config.pairs.iter().map(|p| p.events[0].clone()).collect(),
            defence: self.config.pairs.iter().map(|p| p.events[1].clone()).collect(),
        })
    }
}

/// Reads the configuration, resolving relative input paths against the
/// file's directory. Returns the config and the raw bytes it was read from.
pub fn load(path: Option<&Path>) -> Result<(RunConfig, Vec<u8>), CliError> {
    let Some(path) = path else {
        return Ok((RunConfig::default(), Vec::new()));
    };
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Validation(format!("config {} is not UTF-8", path.display())))?;
    let mut config: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(p) = p {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    };
    resolve(&mut config.event_data.events);
    resolve(&mut config.event_data.fixtures);
    resolve(&mut config.event_data.appearances);
    resolve(&mut config.cli.out);
    Ok((config, bytes))
}
