//! The blocked train/predict evaluation: fit on all fixtures before a block,
//! predict the block's fixtures between already-seen teams.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{FixtureId, TeamId};

use super::{
    f_delta, mcmc_fit, predict_over_under, AbilityFeatures, AbilityTable, FeatureSpec,
    MatchResult, McmcConfig, PointEstimate,
};

/// Fixture blocks in chronological order. Block 0 is training only; every
/// later block is predicted from a fit on all earlier blocks, restricted to
/// fixtures whose teams both appear in those earlier blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub blocks: Vec<Vec<FixtureId>>,
    /// `predict[b]` for b ≥ 1; `predict[0]` is empty.
    pub predict: Vec<Vec<FixtureId>>,
}

impl BlockSchedule {
    pub fn new(
        blocks: Vec<Vec<FixtureId>>,
        teams: &BTreeMap<FixtureId, (TeamId, TeamId)>,
    ) -> Result<Self> {
        let lookup = |f: &FixtureId| {
            teams
                .get(f)
                .copied()
                .ok_or_else(|| Error::Referential(format!("fixture {f} has no teams")))
        };
        let mut seen: BTreeSet<TeamId> = BTreeSet::new();
        let mut predict = Vec::with_capacity(blocks.len());
        let mut all: BTreeSet<FixtureId> = BTreeSet::new();
        for (b, block) in blocks.iter().enumerate() {
            let mut keep = Vec::new();
            for f in block {
                if !all.insert(*f) {
                    return Err(Error::Inconsistent(format!("fixture {f} is in two blocks")));
                }
                let (h, a) = lookup(f)?;
                if b > 0 && seen.contains(&h) && seen.contains(&a) {
                    keep.push(*f);
                }
            }
            if b > 0 {
                let dropped = block.len() - keep.len();
                if dropped > 0 {
                    tracing::info!(block = b, dropped, "fixtures with unseen teams left out of prediction");
                }
            }
            predict.push(keep);
            for f in block {
                let (h, a) = lookup(f)?;
                seen.insert(h);
                seen.insert(a);
            }
        }
        Ok(BlockSchedule { blocks, predict })
    }

    /// Block 0 holds the first `first` fixtures; the rest are cut into
    /// consecutive chunks of the given sizes.
    pub fn from_order(
        fixtures: &[FixtureId],
        first: usize,
        chunks: &[usize],
        teams: &BTreeMap<FixtureId, (TeamId, TeamId)>,
    ) -> Result<Self> {
        let needed = first + chunks.iter().sum::<usize>();
        if fixtures.len() < needed {
            return Err(Error::Config(format!(
                "block sizes need {needed} fixtures, only {} available",
                fixtures.len()
            )));
        }
        let mut blocks = vec![fixtures[..first].to_vec()];
        let mut at = first;
        for &c in chunks {
            blocks.push(fixtures[at..at + c].to_vec());
            at += c;
        }
        Self::new(blocks, teams)
    }

    /// Blocks from integer labels 0, 1, 2, ... in label order, fixtures in
    /// the given order within each block.
    pub fn from_labels(
        labelled: &[(FixtureId, String)],
        teams: &BTreeMap<FixtureId, (TeamId, TeamId)>,
    ) -> Result<Self> {
        let mut by_label: BTreeMap<usize, Vec<FixtureId>> = BTreeMap::new();
        for (f, label) in labelled {
            let b: usize = label.trim().parse().map_err(|_| {
                Error::Config(format!("fixture {f}: block label {label:?} is not an integer"))
            })?;
            by_label.entry(b).or_default().push(*f);
        }
        let blocks: Vec<Vec<FixtureId>> = by_label.values().cloned().collect();
        if by_label.keys().copied().ne(0..blocks.len()) {
            return Err(Error::Config("block labels must run 0, 1, 2, ... without gaps".into()));
        }
        Self::new(blocks, teams)
    }

    pub fn prediction_sizes(&self) -> Vec<usize> {
        self.predict.iter().skip(1).map(Vec::len).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Extended,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Extended => "extended",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "extended" => Ok(ModelKind::Extended),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mcmc: McmcConfig,
    pub features: FeatureSpec,
    pub point: PointEstimate,
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mcmc: McmcConfig::default(),
            features: FeatureSpec::multi(),
            point: PointEstimate::Mean,
            threshold: 2.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPrediction {
    pub fixture: FixtureId,
    pub block: usize,
    pub model: ModelKind,
    pub p_over: f64,
    pub actual_over: bool,
}

/// Lineup terms for a set of fixtures.
pub fn features_for(
    fixtures: &[&MatchResult],
    abilities: &AbilityTable,
    config: &ExperimentConfig,
) -> Result<Vec<AbilityFeatures>> {
    fixtures
        .iter()
        .map(|m| f_delta(m, abilities, &config.features, config.point))
        .collect()
}

/// Runs every prediction block. For the extended model `abilities[b]` must
/// hold factors fitted on blocks 0..=b; prediction block b uses
/// `abilities[b - 1]` for both its training and its predicted fixtures. The
/// sampler seed of block b is the configured seed plus b, identical for both
/// models.
pub fn run_block_experiment(
    data: &[MatchResult],
    schedule: &BlockSchedule,
    abilities: Option<&[AbilityTable]>,
    model: ModelKind,
    config: &ExperimentConfig,
) -> Result<Vec<BlockPrediction>> {
    let by_id: BTreeMap<FixtureId, &MatchResult> = data.iter().map(|m| (m.fixture, m)).collect();
    let get = |f: &FixtureId| {
        by_id
            .get(f)
            .copied()
            .ok_or_else(|| Error::Referential(format!("no result for fixture {f}")))
    };
    let mut out = Vec::new();
    for b in 1..schedule.blocks.len() {
        let train: Vec<&MatchResult> = schedule.blocks[..b]
            .iter()
            .flatten()
            .map(get)
            .collect::<Result<_>>()?;
        let test: Vec<&MatchResult> = schedule.predict[b].iter().map(get).collect::<Result<_>>()?;
        if test.is_empty() {
            continue;
        }
        let table = match model {
            ModelKind::Baseline => None,
            ModelKind::Extended => {
                let tables = abilities.ok_or_else(|| {
                    Error::Config("the extended model needs fitted abilities".into())
                })?;
                Some(tables.get(b - 1).ok_or_else(|| {
                    Error::Config(format!("no fitted abilities for blocks 0..={}", b - 1))
                })?)
            }
        };
        let train_features = table.map(|t| features_for(&train, t, config)).transpose()?;
        let test_features = table.map(|t| features_for(&test, t, config)).transpose()?;

        let teams: BTreeSet<TeamId> = train.iter().flat_map(|m| [m.home_team, m.away_team]).collect();
        let owned: Vec<MatchResult> = train.iter().map(|m| (*m).clone()).collect();
        let mcmc = McmcConfig {
            seed: config.mcmc.seed.wrapping_add(b as u64),
            ..config.mcmc.clone()
        };
        let fit = mcmc_fit(&teams, &owned, train_features.as_deref(), &mcmc)?;
        tracing::info!(block = b, model = model.as_str(), train = owned.len(), test = test.len(), "block fitted");
        for (k, m) in test.iter().enumerate() {
            let f = test_features.as_ref().map(|f| f[k]);
            out.push(BlockPrediction {
                fixture: m.fixture,
                block: b,
                model,
                p_over: predict_over_under(&fit.draws, m.home_team, m.away_team, f, config.threshold)?,
                actual_over: f64::from(m.total_goals()) > config.threshold,
            });
        }
    }
    Ok(out)
}
