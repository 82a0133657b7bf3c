//! The hierarchical Poisson goal model, with an optional lineup-ability
//! term in both scoring intensities, its MCMC fit, over/under predictions
//! and the blocked evaluation.

mod experiment;
mod mcmc;
mod roc;

pub use experiment::{features_for, run_block_experiment, BlockPrediction, BlockSchedule, ExperimentConfig, ModelKind};
pub use mcmc::{effective_sample_size, mcmc_fit, split_rhat, McmcConfig, McmcFit, ParamDiagnostics};
pub use roc::{roc_auc, RocPoint};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ability::{AbilityVector, PriorSpec};
use crate::error::{Error, Result};
use crate::events::{ATTACK_EVENTS, DEFENCE_EVENTS};
use crate::ids::{FixtureId, PlayerId, TeamId};
use crate::stats::{inv_gamma_log_pdf, normal_log_pdf, poisson_log_pmf, poisson_upper_tail, std_normal_quantile};
use crate::variational::VariationalState;

/// Prior sd of the home effect and the attack/defence means.
pub const FLAT_SD: f64 = 100.0;
/// Shape and scale of the inverse-gamma prior on both team-effect sds.
pub const SCALE_PRIOR: (f64, f64) = (0.1, 0.1);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub fixture: FixtureId,
    pub home_team: TeamId,
    pub away_team: TeamId,
    pub y_h: u32,
    pub y_a: u32,
    pub starters_home: Vec<PlayerId>,
    pub starters_away: Vec<PlayerId>,
}

impl MatchResult {
    pub fn validate(&self) -> Result<()> {
        for (team, xi) in [
            (self.home_team, &self.starters_home),
            (self.away_team, &self.starters_away),
        ] {
            let distinct: BTreeSet<_> = xi.iter().collect();
            if xi.len() != 11 || distinct.len() != 11 {
                return Err(Error::Inconsistent(format!(
                    "fixture {}: team {team} needs 11 distinct starters, has {}",
                    self.fixture,
                    distinct.len()
                )));
            }
        }
        if self.home_team == self.away_team {
            return Err(Error::Inconsistent(format!(
                "fixture {}: team {} plays itself",
                self.fixture, self.home_team
            )));
        }
        Ok(())
    }

    pub fn total_goals(&self) -> u32 {
        self.y_h + self.y_a
    }
}

/// One posterior draw of the goal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierDraw {
    pub home: f64,
    pub att: BTreeMap<TeamId, f64>,
    pub def: BTreeMap<TeamId, f64>,
    pub mu_att: f64,
    pub mu_def: f64,
    pub sigma_att: f64,
    pub sigma_def: f64,
}

impl HierDraw {
    fn effect(map: &BTreeMap<TeamId, f64>, team: TeamId, what: &str) -> Result<f64> {
        map.get(&team)
            .copied()
            .ok_or_else(|| Error::Referential(format!("team {team} has no {what} parameter")))
    }

    /// (log θ_h, log θ_a) of a fixture.
    pub fn log_rates(
        &self,
        home: TeamId,
        away: TeamId,
        features: Option<AbilityFeatures>,
    ) -> Result<(f64, f64)> {
        let f = features.unwrap_or_default();
        Ok((
            self.home + Self::effect(&self.att, home, "attack")? + Self::effect(&self.def, away, "defence")? + f.f_h,
            Self::effect(&self.att, away, "attack")? + Self::effect(&self.def, home, "defence")? + f.f_a,
        ))
    }
}

/// The lineup-ability terms added to the home and away log-intensities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AbilityFeatures {
    pub f_h: f64,
    pub f_a: f64,
}

/// Which abilities enter the lineup term: a team's starters contribute their
/// `attack` abilities, the opposing starters subtract their `defence` ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub attack: Vec<String>,
    pub defence: Vec<String>,
}

impl FeatureSpec {
    /// A single interacting pair: attack in `e`, defence in the other type.
    pub fn single_pair(e: &str, other: &str) -> Self {
        FeatureSpec {
            attack: vec![e.to_string()],
            defence: vec![other.to_string()],
        }
    }

    /// Goal, Shots and ChainEvents against GoalStop, ShotStop and AntiPass.
    pub fn multi() -> Self {
        FeatureSpec {
            attack: ATTACK_EVENTS.iter().map(|s| s.to_string()).collect(),
            defence: DEFENCE_EVENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// How a factor is reduced to the number that enters the lineup term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum PointEstimate {
    #[default]
    Mean,
    /// The Gaussian quantile at this probability.
    Quantile(f64),
}

/// Fitted factors by event type and player, gathered from one or more
/// pair fits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AbilityTable {
    factors: BTreeMap<String, BTreeMap<PlayerId, (f64, f64)>>,
    prior: PriorSpec,
}

impl AbilityTable {
    pub fn from_states(states: &[VariationalState], prior: PriorSpec) -> Self {
        let mut factors: BTreeMap<String, BTreeMap<PlayerId, (f64, f64)>> = BTreeMap::new();
        for s in states {
            for (e, name) in s.pair.names().iter().enumerate() {
                let entry = factors.entry(name.to_string()).or_default();
                for (i, p) in s.players.iter().enumerate() {
                    entry.insert(*p, (s.mu[i][e], s.sigma[i][e]));
                }
            }
        }
        AbilityTable { factors, prior }
    }

    /// Exactly known abilities, as zero-width factors.
    pub fn from_values(values: &AbilityVector, prior: PriorSpec) -> Self {
        let mut factors: BTreeMap<String, BTreeMap<PlayerId, (f64, f64)>> = BTreeMap::new();
        for ((player, event), v) in &values.0 {
            factors.entry(event.clone()).or_default().insert(*player, (*v, 0.0));
        }
        AbilityTable { factors, prior }
    }

    /// Point value for a player; players never fitted sit at the prior mean.
    pub fn value(&self, player: PlayerId, event: &str, point: PointEstimate) -> Result<f64> {
        let by_player = self.factors.get(event).ok_or_else(|| {
            Error::Referential(format!("no fitted abilities for event type {event}"))
        })?;
        Ok(match by_player.get(&player) {
            None => self.prior.m,
            Some(&(mu, sigma)) => match point {
                PointEstimate::Mean => mu,
                PointEstimate::Quantile(p) => mu + sigma * std_normal_quantile(p),
            },
        })
    }

    pub fn events(&self) -> impl Iterator<Item = &str> {
        self.factors.keys().map(String::as_str)
    }
}

/// Lineup-ability terms of a fixture from its starting elevens.
pub fn f_delta(
    fixture: &MatchResult,
    abilities: &AbilityTable,
    spec: &FeatureSpec,
    point: PointEstimate,
) -> Result<AbilityFeatures> {
    fixture.validate()?;
    let total = |xi: &[PlayerId], events: &[String]| -> Result<f64> {
        let mut sum = 0.0;
        for p in xi {
            for e in events {
                sum += abilities.value(*p, e, point)?;
            }
        }
        Ok(sum)
    };
    Ok(AbilityFeatures {
        f_h: total(&fixture.starters_home, &spec.attack)? - total(&fixture.starters_away, &spec.defence)?,
        f_a: total(&fixture.starters_away, &spec.attack)? - total(&fixture.starters_home, &spec.defence)?,
    })
}

fn check_features(data: &[MatchResult], features: Option<&[AbilityFeatures]>) -> Result<()> {
    if let Some(f) = features {
        if f.len() != data.len() {
            return Err(Error::Inconsistent(format!(
                "{} feature rows for {} fixtures",
                f.len(),
                data.len()
            )));
        }
    }
    Ok(())
}

/// Unnormalised log posterior of a draw. A non-positive scale gives −∞.
pub fn log_posterior(
    draw: &HierDraw,
    data: &[MatchResult],
    features: Option<&[AbilityFeatures]>,
) -> Result<f64> {
    check_features(data, features)?;
    if !(draw.sigma_att > 0.0 && draw.sigma_def > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = 0.0;
    for (k, m) in data.iter().enumerate() {
        let (lh, la) = draw.log_rates(m.home_team, m.away_team, features.map(|f| f[k]))?;
        total += poisson_log_pmf(m.y_h, lh.exp()) + poisson_log_pmf(m.y_a, la.exp());
    }
    for a in draw.att.values() {
        total += normal_log_pdf(*a, draw.mu_att, draw.sigma_att);
    }
    for d in draw.def.values() {
        total += normal_log_pdf(*d, draw.mu_def, draw.sigma_def);
    }
    total += normal_log_pdf(draw.home, 0.0, FLAT_SD)
        + normal_log_pdf(draw.mu_att, 0.0, FLAT_SD)
        + normal_log_pdf(draw.mu_def, 0.0, FLAT_SD)
        + inv_gamma_log_pdf(draw.sigma_att, SCALE_PRIOR.0, SCALE_PRIOR.1)
        + inv_gamma_log_pdf(draw.sigma_def, SCALE_PRIOR.0, SCALE_PRIOR.1);
    Ok(total)
}

/// Posterior-averaged probability that the fixture's total goals exceed
/// `threshold`.
pub fn predict_over_under(
    draws: &[HierDraw],
    home: TeamId,
    away: TeamId,
    features: Option<AbilityFeatures>,
    threshold: f64,
) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Domain("no posterior draws to average".into()));
    }
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold must be non-negative, got {threshold}")));
    }
    // Strictly over the line: N ≥ ⌊threshold⌋ + 1.
    let k = threshold.floor() as u32 + 1;
    let mut sum = 0.0;
    for d in draws {
        let (lh, la) = d.log_rates(home, away, features)?;
        sum += poisson_upper_tail(lh.exp() + la.exp(), k);
    }
    Ok(sum / draws.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi(base: u64) -> Vec<PlayerId> {
        (base..base + 11).map(PlayerId).collect()
    }

    fn fixture(y_h: u32, y_a: u32) -> MatchResult {
        MatchResult {
            fixture: FixtureId(1),
            home_team: TeamId(1),
            away_team: TeamId(2),
            y_h,
            y_a,
            starters_home: xi(100),
            starters_away: xi(200),
        }
    }

    fn zero_draw() -> HierDraw {
        HierDraw {
            home: 0.0,
            att: BTreeMap::from([(TeamId(1), 0.0), (TeamId(2), 0.0)]),
            def: BTreeMap::from([(TeamId(1), 0.0), (TeamId(2), 0.0)]),
            mu_att: 0.0,
            mu_def: 0.0,
            sigma_att: 1.0,
            sigma_def: 1.0,
        }
    }

    fn prior_part(d: &HierDraw) -> f64 {
        log_posterior(d, &[], None).unwrap()
    }

    #[test]
    fn likelihood_examples() {
        let d = zero_draw();
        let base = prior_part(&d);
        let ll = log_posterior(&d, &[fixture(0, 0)], None).unwrap() - base;
        assert!((ll + 2.0).abs() < 1e-12);
        let ll = log_posterior(&d, &[fixture(2, 1)], None).unwrap() - base;
        assert!((ll - (-2.0 - 2f64.ln())).abs() < 1e-12);
        assert!((ll + 2.693).abs() < 1e-3);

        let f = [AbilityFeatures { f_h: 2f64.ln(), f_a: 0.0 }];
        let (lh, _) = d.log_rates(TeamId(1), TeamId(2), Some(f[0])).unwrap();
        assert!((lh.exp() - 2.0).abs() < 1e-15);

        let zero = [AbilityFeatures::default()];
        assert_eq!(
            log_posterior(&d, &[fixture(3, 1)], Some(&zero)).unwrap(),
            log_posterior(&d, &[fixture(3, 1)], None).unwrap()
        );

        let mut bad = d.clone();
        bad.sigma_att = 0.0;
        assert_eq!(log_posterior(&bad, &[], None).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn over_under_examples() {
        let mut d = zero_draw();
        d.home = f64::NEG_INFINITY;
        for v in d.att.values_mut() {
            *v = f64::NEG_INFINITY;
        }
        assert_eq!(predict_over_under(&[d], TeamId(1), TeamId(2), None, 2.5).unwrap(), 0.0);

        let mut d = zero_draw();
        // θ_h + θ_a = 2.75 with θ_a = 1.
        d.home = 1.75f64.ln();
        let p = predict_over_under(&[d.clone()], TeamId(1), TeamId(2), None, 2.5).unwrap();
        let theta = 2.75f64;
        let closed = 1.0 - (-theta).exp() * (1.0 + theta + theta * theta / 2.0);
        assert!((p - closed).abs() < 1e-12);
        assert!((p - 0.5185).abs() < 5e-4);

        d.home = 700.0;
        assert_eq!(predict_over_under(&[d.clone()], TeamId(1), TeamId(2), None, 2.5).unwrap(), 1.0);
        assert!(predict_over_under(&[d], TeamId(1), TeamId(9), None, 2.5).is_err());
    }

    #[test]
    fn lineup_terms() {
        let pair = crate::ability::EventPair::new("Goal", "GoalStop").unwrap();
        let players: Vec<PlayerId> = xi(100).into_iter().chain(xi(200)).collect();
        let mut s = VariationalState::initial(players, pair, &PriorSpec::default());
        let spec = FeatureSpec::single_pair("Goal", "GoalStop");
        let m = fixture(0, 0);

        for row in &mut s.mu {
            *row = [0.0, 0.0];
        }
        let t = AbilityTable::from_states(&[s.clone()], PriorSpec::default());
        assert_eq!(f_delta(&m, &t, &spec, PointEstimate::Mean).unwrap(), AbilityFeatures::default());

        for row in &mut s.mu {
            *row = [0.7, 0.7];
        }
        let t = AbilityTable::from_states(&[s.clone()], PriorSpec::default());
        let f = f_delta(&m, &t, &spec, PointEstimate::Mean).unwrap();
        assert!(f.f_h.abs() < 1e-12 && f.f_a.abs() < 1e-12);

        // Home attack sums to 5, away defence to 2.
        for (i, p) in s.players.clone().iter().enumerate() {
            s.mu[i] = if p.0 < 200 { [5.0 / 11.0, 0.0] } else { [0.0, 2.0 / 11.0] };
        }
        let t = AbilityTable::from_states(&[s], PriorSpec::default());
        let f = f_delta(&m, &t, &spec, PointEstimate::Mean).unwrap();
        assert!((f.f_h - 3.0).abs() < 1e-12);

        let mut short = m.clone();
        short.starters_home.pop();
        assert!(f_delta(&short, &t, &spec, PointEstimate::Mean).is_err());
    }

    #[test]
    fn absent_players_sit_at_the_prior_mean() {
        let pair = crate::ability::EventPair::new("Goal", "GoalStop").unwrap();
        let s = VariationalState::initial(vec![PlayerId(1)], pair, &PriorSpec::default());
        let t = AbilityTable::from_states(&[s], PriorSpec::default());
        assert_eq!(t.value(PlayerId(99), "Goal", PointEstimate::Mean).unwrap(), -2.0);
        let q = t.value(PlayerId(1), "Goal", PointEstimate::Quantile(0.025)).unwrap();
        assert!((q - (-2.0 - 2.0 * 1.959_963_984_540_054)).abs() < 1e-9);
        assert!(t.value(PlayerId(1), "Shots", PointEstimate::Mean).is_err());
    }
}
