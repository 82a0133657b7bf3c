//! The Poisson ability model: rates built from latent per-player abilities
//! for one interacting pair of event types.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::FixtureCountTable;
use crate::ids::{FixtureId, PlayerId, TeamId};
use crate::stats::{ln_factorial, normal_log_pdf};

/// Two event types whose abilities interact: the opposition's ability in the
/// other type suppresses the rate of this one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventPair {
    pub e1: String,
    pub e2: String,
}

impl EventPair {
    pub fn new(e1: impl Into<String>, e2: impl Into<String>) -> Result<Self> {
        let (e1, e2) = (e1.into(), e2.into());
        if e1 == e2 {
            return Err(Error::Config(format!("event pair repeats {e1}")));
        }
        Ok(EventPair { e1, e2 })
    }

    pub fn names(&self) -> [&str; 2] {
        [&self.e1, &self.e2]
    }

    pub fn index(&self, event: &str) -> Result<usize> {
        if event == self.e1 {
            Ok(0)
        } else if event == self.e2 {
            Ok(1)
        } else {
            Err(Error::Referential(format!(
                "event type {event} is not part of the pair ({}, {})",
                self.e1, self.e2
            )))
        }
    }
}

impl std::fmt::Display for EventPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.e1, self.e2)
    }
}

/// Per-event-type fixed parameters: own-team effect, opposition effect and
/// home effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
}

impl Psi {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 > 0.0 && self.lambda2 > 0.0 && self.gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "lambdas must be positive and gamma finite, got {self:?}"
            )))
        }
    }
}

/// Fixed parameters for every event type in scope.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedParams(pub BTreeMap<String, Psi>);

impl FixedParams {
    pub fn get(&self, event: &str) -> Result<Psi> {
        self.0
            .get(event)
            .copied()
            .ok_or_else(|| Error::Referential(format!("no fixed parameters for {event}")))
    }

    pub fn for_pair(&self, pair: &EventPair) -> Result<[Psi; 2]> {
        let psi = [self.get(&pair.e1)?, self.get(&pair.e2)?];
        for p in &psi {
            p.validate()?;
        }
        Ok(psi)
    }
}

/// Independent Gaussian prior on every ability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub m: f64,
    pub s: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { m: -2.0, s: 2.0 }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s > 0.0 && self.m.is_finite() && self.s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("prior sd must be positive, got {}", self.s)))
        }
    }
}

/// Point values of the latent abilities, keyed by (player, event type).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AbilityVector(pub BTreeMap<(PlayerId, String), f64>);

impl AbilityVector {
    pub fn get(&self, player: PlayerId, event: &str) -> Result<f64> {
        self.0
            .get(&(player, event.to_string()))
            .copied()
            .ok_or_else(|| {
                Error::Referential(format!("no ability for player {player} in {event}"))
            })
    }

    pub fn insert(&mut self, player: PlayerId, event: &str, value: f64) {
        self.0.insert((player, event.to_string()), value);
    }
}

/// A count row with positive exposure, compiled for repeated evaluation.
#[derive(Clone, Debug)]
pub struct DesignRow {
    /// Position of the row in the source table.
    pub table_row: usize,
    pub player: usize,
    pub side: usize,
    pub tau: f64,
    pub log_tau: f64,
    pub x: [u32; 2],
    pub ln_fact: [f64; 2],
}

/// One team in one fixture.
#[derive(Clone, Debug)]
pub struct Side {
    pub fixture: FixtureId,
    pub team: TeamId,
    pub home: bool,
    pub opponent: usize,
    /// Design rows of the team's players with positive exposure.
    pub rows: Vec<usize>,
}

/// A count table compiled for one event pair. Rows with zero exposure carry
/// no information and are dropped, so they join neither the likelihood nor
/// any team sum.
#[derive(Clone, Debug)]
pub struct PairDesign {
    pub pair: EventPair,
    pub players: Vec<PlayerId>,
    pub rows: Vec<DesignRow>,
    pub sides: Vec<Side>,
}

impl PairDesign {
    pub fn new(counts: &FixtureCountTable, pair: &EventPair) -> Result<Self> {
        let cols = [counts.column_index(&pair.e1)?, counts.column_index(&pair.e2)?];
        let players: Vec<PlayerId> = counts.players().into_iter().collect();
        let player_index: BTreeMap<PlayerId, usize> =
            players.iter().enumerate().map(|(i, p)| (*p, i)).collect();

        let mut side_index: BTreeMap<(FixtureId, TeamId), usize> = BTreeMap::new();
        let mut sides: Vec<Side> = Vec::new();
        for r in counts.rows() {
            side_index.entry((r.fixture, r.team)).or_insert_with(|| {
                sides.push(Side {
                    fixture: r.fixture,
                    team: r.team,
                    home: r.home,
                    opponent: usize::MAX,
                    rows: Vec::new(),
                });
                sides.len() - 1
            });
        }
        let by_fixture: BTreeMap<FixtureId, Vec<usize>> =
            side_index
                .iter()
                .fold(BTreeMap::new(), |mut acc, ((f, _), &s)| {
                    acc.entry(*f).or_insert_with(Vec::new).push(s);
                    acc
                });
        for pair_sides in by_fixture.values() {
            if let [a, b] = pair_sides[..] {
                sides[a].opponent = b;
                sides[b].opponent = a;
            }
        }

        let mut rows = Vec::new();
        for (t, r) in counts.rows().iter().enumerate() {
            let x = [r.counts[cols[0]], r.counts[cols[1]]];
            if r.tau == 0.0 {
                if x != [0, 0] {
                    return Err(Error::Inconsistent(format!(
                        "player {} has events in fixture {} but zero playing time",
                        r.player, r.fixture
                    )));
                }
                continue;
            }
            let side = side_index[&(r.fixture, r.team)];
            sides[side].rows.push(rows.len());
            rows.push(DesignRow {
                table_row: t,
                player: player_index[&r.player],
                side,
                tau: r.tau,
                log_tau: r.tau.ln(),
                x,
                ln_fact: [ln_factorial(x[0]), ln_factorial(x[1])],
            });
        }
        Ok(PairDesign {
            pair: pair.clone(),
            players,
            rows,
            sides,
        })
    }

    pub fn player_index(&self, player: PlayerId) -> Option<usize> {
        self.players.binary_search(&player).ok()
    }

    /// Mean and variance of the log-rate of every row and event type when the
    /// abilities are independent with the given means and variances.
    pub fn linear_predictors(
        &self,
        mu: &[[f64; 2]],
        var: &[[f64; 2]],
        psi: &[Psi; 2],
    ) -> Vec<[(f64, f64); 2]> {
        let sums = self.side_sums(mu, var);
        self.rows
            .iter()
            .map(|row| {
                let own = &sums[row.side];
                let opp = &sums[self.sides[row.side].opponent];
                let home = self.sides[row.side].home;
                let mut out = [(0.0, 0.0); 2];
                for (e, slot) in out.iter_mut().enumerate() {
                    let o = 1 - e;
                    let p = &psi[e];
                    let a = row.tau * p.lambda1;
                    let b = row.tau * p.lambda2;
                    let m = mu[row.player][e] + a * own.0[e] - b * opp.0[o]
                        + if home { p.gamma } else { 0.0 };
                    let s2 = var[row.player][e];
                    let v = (1.0 + a) * (1.0 + a) * s2 + a * a * (own.1[e] - s2) + b * b * opp.1[o];
                    *slot = (m, v);
                }
                out
            })
            .collect()
    }

    /// Per side: (Σ μ, Σ σ²) for each event type over positive-exposure rows.
    pub(crate) fn side_sums(&self, mu: &[[f64; 2]], var: &[[f64; 2]]) -> Vec<([f64; 2], [f64; 2])> {
        self.sides
            .iter()
            .map(|s| {
                let mut m = [0.0; 2];
                let mut v = [0.0; 2];
                for &r in &s.rows {
                    let p = self.rows[r].player;
                    for e in 0..2 {
                        m[e] += mu[p][e];
                        v[e] += var[p][e];
                    }
                }
                (m, v)
            })
            .collect()
    }

    fn dense(&self, deltas: &AbilityVector) -> Result<Vec<[f64; 2]>> {
        self.players
            .iter()
            .map(|&p| Ok([deltas.get(p, &self.pair.e1)?, deltas.get(p, &self.pair.e2)?]))
            .collect()
    }
}

/// The Poisson rate of `event` for `player` in `fixture`.
pub fn eta(
    player: PlayerId,
    fixture: FixtureId,
    event: &str,
    deltas: &AbilityVector,
    psi: &FixedParams,
    counts: &FixtureCountTable,
    pair: &EventPair,
) -> Result<f64> {
    let e = pair.index(event)?;
    let other = pair.names()[1 - e];
    let p = psi.get(event)?;
    p.validate()?;
    let target = counts
        .rows()
        .iter()
        .find(|r| r.player == player && r.fixture == fixture)
        .ok_or_else(|| {
            Error::Referential(format!("player {player} does not appear in fixture {fixture}"))
        })?;
    let (mut own, mut opp) = (0.0, 0.0);
    for r in counts.rows().iter().filter(|r| r.fixture == fixture && r.tau > 0.0) {
        if r.team == target.team {
            own += deltas.get(r.player, event)?;
        } else {
            opp += deltas.get(r.player, other)?;
        }
    }
    let tau = target.tau;
    let log_eta = deltas.get(player, event)?
        + tau * (p.lambda1 * own - p.lambda2 * opp)
        + if target.home { p.gamma } else { 0.0 };
    Ok(log_eta.exp())
}

/// Poisson log-likelihood of both event types of the pair.
pub fn log_likelihood(
    deltas: &AbilityVector,
    psi: &FixedParams,
    counts: &FixtureCountTable,
    pair: &EventPair,
) -> Result<f64> {
    let design = PairDesign::new(counts, pair)?;
    let psi = psi.for_pair(pair)?;
    let mu = design.dense(deltas)?;
    let var = vec![[0.0; 2]; mu.len()];
    let lp = design.linear_predictors(&mu, &var, &psi);
    let mut total = 0.0;
    for (row, pred) in design.rows.iter().zip(&lp) {
        for e in 0..2 {
            let log_rate = pred[e].0 + row.log_tau;
            total += f64::from(row.x[e]) * log_rate - log_rate.exp() - row.ln_fact[e];
        }
    }
    Ok(total)
}

/// Sum of independent Gaussian prior log-densities over all entries.
pub fn log_prior(deltas: &AbilityVector, prior: &PriorSpec) -> Result<f64> {
    prior.validate()?;
    Ok(deltas
        .0
        .values()
        .map(|&d| normal_log_pdf(d, prior.m, prior.s))
        .sum())
}

/// Players of each team in a fixture, in table order.
pub fn lineups(counts: &FixtureCountTable) -> BTreeMap<(FixtureId, TeamId), BTreeSet<PlayerId>> {
    let mut out: BTreeMap<(FixtureId, TeamId), BTreeSet<PlayerId>> = BTreeMap::new();
    for r in counts.rows() {
        out.entry((r.fixture, r.team)).or_default().insert(r.player);
    }
    out
}
