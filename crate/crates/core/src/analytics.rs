//! Summaries of fitted posteriors: quantile rankings, posterior predictive
//! simulation of counts, box statistics of team totals and ability
//! trajectories across fitting blocks.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ability::{PairDesign, PriorSpec};
use crate::error::{Error, Result};
use crate::events::{FixtureCountTable, MATCH_MINUTES};
use crate::ids::{FixtureId, PlayerId, TeamId};
use crate::stats::{quantile_sorted, sample_poisson, std_normal_quantile, substream};
use crate::variational::VariationalState;

/// Probability at which players are ranked.
pub const RANKING_QUANTILE: f64 = 0.025;

/// `mu + sigma * Φ⁻¹(p)`.
pub fn gaussian_quantile(mu: f64, sigma: f64, p: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::Domain(format!("quantile needs finite mu and sigma > 0, got ({mu}, {sigma})")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile probability must be in (0, 1), got {p}")));
    }
    Ok(mu + sigma * std_normal_quantile(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub player_id: PlayerId,
    pub quantile_2_5: f64,
    pub mean: f64,
    pub sd: f64,
    pub observed_count: u64,
    pub observed_rank: usize,
    /// `observed_rank - rank`: positive when the model rates the player
    /// above the raw totals.
    pub rank_difference: i64,
    pub minutes_played: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlayerRanking {
    pub rows: Vec<RankingRow>,
}

impl PlayerRanking {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.rows.is_empty() {
            w.write_record([
                "rank", "player_id", "quantile_2_5", "mean", "sd", "observed_count",
                "observed_rank", "rank_difference", "minutes_played",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("writing ranking", e))?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(file)
    }
}

/// Ranks every player of `state` by the 2.5% quantile of their factor for
/// `event`, best first, and keeps the top `top_n`. Observed ranks order the
/// same players by their total count of `event` in `counts`, larger totals
/// first and smaller ids first among equal totals.
pub fn rank_players(
    state: &VariationalState,
    event: &str,
    counts: &FixtureCountTable,
    top_n: usize,
) -> Result<PlayerRanking> {
    let e = state.pair.index(event)?;
    let column = counts.column_index(event)?;
    let mut totals: BTreeMap<PlayerId, u64> = BTreeMap::new();
    let mut minutes: BTreeMap<PlayerId, f64> = BTreeMap::new();
    for row in counts.rows() {
        *totals.entry(row.player).or_default() += u64::from(row.counts[column]);
        *minutes.entry(row.player).or_default() += row.tau * MATCH_MINUTES;
    }

    let mut scored = Vec::with_capacity(state.players.len());
    for (i, &player) in state.players.iter().enumerate() {
        let (mu, sigma) = (state.mu[i][e], state.sigma[i][e]);
        scored.push((player, gaussian_quantile(mu, sigma, RANKING_QUANTILE)?, mu, sigma));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let total = |p: &PlayerId| totals.get(p).copied().unwrap_or(0);
    let mut observed: Vec<PlayerId> = state.players.clone();
    observed.sort_by(|a, b| total(b).cmp(&total(a)).then(a.cmp(b)));
    let observed_rank: BTreeMap<PlayerId, usize> =
        observed.iter().enumerate().map(|(k, p)| (*p, k + 1)).collect();

    let rows = scored
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(k, (player, q, mu, sigma))| {
            let rank = k + 1;
            let obs = observed_rank[&player];
            RankingRow {
                rank,
                player_id: player,
                quantile_2_5: q,
                mean: mu,
                sd: sigma,
                observed_count: total(&player),
                observed_rank: obs,
                rank_difference: obs as i64 - rank as i64,
                minutes_played: minutes.get(&player).copied().unwrap_or(0.0),
            }
        })
        .collect();
    Ok(PlayerRanking { rows })
}

/// Simulated counts for every row of a count table, both event types of the
/// fitted pair, in the table's row order.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDraw {
    pub index: usize,
    pub cells: Vec<[u32; 2]>,
}

/// Lazy posterior predictive simulation. Draw `k` uses its own random
/// substream, so any subset of draws can be reproduced independently.
pub struct PredictiveSimulator {
    design: PairDesign,
    n_rows: usize,
    mu: Vec<[f64; 2]>,
    sigma: Vec<[f64; 2]>,
    psi: [crate::ability::Psi; 2],
    n_draws: usize,
    seed: u64,
    next: usize,
}

impl PredictiveSimulator {
    pub fn draw(&self, k: usize) -> PredictiveDraw {
        let mut rng = substream(self.seed, k as u64);
        let sampled: Vec<[f64; 2]> = self
            .mu
            .iter()
            .zip(&self.sigma)
            .map(|(m, s)| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                [m[0] + s[0] * z0, m[1] + s[1] * z1]
            })
            .collect();
        let zero = vec![[0.0; 2]; sampled.len()];
        let lp = self.design.linear_predictors(&sampled, &zero, &self.psi);
        let mut cells = vec![[0u32; 2]; self.n_rows];
        for (row, pred) in self.design.rows.iter().zip(&lp) {
            for e in 0..2 {
                cells[row.table_row][e] = sample_poisson(&mut rng, (pred[e].0 + row.log_tau).exp());
            }
        }
        PredictiveDraw { index: k, cells }
    }
}

impl Iterator for PredictiveSimulator {
    type Item = PredictiveDraw;

    fn next(&mut self) -> Option<PredictiveDraw> {
        if self.next >= self.n_draws {
            return None;
        }
        let d = self.draw(self.next);
        self.next += 1;
        Some(d)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n_draws - self.next;
        (left, Some(left))
    }
}

/// Each draw samples every ability from its factor, forms the rates of
/// every positive-exposure row and samples Poisson counts at rate ητ.
pub fn simulate_predictive(
    state: &VariationalState,
    counts: &FixtureCountTable,
    n_draws: usize,
    seed: u64,
) -> Result<PredictiveSimulator> {
    if n_draws == 0 {
        return Err(Error::Domain("at least one predictive draw is needed".into()));
    }
    let design = PairDesign::new(counts, &state.pair)?;
    let mut mu = Vec::with_capacity(design.players.len());
    let mut sigma = Vec::with_capacity(design.players.len());
    for p in &design.players {
        match state.player_index(*p) {
            Some(i) => {
                mu.push(state.mu[i]);
                sigma.push(state.sigma[i]);
            }
            None => {
                if design.rows.iter().any(|r| design.players[r.player] == *p) {
                    return Err(Error::Referential(format!("player {p} has no fitted factor")));
                }
                mu.push([0.0; 2]);
                sigma.push([0.0; 2]);
            }
        }
    }
    Ok(PredictiveSimulator {
        design,
        n_rows: counts.rows().len(),
        mu,
        sigma,
        psi: state.psi,
        n_draws,
        seed,
        next: 0,
    })
}

/// Per (fixture, team) sums of per-row values, both event types.
pub fn team_totals(counts: &FixtureCountTable, cells: &[[u32; 2]]) -> BTreeMap<(FixtureId, TeamId), [u32; 2]> {
    let mut out: BTreeMap<(FixtureId, TeamId), [u32; 2]> = BTreeMap::new();
    for (row, cell) in counts.rows().iter().zip(cells) {
        let slot = out.entry((row.fixture, row.team)).or_default();
        slot[0] += cell[0];
        slot[1] += cell[1];
    }
    out
}

/// Observed per-fixture totals of `event` for `team`.
pub fn observed_team_totals(counts: &FixtureCountTable, team: TeamId, event: &str) -> Result<Vec<f64>> {
    let column = counts.column_index(event)?;
    let mut by_fixture: BTreeMap<FixtureId, u64> = BTreeMap::new();
    for row in counts.rows().iter().filter(|r| r.team == team) {
        *by_fixture.entry(row.fixture).or_default() += u64::from(row.counts[column]);
    }
    Ok(by_fixture.into_values().map(|v| v as f64).collect())
}

/// Simulated per-fixture totals of event slot `e` for `team`, pooled over
/// draws.
pub fn simulated_team_totals(
    counts: &FixtureCountTable,
    draws: impl IntoIterator<Item = PredictiveDraw>,
    team: TeamId,
    e: usize,
) -> Vec<f64> {
    let mut out = Vec::new();
    for d in draws {
        for ((_, t), v) in team_totals(counts, &d.cells) {
            if t == team {
                out.push(f64::from(v[e]));
            }
        }
    }
    out
}

/// Five-number summary with type-7 (linear interpolation) quartiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Name of the quartile convention, written next to box statistics.
pub const QUARTILE_METHOD: &str = "linear";

pub fn team_total_stats(totals: &[f64]) -> Result<BoxStats> {
    if totals.is_empty() {
        return Err(Error::Domain("box statistics of an empty selection".into()));
    }
    let mut sorted = totals.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub player_id: PlayerId,
    pub event_type: String,
    pub block: usize,
    pub mu: f64,
}

/// The posterior mean of one factor in each block's fit; blocks whose fit
/// does not contain the player read the prior mean.
pub fn trajectory(
    states: &[VariationalState],
    player: PlayerId,
    event: &str,
    prior: &PriorSpec,
) -> Result<Vec<TrajectoryPoint>> {
    states
        .iter()
        .enumerate()
        .map(|(block, s)| {
            let e = s.pair.index(event)?;
            let mu = s.player_index(player).map_or(prior.m, |i| s.mu[i][e]);
            Ok(TrajectoryPoint {
                player_id: player,
                event_type: event.to_string(),
                block,
                mu,
            })
        })
        .collect()
}

pub fn write_trajectories<W: Write>(points: &[TrajectoryPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if points.is_empty() {
        w.write_record(["player_id", "event_type", "block", "mu"])?;
    }
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("writing trajectories", e))?;
    Ok(())
}
