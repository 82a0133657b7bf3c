//! Synthetic seasons drawn from known parameters: a round-robin calendar,
//! squads with rotation and substitutions, per-player event counts from the
//! ability model and match scores from the goal model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ability::{AbilityVector, FixedParams, PriorSpec, Psi};
use crate::error::{Error, Result};
use crate::events::{
    write_appearances, write_fixtures, write_touch_log, CountRow, EventTaxonomy, EventType,
    FixtureCountTable, FixtureMeta, Outcome, Period, PlayerAppearance, RawTouchEvent, TouchLog,
};
use crate::goals::{f_delta, AbilityFeatures, AbilityTable, FeatureSpec, MatchResult, PointEstimate};
use crate::ids::{FixtureId, PlayerId, TeamId};
use crate::stats::{sample_poisson, substream};

const STARTERS: usize = 11;
const SUB_SLOTS: usize = 3;

/// Generating distribution of one interacting pair of event types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTruthConfig {
    pub events: [String; 2],
    /// Mean and sd of the true abilities of each event type.
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub psi: [Psi; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_teams: usize,
    pub squad_size: usize,
    /// Squad members who only ever come on late as substitutes.
    pub fringe_players: usize,
    /// 1, or 2 for a second season with promoted teams.
    pub seasons: usize,
    /// Teams replaced between seasons.
    pub churn: usize,
    /// Chunk sizes that cut the second season into prediction blocks.
    pub block_sizes: Vec<usize>,
    /// Probability that each of a team's three substitution slots is used.
    pub substitution_rate: f64,
    /// Probability that a used slot brings on a fringe player.
    pub fringe_rate: f64,
    pub pairs: Vec<PairTruthConfig>,
    pub home: f64,
    pub att_sd: f64,
    pub def_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_teams: 20,
            squad_size: 16,
            fringe_players: 2,
            seasons: 1,
            churn: 3,
            block_sizes: vec![80, 80, 80, 80, 60],
            substitution_rate: 0.6,
            fringe_rate: 0.05,
            pairs: vec![PairTruthConfig {
                events: ["Shots".into(), "ShotStop".into()],
                mean: [-1.0, 0.5],
                sd: [0.8, 0.6],
                psi: [
                    Psi { lambda1: 0.01, lambda2: 0.01, gamma: 0.1 },
                    Psi { lambda1: 0.01, lambda2: 0.01, gamma: 0.05 },
                ],
            }],
            home: 0.25,
            att_sd: 0.2,
            def_sd: 0.2,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_teams < 2 || !self.n_teams.is_multiple_of(2) {
            return bad(format!("n_teams must be even and at least 2, got {}", self.n_teams));
        }
        if self.squad_size < STARTERS + self.fringe_players {
            return bad(format!(
                "squad_size {} leaves fewer than 11 regulars beside {} fringe players",
                self.squad_size, self.fringe_players
            ));
        }
        if !(1..=2).contains(&self.seasons) {
            return bad(format!("seasons must be 1 or 2, got {}", self.seasons));
        }
        if self.seasons == 2 {
            if self.churn > self.n_teams / 2 {
                return bad(format!("churn {} exceeds half the league", self.churn));
            }
            let season = self.n_teams * (self.n_teams - 1);
            if self.block_sizes.iter().sum::<usize>() != season || self.block_sizes.contains(&0) {
                return bad(format!("block_sizes must be positive and sum to {season}"));
            }
        }
        for (name, p) in [("substitution_rate", self.substitution_rate), ("fringe_rate", self.fringe_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.fringe_rate > 0.0 && self.fringe_players == 0 {
            return bad("fringe_rate > 0 needs fringe_players > 0".into());
        }
        if !(self.att_sd >= 0.0 && self.def_sd >= 0.0 && self.home.is_finite()) {
            return bad("att_sd and def_sd must be non-negative and home finite".into());
        }
        if self.pairs.is_empty() {
            return bad("at least one event pair is needed".into());
        }
        let taxonomy = EventTaxonomy::standard();
        let mut seen = BTreeSet::new();
        for pair in &self.pairs {
            for (e, name) in pair.events.iter().enumerate() {
                taxonomy.column(name)?;
                if !seen.insert(name.clone()) {
                    return bad(format!("event type {name} appears in two pairs"));
                }
                if !(pair.sd[e] >= 0.0 && pair.mean[e].is_finite()) {
                    return bad(format!("{name}: sd must be non-negative and mean finite"));
                }
                pair.psi[e].validate()?;
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = self.pairs.iter().flat_map(|p| p.events.clone()).collect();
        c.sort();
        c
    }
}

/// True team effects of the goal model; both sets sum to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierTruth {
    pub home: f64,
    pub att: BTreeMap<TeamId, f64>,
    pub def: BTreeMap<TeamId, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    pub deltas: AbilityVector,
    pub psi: FixedParams,
    pub hier: HierTruth,
}

/// Serialized form of [`SynthTruth`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub deltas: BTreeMap<String, BTreeMap<PlayerId, f64>>,
    pub psi: BTreeMap<String, Psi>,
    pub hier: HierTruth,
}

impl SynthTruth {
    pub fn document(&self) -> TruthDocument {
        let mut deltas: BTreeMap<String, BTreeMap<PlayerId, f64>> = BTreeMap::new();
        for ((p, e), v) in &self.deltas.0 {
            deltas.entry(e.clone()).or_default().insert(*p, *v);
        }
        TruthDocument {
            deltas,
            psi: self.psi.0.clone(),
            hier: self.hier.clone(),
        }
    }
}

impl TruthDocument {
    pub fn truth(&self) -> SynthTruth {
        let mut deltas = AbilityVector::default();
        for (e, by_player) in &self.deltas {
            for (p, v) in by_player {
                deltas.insert(*p, e, *v);
            }
        }
        SynthTruth {
            deltas,
            psi: FixedParams(self.psi.clone()),
            hier: self.hier.clone(),
        }
    }
}

/// Who played how long for one team in one fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct TeamSheet {
    pub team: TeamId,
    pub starters: Vec<PlayerId>,
    /// (player off, player on, minute) for every substitution.
    pub substitutions: Vec<(PlayerId, PlayerId, u32)>,
}

impl TeamSheet {
    /// Whole minutes on the pitch of everyone who played.
    pub fn minutes(&self) -> BTreeMap<PlayerId, u32> {
        let mut m: BTreeMap<PlayerId, u32> = self.starters.iter().map(|p| (*p, 90)).collect();
        for &(off, on, minute) in &self.substitutions {
            m.insert(off, minute);
            m.insert(on, 90 - minute);
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFixture {
    pub meta: FixtureMeta,
    pub season: usize,
    /// Home sheet first.
    pub sheets: [TeamSheet; 2],
}

/// A generated league: calendar, squads, team sheets and true parameters.
/// Counts, scores and raw events are drawn from it on separate random
/// streams, so each can be regenerated alone.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthWorld {
    pub config: SynthConfig,
    pub squads: BTreeMap<TeamId, Vec<PlayerId>>,
    pub fixtures: Vec<SynthFixture>,
    pub truth: SynthTruth,
}

const STREAM_TRUTH: u64 = 0;
const STREAM_LINEUPS: u64 = 1;
const STREAM_COUNTS: u64 = 2;
const STREAM_SCORES: u64 = 3;
const STREAM_EVENTS: u64 = 4;
const STREAM_CALENDAR: u64 = 5;

/// Rounds of a single round robin by the circle method, as pairs of
/// positions with the first one at home.
fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut ring: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::with_capacity(n - 1);
    for r in 0..n - 1 {
        let mut games = Vec::with_capacity(n / 2);
        for i in 0..n / 2 {
            let (a, b) = (ring[i], ring[n - 1 - i]);
            let flip = if i == 0 { r % 2 == 1 } else { i % 2 == 1 };
            games.push(if flip { (b, a) } else { (a, b) });
        }
        rounds.push(games);
        ring[1..].rotate_right(1);
    }
    rounds
}

/// Both halves of a double round robin in play order.
fn double_round_robin(n: usize) -> Vec<(usize, usize)> {
    let first: Vec<(usize, usize)> = round_robin(n).into_iter().flatten().collect();
    let second = first.iter().map(|&(h, a)| (a, h));
    first.iter().copied().chain(second).collect()
}

/// Positions for the promoted teams such that exactly one fixture among the
/// first `window` games pairs two of them (none possible for one team).
fn promoted_positions(order: &[(usize, usize)], n: usize, k: usize, window: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let target = usize::from(k >= 2);
    let early = &order[..window.min(order.len())];
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let set: BTreeSet<usize> = combo.iter().copied().collect();
        let meetings = early.iter().filter(|(h, a)| set.contains(h) && set.contains(a)).count();
        if meetings == target {
            return Ok(combo);
        }
        // Next k-combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return Err(Error::Config(format!(
                    "no placement of {k} promoted teams meets exactly {target} time(s) in the first {window} fixtures"
                )));
            }
            i -= 1;
            if combo[i] < n - k + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

fn centred(rng: &mut ChaCha8Rng, teams: &[TeamId], sd: f64) -> BTreeMap<TeamId, f64> {
    let normal = Normal::new(0.0, sd.max(0.0)).expect("valid normal");
    let raw: Vec<f64> = teams.iter().map(|_| normal.sample(rng)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    teams.iter().zip(raw).map(|(t, v)| (*t, v - mean)).collect()
}

fn team_sheet(rng: &mut ChaCha8Rng, team: TeamId, squad: &[PlayerId], config: &SynthConfig) -> TeamSheet {
    let regulars = &squad[..squad.len() - config.fringe_players];
    let fringe = &squad[squad.len() - config.fringe_players..];
    let chosen = index::sample(rng, regulars.len(), STARTERS);
    let mut starters: Vec<PlayerId> = chosen.iter().map(|i| regulars[i]).collect();
    starters.sort();
    let mut bench: Vec<PlayerId> = regulars.iter().filter(|p| !starters.contains(p)).copied().collect();
    let mut fringe_left: Vec<PlayerId> = fringe.to_vec();
    let mut on_pitch = starters.clone();
    let mut substitutions = Vec::new();
    for _ in 0..SUB_SLOTS {
        if rng.random::<f64>() >= config.substitution_rate {
            continue;
        }
        let use_fringe = !fringe_left.is_empty() && rng.random::<f64>() < config.fringe_rate;
        let (on, minute) = if use_fringe {
            let k = rng.random_range(0..fringe_left.len());
            (fringe_left.swap_remove(k), rng.random_range(70..90))
        } else if !bench.is_empty() {
            let k = rng.random_range(0..bench.len());
            (bench.swap_remove(k), rng.random_range(46..86))
        } else {
            continue;
        };
        let k = rng.random_range(0..on_pitch.len());
        let off = on_pitch.swap_remove(k);
        substitutions.push((off, on, minute));
    }
    substitutions.sort_by_key(|s| (s.2, s.0));
    TeamSheet { team, starters, substitutions }
}

impl SynthWorld {
    pub fn build(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_teams;
        let mut team_ids: Vec<TeamId> = (1..=n as u64).map(TeamId).collect();
        let promoted: Vec<TeamId> = if config.seasons == 2 {
            (n as u64 + 1..=(n + config.churn) as u64).map(TeamId).collect()
        } else {
            Vec::new()
        };
        let all_teams: Vec<TeamId> = team_ids.iter().chain(&promoted).copied().collect();
        let squads: BTreeMap<TeamId, Vec<PlayerId>> = all_teams
            .iter()
            .map(|t| {
                let squad = (1..=config.squad_size as u64).map(|k| PlayerId(t.0 * 1000 + k)).collect();
                (*t, squad)
            })
            .collect();

        let mut rng = substream(config.seed, STREAM_TRUTH);
        let mut deltas = AbilityVector::default();
        let mut psi = BTreeMap::new();
        for pair in &config.pairs {
            for e in 0..2 {
                psi.insert(pair.events[e].clone(), pair.psi[e]);
            }
            let dists = [
                Normal::new(pair.mean[0], pair.sd[0]).expect("valid normal"),
                Normal::new(pair.mean[1], pair.sd[1]).expect("valid normal"),
            ];
            for squad in squads.values() {
                for p in squad {
                    for e in 0..2 {
                        deltas.insert(*p, &pair.events[e], dists[e].sample(&mut rng));
                    }
                }
            }
        }
        let hier = HierTruth {
            home: config.home,
            att: centred(&mut rng, &all_teams, config.att_sd),
            def: centred(&mut rng, &all_teams, config.def_sd),
        };

        let order = double_round_robin(n);
        let mut cal_rng = substream(config.seed, STREAM_CALENDAR);
        let mut lineup_rng = substream(config.seed, STREAM_LINEUPS);
        let mut fixtures = Vec::new();
        let per_round = n / 2;
        for season in 1..=config.seasons {
            let positions: Vec<TeamId> = if season == 1 {
                team_ids.shuffle(&mut cal_rng);
                team_ids.clone()
            } else {
                let survivors: Vec<TeamId> = team_ids
                    .iter()
                    .copied()
                    .filter(|t| t.0 <= (n - config.churn) as u64)
                    .collect();
                let window = config.block_sizes[0];
                let slots = promoted_positions(&order, n, config.churn, window)?;
                let mut rest = survivors;
                rest.shuffle(&mut cal_rng);
                let mut rest = rest.into_iter();
                (0..n)
                    .map(|pos| match slots.iter().position(|s| *s == pos) {
                        Some(k) => promoted[k],
                        None => rest.next().expect("enough survivors"),
                    })
                    .collect()
            };
            let mut offset = 0;
            let mut chunk = 0;
            for (k, &(h, a)) in order.iter().enumerate() {
                let label = if season == 1 {
                    0
                } else {
                    if k - offset >= config.block_sizes[chunk] {
                        offset += config.block_sizes[chunk];
                        chunk += 1;
                    }
                    chunk + 1
                };
                let (home, away) = (positions[h], positions[a]);
                let id = FixtureId(fixtures.len() as u64 + 1);
                let sheets = [
                    team_sheet(&mut lineup_rng, home, &squads[&home], config),
                    team_sheet(&mut lineup_rng, away, &squads[&away], config),
                ];
                fixtures.push(SynthFixture {
                    meta: FixtureMeta {
                        fixture: id,
                        home_team: home,
                        away_team: away,
                        date: format!("s{season}-r{:02}", k / per_round + 1),
                        block_label: Some(label.to_string()),
                        home_goals: None,
                        away_goals: None,
                    },
                    season,
                    sheets,
                });
            }
            if season == 1 {
                team_ids = (1..=n as u64).map(TeamId).collect();
            }
        }

        Ok(SynthWorld {
            config: config.clone(),
            squads,
            fixtures,
            truth: SynthTruth {
                deltas,
                psi: FixedParams(psi),
                hier,
            },
        })
    }

    pub fn appearances(&self) -> Vec<PlayerAppearance> {
        let mut out = Vec::new();
        for f in &self.fixtures {
            for sheet in &f.sheets {
                for (player, minutes) in sheet.minutes() {
                    out.push(
                        PlayerAppearance::new(f.meta.fixture, player, sheet.team, f64::from(minutes))
                            .expect("minutes within a match"),
                    );
                }
            }
        }
        out
    }

    /// Log-rate of every event type for every player of one fixture, from
    /// the true abilities and fixed parameters.
    pub fn true_log_rates(&self, fixture: &SynthFixture) -> Vec<(PlayerId, TeamId, bool, f64, Vec<f64>)> {
        let columns = self.config.columns();
        let minutes: [BTreeMap<PlayerId, u32>; 2] = [fixture.sheets[0].minutes(), fixture.sheets[1].minutes()];
        let delta = |p: &PlayerId, e: &str| self.truth.deltas.0[&(*p, e.to_string())];
        let mut out = Vec::new();
        for side in 0..2 {
            for (player, &m) in &minutes[side] {
                let tau = f64::from(m) / 90.0;
                let rates = columns
                    .iter()
                    .map(|e| {
                        let pair = self
                            .config
                            .pairs
                            .iter()
                            .find(|p| p.events.contains(e))
                            .expect("column from a pair");
                        let idx = usize::from(pair.events[1] == *e);
                        let other = &pair.events[1 - idx];
                        let psi = pair.psi[idx];
                        let own: f64 = minutes[side].keys().map(|q| delta(q, e)).sum();
                        let opp: f64 = minutes[1 - side].keys().map(|q| delta(q, other)).sum();
                        let h = if side == 0 { psi.gamma } else { 0.0 };
                        delta(player, e) + tau * (psi.lambda1 * own - psi.lambda2 * opp) + h
                    })
                    .collect();
                out.push((*player, fixture.sheets[side].team, side == 0, tau, rates));
            }
        }
        out
    }

    /// Counts of every configured event type, X ~ Pois(ητ).
    pub fn count_table(&self) -> Result<FixtureCountTable> {
        let mut rng = substream(self.config.seed, STREAM_COUNTS);
        let mut rows = Vec::new();
        for f in &self.fixtures {
            for (player, team, home, tau, rates) in self.true_log_rates(f) {
                let counts = rates.iter().map(|lr| sample_poisson(&mut rng, lr.exp() * tau)).collect();
                rows.push(CountRow {
                    fixture: f.meta.fixture,
                    player,
                    team,
                    home,
                    tau,
                    counts,
                });
            }
        }
        FixtureCountTable::new(self.config.columns(), rows)
    }

    /// True lineup terms of every fixture under `spec`.
    pub fn true_features(&self, spec: &FeatureSpec) -> Result<Vec<AbilityFeatures>> {
        let table = AbilityTable::from_values(&self.truth.deltas, PriorSpec::default());
        self.fixtures
            .iter()
            .map(|f| f_delta(&self.bare_result(f), &table, spec, PointEstimate::Mean))
            .collect()
    }

    fn bare_result(&self, f: &SynthFixture) -> MatchResult {
        MatchResult {
            fixture: f.meta.fixture,
            home_team: f.meta.home_team,
            away_team: f.meta.away_team,
            y_h: 0,
            y_a: 0,
            starters_home: f.sheets[0].starters.clone(),
            starters_away: f.sheets[1].starters.clone(),
        }
    }

    /// Match scores from the goal model, optionally with the true lineup
    /// terms added to both log-intensities. The random draws do not depend
    /// on the lineup terms.
    pub fn match_results(&self, features: Option<&FeatureSpec>) -> Result<Vec<MatchResult>> {
        let f = features.map(|s| self.true_features(s)).transpose()?;
        let mut rng = substream(self.config.seed, STREAM_SCORES);
        let h = &self.truth.hier;
        let mut out = Vec::with_capacity(self.fixtures.len());
        for (k, fx) in self.fixtures.iter().enumerate() {
            let (home, away) = (fx.meta.home_team, fx.meta.away_team);
            let extra = f.as_ref().map(|f| f[k]).unwrap_or_default();
            let lh = h.home + h.att[&home] + h.def[&away] + extra.f_h;
            let la = h.att[&away] + h.def[&home] + extra.f_a;
            let mut m = self.bare_result(fx);
            m.y_h = sample_poisson(&mut rng, lh.exp());
            m.y_a = sample_poisson(&mut rng, la.exp());
            out.push(m);
        }
        Ok(out)
    }

    /// The calendar with goals filled in.
    pub fn fixture_metas(&self, results: &[MatchResult]) -> Vec<FixtureMeta> {
        self.fixtures
            .iter()
            .zip(results)
            .map(|(f, r)| FixtureMeta {
                home_goals: Some(r.y_h),
                away_goals: Some(r.y_a),
                ..f.meta.clone()
            })
            .collect()
    }

    /// A touch log that reproduces the counts of every base event type in
    /// `counts`, plus start, substitution and end markers. Composite and
    /// chain columns carry no raw events.
    pub fn touch_log(&self, counts: &FixtureCountTable) -> TouchLog {
        let mut rng = substream(self.config.seed, STREAM_EVENTS);
        let base = representatives(counts.columns());
        let mut by_fixture: BTreeMap<FixtureId, Vec<&CountRow>> = BTreeMap::new();
        for row in counts.rows() {
            by_fixture.entry(row.fixture).or_default().push(row);
        }
        let mut events = Vec::new();
        for f in &self.fixtures {
            let mut fixture_events: Vec<RawTouchEvent> = Vec::new();
            let marker = |minute: u32, team: TeamId, player: PlayerId, t: EventType| RawTouchEvent {
                minute,
                second: 0,
                period: if minute < 45 { Period::FirstHalf } else { Period::SecondHalf },
                team,
                player,
                event_type: t,
                outcome: Outcome::Successful,
            };
            let mut spans: BTreeMap<PlayerId, (u32, u32)> = BTreeMap::new();
            for sheet in &f.sheets {
                for p in &sheet.starters {
                    fixture_events.push(marker(0, sheet.team, *p, EventType::Start));
                    spans.insert(*p, (0, 90));
                }
                for &(off, on, minute) in &sheet.substitutions {
                    fixture_events.push(marker(minute, sheet.team, off, EventType::SubstitutionOff));
                    fixture_events.push(marker(minute, sheet.team, on, EventType::SubstitutionOn));
                    spans.get_mut(&off).expect("substituted starter").1 = minute;
                    spans.insert(on, (minute, 90));
                }
            }
            let closer = f.sheets[0].starters[0];
            fixture_events.push(marker(90, f.sheets[0].team, closer, EventType::End));
            for row in by_fixture.get(&f.meta.fixture).into_iter().flatten() {
                let (start, end) = spans[&row.player];
                for &(c, t) in &base {
                    for _ in 0..row.counts[c] {
                        let clock = rng.random_range(f64::from(start * 60)..f64::from(end * 60)) as u32;
                        let minute = clock / 60;
                        fixture_events.push(RawTouchEvent {
                            minute,
                            second: clock % 60,
                            period: if minute < 45 { Period::FirstHalf } else { Period::SecondHalf },
                            team: row.team,
                            player: row.player,
                            event_type: t,
                            outcome: Outcome::Successful,
                        });
                    }
                }
            }
            fixture_events.sort_by_key(|e| (e.period, e.minute, e.second, e.event_type == EventType::End));
            events.extend(fixture_events.into_iter().map(|e| (f.meta.fixture, e)));
        }
        TouchLog { events }
    }

    /// Fixture ids by block label, in play order.
    pub fn blocks(&self) -> Vec<Vec<FixtureId>> {
        let mut by_label: BTreeMap<usize, Vec<FixtureId>> = BTreeMap::new();
        for f in &self.fixtures {
            let label = f.meta.block_label.as_deref().unwrap_or("0").parse().unwrap_or(0);
            by_label.entry(label).or_default().push(f.meta.fixture);
        }
        by_label.into_values().collect()
    }

    pub fn fixture_teams(&self) -> BTreeMap<FixtureId, (TeamId, TeamId)> {
        self.fixtures
            .iter()
            .map(|f| (f.meta.fixture, (f.meta.home_team, f.meta.away_team)))
            .collect()
    }
}

/// Counts of a season drawn from the ability model, with the generating
/// abilities and fixed parameters.
pub fn generate_count_season(config: &SynthConfig) -> Result<(FixtureCountTable, AbilityVector, FixedParams)> {
    let world = SynthWorld::build(config)?;
    let counts = world.count_table()?;
    Ok((counts, world.truth.deltas, world.truth.psi))
}

/// Scores of a season drawn from the goal model, with the true lineup terms
/// of `features` when given.
pub fn generate_score_season(config: &SynthConfig, features: Option<&FeatureSpec>) -> Result<Vec<MatchResult>> {
    SynthWorld::build(config)?.match_results(features)
}

/// Every synthetic artifact of a world, written under `dir`.
pub fn write_world(world: &SynthWorld, dir: &Path, features: Option<&FeatureSpec>) -> Result<()> {
    let counts = world.count_table()?;
    let results = world.match_results(features)?;
    let metas = world.fixture_metas(&results);
    write_fixtures(&dir.join("fixtures.csv"), &metas)?;
    write_appearances(&dir.join("appearances.csv"), &world.appearances())?;
    write_touch_log(&dir.join("events.csv"), &world.touch_log(&counts))?;
    counts.write_path(&dir.join("counts.csv"))?;
    let truth = serde_json::to_string_pretty(&world.truth.document())?;
    std::fs::write(dir.join("truth.json"), truth + "\n")
        .map_err(|e| Error::io(format!("writing {}", dir.join("truth.json").display()), e))?;
    Ok(())
}

/// One base type per count column whose events re-aggregate to exactly that
/// column: the column's own type, or the first composite member that no
/// other column counts. Columns without one (chain counts, or composites
/// nested in another column) are left out of the event log.
fn representatives(columns: &[String]) -> Vec<(usize, EventType)> {
    let taxonomy = EventTaxonomy::standard();
    let members: Vec<BTreeSet<EventType>> = columns
        .iter()
        .map(|name| match taxonomy.column(name) {
            Ok(crate::events::Column::Base(t)) => BTreeSet::from([t]),
            Ok(crate::events::Column::Composite(set)) => set,
            _ => BTreeSet::new(),
        })
        .collect();
    let mut out = Vec::new();
    for (c, set) in members.iter().enumerate() {
        let unique = set
            .iter()
            .find(|t| members.iter().enumerate().all(|(o, other)| o == c || !other.contains(t)));
        match unique {
            Some(&t) => out.push((c, t)),
            None => tracing::warn!(column = %columns[c], "no event type maps to this column alone; left out of the event log"),
        }
    }
    out
}
