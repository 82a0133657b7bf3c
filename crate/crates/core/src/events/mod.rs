//! Touch-by-touch ingestion: parsing the raw log, the active-play filter,
//! composite and windowed event construction, and aggregation to per-fixture
//! player counts.

mod counts;
mod parse;
mod taxonomy;

pub use counts::{aggregate_counts, CountRow, FixtureCountTable};
pub use parse::{
    parse_appearances, parse_fixtures, parse_touch_log, read_appearances, read_fixtures,
    read_touch_log, write_appearances, write_fixtures, write_touch_log, FixtureMeta, TouchLog,
};
pub use taxonomy::{
    Category, Column, EventTaxonomy, EventType, ATTACK_EVENTS, CHAIN_EVENTS, DEFENCE_EVENTS,
};

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{FixtureId, PlayerId, TeamId};

/// Nominal match length; stoppage time is not exposure beyond a full match.
pub const MATCH_MINUTES: f64 = 90.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    FirstHalf,
    SecondHalf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Successful,
    Unsuccessful,
}

/// One row of the touch-by-touch log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawTouchEvent {
    pub minute: u32,
    pub second: u32,
    pub period: Period,
    pub team: TeamId,
    pub player: PlayerId,
    pub event_type: EventType,
    pub outcome: Outcome,
}

impl RawTouchEvent {
    /// Match clock in minutes.
    pub fn clock(&self) -> f64 {
        f64::from(self.minute) + f64::from(self.second) / 60.0
    }

    pub fn is_successful(&self) -> bool {
        self.outcome == Outcome::Successful
    }
}

/// Time on the pitch for one player in one fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerAppearance {
    pub fixture: FixtureId,
    pub player: PlayerId,
    pub team: TeamId,
    pub minutes_played: f64,
    pub tau: f64,
}

impl PlayerAppearance {
    pub fn new(fixture: FixtureId, player: PlayerId, team: TeamId, minutes: f64) -> Result<Self> {
        Ok(PlayerAppearance {
            fixture,
            player,
            team,
            minutes_played: minutes.min(MATCH_MINUTES),
            tau: compute_tau(minutes)?,
        })
    }
}

/// Fraction of a 90 minute match spent on the pitch, clamped to 1.
pub fn compute_tau(minutes_played: f64) -> Result<f64> {
    if !(minutes_played >= 0.0) {
        return Err(Error::Domain(format!(
            "minutes played must be non-negative, got {minutes_played}"
        )));
    }
    Ok((minutes_played / MATCH_MINUTES).min(1.0))
}

/// Drops Stop events and `OffsideGiven`, preserving order.
pub fn filter_events<T>(events: T, taxonomy: &EventTaxonomy) -> Vec<(FixtureId, RawTouchEvent)>
where
    T: IntoIterator<Item = (FixtureId, RawTouchEvent)>,
{
    events
        .into_iter()
        .filter(|(_, e)| taxonomy.is_active_play(e.event_type))
        .collect()
}

/// Counts, for every shot, the players behind the last `window` successful
/// events of the shooting team before it. A player appearing twice in one
/// window is counted twice; windows may span half-time.
pub fn derive_chain_events(
    events: &[RawTouchEvent],
    window: usize,
    taxonomy: &EventTaxonomy,
) -> BTreeMap<PlayerId, u32> {
    assert!(window >= 1, "chain window must be at least 1");
    let mut recent: HashMap<TeamId, VecDeque<PlayerId>> = HashMap::new();
    let mut involvement = BTreeMap::new();
    for e in events {
        if taxonomy.is_shot(e.event_type) {
            if let Some(chain) = recent.get(&e.team) {
                for p in chain {
                    *involvement.entry(*p).or_insert(0) += 1;
                }
            }
        }
        if e.is_successful() {
            let chain = recent.entry(e.team).or_default();
            if chain.len() == window {
                chain.pop_front();
            }
            chain.push_back(e.player);
        }
    }
    involvement
}

/// Minutes on the pitch reconstructed from Start / SubstitutionOn /
/// SubstitutionOff / End markers. Players without a SubstitutionOn enter at
/// kick-off; players without a SubstitutionOff stay until the final whistle
/// (the latest End marker, or 90 minutes).
pub fn derive_appearances(log: &TouchLog) -> Result<Vec<PlayerAppearance>> {
    let mut out = Vec::new();
    for (fixture, events) in log.by_fixture() {
        let final_whistle = events
            .iter()
            .filter(|e| e.event_type == EventType::End)
            .map(RawTouchEvent::clock)
            .fold(MATCH_MINUTES, f64::max);
        let mut spans: BTreeMap<PlayerId, (TeamId, f64, Option<f64>)> = BTreeMap::new();
        for e in &events {
            let span = spans.entry(e.player).or_insert((e.team, 0.0, None));
            if span.0 != e.team {
                return Err(Error::Inconsistent(format!(
                    "player {} appears for teams {} and {} in fixture {fixture}",
                    e.player, span.0, e.team
                )));
            }
            match e.event_type {
                EventType::SubstitutionOn => span.1 = e.clock(),
                EventType::SubstitutionOff => span.2 = Some(e.clock()),
                _ => {}
            }
        }
        for (player, (team, on, off)) in spans {
            let minutes = (off.unwrap_or(final_whistle) - on).max(0.0);
            out.push(PlayerAppearance::new(fixture, player, team, minutes)?);
        }
    }
    Ok(out)
}

/// Explicit appearance records override derived ones for the same
/// (fixture, player).
pub fn merge_appearances(
    derived: Vec<PlayerAppearance>,
    explicit: Vec<PlayerAppearance>,
) -> Vec<PlayerAppearance> {
    let mut merged: BTreeMap<(FixtureId, PlayerId), PlayerAppearance> = derived
        .into_iter()
        .map(|a| ((a.fixture, a.player), a))
        .collect();
    for a in explicit {
        merged.insert((a.fixture, a.player), a);
    }
    merged.into_values().collect()
}

/// Starting eleven of `team`: players marked by a Start event when the feed
/// carries them, otherwise the first players seen who never came on as
/// substitutes. Fails unless exactly eleven are found.
pub fn derive_starters(events: &[RawTouchEvent], team: TeamId) -> Result<Vec<PlayerId>> {
    let team_events: Vec<&RawTouchEvent> = events.iter().filter(|e| e.team == team).collect();
    let mut starters: Vec<PlayerId> = Vec::new();
    let marked: Vec<PlayerId> = team_events
        .iter()
        .filter(|e| e.event_type == EventType::Start)
        .map(|e| e.player)
        .collect();
    if !marked.is_empty() {
        for p in marked {
            if !starters.contains(&p) {
                starters.push(p);
            }
        }
    } else {
        let subs: Vec<PlayerId> = team_events
            .iter()
            .filter(|e| e.event_type == EventType::SubstitutionOn)
            .map(|e| e.player)
            .collect();
        for e in &team_events {
            if !subs.contains(&e.player) && !starters.contains(&e.player) {
                starters.push(e.player);
            }
            if starters.len() == 11 {
                break;
            }
        }
    }
    if starters.len() != 11 {
        return Err(Error::Inconsistent(format!(
            "team {team}: found {} starters, expected 11",
            starters.len()
        )));
    }
    Ok(starters)
}
