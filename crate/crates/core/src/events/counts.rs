//! Per-fixture, per-player count tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ids::{FixtureId, PlayerId, TeamId};

use super::{
    derive_chain_events, Column, EventTaxonomy, FixtureMeta, PlayerAppearance, RawTouchEvent,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CountRow {
    pub fixture: FixtureId,
    pub player: PlayerId,
    pub team: TeamId,
    pub home: bool,
    pub tau: f64,
    /// Aligned with the table's columns.
    pub counts: Vec<u32>,
}

/// Counts per (fixture, player), one column per event type or composite.
#[derive(Clone, Debug, PartialEq)]
pub struct FixtureCountTable {
    columns: Vec<String>,
    rows: Vec<CountRow>,
}

const KEY_COLUMNS: [&str; 5] = ["fixture_id", "player_id", "team_id", "home", "tau"];

impl FixtureCountTable {
    /// Builds a table, sorting columns by name and rows by (fixture, player),
    /// and checking row uniqueness and the two-teams-one-home shape.
    pub fn new(columns: Vec<String>, rows: Vec<CountRow>) -> Result<Self> {
        let mut order: Vec<usize> = (0..columns.len()).collect();
        order.sort_by(|&a, &b| columns[a].cmp(&columns[b]));
        let sorted: Vec<String> = order.iter().map(|&i| columns[i].clone()).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Inconsistent("duplicate count column".into()));
        }
        let mut rows: Vec<CountRow> = rows
            .into_iter()
            .map(|mut r| {
                if r.counts.len() != columns.len() {
                    return Err(Error::Inconsistent(format!(
                        "row ({}, {}) has {} counts for {} columns",
                        r.fixture,
                        r.player,
                        r.counts.len(),
                        columns.len()
                    )));
                }
                r.counts = order.iter().map(|&i| r.counts[i]).collect();
                Ok(r)
            })
            .collect::<Result<_>>()?;
        rows.sort_by_key(|r| (r.fixture, r.player));
        let table = FixtureCountTable {
            columns: sorted,
            rows,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if (w[0].fixture, w[0].player) == (w[1].fixture, w[1].player) {
                return Err(Error::Inconsistent(format!(
                    "player {} listed twice in fixture {}",
                    w[0].player, w[0].fixture
                )));
            }
        }
        for r in &self.rows {
            if !(0.0..=1.0).contains(&r.tau) {
                return Err(Error::Domain(format!(
                    "tau {} outside [0, 1] for player {} in fixture {}",
                    r.tau, r.player, r.fixture
                )));
            }
        }
        let mut sides: BTreeMap<FixtureId, BTreeMap<TeamId, bool>> = BTreeMap::new();
        for r in &self.rows {
            let teams = sides.entry(r.fixture).or_default();
            if *teams.entry(r.team).or_insert(r.home) != r.home {
                return Err(Error::Inconsistent(format!(
                    "team {} has mixed home flags in fixture {}",
                    r.team, r.fixture
                )));
            }
        }
        for (fixture, teams) in &sides {
            let homes = teams.values().filter(|h| **h).count();
            if teams.len() != 2 || homes != 1 {
                return Err(Error::Inconsistent(format!(
                    "fixture {fixture} needs two teams with exactly one at home, found {} team(s) and {homes} home",
                    teams.len()
                )));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .binary_search_by(|c| c.as_str().cmp(name))
            .map_err(|_| Error::Referential(format!("count table has no column {name}")))
    }

    pub fn fixtures(&self) -> BTreeSet<FixtureId> {
        self.rows.iter().map(|r| r.fixture).collect()
    }

    pub fn players(&self) -> BTreeSet<PlayerId> {
        self.rows.iter().map(|r| r.player).collect()
    }

    /// Rows belonging to any of the given fixtures.
    pub fn restrict(&self, fixtures: &BTreeSet<FixtureId>) -> FixtureCountTable {
        FixtureCountTable {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| fixtures.contains(&r.fixture))
                .cloned()
                .collect(),
        }
    }

    /// Keeps only the named columns.
    pub fn select(&self, names: &[&str]) -> Result<FixtureCountTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<_>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| CountRow {
                counts: idx.iter().map(|&i| r.counts[i]).collect(),
                ..r.clone()
            })
            .collect();
        FixtureCountTable::new(names.iter().map(|n| n.to_string()).collect(), rows)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = KEY_COLUMNS
            .iter()
            .copied()
            .chain(self.columns.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.fixture.to_string(),
                r.player.to_string(),
                r.team.to_string(),
                (r.home as u8).to_string(),
                r.tau.to_string(),
            ];
            rec.extend(r.counts.iter().map(u32::to_string));
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::io("writing count table", e))
    }

    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < KEY_COLUMNS.len() || names[..KEY_COLUMNS.len()] != KEY_COLUMNS {
            return Err(Error::Parse {
                source_name: source.into(),
                line: 1,
                message: format!("count table header must start with {}", KEY_COLUMNS.join(",")),
            });
        }
        let columns: Vec<String> = names[KEY_COLUMNS.len()..]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                source_name: source.into(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |field: &str, value: &str| Error::Parse {
                source_name: source.into(),
                line,
                message: format!("field {field} = {value:?} is malformed"),
            };
            let field = |i: usize| -> Result<&str> {
                rec.get(i)
                    .map(str::trim)
                    .ok_or_else(|| bad(names.get(i).copied().unwrap_or("?"), ""))
            };
            let home = match field(3)? {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(bad("home", other)),
            };
            let counts = (KEY_COLUMNS.len()..names.len())
                .map(|i| {
                    let v = field(i)?;
                    v.parse::<u32>().map_err(|_| bad(names[i], v))
                })
                .collect::<Result<Vec<u32>>>()?;
            let parse_id = |i: usize| -> Result<u64> {
                let v = field(i)?;
                v.parse().map_err(|_| bad(names[i], v))
            };
            let tau_text = field(4)?;
            rows.push(CountRow {
                fixture: FixtureId(parse_id(0)?),
                player: PlayerId(parse_id(1)?),
                team: TeamId(parse_id(2)?),
                home,
                tau: tau_text.parse().map_err(|_| bad("tau", tau_text))?,
                counts,
            });
        }
        FixtureCountTable::new(columns, rows)
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(file)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file =
            File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_csv(file, &path.display().to_string())
    }
}

/// Builds the count table from a filtered event stream. One row per
/// appearance; requested columns are base types, composites, or the
/// windowed chain count.
pub fn aggregate_counts(
    events: &[(FixtureId, RawTouchEvent)],
    fixtures: &BTreeMap<FixtureId, FixtureMeta>,
    appearances: &[PlayerAppearance],
    taxonomy: &EventTaxonomy,
    requested: &[String],
) -> Result<FixtureCountTable> {
    let resolved: Vec<Column> = requested
        .iter()
        .map(|n| taxonomy.column(n))
        .collect::<Result<_>>()?;

    let mut index: HashMap<(FixtureId, PlayerId), usize> = HashMap::new();
    let mut rows = Vec::with_capacity(appearances.len());
    for a in appearances {
        let meta = fixtures.get(&a.fixture).ok_or_else(|| {
            Error::Referential(format!(
                "appearance of player {} in unknown fixture {}",
                a.player, a.fixture
            ))
        })?;
        let home = meta.is_home(a.team).ok_or_else(|| {
            Error::Referential(format!(
                "player {} listed for team {}, which does not play fixture {}",
                a.player, a.team, a.fixture
            ))
        })?;
        if index.insert((a.fixture, a.player), rows.len()).is_some() {
            return Err(Error::Inconsistent(format!(
                "player {} has two appearance records in fixture {}",
                a.player, a.fixture
            )));
        }
        rows.push(CountRow {
            fixture: a.fixture,
            player: a.player,
            team: a.team,
            home,
            tau: a.tau,
            counts: vec![0; resolved.len()],
        });
    }

    let mut missing: BTreeSet<(FixtureId, PlayerId)> = BTreeSet::new();
    for (fixture, e) in events {
        let Some(&r) = index.get(&(*fixture, e.player)) else {
            missing.insert((*fixture, e.player));
            continue;
        };
        if rows[r].team != e.team {
            return Err(Error::Inconsistent(format!(
                "player {} recorded for team {} in fixture {fixture} but appears for team {}",
                e.player, e.team, rows[r].team
            )));
        }
        for (c, col) in resolved.iter().enumerate() {
            let hit = match col {
                Column::Base(t) => *t == e.event_type,
                Column::Composite(members) => members.contains(&e.event_type),
                Column::Chain => false,
            };
            if hit {
                rows[r].counts[c] += 1;
            }
        }
    }
    if !missing.is_empty() {
        let pairs: Vec<String> = missing
            .iter()
            .map(|(f, p)| format!("(fixture {f}, player {p})"))
            .collect();
        return Err(Error::Referential(format!(
            "events by players without an appearance record: {}",
            pairs.join(", ")
        )));
    }

    if let Some(c) = resolved.iter().position(|c| *c == Column::Chain) {
        let mut by_fixture: BTreeMap<FixtureId, Vec<RawTouchEvent>> = BTreeMap::new();
        for (f, e) in events {
            by_fixture.entry(*f).or_default().push(*e);
        }
        for (fixture, evs) in by_fixture {
            for (player, n) in derive_chain_events(&evs, 5, taxonomy) {
                rows[index[&(fixture, player)]].counts[c] = n;
            }
        }
    }

    FixtureCountTable::new(requested.to_vec(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{EventType, Outcome, Period, CHAIN_EVENTS};

    fn meta() -> BTreeMap<FixtureId, FixtureMeta> {
        BTreeMap::from([(
            FixtureId(1483412),
            FixtureMeta {
                fixture: FixtureId(1483412),
                home_team: TeamId(1),
                away_team: TeamId(2),
                date: "2013-08-17".into(),
                block_label: None,
                home_goals: None,
                away_goals: None,
            },
        )])
    }

    fn ev(team: u64, player: u64, t: EventType) -> (FixtureId, RawTouchEvent) {
        (
            FixtureId(1483412),
            RawTouchEvent {
                minute: 10,
                second: 0,
                period: Period::FirstHalf,
                team: TeamId(team),
                player: PlayerId(player),
                event_type: t,
                outcome: Outcome::Successful,
            },
        )
    }

    fn apps() -> Vec<PlayerAppearance> {
        vec![
            PlayerAppearance::new(FixtureId(1483412), PlayerId(17), TeamId(1), 90.0).unwrap(),
            PlayerAppearance::new(FixtureId(1483412), PlayerId(18), TeamId(1), 30.0).unwrap(),
            PlayerAppearance::new(FixtureId(1483412), PlayerId(40), TeamId(2), 90.0).unwrap(),
        ]
    }

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_multiplicity_and_composites() {
        let mut events: Vec<_> = (0..97).map(|_| ev(1, 17, EventType::Pass)).collect();
        events.push(ev(1, 17, EventType::Goal));
        events.push(ev(1, 17, EventType::SavedShot));
        events.push(ev(1, 17, EventType::SavedShot));
        let t = EventTaxonomy::standard();
        let table =
            aggregate_counts(&events, &meta(), &apps(), &t, &cols(&["Shots", "Pass", "Goal"]))
                .unwrap();
        assert_eq!(table.columns(), ["Goal", "Pass", "Shots"]);
        let row = &table.rows()[0];
        assert_eq!(row.player, PlayerId(17));
        assert_eq!(row.counts, vec![1, 97, 3]);
        let idle = &table.rows()[1];
        assert_eq!(idle.counts, vec![0, 0, 0]);
        assert!((idle.tau - 1.0 / 3.0).abs() < 1e-15);
        assert!(table.rows()[0].home && !table.rows()[2].home);
    }

    #[test]
    fn chain_column_is_windowed() {
        let events = vec![
            ev(1, 18, EventType::Pass),
            ev(1, 17, EventType::Goal),
            ev(2, 40, EventType::Clearance),
        ];
        let t = EventTaxonomy::standard();
        let table = aggregate_counts(&events, &meta(), &apps(), &t, &cols(&[CHAIN_EVENTS])).unwrap();
        let chain: Vec<u32> = table.rows().iter().map(|r| r.counts[0]).collect();
        assert_eq!(chain, vec![0, 1, 0]);
    }

    #[test]
    fn missing_appearance_lists_the_pair() {
        let events = vec![ev(1, 99, EventType::Pass)];
        let t = EventTaxonomy::standard();
        let err = aggregate_counts(&events, &meta(), &apps(), &t, &cols(&["Pass"])).unwrap_err();
        assert!(matches!(err, Error::Referential(_)));
        assert!(err.to_string().contains("player 99"));
    }

    #[test]
    fn csv_round_trip() {
        let events = vec![ev(1, 17, EventType::Pass), ev(2, 40, EventType::Tackle)];
        let t = EventTaxonomy::standard();
        let table =
            aggregate_counts(&events, &meta(), &apps(), &t, &cols(&["Tackle", "Pass"])).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("fixture_id,player_id,team_id,home,tau,Pass,Tackle\n"));
        let back = FixtureCountTable::read_csv(buf.as_slice(), "counts").unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn one_sided_fixture_is_rejected() {
        let rows = vec![CountRow {
            fixture: FixtureId(1),
            player: PlayerId(1),
            team: TeamId(1),
            home: true,
            tau: 1.0,
            counts: vec![0],
        }];
        assert!(FixtureCountTable::new(cols(&["Goal"]), rows).is_err());
    }
}
