//! Delimited-text readers and writers for the raw feed files.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ids::{FixtureId, PlayerId, TeamId};

use super::{EventType, Outcome, Period, PlayerAppearance, RawTouchEvent};

/// One fixture of the calendar. Goals are present once the match is played.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureMeta {
    pub fixture: FixtureId,
    pub home_team: TeamId,
    pub away_team: TeamId,
    pub date: String,
    pub block_label: Option<String>,
    pub home_goals: Option<u32>,
    pub away_goals: Option<u32>,
}

impl FixtureMeta {
    pub fn is_home(&self, team: TeamId) -> Option<bool> {
        if team == self.home_team {
            Some(true)
        } else if team == self.away_team {
            Some(false)
        } else {
            None
        }
    }

    pub fn opponent(&self, team: TeamId) -> Option<TeamId> {
        self.is_home(team)
            .map(|home| if home { self.away_team } else { self.home_team })
    }
}

/// A parsed event log, each event tagged with its fixture, in file order.
#[derive(Clone, Debug, Default)]
pub struct TouchLog {
    pub events: Vec<(FixtureId, RawTouchEvent)>,
}

impl TouchLog {
    /// Events grouped by fixture, file order preserved within each group.
    pub fn by_fixture(&self) -> BTreeMap<FixtureId, Vec<RawTouchEvent>> {
        let mut out: BTreeMap<FixtureId, Vec<RawTouchEvent>> = BTreeMap::new();
        for (f, e) in &self.events {
            out.entry(*f).or_default().push(*e);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Header-indexed access to the fields of one record.
struct Row<'a> {
    source: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn raw(&self, name: &str) -> Option<&str> {
        self.columns
            .get(name)
            .and_then(|&i| self.record.get(i))
            .map(str::trim)
    }

    fn text(&self, name: &str) -> Result<&str> {
        self.raw(name)
            .ok_or_else(|| self.err(format!("missing field {name}")))
    }

    fn parse<T: FromStr>(&self, name: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.text(name)?;
        s.parse()
            .map_err(|e| self.err(format!("field {name} = {s:?}: {e}")))
    }

    fn optional<T: FromStr>(&self, name: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(name) {
            None | Some("") => Ok(None),
            Some(_) => self.parse(name).map(Some),
        }
    }
}

fn for_each_record<R, F>(reader: R, source: &str, required: &[&str], mut f: F) -> Result<()>
where
    R: Read,
    F: FnMut(&Row) -> Result<()>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    for name in required {
        if !columns.contains_key(*name) {
            return Err(Error::Parse {
                source_name: source.to_string(),
                line: 1,
                message: format!("header lacks column {name}"),
            });
        }
    }
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            source_name: source.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            return Ok(());
        }
        let line = record.position().map_or(0, |p| p.line());
        f(&Row {
            source,
            line,
            record: &record,
            columns: &columns,
        })?;
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "FirstHalf" => Ok(Period::FirstHalf),
            "SecondHalf" => Ok(Period::SecondHalf),
            other => Err(format!("unknown period {other:?}")),
        }
    }
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::FirstHalf => "FirstHalf",
            Period::SecondHalf => "SecondHalf",
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Successful" => Ok(Outcome::Successful),
            "Unsuccessful" => Ok(Outcome::Unsuccessful),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Successful => "Successful",
            Outcome::Unsuccessful => "Unsuccessful",
        }
    }
}

const FIXTURE_COLUMNS: [&str; 4] = ["fixture_id", "home_team_id", "away_team_id", "date"];

pub fn parse_fixtures<R: Read>(reader: R, source: &str) -> Result<BTreeMap<FixtureId, FixtureMeta>> {
    let mut out = BTreeMap::new();
    for_each_record(reader, source, &FIXTURE_COLUMNS, |row| {
        let meta = FixtureMeta {
            fixture: row.parse("fixture_id")?,
            home_team: row.parse("home_team_id")?,
            away_team: row.parse("away_team_id")?,
            date: row.text("date")?.to_string(),
            block_label: row
                .raw("block_label")
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            home_goals: row.optional("home_goals")?,
            away_goals: row.optional("away_goals")?,
        };
        if meta.home_team == meta.away_team {
            return Err(row.err(format!("team {} plays itself", meta.home_team)));
        }
        if out.insert(meta.fixture, meta.clone()).is_some() {
            return Err(row.err(format!("duplicate fixture {}", meta.fixture)));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn read_fixtures(path: &Path) -> Result<BTreeMap<FixtureId, FixtureMeta>> {
    parse_fixtures(open(path)?, &path.display().to_string())
}

pub fn write_fixtures<'a, I>(path: &Path, fixtures: I) -> Result<()>
where
    I: IntoIterator<Item = &'a FixtureMeta>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "fixture_id",
        "home_team_id",
        "away_team_id",
        "date",
        "block_label",
        "home_goals",
        "away_goals",
    ])?;
    let opt = |g: Option<u32>| g.map(|g| g.to_string()).unwrap_or_default();
    for f in fixtures {
        w.write_record([
            f.fixture.to_string(),
            f.home_team.to_string(),
            f.away_team.to_string(),
            f.date.clone(),
            f.block_label.clone().unwrap_or_default(),
            opt(f.home_goals),
            opt(f.away_goals),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

const EVENT_COLUMNS: [&str; 8] = [
    "fixture_id",
    "minute",
    "second",
    "period",
    "team_id",
    "player_id",
    "type",
    "outcome",
];

/// Parses an event log against the fixture calendar. Every row becomes one
/// event; the clock must not run backwards within a (fixture, period).
pub fn parse_touch_log<R: Read>(
    reader: R,
    source: &str,
    fixtures: &BTreeMap<FixtureId, FixtureMeta>,
) -> Result<TouchLog> {
    let mut events = Vec::new();
    let mut clock: HashMap<(FixtureId, Period), (u32, u32)> = HashMap::new();
    for_each_record(reader, source, &EVENT_COLUMNS, |row| {
        let fixture: FixtureId = row.parse("fixture_id")?;
        let type_name = row.text("type")?;
        let event_type: EventType = type_name.parse().map_err(|_| Error::Vocabulary {
            name: type_name.to_string(),
            line: Some(row.line),
        })?;
        let event = RawTouchEvent {
            minute: row.parse("minute")?,
            second: row.parse("second")?,
            period: row.parse("period")?,
            team: row.parse("team_id")?,
            player: row.parse("player_id")?,
            event_type,
            outcome: row.parse("outcome")?,
        };
        if event.second > 59 {
            return Err(row.err(format!("second {} outside 0..=59", event.second)));
        }
        let meta = fixtures.get(&fixture).ok_or_else(|| {
            Error::Referential(format!(
                "{source}, line {}: fixture {fixture} is not in the fixture list",
                row.line
            ))
        })?;
        if meta.is_home(event.team).is_none() {
            return Err(Error::Referential(format!(
                "{source}, line {}: team {} does not play in fixture {fixture}",
                row.line, event.team
            )));
        }
        let now = (event.minute, event.second);
        let last = clock.entry((fixture, event.period)).or_insert(now);
        if now < *last {
            return Err(row.err(format!(
                "clock runs backwards in fixture {fixture} ({}:{:02} after {}:{:02})",
                now.0, now.1, last.0, last.1
            )));
        }
        *last = now;
        events.push((fixture, event));
        Ok(())
    })?;
    Ok(TouchLog { events })
}

pub fn read_touch_log(path: &Path, fixtures: &BTreeMap<FixtureId, FixtureMeta>) -> Result<TouchLog> {
    parse_touch_log(open(path)?, &path.display().to_string(), fixtures)
}

pub fn write_touch_log(path: &Path, log: &TouchLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(EVENT_COLUMNS)?;
    for (f, e) in &log.events {
        w.write_record([
            f.to_string(),
            e.minute.to_string(),
            e.second.to_string(),
            e.period.as_str().to_string(),
            e.team.to_string(),
            e.player.to_string(),
            e.event_type.as_str().to_string(),
            e.outcome.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

const APPEARANCE_COLUMNS: [&str; 4] = ["fixture_id", "player_id", "team_id", "minutes_played"];

pub fn parse_appearances<R: Read>(reader: R, source: &str) -> Result<Vec<PlayerAppearance>> {
    let mut out = Vec::new();
    for_each_record(reader, source, &APPEARANCE_COLUMNS, |row| {
        let minutes: f64 = row.parse("minutes_played")?;
        let appearance = PlayerAppearance::new(
            row.parse("fixture_id")?,
            row.parse::<PlayerId>("player_id")?,
            row.parse("team_id")?,
            minutes,
        )
        .map_err(|e| row.err(e.to_string()))?;
        out.push(appearance);
        Ok(())
    })?;
    Ok(out)
}

pub fn read_appearances(path: &Path) -> Result<Vec<PlayerAppearance>> {
    parse_appearances(open(path)?, &path.display().to_string())
}

pub fn write_appearances(path: &Path, appearances: &[PlayerAppearance]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(APPEARANCE_COLUMNS)?;
    for a in appearances {
        w.write_record([
            a.fixture.to_string(),
            a.player.to_string(),
            a.team.to_string(),
            a.minutes_played.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calendar() -> BTreeMap<FixtureId, FixtureMeta> {
        let text = "fixture_id,home_team_id,away_team_id,date\n1,663,700,2013-08-17\n";
        parse_fixtures(text.as_bytes(), "fixtures").unwrap()
    }

    const HEADER: &str = "fixture_id,minute,second,period,team_id,player_id,type,outcome\n";

    #[test]
    fn parses_a_feed_row() {
        let text = format!("{HEADER}1,0,1,FirstHalf,663,91242,Pass,Successful\n");
        let log = parse_touch_log(text.as_bytes(), "events", &calendar()).unwrap();
        assert_eq!(
            log.events,
            vec![(
                FixtureId(1),
                RawTouchEvent {
                    minute: 0,
                    second: 1,
                    period: Period::FirstHalf,
                    team: TeamId(663),
                    player: PlayerId(91242),
                    event_type: EventType::Pass,
                    outcome: Outcome::Successful,
                }
            )]
        );
    }

    #[test]
    fn empty_log_is_empty() {
        let log = parse_touch_log(HEADER.as_bytes(), "events", &calendar()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn unknown_type_names_the_offender() {
        let text = format!("{HEADER}1,0,1,FirstHalf,663,5,Dribble,Successful\n");
        let err = parse_touch_log(text.as_bytes(), "events", &calendar()).unwrap_err();
        assert!(matches!(err, Error::Vocabulary { line: Some(2), .. }));
        assert!(err.to_string().contains("Dribble"));
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = format!(
            "{HEADER}1,0,1,FirstHalf,663,5,Pass,Successful\n1,x,1,FirstHalf,663,5,Pass,Successful\n"
        );
        match parse_touch_log(text.as_bytes(), "events", &calendar()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("minute"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fixture_is_referential() {
        let text = format!("{HEADER}9,0,1,FirstHalf,663,5,Pass,Successful\n");
        let err = parse_touch_log(text.as_bytes(), "events", &calendar()).unwrap_err();
        assert!(matches!(err, Error::Referential(_)));
    }

    #[test]
    fn backwards_clock_is_rejected() {
        let text = format!(
            "{HEADER}1,5,0,FirstHalf,663,5,Pass,Successful\n1,4,59,FirstHalf,663,5,Pass,Successful\n"
        );
        assert!(parse_touch_log(text.as_bytes(), "events", &calendar()).is_err());
        let ok = format!(
            "{HEADER}1,46,0,SecondHalf,663,5,Pass,Successful\n1,44,0,FirstHalf,663,5,Pass,Successful\n"
        );
        assert_eq!(
            parse_touch_log(ok.as_bytes(), "events", &calendar())
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn fixtures_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixtures.csv");
        let mut fx = calendar();
        let meta = fx.get_mut(&FixtureId(1)).unwrap();
        meta.block_label = Some("0".into());
        meta.home_goals = Some(2);
        meta.away_goals = Some(1);
        write_fixtures(&path, fx.values()).unwrap();
        assert_eq!(read_fixtures(&path).unwrap(), fx);
    }
}
