//! The closed event vocabulary, its four categories and the composite event
//! types built from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! event_types {
    ($($variant:ident),* $(,)?) => {
        /// One of the 39 touch-level event types recorded in the feed.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum EventType {
            $($variant),*
        }

        impl EventType {
            pub const ALL: &'static [EventType] = &[$(EventType::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EventType::$variant => stringify!($variant)),*
                }
            }
        }

        impl FromStr for EventType {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $(stringify!($variant) => Ok(EventType::$variant),)*
                    other => Err(Error::Vocabulary { name: other.to_string(), line: None }),
                }
            }
        }
    };
}

event_types!(
    // Stop
    Card, End, FormationChange, FormationSet, OffsideGiven, PenaltyFaced, Start,
    SubstitutionOff, SubstitutionOn,
    // Control
    Aerial, BallRecovery, BallTouch, ChanceMissed, Dispossessed, Error, Foul, Goal, GoodSkill,
    MissedShots, OffsidePass, Pass, SavedShot, ShotOnPost, TakeOn,
    // Disruption
    BlockedPass, Challenge, Claim, Clearance, Interception, KeeperPickup, OffsideProvoked, Punch,
    Save, Smother, Tackle,
    // Miscellanea
    CornerAwarded, CrossNotClaimed, KeeperSweeper, ShieldBallOpp,
);

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    Stop,
    Control,
    Disruption,
    Miscellanea,
}

/// Windowed composite: involvement in the run-up to a shot.
pub const CHAIN_EVENTS: &str = "ChainEvents";

/// Attacking composites entering the multi-event lineup feature.
pub const ATTACK_EVENTS: [&str; 3] = ["Goal", "Shots", CHAIN_EVENTS];
/// Their defensive counterparts, position for position.
pub const DEFENCE_EVENTS: [&str; 3] = ["GoalStop", "ShotStop", "AntiPass"];

#[derive(Clone, Debug)]
pub struct EventTaxonomy {
    category: BTreeMap<EventType, Category>,
    composites: BTreeMap<String, BTreeSet<EventType>>,
}

impl EventTaxonomy {
    /// The taxonomy of the touch-by-touch feed with the analyst-defined
    /// composites.
    pub fn standard() -> Self {
        use EventType::*;

        let stop = [
            Card, End, FormationChange, FormationSet, OffsideGiven, PenaltyFaced, Start,
            SubstitutionOff, SubstitutionOn,
        ];
        let control = [
            Aerial, BallRecovery, BallTouch, ChanceMissed, Dispossessed, Error, Foul, Goal,
            GoodSkill, MissedShots, OffsidePass, Pass, SavedShot, ShotOnPost, TakeOn,
        ];
        let disruption = [
            BlockedPass, Challenge, Claim, Clearance, Interception, KeeperPickup,
            OffsideProvoked, Punch, Save, Smother, Tackle,
        ];
        let misc = [CornerAwarded, CrossNotClaimed, KeeperSweeper, ShieldBallOpp];

        let mut category = BTreeMap::new();
        for (members, cat) in [
            (&stop[..], Category::Stop),
            (&control[..], Category::Control),
            (&disruption[..], Category::Disruption),
            (&misc[..], Category::Miscellanea),
        ] {
            for &e in members {
                category.insert(e, cat);
            }
        }

        let set = |xs: &[EventType]| xs.iter().copied().collect::<BTreeSet<_>>();
        let mut composites = BTreeMap::new();
        composites.insert(
            "GoalStop".to_string(),
            set(&[
                BallRecovery, Challenge, Claim, Error, Interception, KeeperPickup, Punch, Save,
                Smother, Tackle,
            ]),
        );
        composites.insert(
            "Shots".to_string(),
            set(&[Goal, MissedShots, SavedShot, ShotOnPost]),
        );
        composites.insert(
            "ShotStop".to_string(),
            set(&[
                Challenge, Claim, Interception, KeeperPickup, Punch, Save, Smother, Tackle,
            ]),
        );
        composites.insert(
            "AntiPass".to_string(),
            set(&[
                BallRecovery, BlockedPass, Claim, Clearance, CornerAwarded, CrossNotClaimed,
                Interception, KeeperPickup, OffsideProvoked, Punch, Smother, Tackle,
            ]),
        );
        composites.insert("Control".to_string(), set(&control));
        composites.insert("Disruption".to_string(), set(&disruption));

        EventTaxonomy {
            category,
            composites,
        }
    }

    pub fn category(&self, event: EventType) -> Category {
        self.category[&event]
    }

    pub fn members(&self, category: Category) -> Vec<EventType> {
        self.category
            .iter()
            .filter(|(_, c)| **c == category)
            .map(|(e, _)| *e)
            .collect()
    }

    pub fn composite(&self, name: &str) -> Option<&BTreeSet<EventType>> {
        self.composites.get(name)
    }

    pub fn composite_names(&self) -> impl Iterator<Item = &str> {
        self.composites.keys().map(String::as_str)
    }

    pub fn is_shot(&self, event: EventType) -> bool {
        self.composites["Shots"].contains(&event)
    }

    /// Whether an event survives the active-play filter.
    pub fn is_active_play(&self, event: EventType) -> bool {
        self.category(event) != Category::Stop && event != EventType::OffsideGiven
    }

    /// Every name a count column may carry: active-play base types,
    /// composites and the windowed chain count.
    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = EventType::ALL
            .iter()
            .filter(|e| self.is_active_play(**e))
            .map(|e| e.as_str().to_string())
            .chain(self.composites.keys().cloned())
            .chain(std::iter::once(CHAIN_EVENTS.to_string()))
            .collect();
        names.sort();
        names
    }

    /// Resolves a column name, rejecting anything outside the vocabulary.
    pub fn column(&self, name: &str) -> Result<Column, Error> {
        if name == CHAIN_EVENTS {
            return Ok(Column::Chain);
        }
        if let Some(members) = self.composites.get(name) {
            return Ok(Column::Composite(members.clone()));
        }
        let event: EventType = name.parse()?;
        Ok(Column::Base(event))
    }
}

/// How a count column is computed from the event stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Column {
    Base(EventType),
    Composite(BTreeSet<EventType>),
    Chain,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_sizes_match_the_feed() {
        let t = EventTaxonomy::standard();
        assert_eq!(EventType::ALL.len(), 39);
        assert_eq!(t.members(Category::Stop).len(), 9);
        assert_eq!(t.members(Category::Control).len(), 15);
        assert_eq!(t.members(Category::Disruption).len(), 11);
        assert_eq!(t.members(Category::Miscellanea).len(), 4);
    }

    #[test]
    fn names_round_trip() {
        for e in EventType::ALL {
            assert_eq!(e.as_str().parse::<EventType>().unwrap(), *e);
        }
        let err = "Dribble".parse::<EventType>().unwrap_err();
        assert!(err.to_string().contains("Dribble"));
    }

    #[test]
    fn composites_are_exactly_the_defined_sets() {
        let t = EventTaxonomy::standard();
        let names: Vec<&str> = t.composite_names().collect();
        assert_eq!(
            names,
            ["AntiPass", "Control", "Disruption", "GoalStop", "ShotStop", "Shots"]
        );
        assert_eq!(t.composite("GoalStop").unwrap().len(), 10);
        assert_eq!(t.composite("ShotStop").unwrap().len(), 8);
        assert_eq!(t.composite("AntiPass").unwrap().len(), 12);
        assert!(t.is_shot(EventType::ShotOnPost));
        assert!(!t.is_shot(EventType::ChanceMissed));
    }

    #[test]
    fn column_resolution() {
        let t = EventTaxonomy::standard();
        assert_eq!(t.column("Pass").unwrap(), Column::Base(EventType::Pass));
        assert_eq!(t.column(CHAIN_EVENTS).unwrap(), Column::Chain);
        assert!(matches!(t.column("Shots").unwrap(), Column::Composite(_)));
        assert!(t.column("Dribble").is_err());
    }
}
