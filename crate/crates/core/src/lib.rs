//! Player ability inference from touch-by-touch event counts by closed-form
//! mean-field variational inference, and a hierarchical Poisson goal model
//! that uses those abilities to predict over/under 2.5 goals.

pub mod ability;
pub mod analytics;
pub mod error;
pub mod events;
pub mod goals;
pub mod ids;
pub mod stats;
pub mod synth;
pub mod variational;

pub use error::{Error, Result};
pub use ids::{FixtureId, PlayerId, TeamId};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
