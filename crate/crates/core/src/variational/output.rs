//! The JSON posterior document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ability::{EventPair, Psi};
use crate::error::{Error, Result};
use crate::ids::PlayerId;

use super::{ElboTrace, VariationalState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub elbo: f64,
}

/// Fitted factors by event type and player, the fixed parameters by event
/// type, and the ELBO trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDocument {
    pub pair: [String; 2],
    pub posterior: BTreeMap<String, BTreeMap<PlayerId, Factor>>,
    pub psi: BTreeMap<String, Psi>,
    pub trace: Vec<TraceEntry>,
}

impl PosteriorDocument {
    pub fn new(state: &VariationalState, trace: &ElboTrace) -> Self {
        let names = state.pair.names();
        let mut posterior = BTreeMap::new();
        let mut psi = BTreeMap::new();
        for (e, name) in names.iter().enumerate() {
            let factors = state
                .players
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (
                        *p,
                        Factor {
                            mu: state.mu[i][e],
                            sigma: state.sigma[i][e],
                        },
                    )
                })
                .collect();
            posterior.insert(name.to_string(), factors);
            psi.insert(name.to_string(), state.psi[e]);
        }
        PosteriorDocument {
            pair: [names[0].to_string(), names[1].to_string()],
            posterior,
            psi,
            trace: trace
                .points
                .iter()
                .map(|p| TraceEntry {
                    iter: p.iter,
                    elbo: p.elbo,
                })
                .collect(),
        }
    }

    pub fn state(&self) -> Result<VariationalState> {
        let pair = EventPair::new(self.pair[0].clone(), self.pair[1].clone())?;
        let section = |name: &str| {
            self.posterior
                .get(name)
                .ok_or_else(|| Error::Referential(format!("posterior lacks event type {name}")))
        };
        let (first, second) = (section(&pair.e1)?, section(&pair.e2)?);
        let players: Vec<PlayerId> = first.keys().copied().collect();
        if second.keys().ne(first.keys()) {
            return Err(Error::Inconsistent(
                "posterior event types cover different players".into(),
            ));
        }
        let mut mu = Vec::with_capacity(players.len());
        let mut sigma = Vec::with_capacity(players.len());
        for p in &players {
            let (a, b) = (first[p], second[p]);
            mu.push([a.mu, b.mu]);
            sigma.push([a.sigma, b.sigma]);
        }
        let psi_of = |name: &str| {
            self.psi
                .get(name)
                .copied()
                .ok_or_else(|| Error::Referential(format!("psi lacks event type {name}")))
        };
        let state = VariationalState {
            psi: [psi_of(&pair.e1)?, psi_of(&pair.e2)?],
            pair,
            players,
            mu,
            sigma,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
