//! Monte Carlo prediction intervals for the Poisson rate of one count row.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::events::FixtureCountTable;
use crate::ids::{FixtureId, PlayerId};
use crate::stats::{quantile_sorted, substream};

use super::VariationalState;

/// Central `level` interval of η for (player, fixture, event) under q: every
/// ability entering the rate is drawn from its factor, `n_samples` times.
#[allow(clippy::too_many_arguments)]
pub fn eta_prediction_interval(
    player: PlayerId,
    fixture: FixtureId,
    event: &str,
    state: &VariationalState,
    counts: &FixtureCountTable,
    level: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("interval level must be in (0, 1), got {level}")));
    }
    if n_samples == 0 {
        return Err(Error::Domain("at least one sample is needed".into()));
    }
    let e = state.pair.index(event)?;
    let o = 1 - e;
    let psi = state.psi[e];
    let rows: Vec<_> = counts.rows().iter().filter(|r| r.fixture == fixture).collect();
    let target = rows
        .iter()
        .find(|r| r.player == player)
        .ok_or_else(|| {
            Error::Referential(format!("player {player} does not appear in fixture {fixture}"))
        })?;
    let tau = target.tau;

    // log η = Σ_j c_j Δ_j + const, with Δ_j independent Gaussians.
    let mut terms: Vec<(f64, f64, f64)> = Vec::new();
    let factor = |p: PlayerId, ev: usize| -> Result<(f64, f64)> {
        let i = state.player_index(p).ok_or_else(|| {
            Error::Referential(format!("player {p} has no variational factor"))
        })?;
        Ok((state.mu[i][ev], state.sigma[i][ev]))
    };
    let (mu_i, sd_i) = factor(player, e)?;
    let mut self_coef = 1.0;
    for r in rows.iter().filter(|r| r.tau > 0.0) {
        if r.team == target.team {
            if r.player == player {
                self_coef += tau * psi.lambda1;
            } else {
                let (m, s) = factor(r.player, e)?;
                terms.push((tau * psi.lambda1, m, s));
            }
        } else {
            let (m, s) = factor(r.player, o)?;
            terms.push((-tau * psi.lambda2, m, s));
        }
    }
    terms.push((self_coef, mu_i, sd_i));
    let offset = if target.home { psi.gamma } else { 0.0 };

    let mut rng = substream(seed, 0);
    let mut draws: Vec<f64> = (0..n_samples)
        .map(|_| {
            let log_eta: f64 = terms
                .iter()
                .map(|&(c, m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c * (m + s * z)
                })
                .sum();
            (log_eta + offset).exp()
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((
        quantile_sorted(&draws, alpha / 2.0),
        quantile_sorted(&draws, 1.0 - alpha / 2.0),
    ))
}
