//! Mean-field Gaussian variational inference for the ability model: the
//! closed-form ELBO, its analytic gradient, the optimizer and posterior
//! output.

mod fit;
mod interval;
mod output;

pub use fit::{fit, fit_from, ElboTrace, OptimizerConfig, TracePoint};
pub use interval::eta_prediction_interval;
pub use output::PosteriorDocument;

use std::f64::consts::PI;

use crate::ability::{EventPair, PairDesign, PriorSpec, Psi};
use crate::error::{Error, Result};
use crate::events::FixtureCountTable;
use crate::ids::PlayerId;

/// Gaussian variational factors for every player and both event types of a
/// pair, with the fixed parameters of each event type.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalState {
    pub pair: EventPair,
    /// Sorted ascending.
    pub players: Vec<PlayerId>,
    pub mu: Vec<[f64; 2]>,
    pub sigma: Vec<[f64; 2]>,
    pub psi: [Psi; 2],
}

/// Starting value of both lambdas.
pub const INITIAL_LAMBDA: f64 = 1e-3;

impl VariationalState {
    /// Every factor at the prior, gamma at 0 and small lambdas.
    pub fn initial(players: Vec<PlayerId>, pair: EventPair, prior: &PriorSpec) -> Self {
        let mut players = players;
        players.sort();
        players.dedup();
        let n = players.len();
        VariationalState {
            pair,
            players,
            mu: vec![[prior.m; 2]; n],
            sigma: vec![[prior.s; 2]; n],
            psi: [Psi {
                lambda1: INITIAL_LAMBDA,
                lambda2: INITIAL_LAMBDA,
                gamma: 0.0,
            }; 2],
        }
    }

    pub fn for_counts(counts: &FixtureCountTable, pair: EventPair, prior: &PriorSpec) -> Self {
        Self::initial(counts.players().into_iter().collect(), pair, prior)
    }

    pub fn player_index(&self, player: PlayerId) -> Option<usize> {
        self.players.binary_search(&player).ok()
    }

    /// (μ, σ) of one factor.
    pub fn get(&self, player: PlayerId, event: &str) -> Result<(f64, f64)> {
        let e = self.pair.index(event)?;
        let i = self.player_index(player).ok_or_else(|| {
            Error::Referential(format!("player {player} has no variational factor"))
        })?;
        Ok((self.mu[i][e], self.sigma[i][e]))
    }

    /// Number of free parameters: (μ, σ) per factor plus three per event type.
    pub fn n_params(&self) -> usize {
        4 * self.players.len() + 6
    }

    /// Unconstrained coordinates: μ, then log σ, then (log λ1, log λ2, γ)
    /// per event type.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend(self.mu.iter().flatten());
        out.extend(self.sigma.iter().flatten().map(|s| s.ln()));
        for p in &self.psi {
            out.extend([p.lambda1.ln(), p.lambda2.ln(), p.gamma]);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let n = self.players.len();
        assert_eq!(params.len(), 4 * n + 6);
        for i in 0..n {
            for e in 0..2 {
                self.mu[i][e] = params[2 * i + e];
                self.sigma[i][e] = params[2 * n + 2 * i + e].exp();
            }
        }
        for e in 0..2 {
            let base = 4 * n + 3 * e;
            self.psi[e] = Psi {
                lambda1: params[base].exp(),
                lambda2: params[base + 1].exp(),
                gamma: params[base + 2],
            };
        }
    }

    /// Human-readable name of a coordinate of [`Self::to_params`].
    pub fn coordinate_name(&self, k: usize) -> String {
        let n = self.players.len();
        let names = self.pair.names();
        if k < 2 * n {
            format!("mu[{}][{}]", self.players[k / 2], names[k % 2])
        } else if k < 4 * n {
            let j = k - 2 * n;
            format!("log_sigma[{}][{}]", self.players[j / 2], names[j % 2])
        } else {
            let j = k - 4 * n;
            let what = ["log_lambda1", "log_lambda2", "gamma"][j % 3];
            format!("{what}[{}]", names[j / 3])
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, s) in self.sigma.iter().enumerate() {
            for e in 0..2 {
                if !(s[e] > 0.0) {
                    return Err(Error::Domain(format!(
                        "sigma for player {} must be positive, got {}",
                        self.players[i], s[e]
                    )));
                }
            }
        }
        for p in &self.psi {
            p.validate()?;
        }
        Ok(())
    }
}

/// `E_q[log q(Δ)]` for a Gaussian factor.
pub fn entropy_term(_mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(-0.5 * (2.0 * PI * sigma * sigma).ln() - 0.5)
}

/// `E_q[log π(Δ)]` under the Gaussian prior.
pub fn prior_term(mu: f64, sigma: f64, prior: &PriorSpec) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be non-negative, got {sigma}")));
    }
    prior.validate()?;
    let (m, s) = (prior.m, prior.s);
    Ok(-0.5 * (2.0 * PI * s * s).ln() - (sigma * sigma + mu * mu - 2.0 * m * mu + m * m) / (2.0 * s * s))
}

/// Gradient of the ELBO in the unconstrained coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboGradient {
    pub mu: Vec<[f64; 2]>,
    pub log_sigma: Vec<[f64; 2]>,
    pub log_lambda1: [f64; 2],
    pub log_lambda2: [f64; 2],
    pub gamma: [f64; 2],
}

impl ElboGradient {
    /// Laid out like [`VariationalState::to_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.mu.len() + 6);
        out.extend(self.mu.iter().flatten());
        out.extend(self.log_sigma.iter().flatten());
        for e in 0..2 {
            out.extend([self.log_lambda1[e], self.log_lambda2[e], self.gamma[e]]);
        }
        out
    }
}

/// The ELBO of one pair's count table, compiled once for repeated
/// evaluation.
#[derive(Clone, Debug)]
pub struct Objective {
    design: PairDesign,
    prior: PriorSpec,
    /// State index of every design player.
    to_state: Vec<usize>,
    n_state: usize,
}

impl Objective {
    /// Compiles `counts` against the player set of `state`.
    pub fn new(
        counts: &FixtureCountTable,
        state: &VariationalState,
        prior: &PriorSpec,
    ) -> Result<Self> {
        prior.validate()?;
        let design = PairDesign::new(counts, &state.pair)?;
        let to_state = design
            .players
            .iter()
            .map(|&p| {
                state.player_index(p).ok_or_else(|| {
                    Error::Referential(format!("player {p} has no variational factor"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Objective {
            design,
            prior: *prior,
            to_state,
            n_state: state.players.len(),
        })
    }

    pub fn design(&self) -> &PairDesign {
        &self.design
    }

    fn moments(&self, state: &VariationalState) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let mu = self.to_state.iter().map(|&i| state.mu[i]).collect();
        let var = self
            .to_state
            .iter()
            .map(|&i| {
                let s = state.sigma[i];
                [s[0] * s[0], s[1] * s[1]]
            })
            .collect();
        (mu, var)
    }

    /// Expected log-likelihood of every design row and event type.
    pub fn row_terms(&self, state: &VariationalState) -> Vec<[f64; 2]> {
        let (mu, var) = self.moments(state);
        let lp = self.design.linear_predictors(&mu, &var, &state.psi);
        self.design
            .rows
            .iter()
            .zip(&lp)
            .map(|(row, pred)| {
                let mut out = [0.0; 2];
                for e in 0..2 {
                    let (m, v) = pred[e];
                    out[e] = f64::from(row.x[e]) * (m + row.log_tau)
                        - (m + 0.5 * v + row.log_tau).exp()
                        - row.ln_fact[e];
                }
                out
            })
            .collect()
    }

    /// Sum over all factors of the prior term minus the entropy term, i.e.
    /// minus the KL divergence from the prior.
    pub fn kl_part(&self, state: &VariationalState) -> f64 {
        let (m, s2) = (self.prior.m, self.prior.s * self.prior.s);
        let mut total = 0.0;
        for i in 0..state.players.len() {
            for e in 0..2 {
                let mu = state.mu[i][e];
                let v = state.sigma[i][e] * state.sigma[i][e];
                // prior_term - entropy_term, simplified.
                total += 0.5 * (v / s2).ln() + 0.5 - (v + (mu - m) * (mu - m)) / (2.0 * s2);
            }
        }
        total
    }

    pub fn value(&self, state: &VariationalState) -> f64 {
        let lik: f64 = self.row_terms(state).iter().map(|t| t[0] + t[1]).sum();
        self.kl_part(state) + lik
    }

    /// ELBO and its gradient in the unconstrained coordinates.
    pub fn value_and_grad(&self, state: &VariationalState) -> (f64, ElboGradient) {
        let n = self.n_state;
        let mut g = ElboGradient {
            mu: vec![[0.0; 2]; n],
            log_sigma: vec![[0.0; 2]; n],
            log_lambda1: [0.0; 2],
            log_lambda2: [0.0; 2],
            gamma: [0.0; 2],
        };
        let (m0, s2) = (self.prior.m, self.prior.s * self.prior.s);
        let mut value = self.kl_part(state);
        for i in 0..n {
            for e in 0..2 {
                let v = state.sigma[i][e] * state.sigma[i][e];
                g.mu[i][e] = -(state.mu[i][e] - m0) / s2;
                g.log_sigma[i][e] = 1.0 - v / s2;
            }
        }

        let d = &self.design;
        let (mu, var) = self.moments(state);
        let sums = d.side_sums(&mu, &var);
        let lp = d.linear_predictors(&mu, &var, &state.psi);
        // Per side and event: Σ r τ and Σ D τ² over the side's rows, where
        // r = X − D is the derivative in the row's mean log-rate.
        let mut w = vec![[0.0; 2]; d.sides.len()];
        let mut q = vec![[0.0; 2]; d.sides.len()];
        for (row, pred) in d.rows.iter().zip(&lp) {
            let side = &d.sides[row.side];
            let (own, opp) = (&sums[row.side], &sums[side.opponent]);
            let p = self.to_state[row.player];
            for e in 0..2 {
                let o = 1 - e;
                let psi = &state.psi[e];
                let (m, v) = pred[e];
                let x = f64::from(row.x[e]);
                let big_d = (m + 0.5 * v + row.log_tau).exp();
                value += x * (m + row.log_tau) - big_d - row.ln_fact[e];
                let r = x - big_d;
                let tau = row.tau;
                let a = tau * psi.lambda1;
                let s_i = var[row.player][e];

                g.mu[p][e] += r;
                g.log_sigma[p][e] -= big_d * (1.0 + 2.0 * a) * s_i;
                w[row.side][e] += r * tau;
                q[row.side][e] += big_d * tau * tau;

                let d_l1 = r * tau * own.0[e]
                    - big_d * ((1.0 + a) * tau * s_i + tau * a * (own.1[e] - s_i));
                let d_l2 = -r * tau * opp.0[o] - big_d * tau * tau * psi.lambda2 * opp.1[o];
                g.log_lambda1[e] += psi.lambda1 * d_l1;
                g.log_lambda2[e] += psi.lambda2 * d_l2;
                if side.home {
                    g.gamma[e] += r;
                }
            }
        }
        for (s, side) in d.sides.iter().enumerate() {
            for e in 0..2 {
                let o = 1 - e;
                let psi = &state.psi[e];
                for &r in &side.rows {
                    let p = d.rows[r].player;
                    let sp = self.to_state[p];
                    g.mu[sp][e] += psi.lambda1 * w[s][e];
                    g.log_sigma[sp][e] -= psi.lambda1 * psi.lambda1 * q[s][e] * var[p][e];
                }
                for &r in &d.sides[side.opponent].rows {
                    let p = d.rows[r].player;
                    let sp = self.to_state[p];
                    g.mu[sp][o] -= psi.lambda2 * w[s][e];
                    g.log_sigma[sp][o] -= psi.lambda2 * psi.lambda2 * q[s][e] * var[p][o];
                }
            }
        }
        (value, g)
    }
}

/// Closed-form ELBO.
pub fn elbo(state: &VariationalState, counts: &FixtureCountTable, prior: &PriorSpec) -> Result<f64> {
    state.validate()?;
    Ok(Objective::new(counts, state, prior)?.value(state))
}

/// Analytic gradient of [`elbo`] in (μ, log σ, log λ1, log λ2, γ).
pub fn grad_elbo(
    state: &VariationalState,
    counts: &FixtureCountTable,
    prior: &PriorSpec,
) -> Result<ElboGradient> {
    state.validate()?;
    Ok(Objective::new(counts, state, prior)?.value_and_grad(state).1)
}

/// Expected log-likelihood contributed by one player's counts of one event
/// type, summed over that player's fixtures.
pub fn likelihood_term(
    player: PlayerId,
    event: &str,
    state: &VariationalState,
    counts: &FixtureCountTable,
) -> Result<f64> {
    state.validate()?;
    let e = state.pair.index(event)?;
    let obj = Objective::new(counts, state, &PriorSpec::default())?;
    let Some(p) = obj.design.player_index(player) else {
        return Err(Error::Referential(format!("player {player} is not in the count table")));
    };
    Ok(obj
        .design
        .rows
        .iter()
        .zip(obj.row_terms(state))
        .filter(|(row, _)| row.player == p)
        .map(|(_, t)| t[e])
        .sum())
}
