//! Full-batch adaptive gradient ascent on the closed-form ELBO.

use serde::{Deserialize, Serialize};

use crate::ability::{EventPair, PriorSpec, Psi};
use crate::error::{Error, Result};
use crate::events::FixtureCountTable;

use super::{Objective, VariationalState};

/// Settings of the ascent. Steps follow Adam's moment-scaled update with a
/// learning rate decaying geometrically from `learning_rate` to
/// `final_learning_rate` over `max_iters`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Keep (λ1, λ2, γ) at their starting values.
    pub psi_frozen: bool,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    /// Stop at the first converged iteration instead of running to
    /// `max_iters`.
    pub early_stop: bool,
    pub trace_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 7000,
            learning_rate: 0.01,
            final_learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            psi_frozen: false,
            convergence_window: 500,
            convergence_tol: 1e-6,
            early_stop: false,
            trace_every: 100,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.final_learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.convergence_window >= 1
            && self.trace_every >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings: {self:?}")))
        }
    }

    pub fn step_size(&self, iter: usize) -> f64 {
        if self.max_iters == 0 {
            return self.learning_rate;
        }
        let frac = iter as f64 / self.max_iters as f64;
        self.learning_rate * (self.final_learning_rate / self.learning_rate).powf(frac)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub elbo: f64,
    pub psi: [Psi; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElboTrace {
    /// Every `trace_every` iterations, plus the final state.
    pub points: Vec<TracePoint>,
    /// ELBO before each step, and after the last one.
    pub history: Vec<f64>,
    /// First iteration whose relative ELBO change over the convergence
    /// window fell below tolerance.
    pub converged_at: Option<usize>,
}

/// Fits the pair's variational factors from the prior-centred start.
pub fn fit(
    counts: &FixtureCountTable,
    pair: &EventPair,
    prior: &PriorSpec,
    config: &OptimizerConfig,
) -> Result<(VariationalState, ElboTrace)> {
    let init = VariationalState::for_counts(counts, pair.clone(), prior);
    fit_from(counts, init, prior, config)
}

/// Fits from a given starting state.
pub fn fit_from(
    counts: &FixtureCountTable,
    init: VariationalState,
    prior: &PriorSpec,
    config: &OptimizerConfig,
) -> Result<(VariationalState, ElboTrace)> {
    config.validate()?;
    init.validate()?;
    let objective = Objective::new(counts, &init, prior)?;
    let mut state = init;
    let mut params = state.to_params();
    let n = params.len();
    let n_players = state.players.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = ElboTrace::default();

    let mut iter = 0;
    loop {
        let (value, grad) = objective.value_and_grad(&state);
        let mut grad = grad.flatten();
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                iteration: iter,
                coordinate: state.coordinate_name(k),
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                iteration: iter,
                coordinate: "elbo".into(),
            });
        }
        trace.history.push(value);
        let done = iter == config.max_iters;
        if iter % config.trace_every == 0 || done {
            trace.points.push(TracePoint {
                iter,
                elbo: value,
                psi: state.psi,
            });
        }
        if trace.converged_at.is_none() && iter >= config.convergence_window {
            let before = trace.history[iter - config.convergence_window];
            if ((value - before) / value.abs().max(f64::MIN_POSITIVE)).abs() < config.convergence_tol {
                trace.converged_at = Some(iter);
                tracing::debug!(iter, value, "elbo converged");
            }
        }
        if done || (config.early_stop && trace.converged_at.is_some()) {
            if !done {
                trace.points.retain(|p| p.iter != iter);
                trace.points.push(TracePoint {
                    iter,
                    elbo: value,
                    psi: state.psi,
                });
            }
            break;
        }

        if config.psi_frozen {
            for g in &mut grad[4 * n_players..] {
                *g = 0.0;
            }
        }
        let lr = config.step_size(iter);
        let t = (iter + 1) as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for k in 0..n {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
            params[k] += lr * (m[k] / c1) / ((v[k] / c2).sqrt() + config.epsilon);
        }
        state.set_params(&params);
        iter += 1;
    }
    Ok((state, trace))
}
