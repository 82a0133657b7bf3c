//! Adaptive random-walk Metropolis for the goal model, updating one
//! unconstrained coordinate at a time.
//!
//! Coordinates: home, the first T−1 attack and defence effects (the last
//! team's effect is minus the sum of the others), the two effect means, and
//! the logs of the two effect sds.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::TeamId;
use crate::stats::{inv_gamma_log_pdf, mean_var, substream};

use super::{check_features, AbilityFeatures, HierDraw, MatchResult, FLAT_SD, SCALE_PRIOR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    /// Stored draws, pooled over chains.
    pub n_draws: usize,
    /// Sweeps per chain discarded while proposal scales adapt.
    pub warmup: usize,
    /// Sweeps between stored draws.
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Per-coordinate acceptance rate the warmup adaptation aims for.
    pub target_accept: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_draws: 10_000,
            warmup: 2_000,
            thin: 5,
            n_chains: 4,
            seed: 0,
            target_accept: 0.44,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.thin == 0 || self.n_draws < self.n_chains {
            return Err(Error::Config(format!(
                "MCMC needs at least one chain, thinning of at least 1 and one draw per chain: {self:?}"
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target acceptance must be in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }
}

/// Convergence summaries of one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    pub rhat: f64,
}

#[derive(Clone, Debug)]
pub struct McmcFit {
    pub draws: Vec<HierDraw>,
    pub diagnostics: Vec<ParamDiagnostics>,
    /// Post-warmup acceptance rate of each coordinate, averaged over chains.
    /// Exact conditional draws of the group means always count as accepted.
    pub acceptance: Vec<(String, f64)>,
}

impl McmcFit {
    pub fn diagnostic(&self, name: &str) -> Option<&ParamDiagnostics> {
        self.diagnostics.iter().find(|d| d.name == name)
    }
}

/// Fixture data in team-index form.
struct Model {
    teams: Vec<TeamId>,
    home: Vec<usize>,
    away: Vec<usize>,
    y: Vec<(f64, f64)>,
    offsets: Vec<(f64, f64)>,
    /// Fixtures involving each team.
    by_team: Vec<Vec<usize>>,
}

/// Current parameter values with both full effect vectors kept in sync.
#[derive(Clone)]
struct Point {
    home: f64,
    att: Vec<f64>,
    def: Vec<f64>,
    mu: [f64; 2],
    log_sigma: [f64; 2],
}

impl Model {
    fn fixture_ll(&self, p: &Point, k: usize) -> f64 {
        let (h, a) = (self.home[k], self.away[k]);
        let lh = p.home + p.att[h] + p.def[a] + self.offsets[k].0;
        let la = p.att[a] + p.def[h] + self.offsets[k].1;
        self.y[k].0 * lh - lh.exp() + self.y[k].1 * la - la.exp()
    }

    fn group_prior(&self, p: &Point, g: usize) -> f64 {
        let sigma = p.log_sigma[g].exp();
        let effects = if g == 0 { &p.att } else { &p.def };
        let n = effects.len() as f64;
        let ss: f64 = effects.iter().map(|x| (x - p.mu[g]) * (x - p.mu[g])).sum();
        let effects_lp = -n * p.log_sigma[g] - ss / (2.0 * sigma * sigma);
        let mean_lp = -p.mu[g] * p.mu[g] / (2.0 * FLAT_SD * FLAT_SD);
        // Inverse-gamma on σ with the Jacobian of σ = exp(log σ).
        let scale_lp = inv_gamma_log_pdf(sigma, SCALE_PRIOR.0, SCALE_PRIOR.1) + p.log_sigma[g];
        let total = effects_lp + mean_lp + scale_lp;
        if total.is_nan() || !sigma.is_finite() || sigma == 0.0 {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    /// Log target up to a constant: Poisson likelihood without the
    /// factorials, all priors, and the log-σ Jacobians.
    fn log_target(&self, p: &Point) -> f64 {
        let ll: f64 = (0..self.y.len()).map(|k| self.fixture_ll(p, k)).sum();
        ll - p.home * p.home / (2.0 * FLAT_SD * FLAT_SD) + self.group_prior(p, 0) + self.group_prior(p, 1)
    }

    /// Fixtures touched by changing team `j` and the constrained last team.
    fn touched(&self, j: usize) -> Vec<usize> {
        let last = self.teams.len() - 1;
        let mut ks: Vec<usize> = self.by_team[j].iter().chain(&self.by_team[last]).copied().collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

fn to_draw(teams: &[TeamId], p: &Point) -> HierDraw {
    HierDraw {
        home: p.home,
        att: teams.iter().copied().zip(p.att.iter().copied()).collect(),
        def: teams.iter().copied().zip(p.def.iter().copied()).collect(),
        mu_att: p.mu[0],
        mu_def: p.mu[1],
        sigma_att: p.log_sigma[0].exp(),
        sigma_def: p.log_sigma[1].exp(),
    }
}

/// Coordinate kinds in sweep order.
#[derive(Clone, Copy, Debug)]
enum Coord {
    Home,
    Effect(usize, usize),
    Mean(usize),
    LogSigma(usize),
    /// Joint rescaling of a group's effects, mean and sd, which moves along
    /// the funnel between small σ and tightly packed effects.
    Scale(usize),
}

fn coordinates(n_teams: usize) -> Vec<Coord> {
    let mut out = vec![Coord::Home];
    for g in 0..2 {
        out.extend((0..n_teams - 1).map(|j| Coord::Effect(g, j)));
    }
    out.extend([
        Coord::Mean(0),
        Coord::Mean(1),
        Coord::LogSigma(0),
        Coord::LogSigma(1),
        Coord::Scale(0),
        Coord::Scale(1),
    ]);
    out
}

fn coord_name(c: Coord, teams: &[TeamId]) -> String {
    match c {
        Coord::Home => "home".into(),
        Coord::Effect(0, j) => format!("att[{}]", teams[j]),
        Coord::Effect(_, j) => format!("def[{}]", teams[j]),
        Coord::Mean(0) => "mu_att".into(),
        Coord::Mean(_) => "mu_def".into(),
        Coord::LogSigma(0) => "log_sigma_att".into(),
        Coord::LogSigma(_) => "log_sigma_def".into(),
        Coord::Scale(0) => "scale_att".into(),
        Coord::Scale(_) => "scale_def".into(),
    }
}

struct ChainOutput {
    draws: Vec<HierDraw>,
    accept: Vec<f64>,
}

fn run_chain(model: &Model, config: &McmcConfig, chain: usize, n_keep: usize) -> Result<ChainOutput> {
    let t = model.teams.len();
    let last = t - 1;
    let mut rng = substream(config.seed, chain as u64);
    let jitter = |rng: &mut rand_chacha::ChaCha8Rng, sd: f64| -> f64 {
        sd * rng.sample::<f64, _>(StandardNormal)
    };
    let mut p = Point {
        home: jitter(&mut rng, 0.1),
        att: vec![0.0; t],
        def: vec![0.0; t],
        mu: [jitter(&mut rng, 0.1), jitter(&mut rng, 0.1)],
        log_sigma: [(0.3f64).ln() + jitter(&mut rng, 0.1), (0.3f64).ln() + jitter(&mut rng, 0.1)],
    };
    for g in 0..2 {
        let effects = if g == 0 { &mut p.att } else { &mut p.def };
        for j in 0..last {
            effects[j] = jitter(&mut rng, 0.1);
        }
        effects[last] = -effects[..last].iter().sum::<f64>();
    }
    let start = model.log_target(&p);
    if !start.is_finite() {
        return Err(Error::Sampler(format!(
            "chain {chain}: log posterior is not finite at the starting point"
        )));
    }

    let coords = coordinates(t);
    let mut log_scale: Vec<f64> = coords
        .iter()
        .map(|c| match c {
            Coord::Home => (0.1f64).ln(),
            _ => (0.2f64).ln(),
        })
        .collect();
    let mut accepted = vec![0usize; coords.len()];
    let mut batch_accepted = vec![0usize; coords.len()];
    let mut batches = 0usize;
    const BATCH: usize = 50;

    let total_sweeps = config.warmup + n_keep * config.thin;
    let mut draws = Vec::with_capacity(n_keep);
    for sweep in 0..total_sweeps {
        for (ci, &c) in coords.iter().enumerate() {
            let step = log_scale[ci].exp() * rng.sample::<f64, _>(StandardNormal);
            let log_u: f64 = rng.random::<f64>().ln();
            let ok = match c {
                Coord::Home => {
                    let old: f64 = (0..model.y.len()).map(|k| model.fixture_ll(&p, k)).sum::<f64>()
                        - p.home * p.home / (2.0 * FLAT_SD * FLAT_SD);
                    let saved = p.home;
                    p.home += step;
                    let new: f64 = (0..model.y.len()).map(|k| model.fixture_ll(&p, k)).sum::<f64>()
                        - p.home * p.home / (2.0 * FLAT_SD * FLAT_SD);
                    let ok = log_u < new - old;
                    if !ok {
                        p.home = saved;
                    }
                    ok
                }
                Coord::Effect(g, j) => {
                    let ks = model.touched(j);
                    let old = ks.iter().map(|&k| model.fixture_ll(&p, k)).sum::<f64>() + model.group_prior(&p, g);
                    let effects = if g == 0 { &mut p.att } else { &mut p.def };
                    effects[j] += step;
                    effects[last] -= step;
                    let new = ks.iter().map(|&k| model.fixture_ll(&p, k)).sum::<f64>() + model.group_prior(&p, g);
                    let ok = log_u < new - old;
                    if !ok {
                        let effects = if g == 0 { &mut p.att } else { &mut p.def };
                        effects[j] -= step;
                        effects[last] += step;
                    }
                    ok
                }
                Coord::Mean(g) => {
                    // μ is absent from the likelihood, so its full
                    // conditional is the normal from the group prior.
                    let effects = if g == 0 { &p.att } else { &p.def };
                    let var_inv = (-2.0 * p.log_sigma[g]).exp();
                    let precision = effects.len() as f64 * var_inv + 1.0 / (FLAT_SD * FLAT_SD);
                    let mean = effects.iter().sum::<f64>() * var_inv / precision;
                    p.mu[g] = mean + rng.sample::<f64, _>(StandardNormal) / precision.sqrt();
                    true
                }
                Coord::LogSigma(g) => {
                    let old = model.group_prior(&p, g);
                    p.log_sigma[g] += step;
                    let ok = log_u < model.group_prior(&p, g) - old;
                    if !ok {
                        p.log_sigma[g] -= step;
                    }
                    ok
                }
                Coord::Scale(g) => {
                    // x -> e^step x on the t - 1 free effects and μ, a shift
                    // on log σ: log Jacobian t * step.
                    let old = model.log_target(&p);
                    let saved = p.clone();
                    let c = step.exp();
                    let effects = if g == 0 { &mut p.att } else { &mut p.def };
                    effects.iter_mut().for_each(|x| *x *= c);
                    p.mu[g] *= c;
                    p.log_sigma[g] += step;
                    let ok = log_u < model.log_target(&p) - old + t as f64 * step;
                    if !ok {
                        p = saved;
                    }
                    ok
                }
            };
            if ok {
                if sweep < config.warmup {
                    batch_accepted[ci] += 1;
                } else {
                    accepted[ci] += 1;
                }
            }
        }
        if sweep < config.warmup && (sweep + 1) % BATCH == 0 {
            batches += 1;
            let delta = (1.0 / (batches as f64).sqrt()).min(0.5);
            for ci in 0..coords.len() {
                let rate = batch_accepted[ci] as f64 / BATCH as f64;
                log_scale[ci] += if rate > config.target_accept { delta } else { -delta };
                batch_accepted[ci] = 0;
            }
        }
        if sweep >= config.warmup && (sweep - config.warmup + 1).is_multiple_of(config.thin) {
            // Rebuild the constrained effects exactly from the free ones so
            // stored draws sum to zero without accumulated drift.
            for effects in [&mut p.att, &mut p.def] {
                effects[last] = -effects[..last].iter().sum::<f64>();
            }
            draws.push(to_draw(&model.teams, &p));
        }
    }
    let post = (total_sweeps - config.warmup).max(1) as f64;
    Ok(ChainOutput {
        draws,
        accept: accepted.iter().map(|&a| a as f64 / post).collect(),
    })
}

/// Samples the goal model's posterior. `teams` fixes the team set (every
/// team in `data` must be listed); with no fixtures the sampler targets the
/// prior.
pub fn mcmc_fit(
    teams: &BTreeSet<TeamId>,
    data: &[MatchResult],
    features: Option<&[AbilityFeatures]>,
    config: &McmcConfig,
) -> Result<McmcFit> {
    config.validate()?;
    check_features(data, features)?;
    if teams.len() < 2 {
        return Err(Error::Domain(format!("need at least two teams, got {}", teams.len())));
    }
    let teams: Vec<TeamId> = teams.iter().copied().collect();
    let index: BTreeMap<TeamId, usize> = teams.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let lookup = |t: TeamId| {
        index
            .get(&t)
            .copied()
            .ok_or_else(|| Error::Referential(format!("team {t} is not in the team set")))
    };
    let mut model = Model {
        teams: teams.clone(),
        home: Vec::with_capacity(data.len()),
        away: Vec::with_capacity(data.len()),
        y: Vec::with_capacity(data.len()),
        offsets: Vec::with_capacity(data.len()),
        by_team: vec![Vec::new(); teams.len()],
    };
    for (k, m) in data.iter().enumerate() {
        let (h, a) = (lookup(m.home_team)?, lookup(m.away_team)?);
        model.home.push(h);
        model.away.push(a);
        model.y.push((f64::from(m.y_h), f64::from(m.y_a)));
        let f = features.map(|f| f[k]).unwrap_or_default();
        if !(f.f_h.is_finite() && f.f_a.is_finite()) {
            return Err(Error::Domain(format!("non-finite lineup term for fixture {}", m.fixture)));
        }
        model.offsets.push((f.f_h, f.f_a));
        model.by_team[h].push(k);
        model.by_team[a].push(k);
    }

    let per_chain = config.n_draws / config.n_chains;
    let chains: Vec<ChainOutput> = (0..config.n_chains)
        .map(|c| run_chain(&model, config, c, per_chain))
        .collect::<Result<_>>()?;

    let coords = coordinates(teams.len());
    let acceptance = coords
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let rate = chains.iter().map(|ch| ch.accept[ci]).sum::<f64>() / chains.len() as f64;
            (coord_name(*c, &teams), rate)
        })
        .collect();

    let diagnostics = diagnose(&teams, &chains);
    let draws = chains.into_iter().flat_map(|c| c.draws).collect();
    Ok(McmcFit {
        draws,
        diagnostics,
        acceptance,
    })
}

fn diagnose(teams: &[TeamId], chains: &[ChainOutput]) -> Vec<ParamDiagnostics> {
    let mut series: Vec<(String, Box<dyn Fn(&HierDraw) -> f64>)> = vec![
        ("home".into(), Box::new(|d: &HierDraw| d.home)),
        ("mu_att".into(), Box::new(|d: &HierDraw| d.mu_att)),
        ("mu_def".into(), Box::new(|d: &HierDraw| d.mu_def)),
        ("sigma_att".into(), Box::new(|d: &HierDraw| d.sigma_att)),
        ("sigma_def".into(), Box::new(|d: &HierDraw| d.sigma_def)),
    ];
    for &t in teams {
        series.push((format!("att[{t}]"), Box::new(move |d: &HierDraw| d.att[&t])));
        series.push((format!("def[{t}]"), Box::new(move |d: &HierDraw| d.def[&t])));
    }
    series
        .into_iter()
        .map(|(name, f)| {
            let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.draws.iter().map(&f).collect()).collect();
            let pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
            let (mean, var) = if pooled.len() > 1 { mean_var(&pooled) } else { (pooled[0], 0.0) };
            ParamDiagnostics {
                name,
                mean,
                sd: var.sqrt(),
                ess: effective_sample_size(&per_chain),
                rhat: split_rhat(&per_chain),
            }
        })
        .collect()
}

/// Potential scale reduction with every chain split in half.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect();
    let n = halves.first().map_or(0, |h| h.len());
    if n < 2 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let m = stats.len() as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n as f64 * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Multi-chain effective sample size using Geyer's initial monotone
/// sequence on the chain-averaged autocorrelations.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(&c[..n])).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 {
        stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0)
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if var_plus == 0.0 {
        return (m * n) as f64;
    }
    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| {
                (0..n - lag).map(|i| (c[i] - s.0) * (c[i + lag] - s.0)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        lag += 2;
    }
    let tau = -1.0 + 2.0 * sum_pairs;
    (m * n) as f64 / tau.max(1.0 / ((m * n) as f64).log10().max(1.0))
}
